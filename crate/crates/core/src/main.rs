use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use kirchhoff_l1::fractional::{l1_kernels, GradedTimeMesh};
use kirchhoff_l1::harness::{
    emit_loglog_plot, run_study, solve_case, write_csv, write_json, write_report, Axis, Coupling, DeltaRule, ErrorRule,
    Format, Norm, StepsRule, StudyConfig, StudyMetadata, StudyReport, StudyRow, LONG_RUN_STEPS,
};
use kirchhoff_l1::problems::ProblemId;

/// Linearized L1 Galerkin solver and convergence studies for Kirchhoff-type
/// time-fractional integro-differential equations.
#[derive(Parser, Debug)]
#[command(name = "kirchhoff-l1", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration and report its max-in-time errors.
    Solve(SolveArgs),
    /// Run a convergence study.
    Study(StudyArgs),
    /// Print L1 kernel rows of a graded mesh.
    Kernels(KernelArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// kirchhoff-sin or kirchhoff-poly
    #[arg(long, default_value = "kirchhoff-sin")]
    example: ProblemId,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, conflicts_with = "delta_optimal")]
    delta: Option<f64>,
    /// Use delta = (2 - alpha) / alpha.
    #[arg(long)]
    delta_optimal: bool,
    /// Cells per direction (P).
    #[arg(long, default_value_t = 9)]
    grid: usize,
    /// Time steps (N).
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// seven-point or centroid
    #[arg(long, default_value = "seven-point")]
    error_rule: ErrorRule,
    #[arg(long)]
    allow_long: bool,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    example: Option<ProblemId>,
    /// Comma-separated alpha values.
    #[arg(long)]
    alpha: Option<String>,
    /// Grading exponent, or "optimal".
    #[arg(long)]
    delta: Option<DeltaRule>,
    #[arg(long, conflicts_with = "delta")]
    delta_optimal: bool,
    /// space or time
    #[arg(long)]
    axis: Option<Axis>,
    /// Comma-separated grid sizes P.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated step counts N.
    #[arg(long, conflicts_with = "coupling")]
    steps: Option<String>,
    /// N = floor(P^e) with e one of 2/alpha, 2/(2-alpha), 1/alpha, 1/(2-alpha).
    #[arg(long)]
    coupling: Option<Coupling>,
    /// l2, h1 or both
    #[arg(long)]
    norm: Option<Norm>,
    /// seven-point or centroid
    #[arg(long)]
    error_rule: Option<ErrorRule>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Write an SVG log-log plot (L2 unless --norm h1).
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    allow_long: bool,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    final_time: f64,
    /// Levels to print; all levels when omitted.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<usize>,
}

fn emit(report: &StudyReport, format: Format, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => write_report(report, format, path).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let stdout = std::io::stdout().lock();
            match format {
                Format::Csv => write_csv(report, stdout)?,
                Format::Json => write_json(report, stdout)?,
            }
        }
    }
    Ok(())
}

fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let delta = if args.delta_optimal {
        (2.0 - args.alpha) / args.alpha
    } else {
        args.delta.unwrap_or(1.0)
    };
    if args.steps > LONG_RUN_STEPS && !args.allow_long {
        bail!(
            "N = {} exceeds {LONG_RUN_STEPS}; pass --allow-long to run it",
            args.steps
        );
    }
    let start = std::time::Instant::now();
    let spec = args.example.build(args.alpha)?;
    let errors = solve_case(&spec, args.grid, args.steps, delta, args.error_rule)?;
    let mut row = StudyRow::new(args.alpha, delta, args.grid, args.steps);
    row.l2_error = Some(errors.l2);
    row.h1_error = Some(errors.h1);
    let report = StudyReport {
        metadata: StudyMetadata {
            problem: args.example,
            axis: Axis::Space,
            norm: Norm::Both,
            error_rule: args.error_rule,
            coupling: None,
            reference_slope: None,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        rows: vec![row],
    };
    emit(&report, args.format, args.out.as_ref())
}

fn study_config(args: &StudyArgs) -> anyhow::Result<StudyConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            StudyConfig::from_text(&text)?
        }
        None => StudyConfig::default(),
    };
    if let Some(p) = args.example {
        cfg.problem = p;
    }
    if let Some(a) = &args.alpha {
        cfg.apply("alpha", a)?;
    }
    if let Some(d) = args.delta {
        cfg.delta = d;
    }
    if args.delta_optimal {
        cfg.delta = DeltaRule::Optimal;
    }
    if let Some(a) = args.axis {
        cfg.axis = a;
    }
    if let Some(g) = &args.grid {
        cfg.apply("grid", g)?;
    }
    if let Some(s) = &args.steps {
        cfg.apply("steps", s)?;
    }
    if let Some(c) = args.coupling {
        cfg.steps = StepsRule::Coupled(c);
        cfg.axis = args.axis.unwrap_or(Axis::Time);
    }
    if let Some(n) = args.norm {
        cfg.norm = n;
    }
    if let Some(r) = args.error_rule {
        cfg.error_rule = r;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.display().to_string());
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if let Some(p) = &args.plot {
        cfg.plot = Some(p.display().to_string());
    }
    if args.allow_long {
        cfg.allow_long = true;
    }
    Ok(cfg)
}

fn study(args: StudyArgs) -> anyhow::Result<()> {
    let cfg = study_config(&args)?;
    let report = run_study(&cfg)?;
    emit(&report, cfg.format, cfg.output.as_ref().map(PathBuf::from).as_ref())?;
    if let Some(plot) = &cfg.plot {
        let norm = if cfg.norm == Norm::H1 { Norm::H1 } else { Norm::L2 };
        emit_loglog_plot(&report, norm, plot).with_context(|| format!("writing {plot}"))?;
    }
    if let Some(row) = report.rows.iter().find(|r| r.failure.is_some()) {
        bail!(
            "run alpha = {}, P = {}, N = {} failed: {}",
            row.alpha,
            row.subdivisions,
            row.steps,
            row.failure.as_deref().unwrap_or("")
        );
    }
    Ok(())
}

fn kernels(args: KernelArgs) -> anyhow::Result<()> {
    let mesh = GradedTimeMesh::new(args.final_time, args.steps, args.delta)?;
    let levels: Vec<usize> = if args.levels.is_empty() {
        (1..=args.steps).collect()
    } else {
        args.levels
    };
    let mut out = std::io::stdout().lock();
    use std::io::Write;
    for n in levels {
        let row = l1_kernels(&mesh, args.alpha, n)?;
        let line = json!({ "level": n, "t": mesh.node(n), "tau": mesh.step(n), "kernels": row.kernels() });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Study(a) => study(a),
        Command::Kernels(a) => kernels(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            eprintln!("{}", json!({ "error": e.to_string(), "causes": chain }));
            ExitCode::FAILURE
        }
    }
}
