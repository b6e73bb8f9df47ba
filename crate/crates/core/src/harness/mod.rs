//! Convergence studies: parameter sweeps, error measurement, log-log rates and reports.

mod config;
mod plot;
mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    parse_key_values, Axis, Coupling, DeltaRule, ErrorRule, Format, Norm, StepsRule, StudyConfig, LONG_RUN_STEPS,
};
pub use plot::{emit_loglog_plot, render_loglog_svg};
pub use report::{format_sci, parse_csv, read_json, write_csv, write_json, write_report};

use crate::assembly::error_norms_with;
use crate::error::{Error, Result};
use crate::problems::{ProblemId, ProblemSpec};
use crate::scheme::{run, DiscreteProblem};

/// One `(alpha, delta, P, N)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub alpha: f64,
    pub delta: f64,
    #[serde(rename = "P")]
    pub subdivisions: usize,
    #[serde(rename = "N")]
    pub steps: usize,
    pub l2_error: Option<f64>,
    pub h1_error: Option<f64>,
    pub l2_rate: Option<f64>,
    pub h1_rate: Option<f64>,
    /// Mesh parameter used in the rate formula.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rate_parameter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

impl StudyRow {
    pub fn new(alpha: f64, delta: f64, subdivisions: usize, steps: usize) -> Self {
        Self {
            alpha,
            delta,
            subdivisions,
            steps,
            l2_error: None,
            h1_error: None,
            l2_rate: None,
            h1_rate: None,
            rate_parameter: None,
            failure: None,
        }
    }

    pub fn error(&self, norm: Norm) -> Option<f64> {
        match norm {
            Norm::L2 => self.l2_error,
            Norm::H1 => self.h1_error,
            Norm::Both => None,
        }
    }

    pub fn rate(&self, norm: Norm) -> Option<f64> {
        match norm {
            Norm::L2 => self.l2_rate,
            Norm::H1 => self.h1_rate,
            Norm::Both => None,
        }
    }

    fn same_series(&self, other: &StudyRow) -> bool {
        self.alpha == other.alpha && self.delta == other.delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetadata {
    pub problem: ProblemId,
    pub axis: Axis,
    pub norm: Norm,
    #[serde(default)]
    pub error_rule: ErrorRule,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coupling: Option<Coupling>,
    /// Slope of the guide line drawn in plots.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_slope: Option<f64>,
    pub wall_time_seconds: f64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub metadata: StudyMetadata,
    pub rows: Vec<StudyRow>,
}

/// Observed decay order between two runs: `log(e1/e2) / log(m2/m1)`.
///
/// Positive when the error falls as the mesh parameter grows.
pub fn loglog_rate(e1: f64, e2: f64, m1: f64, m2: f64) -> Result<f64> {
    for (name, v) in [("e1", e1), ("e2", e2), ("m1", m1), ("m2", m2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!(
                "loglog_rate needs positive inputs, {name} = {v}"
            )));
        }
    }
    if m1 == m2 {
        return Err(Error::Domain("loglog_rate needs distinct mesh parameters".into()));
    }
    Ok((e1 / e2).ln() / (m2 / m1).ln())
}

/// Maximum over levels `1..=N` of the L2 and H1-seminorm errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunErrors {
    pub l2: f64,
    pub h1: f64,
    pub newton_iterations: usize,
}

/// Solve one configuration and measure its errors against the exact solution.
pub fn solve_case(
    spec: &ProblemSpec,
    subdivisions: usize,
    steps: usize,
    delta: f64,
    error_rule: ErrorRule,
) -> Result<RunErrors> {
    let problem = DiscreteProblem::from_spec(spec, subdivisions, steps, delta)?;
    let trace = run(&problem)?;
    let mut l2 = 0.0f64;
    let mut h1 = 0.0f64;
    for n in 1..=steps {
        let t = problem.time_mesh.node(n);
        let (e0, e1) = error_norms_with(
            &problem.space,
            &trace.solutions[n],
            &|x, y| spec.exact(x, y, t),
            &|x, y| spec.exact_grad(x, y, t),
            error_rule.rule(),
        )?;
        l2 = l2.max(e0);
        h1 = h1.max(e1);
    }
    if !(l2.is_finite() && h1.is_finite()) {
        return Err(Error::NonFinite("error norms"));
    }
    Ok(RunErrors {
        l2,
        h1,
        newton_iterations: trace.newton_iterations,
    })
}

fn reference_slope(config: &StudyConfig) -> Option<f64> {
    let norm = match config.norm {
        Norm::H1 => Norm::H1,
        _ => Norm::L2,
    };
    let alpha = *config.alphas.first()?;
    Some(match (config.axis, norm) {
        (Axis::Space, Norm::H1) => 1.0,
        (Axis::Space, _) => 2.0,
        (Axis::Time, _) => (config.delta.grading(alpha) * alpha).min(2.0 - alpha),
    })
}

/// Run every `(alpha, P, N)` of the configuration.
///
/// Runs execute in parallel; rows are ordered by alpha (configuration order), then `P`, then `N`.
/// A failing run keeps its row with the failure message and no errors.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let start = Instant::now();
    let mut jobs = Vec::new();
    for &alpha in &config.alphas {
        let delta = config.delta.grading(alpha);
        let mut runs = config.runs(alpha);
        runs.sort_unstable();
        runs.dedup();
        for (p, n) in runs {
            jobs.push((alpha, delta, p, n));
        }
    }
    let specs: Vec<(f64, Result<ProblemSpec>)> = config.alphas.iter().map(|&a| (a, config.problem.build(a))).collect();

    let mut rows: Vec<StudyRow> = jobs
        .par_iter()
        .map(|&(alpha, delta, p, n)| {
            let mut row = StudyRow::new(alpha, delta, p, n);
            row.rate_parameter = Some(config.rate_parameter(alpha, p, n));
            let spec = specs.iter().find(|(a, _)| *a == alpha).map(|(_, s)| s);
            let outcome = match spec {
                Some(Ok(spec)) => solve_case(spec, p, n, delta, config.error_rule),
                Some(Err(e)) => Err(e.clone()),
                None => Err(Error::Config(format!("no problem built for alpha = {alpha}"))),
            };
            match outcome {
                Ok(errors) => {
                    if config.norm.includes_l2() {
                        row.l2_error = Some(errors.l2);
                    }
                    if config.norm.includes_h1() {
                        row.h1_error = Some(errors.h1);
                    }
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            row
        })
        .collect();
    fill_rates(&mut rows)?;

    Ok(StudyReport {
        metadata: StudyMetadata {
            problem: config.problem,
            axis: config.axis,
            norm: config.norm,
            error_rule: config.error_rule,
            coupling: match config.steps {
                StepsRule::Coupled(c) => Some(c),
                StepsRule::Explicit(_) => None,
            },
            reference_slope: reference_slope(config),
            wall_time_seconds: start.elapsed().as_secs_f64(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        rows,
    })
}

/// Set rates on every row whose predecessor belongs to the same `(alpha, delta)` series.
pub fn fill_rates(rows: &mut [StudyRow]) -> Result<()> {
    for i in 1..rows.len() {
        let (head, tail) = rows.split_at_mut(i);
        let (prev, row) = (&head[i - 1], &mut tail[0]);
        row.l2_rate = None;
        row.h1_rate = None;
        if !row.same_series(prev) {
            continue;
        }
        let (Some(m1), Some(m2)) = (prev.rate_parameter, row.rate_parameter) else {
            continue;
        };
        if let (Some(e1), Some(e2)) = (prev.l2_error, row.l2_error) {
            row.l2_rate = loglog_rate(e1, e2, m1, m2).ok();
        }
        if let (Some(e1), Some(e2)) = (prev.h1_error, row.h1_error) {
            row.h1_rate = loglog_rate(e1, e2, m1, m2).ok();
        }
    }
    Ok(())
}
