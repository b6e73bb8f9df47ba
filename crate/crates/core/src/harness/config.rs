//! Study configuration and the flat `key = value` config format.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::ProblemId;
use crate::quadrature::{centroid, seven_point, TriangleRule};

/// Runs with more time levels than this need `allow_long`.
pub const LONG_RUN_STEPS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaRule {
    Explicit(f64),
    /// `delta = (2 - alpha) / alpha`.
    Optimal,
}

impl DeltaRule {
    pub fn grading(self, alpha: f64) -> f64 {
        match self {
            DeltaRule::Explicit(d) => d,
            DeltaRule::Optimal => (2.0 - alpha) / alpha,
        }
    }
}

impl FromStr for DeltaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "optimal" => Ok(DeltaRule::Optimal),
            v => parse_f64("delta", v).map(DeltaRule::Explicit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Space,
    Time,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "space" => Ok(Axis::Space),
            "time" => Ok(Axis::Time),
            other => Err(Error::Config(format!("unknown axis {other:?}, expected space or time"))),
        }
    }
}

/// Power law tying the number of time steps to the grid: `N = floor(P^e(alpha))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coupling {
    #[serde(rename = "2/alpha")]
    TwoOverAlpha,
    #[serde(rename = "2/(2-alpha)")]
    TwoOverTwoMinusAlpha,
    #[serde(rename = "1/alpha")]
    OneOverAlpha,
    #[serde(rename = "1/(2-alpha)")]
    OneOverTwoMinusAlpha,
}

impl Coupling {
    pub const ALL: [Coupling; 4] = [
        Coupling::TwoOverAlpha,
        Coupling::TwoOverTwoMinusAlpha,
        Coupling::OneOverAlpha,
        Coupling::OneOverTwoMinusAlpha,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Coupling::TwoOverAlpha => "2/alpha",
            Coupling::TwoOverTwoMinusAlpha => "2/(2-alpha)",
            Coupling::OneOverAlpha => "1/alpha",
            Coupling::OneOverTwoMinusAlpha => "1/(2-alpha)",
        }
    }

    pub fn exponent(self, alpha: f64) -> f64 {
        match self {
            Coupling::TwoOverAlpha => 2.0 / alpha,
            Coupling::TwoOverTwoMinusAlpha => 2.0 / (2.0 - alpha),
            Coupling::OneOverAlpha => 1.0 / alpha,
            Coupling::OneOverTwoMinusAlpha => 1.0 / (2.0 - alpha),
        }
    }

    /// `P^e` before flooring.
    pub fn nominal(self, subdivisions: usize, alpha: f64) -> f64 {
        (subdivisions as f64).powf(self.exponent(alpha))
    }

    /// `floor(P^e)`, guarded against `powf` landing just below an exact integer.
    pub fn steps(self, subdivisions: usize, alpha: f64) -> usize {
        let v = self.nominal(subdivisions, alpha);
        ((v * (1.0 + 4.0 * f64::EPSILON)).floor() as usize).max(1)
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        Coupling::ALL
            .into_iter()
            .find(|c| c.as_str() == compact)
            .ok_or_else(|| Error::Config(format!("unknown coupling {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepsRule {
    /// One list of step counts. Broadcast against the grid list or zipped with it.
    Explicit(Vec<usize>),
    Coupled(Coupling),
}

impl FromStr for StepsRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains('/') {
            let body = s.trim().trim_start_matches("coupled:").trim_start_matches("coupled");
            return Coupling::from_str(body).map(StepsRule::Coupled);
        }
        parse_list::<usize>("steps", s).map(StepsRule::Explicit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    H1,
    Both,
}

impl Norm {
    pub fn includes_l2(self) -> bool {
        matches!(self, Norm::L2 | Norm::Both)
    }

    pub fn includes_h1(self) -> bool {
        matches!(self, Norm::H1 | Norm::Both)
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" => Ok(Norm::L2),
            "h1" => Ok(Norm::H1),
            "both" => Ok(Norm::Both),
            other => Err(Error::Config(format!(
                "unknown norm {other:?}, expected l2, h1 or both"
            ))),
        }
    }
}

/// Quadrature used to integrate the error norms on each triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorRule {
    /// Degree-5 rule; accurate norms.
    #[default]
    SevenPoint,
    /// Midpoint rule at the triangle centroid.
    Centroid,
}

impl ErrorRule {
    pub fn rule(self) -> &'static TriangleRule {
        match self {
            ErrorRule::SevenPoint => seven_point(),
            ErrorRule::Centroid => centroid(),
        }
    }
}

impl FromStr for ErrorRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "seven-point" => Ok(ErrorRule::SevenPoint),
            "centroid" => Ok(ErrorRule::Centroid),
            other => Err(Error::Config(format!(
                "unknown error rule {other:?}, expected seven-point or centroid"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format {other:?}, expected csv or json"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub problem: ProblemId,
    pub alphas: Vec<f64>,
    pub delta: DeltaRule,
    pub axis: Axis,
    pub grids: Vec<usize>,
    pub steps: StepsRule,
    pub norm: Norm,
    pub error_rule: ErrorRule,
    pub allow_long: bool,
    pub output: Option<String>,
    pub format: Format,
    pub plot: Option<String>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            problem: ProblemId::KirchhoffSin,
            alphas: vec![0.5],
            delta: DeltaRule::Explicit(1.0),
            axis: Axis::Space,
            grids: vec![9, 10, 11, 12],
            steps: StepsRule::Explicit(vec![5000]),
            norm: Norm::Both,
            error_rule: ErrorRule::SevenPoint,
            allow_long: false,
            output: None,
            format: Format::Csv,
            plot: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.grids.is_empty() {
            return Err(Error::Config("alpha and grid lists must be non-empty".into()));
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("alpha must lie in (0, 1), got {a}")));
            }
            let d = self.delta.grading(a);
            if !(d.is_finite() && d >= 1.0) {
                return Err(Error::Config(format!("grading must be >= 1, got {d}")));
            }
        }
        if self.grids.iter().any(|&p| p < 2) {
            return Err(Error::Config("grid sizes must be at least 2".into()));
        }
        match &self.steps {
            StepsRule::Explicit(list) => {
                if list.is_empty() || list.contains(&0) {
                    return Err(Error::Config("step counts must be positive".into()));
                }
                let (np, nn) = (self.grids.len(), list.len());
                if np != nn && np != 1 && nn != 1 {
                    return Err(Error::Config(format!(
                        "cannot pair {np} grid sizes with {nn} step counts"
                    )));
                }
            }
            StepsRule::Coupled(_) => {
                if self.axis != Axis::Time {
                    return Err(Error::Config("coupled step rules require axis = time".into()));
                }
            }
        }
        if !self.allow_long {
            for &alpha in &self.alphas {
                if let Some((_, n)) = self.runs(alpha).into_iter().find(|&(_, n)| n > LONG_RUN_STEPS) {
                    return Err(Error::Config(format!(
                        "N = {n} exceeds {LONG_RUN_STEPS}; pass --allow-long to run it"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(P, N)` pairs for one alpha, in configuration order.
    pub fn runs(&self, alpha: f64) -> Vec<(usize, usize)> {
        match &self.steps {
            StepsRule::Coupled(c) => self.grids.iter().map(|&p| (p, c.steps(p, alpha))).collect(),
            StepsRule::Explicit(list) if list.len() == self.grids.len() => {
                self.grids.iter().copied().zip(list.iter().copied()).collect()
            }
            StepsRule::Explicit(list) if list.len() == 1 => self.grids.iter().map(|&p| (p, list[0])).collect(),
            StepsRule::Explicit(list) => list.iter().map(|&n| (self.grids[0], n)).collect(),
        }
    }

    /// Mesh parameter entering the rate formula: `P` in space, `N` (un-floored when coupled) in time.
    pub fn rate_parameter(&self, alpha: f64, subdivisions: usize, steps: usize) -> f64 {
        match (self.axis, &self.steps) {
            (Axis::Space, _) => subdivisions as f64,
            (Axis::Time, StepsRule::Coupled(c)) => c.nominal(subdivisions, alpha),
            (Axis::Time, StepsRule::Explicit(_)) => steps as f64,
        }
    }

    /// Apply `key = value` pairs. Later pairs win.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "problem" | "example" => self.problem = value.parse()?,
            "alpha" | "alphas" => self.alphas = parse_list("alpha", value)?,
            "delta" => self.delta = value.parse()?,
            "axis" => self.axis = value.parse()?,
            "grid" | "grids" | "P" => self.grids = parse_list("grid", value)?,
            "steps" | "N" => self.steps = value.parse()?,
            "norm" => self.norm = value.parse()?,
            "error_rule" | "error-rule" => self.error_rule = value.parse()?,
            "allow_long" | "allow-long" => self.allow_long = parse_bool(value)?,
            "out" | "output" => self.output = Some(value.to_string()),
            "format" => self.format = value.parse()?,
            "plot" => self.plot = Some(value.to_string()),
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_key_values(text)? {
            cfg.apply(&key, &value)?;
        }
        Ok(cfg)
    }
}

/// Parse one `key = value` per line; `#` starts a comment. Duplicate keys keep the last value.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_f64(what: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{what}: cannot parse {s:?} as a number")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("expected a boolean, got {other:?}"))),
    }
}

fn parse_list<T: FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::Config(format!("{what}: cannot parse {t:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_steps_floor_the_power_law() {
        let n: Vec<usize> = (9..=12).map(|p| Coupling::TwoOverTwoMinusAlpha.steps(p, 0.6)).collect();
        assert_eq!(n, vec![23, 26, 30, 34]);
        let n: Vec<usize> = (9..=12).map(|p| Coupling::TwoOverAlpha.steps(p, 0.8)).collect();
        assert_eq!(n, vec![243, 316, 401, 498]);
        let n: Vec<usize> = (9..=12).map(|p| Coupling::OneOverTwoMinusAlpha.steps(p, 0.8)).collect();
        assert_eq!(n, vec![6, 6, 7, 7]);
        assert_eq!(Coupling::TwoOverAlpha.steps(10, 0.5), 10_000);
    }

    #[test]
    fn config_text_round() {
        let cfg = StudyConfig::from_text(
            "# temporal study\nproblem = kirchhoff-poly\nalpha = 0.4, 0.6\ndelta = optimal # graded\n\
             axis = time\ngrid = 9,10\nsteps = 2/(2-alpha)\nnorm = l2\n",
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemId::KirchhoffPoly);
        assert_eq!(cfg.alphas, vec![0.4, 0.6]);
        assert_eq!(cfg.delta, DeltaRule::Optimal);
        assert_eq!(cfg.steps, StepsRule::Coupled(Coupling::TwoOverTwoMinusAlpha));
        assert_eq!(cfg.norm, Norm::L2);
        cfg.validate().unwrap();
    }

    #[test]
    fn coupled_rule_needs_time_axis() {
        let cfg = StudyConfig {
            steps: StepsRule::Coupled(Coupling::TwoOverAlpha),
            ..StudyConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn long_runs_need_opt_in() {
        let mut cfg = StudyConfig {
            alphas: vec![0.4],
            axis: Axis::Time,
            steps: StepsRule::Coupled(Coupling::TwoOverAlpha),
            ..StudyConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.allow_long = true;
        cfg.validate().unwrap();
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_key_values("alpha 0.5").is_err());
        assert!(StudyConfig::from_text("colour = red").is_err());
        assert!(StudyConfig::from_text("alpha = 1.5").unwrap().validate().is_err());
        assert!(StudyConfig::from_text("grid = 4,5\nsteps = 1,2,3")
            .unwrap()
            .validate()
            .is_err());
    }
}
