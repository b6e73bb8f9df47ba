//! Graded temporal meshes and the L1 discretization of the Caputo derivative.
//!
//! The Caputo derivative of order `alpha` at `t_n` is approximated by
//!
//! ```text
//! D u^n = sum_{j=1}^{n} k_{n,j} (u^j - u^{j-1}) = k_{n,n} u^n - H^n,
//! H^n   = sum_{j=1}^{n} (k_{n,j} - k_{n,j-1}) u^{j-1},   k_{n,0} = 0,
//! ```
//!
//! where the kernel `k_{n,j}` is the exact average of `(t_n - s)^{-alpha} / Gamma(1 - alpha)`
//! over `[t_{j-1}, t_j]`.

use crate::error::{Error, Result};

/// Lanczos coefficients for g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive arguments.
///
/// Lanczos approximation, with the reflection formula below 1/2. Relative
/// accuracy is around 1e-15 on (0, 3), the only range the solver needs.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Nonuniform partition `t_n = T (n / N)^delta` of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedTimeMesh {
    final_time: f64,
    num_steps: usize,
    grading: f64,
    nodes: Vec<f64>,
    steps: Vec<f64>,
}

impl GradedTimeMesh {
    pub fn new(final_time: f64, num_steps: usize, grading: f64) -> Result<Self> {
        if !(final_time > 0.0) || !final_time.is_finite() {
            return Err(Error::Domain(format!("final time must be positive, got {final_time}")));
        }
        if num_steps == 0 {
            return Err(Error::Domain("number of time steps must be >= 1".into()));
        }
        if !(grading >= 1.0) || !grading.is_finite() {
            return Err(Error::Domain(format!("grading exponent must be >= 1, got {grading}")));
        }
        let nodes: Vec<f64> = (0..=num_steps)
            .map(|n| Self::node_value(final_time, num_steps, grading, n))
            .collect();
        let steps = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            final_time,
            num_steps,
            grading,
            nodes,
            steps,
        })
    }

    /// Uniform mesh, `delta = 1`.
    pub fn uniform(final_time: f64, num_steps: usize) -> Result<Self> {
        Self::new(final_time, num_steps, 1.0)
    }

    #[inline]
    fn node_value(final_time: f64, num_steps: usize, grading: f64, n: usize) -> f64 {
        final_time * (n as f64 / num_steps as f64).powf(grading)
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    /// `N`, the number of steps.
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// `t_0, ..., t_N`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `tau_1, ..., tau_N` stored at indices `0..N`.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    #[inline]
    pub fn node(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    /// `tau_n = t_n - t_{n-1}` for `1 <= n <= N`.
    #[inline]
    pub fn step(&self, n: usize) -> f64 {
        self.steps[n - 1]
    }
}

/// Discrete L1 kernels `k_{n,1}, ..., k_{n,n}` for one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct L1KernelRow {
    level: usize,
    kernels: Vec<f64>,
}

impl L1KernelRow {
    pub fn level(&self) -> usize {
        self.level
    }

    /// `k_{n,1..=n}` stored at indices `0..n`.
    pub fn kernels(&self) -> &[f64] {
        &self.kernels
    }

    /// `k_{n,j}` with the convention `k_{n,0} = 0`.
    #[inline]
    pub fn k(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.kernels[j - 1]
        }
    }

    /// The diagonal kernel `k_{n,n}`.
    #[inline]
    pub fn diagonal(&self) -> f64 {
        self.kernels[self.level - 1]
    }
}

/// `(lower + step)^beta - lower^beta`, evaluated without cancellation.
#[inline]
fn power_increment(lower: f64, step: f64, beta: f64) -> f64 {
    if lower <= 0.0 {
        step.powf(beta)
    } else {
        lower.powf(beta) * (beta * (step / lower).ln_1p()).exp_m1()
    }
}

/// Kernel row `k_{n,j}` for level `n` on `mesh`.
pub fn l1_kernels(mesh: &GradedTimeMesh, alpha: f64, level: usize) -> Result<L1KernelRow> {
    check_alpha(alpha)?;
    if level == 0 || level > mesh.num_steps() {
        return Err(Error::Domain(format!(
            "kernel level must lie in 1..={}, got {level}",
            mesh.num_steps()
        )));
    }
    Ok(l1_kernels_with(mesh, alpha, level, 1.0 / gamma_unchecked(2.0 - alpha)))
}

/// Same as [`l1_kernels`] with `1 / Gamma(2 - alpha)` supplied by the caller.
pub(crate) fn l1_kernels_with(mesh: &GradedTimeMesh, alpha: f64, level: usize, inv_gamma_2ma: f64) -> L1KernelRow {
    let beta = 1.0 - alpha;
    let t_n = mesh.node(level);
    let kernels = (1..=level)
        .map(|j| {
            let tau = mesh.step(j);
            // k_{n,j} = [(t_n - t_{j-1})^beta - (t_n - t_j)^beta] / (tau_j Gamma(2 - alpha))
            let lower = if j == level { 0.0 } else { t_n - mesh.node(j) };
            power_increment(lower, tau, beta) / tau * inv_gamma_2ma
        })
        .collect();
    L1KernelRow { level, kernels }
}

/// History part `H^n = sum_j (k_{n,j} - k_{n,j-1}) U^{j-1}` of the discrete Caputo operator.
///
/// `history` must hold exactly `U^0, ..., U^{n-1}`.
pub fn caputo_history_sum<V: AsRef<[f64]>>(row: &L1KernelRow, history: &[V]) -> Result<Vec<f64>> {
    if history.len() != row.level() {
        return Err(Error::Dimension {
            expected: row.level(),
            found: history.len(),
        });
    }
    let dim = history[0].as_ref().len();
    let mut out = vec![0.0; dim];
    for (j, u) in history.iter().enumerate() {
        let u = u.as_ref();
        if u.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: u.len(),
            });
        }
        // history[j] is U^{j}, weighted by k_{n,j+1} - k_{n,j}
        let w = row.k(j + 1) - row.k(j);
        for (o, x) in out.iter_mut().zip(u) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// Discrete Caputo operator `k_{n,n} U^n - H^n` applied to a full history `U^0..U^n`.
pub fn discrete_caputo<V: AsRef<[f64]>>(row: &L1KernelRow, history: &[V]) -> Result<Vec<f64>> {
    let n = row.level();
    if history.len() != n + 1 {
        return Err(Error::Dimension {
            expected: n + 1,
            found: history.len(),
        });
    }
    let mut out = caputo_history_sum(row, &history[..n])?;
    let current = history[n].as_ref();
    if current.len() != out.len() {
        return Err(Error::Dimension {
            expected: out.len(),
            found: current.len(),
        });
    }
    let knn = row.diagonal();
    for (o, x) in out.iter_mut().zip(current) {
        *o = knn * x - *o;
    }
    Ok(out)
}

/// Two-level extrapolation `(1 + r) u^{n-1} - r u^{n-2}` with `r = tau_n / tau_{n-1}`.
pub fn extrapolate(u_prev: &[f64], u_prev2: &[f64], tau_n: f64, tau_prev: f64) -> Result<Vec<f64>> {
    if !(tau_prev > 0.0) {
        return Err(Error::Domain(format!("previous step must be positive, got {tau_prev}")));
    }
    if u_prev.len() != u_prev2.len() {
        return Err(Error::Dimension {
            expected: u_prev.len(),
            found: u_prev2.len(),
        });
    }
    let r = tau_n / tau_prev;
    Ok(u_prev.iter().zip(u_prev2).map(|(a, b)| (1.0 + r) * a - r * b).collect())
}
