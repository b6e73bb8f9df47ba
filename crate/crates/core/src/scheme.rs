//! Linearized L1 Galerkin time stepping.
//!
//! Level 1 solves the fully nonlinear system with Newton's method:
//!
//! ```text
//! k11 Mass (U - U0) + M(U^T K U) K U - tau_1 B(t1, t1) U = F^1
//! ```
//!
//! Every later level freezes the Kirchhoff coefficient at the extrapolated state and solves
//! one SPD system
//!
//! ```text
//! (k_nn Mass + M(|grad u~^{n-1}|^2) K) U^n = F^n + Mass H^n + Q^n
//! ```
//!
//! where `H^n` is the L1 history and `Q^n` the memory quadrature (composite trapezoid on
//! `[t_1, t_{n-1}]` plus a left rectangle on `[t_{n-1}, t_n]`).

use std::sync::Arc;

use crate::assembly::{
    assemble_load, assemble_mass, assemble_memory_matrix, assemble_stiffness, grad_norm_sq, mass_norm_sq,
    ritz_projection, MemoryCoefficient, VectorField,
};
use crate::error::{Error, Result};
use crate::fractional::{caputo_history_sum, extrapolate, gamma, l1_kernels_with, GradedTimeMesh};
use crate::linalg::{cg_solve, relative_residual, sherman_morrison_solve, solve_general, DEFAULT_TOL};
use crate::mesh::P1Space;
use crate::problems::{Kirchhoff, ProblemSpec, SpaceTimeField};
use crate::sparse::{norm2, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stopping tolerance on the Euclidean norm of the level-1 residual.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-7,
            newton_max_iter: 50,
            linear_tol: DEFAULT_TOL,
            linear_max_iter: 5000,
        }
    }
}

/// Everything the stepper needs: space, time mesh, data and the assembled operators.
#[derive(Clone)]
pub struct DiscreteProblem {
    pub space: P1Space,
    pub time_mesh: GradedTimeMesh,
    pub alpha: f64,
    pub kirchhoff: Kirchhoff,
    pub memory: MemoryCoefficient,
    pub forcing: SpaceTimeField,
    pub initial_gradient: VectorField,
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    /// Spatial factor matrix of each separable memory term.
    pub memory_matrices: Vec<SparseMatrix>,
    pub options: SolverOptions,
}

impl std::fmt::Debug for DiscreteProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteProblem")
            .field("n_dofs", &self.space.n_dofs())
            .field("num_steps", &self.time_mesh.num_steps())
            .field("grading", &self.time_mesh.grading())
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

/// Largest Kirchhoff argument probed when validating `M(s) >= m0 > 0`.
const KIRCHHOFF_PROBE_MAX: f64 = 100.0;

impl DiscreteProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        space: P1Space,
        time_mesh: GradedTimeMesh,
        alpha: f64,
        kirchhoff: Kirchhoff,
        memory: MemoryCoefficient,
        forcing: SpaceTimeField,
        initial_gradient: VectorField,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let m0 = kirchhoff.lower_bound;
        if !(m0 > 0.0) {
            return Err(Error::Domain(format!(
                "Kirchhoff lower bound must be positive, got {m0}"
            )));
        }
        for i in 0..=200 {
            let s = KIRCHHOFF_PROBE_MAX * i as f64 / 200.0;
            let m = kirchhoff.m(s);
            if !(m >= m0) {
                return Err(Error::Domain(format!("M({s}) = {m} falls below m0 = {m0}")));
            }
        }
        memory.check_diffusive(space.mesh().vertices())?;
        let mass = assemble_mass(&space)?;
        let stiffness = assemble_stiffness(&space)?;
        let memory_matrices = memory
            .terms
            .iter()
            .map(|t| assemble_memory_matrix(&space, &t.spatial))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space,
            time_mesh,
            alpha,
            kirchhoff,
            memory,
            forcing,
            initial_gradient,
            mass,
            stiffness,
            memory_matrices,
            options: SolverOptions::default(),
        })
    }

    /// Discretize a manufactured problem with `P` cells per direction and `N` graded steps.
    pub fn from_spec(spec: &ProblemSpec, subdivisions: usize, num_steps: usize, grading: f64) -> Result<Self> {
        let space = P1Space::unit_square(subdivisions)?;
        let time_mesh = GradedTimeMesh::new(spec.final_time, num_steps, grading)?;
        let s = spec.clone();
        let initial_gradient: VectorField = Arc::new(move |x, y| s.initial_gradient(x, y));
        Self::new(
            space,
            time_mesh,
            spec.alpha,
            spec.kirchhoff.clone(),
            spec.memory.clone(),
            spec.forcing.clone(),
            initial_gradient,
        )
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    /// `B(t, s) = sum_k phi_k(t) psi_k(s) B_k`.
    pub fn memory_operator(&self, t: f64, s: f64) -> Result<Option<SparseMatrix>> {
        if self.memory.is_empty() {
            return Ok(None);
        }
        let terms: Vec<(f64, &SparseMatrix)> = self
            .memory
            .terms
            .iter()
            .zip(&self.memory_matrices)
            .map(|(term, b)| ((term.time_factor)(t) * (term.history_factor)(s), b))
            .collect();
        Ok(Some(SparseMatrix::linear_combination(&terms)?))
    }

    fn load(&self, t: f64) -> Result<Vec<f64>> {
        let f = &self.forcing;
        assemble_load(&self.space, &|x, y| f(x, y, t))
    }
}

/// Solution history and diagnostics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// `U^0, ..., U^n`.
    pub solutions: Vec<Vec<f64>>,
    /// `memory_products[k][j] = B_k U^j`.
    pub memory_products: Vec<Vec<Vec<f64>>>,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    /// Relative residual of the linear solve at each level `1..=n` (level 1: Newton residual).
    pub step_residuals: Vec<f64>,
}

impl SolveTrace {
    /// Start a trace from `U^0 = R_h u0`.
    pub fn start(problem: &DiscreteProblem) -> Result<Self> {
        let u0 = ritz_projection(&problem.space, problem.initial_gradient.as_ref())?;
        let mut trace = Self {
            solutions: Vec::with_capacity(problem.time_mesh.num_steps() + 1),
            memory_products: vec![Vec::new(); problem.memory_matrices.len()],
            newton_iterations: 0,
            newton_residual: 0.0,
            step_residuals: Vec::new(),
        };
        trace.push(problem, u0);
        Ok(trace)
    }

    fn push(&mut self, problem: &DiscreteProblem, u: Vec<f64>) {
        for (cache, b) in self.memory_products.iter_mut().zip(&problem.memory_matrices) {
            cache.push(b.matvec(&u));
        }
        self.solutions.push(u);
    }

    /// Index of the newest stored level.
    pub fn last_level(&self) -> usize {
        self.solutions.len() - 1
    }

    /// `||U^n||_Mass + tau^{alpha/2} ||grad U^n||`.
    pub fn weighted_norm(&self, problem: &DiscreteProblem, n: usize, tau: f64) -> f64 {
        let u = &self.solutions[n];
        mass_norm_sq(u, &problem.mass).sqrt()
            + tau.powf(problem.alpha / 2.0) * grad_norm_sq(u, &problem.stiffness).unwrap_or(f64::NAN).sqrt()
    }
}

/// Quadrature weights of the memory term at level `n >= 2`, for nodes `t_1..t_{n-1}`.
///
/// Index `j - 1` holds the weight of `t_j`. The rule is the sum over `j = 1..n-1` of
/// `tau_{j+1}/2 (g_j + g_{j+1})` for `j <= n-2` and `tau_n g_{n-1}` for `j = n-1`.
pub fn memory_weights(mesh: &GradedTimeMesh, n: usize) -> Vec<f64> {
    assert!(n >= 2 && n <= mesh.num_steps());
    let mut w = vec![0.0; n - 1];
    for j in 1..=n.saturating_sub(2) {
        let half = 0.5 * mesh.step(j + 1);
        w[j - 1] += half;
        w[j] += half;
    }
    w[n - 2] += mesh.step(n);
    w
}

/// Memory quadrature vector `Q^n` from the cached products `B_k U^j`, `n >= 2`.
pub fn memory_rhs(problem: &DiscreteProblem, trace: &SolveTrace, n: usize) -> Result<Vec<f64>> {
    let dim = problem.n_dofs();
    let mut q = vec![0.0; dim];
    if problem.memory.is_empty() {
        return Ok(q);
    }
    if n < 2 || n > problem.time_mesh.num_steps() {
        return Err(Error::Domain(format!("memory quadrature needs 2 <= n <= N, got {n}")));
    }
    let available = trace.memory_products.iter().map(|c| c.len()).min().unwrap_or(0);
    if available < n {
        return Err(Error::CacheUnderflow {
            requested: n - 1,
            available: available.saturating_sub(1),
        });
    }
    let mesh = &problem.time_mesh;
    let t_n = mesh.node(n);
    let weights = memory_weights(mesh, n);
    for (term, cache) in problem.memory.terms.iter().zip(&trace.memory_products) {
        let phi = (term.time_factor)(t_n);
        for (j, w) in (1..n).zip(&weights) {
            let c = phi * w * (term.history_factor)(mesh.node(j));
            for (qi, pi) in q.iter_mut().zip(&cache[j]) {
                *qi += c * pi;
            }
        }
    }
    Ok(q)
}

/// Solve the nonlinear level-1 system by Newton's method starting from `U^0`.
///
/// Returns `U^1`, the number of Newton updates and the final residual norm.
pub fn first_step_newton(problem: &DiscreteProblem, trace: &SolveTrace) -> Result<(Vec<f64>, usize, f64)> {
    let opts = problem.options;
    let mesh = &problem.time_mesh;
    let (t1, tau1) = (mesh.node(1), mesh.step(1));
    let k11 = l1_kernels_with(mesh, problem.alpha, 1, 1.0 / gamma(2.0 - problem.alpha)?).diagonal();
    let u0 = &trace.solutions[0];
    let load = problem.load(t1)?;
    let memory = problem.memory_operator(t1, t1)?;
    let mass_u0 = problem.mass.matvec(u0);

    let residual_of = |u: &[f64]| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let ku = problem.stiffness.matvec(u);
        let s = crate::sparse::dot(u, &ku).max(0.0);
        let mu = problem.mass.matvec(u);
        let m = problem.kirchhoff.m(s);
        let bu = memory.as_ref().map(|b| b.matvec(u));
        let r = (0..u.len())
            .map(|i| k11 * (mu[i] - mass_u0[i]) + m * ku[i] - bu.as_ref().map_or(0.0, |b| tau1 * b[i]) - load[i])
            .collect();
        Ok((r, ku, s))
    };

    let mut u = u0.clone();
    let (mut r, mut ku, mut s) = residual_of(&u)?;
    let mut iterations = 0;
    while norm2(&r) > opts.newton_tol {
        if iterations >= opts.newton_max_iter {
            return Err(Error::NoConvergence {
                method: "newton",
                iterations,
                residual: norm2(&r),
            });
        }
        let mut terms = vec![(k11, &problem.mass), (problem.kirchhoff.m(s), &problem.stiffness)];
        if let Some(b) = memory.as_ref() {
            terms.push((-tau1, b));
        }
        let base = SparseMatrix::linear_combination(&terms)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let lin_tol = opts.linear_tol;
        let delta = sherman_morrison_solve(
            &base,
            |b| solve_general(&base, || base.to_dense(), b, lin_tol * 1e-2, opts.linear_max_iter).map(|o| o.0),
            &ku,
            &ku,
            2.0 * problem.kirchhoff.dm(s),
            &rhs,
            lin_tol,
        )?;
        for (ui, di) in u.iter_mut().zip(&delta) {
            *ui += di;
        }
        iterations += 1;
        (r, ku, s) = residual_of(&u)?;
    }
    Ok((u, iterations, norm2(&r)))
}

/// Solve the linear system of level `n >= 2`.
pub fn linearized_step(problem: &DiscreteProblem, trace: &SolveTrace, n: usize) -> Result<(Vec<f64>, f64)> {
    linearized_step_with(problem, trace, n, 1.0 / gamma(2.0 - problem.alpha)?)
}

fn linearized_step_with(
    problem: &DiscreteProblem,
    trace: &SolveTrace,
    n: usize,
    inv_gamma_2ma: f64,
) -> Result<(Vec<f64>, f64)> {
    if n < 2 || n > problem.time_mesh.num_steps() {
        return Err(Error::Domain(format!("linearized step needs 2 <= n <= N, got {n}")));
    }
    if trace.solutions.len() < n {
        return Err(Error::CacheUnderflow {
            requested: n - 1,
            available: trace.last_level(),
        });
    }
    let mesh = &problem.time_mesh;
    let row = l1_kernels_with(mesh, problem.alpha, n, inv_gamma_2ma);
    let history = caputo_history_sum(&row, &trace.solutions[..n])?;
    let extrapolated = extrapolate(
        &trace.solutions[n - 1],
        &trace.solutions[n - 2],
        mesh.step(n),
        mesh.step(n - 1),
    )?;
    let s = grad_norm_sq(&extrapolated, &problem.stiffness)?;
    let system = SparseMatrix::linear_combination(&[
        (row.diagonal(), &problem.mass),
        (problem.kirchhoff.m(s), &problem.stiffness),
    ])?;
    let mut rhs = problem.load(mesh.node(n))?;
    let mh = problem.mass.matvec(&history);
    let q = memory_rhs(problem, trace, n)?;
    for i in 0..rhs.len() {
        rhs[i] += mh[i] + q[i];
    }
    let (u, _) = cg_solve(
        &system,
        &rhs,
        problem.options.linear_tol,
        problem.options.linear_max_iter,
    )?;
    let rel = relative_residual(&system, &u, &rhs);
    Ok((u, rel))
}

/// Run all `N` levels.
pub fn run(problem: &DiscreteProblem) -> Result<SolveTrace> {
    let mut trace = SolveTrace::start(problem)?;
    let (u1, iterations, residual) = first_step_newton(problem, &trace).map_err(|e| Error::Step {
        level: 1,
        source: Box::new(e),
    })?;
    trace.newton_iterations = iterations;
    trace.newton_residual = residual;
    trace.step_residuals.push(residual);
    trace.push(problem, u1);
    let inv_gamma_2ma = 1.0 / gamma(2.0 - problem.alpha)?;
    for n in 2..=problem.time_mesh.num_steps() {
        let (u, rel) = linearized_step_with(problem, &trace, n, inv_gamma_2ma).map_err(|e| Error::Step {
            level: n,
            source: Box::new(e),
        })?;
        trace.step_residuals.push(rel);
        trace.push(problem, u);
    }
    Ok(trace)
}
