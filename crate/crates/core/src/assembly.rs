//! Finite element operators on the P1 space.
//!
//! All matrices are assembled over every vertex first and then restricted to the interior
//! dofs, which imposes the homogeneous Dirichlet condition by elimination. Element loops
//! run in a fixed order and duplicates are summed in that order, so assembly is
//! bit-for-bit reproducible.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{cg_solve, DEFAULT_TOL};
use crate::mesh::{P1Space, TriMesh};
use crate::quadrature::{seven_point, TriangleRule};
use crate::sparse::SparseMatrix;

pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync>;
pub type TimeFunction = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Spatial part `(c2, c1, c0)` of one separable memory term.
#[derive(Clone)]
pub struct SpatialCoefficients {
    pub diffusion: MatrixField,
    pub convection: VectorField,
    pub reaction: ScalarField,
}

impl SpatialCoefficients {
    pub fn new(diffusion: MatrixField, convection: VectorField, reaction: ScalarField) -> Self {
        Self {
            diffusion,
            convection,
            reaction,
        }
    }

    /// `c2 = I`, `c1 = 0`, `c0 = 0`.
    pub fn laplacian() -> Self {
        Self::constant([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 0.0)
    }

    pub fn constant(c2: [[f64; 2]; 2], c1: [f64; 2], c0: f64) -> Self {
        Self {
            diffusion: Arc::new(move |_, _| c2),
            convection: Arc::new(move |_, _| c1),
            reaction: Arc::new(move |_, _| c0),
        }
    }
}

impl std::fmt::Debug for SpatialCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpatialCoefficients").finish_non_exhaustive()
    }
}

/// One term `phi(t) psi(s) (c2(x), c1(x), c0(x))` of a separable memory coefficient.
#[derive(Clone)]
pub struct MemoryTerm {
    pub time_factor: TimeFunction,
    pub history_factor: TimeFunction,
    pub spatial: SpatialCoefficients,
    /// When set, `c2(x)` is expected to be symmetric positive semidefinite.
    pub diffusive: bool,
}

impl std::fmt::Debug for MemoryTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemoryTerm")
            .field("diffusive", &self.diffusive)
            .finish_non_exhaustive()
    }
}

impl MemoryTerm {
    pub fn new(
        time_factor: impl Fn(f64) -> f64 + Send + Sync + 'static,
        history_factor: impl Fn(f64) -> f64 + Send + Sync + 'static,
        spatial: SpatialCoefficients,
        diffusive: bool,
    ) -> Self {
        Self {
            time_factor: Arc::new(time_factor),
            history_factor: Arc::new(history_factor),
            spatial,
            diffusive,
        }
    }
}

/// Memory coefficients `b2, b1, b0` written as a sum of separable terms.
#[derive(Clone, Debug, Default)]
pub struct MemoryCoefficient {
    pub terms: Vec<MemoryTerm>,
}

impl MemoryCoefficient {
    pub fn none() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn single(term: MemoryTerm) -> Self {
        Self { terms: vec![term] }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(b2, b1, b0)` at `(x, y, t, s)` reconstructed from the terms.
    pub fn evaluate(&self, x: f64, y: f64, t: f64, s: f64) -> ([[f64; 2]; 2], [f64; 2], f64) {
        let mut b2 = [[0.0; 2]; 2];
        let mut b1 = [0.0; 2];
        let mut b0 = 0.0;
        for term in &self.terms {
            let w = (term.time_factor)(t) * (term.history_factor)(s);
            let c2 = (term.spatial.diffusion)(x, y);
            let c1 = (term.spatial.convection)(x, y);
            for i in 0..2 {
                for j in 0..2 {
                    b2[i][j] += w * c2[i][j];
                }
                b1[i] += w * c1[i];
            }
            b0 += w * (term.spatial.reaction)(x, y);
        }
        (b2, b1, b0)
    }

    /// Check symmetry and positive semidefiniteness of `c2` for every diffusive term at the
    /// given sample points.
    pub fn check_diffusive(&self, samples: &[[f64; 2]]) -> Result<()> {
        for term in self.terms.iter().filter(|t| t.diffusive) {
            for &[x, y] in samples {
                let c = (term.spatial.diffusion)(x, y);
                let asym = (c[0][1] - c[1][0]).abs();
                let scale = c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
                let tol = 1e-12 * scale;
                if asym > tol || c[0][0] < -tol || c[1][1] < -tol || det < -tol * scale {
                    return Err(Error::Domain(format!(
                        "memory diffusion coefficient not symmetric positive semidefinite at ({x}, {y})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn restrict_to_interior(space: &P1Space, full: &SparseMatrix) -> SparseMatrix {
    full.restrict(|v| space.dof_of_vertex(v), space.n_dofs())
}

fn local_to_triplets(tri: &[usize; 3], local: &[[f64; 3]; 3], out: &mut Vec<(usize, usize, f64)>) {
    for a in 0..3 {
        for b in 0..3 {
            out.push((tri[a], tri[b], local[a][b]));
        }
    }
}

/// Mass matrix over all vertices.
pub fn assemble_mass_full(mesh: &TriMesh) -> Result<SparseMatrix> {
    let nv = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = crate::mesh::signed_area(&mesh.triangle_coords(t));
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle(t));
        }
        // int phi_a phi_b = A/12 (1 + [a == b])
        let mut local = [[area / 12.0; 3]; 3];
        for (a, row) in local.iter_mut().enumerate() {
            row[a] = area / 6.0;
        }
        local_to_triplets(tri, &local, &mut trip);
    }
    SparseMatrix::from_triplets(nv, nv, &trip).flag_symmetric()
}

pub fn assemble_mass(space: &P1Space) -> Result<SparseMatrix> {
    Ok(restrict_to_interior(space, &assemble_mass_full(space.mesh())?))
}

/// Stiffness matrix `(grad phi_j, grad phi_i)` over all vertices.
pub fn assemble_stiffness_full(mesh: &TriMesh) -> Result<SparseMatrix> {
    let nv = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (g, area) =
            crate::mesh::p1_basis_gradients(&mesh.triangle_coords(t)).map_err(|_| Error::DegenerateTriangle(t))?;
        let mut local = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                local[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
        local_to_triplets(tri, &local, &mut trip);
    }
    SparseMatrix::from_triplets(nv, nv, &trip).flag_symmetric()
}

pub fn assemble_stiffness(space: &P1Space) -> Result<SparseMatrix> {
    Ok(restrict_to_interior(space, &assemble_stiffness_full(space.mesh())?))
}

/// Spatial factor of one memory term with the production seven-point rule.
pub fn assemble_memory_matrix(space: &P1Space, coeff: &SpatialCoefficients) -> Result<SparseMatrix> {
    assemble_memory_matrix_with(space, coeff, seven_point())
}

/// `(c2 grad phi_j, grad phi_i) - (c1 phi_j, grad phi_i) + (c0 phi_j, phi_i)` on interior dofs.
pub fn assemble_memory_matrix_with(
    space: &P1Space,
    coeff: &SpatialCoefficients,
    rule: &TriangleRule,
) -> Result<SparseMatrix> {
    let mesh = space.mesh();
    let nv = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (v, g, area) = space.element(t)?;
        let mut local = [[0.0; 3]; 3];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let [x, y] = crate::quadrature::barycentric_to_cartesian(&v, lam);
            let c2 = (coeff.diffusion)(x, y);
            let c1 = (coeff.convection)(x, y);
            let c0 = (coeff.reaction)(x, y);
            if !(c2.iter().flatten().all(|c| c.is_finite()) && c1.iter().all(|c| c.is_finite()) && c0.is_finite()) {
                return Err(Error::NonFinite("memory coefficient"));
            }
            let wa = w * area;
            for a in 0..3 {
                for b in 0..3 {
                    let c2gb = [
                        c2[0][0] * g[b][0] + c2[0][1] * g[b][1],
                        c2[1][0] * g[b][0] + c2[1][1] * g[b][1],
                    ];
                    let diff = c2gb[0] * g[a][0] + c2gb[1] * g[a][1];
                    let conv = lam[b] * (c1[0] * g[a][0] + c1[1] * g[a][1]);
                    let reac = c0 * lam[b] * lam[a];
                    local[a][b] += wa * (diff - conv + reac);
                }
            }
        }
        local_to_triplets(tri, &local, &mut trip);
    }
    let full = SparseMatrix::from_triplets(nv, nv, &trip);
    Ok(restrict_to_interior(space, &full))
}

/// Load vector `(f, phi_i)` on interior dofs.
pub fn assemble_load<F: Fn(f64, f64) -> f64 + ?Sized>(space: &P1Space, f: &F) -> Result<Vec<f64>> {
    assemble_load_with(space, f, seven_point())
}

pub fn assemble_load_with<F: Fn(f64, f64) -> f64 + ?Sized>(
    space: &P1Space,
    f: &F,
    rule: &TriangleRule,
) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let mut out = vec![0.0; space.n_dofs()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (v, _, area) = space.element(t)?;
        let mut local = [0.0; 3];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let [x, y] = crate::quadrature::barycentric_to_cartesian(&v, lam);
            let fv = f(x, y);
            if !fv.is_finite() {
                return Err(Error::NonFinite("load"));
            }
            for a in 0..3 {
                local[a] += w * area * fv * lam[a];
            }
        }
        for (a, &vert) in tri.iter().enumerate() {
            if let Some(d) = space.dof_of_vertex(vert) {
                out[d] += local[a];
            }
        }
    }
    Ok(out)
}

/// Ritz projection `R_h u0`: `(grad R_h u0, grad v) = (grad u0, grad v)` for all `v`.
pub fn ritz_projection<G: Fn(f64, f64) -> [f64; 2] + ?Sized>(space: &P1Space, grad_u0: &G) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let rule = seven_point();
    let mut rhs = vec![0.0; space.n_dofs()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (v, g, area) = space.element(t)?;
        let mut local = [0.0; 3];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let [x, y] = crate::quadrature::barycentric_to_cartesian(&v, lam);
            let gu = grad_u0(x, y);
            if !(gu[0].is_finite() && gu[1].is_finite()) {
                return Err(Error::NonFinite("initial gradient"));
            }
            for a in 0..3 {
                local[a] += w * area * (gu[0] * g[a][0] + gu[1] * g[a][1]);
            }
        }
        for (a, &vert) in tri.iter().enumerate() {
            if let Some(d) = space.dof_of_vertex(vert) {
                rhs[d] += local[a];
            }
        }
    }
    let k = assemble_stiffness(space)?;
    Ok(cg_solve(&k, &rhs, DEFAULT_TOL, 10 * space.n_dofs().max(10))?.0)
}

/// L2 projection `P_h g`.
pub fn l2_projection<F: Fn(f64, f64) -> f64 + ?Sized>(space: &P1Space, g: &F) -> Result<Vec<f64>> {
    let rhs = assemble_load(space, g)?;
    let m = assemble_mass(space)?;
    Ok(cg_solve(&m, &rhs, DEFAULT_TOL, 10 * space.n_dofs().max(10))?.0)
}

/// `U^T K U = ||grad u_h||^2`.
pub fn grad_norm_sq(u: &[f64], stiffness: &SparseMatrix) -> Result<f64> {
    if u.len() != stiffness.n_rows() {
        return Err(Error::Dimension {
            expected: stiffness.n_rows(),
            found: u.len(),
        });
    }
    let ku = stiffness.matvec(u);
    Ok(crate::sparse::dot(u, &ku).max(0.0))
}

/// `U^T M U = ||u_h||^2`.
pub fn mass_norm_sq(u: &[f64], mass: &SparseMatrix) -> f64 {
    crate::sparse::dot(u, &mass.matvec(u)).max(0.0)
}

/// `(||u - u_h||, ||grad(u - u_h)||)` by the seven-point rule on every triangle.
pub fn error_norms<F, G>(space: &P1Space, u: &[f64], exact: &F, exact_grad: &G) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64 + ?Sized,
    G: Fn(f64, f64) -> [f64; 2] + ?Sized,
{
    error_norms_with(space, u, exact, exact_grad, seven_point())
}

pub fn error_norms_with<F, G>(
    space: &P1Space,
    u: &[f64],
    exact: &F,
    exact_grad: &G,
    rule: &TriangleRule,
) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64 + ?Sized,
    G: Fn(f64, f64) -> [f64; 2] + ?Sized,
{
    if u.len() != space.n_dofs() {
        return Err(Error::Dimension {
            expected: space.n_dofs(),
            found: u.len(),
        });
    }
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for t in 0..space.mesh().num_triangles() {
        let (v, g, area) = space.element(t)?;
        let vals = space.local_values(t, u);
        let gh = [
            vals[0] * g[0][0] + vals[1] * g[1][0] + vals[2] * g[2][0],
            vals[0] * g[0][1] + vals[1] * g[1][1] + vals[2] * g[2][1],
        ];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let [x, y] = crate::quadrature::barycentric_to_cartesian(&v, lam);
            let ue = exact(x, y);
            let ge = exact_grad(x, y);
            if !(ue.is_finite() && ge[0].is_finite() && ge[1].is_finite()) {
                return Err(Error::NonFinite("exact solution"));
            }
            let uh = lam[0] * vals[0] + lam[1] * vals[1] + lam[2] * vals[2];
            l2 += w * area * (ue - uh).powi(2);
            h1 += w * area * ((ge[0] - gh[0]).powi(2) + (ge[1] - gh[1]).powi(2));
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}
