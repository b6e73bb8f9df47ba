//! Manufactured-solution test problems.
//!
//! Both problems have exact solutions of the form `u(x, y, t) = t^alpha w(x, y)` on the unit
//! square with `T = 1`, zero initial data, and `M(s) = 1 + s`. Forcing terms are closed forms
//! derived by hand; [`pde_residual`] re-assembles the equation from the generic pieces
//! (profile derivatives, coefficient fields and their divergences) and is the check that the
//! hand-expanded forcing is right.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{MemoryCoefficient, MemoryTerm, ScalarField, SpatialCoefficients, TimeFunction, VectorField};
use crate::error::{Error, Result};
use crate::fractional::gamma;
use crate::mesh::TriMesh;
use crate::quadrature::{barycentric_to_cartesian, conical_product};

pub type SpaceTimeField = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type HessianField = Arc<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemId {
    /// `u = t^alpha (x-1)(y-1) sin(pi x) sin(pi y)`, memory `b2 = I`.
    KirchhoffSin,
    /// `u = t^alpha (x-x^2)(y-y^2)`, variable-coefficient memory with factor `(1+t)(1+s)`.
    KirchhoffPoly,
}

impl ProblemId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::KirchhoffSin => "kirchhoff-sin",
            ProblemId::KirchhoffPoly => "kirchhoff-poly",
        }
    }

    pub fn build(self, alpha: f64) -> Result<ProblemSpec> {
        match self {
            ProblemId::KirchhoffSin => kirchhoff_sin(alpha),
            ProblemId::KirchhoffPoly => kirchhoff_poly(alpha),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "kirchhoff-sin" => Ok(ProblemId::KirchhoffSin),
            "kirchhoff-poly" => Ok(ProblemId::KirchhoffPoly),
            other => Err(Error::Config(format!(
                "unknown problem '{other}' (expected kirchhoff-sin or kirchhoff-poly)"
            ))),
        }
    }
}

/// Nonlocal diffusion coefficient `M(s)` with its derivative and a positive lower bound.
#[derive(Clone)]
pub struct Kirchhoff {
    pub value: TimeFunction,
    pub derivative: TimeFunction,
    pub lower_bound: f64,
}

impl Kirchhoff {
    /// `M(s) = a + b s`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self {
            value: Arc::new(move |s| a + b * s),
            derivative: Arc::new(move |_| b),
            lower_bound: a,
        }
    }

    pub fn constant(a: f64) -> Self {
        Self::affine(a, 0.0)
    }

    #[inline]
    pub fn m(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    #[inline]
    pub fn dm(&self, s: f64) -> f64 {
        (self.derivative)(s)
    }
}

impl fmt::Debug for Kirchhoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kirchhoff")
            .field("lower_bound", &self.lower_bound)
            .finish_non_exhaustive()
    }
}

/// Spatial profile `w` with closed-form first and second derivatives.
#[derive(Clone)]
pub struct Profile {
    pub value: ScalarField,
    pub gradient: VectorField,
    pub hessian: HessianField,
}

/// Derivative data of one memory term, used only by [`pde_residual`].
#[derive(Clone)]
pub struct MemoryTermCalculus {
    /// `(sum_i d_i c2_{i0}, sum_i d_i c2_{i1})`.
    pub div_diffusion: VectorField,
    /// `div c1`.
    pub div_convection: ScalarField,
    /// `int_0^t psi(s) s^alpha ds`.
    pub history_integral: TimeFunction,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub alpha: f64,
    pub final_time: f64,
    pub profile: Profile,
    pub kirchhoff: Kirchhoff,
    pub memory: MemoryCoefficient,
    pub memory_calculus: Vec<MemoryTermCalculus>,
    pub forcing: SpaceTimeField,
    /// `C` with `||grad u(t)||^2 = C t^{2 alpha}`.
    pub energy_constant: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("id", &self.id)
            .field("alpha", &self.alpha)
            .field("energy_constant", &self.energy_constant)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn exact(&self, x: f64, y: f64, t: f64) -> f64 {
        t.powf(self.alpha) * (self.profile.value)(x, y)
    }

    pub fn exact_grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let s = t.powf(self.alpha);
        let g = (self.profile.gradient)(x, y);
        [s * g[0], s * g[1]]
    }

    pub fn initial_value(&self, x: f64, y: f64) -> f64 {
        self.exact(x, y, 0.0)
    }

    pub fn initial_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        self.exact_grad(x, y, 0.0)
    }

    pub fn forcing(&self, x: f64, y: f64, t: f64) -> f64 {
        (self.forcing)(x, y, t)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `int_Omega |grad w|^2` with the 25-point degree-9 conical rule on a 32 x 32 mesh.
pub fn spatial_energy(gradient: &(dyn Fn(f64, f64) -> [f64; 2] + Send + Sync)) -> f64 {
    let mesh = TriMesh::unit_square(32).expect("fixed mesh");
    let rule = conical_product(5);
    let mut acc = 0.0;
    for t in 0..mesh.num_triangles() {
        let v = mesh.triangle_coords(t);
        let area = crate::mesh::signed_area(&v);
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let [x, y] = barycentric_to_cartesian(&v, lam);
            let g = gradient(x, y);
            acc += w * area * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    acc
}

/// `g(x) = (x - 1) sin(pi x)` and its first two derivatives.
#[inline]
fn sine_factor(x: f64) -> (f64, f64, f64) {
    let (s, c) = (PI * x).sin_cos();
    let g = (x - 1.0) * s;
    let dg = s + PI * (x - 1.0) * c;
    let d2g = 2.0 * PI * c - PI * PI * (x - 1.0) * s;
    (g, dg, d2g)
}

/// Constant memory kernel `b2 = I`, `u = t^alpha (x-1)(y-1) sin(pi x) sin(pi y)`.
pub fn kirchhoff_sin(alpha: f64) -> Result<ProblemSpec> {
    check_alpha(alpha)?;
    let profile = Profile {
        value: Arc::new(|x, y| sine_factor(x).0 * sine_factor(y).0),
        gradient: Arc::new(|x, y| {
            let (gx, dgx, _) = sine_factor(x);
            let (gy, dgy, _) = sine_factor(y);
            [dgx * gy, gx * dgy]
        }),
        hessian: Arc::new(|x, y| {
            let (gx, dgx, d2gx) = sine_factor(x);
            let (gy, dgy, d2gy) = sine_factor(y);
            [[d2gx * gy, dgx * dgy], [dgx * dgy, gx * d2gy]]
        }),
    };
    let energy = spatial_energy(profile.gradient.as_ref());
    let gamma_1pa = gamma(1.0 + alpha)?;
    let forcing: SpaceTimeField = Arc::new(move |x, y, t| {
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        let gx = (x - 1.0) * sx;
        let gy = (y - 1.0) * sy;
        let lap = (2.0 * PI * cx - PI * PI * (x - 1.0) * sx) * gy + gx * (2.0 * PI * cy - PI * PI * (y - 1.0) * sy);
        let ta = t.powf(alpha);
        let kirchhoff = 1.0 + energy * ta * ta;
        gamma_1pa * gx * gy - kirchhoff * ta * lap + lap * t * ta / (1.0 + alpha)
    });
    let memory = MemoryCoefficient::single(MemoryTerm::new(
        |_| 1.0,
        |_| 1.0,
        SpatialCoefficients::laplacian(),
        true,
    ));
    let calculus = MemoryTermCalculus {
        div_diffusion: Arc::new(|_, _| [0.0, 0.0]),
        div_convection: Arc::new(|_, _| 0.0),
        history_integral: Arc::new(move |t| t.powf(1.0 + alpha) / (1.0 + alpha)),
    };
    Ok(ProblemSpec {
        id: ProblemId::KirchhoffSin,
        alpha,
        final_time: 1.0,
        profile,
        kirchhoff: Kirchhoff::affine(1.0, 1.0),
        memory,
        memory_calculus: vec![calculus],
        forcing,
        energy_constant: energy,
    })
}

/// Variable memory coefficients with factor `(1+t)(1+s)`, `u = t^alpha (x-x^2)(y-y^2)`.
pub fn kirchhoff_poly(alpha: f64) -> Result<ProblemSpec> {
    check_alpha(alpha)?;
    let profile = Profile {
        value: Arc::new(|x, y| (x - x * x) * (y - y * y)),
        gradient: Arc::new(|x, y| [(1.0 - 2.0 * x) * (y - y * y), (x - x * x) * (1.0 - 2.0 * y)]),
        hessian: Arc::new(|x, y| {
            let mixed = (1.0 - 2.0 * x) * (1.0 - 2.0 * y);
            [[-2.0 * (y - y * y), mixed], [mixed, -2.0 * (x - x * x)]]
        }),
    };
    // int (1 - 2x)^2 dx * int (y - y^2)^2 dy, twice
    let energy = 2.0 * (1.0 / 3.0) * (1.0 / 30.0);
    let gamma_1pa = gamma(1.0 + alpha)?;
    let forcing: SpaceTimeField = Arc::new(move |x, y, t| {
        let w = (x - x * x) * (y - y * y);
        let lap = 2.0 * x * x - 2.0 * x + 2.0 * y * y - 2.0 * y;
        // -div((1+x, 1+y) grad w) + div((x, y) w) + xy w, expanded
        let (x2, y2) = (x * x, y * y);
        let image = x2 * x * y2 * y - x2 * x * y2 - x2 * y2 * y + 7.0 * x2 * y2 - 9.0 * x2 * y - x2 - 9.0 * x * y2
            + 12.0 * x * y
            + x
            - y2
            + y;
        let ta = t.powf(alpha);
        let history = t * ta / (1.0 + alpha) + t * t * ta / (2.0 + alpha);
        let kirchhoff = 1.0 + energy * ta * ta;
        gamma_1pa * w - kirchhoff * ta * lap - (1.0 + t) * history * image
    });
    let spatial = SpatialCoefficients::new(
        Arc::new(|x, y| [[1.0 + x, 0.0], [0.0, 1.0 + y]]),
        Arc::new(|x, y| [x, y]),
        Arc::new(|x, y| x * y),
    );
    let memory = MemoryCoefficient::single(MemoryTerm::new(|t| 1.0 + t, |s| 1.0 + s, spatial, true));
    let calculus = MemoryTermCalculus {
        div_diffusion: Arc::new(|_, _| [1.0, 1.0]),
        div_convection: Arc::new(|_, _| 2.0),
        history_integral: Arc::new(move |t| t.powf(1.0 + alpha) / (1.0 + alpha) + t.powf(2.0 + alpha) / (2.0 + alpha)),
    };
    Ok(ProblemSpec {
        id: ProblemId::KirchhoffPoly,
        alpha,
        final_time: 1.0,
        profile,
        kirchhoff: Kirchhoff::affine(1.0, 1.0),
        memory,
        memory_calculus: vec![calculus],
        forcing,
        energy_constant: energy,
    })
}

/// `-div(c2 grad w) + div(c1 w) + c0 w` for one memory term at `(x, y)`.
pub fn memory_image(spec: &ProblemSpec, term: usize, x: f64, y: f64) -> f64 {
    let t = &spec.memory.terms[term];
    let calc = &spec.memory_calculus[term];
    let w = (spec.profile.value)(x, y);
    let g = (spec.profile.gradient)(x, y);
    let h = (spec.profile.hessian)(x, y);
    let c2 = (t.spatial.diffusion)(x, y);
    let c1 = (t.spatial.convection)(x, y);
    let c0 = (t.spatial.reaction)(x, y);
    let dc2 = (calc.div_diffusion)(x, y);
    let dc1 = (calc.div_convection)(x, y);
    let mut div_flux = dc2[0] * g[0] + dc2[1] * g[1];
    for i in 0..2 {
        for j in 0..2 {
            div_flux += c2[i][j] * h[i][j];
        }
    }
    -div_flux + dc1 * w + c1[0] * g[0] + c1[1] * g[1] + c0 * w
}

/// `D^alpha u - M(||grad u||^2) Lap u - int_0^t b u ds - f` at `(x, y, t)`, `t > 0`.
pub fn pde_residual(spec: &ProblemSpec, x: f64, y: f64, t: f64) -> f64 {
    let alpha = spec.alpha;
    let w = (spec.profile.value)(x, y);
    let h = (spec.profile.hessian)(x, y);
    let lap = h[0][0] + h[1][1];
    let ta = t.powf(alpha);
    let caputo = gamma(1.0 + alpha).expect("alpha in (0,1)") * w;
    let grad_sq = spec.energy_constant * ta * ta;
    let mut memory = 0.0;
    for (k, term) in spec.memory.terms.iter().enumerate() {
        memory += (term.time_factor)(t) * (spec.memory_calculus[k].history_integral)(t) * memory_image(spec, k, x, y);
    }
    caputo - spec.kirchhoff.m(grad_sq) * ta * lap - memory - spec.forcing(x, y, t)
}
