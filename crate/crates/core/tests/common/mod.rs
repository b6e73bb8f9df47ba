//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kirchhoff_l1::assembly::{assemble_load, ritz_projection};
use kirchhoff_l1::fractional::GradedTimeMesh;
use kirchhoff_l1::mesh::P1Space;
use kirchhoff_l1::sparse::SparseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Symmetric 12-point triangle rule exact to degree 6, as `(barycentric, weight)` with weights
/// summing to one.
pub fn twelve_point_rule() -> Vec<([f64; 3], f64)> {
    let mut rule = Vec::with_capacity(12);
    for (a, w) in [
        (0.249_286_745_170_910, 0.116_786_275_726_379),
        (0.063_089_014_491_502, 0.050_844_906_370_207),
    ] {
        let b = 1.0 - 2.0 * a;
        rule.push(([b, a, a], w));
        rule.push(([a, b, a], w));
        rule.push(([a, a, b], w));
    }
    let (a, b) = (0.053_145_049_844_817, 0.310_352_451_033_784);
    let c = 1.0 - a - b;
    let w = 0.082_851_075_618_374;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        rule.push((p, w));
    }
    rule
}

/// Integrate `f(lambda, x)` over a triangle with the 12-point rule.
pub fn integrate12<F: FnMut([f64; 3], [f64; 2]) -> f64>(v: &[[f64; 2]; 3], area: f64, mut f: F) -> f64 {
    twelve_point_rule()
        .into_iter()
        .map(|(l, w)| {
            let x = [
                l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
            ];
            w * f(l, x)
        })
        .sum::<f64>()
        * area
}

pub fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.n_rows(), a.n_cols(), |i, j| d[i][j])
}

/// Plain L1 Galerkin scheme for `D^a u - c Laplace u = f`, written without the library's
/// stepper: kernels from the raw power difference, direct history sums and dense LU.
#[allow(clippy::too_many_arguments)]
pub fn plain_l1_trajectory(
    space: &P1Space,
    mesh: &GradedTimeMesh,
    alpha: f64,
    diffusion: f64,
    mass: &SparseMatrix,
    stiffness: &SparseMatrix,
    forcing: &Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    initial_gradient: &(dyn Fn(f64, f64) -> [f64; 2] + Send + Sync),
) -> Vec<Vec<f64>> {
    let g2 = statrs::function::gamma::gamma(2.0 - alpha);
    let t = mesh.nodes();
    let kernel = |n: usize, j: usize| -> f64 {
        if j == 0 {
            return 0.0;
        }
        let tau = t[j] - t[j - 1];
        ((t[n] - t[j - 1]).powf(1.0 - alpha) - (t[n] - t[j]).powf(1.0 - alpha)) / (tau * g2)
    };
    let m = dense(mass);
    let k = dense(stiffness);
    let u0 = ritz_projection(space, initial_gradient).unwrap();
    let mut history = vec![DVector::from_vec(u0)];
    for (n, &tn) in t.iter().enumerate().skip(1) {
        let knn = kernel(n, n);
        let a = &m * knn + &k * diffusion;
        let mut h = DVector::zeros(history[0].len());
        for j in 1..=n {
            h += &history[j - 1] * (kernel(n, j) - kernel(n, j - 1));
        }
        let f = assemble_load(space, &|x, y| forcing(x, y, tn)).unwrap();
        let rhs = DVector::from_vec(f) + &m * h;
        let u = a.lu().solve(&rhs).expect("nonsingular L1 system");
        history.push(u);
    }
    history.into_iter().map(|v| v.iter().copied().collect()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
