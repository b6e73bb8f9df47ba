//! Quadrature rules on triangles, in barycentric coordinates with weights summing to one.

use std::sync::OnceLock;

#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// Barycentric coordinates `(l0, l1, l2)` of each point.
    pub points: Vec<[f64; 3]>,
    /// Weights normalized to the reference area, `sum = 1`.
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integrate `f` over the triangle with vertices `v` given barycentric evaluation points.
    pub fn integrate<F: FnMut([f64; 3], [f64; 2]) -> f64>(&self, v: &[[f64; 2]; 3], area: f64, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (lam, w) in self.points.iter().zip(&self.weights) {
            acc += w * f(*lam, barycentric_to_cartesian(v, lam));
        }
        acc * area
    }
}

#[inline]
pub fn barycentric_to_cartesian(v: &[[f64; 2]; 3], lam: &[f64; 3]) -> [f64; 2] {
    [
        lam[0] * v[0][0] + lam[1] * v[1][0] + lam[2] * v[2][0],
        lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1],
    ]
}

/// One point at the centroid, exact for linear functions.
pub fn centroid() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| TriangleRule {
        points: vec![[1.0 / 3.0; 3]],
        weights: vec![1.0],
    })
}

/// Seven-point symmetric rule, exact for polynomials of degree five.
pub fn seven_point() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        let mut points = vec![[third, third, third]];
        let mut weights = vec![9.0 / 40.0];
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            points.extend_from_slice(&[[a, a, b], [a, b, a], [b, a, a]]);
            weights.extend_from_slice(&[w, w, w]);
        }
        TriangleRule { points, weights }
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Collapsed (conical product) Gauss rule with `n * n` points, exact to degree `2n - 2`.
pub fn conical_product(n: usize) -> TriangleRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (xi, wi) in x.iter().zip(&w) {
        let u = 0.5 * (xi + 1.0);
        for (xj, wj) in x.iter().zip(&w) {
            let v = 0.5 * (xj + 1.0);
            // (u, v) in the unit square collapses onto the triangle via l1 = u, l2 = (1 - u) v
            let l1 = u;
            let l2 = (1.0 - u) * v;
            points.push([1.0 - l1 - l2, l1, l2]);
            // Jacobian (1 - u), square weights scaled by 1/4, normalized by reference area 1/2
            weights.push(0.25 * wi * wj * (1.0 - u) * 2.0);
        }
    }
    TriangleRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn check_degree(rule: &TriangleRule, degree: u32) {
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                let q = rule.integrate(&v, 0.5, |_, p| p[0].powi(a as i32) * p[1].powi(b as i32));
                assert_relative_eq!(q, monomial_exact(a, b), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn seven_point_is_degree_five() {
        let r = seven_point();
        assert_eq!(r.len(), 7);
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
        check_degree(r, 5);
    }

    #[test]
    fn seven_point_is_not_degree_six() {
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let q = seven_point().integrate(&v, 0.5, |_, p| p[0].powi(6));
        assert!((q - monomial_exact(6, 0)).abs() > 1e-8);
    }

    #[test]
    fn conical_product_degrees() {
        for n in 2..=6 {
            check_degree(&conical_product(n), (2 * n - 2) as u32);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(q, 2.0 / 9.0, max_relative = 1e-14);
    }
}
