mod common;

use std::f64::consts::PI;

use rand::Rng;

use kirchhoff_l1::assembly::{
    assemble_mass, assemble_memory_matrix, assemble_stiffness, error_norms, grad_norm_sq, l2_projection,
    ritz_projection,
};
use kirchhoff_l1::mesh::P1Space;
use kirchhoff_l1::problems::kirchhoff_poly;
use kirchhoff_l1::sparse::SparseMatrix;

#[test]
fn twelve_point_oracle_rule_is_degree_six() {
    // int over the reference triangle of x^a y^b = a! b! / (a + b + 2)!
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    for a in 0..=6u32 {
        for b in 0..=(6 - a) {
            let q = common::integrate12(&v, 0.5, |_, [x, y]| x.powi(a as i32) * y.powi(b as i32));
            let exact = fact(a) * fact(b) / fact(a + b + 2);
            assert!((q - exact).abs() < 1e-14, "x^{a} y^{b}: {q} vs {exact}");
        }
    }
}

/// Memory matrix assembled with the 12-point rule and coefficients written out by hand.
fn oracle_memory_matrix(space: &P1Space) -> SparseMatrix {
    let mesh = space.mesh();
    let mut trip = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (v, g, area) = space.element(t).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let (Some(i), Some(j)) = (space.dof_of_vertex(tri[a]), space.dof_of_vertex(tri[b])) else {
                    continue;
                };
                let value = common::integrate12(&v, area, |lam, [x, y]| {
                    let diff = (1.0 + x) * g[b][0] * g[a][0] + (1.0 + y) * g[b][1] * g[a][1];
                    let conv = lam[b] * (x * g[a][0] + y * g[a][1]);
                    diff - conv + x * y * lam[b] * lam[a]
                });
                trip.push((i, j, value));
            }
        }
    }
    SparseMatrix::from_triplets(space.n_dofs(), space.n_dofs(), &trip)
}

#[test]
fn variable_memory_matrix_matches_refined_quadrature() {
    let spec = kirchhoff_poly(0.5).unwrap();
    for p in [4, 8] {
        let space = P1Space::unit_square(p).unwrap();
        let production = assemble_memory_matrix(&space, &spec.memory.terms[0].spatial).unwrap();
        let oracle = oracle_memory_matrix(&space);
        let (a, b) = (production.to_dense(), oracle.to_dense());
        for i in 0..space.n_dofs() {
            for j in 0..space.n_dofs() {
                assert!(
                    (a[i][j] - b[i][j]).abs() <= 1e-10,
                    "P={p} ({i},{j}): {} vs {}",
                    a[i][j],
                    b[i][j]
                );
            }
        }
        assert!(
            production.asymmetry() > 1e-6,
            "convection makes the matrix nonsymmetric"
        );
    }
}

#[test]
fn coarsest_mass_matches_quadrature_of_centre_hat() {
    let space = P1Space::unit_square(2).unwrap();
    let mass = assemble_mass(&space).unwrap();
    let centre = space.vertex_of_dof(0);
    let mut oracle = 0.0;
    for (t, tri) in space.mesh().triangles().iter().enumerate() {
        if let Some(a) = tri.iter().position(|&v| v == centre) {
            let (v, _, area) = space.element(t).unwrap();
            oracle += common::integrate12(&v, area, |lam, _| lam[a] * lam[a]);
        }
    }
    assert!((mass.get(0, 0) - oracle).abs() < 1e-15);
    assert!((assemble_stiffness(&space).unwrap().get(0, 0) - 4.0).abs() < 1e-14);
}

#[test]
fn gradient_energy_matches_elementwise_quadrature() {
    let mut rng = common::rng(7);
    for p in [3, 6, 11] {
        let space = P1Space::unit_square(p).unwrap();
        let k = assemble_stiffness(&space).unwrap();
        let u: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut oracle = 0.0;
        for t in 0..space.mesh().num_triangles() {
            let (v, g, area) = space.element(t).unwrap();
            let vals = space.local_values(t, &u);
            let gx: f64 = (0..3).map(|a| vals[a] * g[a][0]).sum();
            let gy: f64 = (0..3).map(|a| vals[a] * g[a][1]).sum();
            oracle += common::integrate12(&v, area, |_, _| gx * gx + gy * gy);
        }
        let energy = grad_norm_sq(&u, &k).unwrap();
        assert!((energy - oracle).abs() <= 1e-12 * oracle, "P={p}: {energy} vs {oracle}");
        let scaled: Vec<f64> = u.iter().map(|x| -2.5 * x).collect();
        let e2 = grad_norm_sq(&scaled, &k).unwrap();
        assert!((e2 - 6.25 * energy).abs() <= 1e-12 * e2);
    }
}

#[test]
fn mass_and_stiffness_are_spd() {
    let mut rng = common::rng(11);
    let space = P1Space::unit_square(7).unwrap();
    for m in [assemble_mass(&space).unwrap(), assemble_stiffness(&space).unwrap()] {
        assert!(m.asymmetry() <= 1e-12);
        for _ in 0..20 {
            let u: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q: f64 = u.iter().zip(m.matvec(&u)).map(|(a, b)| a * b).sum();
            assert!(q > 0.0);
        }
    }
}

#[test]
fn assembly_is_deterministic() {
    let spec = kirchhoff_poly(0.3).unwrap();
    let space = P1Space::unit_square(9).unwrap();
    let a = assemble_memory_matrix(&space, &spec.memory.terms[0].spatial).unwrap();
    let b = assemble_memory_matrix(&space, &spec.memory.terms[0].spatial).unwrap();
    assert_eq!(a, b);
    assert_eq!(assemble_stiffness(&space).unwrap(), assemble_stiffness(&space).unwrap());
}

fn bubble(x: f64, y: f64) -> f64 {
    (x - x * x) * (y - y * y)
}

fn bubble_grad(x: f64, y: f64) -> [f64; 2] {
    [(1.0 - 2.0 * x) * (y - y * y), (x - x * x) * (1.0 - 2.0 * y)]
}

#[test]
fn interpolation_error_orders() {
    let errors = |p: usize| {
        let space = P1Space::unit_square(p).unwrap();
        let u = space.interpolate(bubble);
        error_norms(&space, &u, &bubble, &bubble_grad).unwrap()
    };
    let (l2_8, h1_8) = errors(8);
    let (l2_16, h1_16) = errors(16);
    let (r0, r1) = (l2_8 / l2_16, h1_8 / h1_16);
    assert!((r0 / 4.0 - 1.0).abs() <= 0.1, "L2 ratio {r0}");
    assert!((r1 / 2.0 - 1.0).abs() <= 0.1, "H1 ratio {r1}");
}

#[test]
fn projection_error_orders() {
    let sine = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let sine_grad = |x: f64, y: f64| {
        [
            PI * (PI * x).cos() * (PI * y).sin(),
            PI * (PI * x).sin() * (PI * y).cos(),
        ]
    };
    let mut ritz = Vec::new();
    let mut l2 = Vec::new();
    for p in [8, 16, 32] {
        let space = P1Space::unit_square(p).unwrap();
        let r = ritz_projection(&space, &bubble_grad).unwrap();
        ritz.push(error_norms(&space, &r, &bubble, &bubble_grad).unwrap().1);
        let q = l2_projection(&space, &sine).unwrap();
        l2.push(error_norms(&space, &q, &sine, &sine_grad).unwrap().0);
    }
    for w in ritz.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 1.0).abs() <= 0.15, "Ritz H1 rate {rate}");
    }
    for w in l2.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 2.0).abs() <= 0.15, "L2 projection rate {rate}");
    }
}
