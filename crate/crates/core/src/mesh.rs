//! Structured triangulation of the unit square and the P1 finite element space on it.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Uniform triangulation of `[0,1]^2` with `P` cells per direction, every cell cut along
/// the diagonal from its lower-left to its upper-right corner.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    subdivisions: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
}

impl TriMesh {
    pub fn unit_square(subdivisions: usize) -> Result<Self> {
        if subdivisions == 0 {
            return Err(Error::Domain("mesh needs at least one subdivision".into()));
        }
        let p = subdivisions;
        let stride = p + 1;
        let h = p as f64;
        let mut vertices = Vec::with_capacity(stride * stride);
        let mut boundary = Vec::with_capacity(stride * stride);
        for j in 0..=p {
            for i in 0..=p {
                vertices.push([i as f64 / h, j as f64 / h]);
                boundary.push(i == 0 || j == 0 || i == p || j == p);
            }
        }
        let mut triangles = Vec::with_capacity(2 * p * p);
        for j in 0..p {
            for i in 0..p {
                let v00 = j * stride + i;
                let v10 = v00 + 1;
                let v01 = v00 + stride;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Ok(Self {
            subdivisions,
            vertices,
            triangles,
            boundary,
        })
    }

    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    /// Mesh width `h = 1/P` along each axis.
    pub fn h(&self) -> f64 {
        1.0 / self.subdivisions as f64
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Undirected edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }

    /// Index of a triangle containing `(x, y)`; points outside the square are clamped.
    pub fn locate(&self, x: f64, y: f64) -> usize {
        let p = self.subdivisions;
        let pf = p as f64;
        let i = ((x * pf).floor().max(0.0) as usize).min(p - 1);
        let j = ((y * pf).floor().max(0.0) as usize).min(p - 1);
        let xi = x * pf - i as f64;
        let eta = y * pf - j as f64;
        let cell = j * p + i;
        if xi >= eta {
            2 * cell
        } else {
            2 * cell + 1
        }
    }
}

/// Signed area of a triangle (positive when counterclockwise).
#[inline]
pub fn signed_area(v: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}

/// Constant gradients of the three nodal hat functions and the triangle area.
pub fn p1_basis_gradients(v: &[[f64; 2]; 3]) -> Result<([[f64; 2]; 3], f64)> {
    let area = signed_area(v);
    if !(area > 0.0) {
        return Err(Error::DegenerateTriangle(usize::MAX));
    }
    let d = 2.0 * area;
    let g = [
        [(v[1][1] - v[2][1]) / d, (v[2][0] - v[1][0]) / d],
        [(v[2][1] - v[0][1]) / d, (v[0][0] - v[2][0]) / d],
        [(v[0][1] - v[1][1]) / d, (v[1][0] - v[0][0]) / d],
    ];
    Ok((g, area))
}

/// Barycentric coordinates of `p` with respect to `v`.
pub fn barycentric(v: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let area = signed_area(v);
    let sub =
        |a: [f64; 2], b: [f64; 2], c: [f64; 2]| 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
    let l0 = sub(p, v[1], v[2]) / area;
    let l1 = sub(v[0], p, v[2]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

/// Vertex coordinates, basis gradients and area of one triangle.
pub type Element = ([[f64; 2]; 3], [[f64; 2]; 3], f64);

/// Continuous piecewise-linear functions on a [`TriMesh`] vanishing on the boundary.
///
/// Degrees of freedom are the interior vertices, numbered in vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Space {
    mesh: TriMesh,
    dof_of_vertex: Vec<Option<usize>>,
    vertex_of_dof: Vec<usize>,
}

impl P1Space {
    pub fn new(mesh: TriMesh) -> Self {
        let mut dof_of_vertex = vec![None; mesh.num_vertices()];
        let mut vertex_of_dof = Vec::new();
        for (v, &on_boundary) in mesh.boundary_mask().iter().enumerate() {
            if !on_boundary {
                dof_of_vertex[v] = Some(vertex_of_dof.len());
                vertex_of_dof.push(v);
            }
        }
        Self {
            mesh,
            dof_of_vertex,
            vertex_of_dof,
        }
    }

    pub fn unit_square(subdivisions: usize) -> Result<Self> {
        Ok(Self::new(TriMesh::unit_square(subdivisions)?))
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.dof_of_vertex[v]
    }

    pub fn vertex_of_dof(&self, d: usize) -> usize {
        self.vertex_of_dof[d]
    }

    /// Element gradients and area, with the triangle index attached to degeneracy errors.
    pub fn element(&self, t: usize) -> Result<Element> {
        let coords = self.mesh.triangle_coords(t);
        let (grads, area) = p1_basis_gradients(&coords).map_err(|_| Error::DegenerateTriangle(t))?;
        Ok((coords, grads, area))
    }

    /// Nodal interpolant restricted to the interior dofs.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.vertex_of_dof
            .iter()
            .map(|&v| {
                let [x, y] = self.mesh.vertices()[v];
                f(x, y)
            })
            .collect()
    }

    /// Local coefficient values on triangle `t`, zero on boundary vertices.
    pub fn local_values(&self, t: usize, coeffs: &[f64]) -> [f64; 3] {
        let tri = self.mesh.triangles()[t];
        let mut out = [0.0; 3];
        for (o, &v) in out.iter_mut().zip(&tri) {
            if let Some(d) = self.dof_of_vertex[v] {
                *o = coeffs[d];
            }
        }
        out
    }

    /// Evaluate the finite element function with dof vector `coeffs` at `(x, y)`.
    pub fn evaluate(&self, coeffs: &[f64], x: f64, y: f64) -> f64 {
        let t = self.mesh.locate(x, y);
        let lam = barycentric(&self.mesh.triangle_coords(t), [x, y]);
        let vals = self.local_values(t, coeffs);
        lam.iter().zip(&vals).map(|(l, u)| l * u).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts() {
        for (p, nv, nt, nd) in [(1, 4, 2, 0), (2, 9, 8, 1), (12, 169, 288, 121)] {
            let s = P1Space::unit_square(p).unwrap();
            assert_eq!(s.mesh().num_vertices(), nv);
            assert_eq!(s.mesh().num_triangles(), nt);
            assert_eq!(s.n_dofs(), nd);
        }
        let s = P1Space::unit_square(2).unwrap();
        assert_eq!(s.mesh().vertices()[s.vertex_of_dof(0)], [0.5, 0.5]);
        assert!(TriMesh::unit_square(0).is_err());
    }

    #[test]
    fn areas_orientation_and_boundary() {
        for p in [1, 3, 7, 12] {
            let m = TriMesh::unit_square(p).unwrap();
            let mut total = 0.0;
            for t in 0..m.num_triangles() {
                let a = signed_area(&m.triangle_coords(t));
                assert!(a > 0.0);
                assert_relative_eq!(a, 0.5 / (p * p) as f64, max_relative = 1e-12);
                total += a;
            }
            assert!((total - 1.0).abs() < 1e-14);
            assert_eq!(m.boundary_mask().iter().filter(|b| **b).count(), 4 * p);
            for (v, b) in m.vertices().iter().zip(m.boundary_mask()) {
                let on = v[0] == 0.0 || v[0] == 1.0 || v[1] == 0.0 || v[1] == 1.0;
                assert_eq!(on, *b);
            }
            // Euler characteristic of a disk
            let (nv, ne, nf) = (
                m.num_vertices() as i64,
                m.edges().len() as i64,
                m.num_triangles() as i64,
            );
            assert_eq!(nv - ne + nf, 1);
        }
    }

    #[test]
    fn reference_gradients() {
        let (g, a) = p1_basis_gradients(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(a, 0.5);
        assert!(p1_basis_gradients(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
        assert!(p1_basis_gradients(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = TriMesh::unit_square(2).unwrap();
        for t in 0..m.num_triangles() {
            let v = m.triangle_coords(t);
            let (g, _) = p1_basis_gradients(&v).unwrap();
            let c = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
            let hfd = 1e-6;
            let sum: [f64; 2] = [g[0][0] + g[1][0] + g[2][0], g[0][1] + g[1][1] + g[2][1]];
            assert!(sum[0].abs() < 1e-14 && sum[1].abs() < 1e-14);
            for (k, gk) in g.iter().enumerate() {
                let hat = |p: [f64; 2]| barycentric(&v, p)[k];
                let dx = (hat([c[0] + hfd, c[1]]) - hat([c[0] - hfd, c[1]])) / (2.0 * hfd);
                let dy = (hat([c[0], c[1] + hfd]) - hat([c[0], c[1] - hfd])) / (2.0 * hfd);
                assert!((dx - gk[0]).abs() < 1e-8);
                assert!((dy - gk[1]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn partition_of_unity_at_random_points() {
        let m = TriMesh::unit_square(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = [rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)];
            let t = m.locate(p[0], p[1]);
            let lam = barycentric(&m.triangle_coords(t), p);
            assert!(lam.iter().all(|l| *l >= -1e-14));
            assert!((lam.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn dof_map_round_trip() {
        let s = P1Space::unit_square(6).unwrap();
        assert_eq!(s.n_dofs(), 25);
        for d in 0..s.n_dofs() {
            assert_eq!(s.dof_of_vertex(s.vertex_of_dof(d)), Some(d));
        }
        for v in 0..s.mesh().num_vertices() {
            assert_eq!(s.dof_of_vertex(v).is_none(), s.mesh().boundary_mask()[v]);
        }
    }

    #[test]
    fn evaluate_reproduces_linear_data_inside_elements() {
        let s = P1Space::unit_square(4).unwrap();
        let f = |x: f64, y: f64| (x - x * x) * (y - y * y);
        let u = s.interpolate(f);
        for v in s.mesh().vertices() {
            assert!((s.evaluate(&u, v[0], v[1]) - f(v[0], v[1])).abs() < 1e-15);
        }
    }
}
