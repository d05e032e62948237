//! Trilinear Lagrange and lowest-order Nedelec elements on hexahedra.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, LOCAL_EDGES, LOCAL_VERTICES};

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre points and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt();
            let (a, b) = (((3.0 - 2.0 * s) / 7.0).sqrt(), ((3.0 + 2.0 * s) / 7.0).sqrt());
            let r = 30f64.sqrt();
            let (wa, wb) = ((18.0 + r) / 36.0, (18.0 - r) / 36.0);
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let s = 2.0 * (10.0f64 / 7.0).sqrt();
            let (a, b) = ((5.0 - s).sqrt() / 3.0, (5.0 + s).sqrt() / 3.0);
            let r = 13.0 * 70f64.sqrt();
            let (wa, wb) = ((322.0 + r) / 900.0, (322.0 - r) / 900.0);
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        _ => panic!("Gauss-Legendre rule with {n} points is not tabulated"),
    }
}

impl QuadratureRule {
    /// Tensor-product Gauss rule with `n` points per direction.
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    points.push([x[i], x[j], x[k]]);
                    weights.push(w[i] * w[j] * w[k]);
                }
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss(2)
    }
}

/// Trilinear shape functions and their reference gradients.
pub fn lagrange_eval(xi: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8]) {
    let mut n = [0.0; 8];
    let mut g = [[0.0; 3]; 8];
    for (a, r) in LOCAL_VERTICES.iter().enumerate() {
        let f: [f64; 3] = std::array::from_fn(|d| 0.5 * (1.0 + r[d] * xi[d]));
        n[a] = f[0] * f[1] * f[2];
        g[a] = [
            0.5 * r[0] * f[1] * f[2],
            0.5 * r[1] * f[0] * f[2],
            0.5 * r[2] * f[0] * f[1],
        ];
    }
    (n, g)
}

/// Lowest-order Nedelec edge functions on the reference cube and their curls.
///
/// The function of an edge along axis `a` is (1/8)(1 + s_b xi_b)(1 + s_c xi_c) e_a,
/// where (s_b, s_c) are the fixed coordinates of the edge, so that its
/// tangential circulation is one on its own edge and zero on the others.
pub fn nedelec_eval(xi: [f64; 3]) -> ([[f64; 3]; 12], [[f64; 3]; 12]) {
    let mut vals = [[0.0; 3]; 12];
    let mut curls = [[0.0; 3]; 12];
    for (e, edge) in LOCAL_EDGES.iter().enumerate() {
        let a = e / 4;
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let s = LOCAL_VERTICES[edge[0]];
        let fb = 1.0 + s[b] * xi[b];
        let fc = 1.0 + s[c] * xi[c];
        vals[e][a] = 0.125 * fb * fc;
        // curl(phi e_a) = grad(phi) x e_a, with grad(phi) in the (b, c) plane.
        let gb = 0.125 * s[b] * fc;
        let gc = 0.125 * s[c] * fb;
        // e_b x e_a = -e_c and e_c x e_a = e_b for cyclic (a, b, c).
        curls[e][c] = -gb;
        curls[e][b] = gc;
    }
    (vals, curls)
}

/// Global numbering: three displacement components per vertex first, then
/// one potential coefficient per edge.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub num_u: usize,
    pub num_a: usize,
    pub cell_dofs: Vec<[usize; 36]>,
    pub cell_signs: Vec<[f64; 12]>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let num_u = 3 * mesh.num_vertices();
        let cell_dofs = mesh
            .cells
            .iter()
            .zip(&mesh.cell_edges)
            .map(|(verts, edges)| {
                std::array::from_fn(|i| if i < 24 { 3 * verts[i / 3] + i % 3 } else { num_u + edges[i - 24].0 })
            })
            .collect();
        let cell_signs = mesh.cell_edges.iter().map(|edges| std::array::from_fn(|e| edges[e].1)).collect();
        Self {
            num_u,
            num_a: mesh.num_edges(),
            cell_dofs,
            cell_signs,
        }
    }

    pub fn total(&self) -> usize {
        self.num_u + self.num_a
    }

    pub fn u_dof(&self, vertex: usize, component: usize) -> usize {
        3 * vertex + component
    }

    pub fn a_dof(&self, edge: usize) -> usize {
        self.num_u + edge
    }
}

/// Shape data of one quadrature point mapped to the physical cell. Nedelec
/// values and curls already include the local edge signs.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub weight: f64,
    pub grad: [[f64; 3]; 8],
    pub ned: [[f64; 3]; 12],
    pub curl: [[f64; 3]; 12],
}

pub fn point_geometry(mesh: &Mesh, cell: usize, xi: [f64; 3], weight: f64) -> Result<PointGeometry> {
    let verts = &mesh.cells[cell];
    let (_, dn) = lagrange_eval(xi);
    let mut jac = Matrix3::zeros();
    for a in 0..8 {
        let x = mesh.vertices[verts[a]];
        for i in 0..3 {
            for j in 0..3 {
                jac[(i, j)] += x[i] * dn[a][j];
            }
        }
    }
    let det = jac.determinant();
    if !(det > 0.0) {
        return Err(Error::InvalidMesh { cell });
    }
    let inv = jac.try_inverse().ok_or(Error::InvalidMesh { cell })?;
    let inv_t = inv.transpose();
    let covariant = |v: [f64; 3]| -> [f64; 3] {
        let r = inv_t * Vector3::from(v);
        [r[0], r[1], r[2]]
    };
    let grad = std::array::from_fn(|a| covariant(dn[a]));
    let (nv, nc) = nedelec_eval(xi);
    let signs = mesh.cell_edges[cell];
    let ned = std::array::from_fn(|e| covariant(nv[e]).map(|c| c * signs[e].1));
    let curl = std::array::from_fn(|e| {
        let r = jac * Vector3::from(nc[e]) / det;
        [r[0], r[1], r[2]].map(|c| c * signs[e].1)
    });
    Ok(PointGeometry {
        weight: weight * det,
        grad,
        ned,
        curl,
    })
}

/// F = I + grad u and B = B_M + curl A from the 36 local coefficients.
pub fn fields_at(g: &PointGeometry, local: &[f64; 36], b_macro: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut f = Matrix3::identity();
    for a in 0..8 {
        for i in 0..3 {
            let u = local[3 * a + i];
            for j in 0..3 {
                f[(i, j)] += u * g.grad[a][j];
            }
        }
    }
    let mut b = *b_macro;
    for e in 0..12 {
        let c = local[24 + e];
        for k in 0..3 {
            b[k] += c * g.curl[e][k];
        }
    }
    (f, b)
}

/// Finite-element space on a mesh: numbering plus shape data at every
/// quadrature point of every cell.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub rule: QuadratureRule,
    pub geometry: Vec<Vec<PointGeometry>>,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Result<Self> {
        Self::with_rule(mesh, QuadratureRule::default())
    }

    pub fn with_rule(mesh: Mesh, rule: QuadratureRule) -> Result<Self> {
        let dofs = DofMap::new(&mesh);
        let geometry = (0..mesh.num_cells())
            .map(|c| {
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(xi, w)| point_geometry(&mesh, c, *xi, *w))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mesh,
            dofs,
            rule,
            geometry,
        })
    }

    pub fn local_values(&self, cell: usize, x: &[f64]) -> [f64; 36] {
        let d = &self.dofs.cell_dofs[cell];
        std::array::from_fn(|i| x[d[i]])
    }

    /// F and B at an arbitrary reference point of a cell.
    pub fn evaluate_point_state(
        &self,
        cell: usize,
        x: &[f64],
        b_macro: &Vector3<f64>,
        xi: [f64; 3],
    ) -> Result<(Matrix3<f64>, Vector3<f64>)> {
        let g = point_geometry(&self.mesh, cell, xi, 1.0)?;
        Ok(fields_at(&g, &self.local_values(cell, x), b_macro))
    }

    /// Cell average of det F over the reference cell.
    pub fn cell_average_jacobian(&self, cell: usize, x: &[f64]) -> Result<f64> {
        let local = self.local_values(cell, x);
        let zero = Vector3::zeros();
        let (mut vol, mut int) = (0.0, 0.0);
        for g in &self.geometry[cell] {
            let (f, _) = fields_at(g, &local, &zero);
            let det = f.determinant();
            if !(det > 0.0) {
                return Err(Error::ElementInversion { cell, det_f: det });
            }
            vol += g.weight;
            int += g.weight * det;
        }
        Ok(int / vol)
    }

    /// Nodal interpolation of a displacement field.
    pub fn interpolate_u(&self, x: &mut [f64], field: impl Fn([f64; 3]) -> [f64; 3]) {
        for (v, p) in self.mesh.vertices.iter().enumerate() {
            let u = field(*p);
            for k in 0..3 {
                x[3 * v + k] = u[k];
            }
        }
    }

    /// Edge-circulation interpolation of a vector potential, integrated with
    /// a three-point Gauss rule along each edge.
    pub fn interpolate_a(&self, x: &mut [f64], field: impl Fn([f64; 3]) -> [f64; 3]) {
        let (s, w) = gauss_legendre(3);
        for (e, [va, vb]) in self.mesh.edges.iter().enumerate() {
            let (pa, pb) = (self.mesh.vertices[*va], self.mesh.vertices[*vb]);
            let t: [f64; 3] = std::array::from_fn(|d| pb[d] - pa[d]);
            let mut circ = 0.0;
            for (si, wi) in s.iter().zip(&w) {
                let p = std::array::from_fn(|d| pa[d] + 0.5 * (1.0 + si) * t[d]);
                let a = field(p);
                circ += 0.5 * wi * (a[0] * t[0] + a[1] * t[1] + a[2] * t[2]);
            }
            x[self.dofs.a_dof(e)] = circ;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        for n in 1..=5 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn nedelec_curl_matches_finite_differences() {
        let xi = [0.3, -0.2, 0.7];
        let h = 1e-6;
        let (_, curls) = nedelec_eval(xi);
        for e in 0..12 {
            let d = |axis: usize, comp: usize| {
                let mut p = xi;
                let mut m = xi;
                p[axis] += h;
                m[axis] -= h;
                (nedelec_eval(p).0[e][comp] - nedelec_eval(m).0[e][comp]) / (2.0 * h)
            };
            let fd = [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)];
            for k in 0..3 {
                assert!((fd[k] - curls[e][k]).abs() < 1e-9, "edge {e}");
            }
        }
    }
}
