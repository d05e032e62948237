//! Structured periodic hexahedral meshes of the RVE.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference coordinates of the eight cell vertices, in VTK hexahedron order.
pub const LOCAL_VERTICES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local edges as (start, end) vertex pairs. Each edge points along the
/// positive direction of its reference axis: edges 0-3 along xi, 4-7 along
/// eta, 8-11 along zeta.
pub const LOCAL_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [3, 2],
    [4, 5],
    [7, 6],
    [0, 3],
    [1, 2],
    [4, 7],
    [5, 6],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Matrix,
    Particle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inclusion {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub n: [usize; 3],
    pub lengths: [f64; 3],
    pub vertices: Vec<[f64; 3]>,
    pub cells: Vec<[usize; 8]>,
    /// Edges as (low, high) vertex ids.
    pub edges: Vec<[usize; 2]>,
    /// For every cell, the global edge and the sign relating the local
    /// reference tangent to the canonical low-to-high direction.
    pub cell_edges: Vec<[(usize, f64); 12]>,
    pub phase: Vec<Phase>,
    pub inclusions: Vec<Inclusion>,
    edge_lookup: HashMap<[usize; 2], usize>,
}

fn min_image(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

fn periodic_distance(a: &[f64; 3], b: &[f64; 3], lengths: &[f64; 3]) -> f64 {
    (0..3)
        .map(|i| min_image(a[i] - b[i], lengths[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_inclusions(lengths: &[f64; 3], inclusions: &[Inclusion]) -> Result<()> {
    let lmin = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    for (i, inc) in inclusions.iter().enumerate() {
        if !(inc.radius > 0.0) {
            return Err(Error::Geometry(format!("inclusion {i} has non-positive radius {}", inc.radius)));
        }
        if 2.0 * inc.radius >= lmin {
            return Err(Error::Geometry(format!(
                "inclusion {i} (radius {}) overlaps its own periodic image",
                inc.radius
            )));
        }
        for (j, other) in inclusions.iter().enumerate().skip(i + 1) {
            let d = periodic_distance(&inc.center, &other.center, lengths);
            if d < inc.radius + other.radius {
                return Err(Error::Geometry(format!(
                    "inclusions {i} and {j} overlap (center distance {d} < {})",
                    inc.radius + other.radius
                )));
            }
        }
    }
    Ok(())
}

impl Mesh {
    pub fn build(n: [usize; 3], lengths: [f64; 3], inclusions: Vec<Inclusion>) -> Result<Self> {
        if n.iter().any(|&k| k < 2) {
            return Err(Error::Geometry(format!("need at least 2 cells per axis, got {n:?}")));
        }
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Geometry(format!("edge lengths must be positive, got {lengths:?}")));
        }
        check_inclusions(&lengths, &inclusions)?;

        let [nx, ny, nz] = n;
        let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    vertices.push([
                        lengths[0] * i as f64 / nx as f64,
                        lengths[1] * j as f64 / ny as f64,
                        lengths[2] * k as f64 / nz as f64,
                    ]);
                }
            }
        }

        let mut cells = Vec::with_capacity(nx * ny * nz);
        let mut phase = Vec::with_capacity(nx * ny * nz);
        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut cell_edges = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let cell: [usize; 8] = std::array::from_fn(|a| {
                        let r = LOCAL_VERTICES[a];
                        vid(i + (r[0] > 0.0) as usize, j + (r[1] > 0.0) as usize, k + (r[2] > 0.0) as usize)
                    });
                    let ce = std::array::from_fn(|e| {
                        let [a, b] = LOCAL_EDGES[e];
                        let (va, vb) = (cell[a], cell[b]);
                        let key = [va.min(vb), va.max(vb)];
                        let id = *edge_lookup.entry(key).or_insert_with(|| {
                            edges.push(key);
                            edges.len() - 1
                        });
                        (id, if va < vb { 1.0 } else { -1.0 })
                    });
                    let centroid = [
                        lengths[0] * (i as f64 + 0.5) / nx as f64,
                        lengths[1] * (j as f64 + 0.5) / ny as f64,
                        lengths[2] * (k as f64 + 0.5) / nz as f64,
                    ];
                    let inside = inclusions
                        .iter()
                        .any(|inc| periodic_distance(&centroid, &inc.center, &lengths) < inc.radius);
                    cells.push(cell);
                    cell_edges.push(ce);
                    phase.push(if inside { Phase::Particle } else { Phase::Matrix });
                }
            }
        }

        Ok(Self {
            n,
            lengths,
            vertices,
            cells,
            edges,
            cell_edges,
            phase,
            inclusions,
            edge_lookup,
        })
    }

    /// Homogeneous unit cube with `n` cells per axis.
    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::build([n; 3], [1.0; 3], Vec::new())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_id(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.n[0] + 1) * (j + (self.n[1] + 1) * k)
    }

    pub fn vertex_index(&self, v: usize) -> [usize; 3] {
        let (sx, sy) = (self.n[0] + 1, self.n[1] + 1);
        [v % sx, (v / sx) % sy, v / (sx * sy)]
    }

    /// Edge id and the sign of (a -> b) relative to its canonical direction.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<(usize, f64)> {
        let key = [a.min(b), a.max(b)];
        self.edge_lookup
            .get(&key)
            .map(|&id| (id, if a < b { 1.0 } else { -1.0 }))
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn cell_volume(&self, _cell: usize) -> f64 {
        (0..3).map(|i| self.lengths[i] / self.n[i] as f64).product()
    }

    pub fn particle_cells(&self) -> usize {
        self.phase.iter().filter(|&&p| p == Phase::Particle).count()
    }

    /// Particle volume fraction of the voxelized geometry.
    pub fn volume_fraction(&self) -> f64 {
        self.particle_cells() as f64 / self.num_cells() as f64
    }

    /// Particle volume fraction of the exact spheres.
    pub fn analytic_volume_fraction(&self) -> f64 {
        let v: f64 = self
            .inclusions
            .iter()
            .map(|inc| 4.0 / 3.0 * std::f64::consts::PI * inc.radius.powi(3))
            .sum();
        v / self.volume()
    }

    /// Legacy ASCII VTK unstructured grid with optional point vectors and
    /// cell scalars. The phase label is always written.
    pub fn write_vtk<W: Write>(
        &self,
        w: &mut W,
        title: &str,
        point_vectors: &[(&str, &[[f64; 3]])],
        cell_scalars: &[(&str, &[f64])],
    ) -> Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", title.replace('\n', " "))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.num_vertices())?;
        for v in &self.vertices {
            writeln!(w, "{:.10e} {:.10e} {:.10e}", v[0], v[1], v[2])?;
        }
        writeln!(w, "CELLS {} {}", self.num_cells(), 9 * self.num_cells())?;
        for c in &self.cells {
            writeln!(w, "8 {} {} {} {} {} {} {} {}", c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7])?;
        }
        writeln!(w, "CELL_TYPES {}", self.num_cells())?;
        for _ in &self.cells {
            writeln!(w, "12")?;
        }
        if !point_vectors.is_empty() {
            writeln!(w, "POINT_DATA {}", self.num_vertices())?;
            for (name, data) in point_vectors {
                writeln!(w, "VECTORS {name} double")?;
                for v in data.iter() {
                    writeln!(w, "{:.10e} {:.10e} {:.10e}", v[0], v[1], v[2])?;
                }
            }
        }
        writeln!(w, "CELL_DATA {}", self.num_cells())?;
        writeln!(w, "SCALARS phase int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for p in &self.phase {
            writeln!(w, "{}", (*p == Phase::Particle) as u8)?;
        }
        for (name, data) in cell_scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in data.iter() {
                writeln!(w, "{v:.10e}")?;
            }
        }
        Ok(())
    }
}

/// Pairs of opposing boundary entities along one axis.
#[derive(Clone, Debug)]
pub struct AxisPairing {
    /// (follower on the + face, leader on the - face)
    pub vertex_pairs: Vec<(usize, usize)>,
    /// (follower edge, leader edge, orientation factor)
    pub edge_pairs: Vec<(usize, usize, f64)>,
    /// Reference distance between the paired faces.
    pub offset: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct FacePairing {
    pub axes: [AxisPairing; 3],
}

/// Orientation factor of a periodic edge pair: +1 when the translated
/// follower edge has the same canonical direction as its leader, -1 when it
/// is reversed, `None` if the edges are not images of each other.
pub fn orientation_factor(follower: [usize; 2], leader: [usize; 2], translate: impl Fn(usize) -> usize) -> Option<f64> {
    let (a, b) = (translate(follower[0]), translate(follower[1]));
    if a == leader[0] && b == leader[1] {
        Some(1.0)
    } else if a == leader[1] && b == leader[0] {
        Some(-1.0)
    } else {
        None
    }
}

/// Ultimate periodic leader of a vertex and the number of lattice
/// translations accumulated along its chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VertexLeader {
    pub leader: usize,
    pub shift: [i32; 3],
}

/// Ultimate periodic leader of an edge and the product of orientation
/// factors along its chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeLeader {
    pub leader: usize,
    pub sign: f64,
    pub shift: [i32; 3],
}

pub fn pair_periodic_entities(mesh: &Mesh) -> FacePairing {
    let axes = std::array::from_fn(|axis| {
        let n = mesh.n[axis];
        let translate = |v: usize| {
            let mut idx = mesh.vertex_index(v);
            debug_assert_eq!(idx[axis], n);
            idx[axis] = 0;
            mesh.vertex_id(idx[0], idx[1], idx[2])
        };
        let on_face = |v: usize| mesh.vertex_index(v)[axis] == n;
        let vertex_pairs = (0..mesh.num_vertices())
            .filter(|&v| on_face(v))
            .map(|v| (v, translate(v)))
            .collect();
        let edge_pairs = mesh
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| on_face(e[0]) && on_face(e[1]))
            .map(|(id, e)| {
                let (a, b) = (translate(e[0]), translate(e[1]));
                let (leader, _) = mesh.find_edge(a, b).expect("structured grid has translated edges");
                let sign = orientation_factor(*e, mesh.edges[leader], translate).expect("translated edge");
                (id, leader, sign)
            })
            .collect();
        let mut offset = [0.0; 3];
        offset[axis] = mesh.lengths[axis];
        AxisPairing {
            vertex_pairs,
            edge_pairs,
            offset,
        }
    });
    FacePairing { axes }
}

impl FacePairing {
    /// Follows follower -> leader links across all three axes until an
    /// entity that is not a follower is reached.
    pub fn vertex_leaders(&self, num_vertices: usize) -> Vec<VertexLeader> {
        let mut link: Vec<Option<(usize, usize)>> = vec![None; num_vertices];
        for (axis, ap) in self.axes.iter().enumerate() {
            for &(f, l) in &ap.vertex_pairs {
                link[f].get_or_insert((l, axis));
            }
        }
        (0..num_vertices)
            .map(|v| {
                let mut cur = v;
                let mut shift = [0; 3];
                while let Some((l, axis)) = link[cur] {
                    shift[axis] += 1;
                    cur = l;
                }
                VertexLeader { leader: cur, shift }
            })
            .collect()
    }

    pub fn edge_leaders(&self, num_edges: usize) -> Vec<EdgeLeader> {
        let mut link: Vec<Option<(usize, f64, usize)>> = vec![None; num_edges];
        for (axis, ap) in self.axes.iter().enumerate() {
            for &(f, l, s) in &ap.edge_pairs {
                link[f].get_or_insert((l, s, axis));
            }
        }
        (0..num_edges)
            .map(|e| {
                let (mut cur, mut sign, mut shift) = (e, 1.0, [0; 3]);
                while let Some((l, s, axis)) = link[cur] {
                    sign *= s;
                    shift[axis] += 1;
                    cur = l;
                }
                EdgeLeader { leader: cur, sign, shift }
            })
            .collect()
    }
}
