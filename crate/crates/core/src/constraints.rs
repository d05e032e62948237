//! Affine leader-follower constraints and their elimination.
//!
//! Every constraint reads `x[follower] = sum(coeff * x[leader]) + offset`.
//! After [`ConstraintSet::resolve`] no leader is itself a follower, and the
//! full DOF vector is parameterized by the free DOFs as `x = T y + g`.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fem::DofMap;
use crate::linear::TripletMatrix;
use crate::mesh::{FacePairing, Mesh};

#[derive(Clone, Debug, PartialEq)]
pub struct AffineConstraint {
    pub follower: usize,
    pub terms: Vec<(usize, f64)>,
    pub offset: f64,
}

impl AffineConstraint {
    pub fn fixed(follower: usize, value: f64) -> Self {
        Self {
            follower,
            terms: Vec::new(),
            offset: value,
        }
    }

    pub fn link(follower: usize, leader: usize, coeff: f64, offset: f64) -> Self {
        Self {
            follower,
            terms: vec![(leader, coeff)],
            offset,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    constraints: Vec<AffineConstraint>,
    by_follower: BTreeMap<usize, Vec<usize>>,
}

// Relative tolerance for deciding that two chains of one follower agree.
const CHAIN_TOL: f64 = 1e-12;

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: AffineConstraint) {
        self.by_follower.entry(c.follower).or_default().push(self.constraints.len());
        self.constraints.push(c);
    }

    pub fn extend(&mut self, other: ConstraintSet) {
        for c in other.constraints {
            self.push(c);
        }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AffineConstraint> {
        self.constraints.iter()
    }

    pub fn is_follower(&self, dof: usize) -> bool {
        self.by_follower.contains_key(&dof)
    }

    /// The first constraint registered for `follower`.
    pub fn get(&self, follower: usize) -> Option<&AffineConstraint> {
        self.by_follower.get(&follower).map(|ids| &self.constraints[ids[0]])
    }

    pub fn followers(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_follower.keys().copied()
    }

    /// Rewrites every constraint in terms of DOFs that are not followers,
    /// accumulating coefficients and offsets along chains. A follower with
    /// several constraints must resolve to the same expression each time.
    pub fn resolve(&self) -> Result<ConstraintSet> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Active,
            Done,
        }
        type Expr = (BTreeMap<usize, f64>, f64);

        fn expand(
            set: &ConstraintSet,
            cid: usize,
            marks: &mut BTreeMap<usize, Mark>,
            memo: &mut BTreeMap<usize, Expr>,
        ) -> Result<Expr> {
            let c = &set.constraints[cid];
            let mut terms = BTreeMap::new();
            let mut offset = c.offset;
            for &(leader, coeff) in &c.terms {
                if set.is_follower(leader) {
                    let (lt, lo) = resolve_dof(set, leader, marks, memo)?;
                    offset += coeff * lo;
                    for (d, v) in lt {
                        *terms.entry(d).or_insert(0.0) += coeff * v;
                    }
                } else {
                    *terms.entry(leader).or_insert(0.0) += coeff;
                }
            }
            terms.retain(|_, v| *v != 0.0);
            Ok((terms, offset))
        }

        fn resolve_dof(
            set: &ConstraintSet,
            dof: usize,
            marks: &mut BTreeMap<usize, Mark>,
            memo: &mut BTreeMap<usize, Expr>,
        ) -> Result<Expr> {
            match marks.get(&dof).copied().unwrap_or(Mark::Open) {
                Mark::Done => return Ok(memo[&dof].clone()),
                Mark::Active => return Err(Error::CyclicConstraint(dof)),
                Mark::Open => {}
            }
            marks.insert(dof, Mark::Active);
            let ids = &set.by_follower[&dof];
            let first = expand(set, ids[0], marks, memo)?;
            for &other in &ids[1..] {
                let alt = expand(set, other, marks, memo)?;
                if !same_expression(&first, &alt) {
                    return Err(Error::ConstraintConflict {
                        dof,
                        detail: format!(
                            "chains resolve to different expressions (offsets {:e} and {:e})",
                            first.1, alt.1
                        ),
                    });
                }
            }
            marks.insert(dof, Mark::Done);
            memo.insert(dof, first.clone());
            Ok(first)
        }

        fn same_expression(a: &Expr, b: &Expr) -> bool {
            let scale = 1.0 + a.1.abs().max(b.1.abs());
            if (a.1 - b.1).abs() > CHAIN_TOL * scale || a.0.len() != b.0.len() {
                return false;
            }
            a.0.iter()
                .zip(&b.0)
                .all(|((da, va), (db, vb))| da == db && (va - vb).abs() <= CHAIN_TOL * (1.0 + va.abs()))
        }

        let mut marks = BTreeMap::new();
        let mut memo = BTreeMap::new();
        let mut out = ConstraintSet::new();
        for &dof in self.by_follower.keys() {
            let (terms, offset) = resolve_dof(self, dof, &mut marks, &mut memo)?;
            out.push(AffineConstraint {
                follower: dof,
                terms: terms.into_iter().collect(),
                offset,
            });
        }
        Ok(out)
    }

    /// Largest |x_f - sum(c x_l) - offset| over all constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let rhs: f64 = c.terms.iter().map(|&(l, v)| v * x[l]).sum::<f64>() + c.offset;
                (x[c.follower] - rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Text dump, one constraint per line: `follower <- coeff*leader ... + offset`.
    pub fn dump<W: Write>(&self, w: &mut W, name: impl Fn(usize) -> String) -> std::io::Result<()> {
        for c in &self.constraints {
            write!(w, "{} <-", name(c.follower))?;
            for &(l, v) in &c.terms {
                write!(w, " {v:+}*{}", name(l))?;
            }
            writeln!(w, " {:+e}", c.offset)?;
        }
        Ok(())
    }
}

/// u(X+) = u(X-) + (F_M - I) L_i for every periodic vertex pair.
pub fn mechanical_periodicity(pairing: &FacePairing, dofs: &DofMap, f_macro: &Matrix3<f64>) -> ConstraintSet {
    let g = f_macro - Matrix3::identity();
    let mut set = ConstraintSet::new();
    for ap in &pairing.axes {
        let jump = g * Vector3::from(ap.offset);
        for &(f, l) in &ap.vertex_pairs {
            for k in 0..3 {
                set.push(AffineConstraint::link(dofs.u_dof(f, k), dofs.u_dof(l, k), 1.0, jump[k]));
            }
        }
    }
    set
}

/// a(e+) = alpha_e a(e-) for every periodic edge pair.
pub fn magnetic_periodicity(pairing: &FacePairing, dofs: &DofMap) -> ConstraintSet {
    let mut set = ConstraintSet::new();
    for ap in &pairing.axes {
        for &(f, l, s) in &ap.edge_pairs {
            set.push(AffineConstraint::link(dofs.a_dof(f), dofs.a_dof(l), s, 0.0));
        }
    }
    set
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeKind {
    /// Spanning tree of the periodic edge graph plus three edges closing
    /// loops around the three periods.
    #[default]
    TreeCotree,
    /// One edge coefficient fixed to zero. The periodic curl-curl operator
    /// keeps a null space, so this is only useful for diagnostics.
    SingleEdge,
    /// No gauge; the magnetic block is singular.
    None,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnchorGaugeOptions {
    pub anchor_vertex: Option<usize>,
    pub gauge: GaugeKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorGaugeReport {
    pub anchor_vertex: usize,
    /// Requested anchor that was a periodic follower and was replaced.
    pub reselected_from: Option<usize>,
    pub gauge_edges: Vec<usize>,
}

/// Validates a requested anchor vertex; followers are not eligible.
pub fn select_anchor(pairing: &FacePairing, num_vertices: usize, requested: Option<usize>) -> Result<usize> {
    let leaders = pairing.vertex_leaders(num_vertices);
    match requested {
        None => Ok((0..num_vertices).find(|&v| leaders[v].leader == v).expect("a leader vertex exists")),
        Some(v) if v >= num_vertices => Err(Error::Selection(format!("anchor vertex {v} does not exist"))),
        Some(v) if leaders[v].leader != v => Err(Error::Selection(format!(
            "anchor vertex {v} is a periodic follower of vertex {}",
            leaders[v].leader
        ))),
        Some(v) => Ok(v),
    }
}

fn winding_rank(ws: &[[i32; 3]]) -> usize {
    let v: Vec<Vector3<f64>> = ws.iter().map(|w| Vector3::new(w[0] as f64, w[1] as f64, w[2] as f64)).collect();
    match v.len() {
        0 => 0,
        1 => (v[0].norm() > 0.0) as usize,
        2 => {
            if v[0].cross(&v[1]).norm() > 0.0 {
                2
            } else {
                (v[0].norm() > 0.0 || v[1].norm() > 0.0) as usize
            }
        }
        _ => {
            if Matrix3::from_columns(&v[..3]).determinant().abs() > 0.5 {
                3
            } else {
                2
            }
        }
    }
}

/// Tree-cotree gauge on the periodic edge graph. Returns the edges whose
/// coefficients are fixed to zero.
pub fn tree_cotree_edges(mesh: &Mesh, pairing: &FacePairing, root: usize) -> Vec<usize> {
    let vl = pairing.vertex_leaders(mesh.num_vertices());
    let el = pairing.edge_leaders(mesh.num_edges());
    let leader_edges: Vec<usize> = (0..mesh.num_edges()).filter(|&e| el[e].leader == e).collect();

    // Adjacency over leader vertices: (edge, neighbour, lattice step).
    let mut adj: Vec<Vec<(usize, usize, [i32; 3])>> = vec![Vec::new(); mesh.num_vertices()];
    let step = |e: usize| {
        let [a, b] = mesh.edges[e];
        let (sa, sb) = (vl[a].shift, vl[b].shift);
        (vl[a].leader, vl[b].leader, [sb[0] - sa[0], sb[1] - sa[1], sb[2] - sa[2]])
    };
    for &e in &leader_edges {
        let (a, b, t) = step(e);
        adj[a].push((e, b, t));
        adj[b].push((e, a, [-t[0], -t[1], -t[2]]));
    }

    let mut lift: Vec<Option<[i32; 3]>> = vec![None; mesh.num_vertices()];
    let mut in_tree = vec![false; mesh.num_edges()];
    let mut queue = VecDeque::from([root]);
    lift[root] = Some([0; 3]);
    while let Some(v) = queue.pop_front() {
        let wv = lift[v].expect("queued vertices are lifted");
        for &(e, w, t) in &adj[v] {
            if lift[w].is_none() {
                lift[w] = Some([wv[0] + t[0], wv[1] + t[1], wv[2] + t[2]]);
                in_tree[e] = true;
                queue.push_back(w);
            }
        }
    }

    let mut fixed: Vec<usize> = leader_edges.iter().copied().filter(|&e| in_tree[e]).collect();
    let mut windings: Vec<[i32; 3]> = Vec::new();
    for &e in &leader_edges {
        if in_tree[e] || windings.len() == 3 {
            continue;
        }
        let (a, b, t) = step(e);
        let (la, lb) = (lift[a].expect("connected"), lift[b].expect("connected"));
        let w = [la[0] + t[0] - lb[0], la[1] + t[1] - lb[1], la[2] + t[2] - lb[2]];
        let mut trial = windings.clone();
        trial.push(w);
        if winding_rank(&trial) > windings.len() {
            windings = trial;
            fixed.push(e);
        }
    }
    fixed.sort_unstable();
    fixed
}

/// Removes rigid translations by fixing one leader vertex and the gauge
/// freedom of the vector potential.
pub fn anchor_and_gauge(
    mesh: &Mesh,
    pairing: &FacePairing,
    dofs: &DofMap,
    opts: &AnchorGaugeOptions,
) -> Result<(ConstraintSet, AnchorGaugeReport)> {
    let nv = mesh.num_vertices();
    let (anchor, reselected_from) = match select_anchor(pairing, nv, opts.anchor_vertex) {
        Ok(v) => (v, None),
        Err(Error::Selection(_)) if opts.anchor_vertex.is_some_and(|v| v < nv) => {
            let v = opts.anchor_vertex.unwrap_or_default();
            (pairing.vertex_leaders(nv)[v].leader, Some(v))
        }
        Err(e) => return Err(e),
    };
    let gauge_edges = match opts.gauge {
        GaugeKind::TreeCotree => tree_cotree_edges(mesh, pairing, anchor),
        GaugeKind::SingleEdge => {
            let el = pairing.edge_leaders(mesh.num_edges());
            vec![(0..mesh.num_edges()).find(|&e| el[e].leader == e).expect("a leader edge exists")]
        }
        GaugeKind::None => Vec::new(),
    };
    let mut set = ConstraintSet::new();
    for k in 0..3 {
        set.push(AffineConstraint::fixed(dofs.u_dof(anchor, k), 0.0));
    }
    for &e in &gauge_edges {
        set.push(AffineConstraint::fixed(dofs.a_dof(e), 0.0));
    }
    Ok((
        set,
        AnchorGaugeReport {
            anchor_vertex: anchor,
            reselected_from,
            gauge_edges,
        },
    ))
}

/// Elimination of resolved constraints: `x = T y + g`.
#[derive(Clone, Debug)]
pub struct Condenser {
    n_full: usize,
    free: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    offsets: Vec<f64>,
}

impl Condenser {
    /// `set` must be resolved (see [`ConstraintSet::resolve`]).
    pub fn new(set: &ConstraintSet, n_full: usize) -> Self {
        let mut reduced = vec![usize::MAX; n_full];
        let mut free = Vec::new();
        for (d, slot) in reduced.iter_mut().enumerate() {
            if !set.is_follower(d) {
                *slot = free.len();
                free.push(d);
            }
        }
        let mut row_ptr = Vec::with_capacity(n_full + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut offsets = vec![0.0; n_full];
        row_ptr.push(0);
        for d in 0..n_full {
            match set.get(d) {
                Some(c) => {
                    for &(l, v) in &c.terms {
                        debug_assert!(reduced[l] != usize::MAX, "constraint set is not resolved");
                        cols.push(reduced[l]);
                        vals.push(v);
                    }
                    offsets[d] = c.offset;
                }
                None => {
                    cols.push(reduced[d]);
                    vals.push(1.0);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n_full,
            free,
            row_ptr,
            cols,
            vals,
            offsets,
        }
    }

    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn n_reduced(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Row `d` of T as (reduced index, coefficient) pairs.
    pub fn row(&self, d: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[d]..self.row_ptr[d + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// x = T y + g
    pub fn expand(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.expand_direction(y);
        for (xi, gi) in x.iter_mut().zip(&self.offsets) {
            *xi += gi;
        }
        x
    }

    /// T y, without offsets.
    pub fn expand_direction(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n_full).map(|d| self.row(d).map(|(c, v)| v * y[c]).sum()).collect()
    }

    /// Free components of a full vector.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| x[d]).collect()
    }

    /// T^T r
    pub fn condense_vector(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_reduced()];
        for (d, rd) in r.iter().enumerate() {
            for (c, v) in self.row(d) {
                out[c] += v * rd;
            }
        }
        out
    }

    /// T^T K T from full-size triplets.
    pub fn condense_matrix(&self, k: &TripletMatrix) -> TripletMatrix {
        let mut out = TripletMatrix::new(self.n_reduced());
        for &(i, j, v) in k.entries() {
            for (ci, vi) in self.row(i) {
                for (cj, vj) in self.row(j) {
                    out.push(ci, cj, vi * v * vj);
                }
            }
        }
        out
    }

    /// Reduced system T^T K T y = T^T (f - K g).
    pub fn condense(&self, k: &TripletMatrix, f: &[f64]) -> (TripletMatrix, Vec<f64>) {
        let kg = k.mul_vec(&self.offsets);
        let rhs: Vec<f64> = f.iter().zip(&kg).map(|(a, b)| a - b).collect();
        (self.condense_matrix(k), self.condense_vector(&rhs))
    }
}
