//! Sparse storage and linear solvers for the condensed tangent.
//!
//! The direct backend is a supernodal Cholesky factorization from `faer`
//! with LU as the fallback for indefinite tangents. The symbolic analysis is
//! cached and reused as long as the sparsity pattern does not change, which
//! is the case for every Newton iteration of a run. The iterative backend is
//! Jacobi-preconditioned CG, switching to MINRES on indefinite tangents.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Col, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate-format square matrix; duplicate entries are summed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripletMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::with_capacity(n, n);
        for i in 0..n {
            m.push(i, i, 1.0);
        }
        m
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_csc(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<_> = self.entries.iter().map(|&(i, j, v)| faer::sparse::Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &trips)
            .map_err(|e| Error::SingularSystem { detail: format!("matrix construction failed: {e:?}") })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearBackend {
    #[default]
    Direct,
    Iterative,
}

impl std::str::FromStr for LinearBackend {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Self::Direct),
            "iterative" => Ok(Self::Iterative),
            other => Err(format!("unknown linear solver '{other}' (expected direct or iterative)")),
        }
    }
}

/// Requested relative residual of every linear solve.
pub const LINEAR_RTOL: f64 = 1e-10;

// Lower bound on the condition number, ||K|| ||x|| / ||b||, above which a
// solve is reported as (near-)singular even if its residual looks fine.
const CONDITION_LIMIT: f64 = 1e14;

struct Pattern {
    n: usize,
    index: Vec<(usize, usize)>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    llt: Option<SymbolicLlt<usize>>,
    lu: Option<SymbolicLu<usize>>,
}

enum Factor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
    Iterative,
}

impl Factor {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Col::<f64>::from_fn(b.len(), |i| b[i]);
        let x = match self {
            Factor::Llt(f) => f.solve(&rhs),
            Factor::Lu(f) => f.solve(&rhs),
            Factor::Iterative => unreachable!("iterative backend has no factorization"),
        };
        (0..b.len()).map(|i| x[i]).collect()
    }
}

/// Linear solver with a cached sparsity analysis.
pub struct LinearSolver {
    backend: LinearBackend,
    pattern: Option<Pattern>,
    factor: Option<(Factor, SparseColMat<usize, f64>)>,
}

impl LinearSolver {
    pub fn new(backend: LinearBackend) -> Self {
        faer::set_global_parallelism(faer::Par::Seq);
        Self {
            backend,
            pattern: None,
            factor: None,
        }
    }

    pub fn backend(&self) -> LinearBackend {
        self.backend
    }

    fn matrix(&mut self, k: &TripletMatrix) -> Result<SparseColMat<usize, f64>> {
        let same = self
            .pattern
            .as_ref()
            .is_some_and(|p| p.n == k.n && p.index.len() == k.entries.len() && p.index.iter().zip(&k.entries).all(|(a, b)| a.0 == b.0 && a.1 == b.1));
        if !same {
            let pairs: Vec<Pair<usize, usize>> = k.entries.iter().map(|&(i, j, _)| Pair { row: i, col: j }).collect();
            let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(k.n, k.n, &pairs)
                .map_err(|e| Error::SingularSystem { detail: format!("pattern construction failed: {e:?}") })?;
            self.pattern = Some(Pattern {
                n: k.n,
                index: k.entries.iter().map(|&(i, j, _)| (i, j)).collect(),
                symbolic,
                argsort,
                llt: None,
                lu: None,
            });
        }
        let p = self.pattern.as_ref().expect("pattern just built");
        let vals: Vec<f64> = k.entries.iter().map(|e| e.2).collect();
        SparseColMat::new_from_argsort(p.symbolic.clone(), &p.argsort, &vals)
            .map_err(|e| Error::SingularSystem { detail: format!("value assembly failed: {e:?}") })
    }

    fn factorize(&mut self, a: &SparseColMat<usize, f64>) -> Result<Factor> {
        let p = self.pattern.as_mut().expect("pattern exists");
        if p.llt.is_none() {
            p.llt = SymbolicLlt::try_new(a.symbolic(), Side::Lower).ok();
        }
        if let Some(sym) = &p.llt {
            if let Ok(f) = Llt::try_new_with_symbolic(sym.clone(), a.as_ref(), Side::Lower) {
                return Ok(Factor::Llt(f));
            }
        }
        if p.lu.is_none() {
            p.lu = Some(
                SymbolicLu::try_new(a.symbolic())
                    .map_err(|e| Error::SingularSystem { detail: format!("symbolic LU failed: {e:?}") })?,
            );
        }
        let sym = p.lu.clone().expect("set above");
        Lu::try_new_with_symbolic(sym, a.as_ref())
            .map(Factor::Lu)
            .map_err(|e| Error::SingularSystem { detail: format!("LU factorization failed: {e:?}") })
    }

    /// Solves K x = b and keeps the factorization for [`Self::resolve`].
    pub fn solve(&mut self, k: &TripletMatrix, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(k.n, b.len(), "dimension mismatch");
        let a = self.matrix(k)?;
        match self.backend {
            LinearBackend::Direct => {
                let f = self.factorize(&a)?;
                let x = refine(&a, &f, b)?;
                self.factor = Some((f, a));
                Ok(x)
            }
            LinearBackend::Iterative => {
                self.factor = None;
                let x = pcg(&a, b, None)?;
                self.factor = Some((Factor::Iterative, a));
                Ok(x)
            }
        }
    }

    /// Solves with the most recently factored matrix and a new right-hand side.
    pub fn resolve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (f, a) = self.factor.as_ref().ok_or_else(|| Error::SingularSystem {
            detail: "no factorization available".into(),
        })?;
        match f {
            Factor::Iterative => pcg(a, b, None),
            _ => refine(a, f, b),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn spmv(a: &SparseColMat<usize, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    let cp = a.col_ptr();
    let ri = a.row_idx();
    let v = a.val();
    for j in 0..a.ncols() {
        for p in cp[j]..cp[j + 1] {
            y[ri[p]] += v[p] * x[j];
        }
    }
    y
}

fn inf_norm(a: &SparseColMat<usize, f64>) -> f64 {
    let mut rows = vec![0.0; a.nrows()];
    let ri = a.row_idx();
    for (p, v) in a.val().iter().enumerate() {
        rows[ri[p]] += v.abs();
    }
    rows.into_iter().fold(0.0, f64::max)
}

fn diagonal(a: &SparseColMat<usize, f64>) -> Vec<f64> {
    let mut d = vec![0.0; a.nrows()];
    let cp = a.col_ptr();
    let ri = a.row_idx();
    for j in 0..a.ncols() {
        for p in cp[j]..cp[j + 1] {
            if ri[p] == j {
                d[j] += a.val()[p];
            }
        }
    }
    d
}

fn check_solution(a: &SparseColMat<usize, f64>, x: &[f64], b: &[f64], rel: f64) -> Result<()> {
    let bn = norm(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem {
            detail: "factorization produced non-finite values".into(),
        });
    }
    let growth = inf_norm(a) * norm(x) / bn;
    if growth > CONDITION_LIMIT {
        return Err(Error::SingularSystem {
            detail: format!("condition estimate {growth:.2e} exceeds {CONDITION_LIMIT:.0e}"),
        });
    }
    if rel > LINEAR_RTOL {
        return Err(Error::SingularSystem {
            detail: format!("relative residual {rel:.2e} after refinement"),
        });
    }
    Ok(())
}

// Direct solve followed by a few steps of iterative refinement.
fn refine(a: &SparseColMat<usize, f64>, f: &Factor, b: &[f64]) -> Result<Vec<f64>> {
    let bn = norm(b);
    if bn == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let mut x = f.solve(b);
    let mut rel = f64::INFINITY;
    for _ in 0..4 {
        let ax = spmv(a, &x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        rel = norm(&r) / bn;
        if !rel.is_finite() || rel <= 0.01 * LINEAR_RTOL {
            break;
        }
        let dx = f.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }
    check_solution(a, &x, b, rel)?;
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients to relative residual
/// [`LINEAR_RTOL`]. Tangents that turn out to be indefinite (negative
/// diagonal or negative curvature) are handed to MINRES.
fn pcg(a: &SparseColMat<usize, f64>, b: &[f64], max_iter: Option<usize>) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let d = diagonal(a);
    if d.iter().any(|&v| !v.is_finite() || v == 0.0) {
        return Err(Error::SingularSystem {
            detail: "zero diagonal entry; Jacobi preconditioning is not defined".into(),
        });
    }
    let max_iter = max_iter.unwrap_or(20 * n + 100);
    if d.iter().any(|&v| v < 0.0) {
        return minres(a, b, &d, max_iter);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&d).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let ap = spmv(a, &p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return minres(a, b, &d, max_iter);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bn;
        if rel <= LINEAR_RTOL {
            let ax = spmv(a, &x);
            let true_rel = norm(&b.iter().zip(&ax).map(|(b, ax)| b - ax).collect::<Vec<_>>()) / bn;
            if true_rel <= 10.0 * LINEAR_RTOL {
                check_solution(a, &x, b, 0.0)?;
                return Ok(x);
            }
        }
        for i in 0..n {
            z[i] = r[i] / d[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let ax = spmv(a, &x);
    let rel = norm(&b.iter().zip(&ax).map(|(b, ax)| b - ax).collect::<Vec<_>>()) / bn;
    Err(Error::IterativeStagnation {
        iterations: max_iter,
        residual: rel,
    })
}

/// Preconditioned MINRES (Paige and Saunders) for symmetric indefinite
/// systems, with the SPD preconditioner diag(|K_ii|).
fn minres(a: &SparseColMat<usize, f64>, b: &[f64], d: &[f64], max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = norm(b);
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let precond = |r: &[f64]| r.iter().zip(d).map(|(r, d)| r / d.abs()).collect::<Vec<f64>>();
    let true_rel = |x: &[f64]| {
        let ax = spmv(a, x);
        norm(&b.iter().zip(&ax).map(|(b, ax)| b - ax).collect::<Vec<_>>()) / bn
    };

    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = dot(&r1, &y).sqrt();
    let (mut beta, mut oldb) = (beta1, 0.0);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    for it in 0..max_iter {
        let v: Vec<f64> = y.iter().map(|yi| yi / beta).collect();
        y = spmv(a, &v);
        if it > 0 {
            for i in 0..n {
                y[i] -= beta / oldb * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        for i in 0..n {
            y[i] -= alfa / beta * r2[i];
        }
        r1 = std::mem::replace(&mut r2, y);
        y = precond(&r2);
        oldb = beta;
        beta = dot(&r2, &y).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = (0..n).map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma).collect();
        for i in 0..n {
            x[i] += phi * w[i];
        }
        // phibar estimates the preconditioned residual; confirm with the true one.
        if phibar <= LINEAR_RTOL * beta1 || beta == 0.0 {
            let rel = true_rel(&x);
            if rel <= 10.0 * LINEAR_RTOL {
                check_solution(a, &x, b, 0.0)?;
                return Ok(x);
            }
            if beta == 0.0 {
                break;
            }
        }
    }
    Err(Error::IterativeStagnation {
        iterations: max_iter,
        residual: true_rel(&x),
    })
}

/// One-shot solve of `k x = b` with a fresh solver.
pub fn linear_solve(k: &TripletMatrix, b: &[f64], backend: LinearBackend) -> Result<Vec<f64>> {
    LinearSolver::new(backend).solve(k, b)
}
