//! Load ramps, the step loop with bisection, and stress-relaxed loading.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::MaterialParams;
use crate::error::{Error, Result};
use crate::homogenization::{average_all, HomogenizedRecord};
use crate::linear::LinearSolver;
use crate::solver::{Loads, NewtonReport, NewtonSettings, RveProblem, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    Mechanical,
    Magnetic,
    Combined,
    StressRelaxedMagnetic,
    UniaxialIsochoricPlusMagnetic,
}

/// How the outer Jacobian of the stress relaxation is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterJacobian {
    /// Forward differences of full RVE solves, refreshed every iteration.
    #[default]
    ForwardDifference,
    /// Forward differences once, then rank-one updates.
    Broyden,
}

/// Symmetric stress components in the order xx, yy, zz, yz, xz, xy.
pub const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// A ramped macroscopic loading history over pseudo-time t in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct LoadPath {
    pub kind: LoadKind,
    pub f_final: Matrix3<f64>,
    pub b_final: Vector3<f64>,
    pub steps: usize,
    /// Override F_zz so that det F_M = 1 along the ramp.
    pub isochoric_zz: bool,
    /// Stress components driven to zero by the relaxed kinds.
    pub relaxed: Vec<(usize, usize)>,
    pub stress_tol: f64,
    pub outer_jacobian: OuterJacobian,
}

/// Final deformation of the isochoric mechanical case.
pub fn isochoric_biaxial() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.1, 0.9, 1.0 / (1.1 * 0.9)))
}

/// Final induction of the magnetic cases: 250 mT along z.
pub fn axial_induction() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, 0.25)
}

impl LoadPath {
    fn base(kind: LoadKind, f_final: Matrix3<f64>, b_final: Vector3<f64>, steps: usize) -> Self {
        Self {
            kind,
            f_final,
            b_final,
            steps,
            isochoric_zz: false,
            relaxed: Vec::new(),
            stress_tol: 1e-3,
            outer_jacobian: OuterJacobian::default(),
        }
    }

    pub fn mechanical(steps: usize) -> Self {
        Self {
            isochoric_zz: true,
            ..Self::base(LoadKind::Mechanical, isochoric_biaxial(), Vector3::zeros(), steps)
        }
    }

    pub fn magnetic(steps: usize) -> Self {
        Self::base(LoadKind::Magnetic, Matrix3::identity(), axial_induction(), steps)
    }

    pub fn combined(steps: usize) -> Self {
        Self {
            isochoric_zz: true,
            ..Self::base(LoadKind::Combined, isochoric_biaxial(), axial_induction(), steps)
        }
    }

    /// Magnetic ramp with all six stress components relaxed.
    pub fn stress_relaxed_magnetic(b_final: Vector3<f64>, steps: usize) -> Self {
        Self {
            relaxed: VOIGT.to_vec(),
            ..Self::base(LoadKind::StressRelaxedMagnetic, Matrix3::identity(), b_final, steps)
        }
    }

    /// Stretch along x with equal transverse contraction keeping det F_M = 1.
    pub fn uniaxial_isochoric_plus_magnetic(stretch: f64, b_final: Vector3<f64>, steps: usize) -> Self {
        let s = 1.0 / stretch.sqrt();
        let f = Matrix3::from_diagonal(&Vector3::new(stretch, s, s));
        Self::base(LoadKind::UniaxialIsochoricPlusMagnetic, f, b_final, steps)
    }

    pub fn is_relaxed(&self) -> bool {
        self.kind == LoadKind::StressRelaxedMagnetic
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.steps == 0 {
            errs.push("steps must be at least 1".into());
        }
        if self.is_relaxed() {
            if !(self.stress_tol > 0.0) {
                errs.push(format!("stress_tol must be positive (got {})", self.stress_tol));
            }
            if self.relaxed.is_empty() {
                errs.push("relaxed loading needs at least one stress component".into());
            }
        }
        for &(i, j) in &self.relaxed {
            if i > 2 || j > 2 {
                errs.push(format!("stress component ({i}, {j}) out of range"));
            }
        }
        if self.f_final.determinant() <= 0.0 {
            errs.push("final deformation gradient must have positive determinant".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Macroscopic loads at pseudo-time t.
    pub fn loads_at(&self, t: f64) -> Loads {
        let id = Matrix3::identity();
        let mut f = id + (self.f_final - id) * t;
        if self.kind == LoadKind::UniaxialIsochoricPlusMagnetic {
            let s = 1.0 / f[(0, 0)].sqrt();
            f[(1, 1)] = s;
            f[(2, 2)] = s;
        } else if self.isochoric_zz {
            f[(2, 2)] = 1.0 / (f[(0, 0)] * f[(1, 1)]);
        }
        Loads::new(f, self.b_final * t)
    }
}

/// Result of a load path. On failure the records up to the last converged
/// step are kept together with the error.
#[derive(Debug)]
pub struct PathOutcome {
    pub records: Vec<HomogenizedRecord>,
    pub state: State,
    pub reports: Vec<NewtonReport>,
    pub failure: Option<Error>,
}

impl PathOutcome {
    pub fn into_result(self) -> Result<Vec<HomogenizedRecord>> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.records),
        }
    }
}

/// Solves from the loads of `state` (pseudo-time t0) to those at t1,
/// halving the sub-step when Newton fails. Returns the Newton iterations
/// spent on converged sub-steps.
pub fn advance(
    problem: &RveProblem,
    state: &mut State,
    loads_at: impl Fn(f64) -> Loads,
    (t0, t1): (f64, f64),
    settings: &NewtonSettings,
    linear: &mut LinearSolver,
    step: usize,
    reports: &mut Vec<NewtonReport>,
) -> Result<usize> {
    let mut t = t0;
    let mut dt = t1 - t0;
    let mut halvings = 0;
    let mut iters = 0;
    while t < t1 {
        let t_try = if t + dt >= t1 { t1 } else { t + dt };
        let backup = state.clone();
        let rep = problem.newton_solve(state, &loads_at(t_try), settings, linear, step)?;
        let ok = rep.converged;
        if ok {
            iters += rep.iterations;
            t = t_try;
        }
        if settings.verbose && !ok {
            eprintln!(
                "step {step}: newton failed at t = {t_try:.6} ({}), halving",
                rep.failure.as_deref().unwrap_or("unknown")
            );
        }
        reports.push(rep);
        if !ok {
            *state = backup;
            halvings += 1;
            if halvings > settings.max_halvings {
                return Err(Error::StepFailure { t: t_try, halvings: halvings - 1 });
            }
            dt *= 0.5;
        }
    }
    state.t = t1;
    Ok(iters)
}

/// Runs a load path from the undeformed state. `on_step` sees every
/// converged step (for field output).
pub fn run_path(
    problem: &RveProblem,
    path: &LoadPath,
    settings: &NewtonSettings,
    mut on_step: impl FnMut(usize, &State, &HomogenizedRecord) -> Result<()>,
) -> PathOutcome {
    let mut state = problem.zero_state();
    let mut linear = LinearSolver::new(settings.linear_solver);
    let mut records = Vec::with_capacity(path.steps);
    let mut reports = Vec::new();
    let mut relax = RelaxationState::new(problem);
    let mut failure = None;
    for k in 1..=path.steps {
        let t0 = (k - 1) as f64 / path.steps as f64;
        let t1 = k as f64 / path.steps as f64;
        let result = if path.is_relaxed() {
            let opts = RelaxationSettings::from_path(path);
            stress_relaxed_step(problem, &mut state, &path.b_final * t1, t1, &opts, settings, &mut relax, k)
                .map(|o| o.record)
        } else {
            advance(problem, &mut state, |t| path.loads_at(t), (t0, t1), settings, &mut linear, k, &mut reports)
                .and_then(|iters| {
                    let mut rec = average_all(problem, &state)?;
                    rec.newton_iters = iters;
                    Ok(rec)
                })
        };
        match result.and_then(|rec| on_step(k, &state, &rec).map(|_| rec)) {
            Ok(rec) => records.push(rec),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    PathOutcome {
        records,
        state,
        reports,
        failure,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelaxationSettings {
    pub targets: Vec<(usize, usize)>,
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub jacobian: OuterJacobian,
}

impl Default for RelaxationSettings {
    fn default() -> Self {
        Self {
            targets: VOIGT.to_vec(),
            tol: 1e-3,
            max_iter: 30,
            fd_step: 1e-6,
            jacobian: OuterJacobian::default(),
        }
    }
}

impl RelaxationSettings {
    pub fn from_path(path: &LoadPath) -> Self {
        Self {
            targets: path.relaxed.clone(),
            tol: path.stress_tol,
            jacobian: path.outer_jacobian,
            ..Self::default()
        }
    }

    /// Indices into `VOIGT` of the relaxed components.
    fn free(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .targets
            .iter()
            .filter_map(|&(i, j)| VOIGT.iter().position(|&p| p == (i.min(j), i.max(j)) || p == (i.max(j), i.min(j))))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Carried across relaxation steps: the stress scale and a warm linear solver.
pub struct RelaxationState {
    pub sigma_ref: f64,
    linear: LinearSolver,
}

impl RelaxationState {
    pub fn new(problem: &RveProblem) -> Self {
        Self {
            sigma_ref: reference_modulus(&problem.materials.matrix),
            linear: LinearSolver::new(crate::linear::LinearBackend::Direct),
        }
    }
}

/// Stress scale of a material: C1 for Yeoh, mu/2 for Neo-Hooke.
pub fn reference_modulus(p: &MaterialParams) -> f64 {
    p.reference_modulus()
}

#[derive(Clone, Debug)]
pub struct RelaxationOutcome {
    pub f_macro: Matrix3<f64>,
    pub record: HomogenizedRecord,
    pub iterations: usize,
    /// Normalized norm of the selected stress components.
    pub residual: f64,
}

/// Symmetric stretch I + sym(v) from the six Voigt variables.
pub fn stretch_from(v: &[f64; 6]) -> Matrix3<f64> {
    let mut u = Matrix3::identity();
    for (p, &(i, j)) in VOIGT.iter().enumerate() {
        u[(i, j)] += v[p];
        if i != j {
            u[(j, i)] += v[p];
        }
    }
    u
}

fn variables_of(f: &Matrix3<f64>) -> [f64; 6] {
    let s = (f + f.transpose()) * 0.5;
    std::array::from_fn(|p| {
        let (i, j) = VOIGT[p];
        s[(i, j)] - if i == j { 1.0 } else { 0.0 }
    })
}

struct Evaluation {
    state: State,
    record: HomogenizedRecord,
    stress: DVector<f64>,
    iters: usize,
}

fn evaluate(
    problem: &RveProblem,
    from: &State,
    v: &[f64; 6],
    b_macro: Vector3<f64>,
    t: f64,
    free: &[usize],
    settings: &NewtonSettings,
    linear: &mut LinearSolver,
    step: usize,
) -> Result<Evaluation> {
    let mut state = from.clone();
    let start = from.loads;
    let target = Loads::new(stretch_from(v), b_macro);
    let interp = |s: f64| Loads::new(start.f_macro + (target.f_macro - start.f_macro) * s, start.b_macro + (target.b_macro - start.b_macro) * s);
    let mut reports = Vec::new();
    let iters = advance(problem, &mut state, interp, (0.0, 1.0), settings, linear, step, &mut reports)?;
    state.t = t;
    let record = average_all(problem, &state)?;
    let stress = DVector::from_iterator(free.len(), free.iter().map(|&p| record.sigma_avg[VOIGT[p]]));
    Ok(Evaluation { state, record, stress, iters })
}

/// Finds the symmetric macroscopic stretch at induction `b_macro` for which
/// the selected components of the averaged Cauchy stress vanish, relative
/// to the reference stress in `relax`.
pub fn stress_relaxed_step(
    problem: &RveProblem,
    state: &mut State,
    b_macro: Vector3<f64>,
    t: f64,
    opts: &RelaxationSettings,
    settings: &NewtonSettings,
    relax: &mut RelaxationState,
    step: usize,
) -> Result<RelaxationOutcome> {
    let free = opts.free();
    let m = free.len();
    let mut v = variables_of(&state.loads.f_macro);
    let mut cur = evaluate(problem, state, &v, b_macro, t, &free, settings, &mut relax.linear, step)?;
    let mut total_iters = cur.iters;
    let mut jac: Option<DMatrix<f64>> = None;

    for it in 0..=opts.max_iter {
        relax.sigma_ref = relax.sigma_ref.max(cur.record.sigma_avg.norm());
        let res = cur.stress.norm() / relax.sigma_ref;
        if settings.verbose {
            eprintln!("relax,{step},{it},{res:.6e}");
        }
        if res <= opts.tol || m == 0 {
            *state = cur.state;
            let mut record = cur.record;
            record.newton_iters = total_iters;
            return Ok(RelaxationOutcome {
                f_macro: state.loads.f_macro,
                record,
                iterations: it,
                residual: res,
            });
        }
        if it == opts.max_iter {
            *state = cur.state;
            return Err(Error::RelaxationFailure { iterations: it, residual: res });
        }

        let refresh = jac.is_none() || opts.jacobian == OuterJacobian::ForwardDifference;
        if refresh {
            let h = opts.fd_step;
            let cols: Vec<DVector<f64>> = free
                .par_iter()
                .map(|&p| {
                    let mut vp = v;
                    vp[p] += h;
                    let mut lin = LinearSolver::new(settings.linear_solver);
                    let e = evaluate(problem, &cur.state, &vp, b_macro, t, &free, settings, &mut lin, step)?;
                    Ok((e.stress - &cur.stress) / h)
                })
                .collect::<Result<_>>()?;
            jac = Some(DMatrix::from_columns(&cols));
        }
        let j = jac.as_ref().expect("jacobian set above");
        let dv = j
            .clone()
            .lu()
            .solve(&(-&cur.stress))
            .ok_or_else(|| Error::RelaxationFailure { iterations: it, residual: res })?;

        // Backtrack on the stress norm.
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..6 {
            let mut vt = v;
            for (k, &p) in free.iter().enumerate() {
                vt[p] += alpha * dv[k];
            }
            match evaluate(problem, &cur.state, &vt, b_macro, t, &free, settings, &mut relax.linear, step) {
                Ok(e) if e.stress.norm() < cur.stress.norm() => {
                    next = Some((vt, e));
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        let Some((vt, e)) = next else {
            *state = cur.state;
            return Err(Error::RelaxationFailure { iterations: it + 1, residual: res });
        };
        if opts.jacobian == OuterJacobian::Broyden {
            let s = dv * alpha;
            let y = &e.stress - &cur.stress;
            let jm = jac.as_mut().expect("jacobian set above");
            let corr = (&y - &*jm * &s) / s.norm_squared();
            *jm += corr * s.transpose();
        }
        total_iters += e.iters;
        v = vt;
        cur = e;
    }
    unreachable!("loop returns on its last iteration")
}
