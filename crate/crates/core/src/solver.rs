//! Monolithic assembly and Newton iteration for the coupled RVE problem.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::{energy, to_array, MaterialParams, PointKinematics};
use crate::constraints::{
    anchor_and_gauge, magnetic_periodicity, mechanical_periodicity, AnchorGaugeOptions, AnchorGaugeReport,
    Condenser, ConstraintSet,
};
use crate::derivatives::{energy_derivatives, energy_gradient, IDX_B, IDX_JBAR};
use crate::error::{Error, Result};
use crate::fem::{fields_at, Discretization, PointGeometry};
use crate::linear::{LinearBackend, LinearSolver, TripletMatrix};
use crate::mesh::{pair_periodic_entities, FacePairing, Mesh, Phase};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Materials {
    pub matrix: MaterialParams,
    pub particle: MaterialParams,
}

impl Materials {
    pub fn of(&self, phase: Phase) -> &MaterialParams {
        match phase {
            Phase::Matrix => &self.matrix,
            Phase::Particle => &self.particle,
        }
    }
}

impl Default for Materials {
    fn default() -> Self {
        Self {
            matrix: MaterialParams::matrix(),
            particle: MaterialParams::particle(),
        }
    }
}

/// Macroscopic deformation gradient and induction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Loads {
    pub f_macro: Matrix3<f64>,
    pub b_macro: Vector3<f64>,
}

impl Loads {
    pub fn new(f_macro: Matrix3<f64>, b_macro: Vector3<f64>) -> Self {
        Self { f_macro, b_macro }
    }
}

impl Default for Loads {
    fn default() -> Self {
        Self {
            f_macro: Matrix3::identity(),
            b_macro: Vector3::zeros(),
        }
    }
}

/// Displacement and edge coefficients, followed by the loads they satisfy.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub t: f64,
    pub loads: Loads,
}

impl State {
    pub fn u<'a>(&'a self, problem: &RveProblem) -> &'a [f64] {
        &self.x[..problem.disc.dofs.num_u]
    }

    pub fn a<'a>(&'a self, problem: &RveProblem) -> &'a [f64] {
        &self.x[problem.disc.dofs.num_u..]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
    pub line_search: bool,
    pub backtrack: f64,
    pub max_cuts: usize,
    pub max_halvings: usize,
    pub linear_solver: LinearBackend,
    pub verbose: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_iter: 25,
            line_search: true,
            backtrack: 0.5,
            max_cuts: 8,
            max_halvings: 4,
            linear_solver: LinearBackend::Direct,
            verbose: false,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if !(self.rtol > 0.0) {
            errs.push(format!("rtol must be positive (got {})", self.rtol));
        }
        if !(self.atol > 0.0) {
            errs.push(format!("atol must be positive (got {})", self.atol));
        }
        if self.max_iter == 0 {
            errs.push("max_iter must be at least 1".into());
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            errs.push(format!("backtrack must lie in (0, 1) (got {})", self.backtrack));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub step: usize,
    pub iteration: usize,
    pub residual: f64,
    pub step_length: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
    /// Estimated order of convergence over the last three residuals.
    pub rate: Option<f64>,
    pub failure: Option<String>,
}

/// Residual and tangent over the full DOF vector.
#[derive(Clone, Debug)]
pub struct FullAssembly {
    pub residual: Vec<f64>,
    pub tangent: TripletMatrix,
    /// Derivative of the residual with respect to the macroscopic induction.
    pub residual_b: Vec<[f64; 3]>,
}

/// Residual and tangent of the condensed system.
#[derive(Clone, Debug)]
pub struct ReducedAssembly {
    pub residual: Vec<f64>,
    pub tangent: Option<TripletMatrix>,
    /// Scale against which round-off in the residual is judged: the norm of
    /// the element contributions taken in absolute value, with the nodal
    /// forces of a stress equal to the phase modulus added on the
    /// displacement rows. Near the reference state the stress itself is a
    /// cancellation of terms of that size.
    pub scale: f64,
}

struct CellOutput {
    r: [f64; 36],
    // w |dN| times the phase modulus, per displacement dof.
    modulus_force: [f64; 36],
    k: Option<Box<[[f64; 36]; 36]>>,
    rb: Option<Box<[[f64; 3]; 36]>>,
}

// The three nonzeros of column `c` of d(F, B)/d(local dofs), as (row, value)
// with rows 3i + j for F_ij and 9 + k for B_k.
fn b_columns(g: &PointGeometry) -> [[(usize, f64); 3]; 36] {
    std::array::from_fn(|c| {
        if c < 24 {
            let (a, k) = (c / 3, c % 3);
            std::array::from_fn(|j| (3 * k + j, g.grad[a][j]))
        } else {
            let e = c - 24;
            std::array::from_fn(|k| (IDX_B + k, g.curl[e][k]))
        }
    })
}

fn inverse_transpose(f: &Matrix3<f64>, cell: usize) -> Result<Matrix3<f64>> {
    f.try_inverse()
        .map(|m| m.transpose())
        .ok_or(Error::ElementInversion { cell, det_f: f.determinant() })
}

/// The RVE boundary-value problem on a fixed mesh and material set.
pub struct RveProblem {
    pub disc: Discretization,
    pub materials: Materials,
    pub pairing: FacePairing,
    pub gauge: AnchorGaugeReport,
    base: ConstraintSet,
}

impl RveProblem {
    pub fn new(mesh: Mesh, materials: Materials) -> Result<Self> {
        Self::with_options(mesh, materials, &AnchorGaugeOptions::default())
    }

    pub fn with_options(mesh: Mesh, materials: Materials, opts: &AnchorGaugeOptions) -> Result<Self> {
        let disc = Discretization::new(mesh)?;
        let pairing = pair_periodic_entities(&disc.mesh);
        let mut base = magnetic_periodicity(&pairing, &disc.dofs);
        let (ag, gauge) = anchor_and_gauge(&disc.mesh, &pairing, &disc.dofs, opts)?;
        base.extend(ag);
        Ok(Self {
            disc,
            materials,
            pairing,
            gauge,
            base,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.disc.mesh
    }

    pub fn num_dofs(&self) -> usize {
        self.disc.dofs.total()
    }

    pub fn params(&self, cell: usize) -> &MaterialParams {
        self.materials.of(self.disc.mesh.phase[cell])
    }

    /// All constraints for a macroscopic deformation, resolved.
    pub fn constraints(&self, f_macro: &Matrix3<f64>) -> Result<ConstraintSet> {
        let mut set = mechanical_periodicity(&self.pairing, &self.disc.dofs, f_macro);
        set.extend(self.base.clone());
        set.resolve()
    }

    pub fn condenser(&self, f_macro: &Matrix3<f64>) -> Result<Condenser> {
        Ok(Condenser::new(&self.constraints(f_macro)?, self.num_dofs()))
    }

    pub fn zero_state(&self) -> State {
        State {
            x: vec![0.0; self.num_dofs()],
            t: 0.0,
            loads: Loads::default(),
        }
    }

    /// Affine displacement (F_M - I) X, zero potential.
    pub fn affine_state(&self, loads: &Loads) -> State {
        let mut x = vec![0.0; self.num_dofs()];
        let g = loads.f_macro - Matrix3::identity();
        self.disc.interpolate_u(&mut x, |p| {
            let u = g * Vector3::from(p);
            [u[0], u[1], u[2]]
        });
        State { x, t: 0.0, loads: *loads }
    }

    fn cell_kinematics(
        &self,
        cell: usize,
        x: &[f64],
        b_macro: &Vector3<f64>,
    ) -> Result<(Vec<(Matrix3<f64>, Vector3<f64>, f64)>, f64, f64)> {
        let local = self.disc.local_values(cell, x);
        let mut pts = Vec::with_capacity(self.disc.rule.len());
        let (mut vol, mut jint) = (0.0, 0.0);
        for g in &self.disc.geometry[cell] {
            let (f, b) = fields_at(g, &local, b_macro);
            let j = f.determinant();
            if !(j > 0.0) {
                return Err(Error::ElementInversion { cell, det_f: j });
            }
            vol += g.weight;
            jint += g.weight * j;
            pts.push((f, b, j));
        }
        Ok((pts, jint / vol, vol))
    }

    fn cell_kernel(&self, cell: usize, x: &[f64], b_macro: &Vector3<f64>, tangent: bool) -> Result<CellOutput> {
        let params = self.params(cell);
        let geo = &self.disc.geometry[cell];
        let (pts, jbar, vol) = self.cell_kinematics(cell, x, b_macro)?;

        // d(Jbar)/d(local dofs); only displacement dofs contribute.
        let mut djbar = [0.0; 36];
        for (g, (f, _, j)) in geo.iter().zip(&pts) {
            let cof = inverse_transpose(f, cell)? * *j;
            for a in 0..8 {
                for k in 0..3 {
                    let mut s = 0.0;
                    for jj in 0..3 {
                        s += cof[(k, jj)] * g.grad[a][jj];
                    }
                    djbar[3 * a + k] += g.weight * s / vol;
                }
            }
        }

        let mut r = [0.0; 36];
        let mut k = tangent.then(|| Box::new([[0.0; 36]; 36]));
        let mut rb = tangent.then(|| Box::new([[0.0; 3]; 36]));
        let mut psi_j_int = 0.0;
        let mut psi_jj_int = 0.0;
        let mut cross = [0.0; 36];
        let mut hjb = [0.0; 3];
        let mut modulus_force = [0.0; 36];
        let modulus = params.reference_modulus();

        for (g, (f, b, _)) in geo.iter().zip(&pts) {
            let pk = PointKinematics::new(*f, *b, jbar);
            let bc = b_columns(g);
            let w = g.weight;
            for c in 0..24 {
                modulus_force[c] += w * modulus * bc[c].iter().map(|&(_, v)| v.abs()).sum::<f64>();
            }
            if let Some(k) = k.as_mut() {
                let d = energy_derivatives(&pk, params)?;
                for c in 0..36 {
                    r[c] += w * bc[c].iter().map(|&(row, v)| v * d.grad[row]).sum::<f64>();
                }
                psi_j_int += w * d.grad[IDX_JBAR];
                psi_jj_int += w * d.hess[IDX_JBAR][IDX_JBAR];
                for m in 0..3 {
                    hjb[m] += w * d.hess[IDX_JBAR][IDX_B + m];
                }
                // H B for the 12 point variables against the 36 local dofs.
                let mut hb = [[0.0; 36]; 12];
                for (row, hbr) in hb.iter_mut().enumerate() {
                    for c in 0..36 {
                        hbr[c] = bc[c].iter().map(|&(s, v)| d.hess[row][s] * v).sum();
                    }
                }
                for c1 in 0..36 {
                    let krow = &mut k[c1];
                    for &(row, v) in &bc[c1] {
                        if v == 0.0 {
                            continue;
                        }
                        let hbr = &hb[row];
                        for c2 in 0..36 {
                            krow[c2] += w * v * hbr[c2];
                        }
                    }
                    cross[c1] += w * bc[c1].iter().map(|&(row, v)| v * d.hess[row][IDX_JBAR]).sum::<f64>();
                }
                let rb = rb.as_mut().expect("tangent mode");
                for c in 0..36 {
                    for m in 0..3 {
                        rb[c][m] += w * bc[c].iter().map(|&(row, v)| v * d.hess[row][IDX_B + m]).sum::<f64>();
                    }
                }
            } else {
                let (_, grad) = energy_gradient(&pk, params)?;
                for c in 0..36 {
                    r[c] += w * bc[c].iter().map(|&(row, v)| v * grad[row]).sum::<f64>();
                }
                psi_j_int += w * grad[IDX_JBAR];
            }
        }

        for c in 0..36 {
            r[c] += psi_j_int * djbar[c];
        }

        if let (Some(k), Some(rb)) = (k.as_mut(), rb.as_mut()) {
            for c1 in 0..36 {
                for c2 in 0..36 {
                    k[c1][c2] += cross[c1] * djbar[c2] + djbar[c1] * cross[c2] + psi_jj_int * djbar[c1] * djbar[c2];
                }
                for m in 0..3 {
                    rb[c1][m] += djbar[c1] * hjb[m];
                }
            }
            // Second derivative of Jbar: (1/V) sum_p w_p dF^T (d2 J / dF dF) dF.
            let scale = psi_j_int / vol;
            for (g, (f, _, j)) in geo.iter().zip(&pts) {
                let fit = inverse_transpose(f, cell)?;
                let wj = scale * g.weight * j;
                // d2J/dF_il dF_km = J (Finv^T_il Finv^T_km - Finv^T_im Finv^T_kl)
                let mut gf = [[0.0; 3]; 8];
                for a in 0..8 {
                    for i in 0..3 {
                        gf[a][i] = (0..3).map(|l| fit[(i, l)] * g.grad[a][l]).sum();
                    }
                }
                for a in 0..8 {
                    for b in 0..8 {
                        for i in 0..3 {
                            for kk in 0..3 {
                                let v = gf[a][i] * gf[b][kk] - gf[b][i] * gf[a][kk];
                                k[3 * a + i][3 * b + kk] += wj * v;
                            }
                        }
                    }
                }
            }
        }
        Ok(CellOutput { r, modulus_force, k, rb })
    }

    fn cell_outputs(&self, x: &[f64], loads: &Loads, tangent: bool) -> Result<Vec<CellOutput>> {
        (0..self.disc.mesh.num_cells())
            .into_par_iter()
            .map(|c| self.cell_kernel(c, x, &loads.b_macro, tangent))
            .collect()
    }

    /// Residual, tangent and load sensitivity over the full DOF vector.
    pub fn assemble(&self, x: &[f64], loads: &Loads) -> Result<FullAssembly> {
        let outs = self.cell_outputs(x, loads, true)?;
        let n = self.num_dofs();
        let mut residual = vec![0.0; n];
        let mut residual_b = vec![[0.0; 3]; n];
        let mut tangent = TripletMatrix::with_capacity(n, outs.len() * 1296);
        for (cell, o) in outs.iter().enumerate() {
            let dofs = &self.disc.dofs.cell_dofs[cell];
            let k = o.k.as_ref().expect("tangent mode");
            let rb = o.rb.as_ref().expect("tangent mode");
            for c1 in 0..36 {
                residual[dofs[c1]] += o.r[c1];
                for m in 0..3 {
                    residual_b[dofs[c1]][m] += rb[c1][m];
                }
                for c2 in 0..36 {
                    tangent.push(dofs[c1], dofs[c2], k[c1][c2]);
                }
            }
        }
        Ok(FullAssembly {
            residual,
            tangent,
            residual_b,
        })
    }

    /// Full residual only.
    pub fn residual(&self, x: &[f64], loads: &Loads) -> Result<Vec<f64>> {
        let outs = self.cell_outputs(x, loads, false)?;
        let mut residual = vec![0.0; self.num_dofs()];
        for (cell, o) in outs.iter().enumerate() {
            for (c, &d) in self.disc.dofs.cell_dofs[cell].iter().enumerate() {
                residual[d] += o.r[c];
            }
        }
        Ok(residual)
    }

    /// Condensed residual T^T R and, optionally, tangent T^T K T, mapped
    /// directly from the element contributions.
    pub fn assemble_condensed(
        &self,
        x: &[f64],
        loads: &Loads,
        cond: &Condenser,
        tangent: bool,
    ) -> Result<ReducedAssembly> {
        let outs = self.cell_outputs(x, loads, tangent)?;
        let nr = cond.n_reduced();
        let mut residual = vec![0.0; nr];
        let mut abs = vec![0.0; nr];
        let mut kred = tangent.then(|| TripletMatrix::with_capacity(nr, outs.len() * 1296));
        for (cell, o) in outs.iter().enumerate() {
            let dofs = &self.disc.dofs.cell_dofs[cell];
            let rows: Vec<Vec<(usize, f64)>> = dofs.iter().map(|&d| cond.row(d).collect()).collect();
            for c1 in 0..36 {
                for &(r1, t1) in &rows[c1] {
                    residual[r1] += t1 * o.r[c1];
                    abs[r1] += (t1 * o.r[c1]).abs() + t1.abs() * o.modulus_force[c1];
                }
            }
            if let (Some(kr), Some(k)) = (kred.as_mut(), o.k.as_ref()) {
                for c1 in 0..36 {
                    for &(r1, t1) in &rows[c1] {
                        for c2 in 0..36 {
                            for &(r2, t2) in &rows[c2] {
                                kr.push(r1, r2, t1 * k[c1][c2] * t2);
                            }
                        }
                    }
                }
            }
        }
        Ok(ReducedAssembly {
            residual,
            tangent: kred,
            scale: norm(&abs),
        })
    }

    /// Total potential: the volume integral of the free energy.
    pub fn potential(&self, x: &[f64], loads: &Loads) -> Result<f64> {
        let per_cell: Vec<f64> = (0..self.disc.mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let params = self.params(c);
                let (pts, jbar, _) = self.cell_kinematics(c, x, &loads.b_macro)?;
                let mut s = 0.0;
                for (g, (f, b, _)) in self.disc.geometry[c].iter().zip(&pts) {
                    s += g.weight * energy(&to_array(f), &[b[0], b[1], b[2]], jbar, params)?;
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(per_cell.iter().sum())
    }

    /// Moves a state to new loads: adds the affine displacement increment and
    /// re-imposes the constraints of the new macroscopic deformation.
    pub fn predict(&self, state: &mut State, loads: &Loads, cond: &Condenser) {
        let df = loads.f_macro - state.loads.f_macro;
        if df.iter().any(|v| *v != 0.0) {
            for (v, p) in self.disc.mesh.vertices.iter().enumerate() {
                let du = df * Vector3::from(*p);
                for k in 0..3 {
                    state.x[3 * v + k] += du[k];
                }
            }
        }
        state.x = cond.expand(&cond.restrict(&state.x));
        state.loads = *loads;
    }

    /// Newton iteration on the condensed system from `state`, which is first
    /// moved to `loads`. On failure the state holds the last iterate and the
    /// report carries the reason, so the caller can cut the step.
    pub fn newton_solve(
        &self,
        state: &mut State,
        loads: &Loads,
        settings: &NewtonSettings,
        linear: &mut LinearSolver,
        step: usize,
    ) -> Result<NewtonReport> {
        let cond = self.condenser(&loads.f_macro)?;
        self.predict(state, loads, &cond);
        let mut report = NewtonReport::default();
        let mut r0 = None;
        let mut norms: Vec<f64> = Vec::new();

        let fail = |mut report: NewtonReport, why: String| {
            report.converged = false;
            report.failure = Some(why);
            Ok(report)
        };

        for it in 0..=settings.max_iter {
            let asm = match self.assemble_condensed(&state.x, loads, &cond, true) {
                Ok(a) => a,
                Err(e) => return fail(report, e.to_string()),
            };
            let rn = norm(&asm.residual);
            let r_ref = *r0.get_or_insert(rn);
            norms.push(rn);
            if settings.verbose {
                let alpha = report.log.last().map_or(0.0, |l: &IterationRecord| l.step_length);
                eprintln!("newton,{step},{it},{rn:.6e},{alpha}");
            }
            let floor = 1e-12 * asm.scale;
            if rn <= settings.atol + settings.rtol * r_ref || rn <= floor {
                report.converged = true;
                report.iterations = it;
                report.rate = convergence_rate(&norms);
                report.log.push(IterationRecord {
                    step,
                    iteration: it,
                    residual: rn,
                    step_length: 0.0,
                });
                return Ok(report);
            }
            if it == settings.max_iter {
                report.iterations = it;
                return fail(report, format!("no convergence in {} iterations (|R| = {rn:.3e})", settings.max_iter));
            }
            let rhs: Vec<f64> = asm.residual.iter().map(|v| -v).collect();
            let dy = match linear.solve(asm.tangent.as_ref().expect("tangent requested"), &rhs) {
                Ok(dy) => dy,
                Err(e) => {
                    report.iterations = it;
                    return fail(report, e.to_string());
                }
            };
            let dx = cond.expand_direction(&dy);

            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..=settings.max_cuts {
                let trial: Vec<f64> = state.x.iter().zip(&dx).map(|(x, d)| x + alpha * d).collect();
                let ok = match self.assemble_condensed(&trial, loads, &cond, false) {
                    Ok(t) => !settings.line_search || norm(&t.residual) < rn,
                    Err(_) => false,
                };
                if ok {
                    state.x = trial;
                    accepted = true;
                    break;
                }
                if !settings.line_search {
                    break;
                }
                alpha *= settings.backtrack;
            }
            report.log.push(IterationRecord {
                step,
                iteration: it,
                residual: rn,
                step_length: if accepted { alpha } else { 0.0 },
            });
            if !accepted {
                report.iterations = it + 1;
                // A full step that cannot reduce a residual already many
                // orders below its start has hit the round-off floor.
                if rn <= 1e-6 * r_ref {
                    report.converged = true;
                    report.rate = convergence_rate(&norms);
                    return Ok(report);
                }
                return fail(report, format!("line search failed at iteration {it} (|R| = {rn:.3e})"));
            }
        }
        unreachable!("loop returns on its last iteration")
    }

    /// Convenience: solve the problem for `loads` starting from `state`
    /// with a fresh linear solver.
    pub fn solve(&self, state: &mut State, loads: &Loads, settings: &NewtonSettings) -> Result<NewtonReport> {
        let mut linear = LinearSolver::new(settings.linear_solver);
        self.newton_solve(state, loads, settings, &mut linear, 0)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn convergence_rate(norms: &[f64]) -> Option<f64> {
    let n = norms.len();
    if n < 3 {
        return None;
    }
    let (a, b, c) = (norms[n - 3], norms[n - 2], norms[n - 1]);
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || a == b {
        return None;
    }
    Some((c / b).ln() / (b / a).ln())
}
