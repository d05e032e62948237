//! Volume averages, the macro-homogeneity check and magnetostriction
//! measures.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::derivatives::{energy_gradient, IDX_B, IDX_JBAR};
use crate::constitutive::PointKinematics;
use crate::error::Result;
use crate::fem::fields_at;
use crate::linear::LinearSolver;
use crate::mesh::Phase;
use crate::solver::{RveProblem, State};

/// Volume-averaged response at one pseudo-time.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogenizedRecord {
    pub t: f64,
    pub f_avg: Matrix3<f64>,
    pub b_avg: Vector3<f64>,
    pub p_avg: Matrix3<f64>,
    pub h_avg: Vector3<f64>,
    pub sigma_avg: Matrix3<f64>,
    pub j_avg: f64,
    pub psi_avg: f64,
    pub newton_iters: usize,
}

/// Stress and field of one quadrature point. The stress includes the
/// element pressure coming from the averaged volumetric term.
#[derive(Clone, Copy, Debug)]
pub struct PointResponse {
    pub weight: f64,
    pub f: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub p: Matrix3<f64>,
    pub h: Vector3<f64>,
    pub psi: f64,
}

impl PointResponse {
    pub fn j(&self) -> f64 {
        self.f.determinant()
    }

    pub fn cauchy(&self) -> Matrix3<f64> {
        self.p * self.f.transpose() / self.j()
    }
}

/// Pointwise response in every quadrature point of a cell.
pub fn cell_response(problem: &RveProblem, cell: usize, state: &State) -> Result<Vec<PointResponse>> {
    let disc = &problem.disc;
    let params = problem.params(cell);
    let local = disc.local_values(cell, &state.x);
    let jbar = disc.cell_average_jacobian(cell, &state.x)?;
    let mut pts = Vec::with_capacity(disc.rule.len());
    let mut vol = 0.0;
    let mut psi_j = 0.0;
    for g in &disc.geometry[cell] {
        let (f, b) = fields_at(g, &local, &state.loads.b_macro);
        let (psi, grad) = energy_gradient(&PointKinematics::new(f, b, jbar), params)?;
        vol += g.weight;
        psi_j += g.weight * grad[IDX_JBAR];
        pts.push(PointResponse {
            weight: g.weight,
            f,
            b,
            p: Matrix3::from_fn(|i, j| grad[3 * i + j]),
            h: Vector3::from_fn(|k, _| grad[IDX_B + k]),
            psi,
        });
    }
    let pbar = psi_j / vol;
    for pt in &mut pts {
        let cof = pt.f.try_inverse().expect("positive Jacobian").transpose() * pt.j();
        pt.p += cof * pbar;
    }
    Ok(pts)
}

#[derive(Clone, Copy, Default)]
struct Sums {
    vol: f64,
    f: Matrix3<f64>,
    b: Vector3<f64>,
    p: Matrix3<f64>,
    h: Vector3<f64>,
    sigma: Matrix3<f64>,
    j: f64,
    psi: f64,
}

fn cell_sums(problem: &RveProblem, cell: usize, state: &State) -> Result<Sums> {
    let mut s = Sums::default();
    for pt in cell_response(problem, cell, state)? {
        let w = pt.weight;
        s.vol += w;
        s.f += pt.f * w;
        s.b += pt.b * w;
        s.p += pt.p * w;
        s.h += pt.h * w;
        s.sigma += pt.cauchy() * w;
        s.j += pt.j() * w;
        s.psi += pt.psi * w;
    }
    Ok(s)
}

/// Volume averages over the reference RVE. Cells are evaluated in parallel
/// and summed in cell order, so the result does not depend on scheduling.
pub fn average_all(problem: &RveProblem, state: &State) -> Result<HomogenizedRecord> {
    let sums: Vec<Sums> = (0..problem.mesh().num_cells())
        .into_par_iter()
        .map(|c| cell_sums(problem, c, state))
        .collect::<Result<_>>()?;
    let mut tot = Sums::default();
    for s in &sums {
        tot.vol += s.vol;
        tot.f += s.f;
        tot.b += s.b;
        tot.p += s.p;
        tot.h += s.h;
        tot.sigma += s.sigma;
        tot.j += s.j;
        tot.psi += s.psi;
    }
    let v = tot.vol;
    Ok(HomogenizedRecord {
        t: state.t,
        f_avg: tot.f / v,
        b_avg: tot.b / v,
        p_avg: tot.p / v,
        h_avg: tot.h / v,
        sigma_avg: tot.sigma / v,
        j_avg: tot.j / v,
        psi_avg: tot.psi / v,
        newton_iters: 0,
    })
}

/// Average of det F over the cells of one phase.
pub fn phase_jacobian_average(problem: &RveProblem, state: &State, phase: Phase) -> Result<f64> {
    let (mut vol, mut j) = (0.0, 0.0);
    for c in 0..problem.mesh().num_cells() {
        if problem.mesh().phase[c] != phase {
            continue;
        }
        let local = problem.disc.local_values(c, &state.x);
        for g in &problem.disc.geometry[c] {
            let (f, _) = fields_at(g, &local, &state.loads.b_macro);
            vol += g.weight;
            j += g.weight * f.determinant();
        }
    }
    Ok(if vol > 0.0 { j / vol } else { f64::NAN })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HillMandel {
    /// P_avg : dF_M + H_avg . dB_M
    pub macro_power: f64,
    /// < P : dF + H . dB >
    pub micro_power: f64,
    pub gap: f64,
    /// Gap divided by < |P : dF| + |H . dB| >.
    pub normalized_gap: f64,
}

/// Compares macroscopic and averaged microscopic power for the load rates
/// (dF_M, dB_M). The microscopic rates include the fluctuation sensitivity
/// from one linearized solve at the converged state.
pub fn hill_mandel_check(
    problem: &RveProblem,
    state: &State,
    df_macro: &Matrix3<f64>,
    db_macro: &Vector3<f64>,
    linear: &mut LinearSolver,
) -> Result<HillMandel> {
    let cond = problem.condenser(&state.loads.f_macro)?;
    let asm = problem.assemble(&state.x, &state.loads)?;
    // Offsets of the constraints are linear in F_M - I, so those of
    // I + dF_M are the offset rates.
    let rate_cond = problem.condenser(&(Matrix3::identity() + df_macro))?;
    let dg = rate_cond.offsets().to_vec();
    let kdg = asm.tangent.mul_vec(&dg);
    let forcing: Vec<f64> = kdg
        .iter()
        .zip(&asm.residual_b)
        .map(|(k, rb)| -(k + rb[0] * db_macro[0] + rb[1] * db_macro[1] + rb[2] * db_macro[2]))
        .collect();
    let rhs = cond.condense_vector(&forcing);
    let kred = cond.condense_matrix(&asm.tangent);
    let dy = linear.solve(&kred, &rhs)?;
    let mut dx = cond.expand_direction(&dy);
    for (d, g) in dx.iter_mut().zip(&dg) {
        *d += g;
    }

    let rec = average_all(problem, state)?;
    let macro_power = rec.p_avg.component_mul(df_macro).sum() + rec.h_avg.dot(db_macro);

    let per_cell: Vec<(f64, f64, f64)> = (0..problem.mesh().num_cells())
        .into_par_iter()
        .map(|c| {
            let pts = cell_response(problem, c, state)?;
            let dlocal = problem.disc.local_values(c, &dx);
            let (mut vol, mut pow, mut abs) = (0.0, 0.0, 0.0);
            for (g, pt) in problem.disc.geometry[c].iter().zip(&pts) {
                let (fd, bd) = fields_at(g, &dlocal, db_macro);
                let df = fd - Matrix3::identity();
                let pm = pt.p.component_mul(&df).sum();
                let hm = pt.h.dot(&bd);
                vol += g.weight;
                pow += g.weight * (pm + hm);
                abs += g.weight * (pm.abs() + hm.abs());
            }
            Ok((vol, pow, abs))
        })
        .collect::<Result<_>>()?;
    let (mut vol, mut pow, mut abs) = (0.0, 0.0, 0.0);
    for (v, p, a) in per_cell {
        vol += v;
        pow += p;
        abs += a;
    }
    let micro_power = pow / vol;
    let gap = (macro_power - micro_power).abs();
    let scale = abs / vol;
    Ok(HillMandel {
        macro_power,
        micro_power,
        gap,
        normalized_gap: if scale > 0.0 { gap / scale } else { gap },
    })
}

/// Normal magnetostrictive strains F_ii - 1.
pub fn effective_magnetostriction(f_avg: &Matrix3<f64>) -> [f64; 3] {
    [f_avg[(0, 0)] - 1.0, f_avg[(1, 1)] - 1.0, f_avg[(2, 2)] - 1.0]
}

/// Stretch minus one along a unit direction: sqrt(N . C N) - 1.
pub fn magnetostriction_along(f_avg: &Matrix3<f64>, n: &Vector3<f64>) -> f64 {
    let c = f_avg.transpose() * f_avg;
    n.dot(&(c * n)).sqrt() - 1.0
}
