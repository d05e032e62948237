//! Orchestration behind the command-line tool.

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

use nalgebra::{Matrix3, Vector3};

use crate::config::RunConfig;
use crate::constitutive::{MaterialParams, PointKinematics};
use crate::derivatives::{energy_derivatives, energy_gradient, NVAR};
use crate::driver::{run_path, LoadPath};
use crate::error::{Error, Result};
use crate::homogenization::{average_all, hill_mandel_check, HomogenizedRecord};
use crate::linear::LinearSolver;
use crate::mesh::{Inclusion, Mesh};
use crate::oracle::{coefficient_table, coefficients};
use crate::output::{vtk_step_path, write_csv_file, write_vtk_state};
use crate::solver::{norm, Loads, Materials, NewtonSettings, RveProblem};

#[derive(Debug)]
pub struct RunSummary {
    pub records: Vec<HomogenizedRecord>,
    pub csv: PathBuf,
    pub vtk_files: Vec<PathBuf>,
    /// Set when the path stopped early; the CSV then holds the converged
    /// steps only.
    pub failure: Option<Error>,
}

/// Solves the configured load path and writes the CSV and VTK output.
pub fn run(cfg: &RunConfig, config_text: &str) -> Result<RunSummary> {
    let problem = RveProblem::with_options(cfg.mesh()?, cfg.materials.clone(), &cfg.gauge)?;
    if let Some(from) = problem.gauge.reselected_from {
        eprintln!(
            "note: anchor vertex {from} is a periodic follower; using its leader {}",
            problem.gauge.anchor_vertex
        );
    }
    if let Some(p) = &cfg.output.constraints_dump {
        let set = problem.constraints(&Matrix3::identity())?;
        let mut w = BufWriter::new(fs::File::create(p)?);
        let nu = problem.disc.dofs.num_u;
        set.dump(&mut w, |d| {
            if d < nu {
                format!("u{}[{}]", d / 3, ["x", "y", "z"][d % 3])
            } else {
                format!("a{}", d - nu)
            }
        })?;
    }
    if cfg.output.verbose {
        eprintln!(
            "mesh {:?}, {} cells ({} particle), {} dofs, volume fraction {:.4}",
            cfg.cells,
            problem.mesh().num_cells(),
            problem.mesh().particle_cells(),
            problem.num_dofs(),
            problem.mesh().volume_fraction()
        );
    }
    let mut vtk_files = Vec::new();
    let steps = cfg.path.steps;
    let outcome = run_path(&problem, &cfg.path, &cfg.newton, |k, state, _| {
        if cfg.output.vtk && (k % cfg.output.vtk_stride == 0 || k == steps) {
            let p = vtk_step_path(&cfg.output.vtk_dir, k);
            write_vtk_state(&p, &problem, state)?;
            vtk_files.push(p);
        }
        Ok(())
    });
    write_csv_file(&cfg.output.csv, &outcome.records, config_text)?;
    Ok(RunSummary {
        records: outcome.records,
        csv: cfg.output.csv.clone(),
        vtk_files,
        failure: outcome.failure,
    })
}

/// Small-strain coefficient tables for both phases of a configuration.
pub fn oracle_report(cfg: &RunConfig) -> String {
    let m = &cfg.materials;
    let mut s = coefficient_table("matrix", &m.matrix, m.matrix.eta);
    s.push_str(&coefficient_table("particle", &m.particle, m.particle.eta));
    let b = cfg.path.b_final.norm();
    if b > 0.0 {
        let c = coefficients(&m.particle, m.particle.eta);
        s.push_str(&format!(
            "particle strain along the field at |B| = {b} T: eps_33 = {:.6e}\n",
            c.lambda[2][2][2][2] * b * b
        ));
    }
    s
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Built-in self checks on small problems.
pub fn self_check() -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check("energy gradient vs finite differences", || {
        let f = Matrix3::new(1.05, 0.02, -0.01, 0.01, 0.97, 0.03, -0.02, 0.0, 0.99);
        let b = Vector3::new(0.02, -0.01, 0.2);
        let pk = PointKinematics::new(f, b, 1.01);
        let mut worst: f64 = 0.0;
        for p in [MaterialParams::matrix(), MaterialParams::particle()] {
            let (_, g) = energy_gradient(&pk, &p)?;
            for v in 0..NVAR {
                let h = 1e-6 * if v >= 9 && v < 12 { 0.1 } else { 1.0 };
                let shift = |s: f64| {
                    let mut q = pk;
                    match v {
                        0..=8 => q.f[(v / 3, v % 3)] += s,
                        9..=11 => q.b[v - 9] += s,
                        _ => q.jbar += s,
                    }
                    energy_gradient(&q, &p).map(|r| r.0)
                };
                let fd = (shift(h)? - shift(-h)?) / (2.0 * h);
                worst = worst.max((fd - g[v]).abs() / g[v].abs().max(1.0));
            }
        }
        Ok((worst < 1e-5, format!("max relative error {worst:.2e}")))
    }));

    out.push(check("energy Hessian symmetry", || {
        let pk = PointKinematics::new(Matrix3::new(1.1, 0.0, 0.05, 0.0, 0.9, 0.0, 0.0, 0.02, 1.0), Vector3::new(0.0, 0.1, 0.3), 1.0);
        let d = energy_derivatives(&pk, &MaterialParams::particle())?;
        let mut asym: f64 = 0.0;
        for i in 0..NVAR {
            for j in 0..NVAR {
                asym = asym.max((d.hess[i][j] - d.hess[j][i]).abs());
            }
        }
        Ok((asym == 0.0, format!("max asymmetry {asym:.2e}")))
    }));

    out.push(check("homogeneous mechanical patch test", || {
        let problem = RveProblem::new(Mesh::unit_cube(3)?, Materials::default())?;
        let loads = LoadPath::mechanical(1).loads_at(1.0);
        let mut state = problem.zero_state();
        let rep = problem.solve(&mut state, &loads, &NewtonSettings::default())?;
        let rec = average_all(&problem, &state)?;
        let err = (rec.f_avg - loads.f_macro).norm();
        let jerr = (rec.j_avg - 1.0).abs();
        Ok((
            rep.converged && err < 1e-10 && jerr < 1e-10,
            format!("|F_avg - F_M| = {err:.2e}, |J_avg - 1| = {jerr:.2e}, {} iterations", rep.iterations),
        ))
    }));

    out.push(check("condensed tangent vs finite differences", || {
        let mesh = Mesh::build([2, 2, 2], [1.0; 3], vec![Inclusion { center: [0.5; 3], radius: 0.3 }])?;
        let problem = RveProblem::new(mesh, Materials::default())?;
        let loads = Loads::new(Matrix3::new(1.03, 0.01, 0.0, 0.0, 0.98, 0.0, 0.0, 0.0, 1.0), Vector3::new(0.0, 0.0, 0.2));
        let cond = problem.condenser(&loads.f_macro)?;
        let mut state = problem.affine_state(&loads);
        // A deterministic non-trivial fluctuation.
        let mut y = cond.restrict(&state.x);
        for (i, v) in y.iter_mut().enumerate() {
            *v += 1e-3 * ((i as f64) * 0.7).sin();
        }
        state.x = cond.expand(&y);
        let asm = problem.assemble_condensed(&state.x, &loads, &cond, true)?;
        let k = asm.tangent.expect("tangent requested").to_dense();
        let n = y.len();
        let dir: Vec<f64> = (0..n).map(|i| ((i as f64) * 1.3).cos()).collect();
        let kd = &k * nalgebra::DVector::from_column_slice(&dir);
        let h = 1e-7;
        let shifted = |s: f64| -> Result<Vec<f64>> {
            let ys: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            Ok(problem.assemble_condensed(&cond.expand(&ys), &loads, &cond, false)?.residual)
        };
        let (rp, rm) = (shifted(h)?, shifted(-h)?);
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let diff: Vec<f64> = fd.iter().zip(kd.iter()).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&fd);
        Ok((rel < 1e-5, format!("relative error {rel:.2e}")))
    }));

    out.push(check("macro-homogeneity (Hill-Mandel) after a coupled solve", || {
        let mesh = Mesh::build([3, 3, 3], [1.0; 3], vec![Inclusion { center: [0.5; 3], radius: 0.3 }])?;
        let problem = RveProblem::new(mesh, Materials::default())?;
        let loads = LoadPath::combined(1).loads_at(0.2);
        let mut state = problem.zero_state();
        let rep = problem.solve(&mut state, &loads, &NewtonSettings::default())?;
        let df = Matrix3::new(0.01, 0.002, 0.0, 0.0, -0.005, 0.001, 0.0, 0.0, 0.003);
        let db = Vector3::new(0.001, 0.0, 0.01);
        let mut lin = LinearSolver::new(Default::default());
        let hm = hill_mandel_check(&problem, &state, &df, &db, &mut lin)?;
        Ok((
            rep.converged && hm.normalized_gap < 1e-6,
            format!("normalized gap {:.2e}", hm.normalized_gap),
        ))
    }));

    out.push(check("small-strain coefficients of the particle", || {
        let c = coefficients(&MaterialParams::particle(), 1.0);
        let ok = (c.chi_l - 6.11).abs() <= 0.01
            && (c.mu_eff - 8.93e-6).abs() <= 1e-8
            && (c.lambda[2][2][2][2] / -1.51e-2 - 1.0).abs() < 5e-3;
        Ok((
            ok,
            format!("chi_L = {:.4}, mu_eff = {:.4e}, Lambda_3333 = {:.4e}", c.chi_l, c.mu_eff, c.lambda[2][2][2][2]),
        ))
    }));

    out
}
