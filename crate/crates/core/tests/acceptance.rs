//! Acceptance criteria, one PASS/FAIL line each.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use mae_rve::config::{load_config, RunConfig};
use mae_rve::constitutive::{total_energy, MaterialParams, PointKinematics};
use mae_rve::derivatives::{energy_derivatives, NVAR};
use mae_rve::driver::{run_path, LoadPath};
use mae_rve::homogenization::{effective_magnetostriction, hill_mandel_check, phase_jacobian_average};
use mae_rve::linear::LinearSolver;
use mae_rve::mesh::{Inclusion, Mesh, Phase};
use mae_rve::oracle::coefficients;
use mae_rve::solver::{Loads, Materials, NewtonSettings, RveProblem};
use mae_rve::Result;
use nalgebra::{DVector, Matrix3, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn problem_of(cfg: &RunConfig) -> Result<RveProblem> {
    RveProblem::with_options(cfg.mesh()?, cfg.materials.clone(), &cfg.gauge)
}

fn rel_ok(a: f64, b: f64, tol: f64) -> bool {
    ((a - b) / b).abs() <= tol
}

fn oracle_exactness() -> Result<(bool, String)> {
    let c = coefficients(&MaterialParams::particle(), 1.0);
    let ok = rel_ok(c.chi_l, 6.11, 5e-3)
        && rel_ok(c.mu_eff, 8.93e-6, 5e-3)
        && rel_ok(c.lambda[2][2][2][2], -1.51e-2, 5e-3)
        && rel_ok(c.lambda[0][0][2][2], 7.56e-3, 5e-3)
        && rel_ok(c.lambda[1][1][2][2], 7.56e-3, 5e-3);
    Ok((
        ok,
        format!(
            "chi_L {:.4}, mu_eff {:.4e}, Lambda_3333 {:.4e}, Lambda_1133 {:.4e}",
            c.chi_l,
            c.mu_eff,
            c.lambda[2][2][2][2],
            c.lambda[0][0][2][2]
        ),
    ))
}

fn averaging_identities() -> Result<(bool, String)> {
    let p = RveProblem::new(Mesh::unit_cube(4)?, Materials::default())?;
    let settings = NewtonSettings::default();
    let (mut f_err, mut j_err, mut b_err) = (0f64, 0f64, 0f64);
    let mech = LoadPath::mechanical(10);
    let out = run_path(&p, &mech, &settings, |_, s, r| {
        f_err = f_err.max((r.f_avg - s.loads.f_macro).norm());
        j_err = j_err.max((r.j_avg - 1.0).abs());
        Ok(())
    });
    let mech_ok = out.failure.is_none() && out.records.len() == 10;
    let out = run_path(&p, &LoadPath::magnetic(10), &settings, |_, s, r| {
        b_err = b_err.max((r.b_avg - s.loads.b_macro).norm());
        Ok(())
    });
    let mag_ok = out.failure.is_none() && out.records.len() == 10;
    Ok((
        mech_ok && mag_ok && f_err <= 1e-12 && j_err <= 1e-10 && b_err <= 1e-12,
        format!("max |<F> - F_M| {f_err:.1e}, max |<J> - 1| {j_err:.1e}, max |<B> - B_M| {b_err:.1e}"),
    ))
}

fn random_point(rng: &mut StdRng) -> PointKinematics {
    let f = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.2..0.2) / 3.0);
    let b = Vector3::from_fn(|_, _| rng.random_range(-0.25..0.25) / 3f64.sqrt());
    PointKinematics::new(f, b, f.determinant() * (1.0 + rng.random_range(-0.01..0.01)))
}

fn shift(pk: &PointKinematics, v: usize, s: f64) -> PointKinematics {
    let mut q = *pk;
    match v {
        0..=8 => q.f[(v / 3, v % 3)] += s,
        9..=11 => q.b[v - 9] += s,
        _ => q.jbar += s,
    }
    q
}

fn tangent_consistency() -> Result<(bool, String)> {
    // Point level: gradient against FD of psi, Hessian against FD of the gradient.
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst_point = 0f64;
    for _ in 0..50 {
        let pk = random_point(&mut rng);
        for p in [MaterialParams::matrix(), MaterialParams::particle()] {
            let d = energy_derivatives(&pk, &p)?;
            let gs = d.grad.iter().fold(0f64, |m, g| m.max(g.abs()));
            let hs = d.hess.iter().flatten().fold(0f64, |m, x| m.max(x.abs()));
            for v in 0..NVAR {
                let h = if (9..12).contains(&v) { 1e-7 } else { 1e-6 };
                let fd = (total_energy(&shift(&pk, v, h), &p)? - total_energy(&shift(&pk, v, -h), &p)?) / (2.0 * h);
                worst_point = worst_point.max((fd - d.grad[v]).abs() / d.grad[v].abs().max(1e-3 * gs));
                let gp = energy_derivatives(&shift(&pk, v, h), &p)?.grad;
                let gm = energy_derivatives(&shift(&pk, v, -h), &p)?.grad;
                for u in 0..NVAR {
                    let fd = (gp[u] - gm[u]) / (2.0 * h);
                    worst_point = worst_point.max((fd - d.hess[u][v]).abs() / d.hess[u][v].abs().max(1e-4 * hs));
                }
            }
        }
    }

    // Condensed system on a 2^3 single-inclusion mesh.
    let mesh = Mesh::build([2; 3], [1.0; 3], vec![Inclusion { center: [0.5; 3], radius: 0.3 }])?;
    let p = RveProblem::new(mesh, Materials::default())?;
    let loads = Loads::new(
        Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.03..0.03)),
        Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 0.2),
    );
    let cond = p.condenser(&loads.f_macro)?;
    let mut y = cond.restrict(&p.affine_state(&loads).x);
    for v in y.iter_mut() {
        *v += rng.random_range(-1e-3..1e-3);
    }
    let x = cond.expand(&y);
    let k = p.assemble_condensed(&x, &loads, &cond, true)?.tangent.expect("tangent requested").to_dense();
    let dir = DVector::from_fn(y.len(), |_, _| rng.random_range(-1.0..1.0));
    let h = 1e-7;
    let res = |s: f64| -> Result<DVector<f64>> {
        let ys: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, d)| a + s * d).collect();
        Ok(DVector::from_vec(p.assemble_condensed(&cond.expand(&ys), &loads, &cond, false)?.residual))
    };
    let fd = (res(h)? - res(-h)?) / (2.0 * h);
    let cond_err = (&k * &dir - &fd).norm() / fd.norm();
    Ok((
        worst_point <= 1e-5 && cond_err <= 1e-5,
        format!("point derivatives {worst_point:.1e}, condensed tangent {cond_err:.1e}"),
    ))
}

fn patch_tests() -> Result<(bool, String)> {
    let p = RveProblem::new(Mesh::build([3, 3, 3], [1.0, 1.2, 0.8], vec![])?, Materials::default())?;
    let mut rng = StdRng::seed_from_u64(9);
    let (mut u_rel, mut a_rel) = (0f64, 0f64);
    let mut converged = true;
    for _ in 0..5 {
        let mut f = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.08..0.08));
        if f.determinant() <= 0.0 {
            f = Matrix3::identity();
        }
        let b = Vector3::from_fn(|_, _| rng.random_range(-0.3..0.3));
        let loads = Loads::new(f, b);
        let mut state = p.zero_state();
        converged &= p.solve(&mut state, &loads, &NewtonSettings::default())?.converged;
        let affine = p.affine_state(&loads);
        let inf = |v: &[f64]| v.iter().fold(0f64, |m, x| m.max(x.abs()));
        let du: Vec<f64> = state.u(&p).iter().zip(affine.u(&p)).map(|(a, b)| a - b).collect();
        u_rel = u_rel.max(inf(&du) / inf(affine.u(&p)));
        // Potential fluctuations against |B| times the edge length.
        a_rel = a_rel.max(inf(state.a(&p)) / (b.norm() * 0.4));
    }
    Ok((
        converged && u_rel <= 1e-10 && a_rel <= 1e-10,
        format!("|u~| / |u_affine| {u_rel:.1e}, |a| / (|B| h) {a_rel:.1e}"),
    ))
}

fn hill_mandel() -> Result<(bool, String)> {
    let cfg = load_config(&config("combined.toml"))?;
    let p = problem_of(&cfg)?;
    // First step of the combined path.
    let mut state = p.zero_state();
    let rep = p.solve(&mut state, &cfg.path.loads_at(1.0 / cfg.path.steps as f64), &cfg.newton)?;
    let mut rng = StdRng::seed_from_u64(17);
    let mut lin = LinearSolver::new(cfg.newton.linear_solver);
    let mut worst = 0f64;
    for _ in 0..5 {
        let df = Matrix3::from_fn(|_, _| rng.random_range(-0.01..0.01));
        let db = Vector3::from_fn(|_, _| rng.random_range(-0.01..0.01));
        worst = worst.max(hill_mandel_check(&p, &state, &df, &db, &mut lin)?.normalized_gap);
    }
    Ok((
        rep.converged && worst <= 1e-7,
        format!("first combined step on {:?} cells, worst normalized gap {worst:.1e}", cfg.cells),
    ))
}

fn magnetostriction_signs() -> Result<(bool, String)> {
    let cfg = load_config(&config("stress_relaxed.toml"))?;
    let p = problem_of(&cfg)?;
    let out = run_path(&p, &cfg.path, &cfg.newton, |_, _, _| Ok(()));
    if let Some(e) = out.failure {
        return Ok((false, format!("relaxed ramp failed: {e}")));
    }
    let f = out.records.last().expect("steps ran").f_avg;
    let [lx, ly, lz] = effective_magnetostriction(&f);
    let ratio = lz.abs() / lx;
    let ok = lz < 0.0 && lx > 0.0 && ly > 0.0 && (ratio - 2.0).abs() <= 0.5 && (lx / ly - 1.0).abs() <= 0.05;
    Ok((
        ok,
        format!(
            "{:?} cells, B_z = {} T: lambda = ({lx:.4e}, {ly:.4e}, {lz:.4e}), |lambda_zz| / lambda_xx = {ratio:.3}",
            cfg.cells, cfg.path.b_final[2]
        ),
    ))
}

fn coupled_robustness() -> Result<(bool, String)> {
    let cfg = load_config(&config("combined.toml"))?;
    let p = problem_of(&cfg)?;
    let out = run_path(&p, &cfg.path, &cfg.newton, |_, _, _| Ok(()));
    if let Some(e) = out.failure {
        return Ok((false, format!("combined path failed: {e}")));
    }
    let max_iters = out.reports.iter().map(|r| r.iterations).max().unwrap_or(0);
    let sxx: Vec<f64> = out.records.iter().map(|r| r.sigma_avg[(0, 0)]).collect();
    let changes = sxx.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    Ok((
        out.records.len() == cfg.path.steps && max_iters <= 15 && changes <= 1,
        format!("{} steps, at most {max_iters} Newton iterations per solve, {changes} sign change(s) of sigma_xx", out.records.len()),
    ))
}

fn max_particle_volume_change(cfg: &RunConfig, particle: MaterialParams) -> Result<f64> {
    let materials = Materials { particle, ..cfg.materials.clone() };
    let p = RveProblem::with_options(cfg.mesh()?, materials, &cfg.gauge)?;
    let mut worst = 0f64;
    let out = run_path(&p, &cfg.path, &cfg.newton, |_, s, _| {
        worst = worst.max((phase_jacobian_average(&p, s, Phase::Particle)? - 1.0).abs());
        Ok(())
    });
    match out.failure {
        Some(e) => Err(e),
        None => Ok(worst),
    }
}

fn incompressibility_trend() -> Result<(bool, String)> {
    let cfg = load_config(&config("neo_hookean_particle.toml"))?;
    let e = 5.6e7;
    let soft = max_particle_volume_change(&cfg, MaterialParams::neo_hookean_particle(e, 0.40))?;
    let stiff = max_particle_volume_change(&cfg, MaterialParams::neo_hookean_particle(e, 0.49))?;
    Ok((soft > stiff, format!("max |<J_particle> - 1|: nu 0.40 -> {soft:.3e}, nu 0.49 -> {stiff:.3e}")))
}

fn determinism() -> Result<(bool, String)> {
    let dir = std::env::temp_dir().join(format!("mae-rve-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut same = true;
    let names = ["mechanical_homogeneous.toml", "magnetic.toml"];
    for name in names {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let csv = dir.join(format!("{name}.{k}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_mae-rve"))
                .arg("run")
                .arg(config(name))
                .arg("--output")
                .arg(&csv)
                .stderr(std::process::Stdio::null())
                .status()?;
            if !status.success() {
                return Ok((false, format!("{name} run failed")));
            }
            outputs.push(std::fs::read(&csv)?);
        }
        same &= outputs[0] == outputs[1];
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok((same, format!("two runs each of {}", names.join(", "))))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<(bool, String)>); 9] = [
        ("1 oracle exactness", oracle_exactness),
        ("2 averaging identities", averaging_identities),
        ("3 tangent consistency", tangent_consistency),
        ("4 patch tests", patch_tests),
        ("5 Hill-Mandel", hill_mandel),
        ("6 magnetostriction sign and ratio", magnetostriction_signs),
        ("7 coupled-run robustness", coupled_robustness),
        ("8 incompressibility trend", incompressibility_trend),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t0 = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = t0.elapsed().as_secs_f64();
        println!("{} criterion {name}: {detail} ({secs:.1} s)", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
