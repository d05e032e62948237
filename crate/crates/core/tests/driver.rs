use mae_rve::driver::{
    advance, run_path, stress_relaxed_step, stretch_from, LoadKind, LoadPath, RelaxationSettings, RelaxationState,
};
use mae_rve::linear::LinearSolver;
use mae_rve::mesh::{Inclusion, Mesh};
use mae_rve::solver::{Materials, NewtonSettings, RveProblem};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn inclusion_problem(n: usize) -> RveProblem {
    let mesh = Mesh::build([n; 3], [1.0; 3], vec![Inclusion { center: [0.5; 3], radius: 0.3 }]).unwrap();
    RveProblem::new(mesh, Materials::default()).unwrap()
}

#[test]
fn load_path_end_points() {
    let path = LoadPath::combined(10);
    let l0 = path.loads_at(0.0);
    assert_eq!(l0.f_macro, Matrix3::identity());
    assert_eq!(l0.b_macro, Vector3::zeros());
    let l1 = path.loads_at(1.0);
    assert!((l1.f_macro - Matrix3::from_diagonal(&Vector3::new(1.1, 0.9, 1.0 / 0.99))).norm() < 1e-15);
    assert_eq!(l1.b_macro, Vector3::new(0.0, 0.0, 0.25));
}

#[test]
fn isochoric_ramp_midpoint() {
    let l = LoadPath::mechanical(10).loads_at(0.5);
    assert_eq!(l.f_macro[(0, 0)], 1.05);
    assert_eq!(l.f_macro[(1, 1)], 0.95);
    assert!((l.f_macro.determinant() - 1.0).abs() < 1e-15);
    let u = LoadPath::uniaxial_isochoric_plus_magnetic(1.2, Vector3::z() * 0.1, 4).loads_at(0.5);
    assert!((u.f_macro[(0, 0)] - 1.1).abs() < 1e-15);
    assert_eq!(u.f_macro[(1, 1)], u.f_macro[(2, 2)]);
    assert!((u.f_macro.determinant() - 1.0).abs() < 1e-15);
}

#[test]
fn path_validation() {
    let mut p = LoadPath::stress_relaxed_magnetic(Vector3::z() * 0.05, 0);
    p.relaxed.clear();
    p.stress_tol = -1.0;
    assert_eq!(p.validate().unwrap_err().len(), 3);
    let mut q = LoadPath::mechanical(3);
    q.f_final = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
    q.isochoric_zz = false;
    assert!(q.validate().is_err());
    assert!(LoadPath::combined(10).validate().is_ok());
    assert_eq!(LoadPath::magnetic(1).kind, LoadKind::Magnetic);
}

#[test]
fn stretch_variables_map_to_symmetric_tensor() {
    let u = stretch_from(&[0.01, 0.02, 0.03, 0.004, 0.005, 0.006]);
    let e = Matrix3::new(1.01, 0.006, 0.005, 0.006, 1.02, 0.004, 0.005, 0.004, 1.03);
    assert!((u - e).norm() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn magnetic_ramp_is_linear(t in 0.0f64..=1.0, bz in -1.0f64..1.0) {
        let path = LoadPath::magnetic(10);
        let l = path.loads_at(t);
        prop_assert!((l.b_macro - path.b_final * t).norm() <= 1e-15);
        prop_assert_eq!(l.f_macro, Matrix3::identity());
        let q = LoadPath::stress_relaxed_magnetic(Vector3::z() * bz, 3);
        prop_assert!((q.loads_at(t).b_macro[2] - bz * t).abs() <= 1e-15);
    }

    #[test]
    fn isochoric_paths_keep_unit_determinant(t in 0.0f64..=1.0) {
        for path in [LoadPath::mechanical(5), LoadPath::combined(5)] {
            let f = path.loads_at(t).f_macro;
            prop_assert!((f.determinant() - 1.0).abs() <= 1e-14);
            prop_assert!((f[(0, 0)] - (1.0 + 0.1 * t)).abs() <= 1e-15);
        }
    }
}

#[test]
fn mechanical_path_completes() {
    let p = inclusion_problem(3);
    let out = run_path(&p, &LoadPath::mechanical(5), &NewtonSettings::default(), |_, _, _| Ok(()));
    assert!(out.failure.is_none());
    assert_eq!(out.records.len(), 5);
    for (k, r) in out.records.iter().enumerate() {
        assert!((r.t - (k + 1) as f64 / 5.0).abs() < 1e-15);
        assert!((r.j_avg - 1.0).abs() < 1e-3);
        assert!(r.newton_iters >= 1);
        assert!(r.b_avg.norm() < 1e-15);
    }
    // Tension along x in the stiffer matrix-particle composite.
    assert!(out.records.last().unwrap().sigma_avg[(0, 0)] > 0.0);
}

#[test]
fn magnetic_stress_grows_with_field() {
    let p = inclusion_problem(3);
    let out = run_path(&p, &LoadPath::magnetic(5), &NewtonSettings::default(), |_, _, _| Ok(()));
    let szz: Vec<f64> = out.records.iter().map(|r| r.sigma_avg[(2, 2)]).collect();
    for w in szz.windows(2) {
        assert!(w[1].abs() > w[0].abs());
    }
    // Quadratic in B at small field: doubling B roughly quadruples the stress.
    let ratio = szz[1] / szz[0];
    assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
}

#[test]
fn combined_path_completes_and_reports_steps() {
    let p = inclusion_problem(3);
    let mut seen = Vec::new();
    let out = run_path(&p, &LoadPath::combined(4), &NewtonSettings::default(), |k, s, r| {
        seen.push((k, s.t, r.t));
        Ok(())
    });
    assert!(out.into_result().is_ok());
    assert_eq!(seen.len(), 4);
    for (k, st, rt) in seen {
        assert_eq!(st, rt);
        assert!((st - k as f64 / 4.0).abs() < 1e-15);
    }
}

#[test]
fn failure_in_step_callback_stops_the_path() {
    let p = inclusion_problem(2);
    let out = run_path(&p, &LoadPath::magnetic(3), &NewtonSettings::default(), |k, _, _| {
        if k == 2 {
            Err(mae_rve::Error::Config("stop".into()))
        } else {
            Ok(())
        }
    });
    assert_eq!(out.records.len(), 1);
    assert!(out.failure.is_some());
}

#[test]
fn advance_bisects_a_hard_step() {
    let p = inclusion_problem(3);
    let path = LoadPath::combined(1);
    let mut state = p.zero_state();
    let settings = NewtonSettings {
        max_iter: 3,
        max_halvings: 6,
        ..Default::default()
    };
    let mut lin = LinearSolver::new(settings.linear_solver);
    let mut reports = Vec::new();
    advance(&p, &mut state, |t| path.loads_at(t), (0.0, 1.0), &settings, &mut lin, 1, &mut reports).unwrap();
    assert_eq!(state.t, 1.0);
    assert!(reports.iter().any(|r| !r.converged));
    assert!(reports.last().unwrap().converged);
}

#[test]
fn relaxed_step_without_field_stays_undeformed() {
    let p = inclusion_problem(3);
    let path = LoadPath::stress_relaxed_magnetic(Vector3::zeros(), 1);
    let mut state = p.zero_state();
    let mut relax = RelaxationState::new(&p);
    let out = stress_relaxed_step(
        &p,
        &mut state,
        Vector3::zeros(),
        1.0,
        &RelaxationSettings::from_path(&path),
        &NewtonSettings::default(),
        &mut relax,
        1,
    )
    .unwrap();
    assert!((out.f_macro - Matrix3::identity()).norm() < 1e-12);
    assert!(out.record.sigma_avg.norm() < 1e-6);
}

#[test]
fn relaxed_step_cancels_selected_stress() {
    let p = inclusion_problem(3);
    let b = Vector3::z() * 0.1;
    let path = LoadPath::stress_relaxed_magnetic(b, 1);
    let opts = RelaxationSettings::from_path(&path);
    let mut state = p.zero_state();
    let mut relax = RelaxationState::new(&p);
    let out = stress_relaxed_step(&p, &mut state, b, 1.0, &opts, &NewtonSettings::default(), &mut relax, 1).unwrap();
    assert!(out.residual <= opts.tol);
    assert!(out.record.sigma_avg.norm() <= opts.tol * relax.sigma_ref * 1.0001);
    // Transverse isotropy about the field.
    let f = out.f_macro;
    assert!((f[(0, 0)] - f[(1, 1)]).abs() <= 0.05 * (f[(0, 0)] - 1.0).abs());
    assert!(f[(2, 2)] < 1.0 && f[(0, 0)] > 1.0);
    assert!(out.iterations >= 1);
}
