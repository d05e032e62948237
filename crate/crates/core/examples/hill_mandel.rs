//! Macro-micro energy consistency: for random load rates at a converged
//! state, the macroscopic power P_M : dF_M + H_M . dB_M must equal the
//! volume average of the microscopic power.

use mae_rve::driver::LoadPath;
use mae_rve::homogenization::hill_mandel_check;
use mae_rve::linear::LinearSolver;
use mae_rve::mesh::{Inclusion, Mesh};
use mae_rve::solver::{Materials, NewtonSettings, RveProblem};
use nalgebra::{Matrix3, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> mae_rve::Result<()> {
    let mesh = Mesh::build([5; 3], [1.0; 3], vec![Inclusion { center: [0.5; 3], radius: 0.3 }])?;
    let problem = RveProblem::new(mesh, Materials::default())?;
    let loads = LoadPath::combined(4).loads_at(0.5);
    let mut state = problem.zero_state();
    let settings = NewtonSettings::default();
    let rep = problem.solve(&mut state, &loads, &settings)?;
    println!("converged in {} Newton iterations", rep.iterations);

    let mut rng = StdRng::seed_from_u64(7);
    let mut linear = LinearSolver::new(settings.linear_solver);
    println!("{:>14} {:>14} {:>10}", "macro", "micro", "rel. gap");
    for _ in 0..6 {
        let df = Matrix3::from_fn(|_, _| rng.random_range(-0.01..0.01));
        let db = Vector3::from_fn(|_, _| rng.random_range(-0.01..0.01));
        let hm = hill_mandel_check(&problem, &state, &df, &db, &mut linear)?;
        println!("{:>14.6e} {:>14.6e} {:>10.2e}", hm.macro_power, hm.micro_power, hm.normalized_gap);
    }
    Ok(())
}
