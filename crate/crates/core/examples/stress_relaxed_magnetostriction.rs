//! Magnetostriction of a stress-free composite: the macroscopic stretch is
//! adjusted each step until the averaged stress vanishes, and the final
//! strains are compared with the small-strain prediction for the particle
//! material alone.
//!
//! `cargo run --release --example stress_relaxed_magnetostriction -- [cells]`

use mae_rve::constitutive::MaterialParams;
use mae_rve::driver::{run_path, LoadPath};
use mae_rve::homogenization::effective_magnetostriction;
use mae_rve::mesh::{Inclusion, Mesh};
use mae_rve::oracle::{coefficients, rve_scale_coefficients};
use mae_rve::solver::{Materials, NewtonSettings, RveProblem};
use nalgebra::Vector3;

fn main() -> mae_rve::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let b = 0.045;
    let mesh = Mesh::build([n; 3], [1.0; 3], vec![Inclusion { center: [0.5; 3], radius: 0.2 }])?;
    let problem = RveProblem::new(mesh, Materials::default())?;
    let path = LoadPath::stress_relaxed_magnetic(Vector3::z() * b, 5);
    let out = run_path(&problem, &path, &NewtonSettings::default(), |k, _, r| {
        let l = effective_magnetostriction(&r.f_avg);
        println!("step {k}: B_z = {:.4} T, lambda = ({:.4e}, {:.4e}, {:.4e}), |sigma| = {:.2e} Pa", r.b_avg[2], l[0], l[1], l[2], r.sigma_avg.norm());
        Ok(())
    });
    let records = out.into_result()?;
    let f = records.last().expect("at least one step").f_avg;
    let rve = rve_scale_coefficients(&f, b);
    let c = coefficients(&MaterialParams::particle(), 1.0);
    println!("RVE coefficients lambda / B^2 [1/T^2]: ({:.4}, {:.4}, {:.4})", rve[0], rve[1], rve[2]);
    println!("ratio zz / xx: {:.3}", rve[2] / rve[0]);
    println!(
        "particle alone, small strain [1/T^2]: Lambda_1133 = {:.4e}, Lambda_3333 = {:.4e}",
        c.lambda[0][0][2][2], c.lambda[2][2][2][2]
    );
    Ok(())
}
