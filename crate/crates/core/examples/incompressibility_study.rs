//! Volume change of a compressible Neo-Hookean particle under an axial
//! field, for Poisson ratios approaching the incompressible limit.
//!
//! `cargo run --release --example incompressibility_study -- [cells]`

use mae_rve::constitutive::MaterialParams;
use mae_rve::driver::{run_path, LoadPath};
use mae_rve::homogenization::phase_jacobian_average;
use mae_rve::mesh::{Inclusion, Mesh, Phase};
use mae_rve::solver::{Materials, NewtonSettings, RveProblem};

fn main() -> mae_rve::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    println!("{:>6} {:>14} {:>14}", "nu", "<J>_p - 1", "<J> - 1");
    for nu in [0.40, 0.45, 0.49] {
        let mesh = Mesh::build([n; 3], [1.0; 3], vec![Inclusion { center: [0.5; 3], radius: 0.3 }])?;
        let materials = Materials {
            particle: MaterialParams::neo_hookean_particle(5.6e7, nu),
            ..Materials::default()
        };
        let problem = RveProblem::new(mesh, materials)?;
        let out = run_path(&problem, &LoadPath::magnetic(5), &NewtonSettings::default(), |_, _, _| Ok(()));
        let state = out.state.clone();
        let records = out.into_result()?;
        let jp = phase_jacobian_average(&problem, &state, Phase::Particle)?;
        println!("{nu:>6.2} {:>14.4e} {:>14.4e}", jp - 1.0, records.last().expect("steps").j_avg - 1.0);
    }
    Ok(())
}
