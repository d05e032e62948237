//! Closed-form small-strain magnetostriction of an isotropic incompressible
//! magnetoactive solid, for the particle and matrix materials.

use mae_rve::constitutive::MaterialParams;
use mae_rve::oracle::{coefficient_table, coefficients, predicted_strain};
use nalgebra::Vector3;

fn main() {
    let particle = MaterialParams::particle();
    print!("{}", coefficient_table("particle", &particle, 1.0));
    print!("{}", coefficient_table("particle, vacuum coupling only", &particle, 0.0));
    print!("{}", coefficient_table("matrix", &MaterialParams::matrix(), 0.0));

    let c = coefficients(&particle, 1.0);
    println!("\nstrain of the particle material under an axial field:");
    println!("{:>8} {:>12} {:>12}", "B [T]", "eps_xx", "eps_zz");
    for b in [0.01, 0.02, 0.045, 0.1] {
        let e = predicted_strain(&c, &Vector3::new(0.0, 0.0, b));
        println!("{b:>8.3} {:>12.4e} {:>12.4e}", e[(0, 0)], e[(2, 2)]);
    }
    let oblique = Vector3::new(1.0, 0.0, 1.0).normalize() * 0.045;
    println!("field at 45 degrees in the xz plane:\n{:.4e}", predicted_strain(&c, &oblique));
}
