//! Stresses and tangents of the coupled free energy at one material point,
//! from forward-mode hyper-dual differentiation, next to central
//! differences of the energy.

use mae_rve::constitutive::{total_energy, MaterialParams, PointKinematics};
use mae_rve::derivatives::{energy_derivatives, NVAR};
use nalgebra::{Matrix3, Vector3};

fn main() -> mae_rve::Result<()> {
    let f = Matrix3::new(1.08, 0.02, 0.0, -0.01, 0.95, 0.03, 0.0, 0.01, 0.99);
    let b = Vector3::new(0.0, 0.05, 0.25);
    let pk = PointKinematics::local(f, b);
    for (name, p) in [("matrix", MaterialParams::matrix()), ("particle", MaterialParams::particle())] {
        let d = energy_derivatives(&pk, &p)?;
        println!("== {name}: psi = {:.6e} J/m^3", d.psi);
        println!("P [Pa] ={:.4e}", d.p());
        println!("H [A/m] ={:.4e}", d.h().transpose());
        println!("E = d2psi/dB2 ={:.4e}", d.e());
        println!("dpsi/dJbar = {:.4e}", d.dpsi_djbar());
        let mut worst: f64 = 0.0;
        for v in 0..NVAR {
            let h = if (9..12).contains(&v) { 1e-7 } else { 1e-6 };
            let mut plus = pk;
            let mut minus = pk;
            match v {
                0..=8 => {
                    plus.f[(v / 3, v % 3)] += h;
                    minus.f[(v / 3, v % 3)] -= h;
                }
                9..=11 => {
                    plus.b[v - 9] += h;
                    minus.b[v - 9] -= h;
                }
                _ => {
                    plus.jbar += h;
                    minus.jbar -= h;
                }
            }
            let fd = (total_energy(&plus, &p)? - total_energy(&minus, &p)?) / (2.0 * h);
            worst = worst.max((fd - d.grad[v]).abs() / d.grad[v].abs().max(1.0));
        }
        println!("largest gradient difference against central differences: {worst:.2e}\n");
    }
    Ok(())
}
