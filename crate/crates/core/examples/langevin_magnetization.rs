//! Langevin magnetization of the particle phase: the field h(b) obtained by
//! inverting b = mu0 (h + ms L(alpha h)), the magnetization m = b/mu0 - h,
//! and the stored energy w(b), which grows like b^2 / (2 mu_eff) at low field.

use mae_rve::constitutive::{magnetization_energy, solve_langevin_field, MaterialParams, MU0};

fn main() -> mae_rve::Result<()> {
    let p = MaterialParams::particle();
    println!("chi_L = {:.4}, mu_eff = {:.4e} H/m, saturation mu0 ms = {:.4} T", p.chi_l(), p.mu_eff(), MU0 * p.ms_leg);
    println!("{:>8} {:>14} {:>14} {:>14} {:>12}", "b [T]", "h [A/m]", "m [A/m]", "w [J/m^3]", "w / w_lin");
    for b in [1e-4, 1e-3, 0.01, 0.045, 0.1, 0.25, 0.5, 1.0, 2.0] {
        let h = solve_langevin_field(b, &p)?;
        let w = magnetization_energy(b, &p)?;
        let w_lin = b * b / (2.0 * p.mu_eff());
        println!("{b:>8.4} {h:>14.6e} {:>14.6e} {w:>14.6e} {:>12.6}", b / MU0 - h, w / w_lin);
    }
    Ok(())
}
