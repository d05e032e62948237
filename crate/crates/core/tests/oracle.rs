use approx::assert_relative_eq;
use mae_rve::constitutive::{MaterialParams, MU0};
use mae_rve::oracle::{coefficient_table, coefficients, predicted_strain, rve_scale_coefficients};
use nalgebra::{Matrix3, Vector3};

#[test]
fn particle_coefficients() {
    let c = coefficients(&MaterialParams::particle(), 1.0);
    assert_relative_eq!(c.chi_l, 6.11, max_relative = 5e-3);
    assert_relative_eq!(c.mu_eff, 8.93e-6, max_relative = 5e-3);
    assert_relative_eq!(c.e_lin, 6.0e7, max_relative = 1e-15);
    assert_relative_eq!(c.lambda[2][2][2][2], -1.51e-2, max_relative = 5e-3);
    assert_relative_eq!(c.lambda[0][0][2][2], 7.56e-3, max_relative = 5e-3);
    assert_relative_eq!(c.lambda[1][1][2][2], 7.56e-3, max_relative = 5e-3);
}

#[test]
fn closed_form_of_the_axial_coefficient() {
    let p = MaterialParams::particle();
    let c = coefficients(&p, 1.0);
    let expected = -(1.0 / MU0 + 1.0 / c.mu_eff) / (6.0 * p.c1);
    assert_relative_eq!(c.lambda[2][2][2][2], expected, max_relative = 1e-13);
    assert_relative_eq!(c.lambda[2][2][2][2] / c.lambda[0][0][2][2], -2.0, max_relative = 1e-13);
}

#[test]
fn vacuum_only_coupling() {
    let p = MaterialParams::particle();
    let c = coefficients(&p, 0.0);
    assert_relative_eq!(c.lambda[2][2][2][2], -1.0 / (6.0 * p.c1 * MU0), max_relative = 1e-13);
}

#[test]
fn axial_field_strain() {
    let c = coefficients(&MaterialParams::particle(), 1.0);
    let eps = predicted_strain(&c, &Vector3::new(0.0, 0.0, 0.045));
    assert_relative_eq!(eps[(2, 2)], -3.06e-5, max_relative = 5e-3);
    assert_relative_eq!(eps[(0, 0)], c.lambda[0][0][2][2] * 0.045 * 0.045, max_relative = 1e-14);
    assert_eq!(eps[(0, 1)], 0.0);
    assert!(eps.trace().abs() < 1e-20);
}

#[test]
fn strain_is_trace_free_for_any_direction() {
    let c = coefficients(&MaterialParams::matrix(), 0.0);
    for b in [Vector3::new(0.3, -0.1, 0.2), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 0.5, 0.5)] {
        let eps = predicted_strain(&c, &b);
        assert!(eps.trace().abs() <= 1e-14 * eps.norm());
        assert!((eps - eps.transpose()).norm() == 0.0);
    }
}

#[test]
fn rve_scale_recovers_tabulated_row() {
    let b: f64 = 0.045;
    let lam = [7.8706, 7.8706, -15.3723].map(|v| v * b * b);
    let f = Matrix3::from_diagonal(&Vector3::new(1.0 + lam[0], 1.0 + lam[1], 1.0 + lam[2]));
    let r = rve_scale_coefficients(&f, b);
    assert_relative_eq!(r[0], 7.8706, max_relative = 1e-12);
    assert_relative_eq!(r[1], 7.8706, max_relative = 1e-12);
    assert_relative_eq!(r[2], -15.3723, max_relative = 1e-12);
    assert_eq!(rve_scale_coefficients(&Matrix3::identity(), b), [0.0; 3]);
}

#[test]
fn table_lists_the_coefficients() {
    let t = coefficient_table("particle", &MaterialParams::particle(), 1.0);
    assert!(t.contains("chi_L"));
    assert!(t.contains("Lambda_3333 [1/T^2] = -1.51"));
}
