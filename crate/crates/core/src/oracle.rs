//! Closed-form small-strain, low-field magnetostriction of a homogeneous
//! magnetizable solid in the incompressible isotropic limit.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::constitutive::{MaterialParams, MechanicalModel};
use crate::derivatives::Tensor4;
use crate::homogenization::effective_magnetostriction;

#[derive(Clone, Debug, PartialEq)]
pub struct SmallStrainCoefficients {
    pub chi_l: f64,
    /// Initial permeability in H/m.
    pub mu_eff: f64,
    /// Young's modulus of the linearized, incompressible solid in Pa.
    pub e_lin: f64,
    /// Magnetoelastic coupling, sigma = C eps - Gamma B B.
    pub gamma: Tensor4,
    /// Magnetostriction, eps = Lambda B B, in 1/T^2.
    pub lambda: Tensor4,
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

fn shear_modulus(p: &MaterialParams) -> f64 {
    match p.model {
        MechanicalModel::Yeoh => 2.0 * p.c1,
        MechanicalModel::NeoHookean => p.mu_nh,
    }
}

/// Compliance of an isotropic incompressible solid with Young's modulus E
/// acting on a symmetric stress: eps = (3 / 2E) dev(sigma).
pub fn incompressible_compliance(e_lin: f64) -> Tensor4 {
    let s = 1.5 / e_lin;
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            std::array::from_fn(|k| {
                std::array::from_fn(|l| {
                    s * (0.5 * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k)) - delta(i, j) * delta(k, l) / 3.0)
                })
            })
        })
    })
}

/// Coefficients for `params` with magnetization weight `eta`.
pub fn coefficients(params: &MaterialParams, eta: f64) -> SmallStrainCoefficients {
    let chi_l = params.chi_l();
    let mu_eff = params.mu_eff();
    let e_lin = 3.0 * shear_modulus(params);
    let c = 1.0 / params.mu0 + eta / mu_eff;
    let gamma: Tensor4 = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            std::array::from_fn(|m| {
                std::array::from_fn(|n| {
                    -0.5 * c * (delta(i, m) * delta(j, n) + delta(i, n) * delta(j, m) - delta(i, j) * delta(m, n))
                })
            })
        })
    });
    let s = incompressible_compliance(e_lin);
    let mut lambda = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for m in 0..3 {
                for n in 0..3 {
                    let mut v = 0.0;
                    for k in 0..3 {
                        for l in 0..3 {
                            v += s[i][j][k][l] * gamma[k][l][m][n];
                        }
                    }
                    lambda[i][j][m][n] = v;
                }
            }
        }
    }
    SmallStrainCoefficients {
        chi_l,
        mu_eff,
        e_lin,
        gamma,
        lambda,
    }
}

/// eps_ij = Lambda_ijmn B_m B_n.
pub fn predicted_strain(coeffs: &SmallStrainCoefficients, b: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let mut v = 0.0;
        for m in 0..3 {
            for n in 0..3 {
                v += coeffs.lambda[i][j][m][n] * b[m] * b[n];
            }
        }
        v
    })
}

/// Effective coefficients lambda_ii / B_final^2 of a relaxed RVE run.
pub fn rve_scale_coefficients(f_avg: &Matrix3<f64>, b_final: f64) -> [f64; 3] {
    effective_magnetostriction(f_avg).map(|l| l / (b_final * b_final))
}

/// Human-readable coefficient table.
pub fn coefficient_table(name: &str, params: &MaterialParams, eta: f64) -> String {
    let c = coefficients(params, eta);
    let mut s = String::new();
    let _ = writeln!(s, "[{name}] eta = {eta}");
    let _ = writeln!(s, "  chi_L          = {:.6}", c.chi_l);
    let _ = writeln!(s, "  mu_eff  [H/m]  = {:.6e}", c.mu_eff);
    let _ = writeln!(s, "  E_lin   [Pa]   = {:.6e}", c.e_lin);
    let _ = writeln!(s, "  Lambda_1133 [1/T^2] = {:.6e}", c.lambda[0][0][2][2]);
    let _ = writeln!(s, "  Lambda_2233 [1/T^2] = {:.6e}", c.lambda[1][1][2][2]);
    let _ = writeln!(s, "  Lambda_3333 [1/T^2] = {:.6e}", c.lambda[2][2][2][2]);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compliance_inverts_deviatoric_stiffness() {
        // 2 G dev(eps) with G = E / 3 must map back to dev(eps).
        let e = 6.0;
        let s = incompressible_compliance(e);
        let eps = Matrix3::new(0.3, 0.1, 0.0, 0.1, -0.1, 0.2, 0.0, 0.2, -0.2);
        let sig = eps * (2.0 * e / 3.0);
        let back = Matrix3::from_fn(|i, j| {
            let mut v = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    v += s[i][j][k][l] * sig[(k, l)];
                }
            }
            v
        });
        assert!((back - eps).norm() < 1e-14);
    }
}
