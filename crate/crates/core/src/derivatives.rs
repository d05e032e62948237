//! Stresses and tangent blocks of the pointwise energy by forward-mode AD.
//!
//! The energy is differentiated with respect to 13 variables: the nine
//! components of F (row-major, index 3i + j), the three components of B, and
//! the element-averaged Jacobian. The last one is an independent argument at
//! the point level; the assembly chains it to the displacement field.

use nalgebra::{Matrix3, Vector3};

use crate::autodiff::{Dual, HyperDual, Scalar};
use crate::constitutive::{energy, MaterialParams, PointKinematics};
use crate::error::{Error, Result};

pub const NVAR: usize = 13;
pub const IDX_B: usize = 9;
pub const IDX_JBAR: usize = 12;

pub type Tensor4 = [[[[f64; 3]; 3]; 3]; 3];
pub type Tensor3 = [[[f64; 3]; 3]; 3];

fn seed<S: Scalar>(pk: &PointKinematics, var: impl Fn(f64, usize) -> S) -> ([[S; 3]; 3], [S; 3], S) {
    let f = std::array::from_fn(|i| std::array::from_fn(|j| var(pk.f[(i, j)], 3 * i + j)));
    let b = std::array::from_fn(|k| var(pk.b[k], IDX_B + k));
    (f, b, var(pk.jbar, IDX_JBAR))
}

/// Value, gradient and Hessian of the energy over the 13 point variables.
#[derive(Clone, Debug)]
pub struct EnergyDerivatives {
    pub psi: f64,
    pub grad: [f64; NVAR],
    pub hess: [[f64; NVAR]; NVAR],
}

impl EnergyDerivatives {
    /// First Piola-Kirchhoff stress at fixed element Jacobian.
    pub fn p(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.grad[3 * i + j])
    }

    /// Referential magnetic field.
    pub fn h(&self) -> Vector3<f64> {
        Vector3::from_fn(|k, _| self.grad[IDX_B + k])
    }

    /// dA_ijkl = d2 psi / dF_ij dF_kl
    pub fn a(&self) -> Tensor4 {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                std::array::from_fn(|k| std::array::from_fn(|l| self.hess[3 * i + j][3 * k + l]))
            })
        })
    }

    /// C_ijk = dP_ij / dB_k
    pub fn c(&self) -> Tensor3 {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| std::array::from_fn(|k| self.hess[3 * i + j][IDX_B + k]))
        })
    }

    /// D_kij = dH_k / dF_ij
    pub fn d(&self) -> Tensor3 {
        std::array::from_fn(|k| {
            std::array::from_fn(|i| std::array::from_fn(|j| self.hess[IDX_B + k][3 * i + j]))
        })
    }

    /// E_kl = dH_k / dB_l
    pub fn e(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|k, l| self.hess[IDX_B + k][IDX_B + l])
    }

    pub fn dpsi_djbar(&self) -> f64 {
        self.grad[IDX_JBAR]
    }
}

fn check_finite(values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::EvaluationFailure)
    }
}

pub fn energy_derivatives(pk: &PointKinematics, params: &MaterialParams) -> Result<EnergyDerivatives> {
    let (f, b, jbar) = seed(pk, HyperDual::<NVAR>::variable);
    let psi = energy(&f, &b, jbar, params)?;
    check_finite(std::iter::once(psi.v).chain(psi.g).chain(psi.h.iter().flatten().copied()))?;
    Ok(EnergyDerivatives {
        psi: psi.v,
        grad: psi.g,
        hess: psi.h,
    })
}

/// Value and gradient only; several times cheaper than [`energy_derivatives`].
pub fn energy_gradient(pk: &PointKinematics, params: &MaterialParams) -> Result<(f64, [f64; NVAR])> {
    let (f, b, jbar) = seed(pk, Dual::<NVAR>::variable);
    let psi = energy(&f, &b, jbar, params)?;
    check_finite(std::iter::once(psi.v).chain(psi.g))?;
    Ok((psi.v, psi.g))
}
