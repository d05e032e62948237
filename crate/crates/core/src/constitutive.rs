//! Pointwise free energy of the magneto-active elastomer.
//!
//! The referential energy density is the sum of a mechanical part (Yeoh with
//! an element-averaged volumetric term, or a compressible Neo-Hookean law for
//! stiff inclusions), the energy stored in free space and, in magnetizable
//! phases, a Langevin saturation law entering through its Legendre dual.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;
use crate::error::{Error, Result};

/// Vacuum permeability used throughout (H/m).
pub const MU0: f64 = 1.2564e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanicalModel {
    Yeoh,
    NeoHookean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub model: MechanicalModel,
    /// Bulk modulus of the Yeoh volumetric term (Pa).
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub mu0: f64,
    /// Saturation magnetization (A/m).
    pub ms_leg: f64,
    /// Langevin parameter (m/A).
    pub alpha_leg: f64,
    /// 1 for magnetizable phases, 0 otherwise.
    pub eta: f64,
    pub mu_nh: f64,
    pub kappa_nh: f64,
}

impl MaterialParams {
    /// Elastomer matrix: soft, nearly incompressible, non-magnetic.
    pub fn matrix() -> Self {
        Self {
            model: MechanicalModel::Yeoh,
            k: 1.25e6,
            c1: 1.2595e4,
            c2: 70.244,
            c3: 9.8177,
            mu0: MU0,
            ms_leg: 8.41e5,
            alpha_leg: 2.18e-5,
            eta: 0.0,
            mu_nh: 0.0,
            kappa_nh: 0.0,
        }
    }

    /// Magnetizable particle with the stiff Yeoh law.
    pub fn particle() -> Self {
        Self {
            k: 2.5e8,
            c1: 1.0e7,
            c2: 0.0,
            c3: 0.0,
            eta: 1.0,
            ..Self::matrix()
        }
    }

    /// Magnetizable particle with a compressible Neo-Hookean law built from
    /// Young's modulus and Poisson's ratio.
    pub fn neo_hookean_particle(young: f64, poisson: f64) -> Self {
        Self {
            model: MechanicalModel::NeoHookean,
            mu_nh: young / (2.0 * (1.0 + poisson)),
            kappa_nh: young / (3.0 * (1.0 - 2.0 * poisson)),
            ..Self::particle()
        }
    }

    /// Stress scale of the mechanical law: C1, or mu/2 for Neo-Hookean.
    pub fn reference_modulus(&self) -> f64 {
        match self.model {
            MechanicalModel::Yeoh => self.c1,
            MechanicalModel::NeoHookean => 0.5 * self.mu_nh,
        }
    }

    pub fn chi_l(&self) -> f64 {
        self.ms_leg * self.alpha_leg / 3.0
    }

    /// Initial (low-field) permeability of the magnetizable phase.
    pub fn mu_eff(&self) -> f64 {
        self.mu0 * (1.0 + self.chi_l())
    }

    pub fn is_magnetic(&self) -> bool {
        self.eta != 0.0
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be positive (got {v})"));
            }
        };
        positive("mu0", self.mu0);
        positive("alpha_leg", self.alpha_leg);
        match self.model {
            MechanicalModel::Yeoh => {
                positive("k", self.k);
                positive("c1", self.c1);
            }
            MechanicalModel::NeoHookean => {
                positive("mu_nh", self.mu_nh);
                positive("kappa_nh", self.kappa_nh);
            }
        }
        if !(self.ms_leg >= 0.0) {
            errs.push(format!("ms_leg must be non-negative (got {})", self.ms_leg));
        }
        if self.eta != 0.0 && self.eta != 1.0 {
            errs.push(format!("eta must be 0 or 1 (got {})", self.eta));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Deformation gradient, referential induction and the element-averaged
/// Jacobian seen by one quadrature point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointKinematics {
    pub f: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub jbar: f64,
}

impl PointKinematics {
    pub fn new(f: Matrix3<f64>, b: Vector3<f64>, jbar: f64) -> Self {
        Self { f, b, jbar }
    }

    /// Kinematics with the element average equal to the pointwise Jacobian.
    pub fn local(f: Matrix3<f64>, b: Vector3<f64>) -> Self {
        Self {
            f,
            b,
            jbar: f.determinant(),
        }
    }
}

pub(crate) fn det3<S: Scalar>(f: &[[S; 3]; 3]) -> S {
    f[0][0] * (f[1][1] * f[2][2] - f[1][2] * f[2][1]) - f[0][1] * (f[1][0] * f[2][2] - f[1][2] * f[2][0])
        + f[0][2] * (f[1][0] * f[2][1] - f[1][1] * f[2][0])
}

fn check_kinematics(j: f64, jbar: f64) -> Result<()> {
    if !(j > 0.0) {
        return Err(Error::InvalidKinematics(format!("det F = {j:e} is not positive")));
    }
    if !(jbar > 0.0) {
        return Err(Error::InvalidKinematics(format!("element Jacobian {jbar:e} is not positive")));
    }
    Ok(())
}

/// Rescales `F` so that its determinant equals the element average and
/// returns the rescaled gradient with the trace of its right Cauchy-Green
/// tensor.
pub fn jbar_split<S: Scalar>(f: &[[S; 3]; 3], jbar: S) -> Result<([[S; 3]; 3], S)> {
    let j = det3(f);
    check_kinematics(j.value(), jbar.value())?;
    let s = (jbar / j).cbrt();
    let mut fbar = *f;
    let mut i1 = S::constant(0.0);
    for row in &mut fbar {
        for v in row.iter_mut() {
            *v *= s;
            i1 += *v * *v;
        }
    }
    Ok((fbar, i1))
}

/// Convenience wrapper of [`jbar_split`] on nalgebra types.
pub fn jbar_split_matrix(f: &Matrix3<f64>, jbar: f64) -> Result<(Matrix3<f64>, f64)> {
    let (fbar, i1) = jbar_split(&to_array(f), jbar)?;
    Ok((Matrix3::from_fn(|i, j| fbar[i][j]), i1))
}

pub(crate) fn to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]]
}

// Below this argument the Langevin-type functions are evaluated from their
// Taylor series; the closed forms lose digits to cancellation there.
const SERIES_CUTOFF: f64 = 0.1;

/// Langevin function coth(x) - 1/x.
pub fn langevin(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        x * (1.0 / 3.0
            + x2 * (-1.0 / 45.0
                + x2 * (2.0 / 945.0
                    + x2 * (-1.0 / 4725.0 + x2 * (2.0 / 93555.0 - x2 * 1382.0 / 638512875.0)))))
    } else {
        1.0 / x.tanh() - 1.0 / x
    }
}

/// Derivative of the Langevin function, 1/x^2 - 1/sinh^2(x).
pub fn langevin_prime(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 / 3.0
            + x2 * (-1.0 / 15.0
                + x2 * (2.0 / 189.0
                    + x2 * (-1.0 / 675.0 + x2 * (2.0 / 10395.0 - x2 * 1382.0 / 58046625.0))))
    } else if x > 40.0 {
        1.0 / (x * x)
    } else {
        let s = x.sinh();
        1.0 / (x * x) - 1.0 / (s * s)
    }
}

/// ln(sinh(x)/x), the integral of the Langevin function.
pub fn log_sinhc(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        x2 * (1.0 / 6.0
            + x2 * (-1.0 / 180.0
                + x2 * (1.0 / 2835.0 + x2 * (-1.0 / 37800.0 + x2 * (1.0 / 467775.0)))))
    } else if x > 20.0 {
        x - (2.0 * x).ln()
    } else {
        (x.sinh() / x).ln()
    }
}

const LANGEVIN_RTOL: f64 = 1e-12;
const LANGEVIN_ATOL: f64 = 1e-14;
const LANGEVIN_MAX_ITER: usize = 100;

fn langevin_residual(h: f64, b: f64, p: &MaterialParams) -> f64 {
    p.mu0 * (h + p.ms_leg * langevin(p.alpha_leg * h)) - b
}

/// Field magnitude `h` with mu0 (h + ms L(alpha h)) = b.
///
/// The left side is increasing and concave in `h`, so Newton started from the
/// low-field estimate b / mu_eff approaches the root monotonically from below;
/// bisection on [b/mu_eff, b/mu0] takes over if an iterate ever leaves the
/// bracket.
pub fn solve_langevin_field(b: f64, p: &MaterialParams) -> Result<f64> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::InvalidKinematics(format!("field magnitude {b} is not a non-negative number")));
    }
    if b == 0.0 {
        return Ok(0.0);
    }
    let tol = LANGEVIN_RTOL * b + LANGEVIN_ATOL;
    let (mut lo, mut hi) = (b / p.mu_eff(), b / p.mu0);
    let mut h = lo;
    for _ in 0..LANGEVIN_MAX_ITER {
        let r = langevin_residual(h, b, p);
        if r.abs() <= tol {
            return Ok(h);
        }
        if r < 0.0 {
            lo = lo.max(h);
        } else {
            hi = hi.min(h);
        }
        let dr = p.mu0 * (1.0 + p.ms_leg * p.alpha_leg * langevin_prime(p.alpha_leg * h));
        let newton = h - r / dr;
        h = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            return Ok(h);
        }
    }
    Err(Error::LangevinSolve {
        b,
        iterations: LANGEVIN_MAX_ITER,
    })
}

/// dh/db at a converged field, from the implicit function theorem.
pub fn langevin_field_derivative(h: f64, p: &MaterialParams) -> f64 {
    1.0 / (p.mu0 * (1.0 + p.ms_leg * p.alpha_leg * langevin_prime(p.alpha_leg * h)))
}

/// Legendre dual of the Langevin co-energy, W*(h).
fn langevin_coenergy(h: f64, p: &MaterialParams) -> f64 {
    p.mu0 * p.ms_leg / p.alpha_leg * log_sinhc(p.alpha_leg * h)
}

/// Magnetization energy per current volume, w(b) = b h - mu0 h^2 / 2 - W*(h).
pub fn magnetization_energy(b: f64, p: &MaterialParams) -> Result<f64> {
    let h = solve_langevin_field(b, p)?;
    Ok(b * h - 0.5 * p.mu0 * h * h - langevin_coenergy(h, p))
}

// Low-field expansion h = b/mu_eff + k3 b^3 + k5 b^5 of the inverted law.
fn low_field_coefficients(p: &MaterialParams) -> (f64, f64, f64) {
    let am = p.alpha_leg * p.ms_leg;
    let d = am + 3.0;
    let k1 = 3.0 / (p.mu0 * d);
    let k3 = 9.0 * p.alpha_leg.powi(3) * p.ms_leg / (5.0 * p.mu0.powi(3) * d.powi(4));
    let k5 = 27.0 * p.alpha_leg.powi(5) * p.ms_leg * (11.0 * am - 30.0) / (175.0 * p.mu0.powi(5) * d.powi(7));
    (k1, k3, k5)
}

// Argument alpha*h below which the magnetization energy is evaluated from the
// low-field series in s = b^2.
const LOW_FIELD_X: f64 = 1e-3;

/// Magnetization energy as a function of s = b^2 with its first two
/// derivatives in s. Working in s keeps everything smooth at b = 0.
pub fn magnetization_energy_in_s(s: f64, p: &MaterialParams) -> Result<(f64, f64, f64)> {
    let (k1, k3, k5) = low_field_coefficients(p);
    let b = s.max(0.0).sqrt();
    if p.alpha_leg * k1 * b < LOW_FIELD_X {
        // Integrating h db term by term gives w in closed form.
        let w = s * (0.5 * k1 + s * (0.25 * k3 + s * k5 / 6.0));
        let dw = 0.5 * k1 + s * (0.5 * k3 + s * 0.5 * k5);
        let d2w = 0.5 * k3 + s * k5;
        return Ok((w, dw, d2w));
    }
    let h = solve_langevin_field(b, p)?;
    let dh = langevin_field_derivative(h, p);
    let w = b * h - 0.5 * p.mu0 * h * h - langevin_coenergy(h, p);
    let dw = h / (2.0 * b);
    let d2w = (dh * b - h) / (4.0 * b * b * b);
    Ok((w, dw, d2w))
}

/// Total referential free energy density, generic over the scalar type so
/// that the same expression yields values, gradients and Hessians.
pub fn energy<S: Scalar>(f: &[[S; 3]; 3], b: &[S; 3], jbar: S, p: &MaterialParams) -> Result<S> {
    let j = det3(f);
    check_kinematics(j.value(), jbar.value())?;

    let mech = match p.model {
        MechanicalModel::Yeoh => {
            let (_, i1bar) = jbar_split(f, jbar)?;
            // Isochoric invariant: tr(Fbar^T Fbar) with the volumetric part of
            // Fbar divided out, so the reference state carries no pressure.
            let xi = i1bar * jbar.powf(-2.0 / 3.0) - 3.0;
            let dj = jbar - 1.0;
            dj * dj * (0.5 * p.k) + xi * (xi * (xi * p.c3 + p.c2) + p.c1)
        }
        MechanicalModel::NeoHookean => {
            let mut trc = S::constant(0.0);
            for row in f {
                for &v in row {
                    trc += v * v;
                }
            }
            let lnj = j.ln();
            (trc * j.powf(-2.0 / 3.0) - 3.0) * (0.5 * p.mu_nh) + lnj * lnj * (0.5 * p.kappa_nh)
        }
    };

    let mut fb = [S::constant(0.0); 3];
    for (i, fbi) in fb.iter_mut().enumerate() {
        *fbi = f[i][0] * b[0] + f[i][1] * b[1] + f[i][2] * b[2];
    }
    let q = fb[0] * fb[0] + fb[1] * fb[1] + fb[2] * fb[2];
    let mut psi = mech + q / (j * (2.0 * p.mu0));

    if p.is_magnetic() {
        let s = q / (j * j);
        let (w, dw, d2w) = magnetization_energy_in_s(s.value(), p)?;
        psi += j * s.chain(w, dw, d2w) * p.eta;
    }
    Ok(psi)
}

/// Total energy at a quadrature point.
pub fn total_energy(pk: &PointKinematics, p: &MaterialParams) -> Result<f64> {
    let b = [pk.b[0], pk.b[1], pk.b[2]];
    energy(&to_array(&pk.f), &b, pk.jbar, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn langevin_series_and_closed_form_agree_at_the_cutoff() {
        // Just inside the series branch, compared with the closed forms at
        // the same argument.
        let x = SERIES_CUTOFF * (1.0 - 1e-12);
        let s = x.sinh();
        assert!((langevin(x) - (1.0 / x.tanh() - 1.0 / x)).abs() < 1e-13);
        assert!((langevin_prime(x) - (1.0 / (x * x) - 1.0 / (s * s))).abs() < 1e-12);
        assert!((log_sinhc(x) - (s / x).ln()).abs() < 1e-15);
    }

    #[test]
    fn low_field_series_matches_exact_branch_at_switch() {
        let p = MaterialParams::particle();
        let b = LOW_FIELD_X / (p.alpha_leg / p.mu_eff());
        let lo = magnetization_energy_in_s((b * (1.0 - 1e-9)).powi(2), &p).unwrap();
        let hi = magnetization_energy_in_s((b * (1.0 + 1e-9)).powi(2), &p).unwrap();
        assert!((lo.0 - hi.0).abs() < 1e-7 * hi.0);
        assert!((lo.1 - hi.1).abs() < 1e-7 * hi.1);
        assert!((lo.2 - hi.2).abs() < 1e-4 * hi.2.abs());
    }

    #[test]
    fn large_field_inversion_converges() {
        let p = MaterialParams::particle();
        for &b in &[2.0, 5.0, 10.0] {
            let h = solve_langevin_field(b, &p).unwrap();
            assert!(langevin_residual(h, b, &p).abs() <= 1e-12 * b + 1e-14);
        }
    }
}
