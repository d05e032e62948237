//! Forward-mode automatic differentiation.
//!
//! Energies are written once, generically over [`Scalar`], and evaluated with
//! `f64` (value only), [`Dual`] (value and gradient) or [`HyperDual`] (value,
//! gradient and dense Hessian). Non-algebraic functions enter through
//! [`Scalar::chain`], which takes the value and first two derivatives of the
//! outer function, so an implicitly defined function (such as an inverted
//! Langevin law) can be differentiated at its converged value instead of by
//! differentiating the iteration that produced it.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn constant(v: f64) -> Self;

    fn value(&self) -> f64;

    /// Composes `self` with a scalar function whose value and first two
    /// derivatives at `self.value()` are `f`, `df` and `d2f`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self;

    fn sqrt(self) -> Self {
        let s = self.value().sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    fn ln(self) -> Self {
        let v = self.value();
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    fn powf(self, p: f64) -> Self {
        let v = self.value();
        let f = v.powf(p);
        self.chain(f, p * f / v, p * (p - 1.0) * f / (v * v))
    }

    fn cbrt(self) -> Self {
        let v = self.value();
        let c = v.cbrt();
        self.chain(c, c / (3.0 * v), -2.0 * c / (9.0 * v * v))
    }

    fn recip(self) -> Self {
        let v = self.value();
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn chain(self, f: f64, _df: f64, _d2f: f64) -> Self {
        f
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }

    fn cbrt(self) -> Self {
        f64::cbrt(self)
    }

    fn recip(self) -> Self {
        1.0 / self
    }
}

/// First-order dual number carrying a gradient over `N` variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn variable(v: f64, index: usize) -> Self {
        let mut g = [0.0; N];
        g[index] = 1.0;
        Self { v, g }
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn constant(v: f64) -> Self {
        Self { v, g: [0.0; N] }
    }

    fn value(&self) -> f64 {
        self.v
    }

    fn chain(self, f: f64, df: f64, _d2f: f64) -> Self {
        let mut g = self.g;
        for gi in &mut g {
            *gi *= df;
        }
        Self { v: f, g }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    fn add_assign(&mut self, rhs: Self) {
        self.v += rhs.v;
        for i in 0..N {
            self.g[i] += rhs.g[i];
        }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const N: usize> SubAssign for Dual<N> {
    fn sub_assign(&mut self, rhs: Self) {
        self.v -= rhs.v;
        for i in 0..N {
            self.g[i] -= rhs.g[i];
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut g = [0.0; N];
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = self.v * rhs.g[i] + rhs.v * self.g[i];
        }
        Self { v: self.v * rhs.v, g }
    }
}

impl<const N: usize> MulAssign for Dual<N> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let v = self.v * inv;
        let mut g = [0.0; N];
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = (self.g[i] - v * rhs.g[i]) * inv;
        }
        Self { v, g }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.v *= rhs;
        for gi in &mut self.g {
            *gi *= rhs;
        }
        self
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

/// Second-order dual number: value, gradient and symmetric Hessian over `N`
/// variables.
///
/// Only the upper triangle is computed by each operation and then mirrored,
/// so the Hessian is exactly symmetric after any sequence of operations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperDual<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> HyperDual<N> {
    pub fn variable(v: f64, index: usize) -> Self {
        let mut out = Self::constant(v);
        out.g[index] = 1.0;
        out
    }

    fn mirror(&mut self) {
        for i in 0..N {
            for j in 0..i {
                self.h[i][j] = self.h[j][i];
            }
        }
    }
}

impl<const N: usize> Scalar for HyperDual<N> {
    fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; N],
            h: [[0.0; N]; N],
        }
    }

    fn value(&self) -> f64 {
        self.v
    }

    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.g[i] = df * self.g[i];
            let gi = d2f * self.g[i];
            for j in i..N {
                out.h[i][j] = df * self.h[i][j] + gi * self.g[j];
            }
        }
        out.mirror();
        out
    }
}

impl<const N: usize> Add for HyperDual<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for HyperDual<N> {
    fn add_assign(&mut self, rhs: Self) {
        self.v += rhs.v;
        for i in 0..N {
            self.g[i] += rhs.g[i];
            for j in 0..N {
                self.h[i][j] += rhs.h[i][j];
            }
        }
    }
}

impl<const N: usize> Sub for HyperDual<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const N: usize> SubAssign for HyperDual<N> {
    fn sub_assign(&mut self, rhs: Self) {
        self.v -= rhs.v;
        for i in 0..N {
            self.g[i] -= rhs.g[i];
            for j in 0..N {
                self.h[i][j] -= rhs.h[i][j];
            }
        }
    }
}

impl<const N: usize> Mul for HyperDual<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self, &rhs);
        let mut out = Self::constant(a.v * b.v);
        for i in 0..N {
            out.g[i] = a.v * b.g[i] + b.v * a.g[i];
            for j in i..N {
                out.h[i][j] =
                    a.v * b.h[i][j] + b.v * a.h[i][j] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
            }
        }
        out.mirror();
        out
    }
}

impl<const N: usize> MulAssign for HyperDual<N> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const N: usize> Div for HyperDual<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<const N: usize> Neg for HyperDual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const N: usize> Add<f64> for HyperDual<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for HyperDual<N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for HyperDual<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.v *= rhs;
        for i in 0..N {
            self.g[i] *= rhs;
            for j in 0..N {
                self.h[i][j] *= rhs;
            }
        }
        self
    }
}

impl<const N: usize> Div<f64> for HyperDual<N> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}
