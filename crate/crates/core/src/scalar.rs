//! Scalar abstraction for the numeric kernels.
//!
//! Every forward/backward kernel is generic over [`Real`] so the same code
//! runs in three instantiations:
//!
//! * `f32` — the production path,
//! * `f64` — high-precision oracles in tests,
//! * [`Dual`] — forward-mode dual numbers layered over a reverse pass, which
//!   yields the mixed second derivatives the inversion objective needs.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f32(v: f32) -> Self;
    fn from_f64(v: f64) -> Self;
    /// Value part, discarding any tangent.
    fn primal(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    /// `self^e` for a constant exponent.
    fn powf_const(self, e: f64) -> Self;
    fn is_finite_val(self) -> bool;

    /// Comparison on the value part.
    fn lt(self, other: Self) -> bool {
        self.primal() < other.primal()
    }

    fn max_val(self, other: Self) -> Self {
        if self.lt(other) {
            other
        } else {
            self
        }
    }

    fn min_val(self, other: Self) -> Self {
        if other.lt(self) {
            other
        } else {
            self
        }
    }

    fn clamp_val(self, lo: Self, hi: Self) -> Self {
        self.max_val(lo).min_val(hi)
    }
}

impl Real for f32 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f32(v: f32) -> Self {
        v
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn primal(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn ln(self) -> Self {
        f32::ln(self)
    }
    fn tanh(self) -> Self {
        f32::tanh(self)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn powf_const(self, e: f64) -> Self {
        self.powf(e as f32)
    }
    fn is_finite_val(self) -> bool {
        self.is_finite()
    }
}

impl Real for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn primal(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf_const(self, e: f64) -> Self {
        self.powf(e)
    }
    fn is_finite_val(self) -> bool {
        self.is_finite()
    }
}

/// Forward-mode dual number: value plus tangent.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Dual<T: Real> {
    pub val: T,
    pub tan: T,
}

impl<T: Real> Dual<T> {
    pub fn new(val: T, tan: T) -> Self {
        Dual { val, tan }
    }

    pub fn constant(val: T) -> Self {
        Dual {
            val,
            tan: T::zero(),
        }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.val + o.val, self.tan + o.tan)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.val - o.val, self.tan - o.tan)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.val * o.val, self.tan * o.val + self.val * o.tan)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let val = self.val / o.val;
        Dual::new(val, (self.tan - val * o.tan) / o.val)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.val, -self.tan)
    }
}

impl<T: Real> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Dual<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> MulAssign for Dual<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Real> Real for Dual<T> {
    fn zero() -> Self {
        Dual::constant(T::zero())
    }
    fn one() -> Self {
        Dual::constant(T::one())
    }
    fn from_f32(v: f32) -> Self {
        Dual::constant(T::from_f32(v))
    }
    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }
    fn primal(self) -> f64 {
        self.val.primal()
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        Dual::new(e, e * self.tan)
    }
    fn ln(self) -> Self {
        Dual::new(self.val.ln(), self.tan / self.val)
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        Dual::new(t, (T::one() - t * t) * self.tan)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        let two = T::from_f64(2.0);
        Dual::new(s, self.tan / (two * s))
    }
    fn powf_const(self, e: f64) -> Self {
        let val = self.val.powf_const(e);
        // d/dx x^e = e x^(e-1); define the tangent as 0 at x = 0 so the
        // total-variation exponent stays finite on flat regions
        let tan = if self.val.primal() == 0.0 {
            T::zero()
        } else {
            T::from_f64(e) * self.val.powf_const(e - 1.0) * self.tan
        };
        Dual::new(val, tan)
    }
    fn is_finite_val(self) -> bool {
        self.val.is_finite_val() && self.tan.is_finite_val()
    }
    fn lt(self, other: Self) -> bool {
        self.val.lt(other.val)
    }
}

/// Dual over `f32`, the main second-derivative carrier.
pub type Dual32 = Dual<f32>;

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: f64, t: f64) -> Dual<f64> {
        Dual::new(v, t)
    }

    #[test]
    fn dual_product_rule() {
        // f(x) = x^2 at x=3, dx=1 -> f=9, f'=6
        let x = d(3.0, 1.0);
        let y = x * x;
        assert!((y.val - 9.0).abs() < 1e-12);
        assert!((y.tan - 6.0).abs() < 1e-12);
    }

    #[test]
    fn dual_chain_through_exp_ln() {
        // f(x) = ln(exp(x) + 1) at x=0.3
        let x = d(0.3, 1.0);
        let y = (x.exp() + Dual::constant(1.0)).ln();
        let sig = 1.0 / (1.0 + (-0.3f64).exp());
        assert!((y.tan - sig).abs() < 1e-12);
    }

    #[test]
    fn dual_division_and_sqrt() {
        let x = d(4.0, 1.0);
        let y = Dual::constant(1.0) / x.sqrt(); // x^(-1/2), derivative -1/2 x^(-3/2)
        assert!((y.val - 0.5).abs() < 1e-12);
        assert!((y.tan + 0.5 * 4.0f64.powf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn powf_const_flat_at_zero() {
        let x = d(0.0, 1.0);
        let y = x.powf_const(1.25);
        assert_eq!(y.val, 0.0);
        assert_eq!(y.tan, 0.0);
    }
}
