//! Scalar abstraction and forward-mode dual numbers.
//!
//! Every model in the crate is written once, generically over [`Scalar`]. Evaluating it
//! on `f64` gives values; evaluating it on [`Dual`] gives exact directional derivatives.
//! Nesting duals (`Dual<Dual<f64>>`, …) gives mixed higher derivatives, because each level
//! carries its own infinitesimal and ε² = 0 holds per level.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// A real-like number type on which models can be evaluated.
///
/// Implemented for `f64` and for [`Dual<S>`] of any scalar `S`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
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
    + DivAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Embeds a constant (all derivative parts zero).
    fn from_f64(x: f64) -> Self;
    /// The primal value, stripped of every infinitesimal part.
    fn re(&self) -> f64;
    /// True when every component (primal and all derivative parts) is finite.
    fn is_finite(&self) -> bool;

    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;

    /// Additive identity.
    #[inline]
    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    /// Multiplicative identity.
    #[inline]
    fn one() -> Self {
        Self::from_f64(1.0)
    }

    /// `1 / self`.
    #[inline]
    fn recip(self) -> Self {
        Self::one() / self
    }

    /// Absolute value of the primal part; derivatives follow the sign of the primal.
    #[inline]
    fn abs(self) -> Self {
        if self.re() < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// A first-order dual number `re + du·ε` with `ε² = 0`.
///
/// `Dual<f64>` carries one directional derivative; `Dual<Dual<f64>>` carries two
/// independent infinitesimals, so its `du.du` part is a mixed second derivative.
#[derive(Copy, Clone, Debug, PartialEq, Default)]
pub struct Dual<S> {
    /// Value part.
    pub re: S,
    /// Coefficient of the infinitesimal ε.
    pub du: S,
}

impl<S: Scalar> Dual<S> {
    /// A dual with explicit value and derivative parts.
    #[inline]
    pub fn new(re: S, du: S) -> Self {
        Self { re, du }
    }

    /// A constant: derivative part zero.
    #[inline]
    pub fn constant(re: S) -> Self {
        Self { re, du: S::zero() }
    }

    /// An independent variable: derivative part one.
    #[inline]
    pub fn variable(re: S) -> Self {
        Self { re, du: S::one() }
    }

    /// Lifts with derivative `1` if `seeded`, else `0`.
    #[inline]
    pub fn seed(re: S, seeded: bool) -> Self {
        if seeded {
            Self::variable(re)
        } else {
            Self::constant(re)
        }
    }

    /// Chain rule for a unary function with value `f` and derivative `df` at `re`.
    #[inline]
    fn chain(self, f: S, df: S) -> Self {
        Self { re: f, du: self.du * df }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self { re: self.re + o.re, du: self.du + o.du }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self { re: self.re - o.re, du: self.du - o.du }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self { re: self.re * o.re, du: self.du * o.re + self.re * o.du }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = o.re.recip();
        let re = self.re * inv;
        Self { re, du: (self.du - re * o.du) * inv }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { re: -self.re, du: -self.du }
    }
}

impl<S: Scalar> Add<f64> for Dual<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: f64) -> Self {
        Self { re: self.re + o, du: self.du }
    }
}

impl<S: Scalar> Sub<f64> for Dual<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: f64) -> Self {
        Self { re: self.re - o, du: self.du }
    }
}

impl<S: Scalar> Mul<f64> for Dual<S> {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        Self { re: self.re * o, du: self.du * o }
    }
}

impl<S: Scalar> Div<f64> for Dual<S> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        Self { re: self.re / o, du: self.du / o }
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl<S: Scalar> $tr for Dual<S> {
            #[inline]
            fn $m(&mut self, o: Self) {
                *self = *self $op o;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

impl<S: Scalar> Scalar for Dual<S> {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Self::constant(S::from_f64(x))
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re.re()
    }
    #[inline]
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.du.is_finite()
    }
    #[inline]
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, (r * 2.0).recip())
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => self.chain(self.re.powi(n), self.re.powi(n - 1) * f64::from(n)),
        }
    }
}

/// Converts a slice of constants into any scalar type.
pub fn lift<S: Scalar>(x: &[f64]) -> Vec<S> {
    x.iter().map(|&v| S::from_f64(v)).collect()
}

/// Primal values of a slice of scalars.
pub fn primal<S: Scalar>(x: &[S]) -> Vec<f64> {
    x.iter().map(Scalar::re).collect()
}

/// Lifts `x` to duals, seeding the derivative direction `dir` (`x + ε·dir`).
pub fn seed_direction<S: Scalar>(x: &[S], dir: &[S]) -> Vec<Dual<S>> {
    x.iter().zip(dir).map(|(&v, &d)| Dual::new(v, d)).collect()
}

/// Lifts `x` to constant duals.
pub fn constants<S: Scalar>(x: &[S]) -> Vec<Dual<S>> {
    x.iter().map(|&v| Dual::constant(v)).collect()
}

/// Value parts of a slice of duals.
pub fn values<S: Scalar>(x: &[Dual<S>]) -> Vec<S> {
    x.iter().map(|d| d.re).collect()
}

/// Derivative parts of a slice of duals.
pub fn derivatives<S: Scalar>(x: &[Dual<S>]) -> Vec<S> {
    x.iter().map(|d| d.du).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type D = Dual<f64>;
    type DD = Dual<Dual<f64>>;

    #[test]
    fn product_rule() {
        let x = D::variable(3.0);
        let y = x * x * 2.0 + x;
        assert_eq!(y.re, 21.0);
        assert_eq!(y.du, 13.0);
    }

    #[test]
    fn quotient_rule() {
        let x = D::variable(2.0);
        let y = D::from_f64(1.0) / (x * x);
        assert_relative_eq!(y.du, -2.0 / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn transcendental_derivatives() {
        let x = 0.7;
        let d = D::variable(x);
        assert_relative_eq!(d.sin().du, x.cos(), epsilon = 1e-15);
        assert_relative_eq!(d.cos().du, -x.sin(), epsilon = 1e-15);
        assert_relative_eq!(d.exp().du, x.exp(), epsilon = 1e-15);
        assert_relative_eq!(d.ln().du, 1.0 / x, epsilon = 1e-15);
        assert_relative_eq!(d.sqrt().du, 0.5 / x.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(d.powi(3).du, 3.0 * x * x, epsilon = 1e-15);
        assert_relative_eq!(d.powi(-2).du, -2.0 / (x * x * x), epsilon = 1e-14);
    }

    #[test]
    fn nested_duals_give_mixed_second_derivative() {
        // f(x, y) = x² y sin(x); ∂²f/∂x∂y = 2x sin x + x² cos x.
        let (x0, y0) = (0.4, 1.3);
        let x = DD::new(D::variable(x0), D::from_f64(0.0));
        let y = DD::new(D::constant(y0), D::from_f64(1.0));
        let f = x * x * y * x.sin();
        let expected = 2.0 * x0 * x0.sin() + x0 * x0 * x0.cos();
        assert_relative_eq!(f.du.du, expected, epsilon = 1e-14);
        assert_relative_eq!(f.re(), x0 * x0 * y0 * x0.sin(), epsilon = 1e-15);
    }

    #[test]
    fn non_finite_is_detected_in_derivative_part() {
        let d = D::variable(0.0).sqrt();
        assert!(d.re.is_finite());
        assert!(!Scalar::is_finite(&d));
    }
}
