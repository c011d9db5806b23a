//! Surrogate Lagrangians.
//!
//! The midpoint variational integrator applied to `L` tracks, to second order in `h`, the
//! exact flow of a modified Lagrangian `L + h²·Φ₂(L) + O(h⁴)`. A surrogate `L̂ = L − h²·Φ₂(L)`
//! cancels that leading modification: integrating `L̂` with the same stepper reproduces
//! the dynamics of `L` to fourth order.
//!
//! Along the nominal motion `q̈ = A⁻¹(b + g)` with `A = ∂²L/∂q̇²`, `b = ∂L/∂q − B q̇`,
//! `B = ∂²L/∂q̇∂q` and `g` the extra generalized force (constraint or applied), the
//! second-order surrogate reduces to
//!
//! `L̂ = L + (h²/24)·(q̇ᵀ L_qq q̇ − bᵀA⁻¹b + gᵀA⁻¹g)`.
//!
//! `g = 0` gives the conservative surrogate, `g = Dcᵀλ(q, q̇)` the constrained one and
//! `g = F(q, q̇, u)` the forced one. The forced surrogate additionally corrects the applied
//! force itself, see [`SurrogateForceTerms`].

mod forced;
pub mod linear;
pub mod operators;

pub use forced::{
    init_forced_surrogate, step_forced_surrogate, surrogate_discrete_forces, ForcedSurrogate, InputWindow, SurrogateForceTerms,
    SurrogateForcing,
};
pub use linear::{linear_surrogate, series_coefficients, LinearSurrogateParams};
pub use operators::{fourth_order_surrogate, higher_order_operators, OperatorSet, QuadraticForm};

use crate::error::{Error, Result};
use crate::linalg::{dot, Lu, Mat};
use crate::model::{check_point, Constraint, Lagrangian, Partials, StepSize};
use crate::scalar::Scalar;

/// Largest pivot ratio of `∂²L/∂q̇²` accepted before declaring it singular.
pub const MASS_CONDITION_LIMIT: f64 = 1e12;

/// Factors the mass matrix `A = ∂²L/∂q̇²`, rejecting singular or ill-conditioned ones.
pub(crate) fn factor_mass<S: Scalar>(a: &Mat<S>) -> Result<Lu<S>> {
    let lu = Lu::factor(a).map_err(|_| Error::SingularMassMatrix)?;
    if lu.pivot_ratio() > MASS_CONDITION_LIMIT {
        return Err(Error::SingularMassMatrix);
    }
    Ok(lu)
}

/// `b = ∂L/∂q − (∂²L/∂q̇∂q)·q̇`, the velocity-independent part of `A·q̈`.
pub(crate) fn bias<S: Scalar>(p: &Partials<S>, v: &[S]) -> Vec<S> {
    let bv = p.dvq.mul_vec(v);
    p.dq.iter().zip(bv).map(|(&lq, b)| lq - b).collect()
}

/// The bracket `q̇ᵀ L_qq q̇ − bᵀA⁻¹b (+ gᵀA⁻¹g)` of the second-order surrogate.
pub(crate) fn correction<S: Scalar>(p: &Partials<S>, v: &[S], lu: &Lu<S>, extra: Option<&[S]>) -> S {
    let b = bias(p, v);
    let mut c = p.dqq.bilinear(v, v) - dot(&b, &lu.solve(&b));
    if let Some(g) = extra {
        c += dot(g, &lu.solve(g));
    }
    c
}

/// Second-order surrogate of a conservative Lagrangian.
#[derive(Clone, Debug)]
pub struct SurrogateLagrangian<L> {
    base: L,
    h: f64,
}

impl<L: Lagrangian> SurrogateLagrangian<L> {
    pub fn base(&self) -> &L {
        &self.base
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

/// `L̂ = L + (h²/24)·(q̇ᵀ L_qq q̇ − bᵀA⁻¹b)`: the surrogate the midpoint integrator needs to
/// reproduce the flow of `base` to fourth order with step `h`.
pub fn surrogate_conservative<L: Lagrangian>(base: L, h: StepSize) -> SurrogateLagrangian<L> {
    SurrogateLagrangian { base, h: h.get() }
}

impl<L: Lagrangian> Lagrangian for SurrogateLagrangian<L> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S> {
        check_point(self, q, v)?;
        let p = self.base.partials(q, v)?;
        let lu = factor_mass(&p.dvv)?;
        Ok(p.value + correction(&p, v, &lu, None) * (self.h * self.h / 24.0))
    }
}

/// Multiplier `λ(q, q̇)` of the nominal constrained motion, with its ingredients.
pub(crate) struct Multiplier<S> {
    pub lambda: Vec<S>,
    /// `Dc·A⁻¹·Dcᵀ`, the constraint-space inverse mass.
    pub schur: Mat<S>,
}

/// Solves `Dc·q̈ + q̇ᵀ∇²c q̇ = 0` with `A·q̈ = b + Dcᵀλ` for `λ`:
/// `λ = −(Dc A⁻¹ Dcᵀ)⁻¹ (Dc A⁻¹ b + q̇ᵀ∇²c q̇)`.
pub(crate) fn multiplier<S: Scalar, C: Constraint>(p: &Partials<S>, constraint: &C, q: &[S], v: &[S], lu: &Lu<S>) -> Result<Multiplier<S>> {
    let dc = constraint.jacobian(q);
    let hess = constraint.hessians(q);
    let m = constraint.count();
    let ainv_dct: Vec<Vec<S>> = (0..m).map(|i| lu.solve(dc.row(i))).collect();
    let schur = Mat::from_fn(m, m, |i, j| dot(dc.row(i), &ainv_dct[j]));
    let ainv_b = lu.solve(&bias(p, v));
    let rhs: Vec<S> = (0..m).map(|i| dot(dc.row(i), &ainv_b) + hess[i].bilinear(v, v)).collect();
    let lambda = Lu::factor(&schur).map_err(|_| Error::ConstraintDegeneracy)?.solve(&rhs);
    Ok(Multiplier { lambda: lambda.into_iter().map(|x| -x).collect(), schur })
}

/// The multiplier `λ(q, q̇)` that keeps the nominal motion of `lag` on `c(q) = 0`, so
/// that `A·q̈ = ∂L/∂q − B·q̇ + Dc(q)ᵀλ`.
pub fn constraint_multiplier<L: Lagrangian, C: Constraint>(lag: &L, constraint: &C, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_point(lag, q, v)?;
    crate::error::check_len(lag.dim(), constraint.dim())?;
    let p = lag.partials(q, v)?;
    let lu = factor_mass(&p.dvv)?;
    Ok(multiplier(&p, constraint, q, v, &lu)?.lambda)
}

/// Second-order surrogate of a holonomically constrained Lagrangian.
#[derive(Clone, Debug)]
pub struct ConstrainedSurrogate<L, C> {
    base: L,
    constraint: C,
    h: f64,
}

impl<L: Lagrangian, C: Constraint> ConstrainedSurrogate<L, C> {
    pub fn base(&self) -> &L {
        &self.base
    }

    pub fn constraint(&self) -> &C {
        &self.constraint
    }
}

/// `L̂ = L + (h²/24)·(q̇ᵀ L_qq q̇ − bᵀA⁻¹b + λᵀ Dc A⁻¹ Dcᵀ λ)` with `λ = λ(q, q̇)`.
///
/// The constraint itself is still enforced by the stepper; the surrogate only corrects
/// the Lagrangian for the constraint force the nominal motion experiences.
pub fn surrogate_constrained<L: Lagrangian, C: Constraint>(base: L, constraint: C, h: StepSize) -> Result<ConstrainedSurrogate<L, C>> {
    crate::error::check_len(base.dim(), constraint.dim())?;
    Ok(ConstrainedSurrogate { base, constraint, h: h.get() })
}

impl<L: Lagrangian, C: Constraint> Lagrangian for ConstrainedSurrogate<L, C> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S> {
        check_point(self, q, v)?;
        let p = self.base.partials(q, v)?;
        let lu = factor_mass(&p.dvv)?;
        let mul = multiplier(&p, &self.constraint, q, v, &lu)?;
        let c = correction(&p, v, &lu, None) + mul.schur.bilinear(&mul.lambda, &mul.lambda);
        Ok(p.value + c * (self.h * self.h / 24.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuadraticLagrangian;
    use approx::assert_relative_eq;

    #[test]
    fn oscillator_surrogate_matches_closed_form() {
        // L̂ = ½M(1 − h²K/(12M))q̇² − ½K(1 + h²K/(12M))q² for L = ½Mq̇² − ½Kq².
        let (m, k, h) = (1.0, 2.0, 0.1);
        let lh = surrogate_conservative(QuadraticLagrangian::scalar(m, k), StepSize::new(h).unwrap());
        let (q, v) = (0.7, -0.3);
        let ms = m - h * h * k / 12.0;
        let ks = k + h * h * k * k / (12.0 * m);
        assert_relative_eq!(lh.eval(&[q], &[v]).unwrap(), 0.5 * ms * v * v - 0.5 * ks * q * q, epsilon = 1e-15);
    }

    #[test]
    fn singular_mass_matrix_is_rejected() {
        let lag = QuadraticLagrangian::new(Mat::diagonal(&[1.0, 0.0]), Mat::identity(2)).unwrap();
        let lh = surrogate_conservative(lag, StepSize::new(0.1).unwrap());
        assert_eq!(lh.eval(&[0.1, 0.2], &[0.0, 1.0]).unwrap_err(), Error::SingularMassMatrix);
    }

    struct Circle;
    impl Constraint for Circle {
        fn dim(&self) -> usize {
            2
        }
        fn count(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, q: &[S]) -> Vec<S> {
            vec![q[0] * q[0] + q[1] * q[1] - 1.0]
        }
    }

    /// A unit point mass under gravity g = 9.81.
    struct Point;
    impl Lagrangian for Point {
        fn dim(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S> {
            Ok((v[0] * v[0] + v[1] * v[1]) * 0.5 - q[1] * 9.81)
        }
    }

    #[test]
    fn hanging_pendulum_multiplier_balances_gravity() {
        let lambda = constraint_multiplier(&Point, &Circle, &[0.0, -1.0], &[0.0, 0.0]).unwrap();
        // Dcᵀλ = (0, −2)·λ must equal (0, m g).
        assert_relative_eq!(-2.0 * lambda[0], 9.81, epsilon = 1e-13);
    }

    #[test]
    fn swinging_pendulum_multiplier_includes_centripetal_term() {
        // At the bottom with speed s: tension ∝ g + s², and Dcᵀλ = (0, −2λ) = (0, g + s²).
        let s = 1.5;
        let lambda = constraint_multiplier(&Point, &Circle, &[0.0, -1.0], &[s, 0.0]).unwrap();
        assert_relative_eq!(-2.0 * lambda[0], 9.81 + s * s, epsilon = 1e-13);
    }

    #[test]
    fn degenerate_constraint_is_reported() {
        // At the origin Dc = 0.
        let err = constraint_multiplier(&Point, &Circle, &[0.0, 0.0], &[1.0, 0.0]).unwrap_err();
        assert_eq!(err, Error::ConstraintDegeneracy);
    }
}
