//! States and the three model abstractions: Lagrangians, generalized forces and
//! holonomic constraints.
//!
//! Models are written generically over [`Scalar`] so the same code yields values on `f64`
//! and exact derivatives on dual numbers. Default implementations of the derivative
//! methods use forward-mode differentiation; concrete models may override them with
//! closed forms for speed.

use crate::error::{check_len, Error, Result};
use crate::linalg::Mat;
use crate::oracle;
use crate::scalar::Scalar;

/// A point of the continuous flow: configuration, velocity and time.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub t: f64,
}

impl ContinuousState {
    /// Builds a state, checking that `q` and `qdot` have equal length.
    pub fn new(q: Vec<f64>, qdot: Vec<f64>, t: f64) -> Result<Self> {
        check_len(q.len(), qdot.len())?;
        Ok(Self { q, qdot, t })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// A point of the discrete position–momentum map: `(q_k, p_k, t_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl DiscreteState {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// True when every coordinate and momentum is finite.
    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }
}

/// A validated, strictly positive and finite step size.
#[derive(Copy, Clone, Debug, PartialEq, PartialOrd)]
pub struct StepSize(f64);

impl StepSize {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.0 {
            Ok(Self(h))
        } else {
            Err(Error::InvalidParameter(format!("step size must be positive and finite, got {h}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Value and first partials of a Lagrangian at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<S> {
    pub value: S,
    /// ∂L/∂q
    pub dq: Vec<S>,
    /// ∂L/∂q̇
    pub dv: Vec<S>,
}

/// Value, first and second partials of a Lagrangian at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Partials<S> {
    pub value: S,
    /// ∂L/∂q
    pub dq: Vec<S>,
    /// ∂L/∂q̇
    pub dv: Vec<S>,
    /// ∂²L/∂q∂q
    pub dqq: Mat<S>,
    /// ∂²L/∂q̇∂q̇ — the mass matrix.
    pub dvv: Mat<S>,
    /// Mixed block, `dvq[(i, j)] = ∂²L/∂q̇ᵢ∂qⱼ`.
    pub dvq: Mat<S>,
}

impl<S: Scalar> Partials<S> {
    /// Drops the second-order blocks.
    pub fn gradient(&self) -> Gradient<S> {
        Gradient { value: self.value, dq: self.dq.clone(), dv: self.dv.clone() }
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.dq.iter().chain(&self.dv).all(Scalar::is_finite)
            && self.dqq.is_finite()
            && self.dvv.is_finite()
            && self.dvq.is_finite()
    }
}

/// A scalar Lagrangian `L(q, q̇)` on an `n`-dimensional configuration space.
pub trait Lagrangian: Sync {
    /// Number of generalized coordinates `n`.
    fn dim(&self) -> usize;

    /// `L(q, q̇)`.
    fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S>;

    /// Value and first partials. Defaults to forward-mode differentiation of [`eval`](Self::eval).
    fn gradient<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<Gradient<S>> {
        oracle::auto_gradient(self, q, v)
    }

    /// Value, first and second partials. Defaults to nested forward-mode differentiation.
    fn partials<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<Partials<S>> {
        oracle::auto_partials(self, q, v)
    }
}

impl<T: Lagrangian> Lagrangian for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S> {
        (**self).eval(q, v)
    }
    fn gradient<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<Gradient<S>> {
        (**self).gradient(q, v)
    }
    fn partials<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<Partials<S>> {
        (**self).partials(q, v)
    }
}

/// A generalized (non-conservative) force `F(q, q̇, u)` with control input `u`.
pub trait Force: Sync {
    /// Number of generalized coordinates.
    fn dim(&self) -> usize;

    /// Number of control inputs; zero for autonomous forces.
    fn input_dim(&self) -> usize {
        0
    }

    /// `F(q, q̇, u)`, a vector of length [`dim`](Self::dim).
    fn eval<S: Scalar>(&self, q: &[S], v: &[S], u: &[S]) -> Result<Vec<S>>;
}

impl<T: Force> Force for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn eval<S: Scalar>(&self, q: &[S], v: &[S], u: &[S]) -> Result<Vec<S>> {
        (**self).eval(q, v, u)
    }
}

/// A set of `m` holonomic constraints `c(q) = 0`.
pub trait Constraint: Sync {
    /// Number of generalized coordinates.
    fn dim(&self) -> usize;

    /// Number of scalar constraints `m`.
    fn count(&self) -> usize;

    /// `c(q)`, a vector of length [`count`](Self::count).
    fn eval<S: Scalar>(&self, q: &[S]) -> Vec<S>;

    /// The `m × n` Jacobian `Dc(q)`. Defaults to forward-mode differentiation.
    fn jacobian<S: Scalar>(&self, q: &[S]) -> Mat<S> {
        oracle::auto_constraint_jacobian(self, q)
    }

    /// One `n × n` Hessian per constraint. Defaults to nested forward-mode differentiation.
    fn hessians<S: Scalar>(&self, q: &[S]) -> Vec<Mat<S>> {
        oracle::auto_constraint_hessians(self, q)
    }
}

impl<T: Constraint> Constraint for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn count(&self) -> usize {
        (**self).count()
    }
    fn eval<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        (**self).eval(q)
    }
    fn jacobian<S: Scalar>(&self, q: &[S]) -> Mat<S> {
        (**self).jacobian(q)
    }
    fn hessians<S: Scalar>(&self, q: &[S]) -> Vec<Mat<S>> {
        (**self).hessians(q)
    }
}

/// The identically zero force, for systems without one.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct NoForce {
    pub dim: usize,
}

impl Force for NoForce {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval<S: Scalar>(&self, _q: &[S], _v: &[S], _u: &[S]) -> Result<Vec<S>> {
        Ok(vec![S::zero(); self.dim])
    }
}

/// The empty constraint set, for unconstrained systems.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct NoConstraint {
    pub dim: usize,
}

impl Constraint for NoConstraint {
    fn dim(&self) -> usize {
        self.dim
    }
    fn count(&self) -> usize {
        0
    }
    fn eval<S: Scalar>(&self, _q: &[S]) -> Vec<S> {
        Vec::new()
    }
    fn jacobian<S: Scalar>(&self, _q: &[S]) -> Mat<S> {
        Mat::zeros(0, self.dim)
    }
    fn hessians<S: Scalar>(&self, _q: &[S]) -> Vec<Mat<S>> {
        Vec::new()
    }
}

/// Checks that `(q, q̇)` have the dimension of the Lagrangian.
pub(crate) fn check_point<L: Lagrangian + ?Sized, S>(lag: &L, q: &[S], v: &[S]) -> Result<()> {
    check_len(lag.dim(), q.len())?;
    check_len(lag.dim(), v.len())
}

/// Continuous Legendre transform `p = ∂L/∂q̇ (q, q̇)`.
pub fn legendre_momentum<L: Lagrangian>(lag: &L, state: &ContinuousState) -> Result<Vec<f64>> {
    check_point(lag, &state.q, &state.qdot)?;
    let g = lag.gradient(&state.q, &state.qdot)?;
    if g.dv.iter().all(|x| x.is_finite()) {
        Ok(g.dv)
    } else {
        Err(Error::NonFiniteDerivative)
    }
}

/// The quadratic Lagrangian `L = ½ q̇ᵀ M q̇ − ½ qᵀ K q` of a linear mechanical system.
///
/// Partials are supplied in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticLagrangian {
    m: Mat<f64>,
    k: Mat<f64>,
}

impl QuadraticLagrangian {
    /// Builds the Lagrangian; `M` and `K` must be square, of equal size and symmetric.
    pub fn new(m: Mat<f64>, k: Mat<f64>) -> Result<Self> {
        if !m.is_square() || !k.is_square() {
            return Err(Error::InvalidParameter("M and K must be square".into()));
        }
        check_len(m.rows(), k.rows())?;
        for (name, a) in [("M", &m), ("K", &k)] {
            let scale = a.max_abs().max(f64::MIN_POSITIVE);
            if a.sub(&a.transpose()).max_abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
            }
        }
        Ok(Self { m, k })
    }

    /// Scalar `M` and `K` of a one-degree-of-freedom oscillator.
    pub fn scalar(m: f64, k: f64) -> Self {
        Self { m: Mat::from_rows(&[vec![m]]), k: Mat::from_rows(&[vec![k]]) }
    }

    pub fn mass(&self) -> &Mat<f64> {
        &self.m
    }

    pub fn stiffness(&self) -> &Mat<f64> {
        &self.k
    }
}

impl Lagrangian for QuadraticLagrangian {
    fn dim(&self) -> usize {
        self.m.rows()
    }

    fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S> {
        check_point(self, q, v)?;
        let m = Mat::<S>::lift(&self.m);
        let k = Mat::<S>::lift(&self.k);
        Ok((m.bilinear(v, v) - k.bilinear(q, q)) * 0.5)
    }

    fn gradient<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<Gradient<S>> {
        let p = self.partials(q, v)?;
        Ok(p.gradient())
    }

    fn partials<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<Partials<S>> {
        check_point(self, q, v)?;
        let n = self.dim();
        let m = Mat::<S>::lift(&self.m);
        let k = Mat::<S>::lift(&self.k);
        let mv = m.mul_vec(v);
        let kq = k.mul_vec(q);
        let value = (crate::linalg::dot(v, &mv) - crate::linalg::dot(q, &kq)) * 0.5;
        Ok(Partials {
            value,
            dq: kq.into_iter().map(|x| -x).collect(),
            dv: mv,
            dqq: k.scale(S::from_f64(-1.0)),
            dvv: m,
            dvq: Mat::zeros(n, n),
        })
    }
}
