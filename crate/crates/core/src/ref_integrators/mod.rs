//! Reference integrators: explicit Runge–Kutta methods on the first-order form of the
//! Euler–Lagrange equations, and half-explicit Runge–Kutta methods for constrained
//! systems.

mod half_explicit;
mod tableau;

pub use half_explicit::{half_explicit_step, hem4_step, herk4_step, project_onto_manifold, HalfExplicitStep, STAGE_TOLERANCE};
pub use tableau::{ButcherTableau, HEM4_SOURCE};

use crate::error::{check_len, Error, Result};
use crate::linalg::Lu;
use crate::model::{ContinuousState, Force, Lagrangian};
use crate::surrogate::bias;

/// One explicit step of `tableau` on `ẋ = f(t, x)`.
///
/// Stages are accumulated as `Xᵢ = x + h Σⱼ aᵢⱼ Kⱼ` in increasing `j`, the same order the
/// half-explicit steppers use, so both agree bitwise when there are no constraints.
pub fn explicit_rk_step<F>(tableau: &ButcherTableau, mut f: F, x: &[f64], t: f64, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    tableau::run_stages(tableau, x, h, |i, stage, _next_weight, _base| {
        let k = f(t + tableau.c()[i] * h, stage)?;
        check_len(x.len(), k.len())?;
        Ok(k)
    })
}

/// The classical four-stage Runge–Kutta step on `ẋ = f(t, x)`.
pub fn rk4_step<F>(f: F, x: &[f64], t: f64, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    explicit_rk_step(ButcherTableau::rk4(), f, x, t, h)
}

/// `A = ∂²L/∂q̇²` factored, and `q̈ = A⁻¹(∂L/∂q − B q̇ + F)` with `B = ∂²L/∂q̇∂q`.
pub(crate) fn acceleration_parts<L: Lagrangian, F: Force>(lag: &L, force: &F, q: &[f64], v: &[f64]) -> Result<(Lu<f64>, Vec<f64>)> {
    let p = lag.partials(q, v)?;
    let lu = Lu::factor(&p.dvv).map_err(|_| Error::SingularMassMatrix)?;
    let mut rhs = bias(&p, v);
    if force.dim() > 0 {
        for (r, f) in rhs.iter_mut().zip(force.eval(q, v, &[])?) {
            *r += f;
        }
    }
    let acc = lu.solve(&rhs);
    Ok((lu, acc))
}

/// `q̈ = A⁻¹(∂L/∂q − B q̇ + F)` with `A = ∂²L/∂q̇²`, `B = ∂²L/∂q̇∂q`.
pub fn acceleration<L: Lagrangian, F: Force>(lag: &L, force: &F, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    Ok(acceleration_parts(lag, force, q, v)?.1)
}

pub(crate) fn check_state<L: Lagrangian>(lag: &L, state: &ContinuousState) -> Result<()> {
    check_len(lag.dim(), state.q.len())?;
    check_len(lag.dim(), state.qdot.len())
}

/// The Euler–Lagrange equations as a first-order system on `x = (q, q̇)`.
pub struct LagrangianOde<'a, L, F> {
    pub lagrangian: &'a L,
    pub force: &'a F,
}

impl<'a, L: Lagrangian, F: Force> LagrangianOde<'a, L, F> {
    pub fn new(lagrangian: &'a L, force: &'a F) -> Self {
        Self { lagrangian, force }
    }

    pub fn dim(&self) -> usize {
        2 * self.lagrangian.dim()
    }

    /// `ẋ = (q̇, q̈)`.
    pub fn rate(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let n = self.lagrangian.dim();
        let (q, v) = x.split_at(n);
        let a = acceleration(self.lagrangian, self.force, q, v)?;
        Ok(v.iter().copied().chain(a).collect())
    }

    /// One classical RK4 step of the state.
    pub fn rk4_step(&self, state: &ContinuousState, h: f64) -> Result<ContinuousState> {
        let x: Vec<f64> = state.q.iter().chain(&state.qdot).copied().collect();
        let next = rk4_step(|t, x| self.rate(t, x), &x, state.t, h)?;
        let n = self.lagrangian.dim();
        ContinuousState::new(next[..n].to_vec(), next[n..].to_vec(), state.t + h)
    }
}
