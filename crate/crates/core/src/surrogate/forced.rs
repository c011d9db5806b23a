//! Surrogate for forced systems.
//!
//! With an applied force `F(q, q̇, u)` the modified dynamics of the midpoint stepper change
//! in two places: the Lagrangian picks up `(h²/24)·FᵀA⁻¹F`, and the force is replaced by a
//! surrogate `Ĥ₁ + dĤ₂/dt`-type pair. Writing `Θ = A⁻¹(∂L/∂q − B q̇ + F)` for the nominal
//! acceleration and `d = (q̇, Θ, u̇)` for the direction of the nominal motion in
//! `(q, q̇, u)`,
//!
//! - `Ĥ₁ = F + (h²/24)·[−2(F_q Θ + F_u ü) − 2 (∂Θ/∂q)ᵀF + ∂²_d F]`,
//! - `Ĥ₂ = (h²/24)·[2 ∂_d F − 2 (∂Θ/∂q̇)ᵀF]`,
//!
//! where `∂_d` and `∂²_d` are first and second directional derivatives along `d`. The
//! discrete forces of one step are
//!
//! - `F̂_d⁻ = −Ĥ₂(q_k, (q_k − q_{k−1})/h, u_k) + (h/2)·(Ĥ₁ − Ḣ₂)(midpoint)`,
//! - `F̂_d⁺ = Ĥ₂(q_{k+1}, (q_{k+1} − q_k)/h, u_{k+1}) + (h/2)·(Ĥ₁ − Ḣ₂)(midpoint)`,
//!
//! so the boundary terms telescope between consecutive steps. Inputs are treated as
//! piecewise linear between samples: `u̇ = (u_{k+1} − u_k)/h` and `ü = 0` on each step.

use crate::del::{self, DiscreteForcing, IntegratorConfig, Probe};
use crate::error::{check_len, Result};
use crate::linalg::{sub, Mat};
use crate::model::{check_point, ContinuousState, DiscreteState, Force, Lagrangian, NoConstraint, StepSize};
use crate::oracle::jacobians3;
use crate::scalar::{constants, derivatives, lift, seed_direction, Dual, Scalar};

use super::{bias, correction, factor_mass};

/// The surrogate force terms `Ĥ₁`, `Ĥ₂` of a forced Lagrangian system.
#[derive(Clone, Debug)]
pub struct SurrogateForceTerms<L, F> {
    base: L,
    force: F,
    h: f64,
}

impl<L: Lagrangian, F: Force> SurrogateForceTerms<L, F> {
    pub fn new(base: L, force: F, h: StepSize) -> Result<Self> {
        check_len(base.dim(), force.dim())?;
        Ok(Self { base, force, h: h.get() })
    }

    pub fn base(&self) -> &L {
        &self.base
    }

    pub fn force(&self) -> &F {
        &self.force
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn check<S>(&self, q: &[S], v: &[S], u: &[S]) -> Result<()> {
        check_point(&self.base, q, v)?;
        check_len(self.force.input_dim(), u.len())
    }

    /// Nominal acceleration `Θ = A⁻¹(∂L/∂q − B q̇ + F)`.
    pub fn acceleration<S: Scalar>(&self, q: &[S], v: &[S], u: &[S]) -> Result<Vec<S>> {
        let p = self.base.partials(q, v)?;
        let lu = factor_mass(&p.dvv)?;
        let f = self.force.eval(q, v, u)?;
        let rhs: Vec<S> = bias(&p, v).into_iter().zip(f).map(|(b, fi)| b + fi).collect();
        Ok(lu.solve(&rhs))
    }

    /// `∂_d F` along `d = (dq, dv, du)`.
    fn directional<S: Scalar>(&self, q: &[S], v: &[S], u: &[S], dq: &[S], dv: &[S], du: &[S]) -> Result<Vec<S>> {
        let f = self.force.eval(&seed_direction(q, dq), &seed_direction(v, dv), &seed_direction(u, du))?;
        Ok(derivatives(&f))
    }

    /// `∂²_d F` along `d = (dq, dv, du)`.
    fn second_directional<S: Scalar>(&self, q: &[S], v: &[S], u: &[S], dq: &[S], dv: &[S], du: &[S]) -> Result<Vec<S>> {
        let lift2 = |x: &[S], d: &[S]| -> Vec<Dual<Dual<S>>> {
            x.iter().zip(d).map(|(&xi, &di)| Dual::new(Dual::new(xi, di), Dual::constant(di))).collect()
        };
        let f = self.force.eval(&lift2(q, dq), &lift2(v, dv), &lift2(u, du))?;
        Ok(f.iter().map(|fi| fi.du.du).collect())
    }

    /// `Ĥ₁(q, q̇, u; u̇, ü)`.
    pub fn h1<S: Scalar>(&self, q: &[S], v: &[S], u: &[S], udot: &[S], uddot: &[S]) -> Result<Vec<S>> {
        self.check(q, v, u)?;
        let f = self.force.eval(q, v, u)?;
        let theta = self.acceleration(q, v, u)?;
        let jac = jacobians3(q, v, u, |q, v, u| self.acceleration(q, v, u))?;
        let dtheta_q_f = jac.dq.tr_mul_vec(&f);
        let zeros = vec![S::zero(); q.len()];
        let accel = self.directional(q, v, u, &theta, &zeros, uddot)?;
        let curvature = self.second_directional(q, v, u, v, &theta, udot)?;
        let c = self.h * self.h / 24.0;
        Ok((0..q.len()).map(|i| f[i] + (curvature[i] - (accel[i] + dtheta_q_f[i]) * 2.0) * c).collect())
    }

    /// `Ĥ₂(q, q̇, u; u̇)`.
    pub fn h2<S: Scalar>(&self, q: &[S], v: &[S], u: &[S], udot: &[S]) -> Result<Vec<S>> {
        self.check(q, v, u)?;
        let f = self.force.eval(q, v, u)?;
        let theta = self.acceleration(q, v, u)?;
        let jac = jacobians3(q, v, u, |q, v, u| self.acceleration(q, v, u))?;
        let dtheta_v_f = jac.dv.tr_mul_vec(&f);
        let rate = self.directional(q, v, u, v, &theta, udot)?;
        let c = self.h * self.h / 12.0;
        Ok(rate.iter().zip(dtheta_v_f).map(|(&r, d)| (r - d) * c).collect())
    }

    /// `dĤ₂/dt` along the nominal motion: `∂Ĥ₂/∂q·q̇ + ∂Ĥ₂/∂q̇·Θ + ∂Ĥ₂/∂u·u̇ + ∂Ĥ₂/∂u̇·ü`.
    pub fn h2_rate<S: Scalar>(&self, q: &[S], v: &[S], u: &[S], udot: &[S], uddot: &[S]) -> Result<Vec<S>> {
        let theta = self.acceleration(q, v, u)?;
        let h2 = self.h2(&seed_direction(q, v), &seed_direction(v, &theta), &seed_direction(u, udot), &seed_direction(udot, uddot))?;
        Ok(derivatives(&h2))
    }

    /// `∂F/∂(q, q̇, u)` blocks; exposed for diagnostics and tests.
    pub fn force_jacobians(&self, q: &[f64], v: &[f64], u: &[f64]) -> Result<(Mat<f64>, Mat<f64>, Mat<f64>)> {
        let j = jacobians3(q, v, u, |q, v, u| self.force.eval(q, v, u))?;
        Ok((j.dq, j.dv, j.du))
    }
}

/// The forced surrogate Lagrangian `L + (h²/24)·(q̇ᵀL_qq q̇ − bᵀA⁻¹b + FᵀA⁻¹F)` with the
/// input held at `u`.
#[derive(Clone, Debug)]
pub struct ForcedSurrogate<'a, L, F> {
    terms: &'a SurrogateForceTerms<L, F>,
    u: Vec<f64>,
}

impl<'a, L: Lagrangian, F: Force> ForcedSurrogate<'a, L, F> {
    pub fn new(terms: &'a SurrogateForceTerms<L, F>, u: &[f64]) -> Result<Self> {
        check_len(terms.force.input_dim(), u.len())?;
        Ok(Self { terms, u: u.to_vec() })
    }
}

impl<L: Lagrangian, F: Force> Lagrangian for ForcedSurrogate<'_, L, F> {
    fn dim(&self) -> usize {
        self.terms.base.dim()
    }

    fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S> {
        check_point(self, q, v)?;
        let p = self.terms.base.partials(q, v)?;
        let lu = factor_mass(&p.dvv)?;
        let f = self.terms.force.eval(q, v, &lift::<S>(&self.u))?;
        let h = self.terms.h;
        Ok(p.value + correction(&p, v, &lu, Some(&f)) * (h * h / 24.0))
    }
}

/// Input samples around step `k`: `u_{k−1}`, `u_k`, `u_{k+1}`.
#[derive(Copy, Clone, Debug)]
pub struct InputWindow<'a> {
    pub prev: &'a [f64],
    pub now: &'a [f64],
    pub next: &'a [f64],
}

impl InputWindow<'static> {
    /// The window of an autonomous force (no inputs).
    pub const NONE: InputWindow<'static> = InputWindow { prev: &[], now: &[], next: &[] };
}

/// The surrogate discrete forcing of one step, see the module documentation.
pub struct SurrogateForcing<'a, L, F> {
    terms: &'a SurrogateForceTerms<L, F>,
    /// `Ĥ₂(q_k, (q_k − q_{k−1})/h, u_k)`, shared with the previous step's `F̂_d⁺`.
    boundary: Vec<f64>,
    u_mid: Vec<f64>,
    u_rate: Vec<f64>,
    u_next: Vec<f64>,
}

impl<'a, L: Lagrangian, F: Force> SurrogateForcing<'a, L, F> {
    /// Forcing for the step from `q_k`, given the previous configuration `q_{k−1}`.
    pub fn new(terms: &'a SurrogateForceTerms<L, F>, q_prev: &[f64], q_k: &[f64], inputs: InputWindow<'_>) -> Result<Self> {
        let nu = terms.force.input_dim();
        for u in [inputs.prev, inputs.now, inputs.next] {
            check_len(nu, u.len())?;
        }
        let h = terms.h;
        let rate = |a: &[f64], b: &[f64]| -> Vec<f64> { sub(b, a).into_iter().map(|x| x / h).collect() };
        let vel_k = rate(q_prev, q_k);
        let boundary = terms.h2(q_k, &vel_k, inputs.now, &rate(inputs.prev, inputs.now))?;
        Ok(Self {
            terms,
            boundary,
            u_mid: inputs.now.iter().zip(inputs.next).map(|(a, b)| (a + b) * 0.5).collect(),
            u_rate: rate(inputs.now, inputs.next),
            u_next: inputs.next.to_vec(),
        })
    }

    /// Input held by the surrogate Lagrangian over this step.
    pub fn u_mid(&self) -> &[f64] {
        &self.u_mid
    }

    /// `(h/2)·(Ĥ₁ − Ḣ₂)` at the midpoint of `(q_k, x)`.
    fn interior<S: Scalar>(&self, q_k: &[S], x: &[S]) -> Result<Vec<S>> {
        let h = self.terms.h;
        let mid: Vec<S> = q_k.iter().zip(x).map(|(&a, &b)| (a + b) * 0.5).collect();
        let vel: Vec<S> = q_k.iter().zip(x).map(|(&a, &b)| (b - a) / h).collect();
        let u = lift::<S>(&self.u_mid);
        let udot = lift::<S>(&self.u_rate);
        let uddot = vec![S::zero(); udot.len()];
        let h1 = self.terms.h1(&mid, &vel, &u, &udot, &uddot)?;
        let h2_rate = self.terms.h2_rate(&mid, &vel, &u, &udot, &uddot)?;
        Ok(h1.into_iter().zip(h2_rate).map(|(a, b)| (a - b) * (h * 0.5)).collect())
    }
}

impl<L: Lagrangian, F: Force> DiscreteForcing for SurrogateForcing<'_, L, F> {
    fn minus(&self, q_k: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.interior(q_k, x)?.into_iter().zip(&self.boundary).map(|(a, b)| a - b).collect())
    }

    fn minus_jacobian(&self, q_k: &[f64], x: &[f64]) -> Result<Mat<f64>> {
        let n = x.len();
        let qk = constants(q_k);
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let xd: Vec<Dual<f64>> = x.iter().enumerate().map(|(i, &xi)| Dual::seed(xi, i == j)).collect();
            cols.push(derivatives(&self.interior(&qk, &xd)?));
        }
        Ok(Mat::from_fn(n, n, |i, j| cols[j][i]))
    }

    fn plus(&self, q_k: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let h = self.terms.h;
        let vel: Vec<f64> = q_k.iter().zip(x).map(|(a, b)| (b - a) / h).collect();
        let h2 = self.terms.h2(x, &vel, &self.u_next, &self.u_rate)?;
        Ok(self.interior(q_k, x)?.into_iter().zip(h2).map(|(a, b)| a + b).collect())
    }
}

/// `(F̂_d⁻, F̂_d⁺)` of the step `q_k → q_{k+1}` preceded by `q_{k−1}`.
pub fn surrogate_discrete_forces<L: Lagrangian, F: Force>(
    terms: &SurrogateForceTerms<L, F>,
    q_prev: &[f64],
    q_k: &[f64],
    q_next: &[f64],
    inputs: InputWindow<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let forcing = SurrogateForcing::new(terms, q_prev, q_k, inputs)?;
    Ok((forcing.minus(q_k, q_next)?, forcing.plus(q_k, q_next)?))
}

/// Starting point of the forced surrogate recursion: `p₀ = ∂L/∂q̇(q₀, q̇₀)` of the nominal
/// Lagrangian and the virtual previous configuration `q_{−1} = q₀ − h q̇₀`.
pub fn init_forced_surrogate<L: Lagrangian, F: Force>(terms: &SurrogateForceTerms<L, F>, initial: &ContinuousState) -> Result<(DiscreteState, Vec<f64>)> {
    let state = del::init_from_velocity(&terms.base, initial)?;
    let q_prev = initial.q.iter().zip(&initial.qdot).map(|(q, v)| q - terms.h * v).collect();
    Ok((state, q_prev))
}

/// One step of the forced surrogate integrator. Returns the new state; the caller keeps
/// `state.q` as the next step's `q_prev`.
pub fn step_forced_surrogate<L: Lagrangian, F: Force, P: Probe>(
    terms: &SurrogateForceTerms<L, F>,
    state: &DiscreteState,
    q_prev: &[f64],
    inputs: InputWindow<'_>,
    cfg: &IntegratorConfig,
    probe: &mut P,
) -> Result<DiscreteState> {
    check_len(terms.base.dim(), q_prev.len())?;
    let forcing = SurrogateForcing::new(terms, q_prev, &state.q, inputs)?;
    let lag = ForcedSurrogate::new(terms, forcing.u_mid())?;
    Ok(del::step(&lag, &forcing, None::<&NoConstraint>, state, None, cfg, probe)?.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NoForce, QuadraticLagrangian};
    use approx::assert_relative_eq;

    /// Linear damping `F = −C q̇`.
    struct Damping(f64);
    impl Force for Damping {
        fn dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, _q: &[S], v: &[S], _u: &[S]) -> Result<Vec<S>> {
            Ok(vec![v[0] * -self.0])
        }
    }

    #[test]
    fn damped_oscillator_force_terms_match_closed_form() {
        // Ĥ₁ = −Cq̇ − (h²/12)(KC/M) q̇ and Ĥ₂ = (h²/12)(KC/M) q.
        let (m, k, c, h) = (10.0, 3.0, 0.07, 0.2);
        let terms = SurrogateForceTerms::new(QuadraticLagrangian::scalar(m, k), Damping(c), StepSize::new(h).unwrap()).unwrap();
        let (q, v) = (0.6, -0.25);
        let h1 = terms.h1(&[q], &[v], &[], &[], &[]).unwrap();
        let h2 = terms.h2(&[q], &[v], &[], &[]).unwrap();
        assert_relative_eq!(h1[0], -c * v - h * h / 12.0 * k * c / m * v, epsilon = 1e-15);
        assert_relative_eq!(h2[0], h * h / 12.0 * k * c / m * q, epsilon = 1e-15);
    }

    #[test]
    fn h2_rate_is_the_time_derivative_along_the_flow() {
        // Ĥ₂ = (h²/12)(KC/M) q ⇒ dĤ₂/dt = (h²/12)(KC/M) q̇.
        let (m, k, c, h) = (10.0, 3.0, 0.07, 0.2);
        let terms = SurrogateForceTerms::new(QuadraticLagrangian::scalar(m, k), Damping(c), StepSize::new(h).unwrap()).unwrap();
        let rate = terms.h2_rate(&[0.6], &[-0.25], &[], &[], &[]).unwrap();
        assert_relative_eq!(rate[0], h * h / 12.0 * k * c / m * -0.25, epsilon = 1e-16);
    }

    #[test]
    fn zero_force_reduces_to_conservative_surrogate() {
        let lag = QuadraticLagrangian::scalar(1.0, 2.0);
        let h = StepSize::new(0.1).unwrap();
        let terms = SurrogateForceTerms::new(lag.clone(), NoForce { dim: 1 }, h).unwrap();
        let forced = ForcedSurrogate::new(&terms, &[]).unwrap();
        let plain = super::super::surrogate_conservative(lag, h);
        assert_eq!(forced.eval(&[0.3], &[0.9]).unwrap(), plain.eval(&[0.3], &[0.9]).unwrap());
        let (fm, fp) = surrogate_discrete_forces(&terms, &[0.2], &[0.3], &[0.4], InputWindow::NONE).unwrap();
        assert_eq!((fm, fp), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn boundary_terms_telescope() {
        // F̂_d⁺ of one step and F̂_d⁻ of the next share the same Ĥ₂ boundary term.
        let (m, k, c, h) = (10.0, 3.0, 0.07, 0.2);
        let terms = SurrogateForceTerms::new(QuadraticLagrangian::scalar(m, k), Damping(c), StepSize::new(h).unwrap()).unwrap();
        let (q0, q1) = ([0.5], [0.55]);
        let vel = [(q1[0] - q0[0]) / h];
        let expected = terms.h2(&q1, &vel, &[], &[]).unwrap();
        let next = SurrogateForcing::new(&terms, &q0, &q1, InputWindow::NONE).unwrap();
        assert_relative_eq!(next.boundary[0], expected[0], epsilon = 1e-18);
        let (_, plus) = surrogate_discrete_forces(&terms, &[0.45], &q0, &q1, InputWindow::NONE).unwrap();
        let interior = next.interior(&q0, &q1).unwrap();
        assert_relative_eq!(plus[0] - interior[0], expected[0], epsilon = 1e-16);
    }
}
