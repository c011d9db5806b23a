//! Midpoint variational integrator in position–momentum form.
//!
//! The discrete Lagrangian is the midpoint rule
//! `L_d(q_k, q_{k+1}) = h · L((q_k + q_{k+1})/2, (q_{k+1} − q_k)/h)`. One step solves the
//! discrete Euler–Lagrange equation `p_k + D₁L_d(q_k, q_{k+1}) + F_d⁻ − Dc(q_k)ᵀλ = 0`
//! (together with `c(q_{k+1}) = 0` when constrained) for `q_{k+1}` by Newton's method,
//! then sets `p_{k+1} = D₂L_d(q_k, q_{k+1}) + F_d⁺`.

use std::time::{Duration, Instant};

use crate::error::{check_len, Error, Result};
use crate::linalg::{norm_inf, Lu, Mat};
use crate::model::{legendre_momentum, Constraint, ContinuousState, DiscreteState, Force, Gradient, Lagrangian, NoConstraint, StepSize};
use crate::oracle::jacobians3;
use crate::scalar::Scalar;

/// Default Newton tolerance on the ∞-norm of the residual.
pub const DEFAULT_EPS_TOL: f64 = 1e-9;
/// Default cap on Newton updates per step.
pub const DEFAULT_MAX_ITER: usize = 50;

/// Step size and Newton settings for the implicit steppers.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub h: StepSize,
    /// Newton stops once `‖residual‖∞ ≤ eps_tol`.
    pub eps_tol: f64,
    /// Newton fails with [`Error::NoConvergence`] after this many updates.
    pub max_iter: usize,
}

impl IntegratorConfig {
    /// Step `h` with the default tolerance and iteration cap.
    pub fn new(h: f64) -> Result<Self> {
        Ok(Self { h: StepSize::new(h)?, eps_tol: DEFAULT_EPS_TOL, max_iter: DEFAULT_MAX_ITER })
    }

    /// Replaces the Newton tolerance.
    pub fn with_eps_tol(mut self, eps_tol: f64) -> Result<Self> {
        if !(eps_tol.is_finite() && eps_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("eps_tol must be positive, got {eps_tol}")));
        }
        self.eps_tol = eps_tol;
        Ok(self)
    }

    pub fn h(&self) -> f64 {
        self.h.get()
    }
}

/// Observer of the work done inside a step.
///
/// The steppers report every evaluation of `D₁L_d` (one per residual) and of `D₂D₁L_d`
/// (one per Newton update), and the number of Newton updates per step. `()` ignores
/// everything at zero cost; [`StepStats`] counts and times.
pub trait Probe {
    /// Whether evaluations should be timed.
    fn timing(&self) -> bool {
        false
    }
    /// A `D₁L_d` evaluation finished, taking `elapsed` (zero when not timing).
    fn d1(&mut self, _elapsed: Duration) {}
    /// A `D₂D₁L_d` evaluation finished.
    fn d2d1(&mut self, _elapsed: Duration) {}
    /// A step converged after `iterations` Newton updates.
    fn step(&mut self, _iterations: usize) {}
}

impl Probe for () {}

/// Evaluation counters and timers for a run of steps.
///
/// For every converged step the residual is evaluated once more than the Jacobian (the
/// final evaluation certifies convergence), so after `steps` steps
/// `d1_evals == newton_iterations + steps` and `d2d1_evals == newton_iterations`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub steps: u64,
    pub newton_iterations: u64,
    pub d1_evals: u64,
    pub d2d1_evals: u64,
    pub d1_time: Duration,
    pub d2d1_time: Duration,
}

impl StepStats {
    /// Total time spent inside `D₁L_d` and `D₂D₁L_d`.
    pub fn derivative_time(&self) -> Duration {
        self.d1_time + self.d2d1_time
    }

    /// Whether the counters satisfy the per-step bookkeeping identities.
    pub fn reconciles(&self) -> bool {
        self.d2d1_evals == self.newton_iterations && self.d1_evals == self.newton_iterations + self.steps
    }
}

impl Probe for StepStats {
    fn timing(&self) -> bool {
        true
    }
    fn d1(&mut self, elapsed: Duration) {
        self.d1_evals += 1;
        self.d1_time += elapsed;
    }
    fn d2d1(&mut self, elapsed: Duration) {
        self.d2d1_evals += 1;
        self.d2d1_time += elapsed;
    }
    fn step(&mut self, iterations: usize) {
        self.steps += 1;
        self.newton_iterations += iterations as u64;
    }
}

/// Runs `f`, reporting its duration to `report` (zero when the probe does not time).
fn timed<P: Probe, T>(probe: &mut P, report: fn(&mut P, Duration), f: impl FnOnce() -> T) -> T {
    if probe.timing() {
        let start = Instant::now();
        let out = f();
        report(probe, start.elapsed());
        out
    } else {
        let out = f();
        report(probe, Duration::ZERO);
        out
    }
}

/// Midpoint and difference quotient of a step, lifted to `S`.
fn midpoint<S: Scalar>(q_k: &[S], q_next: &[S], h: f64) -> (Vec<S>, Vec<S>) {
    let mid = q_k.iter().zip(q_next).map(|(&a, &b)| (a + b) * 0.5).collect();
    let vel = q_k.iter().zip(q_next).map(|(&a, &b)| (b - a) / h).collect();
    (mid, vel)
}

/// Midpoint and difference quotient from the increment `Δ = q_{k+1} − q_k`.
///
/// The stepper iterates on `Δ` rather than on `q_{k+1}`: the difference quotient `Δ/h`
/// then carries the full precision of `Δ` instead of being quantized to `ulp(q)/h`,
/// which would otherwise put a floor of order `1e-12` under the residual at `h = 1e-4`.
fn increment_point(q_k: &[f64], delta: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let mid = q_k.iter().zip(delta).map(|(a, d)| a + d * 0.5).collect();
    let vel = delta.iter().map(|d| d / h).collect();
    (mid, vel)
}

/// `L_d(q_k, q_{k+1}) = h · L(midpoint, difference quotient)`.
pub fn discrete_lagrangian<L: Lagrangian, S: Scalar>(lag: &L, q_k: &[S], q_next: &[S], h: f64) -> Result<S> {
    let (mid, vel) = midpoint(q_k, q_next, h);
    Ok(lag.eval(&mid, &vel)? * h)
}

fn d1_from<S: Scalar>(g: &Gradient<S>, h: f64) -> Vec<S> {
    g.dq.iter().zip(&g.dv).map(|(&lq, &lv)| lq * (h * 0.5) - lv).collect()
}

fn d2_from<S: Scalar>(g: &Gradient<S>, h: f64) -> Vec<S> {
    g.dq.iter().zip(&g.dv).map(|(&lq, &lv)| lq * (h * 0.5) + lv).collect()
}

/// `D₁L_d = (h/2)·∂L/∂q − ∂L/∂q̇`, evaluated at the midpoint.
pub fn d1_ld<L: Lagrangian, S: Scalar>(lag: &L, q_k: &[S], q_next: &[S], h: f64) -> Result<Vec<S>> {
    let (mid, vel) = midpoint(q_k, q_next, h);
    Ok(d1_from(&lag.gradient(&mid, &vel)?, h))
}

/// `D₂L_d = (h/2)·∂L/∂q + ∂L/∂q̇`, evaluated at the midpoint.
pub fn d2_ld<L: Lagrangian, S: Scalar>(lag: &L, q_k: &[S], q_next: &[S], h: f64) -> Result<Vec<S>> {
    let (mid, vel) = midpoint(q_k, q_next, h);
    Ok(d2_from(&lag.gradient(&mid, &vel)?, h))
}

/// The Newton Jacobian `∂(D₁L_d)/∂q_{k+1}`:
/// `(h/4)·L_qq + ½·L_qq̇ − ½·L_q̇q − (1/h)·L_q̇q̇`, entry `(i, j)` differentiating the
/// `i`-th component of `D₁L_d` by `q_{k+1,j}`.
pub fn d2d1_ld<L: Lagrangian, S: Scalar>(lag: &L, q_k: &[S], q_next: &[S], h: f64) -> Result<Mat<S>> {
    let (mid, vel) = midpoint(q_k, q_next, h);
    d2d1_at(lag, &mid, &vel, h)
}

fn d2d1_at<L: Lagrangian, S: Scalar>(lag: &L, mid: &[S], vel: &[S], h: f64) -> Result<Mat<S>> {
    let p = lag.partials(mid, vel)?;
    let n = mid.len();
    Ok(Mat::from_fn(n, n, |i, j| {
        p.dqq[(i, j)] * (h * 0.25) + p.dvq[(j, i)] * 0.5 - p.dvq[(i, j)] * 0.5 - p.dvv[(i, j)] / h
    }))
}

/// Result of a converged Newton solve.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    /// Number of Newton updates performed (zero if the initial guess already converged).
    pub iterations: usize,
    /// ∞-norm of the residual at `x`.
    pub residual: f64,
}

/// Newton's method: starting from `x0`, repeat `x ← x − J(x)⁻¹ r(x)` until
/// `‖r(x)‖∞ ≤ eps_tol`.
///
/// Fails with [`Error::NoConvergence`] after `max_iter` updates, [`Error::SingularJacobian`]
/// on a vanishing pivot and [`Error::NonFiniteState`] if the residual stops being finite.
pub fn newton_solve<R, J>(mut residual: R, mut jacobian: J, x0: Vec<f64>, eps_tol: f64, max_iter: usize) -> Result<NewtonReport>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<Mat<f64>>,
{
    let mut x = x0;
    let mut iterations = 0;
    loop {
        let r = residual(&x)?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        let norm = norm_inf(&r);
        if norm <= eps_tol {
            return Ok(NewtonReport { x, iterations, residual: norm });
        }
        if iterations == max_iter {
            return Err(Error::NoConvergence { iterations, residual: norm });
        }
        let jac = jacobian(&x)?;
        if !jac.is_finite() {
            return Err(Error::NonFiniteState);
        }
        let dx = Lu::factor(&jac)?.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi -= di;
        }
        iterations += 1;
    }
}

/// Discrete forcing terms `F_d⁻(q_k, q_{k+1})` and `F_d⁺(q_k, q_{k+1})` of one step.
///
/// Implemented by the midpoint forcing of a continuous force ([`MidpointForcing`]) and
/// by the surrogate forcing of the surrogate module; [`NoForcing`] is the conservative case.
pub trait DiscreteForcing {
    /// True for the identically zero forcing; lets the stepper skip it entirely.
    fn is_zero(&self) -> bool {
        false
    }
    /// `F_d⁻` at the candidate `q_{k+1} = x`.
    fn minus(&self, q_k: &[f64], x: &[f64]) -> Result<Vec<f64>>;
    /// `∂F_d⁻/∂x`.
    fn minus_jacobian(&self, q_k: &[f64], x: &[f64]) -> Result<Mat<f64>>;
    /// `F_d⁺` at the converged `q_{k+1} = x`.
    fn plus(&self, q_k: &[f64], x: &[f64]) -> Result<Vec<f64>>;
}

/// No forcing.
#[derive(Copy, Clone, Debug, Default)]
pub struct NoForcing;

impl DiscreteForcing for NoForcing {
    fn is_zero(&self) -> bool {
        true
    }
    fn minus(&self, q_k: &[f64], _x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; q_k.len()])
    }
    fn minus_jacobian(&self, q_k: &[f64], _x: &[f64]) -> Result<Mat<f64>> {
        Ok(Mat::zeros(q_k.len(), q_k.len()))
    }
    fn plus(&self, q_k: &[f64], _x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; q_k.len()])
    }
}

/// Midpoint forcing `F_d± = (h/2)·F(midpoint, difference quotient, u_k)`.
#[derive(Clone, Debug)]
pub struct MidpointForcing<'a, F> {
    pub force: &'a F,
    pub u_k: &'a [f64],
    pub h: f64,
}

impl<F: Force> MidpointForcing<'_, F> {
    fn value(&self, q_k: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let (mid, vel) = midpoint(q_k, x, self.h);
        let f = self.force.eval(&mid, &vel, self.u_k)?;
        Ok(f.into_iter().map(|fi| fi * (self.h * 0.5)).collect())
    }
}

impl<F: Force> DiscreteForcing for MidpointForcing<'_, F> {
    fn minus(&self, q_k: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.value(q_k, x)
    }
    fn minus_jacobian(&self, q_k: &[f64], x: &[f64]) -> Result<Mat<f64>> {
        let (mid, vel) = midpoint(q_k, x, self.h);
        let jac = jacobians3(&mid, &vel, self.u_k, |q, v, u| self.force.eval(q, v, u))?;
        let h = self.h;
        Ok(jac.dq.scale(h * 0.25).add(&jac.dv.scale(0.5)))
    }
    fn plus(&self, q_k: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.value(q_k, x)
    }
}

/// `(F_d⁻, F_d⁺)` for one step of a forced system under the midpoint rule.
pub fn discrete_forces<F: Force>(force: &F, q_k: &[f64], q_next: &[f64], u_k: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(force.dim(), q_k.len())?;
    check_len(force.input_dim(), u_k.len())?;
    let forcing = MidpointForcing { force, u_k, h };
    Ok((forcing.minus(q_k, q_next)?, forcing.plus(q_k, q_next)?))
}

/// Outcome of one step of the general stepper.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: DiscreteState,
    /// Constraint multipliers `λ_k` (empty when unconstrained).
    pub lambda: Vec<f64>,
    /// Newton updates used.
    pub iterations: usize,
}

/// One step of the midpoint variational integrator, in full generality.
///
/// Solves for `(q_{k+1}, λ_k)`:
/// `p_k + D₁L_d(q_k, q_{k+1}) + F_d⁻ − Dc(q_k)ᵀλ_k = 0`, `c(q_{k+1}) = 0`,
/// seeded with `q_{k+1} = q_k` and `λ_k = lambda_seed` (zeros when `None`). The Newton
/// unknown is the increment `q_{k+1} − q_k`; the Jacobian is the same.
pub fn step<L, D, C, P>(
    lag: &L,
    forcing: &D,
    constraint: Option<&C>,
    state: &DiscreteState,
    lambda_seed: Option<&[f64]>,
    cfg: &IntegratorConfig,
    probe: &mut P,
) -> Result<StepOutcome>
where
    L: Lagrangian,
    D: DiscreteForcing,
    C: Constraint,
    P: Probe,
{
    let n = lag.dim();
    check_len(n, state.q.len())?;
    check_len(n, state.p.len())?;
    let h = cfg.h();
    let m = constraint.map_or(0, |c| c.count());
    let q_k = &state.q[..];
    let dc_k: Option<Mat<f64>> = constraint.map(|c| c.jacobian(q_k));

    let mut x0 = vec![0.0; n];
    match lambda_seed {
        Some(l) => {
            check_len(m, l.len())?;
            x0.extend_from_slice(l);
        }
        None => x0.resize(n + m, 0.0),
    }

    let mut last_grad: Option<Gradient<f64>> = None;
    let probe_cell = std::cell::RefCell::new(probe);
    let next_of = |delta: &[f64]| -> Vec<f64> { q_k.iter().zip(delta).map(|(a, d)| a + d).collect() };
    let residual = |z: &[f64]| -> Result<Vec<f64>> {
        let (delta, lambda) = z.split_at(n);
        let x = &next_of(delta)[..];
        let (mid, vel) = increment_point(q_k, delta, h);
        let g = timed(&mut **probe_cell.borrow_mut(), P::d1, || lag.gradient(&mid, &vel))?;
        let mut r: Vec<f64> = state.p.iter().zip(d1_from(&g, h)).map(|(p, d)| p + d).collect();
        if !forcing.is_zero() {
            for (ri, fi) in r.iter_mut().zip(forcing.minus(q_k, x)?) {
                *ri += fi;
            }
        }
        if let (Some(c), Some(dc)) = (constraint, &dc_k) {
            for (ri, gi) in r.iter_mut().zip(dc.tr_mul_vec(lambda)) {
                *ri -= gi;
            }
            r.extend(c.eval(x));
        }
        last_grad = Some(g);
        Ok(r)
    };
    let jacobian = |z: &[f64]| -> Result<Mat<f64>> {
        let delta = &z[..n];
        let x = &next_of(delta)[..];
        let (mid, vel) = increment_point(q_k, delta, h);
        let mut d2d1 = timed(&mut **probe_cell.borrow_mut(), P::d2d1, || d2d1_at(lag, &mid, &vel, h))?;
        if !forcing.is_zero() {
            d2d1 = d2d1.add(&forcing.minus_jacobian(q_k, x)?);
        }
        match (constraint, &dc_k) {
            (Some(c), Some(dc)) => {
                let mut jac = Mat::zeros(n + m, n + m);
                jac.set_block(0, 0, &d2d1);
                jac.set_block(0, n, &dc.transpose().scale(-1.0));
                jac.set_block(n, 0, &c.jacobian(x));
                Ok(jac)
            }
            _ => Ok(d2d1),
        }
    };
    let report = newton_solve(residual, jacobian, x0, cfg.eps_tol, cfg.max_iter).map_err(|e| match e {
        Error::SingularJacobian if m > 0 => Error::ConstraintDegeneracy,
        e => e,
    })?;
    let probe = probe_cell.into_inner();
    probe.step(report.iterations);

    let mut z = report.x;
    let lambda = z.split_off(n);
    let q_next = next_of(&z);
    let g = last_grad.expect("the residual is evaluated at the converged iterate");
    let mut p_next = d2_from(&g, h);
    if !forcing.is_zero() {
        for (pi, fi) in p_next.iter_mut().zip(forcing.plus(q_k, &q_next)?) {
            *pi += fi;
        }
    }
    let state = DiscreteState { q: q_next, p: p_next, t: state.t + h };
    if !state.is_finite() {
        return Err(Error::NonFiniteState);
    }
    Ok(StepOutcome { state, lambda, iterations: report.iterations })
}

/// One step of a conservative, unconstrained system.
pub fn step_unforced<L: Lagrangian>(lag: &L, state: &DiscreteState, cfg: &IntegratorConfig) -> Result<DiscreteState> {
    Ok(step(lag, &NoForcing, None::<&NoConstraint>, state, None, cfg, &mut ())?.state)
}

/// One step of a forced, unconstrained system with input `u_k` held over the step.
pub fn step_forced<L: Lagrangian, F: Force>(lag: &L, force: &F, state: &DiscreteState, u_k: &[f64], cfg: &IntegratorConfig) -> Result<DiscreteState> {
    check_len(lag.dim(), force.dim())?;
    check_len(force.input_dim(), u_k.len())?;
    let forcing = MidpointForcing { force, u_k, h: cfg.h() };
    Ok(step(lag, &forcing, None::<&NoConstraint>, state, None, cfg, &mut ())?.state)
}

/// One step of a constrained system, optionally forced by `(force, u_k)`.
///
/// Returns the new state and the multipliers `λ_k`; pass them back as `lambda_prev` to
/// seed the next step.
pub fn step_constrained<L: Lagrangian, F: Force, C: Constraint>(
    lag: &L,
    force: Option<(&F, &[f64])>,
    constraint: &C,
    state: &DiscreteState,
    lambda_prev: Option<&[f64]>,
    cfg: &IntegratorConfig,
) -> Result<(DiscreteState, Vec<f64>)> {
    check_len(lag.dim(), constraint.dim())?;
    let out = match force {
        Some((force, u_k)) => {
            check_len(force.input_dim(), u_k.len())?;
            let forcing = MidpointForcing { force, u_k, h: cfg.h() };
            step(lag, &forcing, Some(constraint), state, lambda_prev, cfg, &mut ())?
        }
        None => step(lag, &NoForcing, Some(constraint), state, lambda_prev, cfg, &mut ())?,
    };
    Ok((out.state, out.lambda))
}

/// Initial discrete state from a continuous one: `p₀ = ∂L/∂q̇ (q₀, q̇₀)`.
pub fn init_from_velocity<L: Lagrangian>(lag: &L, initial: &ContinuousState) -> Result<DiscreteState> {
    Ok(DiscreteState { q: initial.q.clone(), p: legendre_momentum(lag, initial)?, t: initial.t })
}

/// Discrete state at `t₁` from two configurations: `p₁ = D₂L_d(q₀, q₁)`.
pub fn init_from_pair<L: Lagrangian>(lag: &L, q0: &[f64], q1: &[f64], t1: f64, h: f64) -> Result<DiscreteState> {
    check_len(lag.dim(), q0.len())?;
    check_len(lag.dim(), q1.len())?;
    Ok(DiscreteState { q: q1.to_vec(), p: d2_ld(lag, q0, q1, h)?, t: t1 })
}

/// Number of steps of size `h` that fit in `[t0, t_final]`, tolerant to the rounding of
/// `(t_final − t0)/h` (so `150 / 0.05` counts 3000 steps, not 2999).
pub fn step_count(t0: f64, t_final: f64, h: f64) -> Result<usize> {
    let span = t_final - t0;
    if !(span.is_finite() && span >= 0.0) {
        return Err(Error::InvalidParameter(format!("final time {t_final} precedes start time {t0}")));
    }
    let ratio = span / h;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { ratio.floor() };
    Ok(n as usize)
}

/// Applies `stepper` `steps` times from `initial`, collecting every state including the
/// first. A failure at step `k` is reported as [`Error::StepFailed`] with `step = k`.
pub fn integrate<T, F>(initial: T, steps: usize, mut stepper: F) -> Result<Vec<T>>
where
    F: FnMut(usize, &T) -> Result<T>,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial);
    for k in 0..steps {
        let next = stepper(k, &out[k]).map_err(|e| Error::StepFailed { step: k, source: Box::new(e) })?;
        out.push(next);
    }
    Ok(out)
}
