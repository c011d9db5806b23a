//! The integrators the harness can run, and one simulation of a preset with one of them.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use svi::del::{self, DiscreteForcing, IntegratorConfig, MidpointForcing, NoForcing, Probe};
use svi::linalg::norm_inf;
use svi::model::{Constraint, ContinuousState, DiscreteState, Force, Lagrangian, NoConstraint, StepSize};
use svi::ref_integrators::{hem4_step, herk4_step, LagrangianOde};
use svi::surrogate::{init_forced_surrogate, linear_surrogate, step_forced_surrogate, surrogate_conservative, surrogate_constrained, InputWindow, SurrogateForceTerms};
use svi::systems::PresetSystem;

use crate::error::{BenchError, Result};
use crate::metrics::Trajectory;

/// Integrator identifiers as written in configs: `nominal-vi`, `surrogate-vi`,
/// `surrogate-vi,<order>`, `rk4`, `herk4`, `hem4`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntegratorId {
    NominalVi,
    /// `order: None` is the second-order surrogate of the system's kind (conservative,
    /// forced or constrained); `Some(k)` is the linear-series surrogate truncated at `hᵏ`.
    SurrogateVi { order: Option<u32> },
    Rk4,
    Herk4,
    Hem4,
}

impl IntegratorId {
    /// Whether this is one of the variational integrators.
    pub fn is_variational(self) -> bool {
        matches!(self, IntegratorId::NominalVi | IntegratorId::SurrogateVi { .. })
    }

    /// A file-name-safe form of the identifier.
    pub fn slug(self) -> String {
        self.to_string().replace(',', "-")
    }
}

impl fmt::Display for IntegratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegratorId::NominalVi => f.write_str("nominal-vi"),
            IntegratorId::SurrogateVi { order: None } => f.write_str("surrogate-vi"),
            IntegratorId::SurrogateVi { order: Some(k) } => write!(f, "surrogate-vi,{k}"),
            IntegratorId::Rk4 => f.write_str("rk4"),
            IntegratorId::Herk4 => f.write_str("herk4"),
            IntegratorId::Hem4 => f.write_str("hem4"),
        }
    }
}

impl FromStr for IntegratorId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || BenchError::Config(format!("unknown integrator `{s}`"));
        Ok(match s.trim() {
            "nominal-vi" => IntegratorId::NominalVi,
            "surrogate-vi" => IntegratorId::SurrogateVi { order: None },
            "rk4" => IntegratorId::Rk4,
            "herk4" => IntegratorId::Herk4,
            "hem4" => IntegratorId::Hem4,
            other => {
                let order = other.strip_prefix("surrogate-vi,").ok_or_else(unknown)?.trim().parse::<u32>().map_err(|_| unknown())?;
                if !matches!(order, 2 | 4 | 6 | 8) {
                    return Err(BenchError::Config(format!("surrogate order must be 2, 4, 6 or 8, got {order}")));
                }
                IntegratorId::SurrogateVi { order: Some(order) }
            }
        })
    }
}

impl Serialize for IntegratorId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Positions of one simulation and the largest constraint violation seen on the way.
#[derive(Clone, Debug, PartialEq)]
pub struct Run {
    pub trajectory: Trajectory,
    /// `max_k ‖c(q_k)‖∞`; zero for unconstrained systems.
    pub max_constraint_residual: f64,
}

/// Accumulates positions and constraint residuals step by step.
struct Recorder<'c, C> {
    constraint: Option<&'c C>,
    run: Run,
}

impl<'c, C: Constraint> Recorder<'c, C> {
    fn new(constraint: Option<&'c C>, t0: f64, h: f64, steps: usize) -> Self {
        let trajectory = Trajectory { t0, h, q: Vec::with_capacity(steps + 1) };
        Self { constraint, run: Run { trajectory, max_constraint_residual: 0.0 } }
    }

    fn push(&mut self, q: &[f64]) {
        if let Some(c) = self.constraint {
            self.run.max_constraint_residual = self.run.max_constraint_residual.max(norm_inf(&c.eval(q)));
        }
        self.run.trajectory.q.push(q.to_vec());
    }
}

/// Integrates `system` with `id` and step `h` up to `t_final`, reporting variational
/// steps to `probe`.
///
/// Every variational integrator starts from the nominal momentum `p₀ = ∂L/∂q̇(q₀, q̇₀)`,
/// surrogates included.
pub fn simulate<P: Probe>(system: &PresetSystem, id: IntegratorId, h: f64, t_final: f64, eps_tol: f64, probe: &mut P) -> Result<Run> {
    let step_err = |source: svi::Error| BenchError::Step { integrator: id.to_string(), h, source };
    let config_err = |source: svi::Error| BenchError::Config(format!("{id} at h = {h}: {source}"));
    let cfg = IntegratorConfig::new(h).and_then(|c| c.with_eps_tol(eps_tol)).map_err(config_err)?;
    let h_size = StepSize::new(h).map_err(config_err)?;
    let unsupported = |what: &str| BenchError::Config(format!("{id} does not apply to {what}"));

    match system {
        PresetSystem::Linear(s) => {
            let steps = del::step_count(s.initial.t, t_final, h).map_err(config_err)?;
            let none = NoConstraint { dim: s.dim() };
            match id {
                IntegratorId::NominalVi => vi(&s.lagrangian, &s.lagrangian, &NoForcing, None::<&NoConstraint>, &s.initial, steps, &cfg, probe),
                IntegratorId::SurrogateVi { order: None } => {
                    vi(&s.lagrangian, &surrogate_conservative(&s.lagrangian, h_size), &NoForcing, None::<&NoConstraint>, &s.initial, steps, &cfg, probe)
                }
                IntegratorId::SurrogateVi { order: Some(k) } => {
                    let lag = linear_surrogate(&s.lagrangian, h_size, k).and_then(|p| p.lagrangian()).map_err(config_err)?;
                    vi(&s.lagrangian, &lag, &NoForcing, None::<&NoConstraint>, &s.initial, steps, &cfg, probe)
                }
                _ => explicit(id, &s.lagrangian, &s.force, &none, &s.initial, steps, h),
            }
            .map_err(step_err)
        }
        PresetSystem::Damped(s) => {
            let steps = del::step_count(s.initial.t, t_final, h).map_err(config_err)?;
            let none = NoConstraint { dim: s.dim() };
            match id {
                IntegratorId::NominalVi => {
                    let forcing = MidpointForcing { force: &s.force, u_k: &[], h };
                    vi(&s.lagrangian, &s.lagrangian, &forcing, None::<&NoConstraint>, &s.initial, steps, &cfg, probe)
                }
                IntegratorId::SurrogateVi { order: None } => forced_surrogate(&s.lagrangian, &s.force, h_size, &s.initial, steps, &cfg, probe),
                IntegratorId::SurrogateVi { order: Some(_) } => return Err(unsupported("damped systems (series surrogates are conservative only)")),
                _ => explicit(id, &s.lagrangian, &s.force, &none, &s.initial, steps, h),
            }
            .map_err(step_err)
        }
        PresetSystem::Pendulum(s) => {
            let steps = del::step_count(s.initial.t, t_final, h).map_err(config_err)?;
            match id {
                IntegratorId::NominalVi => vi(&s.lagrangian, &s.lagrangian, &NoForcing, Some(&s.constraint), &s.initial, steps, &cfg, probe),
                IntegratorId::SurrogateVi { order: None } => {
                    let lag = surrogate_constrained(&s.lagrangian, &s.constraint, h_size).map_err(config_err)?;
                    vi(&s.lagrangian, &lag, &NoForcing, Some(&s.constraint), &s.initial, steps, &cfg, probe)
                }
                IntegratorId::SurrogateVi { order: Some(_) } => return Err(unsupported("constrained systems (series surrogates are unconstrained only)")),
                IntegratorId::Rk4 => return Err(unsupported("constrained systems; use herk4 or hem4")),
                _ => explicit(id, &s.lagrangian, &s.force, &s.constraint, &s.initial, steps, h),
            }
            .map_err(step_err)
        }
    }
}

/// A variational run of `lag` started from the nominal momentum of `nominal`.
#[allow(clippy::too_many_arguments)]
fn vi<N, L, D, C, P>(nominal: &N, lag: &L, forcing: &D, constraint: Option<&C>, initial: &ContinuousState, steps: usize, cfg: &IntegratorConfig, probe: &mut P) -> svi::Result<Run>
where
    N: Lagrangian,
    L: Lagrangian,
    D: DiscreteForcing,
    C: Constraint,
    P: Probe,
{
    let mut rec = Recorder::new(constraint, initial.t, cfg.h(), steps);
    let mut state = del::init_from_velocity(nominal, initial)?;
    let mut lambda: Option<Vec<f64>> = None;
    rec.push(&state.q);
    for k in 0..steps {
        let out = del::step(lag, forcing, constraint, &state, lambda.as_deref(), cfg, probe).map_err(|e| failed(k, e))?;
        state = out.state;
        lambda = Some(out.lambda);
        rec.push(&state.q);
    }
    Ok(rec.run)
}

/// The forced surrogate recursion, which carries the previous configuration along.
fn forced_surrogate<L, F, P>(lag: &L, force: &F, h: StepSize, initial: &ContinuousState, steps: usize, cfg: &IntegratorConfig, probe: &mut P) -> svi::Result<Run>
where
    L: Lagrangian,
    F: Force,
    P: Probe,
{
    let terms = SurrogateForceTerms::new(lag, force, h)?;
    let mut rec = Recorder::new(None::<&NoConstraint>, initial.t, h.get(), steps);
    let (mut state, mut q_prev): (DiscreteState, Vec<f64>) = init_forced_surrogate(&terms, initial)?;
    rec.push(&state.q);
    for k in 0..steps {
        let next = step_forced_surrogate(&terms, &state, &q_prev, InputWindow::NONE, cfg, probe).map_err(|e| failed(k, e))?;
        q_prev = std::mem::replace(&mut state, next).q;
        rec.push(&state.q);
    }
    Ok(rec.run)
}

/// Explicit and half-explicit Runge–Kutta runs.
fn explicit<L, F, C>(id: IntegratorId, lag: &L, force: &F, constraint: &C, initial: &ContinuousState, steps: usize, h: f64) -> svi::Result<Run>
where
    L: Lagrangian,
    F: Force,
    C: Constraint,
{
    let constrained = constraint.count() > 0;
    let mut rec = Recorder::new(constrained.then_some(constraint), initial.t, h, steps);
    let ode = LagrangianOde::new(lag, force);
    let mut state = initial.clone();
    rec.push(&state.q);
    for k in 0..steps {
        state = match id {
            IntegratorId::Rk4 => ode.rk4_step(&state, h),
            IntegratorId::Herk4 => herk4_step(lag, force, constraint, &state, h).map(|r| r.state),
            IntegratorId::Hem4 => hem4_step(lag, force, constraint, &state, h).map(|r| r.state),
            _ => unreachable!("variational integrators are dispatched to `vi`"),
        }
        .map_err(|e| failed(k, e))?;
        rec.push(&state.q);
    }
    Ok(rec.run)
}

fn failed(step: usize, source: svi::Error) -> svi::Error {
    svi::Error::StepFailed { step, source: Box::new(source) }
}
