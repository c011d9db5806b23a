//! Half-explicit Runge–Kutta methods for holonomically constrained mechanical systems.
//!
//! The equations of motion are taken in index-2 form on `y = (q, v)`:
//!
//! `q̇ = v`,  `A v̇ = b(q, v) + F + Dc(q)ᵀλ`,  `0 = g(y) = Dc(q) v`,
//!
//! with `A = ∂²L/∂q̇²` and `b = ∂L/∂q − (∂²L/∂q̇∂q) q̇`. Stage `i` uses the multiplier `Λᵢ`
//! chosen so that the *next* stage `Yᵢ₊₁ = y₀ + h Σ_{j≤i} aᵢ₊₁,ⱼ f(Yⱼ, Λⱼ)` satisfies
//! `g(Yᵢ₊₁) = 0`; the weights `b` play the role of the row `s + 1`. `g` is affine in `Λᵢ`,
//! so each stage solve is a small linear system, solved with the shared Newton routine.
//!
//! The position constraint `c(q) = 0` is an invariant of the exact flow but drifts under
//! the discretization; each step ends with a projection of `q` back onto `c = 0` and of
//! `v` onto the tangent space there.

use super::tableau::{run_stages, ButcherTableau};
use super::{acceleration_parts, check_state};
use crate::del::{newton_solve, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, Lu};
use crate::model::{Constraint, ContinuousState, Force, Lagrangian};

/// Newton tolerance of the stage and projection solves.
pub const STAGE_TOLERANCE: f64 = 1e-10;

/// A half-explicit step's result.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfExplicitStep {
    pub state: ContinuousState,
    /// The last stage's multiplier.
    pub lambda: Vec<f64>,
    /// Largest `|Dc(Qᵢ)Vᵢ|∞` over the computed stages `i ≥ 2` and the unprojected result,
    /// evaluated directly on the stage vectors.
    pub max_stage_residual: f64,
}

fn degeneracy(e: Error) -> Error {
    match e {
        Error::SingularJacobian => Error::ConstraintDegeneracy,
        e => e,
    }
}

fn velocity_residual<C: Constraint>(constraint: &C, y: &[f64]) -> f64 {
    let (q, v) = y.split_at(constraint.dim());
    norm_inf(&constraint.jacobian(q).mul_vec(v))
}

/// Projects `q` onto `c(q) = 0` along `Dc(q)ᵀ` and then `v` orthogonally onto the tangent
/// space `Dc(q) v = 0`.
pub fn project_onto_manifold<C: Constraint>(constraint: &C, q: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = constraint.count();
    if m == 0 {
        return Ok((q.to_vec(), v.to_vec()));
    }
    let g0 = constraint.jacobian(q);
    let shifted = |mu: &[f64]| -> Vec<f64> { q.iter().zip(g0.tr_mul_vec(mu)).map(|(a, b)| a + b).collect() };
    let report = newton_solve(
        |mu| Ok(constraint.eval(&shifted(mu))),
        |mu| Ok(constraint.jacobian(&shifted(mu)).mul(&g0.transpose())),
        vec![0.0; m],
        STAGE_TOLERANCE,
        DEFAULT_MAX_ITER,
    )
    .map_err(degeneracy)?;
    let q_new = shifted(&report.x);
    let g = constraint.jacobian(&q_new);
    let gram = g.mul(&g.transpose());
    let nu = Lu::factor(&gram).map_err(degeneracy)?.solve(&g.mul_vec(v));
    let v_new = v.iter().zip(g.tr_mul_vec(&nu)).map(|(a, b)| a - b).collect();
    Ok((q_new, v_new))
}

/// One step of the half-explicit method given by `tableau`.
///
/// With no constraints (`constraint.count() == 0`) this is exactly the explicit step of
/// `tableau` on the first-order Euler–Lagrange system.
pub fn half_explicit_step<L, F, C>(tableau: &ButcherTableau, lag: &L, force: &F, constraint: &C, state: &ContinuousState, h: f64) -> Result<HalfExplicitStep>
where
    L: Lagrangian,
    F: Force,
    C: Constraint,
{
    check_state(lag, state)?;
    crate::error::check_len(lag.dim(), constraint.dim())?;
    let n = lag.dim();
    let m = constraint.count();
    let x: Vec<f64> = state.q.iter().chain(&state.qdot).copied().collect();
    let mut lambda = vec![0.0; m];
    let mut max_stage_residual = 0.0f64;
    let next = run_stages(tableau, &x, h, |i, stage, w, base| {
        let (q, v) = stage.split_at(n);
        let (lu, mut acc) = acceleration_parts(lag, force, q, v)?;
        if m > 0 {
            if i > 0 {
                max_stage_residual = max_stage_residual.max(velocity_residual(constraint, stage));
            }
            // Qᵢ₊₁ does not depend on Λᵢ; Vᵢ₊₁ = base_v + w·(acc + A⁻¹Dc(Qᵢ)ᵀΛᵢ).
            let q_next: Vec<f64> = base[..n].iter().zip(v).map(|(b, vi)| b + w * vi).collect();
            let g_next = constraint.jacobian(&q_next);
            let dct = constraint.jacobian(q).transpose();
            let push = lu.solve_mat(&dct);
            let v_of = |lam: &[f64]| -> Vec<f64> {
                let dv = push.mul_vec(lam);
                (0..n).map(|k| base[n + k] + w * (acc[k] + dv[k])).collect()
            };
            let jac = g_next.mul(&push).scale(w);
            let report = newton_solve(|lam| Ok(g_next.mul_vec(&v_of(lam))), |_| Ok(jac.clone()), lambda.clone(), STAGE_TOLERANCE, DEFAULT_MAX_ITER)
                .map_err(degeneracy)?;
            let dv = push.mul_vec(&report.x);
            for (a, d) in acc.iter_mut().zip(dv) {
                *a += d;
            }
            lambda = report.x;
        }
        Ok(v.iter().copied().chain(acc).collect())
    })?;
    if m > 0 {
        max_stage_residual = max_stage_residual.max(velocity_residual(constraint, &next));
    }
    let (q, v) = project_onto_manifold(constraint, &next[..n], &next[n..])?;
    Ok(HalfExplicitStep { state: ContinuousState::new(q, v, state.t + h)?, lambda, max_stage_residual })
}

/// Half-explicit step with the classical four-stage tableau.
pub fn herk4_step<L: Lagrangian, F: Force, C: Constraint>(lag: &L, force: &F, constraint: &C, state: &ContinuousState, h: f64) -> Result<HalfExplicitStep> {
    half_explicit_step(ButcherTableau::rk4(), lag, force, constraint, state, h)
}

/// Half-explicit step with the five-stage fourth-order tableau.
pub fn hem4_step<L: Lagrangian, F: Force, C: Constraint>(lag: &L, force: &F, constraint: &C, state: &ContinuousState, h: f64) -> Result<HalfExplicitStep> {
    half_explicit_step(ButcherTableau::hem4(), lag, force, constraint, state, h)
}
