//! Forward-mode derivative oracle.
//!
//! Derivatives are taken with respect to the stacked variable `x = (q, q̇)` of length `2n`.
//! First partials cost `2n` dual evaluations; second partials cost one `Dual<Dual<_>>`
//! evaluation per unordered index pair; full tensors up to fourth order use four nested
//! dual levels with one seeded infinitesimal per index of the tuple.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{check_point, Constraint, Gradient, Lagrangian, Partials};
use crate::scalar::{Dual, Scalar};

/// Highest total derivative order the oracle provides.
pub const MAX_ORDER: usize = 4;

fn finite<S: Scalar>(x: S) -> Result<S> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFiniteDerivative)
    }
}

/// Splits the stacked index `k < 2n` into a seeded copy of `(q, q̇)`.
fn seeded<S: Scalar>(q: &[S], v: &[S], k: usize) -> (Vec<Dual<S>>, Vec<Dual<S>>) {
    let n = q.len();
    let qd = q.iter().enumerate().map(|(i, &x)| Dual::seed(x, k == i)).collect();
    let vd = v.iter().enumerate().map(|(i, &x)| Dual::seed(x, k == n + i)).collect();
    (qd, vd)
}

/// Value and first partials of `lag` by `2n` dual evaluations.
pub fn auto_gradient<L: Lagrangian + ?Sized, S: Scalar>(lag: &L, q: &[S], v: &[S]) -> Result<Gradient<S>> {
    check_point(lag, q, v)?;
    let n = q.len();
    if n == 0 {
        return Ok(Gradient { value: finite(lag.eval(q, v)?)?, dq: vec![], dv: vec![] });
    }
    let mut value = S::zero();
    let mut d = Vec::with_capacity(2 * n);
    for k in 0..2 * n {
        let (qd, vd) = seeded(q, v, k);
        let f = lag.eval(&qd, &vd)?;
        value = finite(f.re)?;
        d.push(finite(f.du)?);
    }
    let dv = d.split_off(n);
    Ok(Gradient { value, dq: d, dv })
}

/// Value, first and second partials of `lag` by one `Dual<Dual<S>>` evaluation per
/// unordered pair of stacked indices.
pub fn auto_partials<L: Lagrangian + ?Sized, S: Scalar>(lag: &L, q: &[S], v: &[S]) -> Result<Partials<S>> {
    check_point(lag, q, v)?;
    let n = q.len();
    let m = 2 * n;
    let x: Vec<S> = q.iter().chain(v).copied().collect();
    let mut hess = Mat::<S>::zeros(m, m);
    let mut grad = vec![S::zero(); m];
    let mut value = finite(if n == 0 { lag.eval(q, v)? } else { S::zero() })?;
    for a in 0..m {
        for b in a..m {
            let xd: Vec<Dual<Dual<S>>> = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| Dual::new(Dual::seed(xi, i == a), Dual::from_f64(if i == b { 1.0 } else { 0.0 })))
                .collect();
            let f = lag.eval(&xd[..n], &xd[n..])?;
            let h = finite(f.du.du)?;
            hess[(a, b)] = h;
            hess[(b, a)] = h;
            if a == b {
                value = finite(f.re.re)?;
                grad[a] = finite(f.re.du)?;
            }
        }
    }
    let dv = grad.split_off(n);
    Ok(Partials {
        value,
        dq: grad,
        dv,
        dqq: hess.block(0, 0, n, n),
        dvv: hess.block(n, n, n, n),
        dvq: hess.block(n, 0, n, n),
    })
}

/// Constraint Jacobian by one dual evaluation per coordinate.
pub fn auto_constraint_jacobian<C: Constraint + ?Sized, S: Scalar>(c: &C, q: &[S]) -> Mat<S> {
    let (m, n) = (c.count(), q.len());
    let mut jac = Mat::zeros(m, n);
    for j in 0..n {
        let qd: Vec<Dual<S>> = q.iter().enumerate().map(|(i, &x)| Dual::seed(x, i == j)).collect();
        for (i, ci) in c.eval(&qd).into_iter().enumerate() {
            jac[(i, j)] = ci.du;
        }
    }
    jac
}

/// Constraint Hessians by one `Dual<Dual<S>>` evaluation per unordered coordinate pair.
pub fn auto_constraint_hessians<C: Constraint + ?Sized, S: Scalar>(c: &C, q: &[S]) -> Vec<Mat<S>> {
    let (m, n) = (c.count(), q.len());
    let mut out = vec![Mat::zeros(n, n); m];
    for a in 0..n {
        for b in a..n {
            let qd: Vec<Dual<Dual<S>>> = q
                .iter()
                .enumerate()
                .map(|(i, &x)| Dual::new(Dual::seed(x, i == a), Dual::from_f64(if i == b { 1.0 } else { 0.0 })))
                .collect();
            for (k, ck) in c.eval(&qd).into_iter().enumerate() {
                out[k][(a, b)] = ck.du.du;
                out[k][(b, a)] = ck.du.du;
            }
        }
    }
    out
}

/// Full derivative tensors of a Lagrangian at one point, orders `0..=order`.
///
/// Tensors are indexed over the stacked variable `(q, q̇)` and stored densely in row-major
/// order; they are symmetric by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeTensors {
    vars: usize,
    tensors: Vec<Vec<f64>>,
}

impl DerivativeTensors {
    /// Length of the stacked variable, `2n`.
    pub fn vars(&self) -> usize {
        self.vars
    }

    /// Highest order stored.
    pub fn order(&self) -> usize {
        self.tensors.len() - 1
    }

    /// The function value.
    pub fn value(&self) -> f64 {
        self.tensors[0][0]
    }

    /// The dense order-`d` tensor.
    pub fn tensor(&self, d: usize) -> &[f64] {
        &self.tensors[d]
    }

    /// `∂^d f / ∂x_{i₁} … ∂x_{i_d}` for `idx = [i₁, …, i_d]`.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.tensors[idx.len()][flat(idx, self.vars)]
    }
}

fn flat(idx: &[usize], vars: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * vars + i)
}

type D1 = Dual<f64>;
type D2 = Dual<D1>;
type D3 = Dual<D2>;
type D4 = Dual<D3>;

/// A stacked variable lifted to four nested dual levels, level `l` seeded when `flags[l]`.
fn lift4(x: f64, flags: [bool; 4]) -> D4 {
    let one = |b: bool| if b { 1.0 } else { 0.0 };
    let d1 = D1::new(x, one(flags[0]));
    let d2 = D2::new(d1, D1::from_f64(one(flags[1])));
    let d3 = D3::new(d2, D2::from_f64(one(flags[2])));
    D4::new(d3, D3::from_f64(one(flags[3])))
}

/// Coefficient of `ε₁⋯ε_d` in a four-level dual.
fn mixed_part(r: &D4, d: usize) -> f64 {
    match d {
        0 => r.re.re.re.re,
        1 => r.re.re.re.du,
        2 => r.re.re.du.du,
        3 => r.re.du.du.du,
        _ => r.du.du.du.du,
    }
}

/// All derivative tensors of `lag` up to total order `order ≤ 4` at `(q, q̇)`.
///
/// Each non-decreasing index tuple is evaluated once with one infinitesimal per tuple
/// entry; the remaining entries of each tensor are filled by symmetry.
#[allow(clippy::needless_range_loop)]
pub fn derivative_tensors<L: Lagrangian>(lag: &L, q: &[f64], v: &[f64], order: usize) -> Result<DerivativeTensors> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    check_point(lag, q, v)?;
    let n = q.len();
    let vars = 2 * n;
    let x: Vec<f64> = q.iter().chain(v).copied().collect();
    let mut tensors = Vec::with_capacity(order + 1);
    for d in 0..=order {
        let len = vars.pow(d as u32);
        let mut t = vec![f64::NAN; len];
        let mut idx = vec![0usize; d];
        for k in 0..len {
            let mut r = k;
            for slot in idx.iter_mut().rev() {
                *slot = r % vars;
                r /= vars;
            }
            if idx.windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
            let xd: Vec<D4> = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| {
                    let mut flags = [false; 4];
                    for (l, &j) in idx.iter().enumerate() {
                        flags[l] = j == i;
                    }
                    lift4(xi, flags)
                })
                .collect();
            let val = mixed_part(&lag.eval(&xd[..n], &xd[n..])?, d);
            t[k] = finite(val)?;
        }
        for k in 0..len {
            if t[k].is_nan() {
                let mut r = k;
                for slot in idx.iter_mut().rev() {
                    *slot = r % vars;
                    r /= vars;
                }
                idx.sort_unstable();
                t[k] = t[flat(&idx, vars)];
            }
        }
        tensors.push(t);
    }
    Ok(DerivativeTensors { vars, tensors })
}

/// Value and Jacobian blocks `∂G/∂q`, `∂G/∂q̇`, `∂G/∂u` of a vector-valued map `G(q, q̇, u)`.
pub struct Jacobians<S> {
    pub value: Vec<S>,
    pub dq: Mat<S>,
    pub dv: Mat<S>,
    pub du: Mat<S>,
}

/// Jacobians of `g` with respect to each of its three vector arguments, one dual
/// evaluation per scalar argument.
pub fn jacobians3<S, G>(q: &[S], v: &[S], u: &[S], g: G) -> Result<Jacobians<S>>
where
    S: Scalar,
    G: Fn(&[Dual<S>], &[Dual<S>], &[Dual<S>]) -> Result<Vec<Dual<S>>>,
{
    let (n, nu) = (q.len(), u.len());
    let total = 2 * n + nu;
    let mut cols: Vec<Vec<S>> = Vec::with_capacity(total);
    let mut value = None;
    for k in 0..total {
        let qd: Vec<Dual<S>> = q.iter().enumerate().map(|(i, &x)| Dual::seed(x, k == i)).collect();
        let vd: Vec<Dual<S>> = v.iter().enumerate().map(|(i, &x)| Dual::seed(x, k == n + i)).collect();
        let ud: Vec<Dual<S>> = u.iter().enumerate().map(|(i, &x)| Dual::seed(x, k == 2 * n + i)).collect();
        let r = g(&qd, &vd, &ud)?;
        if value.is_none() {
            value = Some(r.iter().map(|d| d.re).collect::<Vec<S>>());
        }
        cols.push(r.iter().map(|d| d.du).collect());
    }
    let value = match value {
        Some(v) => v,
        None => g(&crate::scalar::constants(q), &crate::scalar::constants(v), &crate::scalar::constants(u))?
            .iter()
            .map(|d| d.re)
            .collect(),
    };
    let m = value.len();
    let block = |start: usize, width: usize| Mat::from_fn(m, width, |i, j| cols[start + j][i]);
    Ok(Jacobians { dq: block(0, n), dv: block(n, n), du: block(2 * n, nu), value })
}
