//! Modified-Lagrangian operators `θ₂`, `θ₄`, `Φ₂`, `Φ₄` for quadratic Lagrangians.
//!
//! For a Lagrangian `L(x) = ½ xᵀ S x` over the stacked state `x = (q, q̇)` whose nominal
//! motion is linear, `q̈ = −W q` with `W = M⁻¹K`, every operator maps quadratic forms to
//! quadratic forms and can be evaluated exactly on the matrix `S`:
//!
//! - time differentiation along the motion `ẋ = J x`, `J = [[0, I], [−W, 0]]`, maps
//!   `S ↦ SJ + JᵀS`;
//! - higher derivatives of `q` are linear in `x`: `q̈ = −Wq`, `q⁽³⁾ = −Wq̇`, `q⁽⁴⁾ = W²q`,
//!   `q⁽⁵⁾ = W²q̇`;
//! - `θ₂(L) = L_q·q̈/8 + L_q̇·q⁽³⁾/24`;
//! - `θ₄(L) = L_q·q⁽⁴⁾/384 + L_q̇·q⁽⁵⁾/1920 + q̈ᵀL_qq q̈/128 + q̈ᵀL_qq̇ q⁽³⁾/192 + q⁽³⁾ᵀL_q̇q̇ q⁽³⁾/1152`;
//! - `Φ₂ = θ₂ − L̈/24` and `Φ₄ = θ₄ + 7 L⁽⁴⁾/5760`.
//!
//! The fourth-order surrogate is `L − h²Φ₂(L) − h⁴Φ₄(L) + h⁴Φ₂(Φ₂(L)) + (h⁴/24)·θ̈₂(L)`.

use crate::error::{Error, Result};
use crate::linalg::{Lu, Mat};
use crate::model::{Lagrangian, QuadraticLagrangian};

/// A quadratic form `½ xᵀ S x` over `x = (q, q̇)`, with `S` symmetric of size `2n`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub s: Mat<f64>,
}

impl QuadraticForm {
    fn n(&self) -> usize {
        self.s.rows() / 2
    }

    /// `½ xᵀ S x`.
    pub fn eval(&self, q: &[f64], v: &[f64]) -> f64 {
        let x: Vec<f64> = q.iter().chain(v).copied().collect();
        0.5 * self.s.bilinear(&x, &x)
    }

    /// The form of `½ q̇ᵀMq̇ − ½ qᵀKq`.
    pub fn from_mass_stiffness(m: &Mat<f64>, k: &Mat<f64>) -> Self {
        let n = m.rows();
        let mut s = Mat::zeros(2 * n, 2 * n);
        s.set_block(0, 0, &k.scale(-1.0));
        s.set_block(n, n, m);
        Self { s }
    }

    /// Recovers `(M, K)` when the form has no `q`–`q̇` coupling.
    pub fn mass_stiffness(&self) -> Result<(Mat<f64>, Mat<f64>)> {
        let n = self.n();
        let cross = self.s.block(0, n, n, n);
        if cross.max_abs() > 1e-12 * self.s.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::UnsupportedModel("form couples q and q̇".into()));
        }
        Ok((self.s.block(n, n, n, n), self.s.block(0, 0, n, n).scale(-1.0)))
    }

    fn add(&self, o: &Self) -> Self {
        Self { s: self.s.add(&o.s) }
    }

    fn scale(&self, c: f64) -> Self {
        Self { s: self.s.scale(c) }
    }
}

/// The nominal linear motion `q̈ = −Wq` the operators differentiate along.
struct Flow {
    n: usize,
    w: Mat<f64>,
}

impl Flow {
    /// `J` with `ẋ = J x`.
    fn generator(&self) -> Mat<f64> {
        let n = self.n;
        let mut j = Mat::zeros(2 * n, 2 * n);
        j.set_block(0, n, &Mat::identity(n));
        j.set_block(n, 0, &self.w.scale(-1.0));
        j
    }

    /// Time derivative of a form along the motion.
    fn dt(&self, f: &QuadraticForm) -> QuadraticForm {
        let j = self.generator();
        let sj = f.s.mul(&j);
        QuadraticForm { s: sj.add(&sj.transpose()) }
    }

    fn dt_n(&self, f: &QuadraticForm, times: usize) -> QuadraticForm {
        (0..times).fold(f.clone(), |acc, _| self.dt(&acc))
    }

    /// The `n × 2n` map `x ↦ q⁽ʳ⁾`.
    fn derivative_map(&self, r: usize) -> Mat<f64> {
        let n = self.n;
        // q⁽ʳ⁾ = (−W)^⌊r/2⌋ applied to q (r even) or q̇ (r odd).
        let mut p = Mat::identity(n);
        for _ in 0..r / 2 {
            p = self.w.scale(-1.0).mul(&p);
        }
        let mut e = Mat::zeros(n, 2 * n);
        e.set_block(0, if r % 2 == 0 { 0 } else { n }, &p);
        e
    }
}

/// Symmetric matrix of the quadratic `xᵀ A x` for a possibly non-symmetric `A`, in the
/// `½ xᵀ S x` convention (`S = A + Aᵀ`).
fn form_of(a: &Mat<f64>) -> QuadraticForm {
    QuadraticForm { s: a.add(&a.transpose()) }
}

fn theta2(flow: &Flow, f: &QuadraticForm) -> QuadraticForm {
    let n = flow.n;
    let s_q = f.s.block(0, 0, n, 2 * n);
    let s_v = f.s.block(n, 0, n, 2 * n);
    let a = s_q.transpose().mul(&flow.derivative_map(2)).scale(1.0 / 8.0).add(&s_v.transpose().mul(&flow.derivative_map(3)).scale(1.0 / 24.0));
    form_of(&a)
}

fn theta4(flow: &Flow, f: &QuadraticForm) -> QuadraticForm {
    let n = flow.n;
    let s_q = f.s.block(0, 0, n, 2 * n);
    let s_v = f.s.block(n, 0, n, 2 * n);
    let (e2, e3) = (flow.derivative_map(2), flow.derivative_map(3));
    let linear = s_q.transpose().mul(&flow.derivative_map(4)).scale(1.0 / 384.0).add(&s_v.transpose().mul(&flow.derivative_map(5)).scale(1.0 / 1920.0));
    let s_qq = f.s.block(0, 0, n, n);
    let s_qv = f.s.block(0, n, n, n);
    let s_vv = f.s.block(n, n, n, n);
    // ½·xᵀ(E₂ᵀS_qqE₂/64 + 2·E₂ᵀS_qq̇E₃/192 + E₃ᵀS_q̇q̇E₃/576)x, written as xᵀ A x.
    let quad = e2
        .transpose()
        .mul(&s_qq)
        .mul(&e2)
        .scale(1.0 / 128.0)
        .add(&e2.transpose().mul(&s_qv).mul(&e3).scale(1.0 / 192.0))
        .add(&e3.transpose().mul(&s_vv).mul(&e3).scale(1.0 / 1152.0));
    form_of(&linear.add(&quad))
}

fn phi2(flow: &Flow, f: &QuadraticForm) -> QuadraticForm {
    theta2(flow, f).add(&flow.dt_n(f, 2).scale(-1.0 / 24.0))
}

fn phi4(flow: &Flow, f: &QuadraticForm) -> QuadraticForm {
    theta4(flow, f).add(&flow.dt_n(f, 4).scale(7.0 / 5760.0))
}

/// `θ₂`, `θ₄`, `Φ₂`, `Φ₄` applied to a quadratic Lagrangian.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSet {
    pub theta2: QuadraticForm,
    pub theta4: QuadraticForm,
    pub phi2: QuadraticForm,
    pub phi4: QuadraticForm,
}

/// Extracts `(M, K)` from a Lagrangian, failing unless it is exactly
/// `½ q̇ᵀMq̇ − ½ qᵀKq`.
fn quadratic_parts<L: Lagrangian>(lag: &L) -> Result<QuadraticLagrangian> {
    let n = lag.dim();
    let zero = vec![0.0; n];
    let p = lag.partials(&zero, &zero)?;
    let unsupported = |why: &str| Error::UnsupportedModel(format!("operators need a quadratic Lagrangian without q–q̇ coupling: {why}"));
    if p.value.abs() > 0.0 || p.dq.iter().chain(&p.dv).any(|x| *x != 0.0) {
        return Err(unsupported("non-zero value or gradient at the origin"));
    }
    if p.dvq.max_abs() > 0.0 {
        return Err(unsupported("mixed second derivatives"));
    }
    let candidate = QuadraticLagrangian::new(p.dvv.clone(), p.dqq.scale(-1.0)).map_err(|_| unsupported("asymmetric Hessian"))?;
    // A quadratic is determined by its Hessian; probe a few points to rule out higher-order terms.
    for s in [0.3, -1.7, 2.9] {
        let q: Vec<f64> = (0..n).map(|i| s * (1.0 + i as f64 * 0.37)).collect();
        let v: Vec<f64> = (0..n).map(|i| s * (0.5 - i as f64 * 0.21)).collect();
        let (a, b) = (lag.eval(&q, &v)?, candidate.eval(&q, &v)?);
        if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
            return Err(unsupported("not quadratic"));
        }
    }
    Ok(candidate)
}

fn flow_of(lag: &QuadraticLagrangian) -> Result<Flow> {
    let lu = Lu::factor(lag.mass()).map_err(|_| Error::SingularMassMatrix)?;
    Ok(Flow { n: lag.dim(), w: lu.solve_mat(lag.stiffness()) })
}

/// The four operators applied to `lag`, which must be quadratic without `q`–`q̇` coupling.
pub fn higher_order_operators<L: Lagrangian>(lag: &L) -> Result<OperatorSet> {
    let quad = quadratic_parts(lag)?;
    let flow = flow_of(&quad)?;
    let f = QuadraticForm::from_mass_stiffness(quad.mass(), quad.stiffness());
    Ok(OperatorSet { theta2: theta2(&flow, &f), theta4: theta4(&flow, &f), phi2: phi2(&flow, &f), phi4: phi4(&flow, &f) })
}

/// The fourth-order surrogate `L − h²Φ₂(L) − h⁴Φ₄(L) + h⁴Φ₂(Φ₂(L)) + (h⁴/24)·θ̈₂(L)`.
pub fn fourth_order_surrogate<L: Lagrangian>(lag: &L, h: f64) -> Result<QuadraticForm> {
    let quad = quadratic_parts(lag)?;
    let flow = flow_of(&quad)?;
    let f = QuadraticForm::from_mass_stiffness(quad.mass(), quad.stiffness());
    let (h2, h4) = (h * h, h.powi(4));
    let p2 = phi2(&flow, &f);
    Ok(f.add(&p2.scale(-h2))
        .add(&phi4(&flow, &f).scale(-h4))
        .add(&phi2(&flow, &p2).scale(h4))
        .add(&flow.dt_n(&theta2(&flow, &f), 2).scale(h4 / 24.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StepSize;
    use crate::scalar::Scalar;
    use crate::surrogate::linear_surrogate;
    use approx::assert_relative_eq;

    #[test]
    fn phi2_of_oscillator_is_the_second_order_correction() {
        // −h²Φ₂(L) must equal (h²/24)(−K q̇² − K²q²/M) for L = ½Mq̇² − ½Kq².
        let (m, k) = (1.5, 2.0);
        let ops = higher_order_operators(&QuadraticLagrangian::scalar(m, k)).unwrap();
        let (q, v) = (0.4, -0.9);
        assert_relative_eq!(-ops.phi2.eval(&[q], &[v]), (-k * v * v - k * k * q * q / m) / 24.0, epsilon = 1e-15);
    }

    #[test]
    fn composition_matches_series_truncation() {
        let m = Mat::from_rows(&[vec![2.0, 0.2], vec![0.2, 1.0]]);
        let k = Mat::from_rows(&[vec![3.0, -1.0], vec![-1.0, 2.5]]);
        let lag = QuadraticLagrangian::new(m, k).unwrap();
        let h = 0.3;
        let (ms, ks) = fourth_order_surrogate(&lag, h).unwrap().mass_stiffness().unwrap();
        let series = linear_surrogate(&lag, StepSize::new(h).unwrap(), 4).unwrap();
        assert!(ms.sub(&series.m_s).max_abs() <= 1e-14 * series.m_s.max_abs());
        assert!(ks.sub(&series.k_s).max_abs() <= 1e-14 * series.k_s.max_abs());
    }

    struct Quartic;
    impl Lagrangian for Quartic {
        fn dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S> {
            Ok(v[0] * v[0] * 0.5 - q[0].powi(4))
        }
    }

    #[test]
    fn non_quadratic_lagrangian_is_rejected() {
        assert!(matches!(higher_order_operators(&Quartic), Err(Error::UnsupportedModel(_))));
    }
}
