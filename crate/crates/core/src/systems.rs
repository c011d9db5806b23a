//! The benchmark systems: linear oscillators with closed-form solutions, a damped
//! oscillator, and point-mass pendula in Cartesian coordinates held together by
//! holonomic length constraints.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Mat};
use crate::model::{Constraint, ContinuousState, Force, Gradient, Lagrangian, NoConstraint, NoForce, Partials, QuadraticLagrangian};
use crate::scalar::Scalar;

/// Largest constraint residual accepted in an initial state.
pub const INITIAL_CONSTRAINT_TOLERANCE: f64 = 1e-12;

/// A named parameter of a system, kept as given so presets can be compared verbatim.
#[derive(Clone, Debug, PartialEq)]
pub enum Parameter {
    Scalar(f64),
    Matrix(Mat<f64>),
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parameter::Scalar(x) => write!(f, "{x}"),
            Parameter::Matrix(m) => {
                let rows: Vec<String> = (0..m.rows()).map(|i| m.row(i).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" & ")).collect();
                write!(f, "{}", rows.join(" \\\\ "))
            }
        }
    }
}

/// Closed-form position trajectories `q_a(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticSolution {
    /// `q₀ cos ωt + (q̇₀/ω) sin ωt`.
    Harmonic { omega: f64, q0: f64, v0: f64 },
    /// `q(t) = Φ η(t)` with independent modal oscillators `η̈ᵢ = −λᵢ ηᵢ`.
    Modal { shapes: Mat<f64>, eigenvalues: Vec<f64>, eta0: Vec<f64>, etadot0: Vec<f64> },
    /// `e^{−αt}(q₀ cos ω_d t + ((q̇₀ + αq₀)/ω_d) sin ω_d t)`.
    Underdamped { alpha: f64, omega_d: f64, q0: f64, v0: f64 },
}

/// Solution of `η̈ = −λη` for any sign of `λ`.
fn mode(lambda: f64, eta0: f64, etadot0: f64, t: f64) -> f64 {
    if lambda > 0.0 {
        let w = lambda.sqrt();
        eta0 * (w * t).cos() + etadot0 / w * (w * t).sin()
    } else if lambda < 0.0 {
        let w = (-lambda).sqrt();
        eta0 * (w * t).cosh() + etadot0 / w * (w * t).sinh()
    } else {
        eta0 + etadot0 * t
    }
}

impl AnalyticSolution {
    pub fn position(&self, t: f64) -> Vec<f64> {
        match self {
            AnalyticSolution::Harmonic { omega, q0, v0 } => vec![mode(omega * omega, *q0, *v0, t)],
            AnalyticSolution::Modal { shapes, eigenvalues, eta0, etadot0 } => {
                let eta: Vec<f64> = (0..eigenvalues.len()).map(|i| mode(eigenvalues[i], eta0[i], etadot0[i], t)).collect();
                shapes.mul_vec(&eta)
            }
            AnalyticSolution::Underdamped { alpha, omega_d, q0, v0 } => {
                let (s, c) = (omega_d * t).sin_cos();
                vec![(-alpha * t).exp() * (q0 * c + (v0 + alpha * q0) / omega_d * s)]
            }
        }
    }
}

/// A test system: Lagrangian, optional force and constraints, initial state and, where
/// one exists, the analytic trajectory.
#[derive(Clone, Debug)]
pub struct SystemSpec<L, F, C> {
    pub name: String,
    pub lagrangian: L,
    pub force: F,
    pub constraint: C,
    pub initial: ContinuousState,
    pub parameters: BTreeMap<String, Parameter>,
    pub analytic: Option<AnalyticSolution>,
}

impl<L: Lagrangian, F: Force, C: Constraint> SystemSpec<L, F, C> {
    pub fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    /// `q_a(t)`, or `UnsupportedRegime` when the system has no closed-form solution.
    pub fn analytic_position(&self, t: f64) -> Result<Vec<f64>> {
        self.analytic
            .as_ref()
            .map(|a| a.position(t))
            .ok_or_else(|| Error::UnsupportedRegime(format!("{} has no analytic solution", self.name)))
    }

    pub fn parameter(&self, key: &str) -> Option<&Parameter> {
        self.parameters.get(key)
    }
}

/// An unforced, unconstrained linear system.
pub type LinearSystem = SystemSpec<QuadraticLagrangian, NoForce, NoConstraint>;
/// A linear system under linear viscous damping.
pub type DampedSystem = SystemSpec<QuadraticLagrangian, LinearDamping, NoConstraint>;
/// Point masses held by rigid links.
pub type PendulumSystem = SystemSpec<PointMasses, NoForce, PendulumChain>;

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
    }
}

fn scalars(pairs: &[(&str, f64)]) -> BTreeMap<String, Parameter> {
    pairs.iter().map(|(k, v)| (k.to_string(), Parameter::Scalar(*v))).collect()
}

/// `L = ½Mq̇² − ½Kq²` with `q_a(t) = q₀ cos ωt + (q̇₀/ω) sin ωt`, `ω = √(K/M)`.
pub fn harmonic_oscillator(m: f64, k: f64, q0: f64, qdot0: f64) -> Result<LinearSystem> {
    positive("M", m)?;
    positive("K", k)?;
    Ok(SystemSpec {
        name: "harmonic-1dof".into(),
        lagrangian: QuadraticLagrangian::scalar(m, k),
        force: NoForce { dim: 1 },
        constraint: NoConstraint { dim: 1 },
        initial: ContinuousState::new(vec![q0], vec![qdot0], 0.0)?,
        parameters: scalars(&[("M", m), ("K", k)]),
        analytic: Some(AnalyticSolution::Harmonic { omega: (k / m).sqrt(), q0, v0: qdot0 }),
    })
}

fn to_na(a: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn from_na(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Modal decomposition of `Mq̈ = −Kq`: `Φ` with `ΦᵀMΦ = I`, `ΦᵀKΦ = diag(λ)`.
fn modes(m: &Mat<f64>, k: &Mat<f64>) -> Result<(Mat<f64>, Vec<f64>)> {
    let chol = to_na(m).cholesky().ok_or_else(|| Error::InvalidParameter("M must be symmetric positive definite".into()))?;
    let l_inv = chol.l().try_inverse().ok_or_else(|| Error::InvalidParameter("M must be symmetric positive definite".into()))?;
    let reduced = &l_inv * to_na(k) * l_inv.transpose();
    let eig = SymmetricEigen::new((&reduced + reduced.transpose()) * 0.5);
    let shapes = l_inv.transpose() * eig.eigenvectors;
    Ok((from_na(&shapes), eig.eigenvalues.iter().copied().collect()))
}

/// `L = ½q̇ᵀMq̇ − ½qᵀKq` with its modal closed-form solution.
pub fn linear_ndof(m: Mat<f64>, k: Mat<f64>, initial: ContinuousState) -> Result<LinearSystem> {
    check_len(m.rows(), initial.dim())?;
    let lag = QuadraticLagrangian::new(m.clone(), k.clone())?;
    let (shapes, eigenvalues) = modes(&m, &k)?;
    // η = ΦᵀM q.
    let project = |x: &[f64]| shapes.tr_mul_vec(&m.mul_vec(x));
    let analytic = AnalyticSolution::Modal { eta0: project(&initial.q), etadot0: project(&initial.qdot), shapes, eigenvalues };
    let n = m.rows();
    let parameters = [("M".to_string(), Parameter::Matrix(m)), ("K".to_string(), Parameter::Matrix(k))].into_iter().collect();
    Ok(SystemSpec {
        name: format!("linear-{n}dof"),
        lagrangian: lag,
        force: NoForce { dim: n },
        constraint: NoConstraint { dim: n },
        initial,
        parameters,
        analytic: Some(analytic),
    })
}

/// Viscous damping `F(q, q̇) = −C q̇`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDamping {
    c: Mat<f64>,
}

impl LinearDamping {
    pub fn new(c: Mat<f64>) -> Result<Self> {
        if !c.is_square() || !c.is_finite() {
            return Err(Error::InvalidParameter("damping matrix must be square and finite".into()));
        }
        Ok(Self { c })
    }

    pub fn scalar(c: f64) -> Self {
        Self { c: Mat::diagonal(&[c]) }
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.c
    }
}

impl Force for LinearDamping {
    fn dim(&self) -> usize {
        self.c.rows()
    }

    fn eval<S: Scalar>(&self, q: &[S], v: &[S], _u: &[S]) -> Result<Vec<S>> {
        check_len(self.dim(), q.len())?;
        check_len(self.dim(), v.len())?;
        Ok((0..self.dim()).map(|i| -(0..self.dim()).fold(S::zero(), |acc, j| acc + v[j] * self.c[(i, j)])).collect())
    }
}

/// The closed-form solution of `Mq̈ + Cq̇ + Kq = 0` in the underdamped regime `C² < 4MK`.
pub fn underdamped_solution(m: f64, k: f64, c: f64, q0: f64, qdot0: f64) -> Result<AnalyticSolution> {
    let alpha = c / (2.0 * m);
    let w2 = k / m - alpha * alpha;
    if w2 <= 0.0 {
        return Err(Error::UnsupportedRegime(format!("M={m}, K={k}, C={c} is not underdamped")));
    }
    Ok(AnalyticSolution::Underdamped { alpha, omega_d: w2.sqrt(), q0, v0: qdot0 })
}

/// `L = ½Mq̇² − ½Kq²` under `F = −Cq̇`. Outside the underdamped regime the system has
/// no analytic solution attached.
pub fn damped_oscillator(m: f64, k: f64, c: f64, q0: f64, qdot0: f64) -> Result<DampedSystem> {
    positive("M", m)?;
    positive("K", k)?;
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::InvalidParameter(format!("C must be non-negative, got {c}")));
    }
    Ok(SystemSpec {
        name: "damped-1dof".into(),
        lagrangian: QuadraticLagrangian::scalar(m, k),
        force: LinearDamping::scalar(c),
        constraint: NoConstraint { dim: 1 },
        initial: ContinuousState::new(vec![q0], vec![qdot0], 0.0)?,
        parameters: scalars(&[("M", m), ("K", k), ("C", c)]),
        analytic: underdamped_solution(m, k, c, q0, qdot0).ok(),
    })
}

/// Planar point masses of equal mass `m` under gravity `g` along `−y`:
/// `L = ½m Σ|ṗᵢ|² − m g Σ yᵢ`, coordinates `(x₁, y₁, x₂, y₂, …)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMasses {
    pub count: usize,
    pub m: f64,
    pub g: f64,
}

impl Lagrangian for PointMasses {
    fn dim(&self) -> usize {
        2 * self.count
    }

    fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<S> {
        crate::model::check_point(self, q, v)?;
        let kinetic = dot(v, v) * (0.5 * self.m);
        let height = (0..self.count).fold(S::zero(), |acc, i| acc + q[2 * i + 1]);
        Ok(kinetic - height * (self.m * self.g))
    }

    fn gradient<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<Gradient<S>> {
        let value = self.eval(q, v)?;
        let dq = (0..self.dim()).map(|i| S::from_f64(if i % 2 == 1 { -self.m * self.g } else { 0.0 })).collect();
        let dv = v.iter().map(|&x| x * self.m).collect();
        Ok(Gradient { value, dq, dv })
    }

    fn partials<S: Scalar>(&self, q: &[S], v: &[S]) -> Result<Partials<S>> {
        let Gradient { value, dq, dv } = self.gradient(q, v)?;
        let n = self.dim();
        Ok(Partials { value, dq, dv, dqq: Mat::zeros(n, n), dvv: Mat::identity(n).scale(S::from_f64(self.m)), dvq: Mat::zeros(n, n) })
    }
}

/// Rigid links of squared length `l` chaining point masses to the origin:
/// `c₁ = x₁² + y₁² − l`, `cᵢ = |pᵢ₋₁ − pᵢ|² − l`.
#[derive(Clone, Debug, PartialEq)]
pub struct PendulumChain {
    pub links: usize,
    pub l: f64,
}

impl PendulumChain {
    /// Coordinates of the link's two ends; the first link starts at the fixed origin.
    fn ends<S: Scalar>(q: &[S], i: usize) -> ([S; 2], [S; 2]) {
        let tip = [q[2 * i], q[2 * i + 1]];
        let base = if i == 0 { [S::zero(), S::zero()] } else { [q[2 * i - 2], q[2 * i - 1]] };
        (base, tip)
    }
}

impl Constraint for PendulumChain {
    fn dim(&self) -> usize {
        2 * self.links
    }

    fn count(&self) -> usize {
        self.links
    }

    fn eval<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        (0..self.links)
            .map(|i| {
                let (a, b) = Self::ends(q, i);
                let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
                dx * dx + dy * dy - self.l
            })
            .collect()
    }

    fn jacobian<S: Scalar>(&self, q: &[S]) -> Mat<S> {
        let mut j = Mat::zeros(self.links, self.dim());
        for i in 0..self.links {
            let (a, b) = Self::ends(q, i);
            for k in 0..2 {
                let d = (b[k] - a[k]) * 2.0;
                j[(i, 2 * i + k)] = d;
                if i > 0 {
                    j[(i, 2 * i - 2 + k)] = -d;
                }
            }
        }
        j
    }

    fn hessians<S: Scalar>(&self, _q: &[S]) -> Vec<Mat<S>> {
        let n = self.dim();
        (0..self.links)
            .map(|i| {
                let mut h = Mat::zeros(n, n);
                for k in 0..2 {
                    let tip = 2 * i + k;
                    h[(tip, tip)] = S::from_f64(2.0);
                    if i > 0 {
                        let base = 2 * i - 2 + k;
                        h[(base, base)] = S::from_f64(2.0);
                        h[(base, tip)] = S::from_f64(-2.0);
                        h[(tip, base)] = S::from_f64(-2.0);
                    }
                }
                h
            })
            .collect()
    }
}

fn pendulum(links: usize, m: f64, l: f64, g: f64, initial: ContinuousState) -> Result<PendulumSystem> {
    positive("m", m)?;
    positive("l", l)?;
    positive("g", g)?;
    check_len(2 * links, initial.dim())?;
    let constraint = PendulumChain { links, l };
    let c = constraint.eval(&initial.q);
    let cdot = constraint.jacobian(&initial.q).mul_vec(&initial.qdot);
    let scale = 1.0 + l;
    if c.iter().any(|x| x.abs() > INITIAL_CONSTRAINT_TOLERANCE * scale) {
        return Err(Error::InvalidParameter(format!("initial positions violate the links: c = {c:?}")));
    }
    let vscale = scale * (1.0 + initial.qdot.iter().fold(0.0f64, |a, x| a.max(x.abs())));
    if cdot.iter().any(|x| x.abs() > INITIAL_CONSTRAINT_TOLERANCE * vscale) {
        return Err(Error::InvalidParameter(format!("initial velocities leave the constraint manifold: ċ = {cdot:?}")));
    }
    Ok(SystemSpec {
        name: if links == 1 { "pendulum-single".into() } else { format!("pendulum-{links}-link") },
        lagrangian: PointMasses { count: links, m, g },
        force: NoForce { dim: 2 * links },
        constraint,
        initial,
        parameters: scalars(&[("m", m), ("l", l), ("g", g)]),
        analytic: None,
    })
}

/// A single point mass on a rigid link to the origin, `q = (x, y)`.
pub fn pendulum_cartesian(m: f64, l: f64, g: f64, initial: ContinuousState) -> Result<PendulumSystem> {
    pendulum(1, m, l, g, initial)
}

/// Two point masses, the second hanging from the first, `q = (x₁, y₁, x₂, y₂)`.
pub fn double_pendulum_cartesian(m: f64, l: f64, g: f64, initial: ContinuousState) -> Result<PendulumSystem> {
    pendulum(2, m, l, g, initial)
}

/// The four-degree-of-freedom mass and stiffness matrices of the linear benchmark.
pub fn four_dof_matrices() -> (Mat<f64>, Mat<f64>) {
    let m = Mat::from_rows(&[vec![2.0, 0.1, 0.0, 0.3], vec![0.1, 3.0, 0.1, 0.0], vec![0.0, 0.1, 4.1, 0.3], vec![0.3, 0.0, 0.3, 4.0]]);
    let k = Mat::from_rows(&[vec![1.0, 0.5, 0.0, 0.5], vec![0.5, 0.9, 0.35, 0.0], vec![0.0, 0.35, 8.1, 0.65], vec![0.5, 0.0, 0.65, 2.1]]);
    (m, k)
}

/// A system instance from the preset registry.
#[derive(Clone, Debug)]
pub enum PresetSystem {
    Linear(LinearSystem),
    Damped(DampedSystem),
    Pendulum(PendulumSystem),
}

/// The named benchmark configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    Harmonic1Dof,
    Linear4Dof,
    Damped,
    PendulumSingle,
    PendulumDouble,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Harmonic1Dof, Preset::Linear4Dof, Preset::Damped, Preset::PendulumSingle, Preset::PendulumDouble];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Harmonic1Dof => "harmonic-1dof-paper",
            Preset::Linear4Dof => "linear-4dof-paper",
            Preset::Damped => "damped-paper",
            Preset::PendulumSingle => "pendulum-single-paper",
            Preset::PendulumDouble => "pendulum-double-paper",
        }
    }

    /// Simulated time span in seconds.
    pub fn t_final(self) -> f64 {
        match self {
            Preset::Harmonic1Dof | Preset::Linear4Dof => 150.0,
            Preset::Damped => 300.0,
            Preset::PendulumSingle | Preset::PendulumDouble => 10.0,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Preset::Harmonic1Dof => "mass-spring, M=1, K=2, q(0)=0, q̇(0)=1",
            Preset::Linear4Dof => "4-DOF mass-spring chain, q(0)=(1,0,0,0), q̇(0)=0",
            Preset::Damped => "damped mass-spring, M=10, K=3, C=0.07, q(0)=q̇(0)=√2/2",
            Preset::PendulumSingle => "Cartesian pendulum, m=l=1, g=9.81, q=(0,1), q̇=(2,0)",
            Preset::PendulumDouble => "Cartesian double pendulum, m=l=1, g=9.81, q=(0,1,0,2), q̇=(5,0,0,0)",
        }
    }

    pub fn build(self) -> Result<PresetSystem> {
        let named = |mut s: LinearSystem, n: &str| {
            s.name = n.into();
            s
        };
        Ok(match self {
            Preset::Harmonic1Dof => PresetSystem::Linear(named(harmonic_oscillator(1.0, 2.0, 0.0, 1.0)?, self.name())),
            Preset::Linear4Dof => {
                let (m, k) = four_dof_matrices();
                let initial = ContinuousState::new(vec![1.0, 0.0, 0.0, 0.0], vec![0.0; 4], 0.0)?;
                PresetSystem::Linear(named(linear_ndof(m, k, initial)?, self.name()))
            }
            Preset::Damped => {
                let mut s = damped_oscillator(10.0, 3.0, 0.07, 2f64.sqrt() / 2.0, 2f64.sqrt() / 2.0)?;
                s.name = self.name().into();
                PresetSystem::Damped(s)
            }
            Preset::PendulumSingle => {
                let l: f64 = 1.0;
                let mut s = pendulum_cartesian(1.0, l, 9.81, ContinuousState::new(vec![0.0, l.sqrt()], vec![2.0, 0.0], 0.0)?)?;
                s.name = self.name().into();
                PresetSystem::Pendulum(s)
            }
            Preset::PendulumDouble => {
                let l: f64 = 1.0;
                let q = vec![0.0, l.sqrt(), 0.0, 2.0 * l.sqrt()];
                let mut s = double_pendulum_cartesian(1.0, l, 9.81, ContinuousState::new(q, vec![5.0, 0.0, 0.0, 0.0], 0.0)?)?;
                s.name = self.name().into();
                PresetSystem::Pendulum(s)
            }
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::InvalidParameter(format!("unknown preset `{s}`")))
    }
}
