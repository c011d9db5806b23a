//! Closed-form surrogates of linear systems up to eighth order.
//!
//! For `L = ½ q̇ᵀMq̇ − ½ qᵀKq` the surrogate is again quadratic, `L̂ = ½ q̇ᵀMₛq̇ − ½ qᵀKₛq`,
//! with matrix power series in `h²`:
//!
//! - `Mₛ = M − K h²/12 − KM⁻¹K h⁴/720 − (KM⁻¹)²K h⁶/30240 − (KM⁻¹)³K h⁸/1209600`,
//! - `Kₛ = K + KM⁻¹K h²/12 + (KM⁻¹)²K h⁴/120 + 17(KM⁻¹)³K h⁶/20160 + 31(KM⁻¹)⁴K h⁸/362880`.
//!
//! Truncating after the `h^k` terms gives the surrogate of order `k`; the midpoint
//! integrator driven by it converges with order `k + 2`.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Mat};
use crate::model::{QuadraticLagrangian, StepSize};

/// Numerators and denominators of the `h^{2j}` coefficients of `Mₛ` (subtracted), `j = 1..=4`.
const MASS: [(i64, i64); 4] = [(1, 12), (1, 720), (1, 30240), (1, 1209600)];
/// Numerators and denominators of the `h^{2j}` coefficients of `Kₛ` (added), `j = 1..=4`.
const STIFFNESS: [(i64, i64); 4] = [(1, 12), (1, 120), (17, 20160), (31, 362880)];

/// The exact series coefficients `(mass, stiffness)`, as rationals.
pub fn series_coefficients() -> ([Ratio<i64>; 4], [Ratio<i64>; 4]) {
    (MASS.map(|(n, d)| Ratio::new(n, d)), STIFFNESS.map(|(n, d)| Ratio::new(n, d)))
}

/// Surrogate mass and stiffness matrices of a linear system.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSurrogateParams {
    pub m_s: Mat<f64>,
    pub k_s: Mat<f64>,
    /// Truncation order `k ∈ {2, 4, 6, 8}`.
    pub order: u32,
    pub h: f64,
}

impl LinearSurrogateParams {
    /// The surrogate as a quadratic Lagrangian.
    pub fn lagrangian(&self) -> Result<QuadraticLagrangian> {
        QuadraticLagrangian::new(self.m_s.clone(), self.k_s.clone())
    }
}

fn symmetrized(a: &Mat<f64>) -> Mat<f64> {
    a.add(&a.transpose()).scale(0.5)
}

/// Surrogate of `L = ½ q̇ᵀMq̇ − ½ qᵀKq` truncated after the `h^order` terms.
///
/// `order` must be 2, 4, 6 or 8; `M` must be invertible.
pub fn linear_surrogate(lag: &QuadraticLagrangian, h: StepSize, order: u32) -> Result<LinearSurrogateParams> {
    if !matches!(order, 2 | 4 | 6 | 8) {
        return Err(Error::InvalidParameter(format!("surrogate order must be 2, 4, 6 or 8, got {order}")));
    }
    let (m, k) = (lag.mass(), lag.stiffness());
    let n = m.rows();
    let lu = Lu::factor(m).map_err(|_| Error::SingularMassMatrix)?;
    if lu.pivot_ratio() > super::MASS_CONDITION_LIMIT {
        return Err(Error::SingularMassMatrix);
    }
    // K M⁻¹ = (M⁻¹ K)ᵀ for symmetric M and K.
    let k_minv = lu.solve_mat(k).transpose();
    let h = h.get();
    let h2 = h * h;
    let terms = (order / 2) as usize;
    // powers[j] = (KM⁻¹)^j K
    let mut powers = vec![k.clone()];
    for j in 1..=terms {
        powers.push(symmetrized(&k_minv.mul(&powers[j - 1])));
    }
    let mut m_s = m.clone();
    let mut k_s = k.clone();
    let mut hp = 1.0;
    for j in 0..terms {
        hp *= h2;
        let (mn, md) = MASS[j];
        let (kn, kd) = STIFFNESS[j];
        m_s = m_s.sub(&powers[j].scale(hp * mn as f64 / md as f64));
        k_s = k_s.add(&powers[j + 1].scale(hp * kn as f64 / kd as f64));
    }
    debug_assert_eq!(m_s.rows(), n);
    Ok(LinearSurrogateParams { m_s, k_s, order, h })
}
