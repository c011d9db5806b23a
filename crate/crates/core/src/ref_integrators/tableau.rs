//! Explicit Butcher tableaus and the shared stage loop.

use std::str::FromStr;

use num_rational::Ratio;
use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// Largest defect tolerated in `Σb = 1` and `cᵢ = Σⱼ aᵢⱼ`.
const CONSISTENCY_TOLERANCE: f64 = 1e-14;

/// The coefficient file of the five-stage half-explicit method, comments included.
pub const HEM4_SOURCE: &str = include_str!("../../data/hem4.txt");

/// An explicit Runge–Kutta tableau: strictly lower-triangular `A`, weights `b`, nodes `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl ButcherTableau {
    /// Validates shape, explicitness, `Σb = 1` and `cᵢ = Σⱼ aᵢⱼ`.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || c.len() != s || a.iter().any(|r| r.len() != s) {
            return Err(Error::InvalidParameter("tableau must be s×s with s weights and s nodes".into()));
        }
        if a.iter().flatten().chain(&b).chain(&c).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("tableau entries must be finite".into()));
        }
        if (0..s).any(|i| (i..s).any(|j| a[i][j] != 0.0)) {
            return Err(Error::InvalidParameter("tableau must be explicit (strictly lower triangular)".into()));
        }
        let t = Self { a, b, c };
        if t.consistency_defect() > CONSISTENCY_TOLERANCE {
            return Err(Error::InvalidParameter(format!("inconsistent tableau (defect {:e})", t.consistency_defect())));
        }
        Ok(t)
    }

    /// A tableau whose nodes are the row sums of `a`.
    pub fn with_row_sum_nodes(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let c = a.iter().map(|r| r.iter().sum()).collect();
        Self::new(a, b, c)
    }

    /// `max(|Σb − 1|, maxᵢ |cᵢ − Σⱼ aᵢⱼ|)`.
    pub fn consistency_defect(&self) -> f64 {
        let rows = self.a.iter().zip(&self.c).map(|(r, c)| (c - r.iter().sum::<f64>()).abs());
        rows.fold((self.b.iter().sum::<f64>() - 1.0).abs(), f64::max)
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Stability function `R(z) = 1 + z bᵀ(I − zA)⁻¹ 1`, the growth factor on `ẋ = λx`
    /// with `z = hλ`.
    pub fn stability(&self, z: f64) -> f64 {
        let s = self.stages();
        let mut g = vec![0.0; s];
        for i in 0..s {
            g[i] = 1.0 + z * (0..i).map(|j| self.a[i][j] * g[j]).sum::<f64>();
        }
        1.0 + z * self.b.iter().zip(&g).map(|(b, g)| b * g).sum::<f64>()
    }

    /// The classical fourth-order tableau.
    pub fn rk4() -> &'static ButcherTableau {
        static RK4: Lazy<ButcherTableau> = Lazy::new(|| {
            let a = vec![vec![0.0; 4], vec![0.5, 0.0, 0.0, 0.0], vec![0.0, 0.5, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]];
            ButcherTableau::new(a, vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0], vec![0.0, 0.5, 0.5, 1.0]).expect("classical tableau")
        });
        &RK4
    }

    /// The five-stage fourth-order half-explicit tableau, parsed from [`HEM4_SOURCE`].
    pub fn hem4() -> &'static ButcherTableau {
        static HEM4: Lazy<ButcherTableau> = Lazy::new(|| ButcherTableau::parse(HEM4_SOURCE).expect("bundled coefficient file parses"));
        &HEM4
    }

    /// Parses the plain-text coefficient format:
    ///
    /// ```text
    /// # comment
    /// stages <s>
    /// a <i> <j> <value>    (1-based, i > j; omitted entries are zero)
    /// b <j> <value>
    /// ```
    ///
    /// Values are exact rationals `p/q` or decimals. Nodes are the row sums of `A`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::InvalidParameter(format!("malformed tableau line `{line}`"));
        let mut s = None;
        let mut a_entries = Vec::new();
        let mut b_entries = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let index = |k: usize| fields.get(k).and_then(|f| f.parse::<usize>().ok()).filter(|&i| i >= 1).ok_or_else(|| bad(line));
            match (fields[0], fields.len()) {
                ("stages", 2) => s = Some(index(1)?),
                ("a", 4) => a_entries.push((index(1)? - 1, index(2)? - 1, parse_value(fields[3]).ok_or_else(|| bad(line))?)),
                ("b", 3) => b_entries.push((index(1)? - 1, parse_value(fields[2]).ok_or_else(|| bad(line))?)),
                _ => return Err(bad(line)),
            }
        }
        let s = s.ok_or_else(|| Error::InvalidParameter("tableau file lacks a `stages` line".into()))?;
        let mut a = vec![vec![0.0; s]; s];
        let mut b = vec![0.0; s];
        for (i, j, v) in a_entries {
            if i >= s || j >= i {
                return Err(Error::InvalidParameter(format!("a[{}][{}] is outside the explicit part", i + 1, j + 1)));
            }
            a[i][j] = v;
        }
        for (j, v) in b_entries {
            *b.get_mut(j).ok_or_else(|| Error::InvalidParameter(format!("b[{}] out of range", j + 1)))? = v;
        }
        Self::with_row_sum_nodes(a, b)
    }
}

fn parse_value(field: &str) -> Option<f64> {
    if field.contains('/') {
        let r = Ratio::<i64>::from_str(field).ok()?;
        Some(*r.numer() as f64 / *r.denom() as f64)
    } else {
        field.parse().ok()
    }
}

/// The stage loop shared by explicit and half-explicit steppers.
///
/// For stage `i` the callback receives `Yᵢ`, the step-weighted coefficient `h·a_{i+1,i}`
/// that couples its rate into the next stage (`h·bᵢ` for the last stage), and that next
/// stage's partial sum `x + h Σ_{j<i} a_{i+1,j} Kⱼ`; it returns the rate `Kᵢ`. Returns
/// `x + h Σ bⱼ Kⱼ`.
pub(crate) fn run_stages<K>(tableau: &ButcherTableau, x: &[f64], h: f64, mut stage_rate: K) -> Result<Vec<f64>>
where
    K: FnMut(usize, &[f64], f64, &[f64]) -> Result<Vec<f64>>,
{
    let s = tableau.stages();
    let mut rates: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut stage = x.to_vec();
    for i in 0..s {
        let row = if i + 1 < s { &tableau.a[i + 1] } else { &tableau.b };
        let mut base = x.to_vec();
        for (j, k) in rates.iter().enumerate() {
            let w = h * row[j];
            for (y, kj) in base.iter_mut().zip(k) {
                *y += w * kj;
            }
        }
        let w = h * row[i];
        let k = stage_rate(i, &stage, w, &base)?;
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        stage = base.iter().zip(&k).map(|(y, kj)| y + w * kj).collect();
        rates.push(k);
    }
    Ok(stage)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_taylor(z: f64, order: usize) -> f64 {
        (0..=order).scan(1.0, |term, k| {
            let t = *term;
            *term *= z / (k + 1) as f64;
            Some(t)
        })
        .sum()
    }

    #[test]
    fn rk4_stability_is_the_quartic_taylor_polynomial() {
        for z in [-0.7, -0.1, 0.2, 1.3] {
            assert!((ButcherTableau::rk4().stability(z) - exp_taylor(z, 4)).abs() < 1e-15);
        }
    }

    #[test]
    fn bundled_tableaus_are_consistent_to_second_order() {
        for t in [ButcherTableau::rk4(), ButcherTableau::hem4()] {
            assert!(t.consistency_defect() <= 1e-15);
            // R(z) − e^z = O(z³) on ẋ = λx: the defect shrinks by 8 when z halves.
            let defect = |z: f64| t.stability(z) - z.exp();
            let ratio = defect(0.02) / defect(0.01);
            assert!(ratio > 7.0, "ratio {ratio}");
        }
    }

    #[test]
    fn hem4_has_five_stages_and_fourth_order_stability() {
        let t = ButcherTableau::hem4();
        assert_eq!(t.stages(), 5);
        for z in [-0.3, 0.05] {
            assert!((t.stability(z) - exp_taylor(z, 4)).abs() < 0.05 * z.abs().powi(5));
        }
    }

    #[test]
    fn parse_accepts_rationals_and_rejects_garbage() {
        let t = ButcherTableau::parse("# midpoint\nstages 2\na 2 1 1/2\nb 2 1\n").unwrap();
        assert_eq!(t.a()[1][0], 0.5);
        assert_eq!(t.c(), &[0.0, 0.5]);
        assert!(ButcherTableau::parse("stages 2\na 1 2 1/2\nb 2 1\n").is_err());
        assert!(ButcherTableau::parse("stages 2\nb 1 1/0\n").is_err());
        assert!(ButcherTableau::parse("stages 2\nb 1 0.5\n").is_err());
    }

    #[test]
    fn implicit_tableau_is_rejected() {
        let err = ButcherTableau::new(vec![vec![0.5]], vec![1.0], vec![0.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }
}
