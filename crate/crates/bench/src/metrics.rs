//! Trajectory error metrics and convergence-slope estimation.

use crate::error::{BenchError, Result};

/// Positions sampled on a uniform time grid `t_k = t0 + k·h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub h: f64,
    pub q: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }
}

/// A reference trajectory `q_a(t)` on a time window.
pub trait Oracle {
    /// Closed interval on which the oracle is defined.
    fn window(&self) -> (f64, f64);
    fn position(&self, t: f64) -> Vec<f64>;
}

/// An analytic solution, defined for all times.
pub struct AnalyticOracle<F>(pub F);

impl<F: Fn(f64) -> Vec<f64>> Oracle for AnalyticOracle<F> {
    fn window(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn position(&self, t: f64) -> Vec<f64> {
        (self.0)(t)
    }
}

/// A fine trajectory used as the reference, read off by local cubic interpolation.
///
/// Times that fall on the fine grid (to 1e-9 of a fine step) return the stored sample
/// unchanged, so aligned coarse grids are compared against exact benchmark values.
pub struct BenchmarkOracle<'a> {
    pub fine: &'a Trajectory,
}

impl Oracle for BenchmarkOracle<'_> {
    fn window(&self) -> (f64, f64) {
        (self.fine.t0, self.fine.t_end())
    }

    fn position(&self, t: f64) -> Vec<f64> {
        let f = self.fine;
        let s = (t - f.t0) / f.h;
        let nearest = s.round();
        let last = f.len() - 1;
        if (s - nearest).abs() <= 1e-9 && nearest >= 0.0 && (nearest as usize) <= last {
            return f.q[nearest as usize].clone();
        }
        // Four-point Lagrange cubic on the nodes bracketing t, shifted inward at the ends.
        let k0 = (s.floor() as isize - 1).clamp(0, last as isize - 3) as usize;
        let x = s - k0 as f64;
        let nodes = [0.0, 1.0, 2.0, 3.0];
        let weights: Vec<f64> = (0..4)
            .map(|i| (0..4).filter(|&j| j != i).map(|j| (x - nodes[j]) / (nodes[i] - nodes[j])).product())
            .collect();
        (0..f.q[0].len()).map(|d| (0..4).map(|i| weights[i] * f.q[k0 + i][d]).sum()).collect()
    }
}

fn check_window<O: Oracle>(traj: &Trajectory, oracle: &O) -> Result<()> {
    if traj.is_empty() {
        return Err(BenchError::Window("empty trajectory".into()));
    }
    let (a, b) = oracle.window();
    let slack = 1e-9 * traj.h;
    if traj.t0 < a - slack || traj.t_end() > b + slack {
        return Err(BenchError::Window(format!("trajectory [{}, {}] is outside the oracle window [{a}, {b}]", traj.t0, traj.t_end())));
    }
    Ok(())
}

/// `e₂(t_k) = ‖q_k − q_a(t_k)‖₂` at every sample.
pub fn error_2norm<O: Oracle>(traj: &Trajectory, oracle: &O) -> Result<Vec<f64>> {
    check_window(traj, oracle)?;
    Ok(traj
        .q
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let a = oracle.position(traj.time(k));
            q.iter().zip(&a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        })
        .collect())
}

/// `e_{L²} = (∫ ‖q − q_a‖² dt)^{1/2}` by the trapezoid rule on the sample grid.
pub fn error_l2<O: Oracle>(traj: &Trajectory, oracle: &O) -> Result<f64> {
    let e = error_2norm(traj, oracle)?;
    let n = e.len();
    if n < 2 {
        return Ok(0.0);
    }
    let interior: f64 = e[1..n - 1].iter().map(|x| x * x).sum();
    let ends = 0.5 * (e[0] * e[0] + e[n - 1] * e[n - 1]);
    Ok((traj.h * (interior + ends)).sqrt())
}

/// Errors at or below this are treated as floating-point floor and left out of fits.
pub const SLOPE_FLOOR: f64 = 1e-12;

/// Least-squares slope of `log e` against `log h` over the points with `e > floor`.
pub fn fit_convergence_slope_above(points: &[(f64, f64)], floor: f64) -> Result<f64> {
    let mut usable: Vec<(f64, f64)> = points.iter().filter(|(h, e)| *h > 0.0 && e.is_finite() && *e > floor).map(|(h, e)| (h.ln(), e.ln())).collect();
    usable.sort_by(|a, b| a.0.total_cmp(&b.0));
    usable.dedup_by(|a, b| a.0 == b.0);
    if usable.len() < 3 {
        return Err(BenchError::InsufficientData(usable.len()));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// [`fit_convergence_slope_above`] with the default [`SLOPE_FLOOR`].
pub fn fit_convergence_slope(points: &[(f64, f64)]) -> Result<f64> {
    fit_convergence_slope_above(points, SLOPE_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sampled(h: f64, n: usize, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory { t0: 0.0, h, q: (0..n).map(|k| vec![f(k as f64 * h)]).collect() }
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let traj = sampled(0.1, 11, |t| t.sin());
        let oracle = AnalyticOracle(|t: f64| vec![t.sin()]);
        assert!(error_2norm(&traj, &oracle).unwrap().iter().all(|e| *e == 0.0));
        assert_eq!(error_l2(&traj, &oracle).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_integrates_exactly() {
        let (d, t): (f64, f64) = (0.3, 2.0);
        let traj = sampled(0.25, 9, |_| d);
        let oracle = AnalyticOracle(|_: f64| vec![0.0]);
        assert_relative_eq!(error_l2(&traj, &oracle).unwrap(), d * t.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn benchmark_outside_window_is_rejected() {
        let fine = sampled(0.01, 101, |t| t);
        let coarse = sampled(0.1, 12, |t| t);
        assert!(matches!(error_l2(&coarse, &BenchmarkOracle { fine: &fine }), Err(BenchError::Window(_))));
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let fine = sampled(0.1, 31, f);
        let oracle = BenchmarkOracle { fine: &fine };
        for t in [0.0, 0.03, 1.234, 2.95, 3.0] {
            assert_relative_eq!(oracle.position(t)[0], f(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn slopes_of_exact_power_laws() {
        let hs = [0.2, 0.1, 0.05, 0.025];
        let quad: Vec<_> = hs.iter().map(|&h| (h, h * h)).collect();
        assert!((fit_convergence_slope(&quad).unwrap() - 2.0).abs() < 1e-9);
        let quart: Vec<_> = hs.iter().map(|&h| (h, 3.0 * h.powi(4))).collect();
        assert!((fit_convergence_slope(&quart).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_points_are_reported() {
        let pts = [(0.1, 1e-3), (0.05, 1e-13), (0.025, 0.0)];
        assert!(matches!(fit_convergence_slope(&pts), Err(BenchError::InsufficientData(1))));
    }
}
