//! Properties of the error metrics and the slope fit.

use proptest::prelude::*;
use svibench::metrics::{AnalyticOracle, BenchmarkOracle, Oracle};
use svibench::{error_2norm, error_l2, fit_convergence_slope, fit_convergence_slope_above, BenchError, Trajectory};

fn sampled(h: f64, n: usize, f: impl Fn(f64) -> Vec<f64>) -> Trajectory {
    Trajectory { t0: 0.0, h, q: (0..n).map(|k| f(k as f64 * h)).collect() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn the_l2_error_is_non_negative_and_vanishes_only_on_the_oracle(
        a in -3.0..3.0f64, w in 0.1..4.0f64, shift in -1.0..1.0f64, h in 0.001..0.1f64,
    ) {
        let oracle = AnalyticOracle(move |t: f64| vec![a * (w * t).sin(), (w * t).cos()]);
        let exact = sampled(h, 200, |t| oracle.position(t));
        prop_assert_eq!(error_l2(&exact, &oracle).unwrap(), 0.0);
        let off = sampled(h, 200, |t| vec![a * (w * t).sin() + shift, (w * t).cos()]);
        let e = error_l2(&off, &oracle).unwrap();
        prop_assert!(e >= 0.0);
        // A constant offset c over [0, T] has L² norm |c|·√T.
        let t_end = 199.0 * h;
        prop_assert!((e - shift.abs() * t_end.sqrt()).abs() <= 1e-12 * (1.0 + e));
        prop_assert!(error_2norm(&off, &oracle).unwrap().iter().all(|x| (x - shift.abs()).abs() <= 1e-12));
    }

    #[test]
    fn an_exact_power_law_has_its_exponent_as_slope(c in 1e-3..1e3f64, p in 0.5..9.0f64, h0 in 0.05..0.5f64) {
        let points: Vec<(f64, f64)> = (0..6).map(|j| {
            let h = h0 / 2f64.powi(j);
            (h, c * h.powf(p))
        }).filter(|(_, e)| *e > 1e-12).collect();
        prop_assume!(points.len() >= 3);
        let slope = fit_convergence_slope(&points).unwrap();
        prop_assert!((slope - p).abs() <= 1e-9, "{} vs {}", slope, p);
    }

    #[test]
    fn the_slope_ignores_point_order_and_error_scale(es in prop::collection::vec(1e-8..1.0f64, 5), scale in 1e-3..1e3f64) {
        let points: Vec<(f64, f64)> = es.iter().enumerate().map(|(j, &e)| (0.5f64.powi(j as i32), e)).collect();
        let base = fit_convergence_slope(&points).unwrap();
        let mut reversed = points.clone();
        reversed.reverse();
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(h, e)| (h, e * scale)).collect();
        prop_assert!((fit_convergence_slope(&reversed).unwrap() - base).abs() <= 1e-12);
        prop_assert!((fit_convergence_slope_above(&scaled, 0.0).unwrap() - base).abs() <= 1e-9);
    }

    #[test]
    fn the_benchmark_oracle_returns_grid_samples_and_interpolates_cubics_exactly(
        c in prop::array::uniform4(-2.0..2.0f64), s in 0.0..1.0f64,
    ) {
        let cubic = move |t: f64| c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        let fine = sampled(0.01, 101, |t| vec![cubic(t)]);
        let oracle = BenchmarkOracle { fine: &fine };
        prop_assert_eq!(oracle.window(), (0.0, 1.0));
        let k = (s * 100.0).floor() as usize;
        prop_assert_eq!(oracle.position(fine.time(k)), fine.q[k].clone());
        prop_assert!((oracle.position(s)[0] - cubic(s)).abs() <= 1e-12);
    }
}

#[test]
fn floor_points_are_left_out_of_the_fit() {
    let points = [(0.4, 1.6e-1), (0.2, 4e-2), (0.1, 1e-2), (0.05, 1e-13), (0.025, 0.0)];
    assert!((fit_convergence_slope(&points).unwrap() - 2.0).abs() <= 1e-12);
    assert!(matches!(fit_convergence_slope(&points[2..]), Err(BenchError::InsufficientData(1))));
}

#[test]
fn trajectories_outside_the_benchmark_window_are_refused() {
    let fine = sampled(0.01, 101, |t| vec![t]);
    let coarse = sampled(0.1, 12, |t| vec![t]);
    assert!(matches!(error_l2(&coarse, &BenchmarkOracle { fine: &fine }), Err(BenchError::Window(_))));
    let empty = Trajectory { t0: 0.0, h: 0.1, q: Vec::new() };
    assert!(matches!(error_l2(&empty, &BenchmarkOracle { fine: &fine }), Err(BenchError::Window(_))));
}
