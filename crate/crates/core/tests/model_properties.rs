//! Derivative oracles checked against each other and against finite differences.

use proptest::prelude::*;
use svi::linalg::Mat;
use svi::model::{Constraint, ContinuousState, Lagrangian, QuadraticLagrangian, StepSize};
use svi::oracle::{auto_constraint_hessians, auto_constraint_jacobian, auto_gradient, auto_partials, derivative_tensors};
use svi::scalar::Scalar;
use svi::systems::{PendulumChain, PointMasses};
use svi::Error;

/// A non-separable Lagrangian with position-dependent mass and velocity coupling.
struct Coupled;

impl Lagrangian for Coupled {
    fn dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, q: &[S], v: &[S]) -> svi::Result<S> {
        Ok(v[0] * v[0] * (q[1] * q[1] + 1.0) * 0.5 + v[0] * v[1] * q[0].sin() + v[1] * v[1] * 0.5 - q[0].cos() * q[1] + (q[0] * q[1] * 0.1).exp())
    }
}

const FD_STEP: f64 = 1e-6;

/// Central difference of `f` along coordinate `i` of `x`.
fn central(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let shifted = |s: f64| {
        let mut y = x.to_vec();
        y[i] += s;
        f(&y)
    };
    (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn max_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    a.sub(b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn first_partials_match_central_differences(x in prop::array::uniform4(-1.5..1.5f64)) {
        let (q, v) = ([x[0], x[1]], [x[2], x[3]]);
        let g = Coupled.gradient(&q, &v).unwrap();
        for i in 0..2 {
            let dq = central(|y| Coupled.eval(y, &v).unwrap(), &q, i);
            let dv = central(|y| Coupled.eval(&q, y).unwrap(), &v, i);
            prop_assert!(close(g.dq[i], dq, 1e-5), "∂L/∂q{}: {} vs {}", i, g.dq[i], dq);
            prop_assert!(close(g.dv[i], dv, 1e-5), "∂L/∂q̇{}: {} vs {}", i, g.dv[i], dv);
        }
    }

    #[test]
    fn second_partials_match_differences_of_the_gradient(x in prop::array::uniform4(-1.5..1.5f64)) {
        let (q, v) = ([x[0], x[1]], [x[2], x[3]]);
        let p = Coupled.partials(&q, &v).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let qq = central(|y| Coupled.gradient(y, &v).unwrap().dq[i], &q, j);
                let vv = central(|y| Coupled.gradient(&q, y).unwrap().dv[i], &v, j);
                let vq = central(|y| Coupled.gradient(y, &v).unwrap().dv[i], &q, j);
                prop_assert!(close(p.dqq[(i, j)], qq, 1e-5));
                prop_assert!(close(p.dvv[(i, j)], vv, 1e-5));
                prop_assert!(close(p.dvq[(i, j)], vq, 1e-5));
            }
        }
    }

    #[test]
    fn hessian_blocks_are_symmetric(x in prop::array::uniform4(-1.5..1.5f64)) {
        let p = Coupled.partials(&[x[0], x[1]], &[x[2], x[3]]).unwrap();
        prop_assert!(max_diff(&p.dqq, &p.dqq.transpose()) <= 1e-10);
        prop_assert!(max_diff(&p.dvv, &p.dvv.transpose()) <= 1e-10);
    }

    #[test]
    fn evaluation_is_pure_and_consistent_across_routes(x in prop::array::uniform4(-1.5..1.5f64)) {
        let (q, v) = ([x[0], x[1]], [x[2], x[3]]);
        let value = Coupled.eval(&q, &v).unwrap();
        prop_assert_eq!(value.to_bits(), Coupled.eval(&q, &v).unwrap().to_bits());
        prop_assert_eq!(Coupled.gradient(&q, &v).unwrap(), Coupled.gradient(&q, &v).unwrap());
        prop_assert_eq!(Coupled.partials(&q, &v).unwrap(), Coupled.partials(&q, &v).unwrap());
        prop_assert_eq!(Coupled.gradient(&q, &v).unwrap().value, value);
        prop_assert_eq!(Coupled.partials(&q, &v).unwrap().value, value);
    }

    #[test]
    fn derivative_tensors_agree_with_the_partials(x in prop::array::uniform4(-1.5..1.5f64)) {
        let (q, v) = ([x[0], x[1]], [x[2], x[3]]);
        let t = derivative_tensors(&Coupled, &q, &v, 3).unwrap();
        let p = Coupled.partials(&q, &v).unwrap();
        prop_assert_eq!(t.order(), 3);
        prop_assert_eq!(t.vars(), 4);
        prop_assert!(close(t.value(), p.value, 1e-15));
        for i in 0..2 {
            prop_assert!(close(t.get(&[i]), p.dq[i], 1e-13));
            prop_assert!(close(t.get(&[2 + i]), p.dv[i], 1e-13));
            for j in 0..2 {
                prop_assert!(close(t.get(&[i, j]), p.dqq[(i, j)], 1e-12));
                prop_assert!(close(t.get(&[2 + i, 2 + j]), p.dvv[(i, j)], 1e-12));
                prop_assert!(close(t.get(&[2 + i, j]), p.dvq[(i, j)], 1e-12));
            }
        }
        // Third derivatives are symmetric under index permutation and match differences
        // of the second.
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    prop_assert_eq!(t.get(&[i, j, k]), t.get(&[k, i, j]));
                    prop_assert_eq!(t.get(&[i, j, k]), t.get(&[j, i, k]));
                }
            }
        }
        let stacked = [q[0], q[1], v[0], v[1]];
        let second = |y: &[f64], a: usize, b: usize| derivative_tensors(&Coupled, &y[..2], &y[2..], 2).unwrap().get(&[a, b]);
        for k in 0..4 {
            let fd = central(|y| second(y, 0, 2), &stacked, k);
            prop_assert!(close(t.get(&[0, 2, k]), fd, 1e-5));
        }
    }

    #[test]
    fn closed_form_quadratic_partials_match_automatic_ones(
        m in prop::array::uniform4(-1.0..1.0f64), k in prop::array::uniform4(-1.0..1.0f64), x in prop::array::uniform4(-2.0..2.0f64),
    ) {
        let sym = |a: [f64; 4], shift: f64| Mat::from_rows(&[vec![a[0] + shift, a[1]], vec![a[1], a[3] + shift]]);
        let lag = QuadraticLagrangian::new(sym(m, 3.0), sym(k, 0.0)).unwrap();
        let (q, v) = ([x[0], x[1]], [x[2], x[3]]);
        let (hand, auto) = (lag.partials(&q, &v).unwrap(), auto_partials(&lag, &q, &v).unwrap());
        prop_assert!(close(hand.value, auto.value, 1e-14));
        for i in 0..2 {
            prop_assert!(close(hand.dq[i], auto.dq[i], 1e-14));
            prop_assert!(close(hand.dv[i], auto.dv[i], 1e-14));
        }
        prop_assert!(max_diff(&hand.dqq, &auto.dqq) <= 1e-14);
        prop_assert!(max_diff(&hand.dvv, &auto.dvv) <= 1e-14);
        prop_assert!(max_diff(&hand.dvq, &auto.dvq) <= 1e-14);
    }

    #[test]
    fn point_mass_partials_match_automatic_ones(x in prop::collection::vec(-2.0..2.0f64, 8)) {
        let lag = PointMasses { count: 2, m: 1.3, g: 9.81 };
        let (q, v) = x.split_at(4);
        let (hand, auto) = (lag.gradient(q, v).unwrap(), auto_gradient(&lag, q, v).unwrap());
        prop_assert!(close(hand.value, auto.value, 1e-14));
        for i in 0..4 {
            prop_assert!(close(hand.dq[i], auto.dq[i], 1e-14));
            prop_assert!(close(hand.dv[i], auto.dv[i], 1e-14));
        }
        let (hand, auto) = (lag.partials(q, v).unwrap(), auto_partials(&lag, q, v).unwrap());
        prop_assert!(max_diff(&hand.dvv, &auto.dvv) <= 1e-14);
        prop_assert!(max_diff(&hand.dqq, &auto.dqq) <= 1e-14);
    }

    #[test]
    fn chain_constraint_derivatives_match_every_other_route(x in prop::collection::vec(-2.0..2.0f64, 4), l in 0.5..2.0f64) {
        let c = PendulumChain { links: 2, l };
        let hand = c.jacobian(&x);
        prop_assert!(max_diff(&hand, &auto_constraint_jacobian(&c, &x)) <= 1e-14);
        for i in 0..2 {
            for j in 0..4 {
                let fd = central(|y| c.eval(y)[i], &x, j);
                prop_assert!((hand[(i, j)] - fd).abs() <= 1e-6, "Dc[{},{}] {} vs {}", i, j, hand[(i, j)], fd);
            }
        }
        for (h, a) in c.hessians(&x).iter().zip(auto_constraint_hessians(&c, &x)) {
            prop_assert!(max_diff(h, &a) <= 1e-14);
        }
    }
}

#[test]
fn derivative_orders_above_four_are_refused() {
    assert_eq!(derivative_tensors(&Coupled, &[0.1, 0.2], &[0.3, 0.4], 5).unwrap_err(), Error::UnsupportedOrder(5));
    let t = derivative_tensors(&Coupled, &[0.1, 0.2], &[0.3, 0.4], 4).unwrap();
    assert_eq!(t.tensor(4).len(), 4usize.pow(4));
}

#[test]
fn models_reject_points_of_the_wrong_dimension() {
    assert!(matches!(Coupled.gradient(&[0.1], &[0.3, 0.4]), Err(Error::Dimension { .. })));
    assert!(matches!(derivative_tensors(&Coupled, &[0.1, 0.2, 0.3], &[0.3, 0.4, 0.5], 2), Err(Error::Dimension { .. })));
    assert!(matches!(ContinuousState::new(vec![0.0], vec![0.0, 1.0], 0.0), Err(Error::Dimension { expected: 1, got: 2 })));
}

#[test]
fn step_sizes_must_be_positive_and_finite() {
    for h in [0.0, -1e-3, f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
        assert!(matches!(StepSize::new(h), Err(Error::InvalidParameter(_))), "{h}");
    }
    assert_eq!(StepSize::new(1e-3).unwrap().get(), 1e-3);
}

#[test]
fn quadratic_lagrangians_require_symmetric_square_matrices() {
    assert!(QuadraticLagrangian::new(Mat::from_rows(&[vec![1.0, 0.2], vec![0.0, 1.0]]), Mat::identity(2)).is_err());
    assert!(QuadraticLagrangian::new(Mat::identity(2), Mat::identity(3)).is_err());
    assert!(QuadraticLagrangian::new(Mat::identity(2), Mat::zeros(2, 1)).is_err());
}
