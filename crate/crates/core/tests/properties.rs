mod common;

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpqst::fit::{jacobian, SineParams};
use rpqst::qubit::pure_fidelity;
use rpqst::rabi::{forward_phases, RotationAxis};
use rpqst::readout::{readouts, Channel, ChannelNoise};
use rpqst::tomography::{evaluate, AxisReading, Quadrature, Reconstructor};
use rpqst::{fidelity, su2_rotate, BlochVector, PureState};

use common::*;

fn angles() -> impl Strategy<Value = (f64, f64)> {
    (0.0..PI, 0.0..TAU)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn fidelity_with_itself_is_one((t, p) in angles()) {
        let rho = PureState::new(t, p).density();
        prop_assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_matches_bloch_overlap((t1, p1) in angles(), (t2, p2) in angles()) {
        let (a, b) = (PureState::new(t1, p1), PureState::new(t2, p2));
        let fab = fidelity(&a.density(), &b.density()).unwrap();
        let fba = fidelity(&b.density(), &a.density()).unwrap();
        prop_assert!((fab - fba).abs() < 1e-12);
        prop_assert!((fab - overlap_fidelity(&a, &b)).abs() < 1e-12);
        prop_assert!((pure_fidelity(&a, &b) - fab).abs() < 1e-12);
    }

    #[test]
    fn fidelity_ignores_full_turns((t1, p1) in angles(), (t2, p2) in angles(), k in -3i32..3) {
        let shift = TAU * f64::from(k);
        let a = PureState::new(t1, p1);
        let b = PureState::new(t2, p2);
        let b_shifted = PureState::new(t2, p2 + shift);
        let a_shifted = PureState::new(t1 + TAU, p1 - shift);
        let f = fidelity(&a.density(), &b.density()).unwrap();
        prop_assert!((fidelity(&a_shifted.density(), &b_shifted.density()).unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn inverse_undoes_forward_map((t, p) in angles()) {
        let s = PureState::new(t, p);
        let pair = forward_phases(&s);
        prop_assume!(pair.amp_x.min(pair.amp_y) > 0.05);
        let est = Quadrature.reconstruct(
            &AxisReading::from_phases(&pair, RotationAxis::X),
            &AxisReading::from_phases(&pair, RotationAxis::Y),
        ).unwrap();
        prop_assert!((est.state.theta() - s.theta()).abs() < 1e-9);
        prop_assert!(angle_diff(est.state.phi(), s.phi()) < 1e-9);
    }

    #[test]
    fn forward_map_matches_geometry((t, p) in angles()) {
        let pair = forward_phases(&PureState::new(t, p));
        let (alpha, beta, ax, ay) = geometric_phases(t, p);
        prop_assert!(angle_diff(pair.alpha, alpha) < 1e-12);
        prop_assert!(angle_diff(pair.beta, beta) < 1e-12);
        prop_assert!((pair.amp_x - ax).abs() < 1e-12 && (pair.amp_y - ay).abs() < 1e-12);
    }

    #[test]
    fn evaluate_reports_wrapped_finite_errors((t1, p1) in angles(), (t2, p2) in angles()) {
        let pair = forward_phases(&PureState::new(t2, p2));
        prop_assume!(pair.amp_x.max(pair.amp_y) > 0.05);
        let est = Quadrature.reconstruct(
            &AxisReading::from_phases(&pair, RotationAxis::X),
            &AxisReading::from_phases(&pair, RotationAxis::Y),
        ).unwrap();
        let r = evaluate(est, &PureState::new(t1, p1), Channel::Pc, 0).unwrap();
        prop_assert!(r.state_exp.theta().is_finite() && r.state_exp.phi().is_finite());
        prop_assert!(r.delta_phi.abs() <= PI);
        prop_assert!((0.0..=1.0).contains(&r.fidelity));
    }
}

#[test]
fn su2_agrees_with_rotation_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let s = random_state(&mut rng);
        let axis = random_axis(&mut rng);
        let angle = rand::Rng::random_range(&mut rng, -TAU..TAU);
        let rotated = su2_rotate(&s, &axis, angle).unwrap().bloch();
        let v = s.bloch();
        let expect = rodrigues([v.x, v.y, v.z], [axis.x, axis.y, axis.z], angle);
        for (got, want) in [rotated.x, rotated.y, rotated.z].iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }
}

#[test]
fn rotation_about_x_is_right_handed() {
    let s = su2_rotate(&PureState::ground(), &BlochVector::X, PI / 2.0).unwrap();
    let v = s.bloch();
    assert!(v.x.abs() < 1e-12 && (v.y + 1.0).abs() < 1e-12 && v.z.abs() < 1e-12);
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let taus: Vec<f64> = (0..40).map(|k| k as f64 * 1e-8).collect();
    for _ in 0..200 {
        let p = SineParams {
            offset: rand::Rng::random_range(&mut rng, 1e-12..1e-11),
            amplitude: rand::Rng::random_range(&mut rng, 1e-13..3e-12),
            frequency: rand::Rng::random_range(&mut rng, 2e6..8e6),
            phase: rand::Rng::random_range(&mut rng, -PI..PI),
            decay_rate: rand::Rng::random_range(&mut rng, 0.0..2e6),
        };
        for with_decay in [false, true] {
            let analytic = jacobian(&p, &taus, with_decay);
            let numeric = fd_jacobian(&p, &taus, with_decay);
            for k in 0..analytic.ncols() {
                let col_norm = (0..taus.len()).map(|i| analytic[(i, k)].powi(2)).sum::<f64>().sqrt();
                let err = (0..taus.len())
                    .map(|i| (analytic[(i, k)] - numeric[i][k]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(err <= 1e-6 * col_norm, "column {k}: {err} vs {col_norm}");
            }
        }
    }
}

#[test]
fn poisson_counts_have_mean_equal_to_variance() {
    let noise = ChannelNoise::pl();
    let readout = readouts().create("pl", &noise).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws: Vec<f64> = (0..20_000).map(|_| readout.draw(1e4, &mut rng)).collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 1e4).abs() < 0.01 * 1e4, "mean {mean}");
    assert!((var / mean - 1.0).abs() < 0.05, "var {var} mean {mean}");
}
