mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpqst::config::CalibrationConfig;
use rpqst::fit::fit_trace;
use rpqst::qubit::wrap_pi;
use rpqst::rabi::{forward_phases, RotationAxis};
use rpqst::readout::{Channel, RabiTrace};
use rpqst::study::{
    alpha_perturbation_study, batch_tomography, calibration::calibration_fidelity, StateSuite, StudyConfig,
};
use rpqst::tomography::{analyze_traces, reconstructors, tomograph, tomograph_channel};
use rpqst::{ExperimentConfig, PureState};

use common::*;

#[test]
fn noiseless_round_trip_over_random_states() {
    let cfg = ExperimentConfig::default().noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 1000 {
        let s = random_state(&mut rng);
        let pair = forward_phases(&s);
        if pair.amp_x.min(pair.amp_y) <= 0.05 || s.theta().sin() < 0.05 {
            continue;
        }
        let run = tomograph(&cfg, &s, checked as u64).unwrap();
        for ch in Channel::BOTH {
            let r = run.outcome(ch).reconstruction.as_ref().unwrap();
            assert!(r.fidelity >= 1.0 - 1e-9, "{s:?} {ch}: {}", r.fidelity);
            assert!(r.delta_theta.abs() < 1e-6, "{s:?}: dtheta {}", r.delta_theta);
            assert!(r.delta_phi.abs() < 1e-6, "{s:?}: dphi {}", r.delta_phi);
        }
        checked += 1;
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let cfg = ExperimentConfig::default();
    let s = PureState::from_degrees(35.0, 130.0);
    let bytes = || {
        let run = tomograph(&cfg, &s, 77).unwrap();
        let mut out = Vec::new();
        for t in run.traces.iter() {
            t.write_csv(&mut out).unwrap();
        }
        out
    };
    assert_eq!(bytes(), bytes());

    let study = StudyConfig {
        trials: 200,
        ..StudyConfig::default()
    };
    let a = serde_json::to_vec(&alpha_perturbation_study(&study, 3).unwrap()).unwrap();
    let b = serde_json::to_vec(&alpha_perturbation_study(&study, 3).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn file_round_trip_matches_in_process_pipeline() {
    let cfg = ExperimentConfig::default();
    let s = PureState::from_degrees(55.0, 320.0);
    let run = tomograph(&cfg, &s, 5).unwrap();
    let reread = |t: &RabiTrace| {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let mut t = RabiTrace::read_csv(buf.as_slice()).unwrap();
        // Trace files carry no drive settings; the nominal frequency comes from the config.
        t.nominal_frequency = Some(cfg.model.frequency_hz());
        t
    };
    let x = reread(&run.traces.pc_x);
    let y = reread(&run.traces.pc_y);
    assert_eq!(x.samples, run.traces.pc_x.samples);
    let rec = reconstructors().create("quadrature", &()).unwrap();
    let outcome = analyze_traces(&x, &y, &cfg.fit, rec.as_ref());
    let a = outcome.reconstruction.unwrap();
    let b = run.pc.reconstruction.as_ref().unwrap();
    assert!((a.fidelity - b.fidelity).abs() < 1e-12);
    assert!((a.state_exp.theta() - b.state_exp.theta()).abs() < 1e-12);
    assert!((a.state_exp.phi() - b.state_exp.phi()).abs() < 1e-12);
}

#[test]
fn single_channel_run_matches_joint_run() {
    let cfg = ExperimentConfig::default();
    let s = PureState::from_degrees(75.0, 160.0);
    let joint = tomograph(&cfg, &s, 12).unwrap();
    let (x, _, outcome) = tomograph_channel(&cfg, &s, 12, Channel::Pl).unwrap();
    assert_eq!(x, joint.traces.pl_x);
    assert_eq!(
        outcome.reconstruction.unwrap(),
        *joint.pl.reconstruction.as_ref().unwrap()
    );
}

#[test]
fn pc_statistics_do_not_depend_on_pl_noise() {
    let suite = StateSuite::default();
    let cfg = ExperimentConfig::default();
    let mut louder = cfg.clone();
    louder.noise.pl.pl_count_rate = 1e3;
    let a = batch_tomography(&suite, &cfg, 8).unwrap();
    let b = batch_tomography(&suite, &louder, 8).unwrap();
    assert_eq!(a.pc, b.pc);
    assert_ne!(a.pl, b.pl);
}

#[test]
fn doubling_noise_lowers_fidelity() {
    let suite = StateSuite::default();
    let cfg = ExperimentConfig::default();
    let mut doubled = cfg.clone();
    doubled.noise.pc.pc_noise_rms *= 2.0;
    let f1 = calibration_fidelity(&cfg, &suite, Channel::Pc, 5, 1).unwrap();
    let f2 = calibration_fidelity(&doubled, &suite, Channel::Pc, 5, 1).unwrap();
    assert!(f2 < f1, "{f2} !< {f1}");
}

#[test]
fn calibrated_rms_reproduces_target_on_fresh_seeds() {
    let suite = StateSuite::default();
    let cfg = ExperimentConfig::default();
    let calib = CalibrationConfig::default();
    let c = rpqst::study::calibrate_noise(&cfg, &suite, &calib, 100).unwrap();
    assert!((c.pc_mean_fidelity - calib.target).abs() <= calib.tolerance);
    let fresh = calibration_fidelity(&c.apply(&cfg), &suite, Channel::Pc, 10, 9_999).unwrap();
    assert!((fresh - calib.target).abs() <= calib.tolerance, "fresh {fresh}");
}

#[test]
fn standard_error_shrinks_as_root_of_trials() {
    let base = StudyConfig {
        theta_grid_deg: vec![45.0, 75.0],
        trials: 2_000,
        ..StudyConfig::default()
    };
    let doubled = StudyConfig {
        trials: 4_000,
        ..base.clone()
    };
    let a = alpha_perturbation_study(&base, 31).unwrap();
    let b = alpha_perturbation_study(&doubled, 31).unwrap();
    for (pa, pb) in a.points.iter().zip(&b.points) {
        let ratio = pa.fidelity.sem(pa.trials) / pb.fidelity.sem(pb.trials);
        // The ratio of two sample standard errors at these sizes scatters by
        // a few percent around sqrt(2).
        assert!((ratio - 2f64.sqrt()).abs() < 3.0 * 0.05 * 2f64.sqrt(), "ratio {ratio}");
    }
}

#[test]
fn phase_interval_covers_truth_two_thirds_of_the_time() {
    let cfg = ExperimentConfig::default();
    let s = PureState::from_degrees(55.0, 80.0);
    let pair = forward_phases(&s);
    let truth = wrap_pi(-pair.alpha);
    let mut covered = 0;
    let fits = 1000;
    for seed in 0..fits {
        let (x, _, _) = tomograph_channel(&cfg, &s, seed, Channel::Pc).unwrap();
        let fit = fit_trace(&x, &cfg.fit).unwrap();
        let sigma = fit.phase_sigma().unwrap();
        if wrap_pi(fit.phase - truth).abs() <= sigma {
            covered += 1;
        }
    }
    let rate = f64::from(covered) / fits as f64;
    assert!((rate - 0.68).abs() <= 0.05, "coverage {rate}");
}

#[test]
fn degenerate_x_axis_is_flagged_on_both_channels() {
    let cfg = ExperimentConfig::default();
    let run = tomograph(&cfg, &PureState::from_degrees(90.0, 0.0), 4).unwrap();
    for ch in Channel::BOTH {
        let outcome = run.outcome(ch);
        let flagged = match &outcome.reconstruction {
            Ok(r) => r.flags.iter().any(|f| f.as_str() == "x_degenerate"),
            Err(_) => outcome.fit(RotationAxis::X).is_err(),
        };
        assert!(flagged, "{ch}: {:?}", outcome.reconstruction);
    }
}
