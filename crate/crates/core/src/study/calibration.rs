//! Tunes channel noise until a batch reaches a target mean fidelity.

use serde::{Deserialize, Serialize};

use crate::config::{CalibrationConfig, ExperimentConfig};
use crate::error::{Error, Result};
use crate::readout::{Channel, ChannelNoise};
use crate::rng::{derive_seed, label};
use crate::study::{batch_channel, StateSuite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedNoise {
    pub pl: ChannelNoise,
    pub pc: ChannelNoise,
    /// Mean fidelity over the calibration seed set at the chosen setting.
    pub pl_mean_fidelity: f64,
    pub pc_mean_fidelity: f64,
    pub pl_steps: usize,
    pub pc_steps: usize,
}

impl CalibratedNoise {
    /// `cfg` with both channels replaced by the calibrated noise.
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut out = cfg.clone();
        out.noise.pl = self.pl;
        out.noise.pc = self.pc;
        out
    }
}

/// Mean fidelity of `channel` over a fixed set of calibration batches.
///
/// The seed set is the same for every evaluation, so the bisection compares
/// noise levels on common random numbers.
pub fn calibration_fidelity(
    cfg: &ExperimentConfig,
    suite: &StateSuite,
    channel: Channel,
    replicas: usize,
    master_seed: u64,
) -> Result<f64> {
    let mut sum = 0.0;
    for r in 0..replicas {
        let seed = derive_seed(master_seed, &[label::CALIBRATION, r as u64]);
        let batch = batch_channel(suite, cfg, seed, channel)?;
        let stats = batch
            .channel(channel)
            .ok_or_else(|| Error::Calibration(format!("every {channel} reconstruction failed")))?;
        sum += stats.fidelity.mean;
    }
    Ok(sum / replicas as f64)
}

struct Bracket {
    x: f64,
    value: f64,
    steps: usize,
}

/// Finds `x` in `[lo, hi]` where the monotone `eval` crosses `target`.
fn bisect(
    eval: impl Fn(f64) -> Result<f64>,
    (lo, hi): (f64, f64),
    increasing: bool,
    target: f64,
    tol: f64,
    max_steps: usize,
    what: &str,
) -> Result<Bracket> {
    let f_lo = eval(lo)?;
    let f_hi = eval(hi)?;
    // Orient so that `a` gives the higher fidelity.
    let ((mut a, fa), (mut b, fb)) = if increasing {
        ((hi, f_hi), (lo, f_lo))
    } else {
        ((lo, f_lo), (hi, f_hi))
    };
    if fa <= target {
        return if target - fa <= tol {
            Ok(Bracket {
                x: a,
                value: fa,
                steps: 0,
            })
        } else {
            Err(Error::Calibration(format!(
                "{what}: target {target} unreachable; best fidelity in bounds is {fa:.6} at {a:e}"
            )))
        };
    }
    if fb >= target {
        return if fb - target <= tol {
            Ok(Bracket {
                x: b,
                value: fb,
                steps: 0,
            })
        } else {
            Err(Error::Calibration(format!(
                "{what}: target {target} unreachable; worst fidelity in bounds is {fb:.6} at {b:e}"
            )))
        };
    }
    let mut best = if (fa - target).abs() < (fb - target).abs() {
        Bracket {
            x: a,
            value: fa,
            steps: 0,
        }
    } else {
        Bracket {
            x: b,
            value: fb,
            steps: 0,
        }
    };
    for step in 1..=max_steps {
        let mid = 0.5 * (a + b);
        let fm = eval(mid)?;
        best.steps = step;
        if (fm - target).abs() < (best.value - target).abs() {
            best.x = mid;
            best.value = fm;
        }
        if (fm - target).abs() <= 0.25 * tol {
            break;
        }
        if fm > target {
            a = mid;
        } else {
            b = mid;
        }
    }
    if (best.value - target).abs() > tol {
        return Err(Error::Calibration(format!(
            "{what}: bisection ended at fidelity {:.6}, more than {tol} from {target} (bracket {a:e}..{b:e})",
            best.value
        )));
    }
    Ok(best)
}

/// Calibrates PC noise rms and PL count rate so that the suite's mean
/// fidelity on each channel matches `calib.target` within `calib.tolerance`.
pub fn calibrate_noise(
    cfg: &ExperimentConfig,
    suite: &StateSuite,
    calib: &CalibrationConfig,
    master_seed: u64,
) -> Result<CalibratedNoise> {
    suite.validate()?;
    let with_noise = |channel: Channel, noise: ChannelNoise| {
        let mut c = cfg.clone();
        *c.noise.get_mut(channel) = noise;
        c
    };

    let [rms_lo, rms_hi] = calib.pc_rms_bounds;
    if !(rms_lo >= 0.0 && rms_hi > rms_lo) {
        return Err(Error::config("calibration.pc_rms_bounds", "need 0 <= lo < hi"));
    }
    let pc_noise = |rms: f64| ChannelNoise {
        pc_noise_rms: rms,
        ..cfg.noise.pc
    };
    let pc = bisect(
        |rms| {
            calibration_fidelity(
                &with_noise(Channel::Pc, pc_noise(rms)),
                suite,
                Channel::Pc,
                calib.replicas,
                master_seed,
            )
        },
        (rms_lo, rms_hi),
        false,
        calib.target,
        calib.tolerance,
        calib.max_steps,
        "pc_noise_rms",
    )?;

    let [rate_lo, rate_hi] = calib.pl_rate_bounds;
    if !(rate_lo > 0.0 && rate_hi > rate_lo) {
        return Err(Error::config("calibration.pl_rate_bounds", "need 0 < lo < hi"));
    }
    let pl_noise = |log_rate: f64| ChannelNoise {
        pl_count_rate: log_rate.exp(),
        shot_noise: true,
        ..cfg.noise.pl
    };
    let pl = bisect(
        |lr| {
            calibration_fidelity(
                &with_noise(Channel::Pl, pl_noise(lr)),
                suite,
                Channel::Pl,
                calib.replicas,
                master_seed,
            )
        },
        (rate_lo.ln(), rate_hi.ln()),
        true,
        calib.target,
        calib.tolerance,
        calib.max_steps,
        "pl_count_rate",
    )?;

    Ok(CalibratedNoise {
        pl: pl_noise(pl.x),
        pc: pc_noise(pc.x),
        pl_mean_fidelity: pl.value,
        pc_mean_fidelity: pc.value,
        pl_steps: pl.steps,
        pc_steps: pc.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_target_with_zero_bound_returns_zero_noise() {
        let cfg = ExperimentConfig::default();
        let calib = CalibrationConfig {
            target: 1.0,
            replicas: 1,
            pl_rate_bounds: [1e2, 1e12],
            tolerance: 0.002,
            ..CalibrationConfig::default()
        };
        let c = calibrate_noise(&cfg, &StateSuite::default(), &calib, 3).unwrap();
        assert_eq!(c.pc.pc_noise_rms, 0.0);
        assert!(c.pc_mean_fidelity > 1.0 - 1e-9);
        assert!(c.pl_mean_fidelity > 0.998);
    }

    #[test]
    fn unreachable_target_reports_bracket() {
        let cfg = ExperimentConfig::default();
        let calib = CalibrationConfig {
            target: 0.995,
            pc_rms_bounds: [0.0, 1e-15],
            replicas: 1,
            ..CalibrationConfig::default()
        };
        let err = calibrate_noise(&cfg, &StateSuite::default(), &calib, 3).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)), "{err}");
        assert!(err.to_string().contains("pc_noise_rms"));
    }
}
