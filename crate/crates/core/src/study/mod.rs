//! Aggregate studies: batch tomography over a state suite, the Rabi-phase
//! error propagation sweep, and noise calibration.

pub mod calibration;
pub mod perturbation;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::qubit::{wrap_pi, PureState};
use crate::readout::Channel;
use crate::rng::{derive_seed, label};
use crate::tomography::{tomograph, tomograph_channel, Reconstruction};

pub use calibration::{calibrate_noise, CalibratedNoise};
pub use perturbation::{
    alpha_perturbation_study, phase_error_models, write_study_outputs, PhaseErrorModel, StudyConfig, StudyPoint,
    StudyResult, TrialRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub repetitions: u32,
}

impl SuiteEntry {
    pub fn state(&self) -> PureState {
        PureState::from_degrees(self.theta_deg, self.phi_deg)
    }
}

/// Ordered states with repetition counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateSuite {
    pub states: Vec<SuiteEntry>,
}

impl Default for StateSuite {
    /// Ten states on the upper quarter sphere, 21 measurements in total.
    fn default() -> Self {
        let entry = |theta_deg, phi_deg, repetitions| SuiteEntry {
            theta_deg,
            phi_deg,
            repetitions,
        };
        Self {
            states: vec![
                entry(15.0, 235.0, 3),
                entry(15.0, 55.0, 2),
                entry(35.0, 10.0, 2),
                entry(35.0, 130.0, 2),
                entry(35.0, 250.0, 2),
                entry(55.0, 80.0, 2),
                entry(55.0, 200.0, 2),
                entry(55.0, 320.0, 2),
                entry(75.0, 160.0, 2),
                entry(75.0, 340.0, 2),
            ],
        }
    }
}

impl StateSuite {
    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::config("suite.states", "at least one state is required"));
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.repetitions < 2 {
                return Err(Error::config(
                    format!("suite.states[{i}].repetitions"),
                    "every state is tomographed at least twice",
                ));
            }
            PureState::try_new(s.theta_deg.to_radians(), s.phi_deg.to_radians())
                .map_err(|_| Error::config(format!("suite.states[{i}]"), "angles must be finite"))?;
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.states.iter().map(|s| s.repetitions as usize).sum()
    }

    /// One prepared state per measurement, in suite order.
    pub fn measurements(&self) -> Vec<PureState> {
        self.states
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.state(), s.repetitions as usize))
            .collect()
    }
}

/// Seed of the `index`-th measurement of a batch.
pub fn measurement_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[label::MEASUREMENT, index as u64])
}

/// Sample mean and standard deviation (n - 1 denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }

    /// Standard error of the mean.
    pub fn sem(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

/// Constant angle offsets, in radians, removed from every reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AngleOffsets {
    pub theta: f64,
    pub phi: f64,
}

fn offset_fidelity(r: &Reconstruction, off: AngleOffsets) -> f64 {
    let (t, p) = (r.prepared.theta(), r.prepared.phi());
    let te = r.state_exp.theta() - off.theta;
    let pe = r.state_exp.phi() - off.phi;
    let overlap = t.cos() * te.cos() + t.sin() * te.sin() * (p - pe).cos();
    ((1.0 + overlap) / 2.0).clamp(0.0, 1.0)
}

/// Mean fidelity after removing `off` from every reconstructed angle.
pub fn corrected_fidelities(records: &[&Reconstruction], off: AngleOffsets) -> Vec<f64> {
    records.iter().map(|r| offset_fidelity(r, off)).collect()
}

/// Constant (theta, phi) offsets maximizing the summed fidelity.
///
/// Coordinate ascent where each half-step is solved exactly: with one offset
/// held, the summed fidelity in the other is `A cos(m) + B sin(m) + const`.
/// Starting from zero offsets, the result is never worse than the raw sum.
pub fn optimal_offsets(records: &[&Reconstruction]) -> AngleOffsets {
    let mut off = AngleOffsets::default();
    if records.is_empty() {
        return off;
    }
    let total = |o: AngleOffsets| records.iter().map(|r| offset_fidelity(r, o)).sum::<f64>();
    let mut current = total(off);
    for _ in 0..200 {
        let prev = current;

        let (mut s, mut c) = (0.0, 0.0);
        for r in records {
            let te = r.state_exp.theta() - off.theta;
            let w = r.prepared.theta().sin() * te.sin();
            let dphi = r.state_exp.phi() - r.prepared.phi();
            s += w * dphi.sin();
            c += w * dphi.cos();
        }
        if s != 0.0 || c != 0.0 {
            let candidate = AngleOffsets { phi: s.atan2(c), ..off };
            let value = total(candidate);
            if value >= current {
                off = candidate;
                current = value;
            }
        }

        let (mut a, mut b) = (0.0, 0.0);
        for r in records {
            let (st, ct) = r.prepared.theta().sin_cos();
            let (se, ce) = r.state_exp.theta().sin_cos();
            let cp = (r.state_exp.phi() - off.phi - r.prepared.phi()).cos();
            a += ct * ce + cp * st * se;
            b += ct * se - cp * st * ce;
        }
        if a != 0.0 || b != 0.0 {
            let candidate = AngleOffsets {
                theta: b.atan2(a),
                ..off
            };
            let value = total(candidate);
            if value >= current {
                off = candidate;
                current = value;
            }
        }

        if current - prev <= 1e-15 * current.abs() {
            break;
        }
    }
    off
}

/// Per-channel batch statistics; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub channel: Channel,
    pub count: usize,
    pub fidelity: Stat,
    /// Mean is the systematic part, std the random part.
    pub delta_theta_deg: Stat,
    pub delta_phi_deg: Stat,
    /// Fidelity after removing the plain mean offsets.
    pub mean_offset_fidelity: Stat,
    /// Fidelity after removing the best constant offsets.
    pub optimized_fidelity: Stat,
    pub optimal_offset_theta_deg: f64,
    pub optimal_offset_phi_deg: f64,
}

impl ChannelSummary {
    pub fn from_records(channel: Channel, records: &[&Reconstruction]) -> Self {
        let fid: Vec<f64> = records.iter().map(|r| r.fidelity).collect();
        let dt: Vec<f64> = records.iter().map(|r| r.delta_theta_deg()).collect();
        let dp: Vec<f64> = records.iter().map(|r| r.delta_phi_deg()).collect();
        let delta_theta_deg = Stat::of(&dt);
        let delta_phi_deg = Stat::of(&dp);
        let mean_offsets = AngleOffsets {
            theta: delta_theta_deg.mean.to_radians(),
            phi: delta_phi_deg.mean.to_radians(),
        };
        let best = optimal_offsets(records);
        Self {
            channel,
            count: records.len(),
            fidelity: Stat::of(&fid),
            delta_theta_deg,
            delta_phi_deg,
            mean_offset_fidelity: Stat::of(&corrected_fidelities(records, mean_offsets)),
            optimized_fidelity: Stat::of(&corrected_fidelities(records, best)),
            optimal_offset_theta_deg: best.theta.to_degrees(),
            optimal_offset_phi_deg: wrap_pi(best.phi).to_degrees(),
        }
    }
}

/// A measurement whose reconstruction failed on one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFailure {
    pub index: usize,
    pub channel: Option<Channel>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub seed: u64,
    pub measurements: usize,
    pub pl: Option<ChannelSummary>,
    pub pc: Option<ChannelSummary>,
    pub failures: Vec<MeasurementFailure>,
    #[serde(skip)]
    pub records: Vec<Reconstruction>,
}

impl BatchSummary {
    pub fn channel(&self, channel: Channel) -> Option<&ChannelSummary> {
        match channel {
            Channel::Pl => self.pl.as_ref(),
            Channel::Pc => self.pc.as_ref(),
        }
    }

    fn from_outcomes(seed: u64, measurements: usize, outcomes: Vec<(usize, Channel, Result<Reconstruction>)>) -> Self {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for (index, channel, outcome) in outcomes {
            match outcome {
                Ok(r) => records.push(r),
                Err(e) => failures.push(MeasurementFailure {
                    index,
                    channel: Some(channel),
                    error: e.to_string(),
                }),
            }
        }
        let summary = |ch: Channel| {
            let rows: Vec<&Reconstruction> = records.iter().filter(|r| r.channel == ch).collect();
            (!rows.is_empty()).then(|| ChannelSummary::from_records(ch, &rows))
        };
        Self {
            seed,
            measurements,
            pl: summary(Channel::Pl),
            pc: summary(Channel::Pc),
            failures,
            records,
        }
    }
}

/// Tomographs every (state, repetition) of the suite on both channels.
///
/// Measurements run in parallel; each has its own seed derived from
/// `master_seed` and its position, so results do not depend on scheduling.
/// Failed measurements are recorded and skipped.
pub fn batch_tomography(suite: &StateSuite, cfg: &ExperimentConfig, master_seed: u64) -> Result<BatchSummary> {
    suite.validate()?;
    let states = suite.measurements();
    let runs: Vec<(usize, Result<_>)> = states
        .par_iter()
        .enumerate()
        .map(|(i, s)| (i, tomograph(cfg, s, measurement_seed(master_seed, i))))
        .collect();
    let mut outcomes = Vec::with_capacity(2 * runs.len());
    let mut failures = Vec::new();
    for (i, run) in runs {
        match run {
            Ok(run) => {
                outcomes.push((i, Channel::Pl, run.pl.reconstruction));
                outcomes.push((i, Channel::Pc, run.pc.reconstruction));
            }
            Err(e) => failures.push(MeasurementFailure {
                index: i,
                channel: None,
                error: e.to_string(),
            }),
        }
    }
    let mut summary = BatchSummary::from_outcomes(master_seed, states.len(), outcomes);
    failures.append(&mut summary.failures);
    failures.sort_by_key(|f| f.index);
    summary.failures = failures;
    Ok(summary)
}

/// Single-channel batch; the channel's seeds match those of [`batch_tomography`].
pub fn batch_channel(
    suite: &StateSuite,
    cfg: &ExperimentConfig,
    master_seed: u64,
    channel: Channel,
) -> Result<BatchSummary> {
    suite.validate()?;
    let states = suite.measurements();
    let outcomes: Vec<(usize, Channel, Result<Reconstruction>)> = states
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let r = tomograph_channel(cfg, s, measurement_seed(master_seed, i), channel)
                .and_then(|(_, _, outcome)| outcome.reconstruction);
            (i, channel, r)
        })
        .collect();
    Ok(BatchSummary::from_outcomes(master_seed, states.len(), outcomes))
}
