//! Run configuration, loaded from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::qubit::PureState;
use crate::rabi::{RabiModel, RotationAxis};
use crate::readout::{
    default_tau_grid, plan_envelopes, Channel, ChannelNoise, EnvelopePlan, PulseSequence, SequenceTiming,
    SystematicErrors,
};
use crate::study::{StateSuite, StudyConfig};
use crate::tomography::reconstructors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    /// Seconds; one probe duration per envelope.
    pub envelope_duration: f64,
    pub tau_points: usize,
    /// Rabi periods covered by the generated grid.
    pub tau_periods: f64,
    /// Explicit probe durations in seconds, overriding the generated grid.
    pub tau_values: Option<Vec<f64>>,
    pub sweep_repeats: u32,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            envelope_duration: 0.5,
            tau_points: 40,
            tau_periods: 2.0,
            tau_values: None,
            sweep_repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub pl: ChannelNoise,
    pub pc: ChannelNoise,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            pl: ChannelNoise::pl(),
            pc: ChannelNoise::pc(),
        }
    }
}

impl NoiseConfig {
    pub fn get(&self, channel: Channel) -> &ChannelNoise {
        match channel {
            Channel::Pl => &self.pl,
            Channel::Pc => &self.pc,
        }
    }

    pub fn get_mut(&mut self, channel: Channel) -> &mut ChannelNoise {
        match channel {
            Channel::Pl => &mut self.pl,
            Channel::Pc => &mut self.pc,
        }
    }
}

/// Everything needed to simulate and analyze one tomography measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: RabiModel,
    pub sequence: SequenceTiming,
    pub plan: PlanConfig,
    pub noise: NoiseConfig,
    pub systematic: SystematicErrors,
    pub fit: FitOptions,
    pub reconstructor: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: RabiModel::default(),
            sequence: SequenceTiming::default(),
            plan: PlanConfig::default(),
            noise: NoiseConfig::default(),
            systematic: SystematicErrors::default(),
            fit: FitOptions::default(),
            reconstructor: crate::tomography::DEFAULT_RECONSTRUCTOR.to_string(),
        }
    }
}

impl ExperimentConfig {
    /// Noise-free, calibration-error-free variant of this configuration.
    pub fn noiseless(&self) -> Self {
        let mut cfg = self.clone();
        cfg.noise.pl = cfg.noise.pl.noiseless();
        cfg.noise.pc = cfg.noise.pc.noiseless();
        cfg.systematic = SystematicErrors::default();
        cfg
    }

    pub fn tau_values(&self) -> Vec<f64> {
        match &self.plan.tau_values {
            Some(v) => v.clone(),
            None => default_tau_grid(&self.model, self.plan.tau_points, self.plan.tau_periods),
        }
    }

    pub fn sequence_for(&self, target: &PureState, axis: RotationAxis) -> PulseSequence {
        PulseSequence::for_state(&self.sequence, &self.model, target, axis)
    }

    pub fn plan_for(&self, target: &PureState, axis: RotationAxis) -> Result<EnvelopePlan> {
        plan_envelopes(
            &self.sequence_for(target, axis),
            &self.sequence,
            self.plan.envelope_duration,
            &self.tau_values(),
            self.plan.sweep_repeats,
        )
    }

    /// Pins channel tags and checks every section.
    pub fn validate(&mut self) -> Result<()> {
        self.noise.pl.channel = Channel::Pl;
        self.noise.pc.channel = Channel::Pc;
        self.model.validate()?;
        self.sequence.validate()?;
        self.fit.validate()?;
        self.noise.pl.validate()?;
        self.noise.pc.validate()?;
        if self.plan.tau_values.is_none() {
            if self.plan.tau_points < crate::readout::trace::MIN_SAMPLES {
                return Err(Error::config(
                    "plan.tau_points",
                    "at least 8 probe durations are required",
                ));
            }
            if !(self.plan.tau_periods >= 1.0) {
                return Err(Error::config(
                    "plan.tau_periods",
                    "the grid must span at least one Rabi period",
                ));
            }
        }
        if !reconstructors().contains(&self.reconstructor) {
            return Err(Error::config(
                "reconstructor",
                format!(
                    "unknown reconstructor `{}` (registered: {})",
                    self.reconstructor,
                    reconstructors().names().collect::<Vec<_>>().join(", ")
                ),
            ));
        }
        // Plans are state dependent only through the preparation pulse; the
        // longest one (theta = pi) bounds every other.
        self.plan_for(&PureState::new(std::f64::consts::PI, 0.0), RotationAxis::X)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub target: f64,
    /// Amperes.
    pub pc_rms_bounds: [f64; 2],
    /// Counts per second.
    pub pl_rate_bounds: [f64; 2],
    /// Suite repetitions averaged per evaluation.
    pub replicas: usize,
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            target: 0.995,
            pc_rms_bounds: [0.0, 10e-12],
            pl_rate_bounds: [1e2, 1e8],
            replicas: 10,
            tolerance: 0.002,
            max_steps: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub experiment: ExperimentConfig,
    pub suite: StateSuite,
    pub study: StudyConfig,
    pub calibration: CalibrationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: None,
            experiment: ExperimentConfig::default(),
            suite: StateSuite::default(),
            study: StudyConfig::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&mut self) -> Result<()> {
        self.experiment.validate()?;
        self.suite.validate()?;
        self.study.validate()?;
        let c = &self.calibration;
        if !(c.target > 0.0 && c.target <= 1.0) {
            return Err(Error::config("calibration.target", "must lie in (0, 1]"));
        }
        if c.replicas == 0 || c.max_steps == 0 {
            return Err(Error::config("calibration", "replicas and max_steps must be positive"));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Short content hash identifying this configuration. The output
    /// directory is left out, so the same run written elsewhere hashes alike.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        config_hash(&canonical.to_toml_string())
    }
}

pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..6])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.experiment.plan.tau_points, 40);
        assert_eq!(cfg.experiment.noise.pl.channel, Channel::Pl);
    }

    #[test]
    fn partial_channel_section_keeps_channel_tag() {
        let cfg = RunConfig::from_toml_str("[experiment.noise.pl]\npl_count_rate = 5e4\n").unwrap();
        assert_eq!(cfg.experiment.noise.pl.channel, Channel::Pl);
        assert_eq!(cfg.experiment.noise.pl.pl_count_rate, 5e4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("[experiment.model]\nrabi_freq = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("rabi_freq"), "{err}");
    }

    #[test]
    fn short_envelope_names_the_field() {
        let err = RunConfig::from_toml_str("[experiment.plan]\nenvelope_duration = 1e-6\n").unwrap_err();
        assert!(err.to_string().contains("plan.envelope_duration"), "{err}");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn hash_ignores_output_dir_but_not_seed() {
        let cfg = RunConfig::default();
        let moved = RunConfig {
            output_dir: Some("elsewhere".into()),
            ..cfg.clone()
        };
        let reseeded = RunConfig { seed: 7, ..cfg.clone() };
        assert_eq!(moved.hash(), cfg.hash());
        assert_ne!(reseeded.hash(), cfg.hash());
    }
}
