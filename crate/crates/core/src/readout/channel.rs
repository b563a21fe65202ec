//! Readout channels: photon counting (PL) and photocurrent (PC).

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Elementary charge in coulombs (exact SI value).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Carriers collected per NV charge cycle: one electron on ionization, one hole on recovery.
pub const CARRIERS_PER_CYCLE: f64 = 2.0;

/// Photocurrent from a charge-cycle rate, in amperes.
pub fn photocurrent_amplitude(cycle_rate: f64) -> f64 {
    CARRIERS_PER_CYCLE * ELEMENTARY_CHARGE * cycle_rate
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Pl,
    Pc,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Pl, Channel::Pc];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Pl => "pl",
            Channel::Pc => "pc",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pl" => Ok(Channel::Pl),
            "pc" => Ok(Channel::Pc),
            other => Err(Error::config("channel", format!("expected pl or pc, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelNoise {
    pub channel: Channel,
    /// Detected photons per second while the readout laser is on.
    pub pl_count_rate: f64,
    pub pc_mean_current: f64,
    /// Gaussian noise of one envelope's current reading, amperes.
    pub pc_noise_rms: f64,
    pub rng_seed: u64,
    /// Poisson counting noise; when off the PL sample equals its mean.
    pub shot_noise: bool,
    pub pc_band: [f64; 2],
}

impl Default for ChannelNoise {
    fn default() -> Self {
        Self {
            channel: Channel::Pc,
            pl_count_rate: 1.0e5,
            pc_mean_current: 10e-12,
            pc_noise_rms: 0.5e-12,
            rng_seed: 0,
            shot_noise: true,
            pc_band: [1e-12, 1e-10],
        }
    }
}

impl ChannelNoise {
    pub fn pl() -> Self {
        Self {
            channel: Channel::Pl,
            ..Self::default()
        }
    }

    pub fn pc() -> Self {
        Self::default()
    }

    /// Same configuration with every random contribution switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            shot_noise: false,
            pc_noise_rms: 0.0,
            ..*self
        }
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self { rng_seed, ..*self }
    }

    pub fn readout(&self) -> Result<Box<dyn Readout>> {
        self.validate()?;
        readouts().create(self.channel.as_str(), self)
    }

    pub fn validate(&self) -> Result<()> {
        let prefix = self.channel.as_str();
        match self.channel {
            Channel::Pl => {
                if !(self.pl_count_rate.is_finite() && self.pl_count_rate > 0.0) {
                    return Err(Error::config(
                        format!("noise.{prefix}.pl_count_rate"),
                        "must be positive",
                    ));
                }
            }
            Channel::Pc => {
                let [lo, hi] = self.pc_band;
                if !(lo >= 0.0 && hi >= lo) {
                    return Err(Error::config(
                        format!("noise.{prefix}.pc_band"),
                        "must satisfy 0 <= lo <= hi",
                    ));
                }
                if !(self.pc_noise_rms.is_finite() && self.pc_noise_rms >= 0.0) {
                    return Err(Error::config(
                        format!("noise.{prefix}.pc_noise_rms"),
                        "must be non-negative",
                    ));
                }
                let current = self.pc_mean_current;
                if !(current.is_finite() && current >= lo && current <= hi) {
                    return Err(Error::Plausibility { current, lo, hi });
                }
            }
        }
        Ok(())
    }
}

/// How repeated visits of one envelope fold into the recorded sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accumulation {
    /// Counts add up across sweeps.
    Sum,
    /// Currents are averaged across sweeps.
    Mean,
}

/// A detector turning the expected per-visit signal into a recorded value.
pub trait Readout: Send + Sync {
    fn channel(&self) -> Channel;

    /// Spin-independent signal level of one envelope visit.
    fn visit_baseline(&self, repetitions: u64, readout_window: f64) -> f64;

    fn draw(&self, mean: f64, rng: &mut ChaCha8Rng) -> f64;

    fn accumulation(&self) -> Accumulation;

    /// Expected recorded sample level after all sweeps.
    fn recorded_baseline(&self, repetitions: u64, readout_window: f64, sweeps: u32) -> f64 {
        let visit = self.visit_baseline(repetitions, readout_window);
        match self.accumulation() {
            Accumulation::Sum => visit * f64::from(sweeps),
            Accumulation::Mean => visit,
        }
    }
}

pub struct PhotonCounting {
    rate: f64,
    shot_noise: bool,
}

impl Readout for PhotonCounting {
    fn channel(&self) -> Channel {
        Channel::Pl
    }

    fn visit_baseline(&self, repetitions: u64, readout_window: f64) -> f64 {
        self.rate * readout_window * repetitions as f64
    }

    fn draw(&self, mean: f64, rng: &mut ChaCha8Rng) -> f64 {
        if !self.shot_noise {
            return mean;
        }
        if mean <= 0.0 {
            return 0.0;
        }
        Poisson::new(mean).expect("positive finite mean").sample(rng)
    }

    fn accumulation(&self) -> Accumulation {
        Accumulation::Sum
    }
}

pub struct Photocurrent {
    mean_current: f64,
    noise_rms: f64,
}

impl Readout for Photocurrent {
    fn channel(&self) -> Channel {
        Channel::Pc
    }

    fn visit_baseline(&self, _repetitions: u64, _readout_window: f64) -> f64 {
        self.mean_current
    }

    fn draw(&self, mean: f64, rng: &mut ChaCha8Rng) -> f64 {
        if self.noise_rms == 0.0 {
            return mean;
        }
        Normal::new(mean, self.noise_rms).expect("finite rms").sample(rng)
    }

    fn accumulation(&self) -> Accumulation {
        Accumulation::Mean
    }
}

pub type ReadoutRegistry = Registry<dyn Readout, ChannelNoise>;

/// Built-in readout channels, keyed by channel name.
pub fn readouts() -> &'static ReadoutRegistry {
    static REGISTRY: OnceLock<ReadoutRegistry> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        ReadoutRegistry::new("readout")
            .with("pl", |n| {
                Box::new(PhotonCounting {
                    rate: n.pl_count_rate,
                    shot_noise: n.shot_noise,
                })
            })
            .with("pc", |n| {
                Box::new(Photocurrent {
                    mean_current: n.pc_mean_current,
                    noise_rms: n.pc_noise_rms,
                })
            })
    })
}
