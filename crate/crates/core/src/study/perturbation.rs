//! Monte Carlo propagation of Rabi-phase errors into reconstructed states.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{wrap_pi, PureState};
use crate::rabi::{forward_phases, PhasePair, RotationAxis};
use crate::readout::trace::fmt_f64;
use crate::readout::Channel;
use crate::registry::Registry;
use crate::rng::{label, stream};
use crate::study::Stat;
use crate::tomography::{evaluate, reconstructors, AxisReading};

/// How a perturbation of the ideal Rabi phases is drawn.
pub trait PhaseErrorModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Human-readable formula recorded in study outputs.
    fn describe(&self, fraction: f64) -> String;

    fn perturb(&self, ideal: &PhasePair, fraction: f64, rng: &mut ChaCha8Rng) -> PhasePair;
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `alpha' = alpha (1 + eps)`, `eps ~ N(0, fraction)`; beta exact.
pub struct AlphaMultiplicative;

impl PhaseErrorModel for AlphaMultiplicative {
    fn name(&self) -> &'static str {
        "alpha-multiplicative"
    }

    fn describe(&self, fraction: f64) -> String {
        format!("alpha' = alpha * (1 + eps), eps ~ Normal(0, {fraction}); beta exact")
    }

    fn perturb(&self, ideal: &PhasePair, fraction: f64, rng: &mut ChaCha8Rng) -> PhasePair {
        PhasePair {
            alpha: ideal.alpha * (1.0 + fraction * normal(rng)),
            ..*ideal
        }
    }
}

/// Independent multiplicative errors on both phases.
pub struct BothMultiplicative;

impl PhaseErrorModel for BothMultiplicative {
    fn name(&self) -> &'static str {
        "both-multiplicative"
    }

    fn describe(&self, fraction: f64) -> String {
        format!("alpha' = alpha * (1 + e1), beta' = beta * (1 + e2), e1, e2 ~ Normal(0, {fraction}) independent")
    }

    fn perturb(&self, ideal: &PhasePair, fraction: f64, rng: &mut ChaCha8Rng) -> PhasePair {
        let ea = normal(rng);
        let eb = normal(rng);
        PhasePair {
            alpha: ideal.alpha * (1.0 + fraction * ea),
            beta: ideal.beta * (1.0 + fraction * eb),
            ..*ideal
        }
    }
}

/// `alpha' = alpha + eps * pi/2`: the error is a fraction of a quarter turn.
pub struct AlphaAdditive;

impl PhaseErrorModel for AlphaAdditive {
    fn name(&self) -> &'static str {
        "alpha-additive"
    }

    fn describe(&self, fraction: f64) -> String {
        format!("alpha' = alpha + eps * pi/2, eps ~ Normal(0, {fraction}); beta exact")
    }

    fn perturb(&self, ideal: &PhasePair, fraction: f64, rng: &mut ChaCha8Rng) -> PhasePair {
        PhasePair {
            alpha: ideal.alpha + fraction * std::f64::consts::FRAC_PI_2 * normal(rng),
            ..*ideal
        }
    }
}

pub type PhaseErrorRegistry = Registry<dyn PhaseErrorModel, ()>;

pub fn phase_error_models() -> &'static PhaseErrorRegistry {
    static REGISTRY: OnceLock<PhaseErrorRegistry> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        PhaseErrorRegistry::new("phase error model")
            .with("alpha-multiplicative", |_| Box::new(AlphaMultiplicative))
            .with("both-multiplicative", |_| Box::new(BothMultiplicative))
            .with("alpha-additive", |_| Box::new(AlphaAdditive))
    })
}

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    /// Polar angles of the target states, degrees in (0, 90].
    pub theta_grid_deg: Vec<f64>,
    /// Azimuths cycled through the trials; a single value fixes phi.
    pub phi_deg: Vec<f64>,
    pub error_model: String,
    pub error_fraction: f64,
    pub trials: usize,
    pub reconstructor: String,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let mut theta_grid_deg: Vec<f64> = (0..9).map(|k| 5.0 + 10.0 * k as f64).collect();
        theta_grid_deg.push(90.0);
        Self {
            theta_grid_deg,
            phi_deg: (0..12).map(|k| 15.0 + 30.0 * k as f64).collect(),
            error_model: "alpha-multiplicative".into(),
            error_fraction: 0.10,
            trials: 10_000,
            reconstructor: crate::tomography::DEFAULT_RECONSTRUCTOR.into(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta_grid_deg.is_empty() {
            return Err(Error::config("study.theta_grid_deg", "grid is empty"));
        }
        if self.theta_grid_deg.iter().any(|t| !(*t > 0.0 && *t <= 90.0)) {
            return Err(Error::config("study.theta_grid_deg", "values must lie in (0, 90]"));
        }
        if self.phi_deg.is_empty() || self.phi_deg.iter().any(|p| !p.is_finite()) {
            return Err(Error::config(
                "study.phi_deg",
                "at least one finite azimuth is required",
            ));
        }
        if !(self.error_fraction.is_finite() && self.error_fraction >= 0.0) {
            return Err(Error::config("study.error_fraction", "must be non-negative"));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::config(
                "study.trials",
                format!("at least {MIN_TRIALS} trials per point"),
            ));
        }
        if !phase_error_models().contains(&self.error_model) {
            return Err(Error::config(
                "study.error_model",
                format!("unknown model `{}`", self.error_model),
            ));
        }
        if !reconstructors().contains(&self.reconstructor) {
            return Err(Error::config(
                "study.reconstructor",
                format!("unknown reconstructor `{}`", self.reconstructor),
            ));
        }
        Ok(())
    }

    pub fn phi_policy(&self) -> String {
        let values = self
            .phi_deg
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        if self.phi_deg.len() == 1 {
            format!("fixed phi = {values} deg")
        } else {
            format!("spread: trials cycle phi over [{values}] deg")
        }
    }
}

/// One Monte Carlo trial; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub theta_t_deg: f64,
    pub phi_deg: f64,
    pub fidelity: f64,
    pub delta_theta_deg: f64,
    pub delta_phi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub theta_t_deg: f64,
    pub trials: usize,
    pub failures: usize,
    pub fidelity: Stat,
    pub abs_delta_theta_deg: Stat,
    pub abs_delta_phi_deg: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub seed: u64,
    pub error_model: String,
    pub error_description: String,
    pub error_fraction: f64,
    pub phi_policy: String,
    pub reconstructor: String,
    pub points: Vec<StudyPoint>,
    pub records: Vec<TrialRecord>,
}

impl StudyResult {
    pub fn point(&self, theta_t_deg: f64) -> Option<&StudyPoint> {
        self.points.iter().find(|p| (p.theta_t_deg - theta_t_deg).abs() < 1e-9)
    }
}

/// Perturbs the ideal Rabi phases of target states and measures how the
/// error propagates into fidelity and angle errors.
///
/// For every grid angle `theta_T`, each trial takes the next azimuth of the
/// policy, computes the exact phases, perturbs them with the configured model
/// and reconstructs. Trial seeds depend only on `master_seed`, the grid index
/// and the trial index.
pub fn alpha_perturbation_study(cfg: &StudyConfig, master_seed: u64) -> Result<StudyResult> {
    cfg.validate()?;
    let model = phase_error_models().create(&cfg.error_model, &())?;
    let reconstructor = reconstructors().create(&cfg.reconstructor, &())?;
    let mut points = Vec::with_capacity(cfg.theta_grid_deg.len());
    let mut records = Vec::with_capacity(cfg.theta_grid_deg.len() * cfg.trials);
    for (g, &theta_t) in cfg.theta_grid_deg.iter().enumerate() {
        let trials: Vec<Option<TrialRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let phi = cfg.phi_deg[t % cfg.phi_deg.len()];
                let target = PureState::from_degrees(theta_t, phi);
                let mut rng = stream(master_seed, &[label::GRID_POINT, g as u64, label::TRIAL, t as u64]);
                let perturbed = model.perturb(&forward_phases(&target), cfg.error_fraction, &mut rng);
                let estimate = reconstructor
                    .reconstruct(
                        &AxisReading::from_phases(&perturbed, RotationAxis::X),
                        &AxisReading::from_phases(&perturbed, RotationAxis::Y),
                    )
                    .ok()?;
                let r = evaluate(estimate, &target, Channel::Pc, 0).ok()?;
                Some(TrialRecord {
                    theta_t_deg: theta_t,
                    phi_deg: phi,
                    fidelity: r.fidelity,
                    delta_theta_deg: r.delta_theta_deg(),
                    delta_phi_deg: wrap_pi(r.delta_phi).to_degrees(),
                })
            })
            .collect();
        let ok: Vec<TrialRecord> = trials.iter().flatten().cloned().collect();
        let column = |f: fn(&TrialRecord) -> f64| Stat::of(&ok.iter().map(f).collect::<Vec<_>>());
        points.push(StudyPoint {
            theta_t_deg: theta_t,
            trials: ok.len(),
            failures: cfg.trials - ok.len(),
            fidelity: column(|r| r.fidelity),
            abs_delta_theta_deg: column(|r| r.delta_theta_deg.abs()),
            abs_delta_phi_deg: column(|r| r.delta_phi_deg.abs()),
        });
        records.extend(ok);
    }
    Ok(StudyResult {
        seed: master_seed,
        error_model: model.name().into(),
        error_description: model.describe(cfg.error_fraction),
        error_fraction: cfg.error_fraction,
        phi_policy: cfg.phi_policy(),
        reconstructor: reconstructor.name().into(),
        points,
        records,
    })
}

pub const PANEL_HEADER: [&str; 4] = ["theta_T_deg", "mean", "std", "trials"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetadata {
    pub seed: u64,
    pub error_model: String,
    pub error_description: String,
    pub error_fraction: f64,
    pub phi_policy: String,
    pub reconstructor: String,
    pub config_hash: String,
}

/// Writes `fidelity.csv`, `delta_theta.csv`, `delta_phi.csv` and
/// `metadata.json` into `dir`; returns the paths written.
pub fn write_study_outputs(result: &StudyResult, dir: &Path, config_hash: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    type Panel = (&'static str, fn(&StudyPoint) -> Stat);
    let panels: [Panel; 3] = [
        ("fidelity.csv", |p| p.fidelity),
        ("delta_theta.csv", |p| p.abs_delta_theta_deg),
        ("delta_phi.csv", |p| p.abs_delta_phi_deg),
    ];
    let mut written = Vec::new();
    for (name, pick) in panels {
        let path = dir.join(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)?;
        w.write_record(PANEL_HEADER)?;
        for p in &result.points {
            let s = pick(p);
            w.write_record([
                fmt_f64(p.theta_t_deg),
                fmt_f64(s.mean),
                fmt_f64(s.std),
                p.trials.to_string(),
            ])?;
        }
        w.flush()?;
        written.push(path);
    }
    let meta = StudyMetadata {
        seed: result.seed,
        error_model: result.error_model.clone(),
        error_description: result.error_description.clone(),
        error_fraction: result.error_fraction,
        phi_policy: result.phi_policy.clone(),
        reconstructor: result.reconstructor.clone(),
        config_hash: config_hash.into(),
    };
    let path = dir.join("metadata.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: usize) -> StudyConfig {
        StudyConfig {
            trials,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn zero_error_gives_unit_fidelity() {
        let cfg = StudyConfig {
            error_fraction: 0.0,
            ..small(120)
        };
        let r = alpha_perturbation_study(&cfg, 1).unwrap();
        for p in &r.points {
            assert!((p.fidelity.mean - 1.0).abs() < 1e-12, "{p:?}");
            assert_eq!(p.failures, 0);
        }
    }

    #[test]
    fn rejects_too_few_trials_and_bad_grid() {
        assert!(small(99).validate().is_err());
        let cfg = StudyConfig {
            theta_grid_deg: vec![0.0, 45.0],
            ..small(100)
        };
        assert!(cfg.validate().is_err());
        let cfg = StudyConfig {
            error_model: "trace-noise".into(),
            ..small(100)
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn study_is_deterministic() {
        let cfg = small(150);
        let a = serde_json::to_string(&alpha_perturbation_study(&cfg, 9).unwrap()).unwrap();
        let b = serde_json::to_string(&alpha_perturbation_study(&cfg, 9).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn alpha_models_leave_beta_untouched() {
        let ideal = forward_phases(&PureState::from_degrees(40.0, 70.0));
        let mut rng = stream(3, &[]);
        for name in ["alpha-multiplicative", "alpha-additive"] {
            let m = phase_error_models().create(name, &()).unwrap();
            let p = m.perturb(&ideal, 0.1, &mut rng);
            assert_eq!(p.beta, ideal.beta);
            assert_ne!(p.alpha, ideal.alpha);
        }
    }
}
