//! State reconstruction from fitted Rabi phases, and the end-to-end
//! simulate, fit and reconstruct pipeline.

pub mod reconstruct;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fit::{fit_at_frequency, fit_trace, FitOptions, SinusoidFit};
use crate::qubit::{fidelity, wrap_pi, DensityMatrix, PureState};
use crate::rabi::{PhasePair, RotationAxis};
use crate::readout::trace::fmt_f64;
use crate::readout::{rpqst_trace_pair, synthesize_trace, Channel, RabiTrace, TraceSet};
use crate::rng::{derive_seed, label};

pub use reconstruct::{
    flags_to_string, reconstructors, AxisReading, Estimate, Flags, PhaseTangent, Quadrature, QualityFlag,
    Reconstructor, DEFAULT_RECONSTRUCTOR,
};

/// Outcome of reconstructing one channel's measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub state_exp: PureState,
    pub prepared: PureState,
    pub rho_exp: DensityMatrix,
    pub fidelity: f64,
    /// Radians, `theta_exp - theta_prepared`.
    pub delta_theta: f64,
    /// Radians, wrapped to `(-pi, pi]`.
    pub delta_phi: f64,
    pub channel: Channel,
    pub phase_inputs: PhasePair,
    pub flags: Flags,
    pub seed: u64,
}

impl Reconstruction {
    pub fn delta_theta_deg(&self) -> f64 {
        self.delta_theta.to_degrees()
    }

    pub fn delta_phi_deg(&self) -> f64 {
        self.delta_phi.to_degrees()
    }
}

/// Scores an estimate against the nominally prepared state.
pub fn evaluate(estimate: Estimate, prepared: &PureState, channel: Channel, seed: u64) -> Result<Reconstruction> {
    let rho_exp = estimate.state.density();
    let f = fidelity(&prepared.density(), &rho_exp)?;
    Ok(Reconstruction {
        state_exp: estimate.state,
        prepared: *prepared,
        rho_exp,
        fidelity: f,
        delta_theta: estimate.state.theta() - prepared.theta(),
        delta_phi: wrap_pi(estimate.state.phi() - prepared.phi()),
        channel,
        phase_inputs: estimate.phase_inputs,
        flags: estimate.flags,
        seed,
    })
}

/// Reconstructs a state from the x and y fits with the default reconstructor.
pub fn reconstruct_state(fit_x: &SinusoidFit, fit_y: &SinusoidFit) -> Result<Estimate> {
    Quadrature.reconstruct(
        &AxisReading::from_fit(fit_x, RotationAxis::X),
        &AxisReading::from_fit(fit_y, RotationAxis::Y),
    )
}

/// Fits and reconstruction for one channel. A failed axis fit is kept as an
/// error and the reconstruction proceeds from the remaining axis.
#[derive(Debug)]
pub struct ChannelOutcome {
    pub channel: Channel,
    pub fit_x: Result<SinusoidFit>,
    pub fit_y: Result<SinusoidFit>,
    pub reconstruction: Result<Reconstruction>,
}

impl ChannelOutcome {
    pub fn fit(&self, axis: RotationAxis) -> &Result<SinusoidFit> {
        match axis {
            RotationAxis::X => &self.fit_x,
            RotationAxis::Y => &self.fit_y,
        }
    }
}

/// Fits both traces of one channel and reconstructs the prepared state.
pub fn analyze_traces(
    x: &RabiTrace,
    y: &RabiTrace,
    opts: &FitOptions,
    reconstructor: &dyn Reconstructor,
) -> ChannelOutcome {
    let channel = x.channel;
    let (fit_x, fit_y) = shared_frequency_fits(x, y, fit_trace(x, opts), fit_trace(y, opts), opts);
    let fit_x = fit_x.map_err(|e| e.at("fit x"));
    let fit_y = fit_y.map_err(|e| e.at("fit y"));
    let reconstruction = (|| {
        if x.channel != y.channel || x.prepared != y.prepared || x.seed != y.seed {
            return Err(Error::TraceMismatch(
                "x and y traces come from different measurements".into(),
            ));
        }
        let reading = |fit: &Result<SinusoidFit>, axis| match fit {
            Ok(f) => AxisReading::from_fit(f, axis),
            Err(_) => AxisReading::missing(axis),
        };
        let estimate = reconstructor
            .reconstruct(&reading(&fit_x, RotationAxis::X), &reading(&fit_y, RotationAxis::Y))
            .map_err(|e| e.at("reconstruct"))?;
        evaluate(estimate, &x.prepared, channel, x.seed)
    })();
    ChannelOutcome {
        channel,
        fit_x,
        fit_y,
        reconstruction,
    }
}

/// Amplitude, in standard errors, above which a free-frequency fit is
/// trusted to have found a real oscillation.
const CLEAR_SIGNIFICANCE: f64 = 5.0;

fn clearly_significant(fit: &SinusoidFit) -> bool {
    fit.amplitude_sigma()
        .is_some_and(|s| fit.amplitude >= CLEAR_SIGNIFICANCE * s)
}

/// Both drives share one Rabi frequency. When one axis oscillates clearly
/// and the other does not, the weak trace is refitted at the strong trace's
/// frequency: a free frequency search over pure noise always finds some
/// peak, which would make a flat trace look significant.
fn shared_frequency_fits(
    x: &RabiTrace,
    y: &RabiTrace,
    fit_x: Result<SinusoidFit>,
    fit_y: Result<SinusoidFit>,
    opts: &FitOptions,
) -> (Result<SinusoidFit>, Result<SinusoidFit>) {
    let strong = |f: &Result<SinusoidFit>| matches!(f, Ok(f) if clearly_significant(f));
    match (&fit_x, &fit_y) {
        (Ok(fx), _) if strong(&fit_x) && !strong(&fit_y) => {
            let refit = fit_at_frequency(y, fx.frequency, opts);
            (fit_x, refit)
        }
        (_, Ok(fy)) if strong(&fit_y) && !strong(&fit_x) => {
            let refit = fit_at_frequency(x, fy.frequency, opts);
            (refit, fit_y)
        }
        _ => (fit_x, fit_y),
    }
}

/// Traces and per-channel outcomes of one simulated tomography measurement.
#[derive(Debug)]
pub struct TomographyRun {
    pub prepared: PureState,
    /// State actually produced by the (possibly miscalibrated) preparation pulse.
    pub actual: PureState,
    pub traces: TraceSet,
    pub pl: ChannelOutcome,
    pub pc: ChannelOutcome,
}

impl TomographyRun {
    pub fn outcome(&self, channel: Channel) -> &ChannelOutcome {
        match channel {
            Channel::Pl => &self.pl,
            Channel::Pc => &self.pc,
        }
    }
}

/// Noise seed of one channel within a measurement.
pub fn channel_seed(seed: u64, channel: Channel) -> u64 {
    let lbl = match channel {
        Channel::Pl => label::CHANNEL_PL,
        Channel::Pc => label::CHANNEL_PC,
    };
    derive_seed(seed, &[lbl])
}

/// State the preparation pulse leaves behind under the configured systematics.
pub fn actual_state(cfg: &ExperimentConfig, prepared: &PureState) -> PureState {
    cfg.sequence_for(prepared, RotationAxis::X)
        .prepared_state(&cfg.model, &cfg.systematic)
}

/// Simulates both channels of one measurement and reconstructs each.
pub fn tomograph(cfg: &ExperimentConfig, prepared: &PureState, seed: u64) -> Result<TomographyRun> {
    let reconstructor = reconstructors().create(&cfg.reconstructor, &())?;
    let actual = actual_state(cfg, prepared);
    let plan_x = cfg.plan_for(prepared, RotationAxis::X).map_err(|e| e.at("plan"))?;
    let plan_y = cfg.plan_for(prepared, RotationAxis::Y).map_err(|e| e.at("plan"))?;
    let noise_pl = cfg.noise.pl.with_seed(channel_seed(seed, Channel::Pl));
    let noise_pc = cfg.noise.pc.with_seed(channel_seed(seed, Channel::Pc));
    let traces = rpqst_trace_pair(&cfg.model, &actual, prepared, &plan_x, &plan_y, &noise_pl, &noise_pc)
        .map_err(|e| e.at("synthesize"))?;
    let pl = analyze_traces(&traces.pl_x, &traces.pl_y, &cfg.fit, reconstructor.as_ref());
    let pc = analyze_traces(&traces.pc_x, &traces.pc_y, &cfg.fit, reconstructor.as_ref());
    Ok(TomographyRun {
        prepared: *prepared,
        actual,
        traces,
        pl,
        pc,
    })
}

/// Single-channel variant of [`tomograph`]; the noise seeds match those of
/// the two-channel run.
pub fn tomograph_channel(
    cfg: &ExperimentConfig,
    prepared: &PureState,
    seed: u64,
    channel: Channel,
) -> Result<(RabiTrace, RabiTrace, ChannelOutcome)> {
    let reconstructor = reconstructors().create(&cfg.reconstructor, &())?;
    let actual = actual_state(cfg, prepared);
    let noise = cfg.noise.get(channel).with_seed(channel_seed(seed, channel));
    let trace = |axis| -> Result<RabiTrace> {
        let plan = cfg.plan_for(prepared, axis).map_err(|e| e.at("plan"))?;
        synthesize_trace(&cfg.model, &actual, prepared, axis, &plan, &noise).map_err(|e| e.at("synthesize"))
    };
    let x = trace(RotationAxis::X)?;
    let y = trace(RotationAxis::Y)?;
    let outcome = analyze_traces(&x, &y, &cfg.fit, reconstructor.as_ref());
    Ok((x, y, outcome))
}

pub const RECONSTRUCTION_HEADER: [&str; 10] = [
    "channel",
    "theta_true_deg",
    "phi_true_deg",
    "theta_exp_deg",
    "phi_exp_deg",
    "fidelity",
    "delta_theta_deg",
    "delta_phi_deg",
    "flags",
    "seed",
];

/// Flat record of a reconstruction, as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRecord {
    pub channel: String,
    pub theta_true_deg: f64,
    pub phi_true_deg: f64,
    pub theta_exp_deg: f64,
    pub phi_exp_deg: f64,
    pub fidelity: f64,
    pub delta_theta_deg: f64,
    pub delta_phi_deg: f64,
    pub flags: String,
    pub seed: u64,
}

impl From<&Reconstruction> for ReconstructionRecord {
    fn from(r: &Reconstruction) -> Self {
        Self {
            channel: r.channel.as_str().to_string(),
            theta_true_deg: r.prepared.theta_deg(),
            phi_true_deg: r.prepared.phi_deg(),
            theta_exp_deg: r.state_exp.theta_deg(),
            phi_exp_deg: r.state_exp.phi_deg(),
            fidelity: r.fidelity,
            delta_theta_deg: r.delta_theta_deg(),
            delta_phi_deg: r.delta_phi_deg(),
            flags: flags_to_string(&r.flags),
            seed: r.seed,
        }
    }
}

/// Writes reconstructions as CSV with LF line endings and full precision.
pub fn write_reconstructions<W: Write>(writer: W, rows: &[Reconstruction]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(RECONSTRUCTION_HEADER)?;
    for r in rows {
        let rec = ReconstructionRecord::from(r);
        w.write_record([
            rec.channel,
            fmt_f64(rec.theta_true_deg),
            fmt_f64(rec.phi_true_deg),
            fmt_f64(rec.theta_exp_deg),
            fmt_f64(rec.phi_exp_deg),
            fmt_f64(rec.fidelity),
            fmt_f64(rec.delta_theta_deg),
            fmt_f64(rec.delta_phi_deg),
            rec.flags,
            rec.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
