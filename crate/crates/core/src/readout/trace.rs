use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::PureState;
use crate::rabi::{ideal_signal, RabiModel, RotationAxis};
use crate::readout::channel::{Accumulation, Channel, ChannelNoise};
use crate::readout::sequence::EnvelopePlan;
use crate::rng::{self, label};

pub const MIN_SAMPLES: usize = 8;

pub const TRACE_HEADER: [&str; 7] = ["tau_s", "signal", "channel", "axis", "theta_deg", "phi_deg", "seed"];

/// One recorded Rabi measurement: a sample per envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiTrace {
    pub axis: RotationAxis,
    pub channel: Channel,
    pub tau_values: Vec<f64>,
    pub samples: Vec<f64>,
    /// Nominal target state of the preparation pulse.
    pub prepared: PureState,
    pub seed: u64,
    /// Drive-derived Rabi frequency in Hz, when known.
    pub nominal_frequency: Option<f64>,
}

impl RabiTrace {
    pub fn validate(&self) -> Result<()> {
        if self.tau_values.len() != self.samples.len() {
            return Err(Error::TraceMismatch(format!(
                "{} probe durations but {} samples",
                self.tau_values.len(),
                self.samples.len()
            )));
        }
        if self.samples.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples(self.samples.len()));
        }
        if self.samples.iter().chain(&self.tau_values).any(|v| !v.is_finite()) {
            return Err(Error::TraceMismatch("non-finite sample or probe duration".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> f64 {
        match (self.tau_values.first(), self.tau_values.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(TRACE_HEADER)?;
        let theta = fmt_f64(self.prepared.theta_deg());
        let phi = fmt_f64(self.prepared.phi_deg());
        let seed = self.seed.to_string();
        for (tau, sample) in self.tau_values.iter().zip(&self.samples) {
            w.write_record([
                fmt_f64(*tau).as_str(),
                fmt_f64(*sample).as_str(),
                self.channel.as_str(),
                self.axis.as_str(),
                theta.as_str(),
                phi.as_str(),
                seed.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a trace file; every row must agree on channel, axis, state and seed.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r
            .headers()
            .map_err(|e| format_error(1, "header", e.to_string()))?
            .clone();
        let got: Vec<&str> = header.iter().map(str::trim).collect();
        if got != TRACE_HEADER {
            return Err(format_error(
                1,
                "header",
                format!("expected `{}`, found `{}`", TRACE_HEADER.join(","), got.join(",")),
            ));
        }

        let mut tau_values = Vec::new();
        let mut samples = Vec::new();
        let mut meta: Option<(Channel, RotationAxis, f64, f64, u64)> = None;
        for record in r.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                format_error(line, "row", e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |idx: usize| record.get(idx).unwrap_or("").trim();
            let num = |idx: usize| -> Result<f64> {
                field(idx).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    format_error(
                        line,
                        TRACE_HEADER[idx],
                        format!("`{}` is not a finite number", field(idx)),
                    )
                })
            };
            tau_values.push(num(0)?);
            samples.push(num(1)?);
            let channel: Channel = field(2)
                .parse()
                .map_err(|_| format_error(line, "channel", format!("unknown channel `{}`", field(2))))?;
            let axis: RotationAxis = field(3)
                .parse()
                .map_err(|_| format_error(line, "axis", format!("unknown axis `{}`", field(3))))?;
            let seed = field(6)
                .parse::<u64>()
                .map_err(|_| format_error(line, "seed", format!("`{}` is not an unsigned integer", field(6))))?;
            let row_meta = (channel, axis, num(4)?, num(5)?, seed);
            match meta {
                None => meta = Some(row_meta),
                Some(m) if m == row_meta => {}
                Some(_) => {
                    return Err(format_error(
                        line,
                        "channel/axis/theta_deg/phi_deg/seed",
                        "differs from first row".into(),
                    ))
                }
            }
        }
        let (channel, axis, theta_deg, phi_deg, seed) =
            meta.ok_or_else(|| format_error(2, "row", "file has no data rows".into()))?;
        let trace = RabiTrace {
            axis,
            channel,
            tau_values,
            samples,
            prepared: PureState::from_degrees(theta_deg, phi_deg),
            seed,
            nominal_frequency: None,
        };
        trace.validate()?;
        Ok(trace)
    }
}

fn format_error(line: u64, column: &str, message: String) -> Error {
    Error::TraceFormat {
        line,
        column: column.to_string(),
        message,
    }
}

/// Seventeen significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Simulates one channel's recording of a Rabi sweep.
///
/// `actual` is the state the device really holds; `prepared` is the nominal
/// target written to the trace metadata.
pub fn synthesize_trace(
    model: &RabiModel,
    actual: &PureState,
    prepared: &PureState,
    axis: RotationAxis,
    plan: &EnvelopePlan,
    noise: &ChannelNoise,
) -> Result<RabiTrace> {
    model.validate()?;
    let readout = noise.readout()?;
    let mut rng = rng::stream(noise.rng_seed, &[axis_label(axis)]);
    let n = plan.len();
    let mut acc = vec![0.0; n];
    let means: Vec<f64> = (0..n)
        .map(|i| {
            let level = readout.visit_baseline(plan.repetitions[i], plan.readout_window);
            ideal_signal(&model.with_baseline(level), actual, axis, plan.tau_values[i])
        })
        .collect();
    for i in plan.visit_order() {
        acc[i] += readout.draw(means[i], &mut rng);
    }
    if readout.accumulation() == Accumulation::Mean {
        let sweeps = f64::from(plan.sweep_repeats);
        acc.iter_mut().for_each(|v| *v /= sweeps);
    }
    let trace = RabiTrace {
        axis,
        channel: noise.channel,
        tau_values: plan.tau_values.clone(),
        samples: acc,
        prepared: *prepared,
        seed: noise.rng_seed,
        nominal_frequency: Some(model.frequency_hz()),
    };
    trace.validate()?;
    Ok(trace)
}

fn axis_label(axis: RotationAxis) -> u64 {
    match axis {
        RotationAxis::X => label::AXIS_X,
        RotationAxis::Y => label::AXIS_Y,
    }
}

/// The four simultaneous recordings of one tomography run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub pl_x: RabiTrace,
    pub pl_y: RabiTrace,
    pub pc_x: RabiTrace,
    pub pc_y: RabiTrace,
}

impl TraceSet {
    pub fn get(&self, channel: Channel, axis: RotationAxis) -> &RabiTrace {
        match (channel, axis) {
            (Channel::Pl, RotationAxis::X) => &self.pl_x,
            (Channel::Pl, RotationAxis::Y) => &self.pl_y,
            (Channel::Pc, RotationAxis::X) => &self.pc_x,
            (Channel::Pc, RotationAxis::Y) => &self.pc_y,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &RabiTrace> {
        [&self.pl_x, &self.pl_y, &self.pc_x, &self.pc_y].into_iter()
    }
}

/// x and y Rabi traces on both channels, recorded simultaneously.
pub fn rpqst_trace_pair(
    model: &RabiModel,
    actual: &PureState,
    prepared: &PureState,
    plan_x: &EnvelopePlan,
    plan_y: &EnvelopePlan,
    noise_pl: &ChannelNoise,
    noise_pc: &ChannelNoise,
) -> Result<TraceSet> {
    if plan_x.tau_values != plan_y.tau_values {
        return Err(Error::TraceMismatch("x and y plans use different probe grids".into()));
    }
    if noise_pl.channel != Channel::Pl || noise_pc.channel != Channel::Pc {
        return Err(Error::config("noise", "expected one PL and one PC channel"));
    }
    let synth = |axis, plan, noise| synthesize_trace(model, actual, prepared, axis, plan, noise);
    Ok(TraceSet {
        pl_x: synth(RotationAxis::X, plan_x, noise_pl)?,
        pl_y: synth(RotationAxis::Y, plan_y, noise_pl)?,
        pc_x: synth(RotationAxis::X, plan_x, noise_pc)?,
        pc_y: synth(RotationAxis::Y, plan_y, noise_pc)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::readout::sequence::{default_tau_grid, plan_envelopes, PulseSequence, SequenceTiming};

    fn plan(model: &RabiModel, state: &PureState, axis: RotationAxis, sweeps: u32) -> EnvelopePlan {
        let timing = SequenceTiming::default();
        let seq = PulseSequence::for_state(&timing, model, state, axis);
        plan_envelopes(&seq, &timing, 0.5, &default_tau_grid(model, 40, 2.0), sweeps).unwrap()
    }

    #[test]
    fn noiseless_trace_equals_ideal_signal() {
        let model = RabiModel::default();
        let state = PureState::from_degrees(37.0, 120.0);
        for noise in [ChannelNoise::pl().noiseless(), ChannelNoise::pc().noiseless()] {
            for axis in RotationAxis::BOTH {
                let plan = plan(&model, &state, axis, 3);
                let trace = synthesize_trace(&model, &state, &state, axis, &plan, &noise).unwrap();
                let readout = noise.readout().unwrap();
                for (i, (&tau, &got)) in trace.tau_values.iter().zip(&trace.samples).enumerate() {
                    let base = readout.recorded_baseline(plan.repetitions[i], plan.readout_window, plan.sweep_repeats);
                    let want = ideal_signal(&model.with_baseline(base), &state, axis, tau);
                    assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn pl_samples_are_counts() {
        let model = RabiModel::default();
        let state = PureState::from_degrees(37.0, 120.0);
        let plan = plan(&model, &state, RotationAxis::X, 1);
        let trace = synthesize_trace(&model, &state, &state, RotationAxis::X, &plan, &ChannelNoise::pl()).unwrap();
        assert!(trace.samples.iter().all(|s| *s >= 0.0 && s.fract() == 0.0));
    }

    #[test]
    fn trace_pair_rejects_mismatched_grids() {
        let model = RabiModel::default();
        let state = PureState::from_degrees(20.0, 10.0);
        let px = plan(&model, &state, RotationAxis::X, 1);
        let mut py = plan(&model, &state, RotationAxis::Y, 1);
        py.tau_values[3] *= 1.01;
        let err = rpqst_trace_pair(
            &model,
            &state,
            &state,
            &px,
            &py,
            &ChannelNoise::pl(),
            &ChannelNoise::pc(),
        );
        assert!(matches!(err, Err(Error::TraceMismatch(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let model = RabiModel::default();
        let state = PureState::from_degrees(15.37, 235.0);
        let plan = plan(&model, &state, RotationAxis::Y, 1);
        let noise = ChannelNoise::pc().with_seed(42);
        let trace = synthesize_trace(&model, &state, &state, RotationAxis::Y, &plan, &noise).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tau_s,signal,channel,axis,theta_deg,phi_deg,seed\n"));
        assert!(!text.contains('\r'));
        let back = RabiTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, trace.samples);
        assert_eq!(back.tau_values, trace.tau_values);
        assert_eq!((back.axis, back.channel, back.seed), (trace.axis, trace.channel, 42));
    }

    #[test]
    fn malformed_files_report_location() {
        let err = RabiTrace::read_csv("tau,signal\n0,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::TraceFormat { line: 1, .. }));
        let mut text = String::from("tau_s,signal,channel,axis,theta_deg,phi_deg,seed\n");
        for k in 0..10 {
            let signal = if k == 4 { "abc".to_string() } else { k.to_string() };
            text.push_str(&format!("{k}e-8,{signal},pc,x,10,20,1\n"));
        }
        match RabiTrace::read_csv(text.as_bytes()).unwrap_err() {
            Error::TraceFormat { line, column, .. } => {
                assert_eq!(line, 6);
                assert_eq!(column, "signal");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
