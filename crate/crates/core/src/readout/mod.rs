//! Envelope-based pulse protocols and simulated PL/PC recordings.

pub mod channel;
pub mod sequence;
pub mod trace;

pub use channel::{photocurrent_amplitude, readouts, Channel, ChannelNoise, Readout};
pub use sequence::{default_tau_grid, plan_envelopes, EnvelopePlan, PulseSequence, SequenceTiming, SystematicErrors};
pub use trace::{rpqst_trace_pair, synthesize_trace, RabiTrace, TraceSet};
