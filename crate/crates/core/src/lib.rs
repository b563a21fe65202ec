//! Rabi-phase quantum state tomography of a single spin qubit with
//! simultaneous photon-counting and photocurrent readout.
//!
//! The pipeline runs in four stages, each usable on its own:
//!
//! 1. [`readout`] plans envelope-based pulse protocols and simulates the
//!    recorded Rabi traces of either detector.
//! 2. [`fit`] extracts amplitude and phase of each trace.
//! 3. [`tomography`] turns the x and y Rabi phases into a state estimate and
//!    scores it against the prepared state.
//! 4. [`study`] aggregates many measurements and propagates phase errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fit;
pub mod qubit;
pub mod rabi;
pub mod readout;
pub mod registry;
pub mod rng;
pub mod study;
pub mod tomography;

pub use config::{ExperimentConfig, RunConfig};
pub use error::{Error, ErrorKind, Result};
pub use fit::{fit_sinusoid, fit_trace, initial_guess, FitOptions, SinusoidFit};
pub use qubit::{fidelity, su2_rotate, BlochVector, DensityMatrix, PureState};
pub use rabi::{forward_phases, ideal_signal, PhasePair, RabiModel, RotationAxis};
pub use readout::{photocurrent_amplitude, synthesize_trace, Channel, ChannelNoise, RabiTrace};
pub use tomography::{evaluate, reconstruct_state, tomograph, Reconstruction};
