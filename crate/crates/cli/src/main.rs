//! Command-line front end for Rabi-phase state tomography simulations.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rpqst::rabi::RotationAxis;
use rpqst::readout::Channel;
use rpqst::{Error, ErrorKind, PureState};

#[derive(Parser, Debug)]
#[command(
    name = "rpqst",
    version,
    about = "Rabi-phase quantum state tomography with PL and PC readout"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate Rabi traces of a prepared state and write them as CSV.
    Synthesize {
        /// Target state as `theta_deg,phi_deg`.
        #[arg(long, value_parser = parse_state)]
        state: PureState,
        /// Drive axis; both when omitted.
        #[arg(long)]
        axis: Option<AxisArg>,
        #[arg(long, default_value = "both")]
        channel: ChannelArg,
    },
    /// Fit Rabi trace files; an x and y trace of one measurement are also reconstructed.
    Fit {
        /// Trace CSV files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Simulate, fit and reconstruct one state.
    Tomograph {
        #[arg(long, value_parser = parse_state)]
        state: PureState,
        #[arg(long, default_value = "both")]
        channel: ChannelArg,
    },
    /// Batch statistics over the state suite, or the phase-error propagation sweep.
    Study {
        which: StudyKind,
        /// Calibrate channel noise to the configured target before a batch.
        #[arg(long)]
        calibrate: bool,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum AxisArg {
    X,
    Y,
}

impl From<AxisArg> for RotationAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::X => RotationAxis::X,
            AxisArg::Y => RotationAxis::Y,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ChannelArg {
    Pl,
    Pc,
    Both,
}

impl ChannelArg {
    pub fn channels(self) -> Vec<Channel> {
        match self {
            ChannelArg::Pl => vec![Channel::Pl],
            ChannelArg::Pc => vec![Channel::Pc],
            ChannelArg::Both => Channel::BOTH.to_vec(),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum StudyKind {
    Batch,
    Fig5,
}

fn parse_state(s: &str) -> Result<PureState, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [theta, phi] = parts.as_slice() else {
        return Err("expected `theta_deg,phi_deg`".into());
    };
    let theta: f64 = theta.parse().map_err(|_| format!("`{theta}` is not a number"))?;
    let phi: f64 = phi.parse().map_err(|_| format!("`{phi}` is not a number"))?;
    PureState::try_new(theta.to_radians(), phi.to_radians()).map_err(|e| e.to_string())
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::load_config(&cli.global).and_then(|ctx| match cli.command {
        Command::Synthesize { state, axis, channel } => commands::synthesize(&ctx, &state, axis, channel),
        Command::Fit { traces } => commands::fit(&ctx, &traces),
        Command::Tomograph { state, channel } => commands::tomograph(&ctx, &state, channel),
        Command::Study { which, calibrate } => commands::study(&ctx, which, calibrate),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
