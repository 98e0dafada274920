//! Experiment harness around the `exmodem` library: baseline BER curves,
//! blind clustering demodulation, transmitter training, learned-scheme
//! evaluation and hyperparameter sweeps, all emitting stable CSV.

pub mod commands;
pub mod config;
pub mod curve;

pub use commands::{
    cmd_baseline_ber, cmd_cluster_demod, cmd_eval_scheme, cmd_sweep, cmd_train,
    ClusterDemodOutput, SweepOutput, TrainRun,
};
pub use config::{ExperimentConfig, Mode};
pub use curve::{BerCurve, CurvePoint, CURVE_CSV_HEADER};

/// Harness-level error: library errors plus IO and usage problems.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] exmodem::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Short category tag for the binary's error line.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(exmodem::Error::Parse { .. }) => "parse",
            CliError::Core(_) => "invalid",
            CliError::Io(_) => "io",
            CliError::Usage(_) => "usage",
        }
    }
}
