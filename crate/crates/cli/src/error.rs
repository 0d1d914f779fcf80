use std::path::PathBuf;

use genfl_core::protocol::ProtocolError;
use thiserror::Error;

use crate::config::ConfigError;
use crate::metrics::MetricsError;
use crate::plot::PlotError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] ProtocolError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Metrics {
        path: PathBuf,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{0}")]
    Sweep(String),
}

impl CliError {
    /// Stable machine-readable category, printed as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Simulation(_) => "simulation",
            CliError::Io { .. } => "io",
            CliError::Metrics { .. } => "metrics",
            CliError::Plot(_) => "plot",
            CliError::Sweep(_) => "sweep",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// `error[category]: message` on a single line.
    pub fn one_line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], "; ");
        format!("error[{}]: {msg}", self.category())
    }
}
