use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Synth,
    Transform,
    Kmeans,
    Sparse,
    Fit,
    Eval,
    Emit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Synth => "synth",
            Stage::Transform => "transform",
            Stage::Kmeans => "kmeans",
            Stage::Sparse => "sparse",
            Stage::Fit => "fit",
            Stage::Eval => "eval",
            Stage::Emit => "emit",
        })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {message}")]
    Input { stage: Stage, message: String },

    #[error("{stage}: {source}")]
    Solver { stage: Stage, source: pdpclust::Error },

    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: Stage,
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(stage: Stage, message: impl Into<String>) -> Self {
        CliError::Input {
            stage,
            message: message.into(),
        }
    }

    pub fn io(stage: Stage, path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            stage,
            path: path.to_path_buf(),
            source,
        }
    }

    /// Wraps a library error: solver and fit failures are reported as such,
    /// everything else is a problem with the input or the parameters.
    pub fn core(stage: Stage, e: pdpclust::Error) -> Self {
        match e {
            pdpclust::Error::SolverStalled { .. } | pdpclust::Error::InsufficientClusters { .. } => {
                CliError::Solver { stage, source: e }
            }
            other => CliError::input(stage, other.to_string()),
        }
    }

    pub fn stage(&self) -> Stage {
        match self {
            CliError::Input { stage, .. } | CliError::Solver { stage, .. } | CliError::Io { stage, .. } => *stage,
        }
    }

    /// Process exit status: 2 input, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => 2,
            CliError::Solver { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// One-line suggestion printed under the error.
    pub fn hint(&self) -> &'static str {
        match (self, self.stage()) {
            (CliError::Io { .. }, Stage::Emit) => "check that the --out directory is writable",
            (CliError::Io { .. }, _) => "check the path and its permissions",
            (CliError::Solver { .. }, Stage::Fit) => "the partition has too few usable clusters; inspect phi.csv or lower --threshold",
            (CliError::Solver { .. }, _) => "raise --inner-iters or loosen --primal-tol/--dual-tol",
            (_, Stage::Config) => "check the flag values and that every referenced file exists",
            (_, Stage::Ingest) => "expected `freq_hz,re,im` CSV rows or a two-port Touchstone file",
            (_, Stage::Kmeans) => "pass --k, at most the number of profile bins",
            (_, Stage::Transform) => "the sweep may be too short or silent; check the input grid",
            (_, Stage::Eval) => "ground truth is a `bin_index,cluster_id` CSV",
            _ => "check the parameters of this stage",
        }
    }
}
