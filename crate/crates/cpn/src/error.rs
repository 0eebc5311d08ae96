use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for usage errors (clap uses the same value).
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: cpn_core::Error,
    },
    #[error(transparent)]
    Core(#[from] cpn_core::Error),
    #[error("{0}")]
    Data(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cpn_core::Error as E;
        match self {
            CliError::Core(E::Invariant(_) | E::ResampleBudget { .. })
            | CliError::File {
                source: E::Invariant(_),
                ..
            }
            | CliError::Pool(_) => EXIT_INVARIANT,
            _ => EXIT_DATA,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
