//! File formats, corpus IO and the command-line front-end of the
//! corner-proposal detector in [`cpn_core`].

pub mod commands;
pub mod error;
pub mod formats;
pub mod io;
pub mod report;

pub use crate::error::{CliError, Result};
