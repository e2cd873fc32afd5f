//! File formats, configuration files and the command-line front end for
//! [`freqsynth_core`].
//!
//! * [`fsv`]: the `FSV1` volume format.
//! * [`checkpoint`]: model parameter containers.
//! * [`manifest`]: dataset manifests and synthetic dataset generation.
//! * [`config`]: `key = value` training configuration.
//! * [`curve`] and [`report`]: loss curves and metric reports.
//! * [`pgm`]: slice export.
//! * [`cli`]: the `freqsynth` command.

mod bytes;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod curve;
pub mod error;
pub mod fsv;
pub mod manifest;
pub mod pgm;
pub mod provenance;
pub mod report;

pub use error::{Error, FormatError, FormatErrorKind, Result};
pub use freqsynth_core as core;
