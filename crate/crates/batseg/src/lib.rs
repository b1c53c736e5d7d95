//! File formats, fold evaluation, reports and the command-line front end
//! around [`batseg_core`].

pub mod cli;
mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod manifest;
pub mod nifti;
pub mod raw;
pub mod report;

pub use batseg_core as core;
pub use error::{Error, Result};
