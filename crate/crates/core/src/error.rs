use alloc::string::String;

use crate::edt::MaskSide;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two grids that must agree do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A constructor argument violates a type invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate mask: no {0} voxels")]
    DegenerateMask(MaskSide),

    #[error("input has {voxels} voxels, limit is {limit}")]
    Size { voxels: usize, limit: usize },

    /// A value outside the domain of the requested loss term.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("class {0} is absent from the ground truth")]
    ClassAbsent(u8),

    #[error("configuration error: {0}")]
    Config(String),
}
