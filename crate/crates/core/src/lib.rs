//! Numerical core for boundary-aware tumor segmentation.
//!
//! Everything here is pure computation over dense 3D grids: exact anisotropic
//! distance transforms, truncated/normalized surface distance fields, the
//! cross-entropy / soft-Dice / boundary-aware loss family with analytic
//! gradients, Dice and HD95 scoring, and resampling plus z-score
//! normalization. File formats, reports and the command-line front end live
//! in the `batseg` crate.
//!
//! Voxel order is fixed across the crate: for dims `(H, W, D)` the linear
//! index of `(x, y, z)` is `x + H * (y + W * z)`. Multi-channel grids store
//! channels as whole planes, so channel `k` occupies
//! `values[k * H*W*D .. (k + 1) * H*W*D]`.

#![no_std]

extern crate alloc;

pub mod dfield;
pub mod edt;
mod error;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod preprocess;
pub mod reduce;
pub mod volume;

pub use dfield::{build_field, field_stats, ChannelStats, ClassMode, FieldConfig};
pub use edt::{edt_binary, edt_bruteforce, MaskSide, SignedDistanceVolume};
pub use error::{Error, Result};
pub use losses::{
    boundary_aware, cross_entropy, soft_dice, soft_dice_channels, total_loss, BaLossConfig, BaseTerm, LossReport,
    LossValue, SignConvention,
};
pub use metrics::{dice_score, hd95, ClassScore, ScoreStatus, SubjectScore, MISSING_PREDICTION_HD95};
pub use preprocess::{resample_labels, resample_volume, zscore, Interpolation, ResampleSpec};
pub use volume::{
    one_hot, ChannelVolume, Dims, DistanceField, LabelVolume, PredictionMode, PredictionVolume,
    Spacing, Volume3D,
};

/// Library version, shared with the CLI and any embedding layer.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
