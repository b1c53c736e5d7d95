//! Ground-truth tumor surface distance fields.
//!
//! For each tumor class the signed distance `d` to the class boundary is
//! computed, the exterior is cut off beyond `m * M` (with `M` the largest
//! interior distance of that class over the whole volume) and the kept values
//! are mapped to `(d / M + 1) / 2`. Interior voxels land in `(0.5, 1]`,
//! kept exterior voxels in `[0, 0.5)`, and everything that was cut off is 0.

use alloc::vec;
use alloc::vec::Vec;

use crate::edt::signed_distance;
use crate::volume::{ChannelVolume, DistanceField, LabelVolume, Spacing};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassMode {
    /// One channel per tumor class.
    #[default]
    Multiclass,
    /// A single channel built from the union of all tumor classes.
    ClassAgnostic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig {
    pub truncation_multiplier: f64,
    pub class_mode: ClassMode,
    /// Prepend an all-zero background channel.
    pub include_background_channel: bool,
    /// Measure distances in voxel units instead of millimetres.
    pub unit_spacing: bool,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            truncation_multiplier: 1.0,
            class_mode: ClassMode::Multiclass,
            include_background_channel: false,
            unit_spacing: false,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.truncation_multiplier;
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Config(alloc::format!(
                "truncation multiplier must be positive, got {m}"
            )));
        }
        if m != 1.0 && m != 2.0 && m != 3.0 {
            log::warn!("truncation multiplier {m} is outside the usual {{1, 2, 3}}");
        }
        Ok(())
    }

    /// Number of field channels produced for a `num_classes`-class volume.
    pub fn field_channels(&self, num_classes: u8) -> usize {
        let tumor = match self.class_mode {
            ClassMode::Multiclass => usize::from(num_classes) - 1,
            ClassMode::ClassAgnostic => 1,
        };
        tumor + usize::from(self.include_background_channel)
    }
}

/// Builds the truncated, normalized per-class surface distance field.
///
/// A class with no voxels yields an all-zero channel. A class covering the
/// whole volume has no boundary and yields an all-ones channel.
pub fn build_field(gt: &LabelVolume, cfg: &FieldConfig) -> Result<DistanceField> {
    cfg.validate()?;
    let dims = gt.dims();
    let spacing = if cfg.unit_spacing { Spacing::unit() } else { gt.spacing() };
    let n = dims.len();

    let masks: Vec<Vec<bool>> = match cfg.class_mode {
        ClassMode::Multiclass => (1..gt.num_classes()).map(|k| gt.mask(k)).collect(),
        ClassMode::ClassAgnostic => vec![gt.labels().iter().map(|&l| l != 0).collect()],
    };

    let channels = masks.len() + usize::from(cfg.include_background_channel);
    let mut values = Vec::with_capacity(n * channels);
    if cfg.include_background_channel {
        values.resize(n, 0.0);
    }
    for mask in &masks {
        values.extend(channel_field(mask, dims, spacing, cfg.truncation_multiplier)?);
    }
    DistanceField::new(ChannelVolume::new(dims, gt.spacing(), channels, values)?)
}

fn channel_field(
    mask: &[bool],
    dims: crate::volume::Dims,
    spacing: Spacing,
    multiplier: f64,
) -> Result<Vec<f64>> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Ok(vec![0.0; mask.len()]);
    }
    if count == mask.len() {
        return Ok(vec![1.0; mask.len()]);
    }
    let sdv = signed_distance(mask, dims, spacing)?;
    let max_interior = sdv.max_interior();
    let cutoff = multiplier * max_interior;
    Ok(sdv
        .values()
        .iter()
        .map(|&d| {
            if d > 0.0 {
                (d / max_interior + 1.0) / 2.0
            } else if -d > cutoff {
                0.0
            } else {
                // only negative once m > 1 lets |d| exceed M
                ((d / max_interior + 1.0) / 2.0).max(0.0)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub min: f64,
    pub max: f64,
    pub zero_fraction: f64,
    pub above_half_fraction: f64,
}

pub fn field_stats(field: &DistanceField) -> Vec<ChannelStats> {
    (0..field.channels())
        .map(|k| {
            let c = field.channel(k);
            let n = c.len() as f64;
            ChannelStats {
                min: c.iter().copied().fold(f64::INFINITY, f64::min),
                max: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                zero_fraction: c.iter().filter(|&&v| v == 0.0).count() as f64 / n,
                above_half_fraction: c.iter().filter(|&&v| v > 0.5).count() as f64 / n,
            }
        })
        .collect()
}
