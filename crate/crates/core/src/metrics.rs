//! Per-class Dice and HD95 scoring with the missing-prediction rule.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::edt::squared_distance_to_seeds;
use crate::reduce::pairwise_sum;
use crate::volume::{Dims, LabelVolume, Spacing};
use crate::{Error, Result};

/// HD95 assigned when the ground truth has a class the prediction lacks.
pub const MISSING_PREDICTION_HD95: f64 = 450.0;

/// `2|P ∩ G| / (|P| + |G|)` for class `class`.
pub fn dice_score(pred: &LabelVolume, gt: &LabelVolume, class: u8) -> Result<f64> {
    check_dims(pred, gt)?;
    let g = gt.count(class);
    if g == 0 {
        return Err(Error::ClassAbsent(class));
    }
    let p = pred.count(class);
    let both = pred
        .labels()
        .iter()
        .zip(gt.labels())
        .filter(|(&a, &b)| a == class && b == class)
        .count();
    Ok(2.0 * both as f64 / (p + g) as f64)
}

/// 95th-percentile symmetric Hausdorff distance in millimetres.
///
/// Surfaces are the foreground voxels with a 6-neighbour that is background
/// or outside the volume. Each directed 95th percentile is linearly
/// interpolated over the sorted distances; the larger one is returned.
/// An empty prediction scores [`MISSING_PREDICTION_HD95`].
pub fn hd95(pred: &LabelVolume, gt: &LabelVolume, class: u8, spacing: Spacing) -> Result<f64> {
    check_dims(pred, gt)?;
    if !gt.contains(class) {
        return Err(Error::ClassAbsent(class));
    }
    if !pred.contains(class) {
        return Ok(MISSING_PREDICTION_HD95);
    }
    let dims = gt.dims();
    let pred_surface = boundary_mask(&pred.mask(class), dims);
    let gt_surface = boundary_mask(&gt.mask(class), dims);
    let mut forward = directed_surface_distances(&pred_surface, &gt_surface, dims, spacing);
    let mut backward = directed_surface_distances(&gt_surface, &pred_surface, dims, spacing);
    Ok(percentile(&mut forward, 0.95).max(percentile(&mut backward, 0.95)))
}

/// Foreground voxels touching background or the border (6-connectivity).
pub fn boundary_mask(mask: &[bool], dims: Dims) -> Vec<bool> {
    let [h, w, d] = dims.as_array();
    (0..dims.len())
        .map(|i| {
            if !mask[i] {
                return false;
            }
            let [x, y, z] = dims.coords(i);
            if x == 0 || y == 0 || z == 0 || x + 1 == h || y + 1 == w || z + 1 == d {
                return true;
            }
            !(mask[i - 1]
                && mask[i + 1]
                && mask[i - h]
                && mask[i + h]
                && mask[i - h * w]
                && mask[i + h * w])
        })
        .collect()
}

/// Distance from each `from` voxel to the nearest `to` voxel, in voxel
/// order.
pub fn directed_surface_distances(from: &[bool], to: &[bool], dims: Dims, spacing: Spacing) -> Vec<f64> {
    let sq = squared_distance_to_seeds(to, dims, spacing);
    from.iter()
        .zip(sq)
        .filter(|(&f, _)| f)
        .map(|(_, d)| libm::sqrt(d))
        .collect()
}

/// Linear-interpolation percentile, `q` in `[0, 1]`. Sorts `values` in place.
pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty set");
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(values.len() - 1);
    let frac = pos - lo as f64;
    values[lo] + frac * (values[hi] - values[lo])
}

fn check_dims(pred: &LabelVolume, gt: &LabelVolume) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.dims().as_array(),
            gt.dims().as_array()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreStatus {
    Scored,
    MissingPred,
    ClassAbsent,
}

impl ScoreStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreStatus::Scored => "scored",
            ScoreStatus::MissingPred => "missing_pred",
            ScoreStatus::ClassAbsent => "class_absent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScore {
    pub class: u8,
    pub dice: Option<f64>,
    pub hd95: Option<f64>,
    pub status: ScoreStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectScore {
    pub subject: String,
    pub classes: Vec<ClassScore>,
}

/// Scores foreground classes `1..num_classes` of one subject.
pub fn score_subject(
    subject: &str,
    pred: &LabelVolume,
    gt: &LabelVolume,
    num_classes: u8,
    spacing: Spacing,
) -> Result<SubjectScore> {
    check_dims(pred, gt)?;
    let classes = (1..num_classes)
        .map(|class| {
            if !gt.contains(class) {
                return Ok(ClassScore { class, dice: None, hd95: None, status: ScoreStatus::ClassAbsent });
            }
            if !pred.contains(class) {
                return Ok(ClassScore {
                    class,
                    dice: Some(0.0),
                    hd95: Some(MISSING_PREDICTION_HD95),
                    status: ScoreStatus::MissingPred,
                });
            }
            Ok(ClassScore {
                class,
                dice: Some(dice_score(pred, gt, class)?),
                hd95: Some(hd95(pred, gt, class, spacing)?),
                status: ScoreStatus::Scored,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubjectScore { subject: subject.into(), classes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAggregate {
    pub class: u8,
    /// Subjects contributing (status scored or missing_pred).
    pub subjects: usize,
    pub mean_dice: Option<f64>,
    pub mean_hd95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub per_class: Vec<ClassAggregate>,
    /// Mean of the per-class means over classes with at least one subject.
    pub mean_dice: Option<f64>,
    pub mean_hd95: Option<f64>,
}

/// Per-class and overall means. Independent of subject order.
pub fn aggregate(scores: &[SubjectScore], num_classes: u8) -> Aggregate {
    let per_class: Vec<ClassAggregate> = (1..num_classes)
        .map(|class| {
            let mut dice = Vec::new();
            let mut hd = Vec::new();
            for c in scores.iter().flat_map(|s| &s.classes).filter(|c| c.class == class) {
                if c.status != ScoreStatus::ClassAbsent {
                    dice.extend(c.dice);
                    hd.extend(c.hd95);
                }
            }
            ClassAggregate {
                class,
                subjects: dice.len(),
                mean_dice: sorted_mean(&mut dice),
                mean_hd95: sorted_mean(&mut hd),
            }
        })
        .collect();
    let mut dice: Vec<f64> = per_class.iter().filter_map(|c| c.mean_dice).collect();
    let mut hd: Vec<f64> = per_class.iter().filter_map(|c| c.mean_hd95).collect();
    Aggregate { per_class, mean_dice: sorted_mean(&mut dice), mean_hd95: sorted_mean(&mut hd) }
}

fn sorted_mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(pairwise_sum(values) / values.len() as f64)
}
