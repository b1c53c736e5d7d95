//! Fold evaluation over directories of predicted and ground-truth label maps.

use std::path::{Path, PathBuf};

use batseg_core::metrics::{aggregate, score_subject, Aggregate, SubjectScore};
use batseg_core::LabelVolume;
use rayon::prelude::*;

use crate::io::read_labels;
use crate::manifest::FoldManifest;
use crate::report::MetricsReport;
use crate::{Error, Result};

/// Extensions tried, in order, when locating `<dir>/<subject><ext>`.
pub const EXTENSIONS: [&str; 3] = [".nii.gz", ".nii", ".raw"];

pub fn locate(dir: &Path, subject: &str) -> Option<PathBuf> {
    EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{subject}{ext}")))
        .find(|p| p.is_file())
}

/// Scores every manifest subject; rows come out sorted by subject id.
///
/// `num_classes` defaults to one more than the largest label in any file.
pub fn evaluate_directory(
    pred_dir: &Path,
    gt_dir: &Path,
    manifest: &FoldManifest,
    num_classes: Option<u8>,
) -> Result<MetricsReport> {
    let mut missing = Vec::new();
    let mut pairs = Vec::new();
    for id in manifest.ids() {
        match (locate(pred_dir, id), locate(gt_dir, id)) {
            (Some(p), Some(g)) => pairs.push((id.to_string(), p, g)),
            _ => missing.push(id.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSubjects(missing));
    }

    let loaded: Vec<(String, LabelVolume, LabelVolume)> = pairs
        .into_par_iter()
        .map(|(id, p, g)| {
            let pred = read_labels(&p, None).map_err(|e| e.for_subject(&id))?;
            let gt = read_labels(&g, None).map_err(|e| e.for_subject(&id))?;
            if pred.dims() != gt.dims() {
                return Err(Error::Core(batseg_core::Error::Shape(format!(
                    "prediction {:?} vs ground truth {:?}",
                    pred.dims().as_array(),
                    gt.dims().as_array()
                )))
                .for_subject(&id));
            }
            Ok((id, pred, gt))
        })
        .collect::<Result<_>>()?;

    let k = num_classes.unwrap_or_else(|| {
        loaded
            .iter()
            .flat_map(|(_, p, g)| [p.num_classes(), g.num_classes()])
            .max()
            .unwrap_or(2)
    });

    let mut scores: Vec<SubjectScore> = loaded
        .par_iter()
        .map(|(id, pred, gt)| {
            score_subject(id, pred, gt, k, gt.spacing()).map_err(|e| Error::from(e).for_subject(id))
        })
        .collect::<Result<_>>()?;
    scores.sort_by(|a, b| a.subject.cmp(&b.subject));
    let agg: Aggregate = aggregate(&scores, k);
    Ok(MetricsReport::new(manifest.fold, k, &scores, &agg))
}
