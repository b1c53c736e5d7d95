//! Resampling to a target spacing and per-volume z-score normalization.
//!
//! Output voxel `i` sits at physical position `i * target_spacing`, the
//! input grid at `j * input_spacing`; both start at the same corner voxel
//! center. Samples beyond the last input voxel clamp to the edge.

use alloc::vec::Vec;

use crate::reduce::pairwise_sum;
use crate::volume::{Dims, LabelVolume, Spacing, Volume3D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleSpec {
    pub target_spacing: Spacing,
    pub interpolation: Interpolation,
}

impl ResampleSpec {
    pub fn new(target_spacing: Spacing, interpolation: Interpolation) -> Self {
        Self { target_spacing, interpolation }
    }

    /// `round(dim * spacing / target)`, at least 1, per axis.
    pub fn output_dims(&self, dims: Dims, spacing: Spacing) -> Dims {
        let src = spacing.as_array();
        let dst = self.target_spacing.as_array();
        let axis = |n: usize, a: usize| (libm::round(n as f64 * src[a] / dst[a]) as usize).max(1);
        Dims { h: axis(dims.h, 0), w: axis(dims.w, 1), d: axis(dims.d, 2) }
    }
}

/// Source-grid coordinate of each output index along one axis.
fn axis_positions(out_len: usize, in_len: usize, ratio: f64) -> Vec<f64> {
    let last = (in_len - 1) as f64;
    (0..out_len).map(|i| (i as f64 * ratio).min(last)).collect()
}

fn ratios(spec: &ResampleSpec, spacing: Spacing) -> [f64; 3] {
    let src = spacing.as_array();
    let dst = spec.target_spacing.as_array();
    [dst[0] / src[0], dst[1] / src[1], dst[2] / src[2]]
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    let v = a + t * (b - a);
    v.clamp(a.min(b), a.max(b))
}

pub fn resample_volume(v: &Volume3D, spec: &ResampleSpec) -> Result<Volume3D> {
    let in_dims = v.dims();
    let out_dims = spec.output_dims(in_dims, v.spacing());
    let [rx, ry, rz] = ratios(spec, v.spacing());
    let px = axis_positions(out_dims.h, in_dims.h, rx);
    let py = axis_positions(out_dims.w, in_dims.w, ry);
    let pz = axis_positions(out_dims.d, in_dims.d, rz);
    let data = v.data();
    let mut out = Vec::with_capacity(out_dims.len());
    match spec.interpolation {
        Interpolation::Nearest => {
            for &z in &pz {
                for &y in &py {
                    for &x in &px {
                        let idx = in_dims.index(nearest(x), nearest(y), nearest(z));
                        out.push(data[idx]);
                    }
                }
            }
        }
        Interpolation::Trilinear => {
            let split = |p: f64, len: usize| {
                let lo = libm::floor(p) as usize;
                (lo, (lo + 1).min(len - 1), p - lo as f64)
            };
            for &z in &pz {
                let (z0, z1, tz) = split(z, in_dims.d);
                for &y in &py {
                    let (y0, y1, ty) = split(y, in_dims.w);
                    for &x in &px {
                        let (x0, x1, tx) = split(x, in_dims.h);
                        let at = |xi, yi, zi| data[in_dims.index(xi, yi, zi)];
                        let c00 = lerp(at(x0, y0, z0), at(x1, y0, z0), tx);
                        let c10 = lerp(at(x0, y1, z0), at(x1, y1, z0), tx);
                        let c01 = lerp(at(x0, y0, z1), at(x1, y0, z1), tx);
                        let c11 = lerp(at(x0, y1, z1), at(x1, y1, z1), tx);
                        out.push(lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz));
                    }
                }
            }
        }
    }
    Volume3D::new(out_dims, spec.target_spacing, out)
}

#[inline]
fn nearest(p: f64) -> usize {
    libm::floor(p + 0.5) as usize
}

/// Nearest-neighbour label resampling; trilinear is rejected.
pub fn resample_labels(v: &LabelVolume, spec: &ResampleSpec) -> Result<LabelVolume> {
    if spec.interpolation != Interpolation::Nearest {
        return Err(Error::Config("label volumes only support nearest-neighbour resampling".into()));
    }
    let in_dims = v.dims();
    let out_dims = spec.output_dims(in_dims, v.spacing());
    let [rx, ry, rz] = ratios(spec, v.spacing());
    let px = axis_positions(out_dims.h, in_dims.h, rx);
    let py = axis_positions(out_dims.w, in_dims.w, ry);
    let pz = axis_positions(out_dims.d, in_dims.d, rz);
    let labels = v.labels();
    let mut out = Vec::with_capacity(out_dims.len());
    for &z in &pz {
        for &y in &py {
            for &x in &px {
                out.push(labels[in_dims.index(nearest(x), nearest(y), nearest(z))]);
            }
        }
    }
    LabelVolume::new(out_dims, spec.target_spacing, out, v.num_classes())
}

/// Standard deviations below this are treated as a constant volume.
pub const ZSCORE_EPS: f64 = 1e-8;

/// Subtracts the mean and divides by the population standard deviation.
/// A constant volume maps to all zeros.
pub fn zscore(v: &Volume3D) -> Volume3D {
    let data = v.data();
    let n = data.len() as f64;
    let mean = pairwise_sum(data) / n;
    let centered: Vec<f64> = data.iter().map(|x| x - mean).collect();
    let sq: Vec<f64> = centered.iter().map(|c| c * c).collect();
    let sigma = libm::sqrt(pairwise_sum(&sq) / n);
    let out = if sigma < ZSCORE_EPS {
        alloc::vec![0.0; data.len()]
    } else {
        centered.iter().map(|c| c / sigma).collect()
    };
    Volume3D::new(v.dims(), v.spacing(), out).expect("same dims")
}
