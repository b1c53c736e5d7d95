//! Exact Euclidean distance transforms on anisotropic 3D grids.
//!
//! [`squared_distance_to_seeds`] is the separable lower-envelope transform
//! (one pass of 1D parabola envelopes per axis, weighted by the squared
//! spacing of that axis). Distances are measured between voxel centers.
//! [`edt_binary`] signs the result: positive inside the foreground, negative
//! in the background, with magnitude equal to the distance to the nearest
//! voxel of the opposite label.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::volume::{Dims, LabelVolume, Spacing};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSide {
    Foreground,
    Background,
}

impl fmt::Display for MaskSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskSide::Foreground => f.write_str("foreground"),
            MaskSide::Background => f.write_str("background"),
        }
    }
}

/// Signed distance in millimetres per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceVolume {
    dims: Dims,
    spacing: Spacing,
    values: Vec<f64>,
}

impl SignedDistanceVolume {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.dims.index(x, y, z)]
    }

    /// Largest positive (interior) distance, 0 when there is none.
    pub fn max_interior(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Squared distance from every voxel center to the nearest seed voxel center.
///
/// Seeds get 0. With no seeds at all every entry is `f64::INFINITY`.
pub fn squared_distance_to_seeds(seeds: &[bool], dims: Dims, spacing: Spacing) -> Vec<f64> {
    assert_eq!(seeds.len(), dims.len(), "seed mask does not match dims");
    let mut dist: Vec<f64> =
        seeds.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    if !seeds.iter().any(|&s| s) {
        return dist;
    }

    let [h, w, d] = dims.as_array();
    let [sx, sy, sz] = spacing.as_array();
    let longest = h.max(w).max(d);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut scratch = Envelope::with_capacity(longest);

    // x lines are contiguous
    for base in (0..dims.len()).step_by(h) {
        line[..h].copy_from_slice(&dist[base..base + h]);
        scratch.transform(&line[..h], sx * sx, &mut out[..h]);
        dist[base..base + h].copy_from_slice(&out[..h]);
    }
    for z in 0..d {
        for x in 0..h {
            let base = dims.index(x, 0, z);
            for y in 0..w {
                line[y] = dist[base + y * h];
            }
            scratch.transform(&line[..w], sy * sy, &mut out[..w]);
            for y in 0..w {
                dist[base + y * h] = out[y];
            }
        }
    }
    let plane = h * w;
    for base in 0..plane {
        for z in 0..d {
            line[z] = dist[base + z * plane];
        }
        scratch.transform(&line[..d], sz * sz, &mut out[..d]);
        for z in 0..d {
            dist[base + z * plane] = out[z];
        }
    }
    dist
}

/// Lower envelope of the parabolas `weight * (p - q)^2 + f(q)`.
struct Envelope {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self { vertices: vec![0; n], bounds: vec![0.0; n + 1] }
    }

    fn transform(&mut self, f: &[f64], weight: f64, out: &mut [f64]) {
        let n = f.len();
        let Some(first) = f.iter().position(|v| v.is_finite()) else {
            out.fill(f64::INFINITY);
            return;
        };
        let v = &mut self.vertices;
        let z = &mut self.bounds;
        let mut k = 0;
        v[0] = first;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;

        let meet = |q: usize, r: usize| {
            let (qf, rf) = (q as f64, r as f64);
            ((f[q] + weight * qf * qf) - (f[r] + weight * rf * rf)) / (2.0 * weight * (qf - rf))
        };

        for q in first + 1..n {
            if !f[q].is_finite() {
                continue;
            }
            let mut s = meet(q, v[k]);
            while s <= z[k] {
                k -= 1;
                s = meet(q, v[k]);
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }

        k = 0;
        for (p, o) in out.iter_mut().enumerate() {
            let pf = p as f64;
            while z[k + 1] < pf {
                k += 1;
            }
            let dp = pf - v[k] as f64;
            *o = weight * dp * dp + f[v[k]];
        }
    }
}

/// Signed distances for a boolean foreground mask.
pub fn signed_distance(mask: &[bool], dims: Dims, spacing: Spacing) -> Result<SignedDistanceVolume> {
    check_degenerate(mask)?;
    let background: Vec<bool> = mask.iter().map(|&m| !m).collect();
    let to_background = squared_distance_to_seeds(&background, dims, spacing);
    let to_foreground = squared_distance_to_seeds(mask, dims, spacing);
    let values = mask
        .iter()
        .zip(to_background.iter().zip(&to_foreground))
        .map(|(&inside, (&db, &df))| if inside { libm::sqrt(db) } else { -libm::sqrt(df) })
        .collect();
    Ok(SignedDistanceVolume { dims, spacing, values })
}

/// Signed anisotropic EDT of a binary label volume (any nonzero label is
/// foreground).
///
/// Fails with [`Error::DegenerateMask`] when either side is empty; the
/// payload names the empty side.
pub fn edt_binary(mask: &LabelVolume, spacing: Spacing) -> Result<SignedDistanceVolume> {
    let fg: Vec<bool> = mask.labels().iter().map(|&l| l != 0).collect();
    signed_distance(&fg, mask.dims(), spacing)
}

/// Voxel limit for [`edt_bruteforce`].
pub const BRUTEFORCE_MAX_VOXELS: usize = 32_768;

/// Exhaustive pairwise reference for [`edt_binary`]; O(n²).
pub fn edt_bruteforce(mask: &LabelVolume, spacing: Spacing) -> Result<SignedDistanceVolume> {
    let dims = mask.dims();
    let n = dims.len();
    if n > BRUTEFORCE_MAX_VOXELS {
        return Err(Error::Size { voxels: n, limit: BRUTEFORCE_MAX_VOXELS });
    }
    let fg: Vec<bool> = mask.labels().iter().map(|&l| l != 0).collect();
    check_degenerate(&fg)?;
    let [sx, sy, sz] = spacing.as_array();
    let centers: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let [x, y, z] = dims.coords(i);
            [x as f64 * sx, y as f64 * sy, z as f64 * sz]
        })
        .collect();
    let values = (0..n)
        .map(|i| {
            let best = (0..n)
                .filter(|&j| fg[j] != fg[i])
                .map(|j| {
                    let dx = centers[i][0] - centers[j][0];
                    let dy = centers[i][1] - centers[j][1];
                    let dz = centers[i][2] - centers[j][2];
                    dx * dx + dy * dy + dz * dz
                })
                .fold(f64::INFINITY, f64::min);
            let d = libm::sqrt(best);
            if fg[i] {
                d
            } else {
                -d
            }
        })
        .collect();
    Ok(SignedDistanceVolume { dims, spacing, values })
}

fn check_degenerate(mask: &[bool]) -> Result<()> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::DegenerateMask(MaskSide::Foreground));
    }
    if mask.iter().all(|&m| m) {
        return Err(Error::DegenerateMask(MaskSide::Background));
    }
    Ok(())
}
