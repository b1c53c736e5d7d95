#![allow(dead_code)]

use batseg_core::{ChannelVolume, Dims, DistanceField, LabelVolume, Spacing};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> Dims {
    Dims::new(rng.gen_range(1..=max), rng.gen_range(1..=max), rng.gen_range(1..=max)).unwrap()
}

pub fn random_spacing(rng: &mut ChaCha8Rng) -> Spacing {
    Spacing::new(rng.gen_range(0.3..4.0), rng.gen_range(0.3..4.0), rng.gen_range(0.3..4.0)).unwrap()
}

/// Random labels in `0..k` with a background-heavy mix.
pub fn random_labels(rng: &mut ChaCha8Rng, dims: Dims, spacing: Spacing, k: u8, density: f64) -> LabelVolume {
    let labels = (0..dims.len())
        .map(|_| if rng.gen_bool(density) { rng.gen_range(1..k) } else { 0 })
        .collect();
    LabelVolume::new(dims, spacing, labels, k).unwrap()
}

/// Random binary mask with both sides present (needs at least 2 voxels).
pub fn random_binary(rng: &mut ChaCha8Rng, dims: Dims, spacing: Spacing) -> LabelVolume {
    assert!(dims.len() >= 2);
    let density = rng.gen_range(0.05..0.95);
    let mut labels: Vec<u8> = (0..dims.len()).map(|_| u8::from(rng.gen_bool(density))).collect();
    if !labels.contains(&1) {
        labels[rng.gen_range(0..dims.len())] = 1;
    }
    if !labels.contains(&0) {
        labels[rng.gen_range(0..dims.len())] = 0;
    }
    LabelVolume::new(dims, spacing, labels, 2).unwrap()
}

/// Distance from `v` to the nearest voxel of the opposite label, by scanning
/// every voxel.
pub fn brute_signed_distance(mask: &LabelVolume, spacing: Spacing) -> Vec<f64> {
    let dims = mask.dims();
    let s = spacing.as_array();
    let l = mask.labels();
    (0..dims.len())
        .map(|i| {
            let a = dims.coords(i);
            let mut best = f64::INFINITY;
            for j in 0..dims.len() {
                if (l[j] != 0) == (l[i] != 0) {
                    continue;
                }
                let b = dims.coords(j);
                let d: f64 = (0..3).map(|ax| ((a[ax] as f64 - b[ax] as f64) * s[ax]).powi(2)).sum();
                best = best.min(d);
            }
            if l[i] != 0 { best.sqrt() } else { -best.sqrt() }
        })
        .collect()
}

pub fn random_field(rng: &mut ChaCha8Rng, dims: Dims, channels: usize) -> DistanceField {
    let v = (0..dims.len() * channels).map(|_| rng.gen_range(0.0..=1.0)).collect();
    DistanceField::new(ChannelVolume::new(dims, Spacing::unit(), channels, v).unwrap()).unwrap()
}

/// Central differences, kept separate from the library's helper.
pub fn finite_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let o = p[i];
            p[i] = o + h;
            let up = f(&p);
            p[i] = o - h;
            let down = f(&p);
            p[i] = o;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_rel_err(a: &[f64], n: &[f64]) -> f64 {
    a.iter()
        .zip(n)
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            if scale < 1e-12 { (a - n).abs() } else { (a - n).abs() / scale }
        })
        .fold(0.0, f64::max)
}
