#![allow(dead_code)]

use std::path::Path;

use batseg::core::{Dims, LabelVolume, Spacing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs the CLI in-process and returns (exit code, stdout, stderr).
pub fn batseg(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("batseg").chain(args.iter().copied());
    let code = batseg::cli::run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Axis-aligned box of `class` in an otherwise empty volume.
pub fn boxed(dims: [usize; 3], spacing: [f64; 3], lo: [usize; 3], hi: [usize; 3], class: u8, k: u8) -> LabelVolume {
    let d = Dims::try_from(dims).unwrap();
    let mut labels = vec![0u8; d.len()];
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                labels[d.index(x, y, z)] = class;
            }
        }
    }
    LabelVolume::new(d, Spacing::try_from(spacing).unwrap(), labels, k).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, max_extent: usize, k: u8) -> LabelVolume {
    let dims = Dims::new(
        rng.gen_range(2..=max_extent),
        rng.gen_range(2..=max_extent),
        rng.gen_range(1..=max_extent),
    )
    .unwrap();
    let spacing = Spacing::new(rng.gen_range(0.4..2.5), rng.gen_range(0.4..2.5), rng.gen_range(0.4..4.0)).unwrap();
    let fill = rng.gen_range(0.1..0.6);
    let labels = (0..dims.len())
        .map(|_| if rng.gen_bool(fill) { rng.gen_range(1..k) } else { 0 })
        .collect();
    LabelVolume::new(dims, spacing, labels, k).unwrap()
}
