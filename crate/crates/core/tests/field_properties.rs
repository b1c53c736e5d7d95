mod common;

use batseg_core::{build_field, ClassMode, FieldConfig, LabelVolume};
use common::*;
use rand::Rng;

fn oracle_channel(gt: &LabelVolume, class: u8, m: f64) -> Vec<f64> {
    let bin = LabelVolume::new(
        gt.dims(),
        gt.spacing(),
        gt.labels().iter().map(|&l| u8::from(l == class)).collect(),
        2,
    )
    .unwrap();
    let n = gt.dims().len();
    let count = bin.count(1);
    if count == 0 {
        return vec![0.0; n];
    }
    if count == n {
        return vec![1.0; n];
    }
    let d = brute_signed_distance(&bin, gt.spacing());
    let big_m = d.iter().copied().fold(0.0, f64::max);
    d.iter()
        .map(|&v| {
            if v < 0.0 && -v > m * big_m {
                0.0
            } else {
                ((v / big_m + 1.0) / 2.0).max(0.0)
            }
        })
        .collect()
}

#[test]
fn matches_bruteforce_oracle() {
    let mut r = rng(21);
    for _ in 0..30 {
        let dims = random_dims(&mut r, 7);
        let sp = random_spacing(&mut r);
        let k = r.gen_range(2..5);
        let density = r.gen_range(0.05..0.6);
        let gt = random_labels(&mut r, dims, sp, k, density);
        for m in [1.0, 2.0, 3.0] {
            let cfg = FieldConfig { truncation_multiplier: m, ..Default::default() };
            let f = build_field(&gt, &cfg).unwrap();
            assert_eq!(f.channels(), usize::from(k) - 1);
            for class in 1..k {
                let expect = oracle_channel(&gt, class, m);
                for (a, b) in f.channel(usize::from(class) - 1).iter().zip(&expect) {
                    assert!((a - b).abs() < 1e-12, "class {class}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn structural_invariants() {
    let mut r = rng(22);
    for _ in 0..40 {
        let dims = random_dims(&mut r, 9);
        let sp = random_spacing(&mut r);
        let k = r.gen_range(2..6);
        let density = r.gen_range(0.02..0.5);
        let gt = random_labels(&mut r, dims, sp, k, density);
        let f1 = build_field(&gt, &FieldConfig::default()).unwrap();
        let mut zero_sets = Vec::new();
        for m in [1.0, 2.0, 3.0] {
            let cfg = FieldConfig { truncation_multiplier: m, ..Default::default() };
            let f = build_field(&gt, &cfg).unwrap();
            zero_sets.push(f.values().iter().map(|&v| v == 0.0).collect::<Vec<_>>());
        }
        for w in zero_sets.windows(2) {
            assert!(w[1].iter().zip(&w[0]).all(|(&later, &earlier)| !later || earlier));
        }
        for class in 1..k {
            let c = f1.channel(usize::from(class) - 1);
            if !gt.contains(class) {
                assert!(c.iter().all(|&v| v == 0.0));
                continue;
            }
            assert!(c.contains(&1.0));
            for (&v, &l) in c.iter().zip(gt.labels()) {
                assert!((0.0..=1.0).contains(&v));
                assert_ne!(v, 0.5);
                assert_eq!(v > 0.5, l == class);
            }
        }
    }
}

#[test]
fn frontier_voxels_normalize_to_zero() {
    let mut r = rng(23);
    let mut hits = 0;
    for _ in 0..40 {
        let dims = random_dims(&mut r, 8);
        let gt = random_labels(&mut r, dims, batseg_core::Spacing::unit(), 2, 0.3);
        if gt.count(1) == 0 || gt.count(1) == dims.len() {
            continue;
        }
        let d = brute_signed_distance(&gt, gt.spacing());
        let big_m = d.iter().copied().fold(0.0, f64::max);
        let f = build_field(&gt, &FieldConfig::default()).unwrap();
        for (&dv, &fv) in d.iter().zip(f.channel(0)) {
            if dv == -big_m {
                hits += 1;
                assert_eq!(fv, 0.0);
            }
        }
    }
    assert!(hits > 0, "no frontier voxels exercised");
}

#[test]
fn class_agnostic_equals_binarized_multiclass() {
    let mut r = rng(24);
    for _ in 0..20 {
        let dims = random_dims(&mut r, 9);
        let sp = random_spacing(&mut r);
        let k = r.gen_range(3..6);
        let gt = random_labels(&mut r, dims, sp, k, 0.3);
        let agnostic = FieldConfig { class_mode: ClassMode::ClassAgnostic, ..Default::default() };
        let a = build_field(&gt, &agnostic).unwrap();
        let b = build_field(&gt.binarized(), &FieldConfig::default()).unwrap();
        assert_eq!(a.channels(), 1);
        assert_eq!(a.values(), b.values());
    }
}

#[test]
fn spacing_scale_leaves_field_unchanged() {
    let mut r = rng(25);
    for _ in 0..20 {
        let dims = random_dims(&mut r, 8);
        let sp = random_spacing(&mut r);
        let gt = random_labels(&mut r, dims, sp, 3, 0.3);
        let base = build_field(&gt, &FieldConfig::default()).unwrap();
        let doubled = build_field(&gt.clone().with_spacing(sp.scaled(2.0).unwrap()), &FieldConfig::default())
            .unwrap();
        assert_eq!(base.values(), doubled.values());
        let odd = build_field(&gt.with_spacing(sp.scaled(0.47).unwrap()), &FieldConfig::default()).unwrap();
        for (a, b) in base.values().iter().zip(odd.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn unit_spacing_ignores_volume_spacing() {
    let mut r = rng(26);
    let dims = random_dims(&mut r, 8);
    let gt = random_labels(&mut r, dims, batseg_core::Spacing::new(0.47, 0.47, 3.3).unwrap(), 3, 0.3);
    let cfg = FieldConfig { unit_spacing: true, ..Default::default() };
    let a = build_field(&gt, &cfg).unwrap();
    let b = build_field(&gt.with_spacing(batseg_core::Spacing::unit()), &FieldConfig::default()).unwrap();
    assert_eq!(a.values(), b.values());
}
