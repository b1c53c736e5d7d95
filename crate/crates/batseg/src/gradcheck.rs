//! Randomized finite-difference checks of the loss gradients.

use std::fmt;
use std::str::FromStr;

use batseg_core::gradcheck::{central_difference, max_relative_error, GradError, DEFAULT_STEP};
use batseg_core::losses::{
    boundary_aware, cross_entropy, soft_dice_channels, BaLossConfig, BaseTerm, SignConvention,
};
use batseg_core::{build_field, ChannelVolume, Dims, FieldConfig, LabelVolume, PredictionVolume, Spacing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::Result;

pub const MAX_SIZE: usize = 6;
pub const TOLERANCE: f64 = 1e-4;
/// Predictions are kept at least this far from the target so `|e|` stays
/// differentiable under the probe step.
pub const MIN_RESIDUAL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Canonical,
    L2,
    Ce,
    NoWeight,
    StopGrad,
    PaperSign,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Canonical,
        Variant::L2,
        Variant::Ce,
        Variant::NoWeight,
        Variant::StopGrad,
        Variant::PaperSign,
    ];

    pub fn config(self) -> BaLossConfig {
        let base = BaLossConfig::default();
        match self {
            Variant::Canonical => base,
            Variant::L2 => BaLossConfig { base_term: BaseTerm::Squared, ..base },
            Variant::Ce => BaLossConfig { base_term: BaseTerm::Bce, ..base },
            Variant::NoWeight => BaLossConfig { use_squared_weight: false, ..base },
            Variant::StopGrad => BaLossConfig { stop_gradient_on_weight: true, ..base },
            Variant::PaperSign => BaLossConfig { sign_convention: SignConvention::PaperLiteral, ..base },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Canonical => "canonical",
            Variant::L2 => "l2",
            Variant::Ce => "ce",
            Variant::NoWeight => "no-weight",
            Variant::StopGrad => "stop-grad",
            Variant::PaperSign => "paper-sign",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Worst {
    pub instance: usize,
    pub dims: [usize; 3],
    pub channel: usize,
    pub voxel: [usize; 3],
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub loss: String,
    pub max_relative_error: f64,
    pub worst: Option<Worst>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub instances: usize,
    pub tolerance: f64,
    pub checks: Vec<CheckResult>,
    /// Largest `|g_canonical - 3 g_stopgrad| / |g_canonical|`, when the
    /// stop-grad variant was checked.
    pub stop_grad_ratio_error: Option<f64>,
    pub max_relative_error: f64,
    pub passed: bool,
}

impl GradcheckReport {
    pub fn worst(&self) -> Option<&CheckResult> {
        self.checks
            .iter()
            .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub size: usize,
    pub seed: u64,
    pub instances: usize,
    pub variants: Vec<Variant>,
    pub num_classes: u8,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self { size: 4, seed: 0, instances: 10, variants: Variant::ALL.to_vec(), num_classes: 3 }
    }
}

struct Tracker {
    loss: String,
    worst: f64,
    at: Option<Worst>,
}

impl Tracker {
    fn new(loss: impl Into<String>) -> Self {
        Self { loss: loss.into(), worst: 0.0, at: None }
    }

    fn record(&mut self, instance: usize, dims: Dims, e: GradError) {
        if e.max_relative > self.worst || e.max_relative.is_nan() || self.at.is_none() {
            let n = dims.len();
            self.worst = e.max_relative;
            self.at = Some(Worst {
                instance,
                dims: dims.as_array(),
                channel: e.index / n,
                voxel: dims.coords(e.index % n),
                analytic: e.analytic,
                numeric: e.numeric,
            });
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult { loss: self.loss, max_relative_error: self.worst, worst: self.at }
    }
}

fn random_case(rng: &mut ChaCha8Rng, size: usize, k: u8) -> Result<LabelVolume> {
    let hi = size.max(2);
    let dims = Dims::new(rng.gen_range(2..=hi), rng.gen_range(2..=hi), rng.gen_range(1..=hi))?;
    let spacing = Spacing::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..3.0))?;
    let labels = (0..dims.len()).map(|_| rng.gen_range(0..k)).collect();
    Ok(LabelVolume::new(dims, spacing, labels, k)?)
}

fn check_ba(
    cfg: &BaLossConfig,
    pred: &ChannelVolume,
    gt: &batseg_core::DistanceField,
) -> Result<GradError> {
    let analytic = boundary_aware(pred, gt, cfg)?.grad.into_values();
    let target = gt.values();
    let sign = if cfg.sign_convention == SignConvention::PaperLiteral { -1.0 } else { 1.0 };
    let n = target.len() as f64;
    let numeric = if cfg.stop_gradient_on_weight {
        // the weight is a constant during differentiation
        let frozen: Vec<f64> = pred.values().iter().zip(target).map(|(f, t)| (f - t) * (f - t)).collect();
        central_difference(
            |x| {
                sign * x
                    .iter()
                    .zip(target)
                    .zip(&frozen)
                    .map(|((&f, &t), w)| w * cfg.base_term.value(f, t))
                    .sum::<f64>()
                    / n
            },
            pred.values(),
            DEFAULT_STEP,
        )
    } else {
        let mut probe = pred.clone();
        central_difference(
            |x| {
                probe.values_mut().copy_from_slice(x);
                boundary_aware(&probe, gt, cfg).map(|l| l.value).unwrap_or(f64::NAN)
            },
            pred.values(),
            DEFAULT_STEP,
        )
    };
    Ok(max_relative_error(&analytic, &numeric))
}

pub fn run(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let k = opts.num_classes;
    let mut ce = Tracker::new("ce");
    let mut dice = Tracker::new("dice");
    let mut ba: Vec<Tracker> = opts.variants.iter().map(|v| Tracker::new(format!("ba:{v}"))).collect();
    let mut ratio_err: Option<f64> = None;

    for instance in 0..opts.instances {
        let gt = random_case(&mut rng, opts.size, k)?;
        let dims = gt.dims();
        let n = dims.len();
        let kc = usize::from(k);

        let logits: Vec<f64> = (0..n * kc).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let logits = ChannelVolume::new(dims, gt.spacing(), kc, logits)?;
        let analytic = cross_entropy(&PredictionVolume::logits(logits.clone()), &gt)?.grad.into_values();
        let mut probe = logits.clone();
        let numeric = central_difference(
            |x| {
                probe.values_mut().copy_from_slice(x);
                cross_entropy(&PredictionVolume::logits(probe.clone()), &gt).map(|l| l.value).unwrap_or(f64::NAN)
            },
            logits.values(),
            DEFAULT_STEP,
        );
        ce.record(instance, dims, max_relative_error(&analytic, &numeric));

        let probs = PredictionVolume::logits(logits).to_probabilities().scores().clone();
        let analytic = soft_dice_channels(&probs, &gt)?.grad.into_values();
        let mut probe = probs.clone();
        let numeric = central_difference(
            |x| {
                probe.values_mut().copy_from_slice(x);
                soft_dice_channels(&probe, &gt).map(|l| l.value).unwrap_or(f64::NAN)
            },
            probs.values(),
            DEFAULT_STEP,
        );
        dice.record(instance, dims, max_relative_error(&analytic, &numeric));

        let field = build_field(&gt, &FieldConfig::default())?;
        let pred: Vec<f64> = field
            .values()
            .iter()
            .map(|&t| loop {
                let f: f64 = rng.gen_range(0.02..0.98);
                if (f - t).abs() >= MIN_RESIDUAL {
                    break f;
                }
            })
            .collect();
        let pred = ChannelVolume::new(dims, gt.spacing(), field.channels(), pred)?;
        for (v, tracker) in opts.variants.iter().zip(ba.iter_mut()) {
            tracker.record(instance, dims, check_ba(&v.config(), &pred, &field)?);
        }
        if opts.variants.contains(&Variant::StopGrad) {
            let full = boundary_aware(&pred, &field, &Variant::Canonical.config())?.grad;
            let stopped = boundary_aware(&pred, &field, &Variant::StopGrad.config())?.grad;
            let worst = full
                .values()
                .iter()
                .zip(stopped.values())
                .map(|(&g, &s)| if g == 0.0 { (3.0 * s).abs() } else { (g - 3.0 * s).abs() / g.abs() })
                .fold(0.0, f64::max);
            ratio_err = Some(ratio_err.unwrap_or(0.0).max(worst));
        }
    }

    let mut checks = vec![ce.finish(), dice.finish()];
    checks.extend(ba.into_iter().map(Tracker::finish));
    let max = checks.iter().map(|c| c.max_relative_error).fold(0.0, f64::max);
    let passed = checks.iter().all(|c| c.max_relative_error < TOLERANCE)
        && ratio_err.is_none_or(|r| r < 1e-12);
    Ok(GradcheckReport {
        seed: opts.seed,
        instances: opts.instances,
        tolerance: TOLERANCE,
        checks,
        stop_grad_ratio_error: ratio_err,
        max_relative_error: max,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_passes() {
        let r = run(&GradcheckOptions { instances: 3, ..Default::default() }).unwrap();
        assert!(r.passed, "{r:#?}");
        assert!(r.stop_grad_ratio_error.unwrap() < 1e-12);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }
}
