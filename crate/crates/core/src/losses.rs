//! Cross-entropy, soft Dice and the boundary-aware field loss, each with its
//! analytic gradient.
//!
//! The boundary-aware loss compares a predicted field `f` with the
//! ground-truth field `f̄` voxel by voxel. With `e = f - f̄` the canonical
//! per-element term is `e² · |e|`: an L1 base term scaled by a squared-error
//! focusing weight. [`BaLossConfig`] switches the base term, drops the weight
//! or stops its gradient. Every loss is a mean over its elements.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dfield::{build_field, FieldConfig};
use crate::reduce::mean;
use crate::volume::{ChannelVolume, DistanceField, LabelVolume, PredictionMode, PredictionVolume};
use crate::{Error, Result};

/// Smoothing term of the soft Dice ratio.
pub const DICE_SMOOTH: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaseTerm {
    /// `|e|`
    #[default]
    Abs,
    /// `e²`
    Squared,
    /// Binary cross-entropy of `f` against the soft target `f̄`.
    Bce,
}

impl BaseTerm {
    pub fn value(self, f: f64, target: f64) -> f64 {
        let e = f - target;
        match self {
            BaseTerm::Abs => e.abs(),
            BaseTerm::Squared => e * e,
            BaseTerm::Bce => -(target * libm::log(f) + (1.0 - target) * libm::log(1.0 - f)),
        }
    }

    /// Derivative with respect to `f`.
    pub fn derivative(self, f: f64, target: f64) -> f64 {
        let e = f - target;
        match self {
            BaseTerm::Abs => {
                if e > 0.0 {
                    1.0
                } else if e < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            BaseTerm::Squared => 2.0 * e,
            BaseTerm::Bce => e / (f * (1.0 - f)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    /// `+e²·base(e)`; minimizing pulls `f` toward `f̄`.
    #[default]
    Positive,
    /// Negated value and gradient, as the formula is typeset. Not trainable.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaLossConfig {
    pub base_term: BaseTerm,
    pub use_squared_weight: bool,
    pub stop_gradient_on_weight: bool,
    pub sign_convention: SignConvention,
}

impl Default for BaLossConfig {
    fn default() -> Self {
        Self {
            base_term: BaseTerm::Abs,
            use_squared_weight: true,
            stop_gradient_on_weight: false,
            sign_convention: SignConvention::Positive,
        }
    }
}

impl BaLossConfig {
    pub fn is_canonical(&self) -> bool {
        *self == Self::default()
    }
}

/// A scalar loss and its gradient, shaped like the differentiated input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: ChannelVolume,
}

/// Mean over voxels of `-log softmax(logits)[gt]`; gradient w.r.t. logits.
pub fn cross_entropy(pred: &PredictionVolume, gt: &LabelVolume) -> Result<LossValue> {
    if pred.mode() != PredictionMode::Logits {
        return Err(Error::Config("cross-entropy expects logits".into()));
    }
    check_prediction_shape(pred, gt)?;
    let scores = pred.scores();
    let n = gt.dims().len();
    let k = scores.channels();
    let inv_n = 1.0 / n as f64;
    let mut terms = vec![0.0; n];
    let mut grad = ChannelVolume::zeros(gt.dims(), scores.spacing(), k);
    let logits = scores.values();
    let g = grad.values_mut();
    for (v, &label) in gt.labels().iter().enumerate() {
        let max = (0..k).map(|c| logits[c * n + v]).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..k {
            let e = libm::exp(logits[c * n + v] - max);
            g[c * n + v] = e;
            sum += e;
        }
        let t = usize::from(label);
        terms[v] = max + libm::log(sum) - logits[t * n + v];
        for c in 0..k {
            let p = g[c * n + v] / sum;
            let onehot = if c == t { 1.0 } else { 0.0 };
            g[c * n + v] = (p - onehot) * inv_n;
        }
    }
    Ok(LossValue { value: mean(&terms), grad })
}

/// `1 - mean_{k>=1} (2 Σ p g + ε) / (Σ p + Σ g + ε)` over the whole volume;
/// gradient w.r.t. probabilities (zero on the background channel).
pub fn soft_dice(pred: &PredictionVolume, gt: &LabelVolume) -> Result<LossValue> {
    if pred.mode() != PredictionMode::Probabilities {
        return Err(Error::Config("soft Dice expects probabilities".into()));
    }
    check_prediction_shape(pred, gt)?;
    soft_dice_channels(pred.scores(), gt)
}

/// [`soft_dice`] on raw per-class scores, without the probability-simplex
/// check (used for finite-difference probing).
pub fn soft_dice_channels(scores: &ChannelVolume, gt: &LabelVolume) -> Result<LossValue> {
    if scores.dims() != gt.dims() || scores.channels() != usize::from(gt.num_classes()) {
        return Err(Error::Shape(format!(
            "scores {:?} x {} vs labels {:?} x {}",
            scores.dims().as_array(),
            scores.channels(),
            gt.dims().as_array(),
            gt.num_classes()
        )));
    }
    let n = gt.dims().len();
    let k = scores.channels();
    let foreground = (k - 1) as f64;
    let mut grad = ChannelVolume::zeros(gt.dims(), scores.spacing(), k);
    let mut ratios = Vec::with_capacity(k - 1);
    let mut products = vec![0.0; n];
    for c in 1..k {
        let p = scores.channel(c);
        let class = c as u8;
        for (v, out) in products.iter_mut().enumerate() {
            *out = if gt.labels()[v] == class { p[v] } else { 0.0 };
        }
        let intersection = crate::reduce::pairwise_sum(&products);
        let pred_sum = crate::reduce::pairwise_sum(p);
        let gt_sum = gt.count(class) as f64;
        let denom = pred_sum + gt_sum + DICE_SMOOTH;
        let numer = 2.0 * intersection + DICE_SMOOTH;
        ratios.push(numer / denom);
        let denom_sq = denom * denom;
        let g = grad.channel_mut(c);
        for (v, gv) in g.iter_mut().enumerate() {
            let onehot = if gt.labels()[v] == class { 1.0 } else { 0.0 };
            *gv = -(2.0 * onehot * denom - numer) / denom_sq / foreground;
        }
    }
    Ok(LossValue { value: 1.0 - mean(&ratios), grad })
}

fn check_prediction_shape(pred: &PredictionVolume, gt: &LabelVolume) -> Result<()> {
    if pred.dims() != gt.dims() || pred.num_classes() != usize::from(gt.num_classes()) {
        return Err(Error::Shape(format!(
            "prediction {:?} x {} vs labels {:?} x {}",
            pred.dims().as_array(),
            pred.num_classes(),
            gt.dims().as_array(),
            gt.num_classes()
        )));
    }
    Ok(())
}

/// Boundary-aware loss between a predicted and a ground-truth field.
///
/// Gradient is w.r.t. `pred`. With `stop_gradient_on_weight` the squared
/// weight is held constant, so the value is unchanged but the gradient only
/// flows through the base term.
pub fn boundary_aware(
    pred: &ChannelVolume,
    gt: &DistanceField,
    cfg: &BaLossConfig,
) -> Result<LossValue> {
    let target = gt.as_channels();
    if !pred.same_shape(target) {
        return Err(Error::Shape(format!(
            "predicted field {:?} x {} vs ground truth {:?} x {}",
            pred.dims().as_array(),
            pred.channels(),
            target.dims().as_array(),
            target.channels()
        )));
    }
    if cfg.base_term == BaseTerm::Bce {
        if let Some((i, f)) =
            pred.values().iter().enumerate().find(|(_, &f)| !(f > 0.0 && f < 1.0))
        {
            return Err(Error::Domain(format!(
                "binary cross-entropy needs predictions in (0, 1), got {f} at element {i}"
            )));
        }
    }

    let total = pred.values().len();
    let inv_n = 1.0 / total as f64;
    let sign = match cfg.sign_convention {
        SignConvention::Positive => 1.0,
        SignConvention::PaperLiteral => -1.0,
    };
    let mut terms = vec![0.0; total];
    let mut grad = ChannelVolume::zeros(pred.dims(), pred.spacing(), pred.channels());
    for (((&f, &t), term), g) in pred
        .values()
        .iter()
        .zip(target.values())
        .zip(terms.iter_mut())
        .zip(grad.values_mut().iter_mut())
    {
        let e = f - t;
        let base = cfg.base_term.value(f, t);
        let d_base = cfg.base_term.derivative(f, t);
        let (weight, d_weight) = if cfg.use_squared_weight {
            (e * e, if cfg.stop_gradient_on_weight { 0.0 } else { 2.0 * e })
        } else {
            (1.0, 0.0)
        };
        *term = weight * base;
        *g = sign * (d_weight * base + weight * d_base) * inv_n;
    }
    Ok(LossValue { value: sign * mean(&terms), grad })
}

/// The three training losses with unit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub ce: f64,
    pub dice: f64,
    pub ba: f64,
    pub total: f64,
    /// Gradient of `ba` w.r.t. the (reconciled) predicted field.
    pub grad_ba: ChannelVolume,
}

/// Evaluates `ce + dice + ba` for a segmentation head (logits) and a field
/// head.
///
/// The ground-truth field is built from `gt` with `field_cfg`. A field head
/// with one more channel than the ground-truth field is taken to carry a
/// leading background channel, which is dropped.
pub fn total_loss(
    pred: &PredictionVolume,
    pred_field: &ChannelVolume,
    gt: &LabelVolume,
    field_cfg: &FieldConfig,
    ba_cfg: &BaLossConfig,
) -> Result<LossReport> {
    let ce = cross_entropy(pred, gt)?.value;
    let dice = soft_dice(&pred.to_probabilities(), gt)?.value;
    let gt_field = build_field(gt, field_cfg)?;
    let reconciled;
    let field = if pred_field.channels() == gt_field.channels() {
        pred_field
    } else if pred_field.channels() == gt_field.channels() + 1
        && !field_cfg.include_background_channel
    {
        reconciled = pred_field.drop_leading_channels(1);
        &reconciled
    } else {
        return Err(Error::Shape(format!(
            "field head has {} channels, ground-truth field has {}",
            pred_field.channels(),
            gt_field.channels()
        )));
    };
    let ba = boundary_aware(field, &gt_field, ba_cfg)?;
    Ok(LossReport { ce, dice, ba: ba.value, total: ce + dice + ba.value, grad_ba: ba.grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{one_hot, Dims, Spacing};

    fn scalar_fields(f: f64, t: f64) -> (ChannelVolume, DistanceField) {
        let dims = Dims::new(1, 1, 1).unwrap();
        let p = ChannelVolume::new(dims, Spacing::unit(), 1, vec![f]).unwrap();
        let g = DistanceField::new(ChannelVolume::new(dims, Spacing::unit(), 1, vec![t]).unwrap())
            .unwrap();
        (p, g)
    }

    #[test]
    fn canonical_scalar_example() {
        let (p, g) = scalar_fields(0.8, 0.5);
        let r = boundary_aware(&p, &g, &BaLossConfig::default()).unwrap();
        assert!((r.value - 0.027).abs() < 1e-15);
        assert!((r.grad.values()[0] - 0.27).abs() < 1e-15);
    }

    #[test]
    fn paper_literal_negates() {
        let (p, g) = scalar_fields(0.8, 0.5);
        let cfg = BaLossConfig { sign_convention: SignConvention::PaperLiteral, ..Default::default() };
        let lit = boundary_aware(&p, &g, &cfg).unwrap();
        let pos = boundary_aware(&p, &g, &BaLossConfig::default()).unwrap();
        assert_eq!(lit.value, -pos.value);
        assert_eq!(lit.grad.values()[0], -pos.grad.values()[0]);
    }

    #[test]
    fn zero_error_is_zero() {
        let (p, g) = scalar_fields(0.3, 0.3);
        for base_term in [BaseTerm::Abs, BaseTerm::Squared] {
            let cfg = BaLossConfig { base_term, ..Default::default() };
            let r = boundary_aware(&p, &g, &cfg).unwrap();
            assert_eq!(r.value, 0.0);
            assert_eq!(r.grad.values()[0], 0.0);
        }
    }

    #[test]
    fn bce_domain_and_shape_errors() {
        let (p, g) = scalar_fields(1.0, 0.5);
        let cfg = BaLossConfig { base_term: BaseTerm::Bce, ..Default::default() };
        assert!(matches!(boundary_aware(&p, &g, &cfg), Err(Error::Domain(_))));

        let dims = Dims::new(2, 1, 1).unwrap();
        let wide = ChannelVolume::zeros(dims, Spacing::unit(), 1);
        assert!(matches!(
            boundary_aware(&wide, &g, &BaLossConfig::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn unweighted_l1_gradient_is_sign() {
        let dims = Dims::new(2, 1, 1).unwrap();
        let p = ChannelVolume::new(dims, Spacing::unit(), 1, vec![0.9, 0.1]).unwrap();
        let g = DistanceField::new(ChannelVolume::new(dims, Spacing::unit(), 1, vec![0.5, 0.5]).unwrap())
            .unwrap();
        let cfg = BaLossConfig { use_squared_weight: false, ..Default::default() };
        let r = boundary_aware(&p, &g, &cfg).unwrap();
        assert_eq!(r.grad.values(), &[0.5, -0.5]);
        assert!((r.value - 0.4).abs() < 1e-15);
    }

    fn labels_1d(l: &[u8], k: u8) -> LabelVolume {
        LabelVolume::new(Dims::new(l.len(), 1, 1).unwrap(), Spacing::unit(), l.to_vec(), k).unwrap()
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let gt = labels_1d(&[0, 1, 2, 3, 4, 4], 5);
        let logits = ChannelVolume::zeros(gt.dims(), Spacing::unit(), 5);
        let r = cross_entropy(&PredictionVolume::logits(logits), &gt).unwrap();
        assert!((r.value - libm::log(5.0)).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_saturated() {
        let gt = labels_1d(&[0, 1, 2], 3);
        let oh = one_hot(&gt);
        let logits: Vec<f64> = oh.scores().values().iter().map(|v| v * 100.0).collect();
        let logits = ChannelVolume::new(gt.dims(), Spacing::unit(), 3, logits).unwrap();
        let r = cross_entropy(&PredictionVolume::logits(logits), &gt).unwrap();
        assert!(r.value < 1e-40);
    }

    #[test]
    fn cross_entropy_rejects_mismatch() {
        let gt = labels_1d(&[0, 1], 2);
        let logits = ChannelVolume::zeros(gt.dims(), Spacing::unit(), 3);
        assert!(matches!(
            cross_entropy(&PredictionVolume::logits(logits), &gt),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn dice_perfect_and_disjoint() {
        let gt = labels_1d(&[0, 1, 1, 0, 2, 0], 3);
        let perfect = soft_dice(&one_hot(&gt), &gt).unwrap();
        assert!(perfect.value.abs() < 1e-4);

        let gt = labels_1d(&[1, 1, 0, 0], 2);
        let other = labels_1d(&[0, 0, 1, 1], 2);
        let disjoint = soft_dice(&one_hot(&other), &gt).unwrap();
        assert!((disjoint.value - 1.0).abs() < 1e-4);
    }

    #[test]
    fn total_is_sum_of_parts() {
        let gt = labels_1d(&[0, 1, 1, 1, 0, 0, 2, 0], 3);
        let logits: Vec<f64> = (0..24).map(|i| libm::sin(i as f64)).collect();
        let logits = ChannelVolume::new(gt.dims(), Spacing::unit(), 3, logits).unwrap();
        let field: Vec<f64> = (0..16).map(|i| (libm::cos(i as f64) + 1.0) / 2.0).collect();
        let field = ChannelVolume::new(gt.dims(), Spacing::unit(), 2, field).unwrap();
        let pred = PredictionVolume::logits(logits);
        let r = total_loss(&pred, &field, &gt, &FieldConfig::default(), &BaLossConfig::default())
            .unwrap();
        let ce = cross_entropy(&pred, &gt).unwrap().value;
        let dice = soft_dice(&pred.to_probabilities(), &gt).unwrap().value;
        let gt_field = build_field(&gt, &FieldConfig::default()).unwrap();
        let ba = boundary_aware(&field, &gt_field, &BaLossConfig::default()).unwrap().value;
        assert_eq!(r.ce, ce);
        assert_eq!(r.dice, dice);
        assert_eq!(r.ba, ba);
        assert_eq!(r.total, ce + dice + ba);
    }

    #[test]
    fn field_head_background_channel_is_dropped() {
        let gt = labels_1d(&[0, 1, 1, 0], 2);
        let logits = ChannelVolume::zeros(gt.dims(), Spacing::unit(), 2);
        let gt_field = build_field(&gt, &FieldConfig::default()).unwrap();
        let mut head = vec![0.7; 4];
        head.extend_from_slice(gt_field.values());
        let head = ChannelVolume::new(gt.dims(), Spacing::unit(), 2, head).unwrap();
        let r = total_loss(
            &PredictionVolume::logits(logits),
            &head,
            &gt,
            &FieldConfig::default(),
            &BaLossConfig::default(),
        )
        .unwrap();
        assert_eq!(r.ba, 0.0);
        assert_eq!(r.grad_ba.channels(), 1);

        let three = ChannelVolume::zeros(gt.dims(), Spacing::unit(), 3);
        assert!(total_loss(
            &PredictionVolume::logits(ChannelVolume::zeros(gt.dims(), Spacing::unit(), 2)),
            &three,
            &gt,
            &FieldConfig::default(),
            &BaLossConfig::default(),
        )
        .is_err());
    }
}
