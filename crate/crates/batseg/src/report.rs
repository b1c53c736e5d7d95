//! Serializable reports for the CLI.

use std::io::Write;

use batseg_core::dfield::{ChannelStats, ClassMode, FieldConfig};
use batseg_core::losses::{BaLossConfig, BaseTerm, LossReport, SignConvention};
use batseg_core::metrics::{Aggregate, SubjectScore};
use batseg_core::ChannelVolume;
use serde::{Deserialize, Serialize};

use crate::Result;

/// Rounds to one decimal for presentation.
pub fn one_decimal(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub subject: String,
    pub class: u8,
    pub dice_pct: Option<f64>,
    pub hd95_mm: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: u8,
    pub subjects: usize,
    pub mean_dice_pct: Option<f64>,
    pub mean_hd95_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fold: Option<u8>,
    pub num_classes: u8,
    pub rows: Vec<ScoreRow>,
    pub per_class: Vec<ClassSummary>,
    pub mean_dice_pct: Option<f64>,
    pub mean_hd95_mm: Option<f64>,
}

impl MetricsReport {
    /// Dice percentages and distances are rounded to one decimal.
    pub fn new(fold: Option<u8>, num_classes: u8, scores: &[SubjectScore], agg: &Aggregate) -> Self {
        let rows = scores
            .iter()
            .flat_map(|s| {
                s.classes.iter().map(move |c| ScoreRow {
                    subject: s.subject.clone(),
                    class: c.class,
                    dice_pct: c.dice.map(|d| one_decimal(d * 100.0)),
                    hd95_mm: c.hd95.map(one_decimal),
                    status: c.status.as_str().to_string(),
                })
            })
            .collect();
        let per_class = agg
            .per_class
            .iter()
            .map(|c| ClassSummary {
                class: c.class,
                subjects: c.subjects,
                mean_dice_pct: c.mean_dice.map(|d| one_decimal(d * 100.0)),
                mean_hd95_mm: c.mean_hd95.map(one_decimal),
            })
            .collect();
        MetricsReport {
            fold,
            num_classes,
            rows,
            per_class,
            mean_dice_pct: agg.mean_dice.map(|d| one_decimal(d * 100.0)),
            mean_hd95_mm: agg.mean_hd95.map(one_decimal),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subject", "class", "dice_pct", "hd95_mm", "status"])?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.subject.clone(),
                r.class.to_string(),
                fmt(r.dice_pct),
                fmt(r.hd95_mm),
                r.status.clone(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
        if let Some(fold) = self.fold {
            writeln!(out, "fold {fold}")?;
        }
        writeln!(out, "{:<8} {:>8} {:>10} {:>10}", "class", "subjects", "dice %", "HD mm")?;
        for c in &self.per_class {
            writeln!(
                out,
                "{:<8} {:>8} {:>10} {:>10}",
                c.class,
                c.subjects,
                fmt(c.mean_dice_pct),
                fmt(c.mean_hd95_mm)
            )?;
        }
        writeln!(
            out,
            "{:<8} {:>8} {:>10} {:>10}",
            "mean",
            "",
            fmt(self.mean_dice_pct),
            fmt(self.mean_hd95_mm)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfigReport {
    pub truncation_multiplier: f64,
    pub class_agnostic: bool,
    pub include_background_channel: bool,
    pub unit_spacing: bool,
}

impl From<&FieldConfig> for FieldConfigReport {
    fn from(c: &FieldConfig) -> Self {
        Self {
            truncation_multiplier: c.truncation_multiplier,
            class_agnostic: c.class_mode == ClassMode::ClassAgnostic,
            include_background_channel: c.include_background_channel,
            unit_spacing: c.unit_spacing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaConfigReport {
    /// `l1`, `l2` or `ce`.
    pub base: String,
    pub squared_weight: bool,
    pub stop_grad_weight: bool,
    pub paper_sign: bool,
}

pub fn base_term_name(b: BaseTerm) -> &'static str {
    match b {
        BaseTerm::Abs => "l1",
        BaseTerm::Squared => "l2",
        BaseTerm::Bce => "ce",
    }
}

impl From<&BaLossConfig> for BaConfigReport {
    fn from(c: &BaLossConfig) -> Self {
        Self {
            base: base_term_name(c.base_term).into(),
            squared_weight: c.use_squared_weight,
            stop_grad_weight: c.stop_gradient_on_weight,
            paper_sign: c.sign_convention == SignConvention::PaperLiteral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradSummary {
    pub dims: [usize; 3],
    pub channels: usize,
    pub l2_norm: f64,
    pub max_abs: f64,
}

impl From<&ChannelVolume> for GradSummary {
    fn from(g: &ChannelVolume) -> Self {
        let v = g.values();
        Self {
            dims: g.dims().as_array(),
            channels: g.channels(),
            l2_norm: batseg_core::reduce::pairwise_sum(&v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt(),
            max_abs: v.iter().fold(0.0, |m, x| x.abs().max(m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReportJson {
    pub ce: f64,
    pub dice: f64,
    pub ba: f64,
    pub total: f64,
    pub field: FieldConfigReport,
    pub ba_config: BaConfigReport,
    pub grad_ba: GradSummary,
}

impl LossReportJson {
    pub fn new(r: &LossReport, field: &FieldConfig, ba: &BaLossConfig) -> Self {
        Self {
            ce: r.ce,
            dice: r.dice,
            ba: r.ba,
            total: r.total,
            field: field.into(),
            ba_config: ba.into(),
            grad_ba: (&r.grad_ba).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStatsJson {
    pub channel: usize,
    pub min: f64,
    pub max: f64,
    pub zero_fraction: f64,
    pub above_half_fraction: f64,
}

pub fn stats_rows(stats: &[ChannelStats]) -> Vec<ChannelStatsJson> {
    stats
        .iter()
        .enumerate()
        .map(|(channel, s)| ChannelStatsJson {
            channel,
            min: s.min,
            max: s.max,
            zero_fraction: s.zero_fraction,
            above_half_fraction: s.above_half_fraction,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use batseg_core::metrics::{ClassScore, ScoreStatus};

    fn report() -> MetricsReport {
        let scores = vec![SubjectScore {
            subject: "s1".into(),
            classes: vec![
                ClassScore { class: 1, dice: Some(0.8123), hd95: Some(2.26), status: ScoreStatus::Scored },
                ClassScore { class: 2, dice: None, hd95: None, status: ScoreStatus::ClassAbsent },
            ],
        }];
        let agg = batseg_core::metrics::aggregate(&scores, 3);
        MetricsReport::new(Some(1), 3, &scores, &agg)
    }

    #[test]
    fn csv_uses_one_decimal_and_blank_absent_fields() {
        let mut buf = Vec::new();
        report().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "subject,class,dice_pct,hd95_mm,status\ns1,1,81.2,2.3,scored\ns1,2,,,class_absent\n"
        );
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        let back: MetricsReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
