//! The `batseg` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use batseg_core::dfield::{build_field, field_stats, ClassMode, FieldConfig};
use batseg_core::losses::{total_loss, BaLossConfig, BaseTerm, SignConvention};
use batseg_core::preprocess::{resample_labels, resample_volume, zscore, Interpolation, ResampleSpec};
use batseg_core::{PredictionVolume, Spacing};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::eval::evaluate_directory;
use crate::gradcheck::{self, GradcheckOptions, Variant, MAX_SIZE};
use crate::io::{self, AnyVolume, Dtype};
use crate::manifest::FoldManifest;
use crate::report::{stats_rows, LossReportJson};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "BATSEG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "batseg", version, about = "Boundary-aware tumor segmentation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the truncated, normalized surface distance field of a label map.
    Dfield(DfieldArgs),
    /// Evaluate CE + soft Dice + boundary-aware loss and print a JSON report.
    Loss(LossArgs),
    /// Randomized finite-difference checks of all loss gradients.
    Gradcheck(GradcheckArgs),
    /// Score a fold of predictions against ground truth (Dice %, HD95 mm).
    Eval(EvalArgs),
    /// Resample a volume to a target voxel spacing.
    Resample(ResampleArgs),
    /// Z-score intensity normalization.
    Normalize(NormalizeArgs),
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Truncation multiplier m; exterior voxels beyond m * M are zeroed.
    #[arg(long = "trunc-mult", default_value_t = 1.0)]
    pub trunc_mult: f64,
    /// Single field channel from the union of all tumor classes.
    #[arg(long)]
    pub class_agnostic: bool,
    /// Measure distances in voxels instead of millimetres.
    #[arg(long)]
    pub unit_spacing: bool,
    /// Prepend an all-zero background channel.
    #[arg(long)]
    pub include_background: bool,
}

impl FieldArgs {
    fn config(&self) -> FieldConfig {
        FieldConfig {
            truncation_multiplier: self.trunc_mult,
            class_mode: if self.class_agnostic { ClassMode::ClassAgnostic } else { ClassMode::Multiclass },
            include_background_channel: self.include_background,
            unit_spacing: self.unit_spacing,
        }
    }
}

#[derive(Debug, Args)]
pub struct DfieldArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of classes including background (default: max label + 1).
    #[arg(long)]
    pub classes: Option<u8>,
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, default_value_t = Dtype::F32)]
    pub dtype: Dtype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaBase {
    L1,
    L2,
    Ce,
}

impl From<BaBase> for BaseTerm {
    fn from(b: BaBase) -> Self {
        match b {
            BaBase::L1 => BaseTerm::Abs,
            BaBase::L2 => BaseTerm::Squared,
            BaBase::Ce => BaseTerm::Bce,
        }
    }
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Segmentation head logits, one channel per class.
    #[arg(long)]
    pub pred_logits: PathBuf,
    /// Distance-field head output.
    #[arg(long)]
    pub pred_field: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, value_enum, default_value_t = BaBase::L1)]
    pub ba_base: BaBase,
    #[arg(long)]
    pub no_squared_weight: bool,
    #[arg(long)]
    pub stop_grad_weight: bool,
    /// Use the negated sign on the boundary-aware term.
    #[arg(long)]
    pub paper_sign: bool,
    /// Write the boundary-aware gradient field here.
    #[arg(long)]
    pub grad_out: Option<PathBuf>,
    #[arg(long, default_value_t = Dtype::F32)]
    pub dtype: Dtype,
}

impl LossArgs {
    fn ba_config(&self) -> BaLossConfig {
        BaLossConfig {
            base_term: self.ba_base.into(),
            use_squared_weight: !self.no_squared_weight,
            stop_gradient_on_weight: self.stop_grad_weight,
            sign_convention: if self.paper_sign { SignConvention::PaperLiteral } else { SignConvention::Positive },
        }
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Largest extent per axis of the random instances (at most 6).
    #[arg(long, default_value_t = 4)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check one boundary-aware variant instead of all of them.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Trilinear,
    Nearest,
}

fn parse_spacing(s: &str) -> std::result::Result<Spacing, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        &[x, y, z] => Spacing::new(x, y, z).map_err(|e| e.to_string()),
        _ => Err(format!("expected sx,sy,sz, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Target spacing in mm, e.g. 0.47,0.47,3.3.
    #[arg(long, value_parser = parse_spacing)]
    pub spacing: Spacing,
    #[arg(long, value_enum, default_value_t = Mode::Trilinear)]
    pub mode: Mode,
    /// Treat the input as a label map.
    #[arg(long)]
    pub labels: bool,
    /// Output datatype for intensity volumes.
    #[arg(long, default_value_t = Dtype::F32)]
    pub dtype: Dtype,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = Dtype::F32)]
    pub dtype: Dtype,
}

/// Runs the tool on `std::env::args_os()`-style arguments.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut (dyn Write + Send) = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };

    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                let _ = writeln!(err, "error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return EXIT_USAGE;
            }
        },
        Err(_) => None,
    };
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, out, err)),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_FAILURE;
            }
        },
        None => dispatch(cli.command, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

fn dispatch(command: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<i32> {
    match command {
        Command::Dfield(a) => cmd_dfield(a, out),
        Command::Loss(a) => cmd_loss(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out, err),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Resample(a) => cmd_resample(a),
        Command::Normalize(a) => cmd_normalize(a),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_dfield(a: DfieldArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let gt = io::read_labels(&a.gt, a.classes)?;
    let field = build_field(&gt, &a.field.config())?;
    io::write_field(&a.out, &field, a.dtype)?;
    for s in stats_rows(&field_stats(&field)) {
        writeln!(
            out,
            "channel {}: min {:.6} max {:.6} zero_fraction {:.6} above_half_fraction {:.6}",
            s.channel, s.min, s.max, s.zero_fraction, s.above_half_fraction
        )
        .map_err(stdout_err)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_loss(a: LossArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let logits = io::read_channels(&a.pred_logits)?;
    let pred_field = io::read_channels(&a.pred_field)?;
    let classes = u8::try_from(logits.channels())
        .map_err(|_| Error::Format(format!("{} logit channels", logits.channels())))?;
    let gt = io::read_labels(&a.gt, Some(classes))?;
    let field_cfg = a.field.config();
    let ba_cfg = a.ba_config();
    let report = total_loss(&PredictionVolume::logits(logits), &pred_field, &gt, &field_cfg, &ba_cfg)?;
    if let Some(path) = &a.grad_out {
        io::write_channels(path, &report.grad_ba, a.dtype)?;
    }
    let json = serde_json::to_string_pretty(&LossReportJson::new(&report, &field_cfg, &ba_cfg))?;
    writeln!(out, "{json}").map_err(stdout_err)?;
    Ok(EXIT_OK)
}

pub fn cmd_gradcheck(a: GradcheckArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<i32> {
    if a.size == 0 || a.size > MAX_SIZE {
        writeln!(err, "error: --size must be in 1..={MAX_SIZE}, got {}", a.size).map_err(stdout_err)?;
        return Ok(EXIT_USAGE);
    }
    if a.instances == 0 {
        writeln!(err, "error: --instances must be positive").map_err(stdout_err)?;
        return Ok(EXIT_USAGE);
    }
    let opts = GradcheckOptions {
        size: a.size,
        seed: a.seed,
        instances: a.instances,
        variants: a.variant.map_or_else(|| Variant::ALL.to_vec(), |v| vec![v]),
        ..Default::default()
    };
    let report = gradcheck::run(&opts)?;
    for c in &report.checks {
        writeln!(out, "{:<14} max relative error {:.3e}", c.loss, c.max_relative_error).map_err(stdout_err)?;
    }
    if let Some(r) = report.stop_grad_ratio_error {
        writeln!(out, "stop-grad ratio: grad_canonical = 3 * grad_stopgrad, max deviation {r:.3e}")
            .map_err(stdout_err)?;
    }
    writeln!(
        out,
        "max relative error {:.3e} (tolerance {:.0e}): {}",
        report.max_relative_error,
        report.tolerance,
        if report.passed { "ok" } else { "FAILED" }
    )
    .map_err(stdout_err)?;
    if report.passed {
        return Ok(EXIT_OK);
    }
    if let Some(w) = report.worst().and_then(|c| c.worst.as_ref().map(|w| (c, w))) {
        let (c, w) = w;
        writeln!(
            err,
            "worst: {} instance {} dims {:?} channel {} voxel {:?}: analytic {:e} numeric {:e}",
            c.loss, w.instance, w.dims, w.channel, w.voxel, w.analytic, w.numeric
        )
        .map_err(stdout_err)?;
    }
    Ok(EXIT_FAILURE)
}

pub fn cmd_eval(a: EvalArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    for dir in [&a.pred_dir, &a.gt_dir] {
        std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    }
    let manifest = FoldManifest::read(&a.manifest)?;
    let report = evaluate_directory(&a.pred_dir, &a.gt_dir, &manifest, a.classes)?;
    let csv_file = std::fs::File::create(&a.out_csv).map_err(|e| Error::io(&a.out_csv, e))?;
    report.write_csv(std::io::BufWriter::new(csv_file))?;
    if let Some(path) = &a.out_json {
        std::fs::write(path, report.to_json()? + "\n").map_err(|e| Error::io(path, e))?;
    }
    report.write_summary(out).map_err(stdout_err)?;
    Ok(EXIT_OK)
}

pub fn cmd_resample(a: ResampleArgs) -> Result<i32> {
    let interpolation = match a.mode {
        Mode::Trilinear => Interpolation::Trilinear,
        Mode::Nearest => Interpolation::Nearest,
    };
    let spec = ResampleSpec::new(a.spacing, interpolation);
    match io::read_any(&a.input, a.labels)? {
        AnyVolume::Labels(l) => io::write_labels(&a.out, &resample_labels(&l, &spec)?)?,
        AnyVolume::Intensity(v) => io::write_volume(&a.out, &resample_volume(&v, &spec)?, a.dtype)?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_normalize(a: NormalizeArgs) -> Result<i32> {
    let v = io::read_volume(&a.input)?;
    io::write_volume(&a.out, &zscore(&v), a.dtype)?;
    Ok(EXIT_OK)
}
