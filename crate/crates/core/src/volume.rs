//! Dense volume types shared by every other module.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Grid extent `(H, W, D)`; `x` runs along `H` and is the fastest axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub h: usize,
    pub w: usize,
    pub d: usize,
}

impl Dims {
    pub fn new(h: usize, w: usize, d: usize) -> Result<Self> {
        if h == 0 || w == 0 || d == 0 {
            return Err(Error::Invalid(format!("dims must be positive, got ({h}, {w}, {d})")));
        }
        Ok(Self { h, w, d })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.h * self.w * self.d
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.h * (y + self.w * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.h;
        let rest = idx / self.h;
        [x, rest % self.w, rest / self.w]
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.h, self.w, self.d]
    }
}

impl TryFrom<[usize; 3]> for Dims {
    type Error = Error;

    fn try_from(v: [usize; 3]) -> Result<Self> {
        Dims::new(v[0], v[1], v[2])
    }
}

/// Physical voxel size in millimetres along `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spacing([f64; 3]);

impl Spacing {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        for s in [sx, sy, sz] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Invalid(format!(
                    "spacing must be finite and positive, got ({sx}, {sy}, {sz})"
                )));
            }
        }
        Ok(Self([sx, sy, sz]))
    }

    pub const fn unit() -> Self {
        Self([1.0, 1.0, 1.0])
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0[0] * c, self.0[1] * c, self.0[2] * c)
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Self::unit()
    }
}

impl TryFrom<[f64; 3]> for Spacing {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Spacing::new(v[0], v[1], v[2])
    }
}

/// Scalar intensity volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f64>,
}

impl Volume3D {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::Shape(format!(
                "volume data has {} values, dims {:?} need {}",
                data.len(),
                dims.as_array(),
                dims.len()
            )));
        }
        Ok(Self { dims, spacing, data })
    }

    pub fn filled(dims: Dims, spacing: Spacing, value: f64) -> Self {
        Self { dims, spacing, data: vec![value; dims.len()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.dims.index(x, y, z)]
    }
}

/// Per-voxel class labels; class 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    spacing: Spacing,
    labels: Vec<u8>,
    num_classes: u8,
}

impl LabelVolume {
    pub fn new(dims: Dims, spacing: Spacing, labels: Vec<u8>, num_classes: u8) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Invalid(format!("need at least 2 classes, got {num_classes}")));
        }
        if labels.len() != dims.len() {
            return Err(Error::Shape(format!(
                "label data has {} values, dims {:?} need {}",
                labels.len(),
                dims.as_array(),
                dims.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self { dims, spacing, labels, num_classes })
    }

    /// Infers `K` as `max(label) + 1`, never less than 2.
    pub fn with_inferred_classes(dims: Dims, spacing: Spacing, labels: Vec<u8>) -> Result<Self> {
        let k = labels.iter().copied().max().unwrap_or(0).saturating_add(1).max(2);
        Self::new(dims, spacing, labels, k)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn mask(&self, class: u8) -> Vec<bool> {
        self.labels.iter().map(|&l| l == class).collect()
    }

    pub fn count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    pub fn contains(&self, class: u8) -> bool {
        self.labels.contains(&class)
    }

    /// Union of every non-background class as a two-class volume.
    pub fn binarized(&self) -> LabelVolume {
        LabelVolume {
            dims: self.dims,
            spacing: self.spacing,
            labels: self.labels.iter().map(|&l| u8::from(l != 0)).collect(),
            num_classes: 2,
        }
    }

    pub fn with_spacing(mut self, spacing: Spacing) -> Self {
        self.spacing = spacing;
        self
    }
}

/// Real-valued grid with `C` channels stored plane by plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVolume {
    dims: Dims,
    spacing: Spacing,
    channels: usize,
    values: Vec<f64>,
}

impl ChannelVolume {
    pub fn new(dims: Dims, spacing: Spacing, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Invalid("channel count must be positive".into()));
        }
        if values.len() != dims.len() * channels {
            return Err(Error::Shape(format!(
                "{} values do not fill {:?} x {} channels",
                values.len(),
                dims.as_array(),
                channels
            )));
        }
        Ok(Self { dims, spacing, channels, values })
    }

    pub fn zeros(dims: Dims, spacing: Spacing, channels: usize) -> Self {
        Self { dims, spacing, channels, values: vec![0.0; dims.len() * channels] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let n = self.dims.len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.dims.len();
        &mut self.values[k * n..(k + 1) * n]
    }

    /// Copy with channels `[from, channels)`.
    pub fn drop_leading_channels(&self, from: usize) -> ChannelVolume {
        let n = self.dims.len();
        ChannelVolume {
            dims: self.dims,
            spacing: self.spacing,
            channels: self.channels - from,
            values: self.values[from * n..].to_vec(),
        }
    }

    pub fn same_shape(&self, other: &ChannelVolume) -> bool {
        self.dims == other.dims && self.channels == other.channels
    }
}

/// Ground-truth surface distance field; every value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField(ChannelVolume);

impl DistanceField {
    pub fn new(inner: ChannelVolume) -> Result<Self> {
        if let Some(bad) = inner.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("distance field value {bad} outside [0, 1]")));
        }
        Ok(Self(inner))
    }

    pub fn as_channels(&self) -> &ChannelVolume {
        &self.0
    }

    pub fn into_channels(self) -> ChannelVolume {
        self.0
    }

    pub fn dims(&self) -> Dims {
        self.0.dims
    }

    pub fn channels(&self) -> usize {
        self.0.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.0.values
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        self.0.channel(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    Logits,
    Probabilities,
}

/// Per-voxel class scores, `K` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVolume {
    scores: ChannelVolume,
    mode: PredictionMode,
}

/// Allowed deviation of a probability vector's sum from 1.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-5;

impl PredictionVolume {
    pub fn new(scores: ChannelVolume, mode: PredictionMode) -> Result<Self> {
        if mode == PredictionMode::Probabilities {
            let n = scores.dims.len();
            for v in 0..n {
                let mut sum = 0.0;
                for k in 0..scores.channels {
                    let p = scores.values[k * n + v];
                    if !(p >= 0.0) {
                        return Err(Error::Invalid(format!("negative probability {p} at voxel {v}")));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(Error::Invalid(format!(
                        "probabilities at voxel {v} sum to {sum}"
                    )));
                }
            }
        }
        Ok(Self { scores, mode })
    }

    pub fn logits(scores: ChannelVolume) -> Self {
        Self { scores, mode: PredictionMode::Logits }
    }

    pub fn mode(&self) -> PredictionMode {
        self.mode
    }

    pub fn scores(&self) -> &ChannelVolume {
        &self.scores
    }

    pub fn dims(&self) -> Dims {
        self.scores.dims
    }

    pub fn num_classes(&self) -> usize {
        self.scores.channels
    }

    /// Softmax over channels; probabilities pass through unchanged.
    pub fn to_probabilities(&self) -> PredictionVolume {
        match self.mode {
            PredictionMode::Probabilities => self.clone(),
            PredictionMode::Logits => PredictionVolume {
                scores: softmax_channels(&self.scores),
                mode: PredictionMode::Probabilities,
            },
        }
    }
}

pub(crate) fn softmax_channels(logits: &ChannelVolume) -> ChannelVolume {
    let n = logits.dims.len();
    let k = logits.channels;
    let mut out = vec![0.0; n * k];
    for v in 0..n {
        let max = (0..k).map(|c| logits.values[c * n + v]).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..k {
            let e = libm::exp(logits.values[c * n + v] - max);
            out[c * n + v] = e;
            sum += e;
        }
        for c in 0..k {
            out[c * n + v] /= sum;
        }
    }
    ChannelVolume { dims: logits.dims, spacing: logits.spacing, channels: k, values: out }
}

/// One-hot encoding of `gt` in probabilities mode, `K` channels.
pub fn one_hot(gt: &LabelVolume) -> PredictionVolume {
    let n = gt.dims.len();
    let k = usize::from(gt.num_classes);
    let mut values = vec![0.0; n * k];
    for (v, &l) in gt.labels.iter().enumerate() {
        values[usize::from(l) * n + v] = 1.0;
    }
    PredictionVolume {
        scores: ChannelVolume { dims: gt.dims, spacing: gt.spacing, channels: k, values },
        mode: PredictionMode::Probabilities,
    }
}
