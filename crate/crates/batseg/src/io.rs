//! Reading and writing volumes, label maps and multi-channel fields.
//!
//! The container is chosen from the path on write (`.raw` for the raw
//! format, `.nii.gz` for gzip-compressed NIfTI, NIfTI otherwise) and sniffed
//! from the content on read.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use batseg_core::{ChannelVolume, Dims, DistanceField, LabelVolume, Spacing, Volume3D};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use serde::{Deserialize, Serialize};

use crate::{nifti, raw, Error, Result};

/// On-disk sample type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "uint8")]
    U8,
    #[serde(rename = "int16")]
    I16,
    #[serde(rename = "float32")]
    F32,
    #[serde(rename = "float64")]
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::I16 => 2,
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn is_integral(self) -> bool {
        matches!(self, Dtype::U8 | Dtype::I16)
    }

    pub(crate) fn decode_le(self, payload: &[u8]) -> Vec<f64> {
        payload
            .chunks_exact(self.size())
            .map(|c| match self {
                Dtype::U8 => f64::from(c[0]),
                Dtype::I16 => f64::from(i16::from_le_bytes([c[0], c[1]])),
                Dtype::F32 => f64::from(f32::from_le_bytes(c.try_into().unwrap())),
                Dtype::F64 => f64::from_le_bytes(c.try_into().unwrap()),
            })
            .collect()
    }

    /// Integer types only accept integral values in range.
    pub(crate) fn append_le(self, values: &[f64], out: &mut Vec<u8>) -> Result<()> {
        out.reserve(values.len() * self.size());
        for &v in values {
            match self {
                Dtype::U8 => out.push(checked_int(v, 0.0, 255.0, self)? as u8),
                Dtype::I16 => {
                    let i = checked_int(v, f64::from(i16::MIN), f64::from(i16::MAX), self)? as i16;
                    out.extend(i.to_le_bytes());
                }
                Dtype::F32 => out.extend((v as f32).to_le_bytes()),
                Dtype::F64 => out.extend(v.to_le_bytes()),
            }
        }
        Ok(())
    }
}

fn checked_int(v: f64, lo: f64, hi: f64, dtype: Dtype) -> Result<f64> {
    if v.fract() != 0.0 || v < lo || v > hi {
        return Err(Error::Unsupported(format!("value {v} cannot be stored as {dtype}")));
    }
    Ok(v)
}

impl std::fmt::Display for Dtype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dtype::U8 => "uint8",
            Dtype::I16 => "int16",
            Dtype::F32 => "float32",
            Dtype::F64 => "float64",
        })
    }
}

impl FromStr for Dtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uint8" => Ok(Dtype::U8),
            "int16" => Ok(Dtype::I16),
            "float32" => Ok(Dtype::F32),
            "float64" => Ok(Dtype::F64),
            other => Err(Error::Unsupported(format!("dtype {other}"))),
        }
    }
}

/// Decoded file contents before they are typed as a volume, labels or field.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub dims: [usize; 3],
    pub channels: usize,
    pub spacing: Spacing,
    pub dtype: Dtype,
    /// Whether NIfTI intensity scaling changed the stored samples.
    pub scaled: bool,
    pub values: Vec<f64>,
}

impl Image {
    fn grid(&self) -> Result<Dims> {
        Ok(Dims::try_from(self.dims)?)
    }
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if is_gzip(bytes) {
        let mut inflated = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut inflated)
            .map_err(|e| Error::Format(format!("gzip: {e}")))?;
        return decode_image(&inflated);
    }
    if raw::is_raw(bytes) {
        raw::decode(bytes)
    } else if nifti::is_nifti(bytes) || bytes.len() < nifti::HEADER_SIZE {
        nifti::decode(bytes)
    } else {
        Err(Error::Format("neither NIfTI-1 nor raw volume".into()))
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Container {
    Nifti,
    NiftiGz,
    Raw,
}

fn container_for(path: &Path) -> Container {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if name.ends_with(".nii.gz") {
        Container::NiftiGz
    } else if name.ends_with(".raw") {
        Container::Raw
    } else {
        Container::Nifti
    }
}

pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let bytes = match container_for(path) {
        Container::Raw => raw::encode(img)?,
        Container::Nifti | Container::NiftiGz => nifti::encode(img)?,
    };
    let write = || -> std::io::Result<()> {
        let file = fs::File::create(path)?;
        if container_for(path) == Container::NiftiGz {
            let mut enc = GzEncoder::new(file, flate2::Compression::default());
            enc.write_all(&bytes)?;
            enc.finish()?.sync_all()
        } else {
            let mut file = file;
            file.write_all(&bytes)?;
            file.sync_all()
        }
    };
    write().map_err(|e| Error::io(path, e))
}

/// A volume read with or without the label hint.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    Intensity(Volume3D),
    Labels(LabelVolume),
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let img = read_image(path)?;
    if img.channels != 1 {
        return Err(Error::Format(format!(
            "{}: expected a 3D volume, found {} channels",
            path.display(),
            img.channels
        )));
    }
    Ok(Volume3D::new(img.grid()?, img.spacing, img.values)?)
}

/// Reads an integral-typed label map. `num_classes` defaults to
/// `max(label) + 1` (at least 2).
pub fn read_labels(path: impl AsRef<Path>, num_classes: Option<u8>) -> Result<LabelVolume> {
    let path = path.as_ref();
    let img = read_image(path)?;
    if !img.dtype.is_integral() || img.scaled {
        return Err(Error::Unsupported(format!(
            "{}: label maps need an unscaled integer datatype, found {}",
            path.display(),
            img.dtype
        )));
    }
    if img.channels != 1 {
        return Err(Error::Format(format!("{}: label map has {} channels", path.display(), img.channels)));
    }
    let labels = img
        .values
        .iter()
        .map(|&v| {
            if (0.0..=255.0).contains(&v) {
                Ok(v as u8)
            } else {
                Err(Error::Format(format!("{}: label {v} out of range", path.display())))
            }
        })
        .collect::<Result<Vec<u8>>>()?;
    let dims = img.grid()?;
    Ok(match num_classes {
        Some(k) => LabelVolume::new(dims, img.spacing, labels, k)?,
        None => LabelVolume::with_inferred_classes(dims, img.spacing, labels)?,
    })
}

pub fn read_any(path: impl AsRef<Path>, labels: bool) -> Result<AnyVolume> {
    Ok(if labels {
        AnyVolume::Labels(read_labels(path, None)?)
    } else {
        AnyVolume::Intensity(read_volume(path)?)
    })
}

pub fn read_channels(path: impl AsRef<Path>) -> Result<ChannelVolume> {
    let img = read_image(path)?;
    Ok(ChannelVolume::new(img.grid()?, img.spacing, img.channels, img.values)?)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<DistanceField> {
    Ok(DistanceField::new(read_channels(path)?)?)
}

pub fn write_volume(path: impl AsRef<Path>, v: &Volume3D, dtype: Dtype) -> Result<()> {
    write_image(
        path,
        &Image {
            dims: v.dims().as_array(),
            channels: 1,
            spacing: v.spacing(),
            dtype,
            scaled: false,
            values: v.data().to_vec(),
        },
    )
}

pub fn write_labels(path: impl AsRef<Path>, v: &LabelVolume) -> Result<()> {
    write_image(
        path,
        &Image {
            dims: v.dims().as_array(),
            channels: 1,
            spacing: v.spacing(),
            dtype: Dtype::U8,
            scaled: false,
            values: v.labels().iter().map(|&l| f64::from(l)).collect(),
        },
    )
}

pub fn write_channels(path: impl AsRef<Path>, v: &ChannelVolume, dtype: Dtype) -> Result<()> {
    write_image(
        path,
        &Image {
            dims: v.dims().as_array(),
            channels: v.channels(),
            spacing: v.spacing(),
            dtype,
            scaled: false,
            values: v.values().to_vec(),
        },
    )
}

/// Fields are stored as 4D images with the channel on the fourth axis.
pub fn write_field(path: impl AsRef<Path>, f: &DistanceField, dtype: Dtype) -> Result<()> {
    write_channels(path, f.as_channels(), dtype)
}
