//! Single-file NIfTI-1 (`n+1`) encoding and decoding.
//!
//! Only dims, pixdim, datatype, vox_offset and scaling are interpreted; the
//! affine is written as identity codes and ignored on read. Spacing is
//! stored twice: as the standard 32-bit `pixdim` and, bit-exact, as a comment
//! extension that this crate reads back when it agrees with `pixdim`.

use batseg_core::Spacing;

use crate::io::{Dtype, Image};
use crate::{Error, Result};

pub const HEADER_SIZE: usize = 348;
const MAGIC: &[u8; 4] = b"n+1\0";
const ECODE_COMMENT: i32 = 6;
const SPACING_TAG: &str = "batseg-spacing";

mod offsets {
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const MAGIC: usize = 344;
}

impl Dtype {
    fn nifti_code(self) -> i16 {
        match self {
            Dtype::U8 => 2,
            Dtype::I16 => 4,
            Dtype::F32 => 16,
            Dtype::F64 => 64,
        }
    }

    fn from_nifti_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Dtype::U8,
            4 => Dtype::I16,
            16 => Dtype::F32,
            64 => Dtype::F64,
            other => {
                return Err(Error::Unsupported(format!(
                    "NIfTI datatype {other} (supported: uint8, int16, float32, float64)"
                )))
            }
        })
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Reader<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Reader<'_> {
    fn take<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[at..at + N]);
        if let Endian::Big = self.endian {
            b.reverse();
        }
        b
    }

    fn i16(&self, at: usize) -> i16 {
        i16::from_le_bytes(self.take(at))
    }

    fn i32(&self, at: usize) -> i32 {
        i32::from_le_bytes(self.take(at))
    }

    fn f32(&self, at: usize) -> f32 {
        f32::from_le_bytes(self.take(at))
    }

    fn f64(&self, at: usize) -> f64 {
        f64::from_le_bytes(self.take(at))
    }
}

pub fn is_nifti(bytes: &[u8]) -> bool {
    bytes.len() >= 4
        && (i32::from_le_bytes(bytes[..4].try_into().unwrap()) == HEADER_SIZE as i32
            || i32::from_be_bytes(bytes[..4].try_into().unwrap()) == HEADER_SIZE as i32)
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the {HEADER_SIZE}-byte NIfTI-1 header",
            bytes.len()
        )));
    }
    let endian = if i32::from_le_bytes(bytes[..4].try_into().unwrap()) == HEADER_SIZE as i32 {
        Endian::Little
    } else if i32::from_be_bytes(bytes[..4].try_into().unwrap()) == HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(Error::Format("sizeof_hdr is not 348".into()));
    };
    if &bytes[offsets::MAGIC..offsets::MAGIC + 4] != MAGIC {
        return Err(Error::Format("missing single-file magic \"n+1\"".into()));
    }
    let r = Reader { bytes, endian };

    let ndim = r.i16(offsets::DIM);
    if !(1..=7).contains(&ndim) {
        return Err(Error::Format(format!("dim[0] = {ndim} out of range")));
    }
    let mut dim = [1usize; 7];
    for (i, d) in dim.iter_mut().enumerate().take(ndim as usize) {
        let v = r.i16(offsets::DIM + 2 * (i + 1));
        if v < 1 {
            return Err(Error::Format(format!("dim[{}] = {v} is not positive", i + 1)));
        }
        *d = v as usize;
    }
    if dim[4..].iter().any(|&d| d != 1) {
        return Err(Error::Unsupported(format!("{ndim}-D images with extent beyond the 4th axis")));
    }
    let dtype = Dtype::from_nifti_code(r.i16(offsets::DATATYPE))?;
    let bitpix = r.i16(offsets::BITPIX);
    if bitpix as usize != dtype.size() * 8 {
        return Err(Error::Format(format!("bitpix {bitpix} does not match datatype")));
    }
    let pixdim: [f32; 3] = std::array::from_fn(|i| r.f32(offsets::PIXDIM + 4 * (i + 1)));
    let vox_offset = r.f32(offsets::VOX_OFFSET);
    if !(vox_offset >= HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
        return Err(Error::Format(format!("vox_offset {vox_offset} is invalid")));
    }
    let vox_offset = vox_offset as usize;

    let spacing = match exact_spacing(&r, vox_offset, pixdim) {
        Some(s) => s,
        None => {
            let widen = |v: f32| -> Result<f64> {
                // shortest decimal that round-trips the f32, so 0.47f32 reads as 0.47
                let v = if v == 0.0 { 1.0 } else { v.abs() };
                Ok(v.to_string().parse::<f64>().expect("float display parses"))
            };
            Spacing::new(widen(pixdim[0])?, widen(pixdim[1])?, widen(pixdim[2])?)?
        }
    };

    let count = dim[..4].iter().product::<usize>();
    let need = count * dtype.size();
    let payload = bytes.get(vox_offset..vox_offset + need).ok_or_else(|| {
        Error::Format(format!(
            "payload truncated: need {need} bytes at offset {vox_offset}, file has {}",
            bytes.len()
        ))
    })?;
    let mut values: Vec<f64> = payload
        .chunks_exact(dtype.size())
        .map(|c| {
            let r = Reader { bytes: c, endian };
            match dtype {
                Dtype::U8 => f64::from(c[0]),
                Dtype::I16 => f64::from(r.i16(0)),
                Dtype::F32 => f64::from(r.f32(0)),
                Dtype::F64 => r.f64(0),
            }
        })
        .collect();

    let slope = r.f32(offsets::SCL_SLOPE);
    let inter = r.f32(offsets::SCL_INTER);
    let scaled = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);
    if scaled {
        let (s, i) = (f64::from(slope), f64::from(inter));
        values.iter_mut().for_each(|v| *v = *v * s + i);
    }

    Ok(Image {
        dims: [dim[0], dim[1], dim[2]],
        channels: dim[3],
        spacing,
        dtype,
        scaled,
        values,
    })
}

fn exact_spacing(r: &Reader<'_>, vox_offset: usize, pixdim: [f32; 3]) -> Option<Spacing> {
    if vox_offset < HEADER_SIZE + 4 || r.bytes.get(HEADER_SIZE).copied() != Some(1) {
        return None;
    }
    let mut at = HEADER_SIZE + 4;
    while at + 8 <= vox_offset {
        let esize = usize::try_from(r.i32(at)).ok()?;
        let ecode = r.i32(at + 4);
        if esize < 8 || at + esize > vox_offset {
            return None;
        }
        if ecode == ECODE_COMMENT {
            let text = std::str::from_utf8(&r.bytes[at + 8..at + esize]).ok()?;
            let text = text.trim_end_matches('\0');
            if let Some(rest) = text.strip_prefix(SPACING_TAG) {
                let parsed: Vec<f64> = rest
                    .split_whitespace()
                    .filter_map(|h| u64::from_str_radix(h, 16).ok().map(f64::from_bits))
                    .collect();
                if parsed.len() == 3 && (0..3).all(|i| parsed[i] as f32 == pixdim[i]) {
                    return Spacing::new(parsed[0], parsed[1], parsed[2]).ok();
                }
            }
        }
        at += esize;
    }
    None
}

pub fn encode(img: &Image) -> Result<Vec<u8>> {
    let ndim: i16 = if img.channels > 1 { 4 } else { 3 };
    let mut dim = [1i16; 8];
    dim[0] = ndim;
    for (i, &d) in img.dims.iter().chain(std::iter::once(&img.channels)).enumerate() {
        dim[i + 1] = i16::try_from(d)
            .map_err(|_| Error::Unsupported(format!("extent {d} exceeds the NIfTI-1 limit")))?;
    }

    let sp = img.spacing.as_array();
    let mut ext = format!(
        "{SPACING_TAG} {:016x} {:016x} {:016x}",
        sp[0].to_bits(),
        sp[1].to_bits(),
        sp[2].to_bits()
    )
    .into_bytes();
    let esize = (8 + ext.len()).div_ceil(16) * 16;
    ext.resize(esize - 8, 0);
    let vox_offset = HEADER_SIZE + 4 + esize;

    let mut out = vec![0u8; vox_offset];
    out[..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    for (i, d) in dim.iter().enumerate() {
        out[offsets::DIM + 2 * i..offsets::DIM + 2 * i + 2].copy_from_slice(&d.to_le_bytes());
    }
    out[offsets::DATATYPE..offsets::DATATYPE + 2].copy_from_slice(&img.dtype.nifti_code().to_le_bytes());
    out[offsets::BITPIX..offsets::BITPIX + 2]
        .copy_from_slice(&((img.dtype.size() * 8) as i16).to_le_bytes());
    let pixdim = [1.0f32, sp[0] as f32, sp[1] as f32, sp[2] as f32, 1.0, 1.0, 1.0, 1.0];
    for (i, p) in pixdim.iter().enumerate() {
        out[offsets::PIXDIM + 4 * i..offsets::PIXDIM + 4 * i + 4].copy_from_slice(&p.to_le_bytes());
    }
    out[offsets::VOX_OFFSET..offsets::VOX_OFFSET + 4].copy_from_slice(&(vox_offset as f32).to_le_bytes());
    out[offsets::SCL_SLOPE..offsets::SCL_SLOPE + 4].copy_from_slice(&1.0f32.to_le_bytes());
    out[offsets::SCL_INTER..offsets::SCL_INTER + 4].copy_from_slice(&0.0f32.to_le_bytes());
    out[offsets::XYZT_UNITS] = 2; // millimetres
    let descrip = b"batseg";
    out[offsets::DESCRIP..offsets::DESCRIP + descrip.len()].copy_from_slice(descrip);
    out[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(MAGIC);

    out[HEADER_SIZE] = 1;
    let at = HEADER_SIZE + 4;
    out[at..at + 4].copy_from_slice(&(esize as i32).to_le_bytes());
    out[at + 4..at + 8].copy_from_slice(&ECODE_COMMENT.to_le_bytes());
    out[at + 8..at + esize].copy_from_slice(&ext);

    img.dtype.append_le(&img.values, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(dtype: Dtype, values: Vec<f64>, dims: [usize; 3], channels: usize) -> Image {
        Image {
            dims,
            channels,
            spacing: Spacing::new(0.47, 0.47, 3.3).unwrap(),
            dtype,
            scaled: false,
            values,
        }
    }

    #[test]
    fn header_fields_are_standard() {
        let img = image(Dtype::F32, vec![0.0; 64], [4, 4, 4], 1);
        let bytes = encode(&img).unwrap();
        assert_eq!(&bytes[344..348], b"n+1\0");
        assert_eq!(i16::from_le_bytes([bytes[40], bytes[41]]), 3);
        assert_eq!(i16::from_le_bytes([bytes[70], bytes[71]]), 16);
        let px = f32::from_le_bytes(bytes[80..84].try_into().unwrap());
        assert_eq!(px, 0.47f32);
        let vox = f32::from_le_bytes(bytes[108..112].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), vox + 64 * 4);
        assert_eq!(vox % 16, 0);
    }

    #[test]
    fn foreign_pixdim_reads_as_shortest_decimal() {
        let img = image(Dtype::F32, vec![0.0; 64], [4, 4, 4], 1);
        let mut bytes = encode(&img).unwrap();
        // drop the extension flag, as a file from another writer would lack it
        bytes[348] = 0;
        let back = decode(&bytes).unwrap();
        assert_eq!(back.spacing.as_array(), [0.47, 0.47, 3.3]);
    }

    #[test]
    fn big_endian_header_is_read() {
        let img = image(Dtype::I16, vec![1.0, -2.0, 300.0, 4.0], [2, 2, 1], 1);
        let le = encode(&img).unwrap();
        let mut be = le.clone();
        let swap = |b: &mut [u8], at: usize, n: usize| b[at..at + n].reverse();
        swap(&mut be, 0, 4);
        for i in 0..8 {
            swap(&mut be, 40 + 2 * i, 2);
            swap(&mut be, 76 + 4 * i, 4);
        }
        swap(&mut be, 70, 2);
        swap(&mut be, 72, 2);
        for at in [108, 112, 116] {
            swap(&mut be, at, 4);
        }
        be[348] = 0;
        let vox = f32::from_le_bytes(le[108..112].try_into().unwrap()) as usize;
        for k in 0..4 {
            swap(&mut be, vox + 2 * k, 2);
        }
        let back = decode(&be).unwrap();
        assert_eq!(back.values, vec![1.0, -2.0, 300.0, 4.0]);
    }

    #[test]
    fn scaling_is_applied() {
        let img = image(Dtype::U8, vec![1.0, 2.0], [2, 1, 1], 1);
        let mut bytes = encode(&img).unwrap();
        bytes[112..116].copy_from_slice(&2.0f32.to_le_bytes());
        bytes[116..120].copy_from_slice(&0.5f32.to_le_bytes());
        let back = decode(&bytes).unwrap();
        assert!(back.scaled);
        assert_eq!(back.values, vec![2.5, 4.5]);
    }

    #[test]
    fn rejects_bad_headers() {
        let img = image(Dtype::F64, vec![0.0; 8], [2, 2, 2], 1);
        let bytes = encode(&img).unwrap();
        assert!(matches!(decode(&bytes[..348]), Err(Error::Format(_))));
        assert!(matches!(decode(&bytes[..100]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[70..72].copy_from_slice(&8i16.to_le_bytes());
        assert!(matches!(decode(&bad), Err(Error::Unsupported(_))));
        let mut bad = bytes.clone();
        bad[344] = b'x';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
    }
}
