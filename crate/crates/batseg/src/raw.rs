//! Raw volume format: one JSON header line, then a little-endian payload.
//!
//! ```text
//! {"format":"batseg-raw","version":1,"dims":[4,4,4],"channels":1,"spacing":[0.47,0.47,3.3],"dtype":"float32"}\n
//! <dims[0]*dims[1]*dims[2]*channels little-endian samples, x fastest, channel planes last>
//! ```

use batseg_core::Spacing;
use serde::{Deserialize, Serialize};

use crate::io::{Dtype, Image};
use crate::{Error, Result};

const FORMAT: &str = "batseg-raw";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dims: [usize; 3],
    channels: usize,
    spacing: [f64; 3],
    dtype: Dtype,
}

pub fn is_raw(bytes: &[u8]) -> bool {
    bytes.first() == Some(&b'{')
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("raw header is not newline-terminated".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::Format(format!("raw header: {e}")))?;
    if header.format != FORMAT || header.version != 1 {
        return Err(Error::Format(format!(
            "unknown raw format {:?} version {}",
            header.format, header.version
        )));
    }
    if header.dims.contains(&0) || header.channels == 0 {
        return Err(Error::Format("raw header has a zero extent".into()));
    }
    let count = header.dims.iter().product::<usize>() * header.channels;
    let payload = &bytes[nl + 1..];
    if payload.len() != count * header.dtype.size() {
        return Err(Error::Format(format!(
            "raw payload has {} bytes, header implies {}",
            payload.len(),
            count * header.dtype.size()
        )));
    }
    let [sx, sy, sz] = header.spacing;
    Ok(Image {
        dims: header.dims,
        channels: header.channels,
        spacing: Spacing::new(sx, sy, sz)?,
        dtype: header.dtype,
        scaled: false,
        values: header.dtype.decode_le(payload),
    })
}

pub fn encode(img: &Image) -> Result<Vec<u8>> {
    let header = Header {
        format: FORMAT.into(),
        version: 1,
        dims: img.dims,
        channels: img.channels,
        spacing: img.spacing.as_array(),
        dtype: img.dtype,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    img.dtype.append_le(&img.values, &mut out)?;
    Ok(out)
}
