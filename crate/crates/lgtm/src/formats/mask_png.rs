//! Light masks as 16-bit grayscale PNG. A value `m` is stored as
//! `round(m * 65535)` and read back as `stored / 65535`.

use std::io::Cursor;
use std::path::Path;

use lgtm_core::LightMask;

use crate::{Error, Result};

const SCALE: f64 = 65535.0;

pub fn encode(mask: &LightMask) -> Result<Vec<u8>> {
    let mut data = Vec::with_capacity(2 * mask.values().len());
    for &v in mask.values() {
        let level = (v * SCALE).round().clamp(0.0, SCALE) as u16;
        data.extend_from_slice(&level.to_be_bytes());
    }
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, dim(mask.width())?, dim(mask.height())?);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Sixteen);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&data)?;
        writer.finish()?;
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<LightMask> {
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info()?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Sixteen {
        return Err(Error::Format(format!(
            "mask PNG must be 16-bit grayscale, found {color:?} at {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("mask PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let values = buf[..info.buffer_size()]
        .chunks_exact(2)
        .map(|b| f64::from(u16::from_be_bytes([b[0], b[1]])) / SCALE)
        .collect();
    Ok(LightMask::from_values(w, h, values)?)
}

pub fn write(path: &Path, mask: &LightMask) -> Result<()> {
    super::write_bytes(path, &encode(mask)?)
}

pub fn read(path: &Path) -> Result<LightMask> {
    decode(&super::read_bytes(path)?)
}

fn dim(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} exceeds PNG limits")))
}
