//! LTZ latent files.
//!
//! Layout: the 8-byte magic `LGTMLTZ1`, a little-endian `u32` header length,
//! a JSON header, then the values as little-endian `f32`, channel-major and
//! row-major within each channel.

use std::path::Path;

use lgtm_core::LatentNoise;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LGTMLTZ1";
pub const DTYPE: &str = "f32le";
pub const ORDER: &str = "channel-major row-major";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    pub timestep: u32,
    pub dtype: String,
    pub order: String,
}

pub fn encode(latent: &LatentNoise) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        channels: latent.channels(),
        height: latent.height(),
        width: latent.width(),
        seed: latent.seed(),
        timestep: latent.timestep(),
        dtype: DTYPE.into(),
        order: ORDER.into(),
    })?;
    let header_len =
        u32::try_from(header.len()).map_err(|_| Error::Format("LTZ header too long".into()))?;
    let mut out = Vec::with_capacity(12 + header.len() + 4 * latent.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    for &v in latent.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<LatentNoise> {
    let rest = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| Error::Format("missing LTZ magic".into()))?;
    let (len_bytes, rest) = rest
        .split_first_chunk::<4>()
        .ok_or_else(|| Error::Format("truncated LTZ header length".into()))?;
    let header_len = u32::from_le_bytes(*len_bytes) as usize;
    if rest.len() < header_len {
        return Err(Error::Format("truncated LTZ header".into()));
    }
    let (header, payload) = rest.split_at(header_len);
    let header: Header = serde_json::from_slice(header)?;
    if header.dtype != DTYPE || header.order != ORDER {
        return Err(Error::Format(format!(
            "unsupported LTZ layout dtype={:?} order={:?}",
            header.dtype, header.order
        )));
    }
    if header.channels != lgtm_core::latent::LATENT_CHANNELS {
        return Err(Error::Format(format!("expected 4 channels, found {}", header.channels)));
    }
    let expected = header
        .channels
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(header.width))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("LTZ dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    Ok(LatentNoise::from_values(header.height, header.width, values, header.seed, header.timestep)?)
}

pub fn write(path: &Path, latent: &LatentNoise) -> Result<()> {
    super::write_bytes(path, &encode(latent)?)
}

pub fn read(path: &Path) -> Result<LatentNoise> {
    decode(&super::read_bytes(path)?)
}
