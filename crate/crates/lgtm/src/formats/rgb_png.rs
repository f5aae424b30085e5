//! 8-bit RGB PNG encoding for generated images, and tolerant decoding of
//! gray, gray-alpha, RGB and RGBA PNGs for evaluation datasets.

use std::io::Cursor;
use std::path::Path;

use lgtm_core::RgbImage;

use crate::{Error, Result};

pub fn encode(image: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let (w, h) = (image.width() as u32, image.height() as u32);
        let mut encoder = png::Encoder::new(&mut out, w, h);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(image.pixels())?;
        writer.finish()?;
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<RgbImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    let data = &buf[..info.buffer_size()];
    let pixels: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => data.to_vec(),
        png::ColorType::Rgba => data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => data.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => data.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        other => return Err(Error::Format(format!("unsupported PNG color type {other:?}"))),
    };
    Ok(RgbImage::new(info.width as usize, info.height as usize, pixels)?)
}

pub fn write(path: &Path, image: &RgbImage) -> Result<()> {
    super::write_bytes(path, &encode(image)?)
}

pub fn read(path: &Path) -> Result<RgbImage> {
    decode(&super::read_bytes(path)?)
}
