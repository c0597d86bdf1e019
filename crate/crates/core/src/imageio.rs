//! 8-bit PNG export for visual inspection.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

/// `round(255·x)` with `x` clamped to `[0, 1]`; NaN maps to 0.
pub fn to_u8(x: f32) -> u8 {
    if x.is_nan() {
        return 0;
    }
    (255.0 * x.clamp(0.0, 1.0)).round() as u8
}

fn write_png(path: &Path, w: usize, h: usize, color: png::ColorType, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(bytes)?;
    writer.finish()?;
    Ok(())
}

/// Single-channel `[h, w]` image in `[0, 1]`.
pub fn save_gray(path: &Path, data: &[f32], h: usize, w: usize) -> Result<()> {
    if data.len() != h * w {
        return Err(Error::Shape(format!("gray image needs {} values", h * w)));
    }
    let bytes: Vec<u8> = data.iter().map(|&v| to_u8(v)).collect();
    write_png(path, w, h, png::ColorType::Grayscale, &bytes)
}

/// Already-quantized single-channel `[h, w]` image.
pub fn save_gray_u8(path: &Path, data: &[u8], h: usize, w: usize) -> Result<()> {
    if data.len() != h * w {
        return Err(Error::Shape(format!("gray image needs {} values", h * w)));
    }
    write_png(path, w, h, png::ColorType::Grayscale, data)
}

/// Channel-stacked `[3, h, w]` image written as interleaved RGB.
pub fn save_rgb(path: &Path, data: &[f32], h: usize, w: usize) -> Result<()> {
    let hw = h * w;
    if data.len() != 3 * hw {
        return Err(Error::Shape(format!("rgb image needs {} values", 3 * hw)));
    }
    let mut bytes = Vec::with_capacity(3 * hw);
    for p in 0..hw {
        for c in 0..3 {
            bytes.push(to_u8(data[c * hw + p]));
        }
    }
    write_png(path, w, h, png::ColorType::Rgb, &bytes)
}
