//! Pixel containers and image IO.

use std::io::{Read, Write};
use std::path::Path;

use image::imageops::FilterType;
use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};

/// Real-valued image in the [0,1] luminance scale, channel-interleaved,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 (grey) or 3 (RGB).
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Decode an image file, keeping greyscale sources single-channel and
    /// dropping any alpha.
    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (width, height) = (img.width() as usize, img.height() as usize);
        if img.color().channel_count() <= 2 {
            let buf = img.to_luma32f();
            Self {
                width,
                height,
                channels: 1,
                data: buf.into_raw().into_iter().map(f64::from).collect(),
            }
        } else {
            let buf = img.to_rgb32f();
            Self {
                width,
                height,
                channels: 3,
                data: buf.into_raw().into_iter().map(f64::from).collect(),
            }
        }
    }

    /// Scale the shorter side to `size` (bilinear), then center-crop to a
    /// `size`×`size` square.
    pub fn resize_and_crop(&self, size: usize) -> Self {
        let (w, h) = (self.width as f64, self.height as f64);
        let scale = size as f64 / w.min(h);
        let new_w = ((w * scale).round() as u32).max(size as u32);
        let new_h = ((h * scale).round() as u32).max(size as u32);
        let data: Vec<f32> = self.data.iter().map(|&v| v as f32).collect();
        let resized: Vec<f32> = if self.channels == 1 {
            let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
                ImageBuffer::from_raw(self.width as u32, self.height as u32, data).unwrap();
            image::imageops::resize(&buf, new_w, new_h, FilterType::Triangle).into_raw()
        } else {
            let buf: ImageBuffer<Rgb<f32>, Vec<f32>> =
                ImageBuffer::from_raw(self.width as u32, self.height as u32, data).unwrap();
            image::imageops::resize(&buf, new_w, new_h, FilterType::Triangle).into_raw()
        };
        let (new_w, new_h) = (new_w as usize, new_h as usize);
        let x0 = (new_w - size) / 2;
        let y0 = (new_h - size) / 2;
        let c = self.channels;
        let mut out = Vec::with_capacity(size * size * c);
        for y in y0..y0 + size {
            let start = (y * new_w + x0) * c;
            out.extend(resized[start..start + size * c].iter().map(|&v| f64::from(v).clamp(0.0, 1.0)));
        }
        Self {
            width: size,
            height: size,
            channels: c,
            data: out,
        }
    }

    /// Round to 8-bit per channel.
    pub fn quantize(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.quantize();
        let (w, h) = (self.width as u32, self.height as u32);
        let res = if self.channels == 1 {
            GrayImage::from_raw(w, h, bytes).unwrap().save(path)
        } else {
            RgbImage::from_raw(w, h, bytes).unwrap().save(path)
        };
        res.map_err(|e| Error::Image {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Magic bytes of the raw grid debug format.
pub const RAW_GRID_MAGIC: &[u8; 4] = b"VFAG";
/// dtype code for little-endian IEEE-754 binary32.
pub const RAW_GRID_DTYPE_F32: u32 = 1;

/// Write a real grid as `VFAG | width u32 | height u32 | dtype u32 | f32 LE × w·h`.
pub fn write_raw_grid<W: Write>(mut w: W, width: usize, height: usize, values: &[f64]) -> std::io::Result<()> {
    assert_eq!(values.len(), width * height);
    w.write_all(RAW_GRID_MAGIC)?;
    w.write_all(&(width as u32).to_le_bytes())?;
    w.write_all(&(height as u32).to_le_bytes())?;
    w.write_all(&RAW_GRID_DTYPE_F32.to_le_bytes())?;
    for v in values {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_raw_grid<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f32>)> {
    let io = |e| Error::io("reading raw grid", e);
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(io)?;
    if &header[..4] != RAW_GRID_MAGIC {
        return Err(Error::Data("raw grid: bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let (width, height, dtype) = (word(4) as usize, word(8) as usize, word(12));
    if dtype != RAW_GRID_DTYPE_F32 {
        return Err(Error::Data(format!("raw grid: unsupported dtype {dtype}")));
    }
    let mut body = vec![0u8; width * height * 4];
    r.read_exact(&mut body).map_err(io)?;
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((width, height, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_grid_roundtrip() {
        let values: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.0).collect();
        let mut buf = Vec::new();
        write_raw_grid(&mut buf, 4, 3, &values).unwrap();
        assert_eq!(buf.len(), 16 + 48);
        let (w, h, back) = read_raw_grid(buf.as_slice()).unwrap();
        assert_eq!((w, h), (4, 3));
        assert_eq!(back, values.iter().map(|&v| v as f32).collect::<Vec<_>>());
    }

    #[test]
    fn resize_crops_to_square() {
        let img = Image::constant(40, 20, 3, 0.25);
        let out = img.resize_and_crop(16);
        assert_eq!((out.width, out.height, out.channels), (16, 16, 3));
        assert!(out.data.iter().all(|v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn quantize_rounds() {
        let img = Image::new(2, 1, 1, vec![0.5, 1.2]).unwrap();
        assert_eq!(img.quantize(), vec![128, 255]);
    }
}
