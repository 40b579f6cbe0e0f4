//! Linear HDR images, tonemapping to 8-bit sRGB, and PFM/PNG files.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::math::Rgb;

/// Row-major linear RGB radiance, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl HdrImage {
    pub fn new(width: u32, height: u32) -> Self {
        HdrImage {
            width,
            height,
            data: vec![0.0; width as usize * height as usize * 3],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::Dimension(format!(
                "{} floats for a {width}x{height} RGB image",
                data.len()
            )));
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("HDR pixels must be finite and non-negative".into()));
        }
        Ok(HdrImage { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        Rgb::new(self.data[i] as f64, self.data[i + 1] as f64, self.data[i + 2] as f64)
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        for k in 0..3 {
            self.data[i + k] = c[k] as f32;
        }
    }

    pub fn mean(&self) -> Rgb {
        let n = (self.width as usize * self.height as usize).max(1) as f64;
        let mut sum = [0.0f64; 3];
        for px in self.data.chunks_exact(3) {
            for k in 0..3 {
                sum[k] += px[k] as f64;
            }
        }
        Rgb(sum) / n
    }

    pub fn mean_luminance(&self) -> f64 {
        self.mean().luminance()
    }

    /// Portable float map, little-endian, bottom row first.
    pub fn write_pfm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(32 + self.data.len() * 4);
        write!(out, "PF\n{} {}\n-1.0\n", self.width, self.height).unwrap();
        let row = self.width as usize * 3;
        for y in (0..self.height as usize).rev() {
            for v in &self.data[y * row..(y + 1) * row] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_pfm(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let bad = |m: &str| Error::Image {
            path: path.to_path_buf(),
            message: m.to_string(),
        };
        let mut line = String::new();
        let mut header = Vec::new();
        while header.len() < 4 {
            line.clear();
            if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
                return Err(bad("truncated header"));
            }
            header.extend(line.split_whitespace().map(str::to_string));
        }
        if header[0] != "PF" {
            return Err(bad("not a color PFM"));
        }
        let w: u32 = header[1].parse().map_err(|_| bad("bad width"))?;
        let h: u32 = header[2].parse().map_err(|_| bad("bad height"))?;
        let scale: f64 = header[3].parse().map_err(|_| bad("bad scale"))?;
        let mut raw = Vec::new();
        r.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
        let row = w as usize * 3;
        if raw.len() != row * h as usize * 4 {
            return Err(bad("pixel data has the wrong length"));
        }
        let mut data = vec![0.0f32; row * h as usize];
        for (i, c) in raw.chunks_exact(4).enumerate() {
            let b: [u8; 4] = c.try_into().unwrap();
            let v = if scale < 0.0 { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            let (y, x) = (i / row, i % row);
            data[(h as usize - 1 - y) * row + x] = v;
        }
        HdrImage::from_raw(w, h, data)
    }
}

/// sRGB opto-electronic transfer function on `[0, 1]`.
pub fn srgb_encode(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_decode(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Scales by `exposure`, clamps to `[0, 1]`, applies the sRGB curve and
/// rounds to 8 bits.
pub fn tonemap(img: &HdrImage, exposure: f64) -> RgbImage {
    assert!(exposure > 0.0, "exposure must be positive");
    let bytes = img
        .data
        .iter()
        .map(|&v| {
            let c = (v as f64 * exposure).clamp(0.0, 1.0);
            (srgb_encode(c) * 255.0).round() as u8
        })
        .collect();
    RgbImage::from_raw(img.width, img.height, bytes).expect("buffer size matches")
}

pub fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(img.to_rgb8())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_stays_black_and_white_saturates() {
        let img = HdrImage::new(2, 2);
        assert!(tonemap(&img, 1.0).as_raw().iter().all(|&v| v == 0));
        let white = HdrImage::from_raw(1, 1, vec![1.0; 3]).unwrap();
        assert_eq!(tonemap(&white, 1.0).as_raw(), &[255, 255, 255]);
    }

    #[test]
    fn mid_gray_encodes_by_transfer_curve() {
        // 1.055 * 0.18^(1/2.4) - 0.055 = 0.46136, times 255 = 117.65.
        let gray = HdrImage::from_raw(1, 1, vec![0.18; 3]).unwrap();
        assert_eq!(tonemap(&gray, 1.0).as_raw(), &[118, 118, 118]);
    }

    #[test]
    fn transfer_curve_inverts() {
        for i in 0..=100 {
            let c = i as f64 / 100.0;
            assert!((srgb_decode(srgb_encode(c)) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn pfm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pfm");
        let data: Vec<f32> = (0..3 * 4 * 3).map(|i| i as f32 * 0.25).collect();
        let img = HdrImage::from_raw(4, 3, data).unwrap();
        img.write_pfm(&path).unwrap();
        assert_eq!(HdrImage::read_pfm(&path).unwrap(), img);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(HdrImage::from_raw(2, 2, vec![0.0; 3]).is_err());
        assert!(HdrImage::from_raw(1, 1, vec![0.0, f32::NAN, 0.0]).is_err());
    }
}
