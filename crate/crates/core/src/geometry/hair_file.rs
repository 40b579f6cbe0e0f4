//! Binary hair-model files in the widely used `HAIR` layout: a 128-byte
//! little-endian header followed by optional per-strand segment counts and
//! per-point positions, thickness, transparency and color arrays.

use std::path::Path;

use super::{Strand, StrandSet};
use crate::error::{Error, Result};
use crate::math::Vec3;

pub const MAGIC: &[u8; 4] = b"HAIR";
pub const HEADER_SIZE: usize = 128;
const INFO_SIZE: usize = 88;

pub const FLAG_SEGMENTS: u32 = 1 << 0;
pub const FLAG_POINTS: u32 = 1 << 1;
pub const FLAG_THICKNESS: u32 = 1 << 2;
pub const FLAG_TRANSPARENCY: u32 = 1 << 3;
pub const FLAG_COLOR: u32 = 1 << 4;
const KNOWN_FLAGS: u32 = 0x1f;

/// Decoded file contents. Optional arrays are empty when the header flag is
/// clear; the matching default applies to every strand or point.
#[derive(Debug, Clone, PartialEq)]
pub struct HairModelFile {
    pub strand_count: u32,
    pub point_count: u32,
    pub flags: u32,
    pub default_segments: u32,
    pub default_thickness: f32,
    pub default_transparency: f32,
    pub default_color: [f32; 3],
    pub info: String,
    pub segments: Vec<u16>,
    pub points: Vec<[f32; 3]>,
    pub thickness: Vec<f32>,
    pub transparency: Vec<f32>,
    pub color: Vec<[f32; 3]>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.bytes.len(),
                message: format!("file truncated while reading {what}: need {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| overflow(what))?, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn vec3s(&mut self, n: usize, what: &str) -> Result<Vec<[f32; 3]>> {
        let flat = self.f32s(n.checked_mul(3).ok_or_else(|| overflow(what))?, what)?;
        Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }
}

fn overflow(what: &str) -> Error {
    Error::Format {
        offset: 0,
        message: format!("{what} count overflows"),
    }
}

impl HairModelFile {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic, expected HAIR".into(),
            });
        }
        let strand_count = r.u32("strand count")?;
        let point_count = r.u32("point count")?;
        let flags = r.u32("flags")?;
        if flags & !KNOWN_FLAGS != 0 {
            log::warn!("hair file has unknown flag bits {:#x}; ignoring them", flags & !KNOWN_FLAGS);
        }
        let default_segments = r.u32("default segments")?;
        let default_thickness = r.f32("default thickness")?;
        let default_transparency = r.f32("default transparency")?;
        let default_color = [r.f32("default color")?, r.f32("default color")?, r.f32("default color")?];
        let info_raw = r.take(INFO_SIZE, "info")?;
        let info_end = info_raw.iter().position(|&b| b == 0).unwrap_or(INFO_SIZE);
        let info = String::from_utf8_lossy(&info_raw[..info_end]).into_owned();

        if flags & FLAG_POINTS == 0 {
            return Err(Error::Format {
                offset: 12,
                message: "file has no point array".into(),
            });
        }

        let segments = if flags & FLAG_SEGMENTS != 0 {
            let raw = r.take((strand_count as usize) * 2, "segment counts")?;
            raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
        } else {
            Vec::new()
        };
        let expected_points: u64 = if segments.is_empty() {
            strand_count as u64 * (default_segments as u64 + 1)
        } else {
            segments.iter().map(|&s| s as u64 + 1).sum()
        };
        if expected_points != point_count as u64 {
            return Err(Error::Format {
                offset: 8,
                message: format!(
                    "point count {point_count} does not match the {expected_points} implied by segment counts"
                ),
            });
        }
        let n = point_count as usize;
        let points = r.vec3s(n, "points")?;
        let thickness = if flags & FLAG_THICKNESS != 0 { r.f32s(n, "thickness")? } else { Vec::new() };
        let transparency = if flags & FLAG_TRANSPARENCY != 0 {
            r.f32s(n, "transparency")?
        } else {
            Vec::new()
        };
        let color = if flags & FLAG_COLOR != 0 { r.vec3s(n, "color")? } else { Vec::new() };
        if r.pos != bytes.len() {
            log::warn!("hair file has {} trailing bytes", bytes.len() - r.pos);
        }
        Ok(HairModelFile {
            strand_count,
            point_count,
            flags,
            default_segments,
            default_thickness,
            default_transparency,
            default_color,
            info,
            segments,
            points,
            thickness,
            transparency,
            color,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_SIZE + self.points.len() * 12);
        out.extend_from_slice(MAGIC);
        for v in [self.strand_count, self.point_count, self.flags, self.default_segments] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.default_thickness, self.default_transparency] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.default_color {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut info = [0u8; INFO_SIZE];
        let src = self.info.as_bytes();
        let n = src.len().min(INFO_SIZE - 1);
        info[..n].copy_from_slice(&src[..n]);
        out.extend_from_slice(&info);
        for s in &self.segments {
            out.extend_from_slice(&s.to_le_bytes());
        }
        for p in &self.points {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in self.thickness.iter().chain(&self.transparency) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for c in &self.color {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Builds a file from strands, storing per-point thickness as diameter.
    pub fn from_strands(strands: &[Strand], info: &str) -> Self {
        let mut segments = Vec::with_capacity(strands.len());
        let mut points = Vec::new();
        let mut thickness = Vec::new();
        for s in strands {
            let n = s.control_points().len();
            segments.push((n - 1) as u16);
            for (i, p) in s.control_points().iter().enumerate() {
                points.push([p.x as f32, p.y as f32, p.z as f32]);
                let f = i as f64 / (n - 1) as f64;
                let r = s.radius_root() + (s.radius_tip() - s.radius_root()) * f;
                thickness.push((2.0 * r) as f32);
            }
        }
        HairModelFile {
            strand_count: strands.len() as u32,
            point_count: points.len() as u32,
            flags: FLAG_SEGMENTS | FLAG_POINTS | FLAG_THICKNESS,
            default_segments: 0,
            default_thickness: 0.1,
            default_transparency: 0.0,
            default_color: [0.0; 3],
            info: info.to_string(),
            segments,
            points,
            thickness,
            transparency: Vec::new(),
            color: Vec::new(),
        }
    }

    fn strand_segments(&self, i: usize) -> usize {
        if self.segments.is_empty() {
            self.default_segments as usize
        } else {
            self.segments[i] as usize
        }
    }

    /// Converts to renderable strands. Thickness is read as a diameter; the
    /// root uses the first point and the tip the thinnest point. Strands with
    /// fewer than two points are dropped, short ones padded with midpoints.
    pub fn to_strands(&self) -> Result<Vec<Strand>> {
        let mut strands = Vec::with_capacity(self.strand_count as usize);
        let mut start = 0usize;
        let mut dropped = 0usize;
        for i in 0..self.strand_count as usize {
            let n = self.strand_segments(i) + 1;
            let range = start..start + n;
            start += n;
            if n < 2 {
                dropped += 1;
                continue;
            }
            let mut pts: Vec<Vec3> = self.points[range.clone()]
                .iter()
                .map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
                .collect();
            pad_to_four(&mut pts);
            let thick: Vec<f64> = if self.thickness.is_empty() {
                vec![self.default_thickness as f64; n]
            } else {
                self.thickness[range].iter().map(|&t| t as f64).collect()
            };
            let root = 0.5 * thick[0];
            let tip = 0.5 * thick.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(tip > 0.0 && root.is_finite()) {
                return Err(Error::Format {
                    offset: 0,
                    message: format!("strand {i} has non-positive thickness"),
                });
            }
            strands.push(Strand::new(pts, root, tip)?);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} strands with fewer than two points");
        }
        Ok(strands)
    }
}

/// Inserts midpoints into the longest spans until there are four points.
fn pad_to_four(pts: &mut Vec<Vec3>) {
    while pts.len() < 4 {
        let (k, _) = pts
            .windows(2)
            .enumerate()
            .map(|(k, w)| (k, (w[1] - w[0]).length()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let mid = pts[k].lerp(pts[k + 1], 0.5);
        pts.insert(k + 1, mid);
    }
}

pub fn load_hair_model(path: &Path) -> Result<StrandSet> {
    if !path.exists() {
        return Err(Error::Config(format!("hair model file {} does not exist", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let file = HairModelFile::parse(&bytes)?;
    let strands = file.to_strands()?;
    if strands.is_empty() {
        return Err(Error::Format {
            offset: 0,
            message: format!("{} contains no usable strands", path.display()),
        });
    }
    StrandSet::new(strands)
}
