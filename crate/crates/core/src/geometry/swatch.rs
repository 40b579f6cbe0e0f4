//! Procedural strand layouts: a swatch stretched across a flat holder and a
//! curtain of straight long hair for portrait-scale renders.
//!
//! Swatch coordinates: the holder is the `z = 0` plane, strands run along
//! `y` and are spread across `x`, centred on the origin.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Strand, StrandSet};
use crate::error::{Error, Result};
use crate::math::{Vec3, PI};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwatchConfig {
    pub count: usize,
    pub length_mm: f64,
    pub holder_width_mm: f64,
    /// Peak sideways displacement of the wave along each strand, in mm.
    /// Strands also bow away from the holder by half this amount.
    pub waviness_mm: f64,
    pub radius_root_mm: f64,
    pub radius_tip_mm: f64,
    pub points_per_strand: usize,
    pub seed: u64,
}

impl Default for SwatchConfig {
    fn default() -> Self {
        SwatchConfig {
            count: 1500,
            length_mm: 60.0,
            holder_width_mm: 50.0,
            waviness_mm: 0.2,
            radius_root_mm: 0.05,
            radius_tip_mm: 0.04,
            points_per_strand: 25,
            seed: 0,
        }
    }
}

impl SwatchConfig {
    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("swatch needs at least one strand".into()));
        }
        for (name, v) in [
            ("length_mm", self.length_mm),
            ("holder_width_mm", self.holder_width_mm),
            ("radius_root_mm", self.radius_root_mm),
            ("radius_tip_mm", self.radius_tip_mm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.waviness_mm >= 0.0) {
            return Err(Error::Config("waviness_mm must be non-negative".into()));
        }
        if self.points_per_strand < 4 {
            return Err(Error::Config("points_per_strand must be at least 4".into()));
        }
        Ok(())
    }

    /// Spacing between neighbouring strand roots.
    pub fn spacing(&self) -> f64 {
        self.holder_width_mm / self.count as f64
    }

    /// Largest sideways root displacement from the regular grid.
    pub fn jitter_mm(&self) -> f64 {
        0.5 * self.spacing()
    }

    /// Highest point any strand axis reaches above the holder.
    pub fn max_height_mm(&self) -> f64 {
        7.0 * self.radius_root_mm + 0.5 * self.waviness_mm
    }
}

pub fn generate_swatch(config: &SwatchConfig) -> Result<StrandSet> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let half_len = 0.5 * config.length_mm;
    let n = config.points_per_strand;
    let mut strands = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let x0 = -0.5 * config.holder_width_mm + config.spacing() * (i as f64 + 0.5)
            + config.jitter_mm() * rng.gen_range(-1.0..=1.0);
        // Stack in a few layers above the holder surface.
        let z0 = config.radius_root_mm * (1.0 + 6.0 * rng.gen::<f64>());
        let amplitude = config.waviness_mm * rng.gen_range(0.5..=1.0);
        let wavelength = rng.gen_range(8.0..=15.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let sag = 0.5 * config.waviness_mm * rng.gen::<f64>();
        let points = (0..n)
            .map(|k| {
                let y = -half_len + config.length_mm * k as f64 / (n - 1) as f64;
                let s = y / half_len;
                let x = x0 + amplitude * (2.0 * PI * y / wavelength + phase).sin();
                let z = z0 + sag * (1.0 - s * s);
                Vec3::new(x, y, z)
            })
            .collect();
        strands.push(Strand::new(points, config.radius_root_mm, config.radius_tip_mm)?);
    }
    StrandSet::new(strands)
}

/// Straight long hair falling from an arc, facing `+x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraightHairConfig {
    pub count: usize,
    pub length_mm: f64,
    pub arc_radius_mm: f64,
    /// Half-angle of the arc of roots around `+x`, in radians.
    pub arc_half_angle: f64,
    pub top_z_mm: f64,
    pub radius_root_mm: f64,
    pub radius_tip_mm: f64,
    pub points_per_strand: usize,
    pub seed: u64,
}

impl Default for StraightHairConfig {
    fn default() -> Self {
        StraightHairConfig {
            count: 3000,
            length_mm: 250.0,
            arc_radius_mm: 60.0,
            arc_half_angle: 80f64.to_radians(),
            top_z_mm: 100.0,
            radius_root_mm: 0.05,
            radius_tip_mm: 0.04,
            points_per_strand: 12,
            seed: 0,
        }
    }
}

pub fn generate_straight_hair(config: &StraightHairConfig) -> Result<StrandSet> {
    if config.count == 0 || config.points_per_strand < 4 {
        return Err(Error::Config("straight hair needs strands with at least 4 points".into()));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut strands = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let frac = (i as f64 + rng.gen::<f64>()) / config.count as f64;
        let angle = -config.arc_half_angle + 2.0 * config.arc_half_angle * frac;
        let radius = config.arc_radius_mm + rng.gen_range(0.0..3.0);
        let (sin, cos) = angle.sin_cos();
        let root = Vec3::new(radius * cos, radius * sin, config.top_z_mm);
        // Hair spreads slightly outward as it falls.
        let flare = rng.gen_range(0.02..0.08);
        let n = config.points_per_strand;
        let points = (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64;
                let drop = config.length_mm * s;
                let out = flare * drop * s;
                Vec3::new(root.x + out * cos, root.y + out * sin, root.z - drop)
            })
            .collect();
        strands.push(Strand::new(points, config.radius_root_mm, config.radius_tip_mm)?);
    }
    StrandSet::new(strands)
}
