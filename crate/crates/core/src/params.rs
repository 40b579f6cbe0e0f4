//! The six-dimensional hair color parameter space and its mapping to fiber
//! absorption.
//!
//! A hair color is described by a dye color, a dye concentration, and the
//! concentration and eumelanin fraction of natural melanin. Each field has a
//! closed range; [`NormalizedParams`] rescales all of them onto `[0, 1]` so
//! that squared residuals in the training loss are commensurate.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Rgb;

/// Eumelanin absorption per unit concentration (inverse fiber radii).
pub const EUMELANIN_SIGMA_A: [f64; 3] = [0.419, 0.697, 1.37];
/// Pheomelanin absorption per unit concentration.
pub const PHEOMELANIN_SIGMA_A: [f64; 3] = [0.187, 0.4, 1.05];
/// Melanin density reached at `melanin_concentration = 1`.
pub const MELANIN_DENSITY_MAX: f64 = 8.0;
/// Smallest dye albedo fed to the logarithm; a zero channel is clamped here.
pub const MIN_DYE_ALBEDO: f64 = 1e-4;

pub const PARAM_COUNT: usize = 6;

/// Field names in canonical order, as used by the key-value record format.
pub const FIELD_NAMES: [&str; PARAM_COUNT] = [
    "dye_r",
    "dye_g",
    "dye_b",
    "dye_concentration",
    "melanin_concentration",
    "melanin_ratio",
];

/// Closed range of each field, in canonical order.
pub const FIELD_RANGES: [(f64, f64); PARAM_COUNT] = [
    (0.0, 255.0),
    (0.0, 255.0),
    (0.0, 255.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
];

/// Hair color parameters. Construction validates every range; out-of-range
/// values are rejected rather than clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHairParams", into = "RawHairParams")]
pub struct HairParams {
    dye_r: f64,
    dye_g: f64,
    dye_b: f64,
    dye_concentration: f64,
    melanin_concentration: f64,
    melanin_ratio: f64,
}

#[derive(Serialize, Deserialize)]
struct RawHairParams {
    dye_r: f64,
    dye_g: f64,
    dye_b: f64,
    dye_concentration: f64,
    melanin_concentration: f64,
    melanin_ratio: f64,
}

impl TryFrom<RawHairParams> for HairParams {
    type Error = Error;
    fn try_from(r: RawHairParams) -> Result<Self> {
        HairParams::new(
            [r.dye_r, r.dye_g, r.dye_b],
            r.dye_concentration,
            r.melanin_concentration,
            r.melanin_ratio,
        )
    }
}

impl From<HairParams> for RawHairParams {
    fn from(h: HairParams) -> Self {
        RawHairParams {
            dye_r: h.dye_r,
            dye_g: h.dye_g,
            dye_b: h.dye_b,
            dye_concentration: h.dye_concentration,
            melanin_concentration: h.melanin_concentration,
            melanin_ratio: h.melanin_ratio,
        }
    }
}

fn check(index: usize, value: f64) -> Result<f64> {
    let (min, max) = FIELD_RANGES[index];
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Range {
            field: FIELD_NAMES[index],
            value,
            min,
            max,
        })
    }
}

impl HairParams {
    pub fn new(
        dye_rgb: [f64; 3],
        dye_concentration: f64,
        melanin_concentration: f64,
        melanin_ratio: f64,
    ) -> Result<Self> {
        Self::from_array([
            dye_rgb[0],
            dye_rgb[1],
            dye_rgb[2],
            dye_concentration,
            melanin_concentration,
            melanin_ratio,
        ])
    }

    /// Melanin-only hair with white (non-absorbing) dye.
    pub fn natural(melanin_concentration: f64, melanin_ratio: f64) -> Result<Self> {
        Self::new([255.0; 3], 0.0, melanin_concentration, melanin_ratio)
    }

    pub fn from_array(v: [f64; PARAM_COUNT]) -> Result<Self> {
        for (i, &x) in v.iter().enumerate() {
            check(i, x)?;
        }
        Ok(HairParams {
            dye_r: v[0],
            dye_g: v[1],
            dye_b: v[2],
            dye_concentration: v[3],
            melanin_concentration: v[4],
            melanin_ratio: v[5],
        })
    }

    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [
            self.dye_r,
            self.dye_g,
            self.dye_b,
            self.dye_concentration,
            self.melanin_concentration,
            self.melanin_ratio,
        ]
    }

    pub fn dye_rgb(&self) -> [f64; 3] {
        [self.dye_r, self.dye_g, self.dye_b]
    }

    pub fn dye_concentration(&self) -> f64 {
        self.dye_concentration
    }

    pub fn melanin_concentration(&self) -> f64 {
        self.melanin_concentration
    }

    pub fn melanin_ratio(&self) -> f64 {
        self.melanin_ratio
    }

    /// Returns a copy with one field replaced, re-validated.
    pub fn with_field(&self, index: usize, value: f64) -> Result<Self> {
        let mut v = self.to_array();
        v[index] = value;
        Self::from_array(v)
    }

    /// Draws every field independently and uniformly over its range.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut v = [0.0; PARAM_COUNT];
        for (x, &(lo, hi)) in v.iter_mut().zip(FIELD_RANGES.iter()) {
            *x = lo + (hi - lo) * rng.gen::<f64>();
        }
        Self::from_array(v).expect("uniform draw stays in range")
    }

    pub fn normalize(&self) -> NormalizedParams {
        let v = self.to_array();
        let mut out = [0.0; PARAM_COUNT];
        for i in 0..PARAM_COUNT {
            let (lo, hi) = FIELD_RANGES[i];
            out[i] = (v[i] - lo) / (hi - lo);
        }
        NormalizedParams(out)
    }

    pub fn denormalize(v: &NormalizedParams) -> Result<Self> {
        let mut out = [0.0; PARAM_COUNT];
        for i in 0..PARAM_COUNT {
            let x = v.0[i];
            if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
                return Err(Error::Range {
                    field: FIELD_NAMES[i],
                    value: x,
                    min: 0.0,
                    max: 1.0,
                });
            }
            let (lo, hi) = FIELD_RANGES[i];
            // Pin the endpoints so the upper bound maps back exactly.
            out[i] = if x == 1.0 { hi } else { lo + (hi - lo) * x };
        }
        Self::from_array(out)
    }

    /// Parses the flat `key=value` record format. Blank lines and lines
    /// starting with `#` are skipped; commas also separate entries so the
    /// same syntax works inline on a command line.
    pub fn parse_record(text: &str) -> Result<Self> {
        let mut values: [Option<f64>; PARAM_COUNT] = [None; PARAM_COUNT];
        for entry in text.split(['\n', ',']) {
            let entry = entry.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{entry}`")))?;
            let key = key.trim();
            let index = FIELD_NAMES
                .iter()
                .position(|&n| n == key)
                .ok_or_else(|| Error::Parse(format!("unknown field `{key}`")))?;
            if values[index].is_some() {
                return Err(Error::Parse(format!("duplicate field `{key}`")));
            }
            let parsed = value
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("field `{key}`: {e}")))?;
            values[index] = Some(parsed);
        }
        let mut v = [0.0; PARAM_COUNT];
        for (i, slot) in values.iter().enumerate() {
            v[i] = slot.ok_or_else(|| Error::Parse(format!("missing field `{}`", FIELD_NAMES[i])))?;
        }
        Self::from_array(v)
    }

    /// Serializes to the `key=value` record format, one field per line.
    /// Values are printed with round-trip precision.
    pub fn to_record(&self) -> String {
        FIELD_NAMES
            .iter()
            .zip(self.to_array())
            .map(|(k, v)| format!("{k}={v:?}\n"))
            .collect()
    }
}

impl fmt::Display for HairParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

impl FromStr for HairParams {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_record(s)
    }
}

/// Hair parameters linearly rescaled onto `[0, 1]^6`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizedParams(pub [f64; PARAM_COUNT]);

impl NormalizedParams {
    pub fn new(v: [f64; PARAM_COUNT]) -> Result<Self> {
        for (i, &x) in v.iter().enumerate() {
            if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
                return Err(Error::Range {
                    field: FIELD_NAMES[i],
                    value: x,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        Ok(NormalizedParams(v))
    }

    pub fn as_array(&self) -> &[f64; PARAM_COUNT] {
        &self.0
    }
}

/// Per-channel absorption coefficient of the fiber interior, in inverse
/// fiber radii.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralAbsorption(pub [f64; 3]);

impl SpectralAbsorption {
    pub const ZERO: SpectralAbsorption = SpectralAbsorption([0.0; 3]);

    pub fn new(sigma_a: [f64; 3]) -> Result<Self> {
        for &s in &sigma_a {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Range {
                    field: "sigma_a",
                    value: s,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(SpectralAbsorption(sigma_a))
    }

    pub fn as_rgb(&self) -> Rgb {
        Rgb(self.0)
    }
}

impl std::ops::Add for SpectralAbsorption {
    type Output = SpectralAbsorption;
    fn add(self, o: Self) -> Self {
        SpectralAbsorption([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

pub fn melanin_to_absorption(concentration: f64, ratio: f64) -> SpectralAbsorption {
    let density = concentration * MELANIN_DENSITY_MAX;
    let mut s = [0.0; 3];
    for c in 0..3 {
        s[c] = density * ratio * EUMELANIN_SIGMA_A[c]
            + density * (1.0 - ratio) * PHEOMELANIN_SIGMA_A[c];
    }
    SpectralAbsorption(s)
}

/// Roughness-dependent divisor that inverts a target multiple-scattering
/// albedo into an absorption coefficient.
pub fn albedo_inversion_poly(beta_n: f64) -> f64 {
    let b = beta_n;
    5.969 - 0.215 * b + 2.532 * b.powi(2) - 10.73 * b.powi(3) + 5.574 * b.powi(4)
        + 0.245 * b.powi(5)
}

/// Interprets the dye color as a target albedo and scales the matching
/// absorption by `concentration`. A zero channel is clamped to
/// [`MIN_DYE_ALBEDO`] before the logarithm.
pub fn dye_to_absorption(dye_rgb: [f64; 3], concentration: f64, beta_n: f64) -> SpectralAbsorption {
    let denom = albedo_inversion_poly(beta_n);
    let mut s = [0.0; 3];
    for c in 0..3 {
        let albedo = (dye_rgb[c] / 255.0).clamp(MIN_DYE_ALBEDO, 1.0);
        let k = albedo.ln() / denom;
        s[c] = concentration * k * k;
    }
    SpectralAbsorption(s)
}

/// Melanin and dye absorption, summed per channel.
pub fn total_absorption(h: &HairParams, beta_n: f64) -> SpectralAbsorption {
    melanin_to_absorption(h.melanin_concentration, h.melanin_ratio)
        + dye_to_absorption(h.dye_rgb(), h.dye_concentration, beta_n)
}
