//! Image reconstruction metrics and the round-trip protocol: estimate
//! parameters from each test image, re-render them under the image's own
//! scene, and compare the two renders.

use std::sync::Arc;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{render_item, DatasetManifest, DatasetRecord};
use crate::encoder::{digitize, EncoderModel, InputImage};
use crate::error::{Error, Result};
use crate::params::HairParams;
use crate::rng::{derive_seed, substream};

/// Standard five-scale weights, finest scale first.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn check_same_size(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::Dimension(format!(
            "images differ in size: {:?} vs {:?}",
            a.dimensions(),
            b.dimensions()
        )));
    }
    Ok(())
}

/// Mean absolute channel difference on the 0-255 scale.
pub fn l1(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_same_size(a, b)?;
    let n = a.as_raw().len();
    if n == 0 {
        return Err(Error::Dimension("empty image".into()));
    }
    let sum: u64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| x.abs_diff(y) as u64)
        .sum();
    Ok(sum as f64 / n as f64)
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

fn luminance(img: &RgbImage) -> Plane {
    let v = img
        .pixels()
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();
    Plane {
        w: img.width() as usize,
        h: img.height() as usize,
        v,
    }
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter keeping only windows fully inside the image.
fn filter_valid(p: &Plane, k: &[f64; SSIM_WINDOW]) -> Plane {
    let (w, h) = (p.w + 1 - SSIM_WINDOW, p.h + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; w * p.h];
    for y in 0..p.h {
        let row = &p.v[y * p.w..][..p.w];
        for x in 0..w {
            tmp[y * w + x] = k.iter().zip(&row[x..]).map(|(a, b)| a * b).sum();
        }
    }
    let mut v = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            v[y * w + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * w + x]).sum();
        }
    }
    Plane { w, h, v }
}

fn downsample(p: &Plane) -> Plane {
    let (w, h) = (p.w / 2, p.h / 2);
    let mut v = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let at = |dx: usize, dy: usize| p.v[(2 * y + dy) * p.w + 2 * x + dx];
            v[y * w + x] = 0.25 * (at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1));
        }
    }
    Plane { w, h, v }
}

/// Mean SSIM and mean contrast-structure term at one scale.
fn ssim_terms(a: &Plane, b: &Plane, k: &[f64; SSIM_WINDOW]) -> (f64, f64) {
    let prod = |f: fn(f64, f64) -> f64| Plane {
        w: a.w,
        h: a.h,
        v: a.v.iter().zip(&b.v).map(|(&x, &y)| f(x, y)).collect(),
    };
    let mu_a = filter_valid(a, k);
    let mu_b = filter_valid(b, k);
    let aa = filter_valid(&prod(|x, _| x * x), k);
    let bb = filter_valid(&prod(|_, y| y * y), k);
    let ab = filter_valid(&prod(|x, y| x * y), k);
    let n = mu_a.v.len() as f64;
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.v.len() {
        let (ma, mb) = (mu_a.v[i], mu_b.v[i]);
        let va = aa.v[i] - ma * ma;
        let vb = bb.v[i] - mb * mb;
        let cov = ab.v[i] - ma * mb;
        let c = (2.0 * cov + C2) / (va + vb + C2);
        let l = (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
        cs += c;
        ssim += l * c;
    }
    (ssim / n, cs / n)
}

/// Most scales (up to five) whose coarsest level still fits the window.
pub fn ms_ssim_scales(width: u32, height: u32) -> usize {
    let mut side = width.min(height) as usize;
    let mut m = 0;
    while m < MS_SSIM_WEIGHTS.len() && side >= SSIM_WINDOW {
        m += 1;
        side /= 2;
    }
    m
}

/// Multi-scale structural similarity on luminance with as many scales as
/// the image supports; weights of the kept scales are renormalized to sum
/// to one.
pub fn ms_ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_same_size(a, b)?;
    let scales = ms_ssim_scales(a.width(), a.height());
    ms_ssim_with_scales(a, b, scales)
}

pub fn ms_ssim_with_scales(a: &RgbImage, b: &RgbImage, scales: usize) -> Result<f64> {
    check_same_size(a, b)?;
    if scales == 0 || scales > MS_SSIM_WEIGHTS.len() || ms_ssim_scales(a.width(), a.height()) < scales {
        return Err(Error::Dimension(format!(
            "{}x{} image is too small for {scales} similarity scales",
            a.width(),
            a.height()
        )));
    }
    let total: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let k = gaussian_kernel();
    let (mut pa, mut pb) = (luminance(a), luminance(b));
    let mut out = 1.0;
    for (s, w) in MS_SSIM_WEIGHTS[..scales].iter().enumerate() {
        let (ssim, cs) = ssim_terms(&pa, &pb, &k);
        let term = if s + 1 == scales { ssim } else { cs };
        out *= term.max(0.0).powf(w / total);
        if s + 1 < scales {
            pa = downsample(&pa);
            pb = downsample(&pb);
        }
    }
    Ok(out.clamp(0.0, 1.0))
}

/// Source of parameter estimates for a test image.
#[derive(Debug, Clone, Copy)]
pub enum Estimator<'a> {
    Model(&'a EncoderModel<f32>),
    /// Returns the stored ground truth.
    Oracle,
    /// Draws parameters uniformly, seeded per record.
    Random { seed: u64 },
}

impl Estimator<'_> {
    pub fn estimate(&self, record: &DatasetRecord, image: &RgbImage) -> Result<HairParams> {
        match self {
            Estimator::Model(m) => digitize(*m, &InputImage::from_rgb8(image)),
            Estimator::Oracle => Ok(record.params),
            Estimator::Random { seed } => {
                Ok(HairParams::sample(&mut substream(derive_seed(*seed, record.index as u64), 0)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub index: usize,
    pub image_path: String,
    pub estimate: Option<HairParams>,
    pub l1: Option<f64>,
    pub ms_ssim: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, std: f64::NAN, count: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary { mean, std, count: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_set: String,
    pub model: String,
    pub ms_ssim_scales: usize,
    pub rows: Vec<EvalRow>,
    pub l1: Summary,
    pub ms_ssim: Summary,
    pub lpips: String,
    pub failed: usize,
}

impl EvalReport {
    fn from_rows(test_set: String, model: String, scales: usize, rows: Vec<EvalRow>) -> Self {
        let l1: Vec<f64> = rows.iter().filter_map(|r| r.l1).collect();
        let ms: Vec<f64> = rows.iter().filter_map(|r| r.ms_ssim).collect();
        let failed = rows.iter().filter(|r| r.error.is_some()).count();
        EvalReport {
            test_set,
            model,
            ms_ssim_scales: scales,
            l1: Summary::of(&l1),
            ms_ssim: Summary::of(&ms),
            lpips: "not computed".into(),
            failed,
            rows,
        }
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {}\n", "Metric", "Mean ± Std");
        s += &format!("{:<10} {:.2} ± {:.2}\n", "L1", self.l1.mean, self.l1.std);
        s += &format!("{:<10} {:.4} ± {:.4}\n", "MS-SSIM", self.ms_ssim.mean, self.ms_ssim.std);
        s += &format!("{:<10} {}\n", "LPIPS", self.lpips);
        s += &format!("{} images, {} failed\n", self.rows.len(), self.failed);
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn evaluate_one(
    estimator: &Estimator,
    manifest: &DatasetManifest,
    record: &DatasetRecord,
    strands: &Arc<crate::geometry::StrandSet>,
) -> Result<(HairParams, f64, f64)> {
    let original = crate::render::read_rgb(&manifest.image_path(record))?;
    let h = estimator.estimate(record, &original)?;
    let again = render_item(&manifest.header().settings, record.scene_seed, &h, Some(strands))?;
    Ok((h, l1(&original, &again)?, ms_ssim(&original, &again)?))
}

/// Runs the round-trip protocol over every record of `manifest`, one image
/// per task on `threads` workers (zero: all cores). Failures become rows
/// with an error and are left out of the aggregates.
pub fn evaluate_roundtrip(
    estimator: &Estimator,
    manifest: &DatasetManifest,
    model_id: &str,
    threads: usize,
) -> Result<EvalReport> {
    if manifest.is_empty() {
        return Err(Error::Config(format!("{} holds no test images", manifest.root().display())));
    }
    let settings = &manifest.header().settings;
    let scales = ms_ssim_scales(settings.width, settings.height);
    if scales == 0 {
        return Err(Error::Dimension(format!(
            "{}x{} images are too small for similarity metrics",
            settings.width, settings.height
        )));
    }
    let strands = Arc::new(settings.geometry.build()?);
    let work = || {
        manifest
            .records()
            .par_iter()
            .map(|r| {
                let mut row = EvalRow {
                    index: r.index,
                    image_path: r.image_path.clone(),
                    estimate: None,
                    l1: None,
                    ms_ssim: None,
                    error: None,
                };
                match evaluate_one(estimator, manifest, r, &strands) {
                    Ok((h, a, b)) => {
                        row.estimate = Some(h);
                        row.l1 = Some(a);
                        row.ms_ssim = Some(b);
                    }
                    Err(e) => {
                        log::warn!("{}: {e}", r.image_path);
                        row.error = Some(e.to_string());
                    }
                }
                row
            })
            .collect::<Vec<_>>()
    };
    let rows = if threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)
    };
    Ok(EvalReport::from_rows(
        manifest.root().display().to_string(),
        model_id.to_string(),
        scales,
        rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(w: u32, h: u32, v: u8) -> RgbImage {
        RgbImage::from_pixel(w, h, image::Rgb([v, v, v]))
    }

    #[test]
    fn l1_by_hand() {
        assert_eq!(l1(&constant(4, 3, 100), &constant(4, 3, 110)).unwrap(), 10.0);
        assert_eq!(l1(&constant(4, 3, 7), &constant(4, 3, 7)).unwrap(), 0.0);
        assert!(matches!(l1(&constant(4, 3, 0), &constant(3, 4, 0)), Err(Error::Dimension(_))));
    }

    #[test]
    fn scale_count_follows_image_size() {
        assert_eq!(ms_ssim_scales(10, 100), 0);
        assert_eq!(ms_ssim_scales(11, 11), 1);
        assert_eq!(ms_ssim_scales(64, 64), 3);
        assert_eq!(ms_ssim_scales(175, 175), 4);
        assert_eq!(ms_ssim_scales(176, 200), 5);
        assert_eq!(ms_ssim_scales(1024, 1024), 5);
    }

    #[test]
    fn ms_ssim_constant_images_by_hand() {
        // Flat images have no variance, so only luminance at the coarsest
        // scale differs from one.
        let a = constant(32, 32, 100);
        let b = constant(32, 32, 120);
        let (ya, yb) = (100.0f64, 120.0f64);
        let l = (2.0 * ya * yb + C1) / (ya * ya + yb * yb + C1);
        let w = MS_SSIM_WEIGHTS[1] / (MS_SSIM_WEIGHTS[0] + MS_SSIM_WEIGHTS[1]);
        let got = ms_ssim(&a, &b).unwrap();
        assert!((got - l.powf(w)).abs() < 1e-9, "{got}");
        assert!((ms_ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(ms_ssim_with_scales(&a, &b, 3).is_err());
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!((s.mean, s.std, s.count), (2.0, 1.0, 3));
        assert_eq!(Summary::of(&[5.0]).std, 0.0);
        assert_eq!(Summary::of(&[]).count, 0);
    }
}
