//! Monte Carlo path tracing of hair fibers.
//!
//! Paths start at a pinhole camera and scatter off fibers (through the lobe
//! model in [`crate::bcsdf`]) and an optional diffuse holder plane. At every
//! vertex one rectangular area light is sampled directly and combined with
//! scattering-sampled hits on lights by the power heuristic. Paths longer
//! than four vertices are subject to Russian roulette.
//!
//! The image is split into square tiles rendered in parallel. Every camera
//! sample draws from its own stream keyed by `(seed, pixel, sample)`, so the
//! result does not depend on the number of threads or the schedule, and
//! renders of nearby hair colors share their random numbers path by path.

pub mod image;
pub mod presets;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::image::{read_rgb, srgb_decode, srgb_encode, tonemap, write_png, HdrImage};
pub use presets::{
    preset_portrait_scene, preset_swatch_scene, swatch_lights, PortraitStyle, EXPOSURE,
};

use crate::bcsdf::{Bcsdf, FiberMaterial};
use crate::error::{Error, Result};
use crate::geometry::{
    generate_straight_hair, generate_swatch, load_hair_model, CurveHit, Ray, SkipRange,
    StraightHairConfig, StrandSet, SwatchConfig,
};
use crate::math::{cosine_hemisphere, safe_sqrt, sqr, Rgb, Vec3, PI};
use crate::params::HairParams;
use crate::rng::{derive_seed, substream, Rng};

pub const TILE_SIZE: u32 = 16;
const ROULETTE_DEPTH: u32 = 4;
const RAY_OFFSET: f64 = 1e-5;

/// Pinhole camera on a sphere around `target`. Inclination is measured from
/// `+z`; azimuth zero lies on the `+x` side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub radius: f64,
    pub inclination: f64,
    pub azimuth: f64,
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub target: Vec3,
    /// World direction that appears upward in the image.
    pub up: Vec3,
}

impl Camera {
    pub fn position(&self) -> Vec3 {
        let (si, ci) = self.inclination.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        self.target + Vec3::new(si * ca, si * sa, ci) * self.radius
    }

    /// Ray through the image plane point `(sx, sy)` in `[-1, 1]^2`, with
    /// `sy = 1` at the top edge.
    pub fn ray(&self, sx: f64, sy: f64, aspect: f64) -> Ray {
        let pos = self.position();
        let forward = (self.target - pos).normalized();
        let right = forward.cross(self.up).normalized();
        let up = right.cross(forward);
        let tan = (0.5 * self.fov_y).tan();
        let dir = forward + right * (sx * tan * aspect) + up * (sy * tan);
        Ray::new(pos, dir.normalized())
    }
}

/// One-sided rectangle emitting uniformly toward `u x v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectLight {
    pub center: Vec3,
    /// Half edge vectors.
    pub u: Vec3,
    pub v: Vec3,
    pub emission: Rgb,
}

impl RectLight {
    /// A `width x height` light at `position` facing `target`.
    pub fn aimed(position: Vec3, target: Vec3, width: f64, height: f64, emission: Rgb) -> Self {
        let n = (target - position).normalized();
        let a = n.any_perpendicular().normalized();
        let b = n.cross(a);
        RectLight {
            center: position,
            u: a * (0.5 * width),
            v: b * (0.5 * height),
            emission,
        }
    }

    pub fn normal(&self) -> Vec3 {
        self.u.cross(self.v).normalized()
    }

    pub fn area(&self) -> f64 {
        4.0 * self.u.cross(self.v).length()
    }

    fn intersect(&self, ray: &Ray, t_max: f64) -> Option<f64> {
        let n = self.normal();
        let denom = ray.dir.dot(n);
        if denom >= 0.0 {
            return None;
        }
        let t = (self.center - ray.origin).dot(n) / denom;
        if !(t > 0.0 && t < t_max) {
            return None;
        }
        let d = ray.at(t) - self.center;
        let inside = |e: Vec3| d.dot(e).abs() <= e.length_squared();
        (inside(self.u) && inside(self.v)).then_some(t)
    }

    fn sample(&self, u1: f64, u2: f64) -> Vec3 {
        self.center + self.u * (2.0 * u1 - 1.0) + self.v * (2.0 * u2 - 1.0)
    }
}

/// Diffuse rectangle in the `z = 0` plane centred on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub half_x: f64,
    pub half_y: f64,
    pub albedo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySpec {
    Swatch(SwatchConfig),
    StraightHair(StraightHairConfig),
    HairModel { path: PathBuf },
}

impl GeometrySpec {
    pub fn build(&self) -> Result<StrandSet> {
        match self {
            GeometrySpec::Swatch(c) => generate_swatch(c),
            GeometrySpec::StraightHair(c) => generate_straight_hair(c),
            GeometrySpec::HairModel { path } => load_hair_model(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub camera: Camera,
    pub lights: Vec<RectLight>,
    pub holder: Option<Holder>,
    /// Radiance of every ray that leaves the scene.
    pub environment: Rgb,
    pub geometry: GeometrySpec,
    pub width: u32,
    pub height: u32,
    pub spp: u32,
    pub max_depth: u32,
    pub seed: u64,
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let c = &self.camera;
        let bad = |m: String| Err(Error::Config(m));
        if !(c.radius > 0.0 && c.radius.is_finite()) {
            return bad(format!("camera radius must be positive, got {}", c.radius));
        }
        if !(c.inclination > 0.0 && c.inclination < PI) {
            return bad(format!("camera inclination {} outside (0, pi)", c.inclination));
        }
        if !(c.fov_y > 0.0 && c.fov_y < PI) {
            return bad(format!("field of view {} outside (0, pi)", c.fov_y));
        }
        if !c.azimuth.is_finite() || !c.target.is_finite() || c.up.length() == 0.0 {
            return bad("camera azimuth, target and up must be finite".into());
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("resolution {}x{} is empty", self.width, self.height));
        }
        if self.spp == 0 {
            return bad("spp must be at least 1".into());
        }
        if self.max_depth < 2 {
            return bad(format!("max_depth must be at least 2, got {}", self.max_depth));
        }
        for l in &self.lights {
            if l.area() <= 0.0 || !l.emission.is_finite() || l.emission.0.iter().any(|&e| e < 0.0) {
                return bad("lights need positive area and non-negative emission".into());
            }
        }
        if !self.environment.is_finite() || self.environment.0.iter().any(|&e| e < 0.0) {
            return bad("environment radiance must be finite and non-negative".into());
        }
        if let Some(h) = &self.holder {
            if !(h.half_x > 0.0 && h.half_y > 0.0 && (0.0..=1.0).contains(&h.albedo)) {
                return bad("holder needs positive extent and albedo in [0, 1]".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStats {
    pub width: u32,
    pub height: u32,
    pub spp: u32,
    pub samples: u64,
    /// Samples whose radiance was not finite and were replaced by zero.
    pub nonfinite_samples: u64,
    pub wall_time_s: f64,
}

enum Hit {
    Fiber(CurveHit),
    Holder { point: Vec3 },
    Light { t: f64, index: usize },
}

/// Scene parameters with their geometry built, ready to render any number
/// of hair colors. Geometry is shared read-only between scenes and threads.
#[derive(Debug, Clone)]
pub struct Scene {
    params: SceneParams,
    strands: Arc<StrandSet>,
}

fn power_heuristic(a: f64, b: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    if a2 + b2 == 0.0 {
        0.0
    } else {
        a2 / (a2 + b2)
    }
}

fn basis(n: Vec3) -> (Vec3, Vec3) {
    let a = n.any_perpendicular().normalized();
    (a, n.cross(a))
}

impl Scene {
    pub fn new(params: SceneParams) -> Result<Self> {
        params.validate()?;
        let strands = Arc::new(params.geometry.build()?);
        Ok(Scene { params, strands })
    }

    /// Uses prebuilt geometry, which must correspond to `params.geometry`.
    pub fn with_strands(params: SceneParams, strands: Arc<StrandSet>) -> Result<Self> {
        params.validate()?;
        Ok(Scene { params, strands })
    }

    pub fn params(&self) -> &SceneParams {
        &self.params
    }

    pub fn strands(&self) -> &Arc<StrandSet> {
        &self.strands
    }

    /// Renders with `threads` workers; zero uses the ambient rayon pool.
    pub fn render(&self, h: &HairParams, threads: usize) -> (HdrImage, RenderStats) {
        let start = Instant::now();
        let p = &self.params;
        let material = FiberMaterial::from_hair(h);
        let tiles_x = p.width.div_ceil(TILE_SIZE);
        let tiles_y = p.height.div_ceil(TILE_SIZE);
        let tile_count = tiles_x * tiles_y;

        let work = || -> Vec<(Vec<Rgb>, u64)> {
            (0..tile_count)
                .into_par_iter()
                .map(|t| self.render_tile(&material, t % tiles_x, t / tiles_x))
                .collect()
        };
        let tiles = if threads == 0 {
            work()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("thread pool")
                .install(work)
        };

        let mut img = HdrImage::new(p.width, p.height);
        let mut nonfinite = 0;
        for (t, (pixels, bad)) in tiles.into_iter().enumerate() {
            nonfinite += bad;
            let (tx, ty) = (t as u32 % tiles_x, t as u32 / tiles_x);
            let (x0, y0) = (tx * TILE_SIZE, ty * TILE_SIZE);
            let x1 = (x0 + TILE_SIZE).min(p.width);
            let mut it = pixels.into_iter();
            for y in y0..(y0 + TILE_SIZE).min(p.height) {
                for x in x0..x1 {
                    img.set(x, y, it.next().expect("tile pixel"));
                }
            }
        }
        let stats = RenderStats {
            width: p.width,
            height: p.height,
            spp: p.spp,
            samples: p.width as u64 * p.height as u64 * p.spp as u64,
            nonfinite_samples: nonfinite,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        (img, stats)
    }

    fn render_tile(&self, material: &FiberMaterial, tx: u32, ty: u32) -> (Vec<Rgb>, u64) {
        let p = &self.params;
        let aspect = p.width as f64 / p.height as f64;
        let (x0, y0) = (tx * TILE_SIZE, ty * TILE_SIZE);
        let mut out = Vec::with_capacity((TILE_SIZE * TILE_SIZE) as usize);
        let mut nonfinite = 0;
        for y in y0..(y0 + TILE_SIZE).min(p.height) {
            for x in x0..(x0 + TILE_SIZE).min(p.width) {
                let mut sum = Rgb::ZERO;
                let pixel_seed = derive_seed(p.seed, y as u64 * p.width as u64 + x as u64);
                for i in 0..p.spp {
                    let mut rng = substream(pixel_seed, i as u64);
                    let sx = 2.0 * (x as f64 + rng.gen::<f64>()) / p.width as f64 - 1.0;
                    let sy = 1.0 - 2.0 * (y as f64 + rng.gen::<f64>()) / p.height as f64;
                    let l = self.radiance(material, p.camera.ray(sx, sy, aspect), &mut rng);
                    if l.is_finite() && l.0.iter().all(|&c| c >= 0.0) {
                        sum += l;
                    } else {
                        nonfinite += 1;
                    }
                }
                out.push(sum / p.spp as f64);
            }
        }
        (out, nonfinite)
    }

    fn intersect(&self, ray: &Ray, skip: Option<SkipRange>) -> Option<Hit> {
        let mut best = None;
        let mut t_max = f64::INFINITY;
        if let Some(h) = self.strands.intersect_skipping(ray, t_max, skip) {
            t_max = h.t;
            best = Some(Hit::Fiber(h));
        }
        if let Some(t) = self.holder_hit(ray, t_max) {
            t_max = t;
            best = Some(Hit::Holder { point: ray.at(t) });
        }
        for (index, light) in self.params.lights.iter().enumerate() {
            if let Some(t) = light.intersect(ray, t_max) {
                t_max = t;
                best = Some(Hit::Light { t, index });
            }
        }
        best
    }

    fn holder_hit(&self, ray: &Ray, t_max: f64) -> Option<f64> {
        let holder = self.params.holder.as_ref()?;
        if ray.dir.z == 0.0 {
            return None;
        }
        let t = -ray.origin.z / ray.dir.z;
        if !(t > 0.0 && t < t_max) {
            return None;
        }
        let p = ray.at(t);
        (p.x.abs() <= holder.half_x && p.y.abs() <= holder.half_y).then_some(t)
    }

    fn unoccluded(&self, origin: Vec3, target: Vec3, skip: Option<SkipRange>) -> bool {
        let d = target - origin;
        let dist = d.length();
        let ray = Ray::new(origin, d / dist);
        let t_max = dist * (1.0 - 1e-7);
        self.holder_hit(&ray, t_max).is_none() && !self.strands.occluded(&ray, t_max, skip)
    }

    /// Samples one light uniformly and a point on it uniformly by area.
    /// Returns the point, the incident direction, its solid-angle density
    /// and the emitted radiance.
    fn sample_light(&self, origin: Vec3, rng: &mut Rng) -> Option<(Vec3, Vec3, f64, Rgb)> {
        let lights = &self.params.lights;
        if lights.is_empty() {
            return None;
        }
        let index = ((rng.gen::<f64>() * lights.len() as f64) as usize).min(lights.len() - 1);
        let light = &lights[index];
        let q = light.sample(rng.gen(), rng.gen());
        let d = q - origin;
        let dist2 = d.length_squared();
        let wi = d / dist2.sqrt();
        let cos_l = -wi.dot(light.normal());
        if cos_l <= 0.0 {
            return None;
        }
        let pdf = dist2 / (cos_l * light.area()) / lights.len() as f64;
        Some((q, wi, pdf, light.emission))
    }

    fn light_pdf(&self, index: usize, ray: &Ray, t: f64) -> f64 {
        let light = &self.params.lights[index];
        let cos_l = -ray.dir.dot(light.normal());
        t * t / (cos_l * light.area()) / self.params.lights.len() as f64
    }

    fn radiance(&self, material: &FiberMaterial, mut ray: Ray, rng: &mut Rng) -> Rgb {
        let p = &self.params;
        let mut l = Rgb::ZERO;
        let mut beta = Rgb::ONE;
        let mut prev_pdf = 0.0;
        let mut skip = None;
        for depth in 0..p.max_depth {
            let Some(hit) = self.intersect(&ray, skip) else {
                l += beta * p.environment;
                break;
            };
            match hit {
                Hit::Light { t, index } => {
                    let w = if depth == 0 {
                        1.0
                    } else {
                        power_heuristic(prev_pdf, self.light_pdf(index, &ray, t))
                    };
                    l += beta * p.lights[index].emission * w;
                    break;
                }
                Hit::Fiber(hit) => {
                    let frame = hit.frame;
                    let wo = frame.to_local(-ray.dir);
                    let bsdf = Bcsdf::new(hit.h, material);
                    let here = Some(self.strands.skip_for(&hit));
                    if let Some((q, wi_world, pdf_l, le)) = self.sample_light(hit.point, rng) {
                        let wi = frame.to_local(wi_world);
                        let f = bsdf.eval_projected(wo, wi);
                        if !f.is_black() && self.unoccluded(hit.point, q, here) {
                            let w = power_heuristic(pdf_l, bsdf.pdf(wo, wi));
                            l += beta * f * le * (w / pdf_l);
                        }
                    }
                    let s = bsdf.sample(wo, rng);
                    if !(s.pdf > 0.0) || !s.value.is_finite() || s.value.is_black() {
                        break;
                    }
                    let cos_i = safe_sqrt(1.0 - sqr(s.wi.x));
                    beta *= s.value * (cos_i / s.pdf);
                    prev_pdf = s.pdf;
                    ray = Ray::new(hit.point, frame.to_world(s.wi).normalized());
                    skip = here;
                }
                Hit::Holder { point } => {
                    let albedo = p.holder.as_ref().map_or(0.0, |h| h.albedo);
                    let n = if ray.dir.z > 0.0 { Vec3::new(0.0, 0.0, -1.0) } else { Vec3::new(0.0, 0.0, 1.0) };
                    let origin = point + n * RAY_OFFSET;
                    if let Some((q, wi, pdf_l, le)) = self.sample_light(origin, rng) {
                        let cos = wi.dot(n);
                        if cos > 0.0 && self.unoccluded(origin, q, None) {
                            let w = power_heuristic(pdf_l, cos / PI);
                            l += beta * le * (albedo / PI * cos * w / pdf_l);
                        }
                    }
                    let local = cosine_hemisphere(rng.gen(), rng.gen());
                    let (a, b) = basis(n);
                    let dir = (a * local.x + b * local.y + n * local.z).normalized();
                    prev_pdf = local.z / PI;
                    if !(prev_pdf > 0.0) {
                        break;
                    }
                    beta *= albedo;
                    ray = Ray::new(origin, dir);
                    skip = None;
                }
            }
            if depth + 1 >= ROULETTE_DEPTH {
                let survive = beta.max_component().min(0.95);
                if !(rng.gen::<f64>() < survive) {
                    break;
                }
                beta = beta / survive;
            }
        }
        l
    }
}

/// Builds the scene geometry and renders one image.
pub fn render(h: &HairParams, s: &SceneParams) -> Result<HdrImage> {
    Ok(Scene::new(s.clone())?.render(h, 0).0)
}
