//! Fixed capture rigs: the swatch training rig with a randomized camera and
//! portrait-scale scenes for showing digitized colors on a full hairstyle.

use std::path::PathBuf;

use rand::Rng;

use super::{Camera, GeometrySpec, Holder, RectLight, SceneParams};
use crate::error::{Error, Result};
use crate::geometry::{load_hair_model, StraightHairConfig, SwatchConfig};
use crate::math::{Rgb, Vec3, PI};
use crate::rng::{derive_seed, rng_from_seed};

/// Global exposure applied before tonemapping everywhere in the pipeline.
pub const EXPOSURE: f64 = 1.0;

pub const LIGHT_SIZE_MM: f64 = 40.0;
pub const LIGHT_DISTANCE_MM: f64 = 120.0;
pub const LIGHT_EMISSION: f64 = 20.0;

pub const SWATCH_CAMERA_RADIUS_MM: f64 = 150.0;
pub const SWATCH_FOV: f64 = 12.0 * PI / 180.0;
pub const SWATCH_INCLINATION: (f64, f64) = (PI / 6.0, PI / 3.0);
pub const SWATCH_AZIMUTH: (f64, f64) = (-PI / 6.0, PI / 6.0);
pub const HOLDER_ALBEDO: f64 = 0.2;

pub const DEFAULT_RESOLUTION: u32 = 128;
pub const DEFAULT_SPP: u32 = 64;
pub const DEFAULT_MAX_DEPTH: u32 = 16;

pub const PORTRAIT_CAMERA_RADIUS_MM: f64 = 600.0;
pub const PORTRAIT_FOV: f64 = 28.0 * PI / 180.0;
pub const PORTRAIT_RESOLUTION: u32 = 256;

/// Overhead light plus two at 45 degrees inclination and +-45 degrees
/// azimuth, expressed in a frame whose `z` axis is the rig's overhead
/// direction. Lights sit `distance` from `target` and scale with it so the
/// irradiance at the target does not depend on `distance`.
fn rig_directions() -> [Vec3; 3] {
    let s = (PI / 4.0).sin();
    [
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(s * s, s * s, s),
        Vec3::new(s * s, -s * s, s),
    ]
}

pub fn swatch_lights(target: Vec3, distance: f64) -> Vec<RectLight> {
    rig_lights(target, distance, |d| d)
}

fn rig_lights(target: Vec3, distance: f64, to_world: impl Fn(Vec3) -> Vec3) -> Vec<RectLight> {
    let size = LIGHT_SIZE_MM * distance / LIGHT_DISTANCE_MM;
    rig_directions()
        .into_iter()
        .map(|d| {
            let pos = target + to_world(d) * distance;
            RectLight::aimed(pos, target, size, size, Rgb::splat(LIGHT_EMISSION))
        })
        .collect()
}

/// The training rig: flat swatch on a dark holder, three lights and a
/// camera whose inclination and azimuth are drawn uniformly from
/// [`SWATCH_INCLINATION`] and [`SWATCH_AZIMUTH`].
pub fn preset_swatch_scene(seed: u64) -> SceneParams {
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let inclination = rng.gen_range(SWATCH_INCLINATION.0..SWATCH_INCLINATION.1);
    let azimuth = rng.gen_range(SWATCH_AZIMUTH.0..SWATCH_AZIMUTH.1);
    SceneParams {
        camera: Camera {
            radius: SWATCH_CAMERA_RADIUS_MM,
            inclination,
            azimuth,
            fov_y: SWATCH_FOV,
            target: Vec3::ZERO,
            up: Vec3::new(0.0, 1.0, 0.0),
        },
        lights: swatch_lights(Vec3::ZERO, LIGHT_DISTANCE_MM),
        holder: Some(Holder {
            half_x: 40.0,
            half_y: 50.0,
            albedo: HOLDER_ALBEDO,
        }),
        environment: Rgb::ZERO,
        geometry: GeometrySpec::Swatch(SwatchConfig::default()),
        width: DEFAULT_RESOLUTION,
        height: DEFAULT_RESOLUTION,
        spp: DEFAULT_SPP,
        max_depth: DEFAULT_MAX_DEPTH,
        seed: derive_seed(seed, 1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PortraitStyle {
    Straight,
    HairModel(PathBuf),
}

/// Portrait framing of a hairstyle seen from `+x`, lit by the swatch rig
/// turned so that its overhead light faces the front of the hair.
pub fn preset_portrait_scene(style: &PortraitStyle, seed: u64) -> Result<SceneParams> {
    let (geometry, target, radius, fov) = match style {
        PortraitStyle::Straight => {
            let cfg = StraightHairConfig::default();
            let target = Vec3::new(0.0, 0.0, cfg.top_z_mm - 0.5 * cfg.length_mm);
            (GeometrySpec::StraightHair(cfg), target, PORTRAIT_CAMERA_RADIUS_MM, PORTRAIT_FOV)
        }
        PortraitStyle::HairModel(path) => {
            if !path.exists() {
                return Err(Error::Config(format!("hair model file {} does not exist", path.display())));
            }
            let bounds = load_hair_model(path)?.bounds();
            let diag = bounds.extent().length();
            let radius = 2.5 * diag;
            let fov = 2.0 * (0.6 * diag / radius).atan();
            (GeometrySpec::HairModel { path: path.clone() }, bounds.center(), radius, fov)
        }
    };
    // Rig frame: overhead -> +x, rig x -> +y, rig y -> -z.
    let lights = rig_lights(target, radius * 2.0 / 3.0, |d| Vec3::new(d.z, d.x, -d.y));
    Ok(SceneParams {
        camera: Camera {
            radius,
            inclination: PI / 2.0,
            azimuth: 0.0,
            fov_y: fov,
            target,
            up: Vec3::new(0.0, 0.0, 1.0),
        },
        lights,
        holder: None,
        environment: Rgb::ZERO,
        geometry,
        width: PORTRAIT_RESOLUTION,
        height: PORTRAIT_RESOLUTION,
        spp: DEFAULT_SPP,
        max_depth: DEFAULT_MAX_DEPTH,
        seed: derive_seed(seed, 1),
    })
}
