mod common;

use std::sync::Arc;

use hairdigi::geometry::SwatchConfig;
use hairdigi::math::Rgb;
use hairdigi::render::presets::{SWATCH_AZIMUTH, SWATCH_INCLINATION};
use hairdigi::render::{
    preset_portrait_scene, preset_swatch_scene, srgb_encode, tonemap, GeometrySpec, HdrImage, PortraitStyle, Scene,
    SceneParams,
};
use hairdigi::HairParams;

fn small_swatch(seed: u64, res: u32, spp: u32) -> SceneParams {
    let mut s = preset_swatch_scene(seed);
    s.width = res;
    s.height = res;
    s.spp = spp;
    s
}

#[test]
fn camera_angles_uniform_over_declared_ranges() {
    let cams: Vec<_> = (0..1000).map(|s| preset_swatch_scene(s).camera).collect();
    let az: Vec<f64> = cams.iter().map(|c| c.azimuth).collect();
    let inc: Vec<f64> = cams.iter().map(|c| c.inclination).collect();
    assert!(common::ks_uniform(&az, SWATCH_AZIMUTH.0, SWATCH_AZIMUTH.1) > 0.01);
    assert!(common::ks_uniform(&inc, SWATCH_INCLINATION.0, SWATCH_INCLINATION.1) > 0.01);
}

#[test]
fn ks_helper_rejects_skewed_samples() {
    let skewed: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0).powi(2)).collect();
    assert!(common::ks_uniform(&skewed, 0.0, 1.0) < 1e-6);
}

#[test]
fn identical_across_thread_counts() {
    let scene = Scene::new(small_swatch(3, 40, 4)).unwrap();
    let h = HairParams::natural(0.3, 0.5).unwrap();
    let (a, _) = scene.render(&h, 1);
    let (b, _) = scene.render(&h, 3);
    let (c, _) = scene.render(&h, 1);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn more_melanin_renders_darker() {
    let scene = Scene::new(small_swatch(11, 32, 8)).unwrap();
    let lum = |m: f64| scene.render(&HairParams::natural(m, 0.5).unwrap(), 0).0.mean_luminance();
    let (light, dark) = (lum(0.1), lum(0.9));
    assert!(dark < light, "{light} vs {dark}");
}

#[test]
fn variance_halves_when_spp_doubles() {
    let h = HairParams::natural(0.2, 0.5).unwrap();
    let base = small_swatch(5, 16, 1);
    let strands = Arc::new(base.geometry.build().unwrap());
    let levels = [1u32, 2, 4, 8, 16];
    let runs = 24;
    let mut points = Vec::new();
    for &spp in &levels {
        let images: Vec<HdrImage> = (0..runs)
            .map(|r| {
                let p = SceneParams { spp, seed: 1000 + r, ..base.clone() };
                Scene::with_strands(p, strands.clone()).unwrap().render(&h, 0).0
            })
            .collect();
        let n = images[0].data().len();
        let mut var = 0.0;
        for i in 0..n {
            let vals: Vec<f64> = images.iter().map(|im| im.data()[i] as f64).collect();
            let m = vals.iter().sum::<f64>() / runs as f64;
            var += vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (runs - 1) as f64;
        }
        points.push(((spp as f64).ln(), (var / n as f64).ln()));
    }
    let k = points.len() as f64;
    let (mx, my) = (points.iter().map(|p| p.0).sum::<f64>() / k, points.iter().map(|p| p.1).sum::<f64>() / k);
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    assert!((-1.2..=-0.8).contains(&slope), "slope {slope}");
}

#[test]
fn lossless_hair_under_white_sky_keeps_radiance() {
    let mut s = small_swatch(2, 24, 16);
    s.lights.clear();
    s.holder = None;
    s.environment = Rgb::splat(1.0);
    s.max_depth = 64;
    let white = HairParams::new([255.0; 3], 0.0, 0.0, 0.5).unwrap();
    let (img, stats) = Scene::new(s).unwrap().render(&white, 0);
    assert_eq!(stats.nonfinite_samples, 0);
    let m = img.mean();
    for c in m.0 {
        assert!((c - 1.0).abs() < 0.05, "{m:?}");
    }
}

#[test]
fn no_lights_no_environment_is_black() {
    let mut s = small_swatch(2, 8, 2);
    s.lights.clear();
    let (img, _) = Scene::new(s).unwrap().render(&HairParams::natural(0.1, 0.1).unwrap(), 0);
    assert!(img.data().iter().all(|&v| v == 0.0));
}

#[test]
fn portrait_hue_matches_swatch_hue() {
    let h = HairParams::new([200.0, 60.0, 40.0], 0.6, 0.25, 0.3).unwrap();
    let mut sw = small_swatch(4, 48, 16);
    sw.holder = None;
    let swatch = Scene::new(sw).unwrap().render(&h, 0).0.mean();
    let mut pp = preset_portrait_scene(&PortraitStyle::Straight, 4).unwrap();
    pp.width = 64;
    pp.height = 64;
    pp.spp = 16;
    if let GeometrySpec::StraightHair(cfg) = &mut pp.geometry {
        cfg.count = 1500;
    }
    let portrait = Scene::new(pp).unwrap().render(&h, 0).0.mean();
    let (a, b) = (common::hue_degrees(swatch.0), common::hue_degrees(portrait.0));
    assert!(common::angle_between_degrees(a, b) < 5.0, "swatch {a} portrait {b}");
}

#[test]
fn tonemap_follows_srgb_curve() {
    let mut img = HdrImage::new(3, 1);
    img.set(0, 0, Rgb::splat(0.0));
    img.set(1, 0, Rgb::splat(1.0));
    img.set(2, 0, Rgb::splat(0.18));
    let out = tonemap(&img, 1.0);
    assert_eq!(out.get_pixel(0, 0).0, [0, 0, 0]);
    assert_eq!(out.get_pixel(1, 0).0, [255, 255, 255]);
    // Independent evaluation of the piecewise sRGB transfer function.
    let oracle = (255.0 * (1.055 * 0.18f64.powf(1.0 / 2.4) - 0.055)).round() as u8;
    assert_eq!(oracle, 118);
    assert_eq!(out.get_pixel(2, 0).0, [oracle; 3]);
    assert!((srgb_encode(0.18) * 255.0 - 117.6458).abs() < 1e-4);
}

#[test]
fn dense_swatch_scenes_have_no_nonfinite_samples() {
    let mut s = small_swatch(8, 24, 4);
    s.geometry = GeometrySpec::Swatch(SwatchConfig { waviness_mm: 2.0, ..Default::default() });
    for h in [HairParams::natural(0.0, 0.0).unwrap(), HairParams::natural(1.0, 1.0).unwrap()] {
        let (_, stats) = Scene::new(s.clone()).unwrap().render(&h, 0);
        assert_eq!(stats.nonfinite_samples, 0);
    }
}
