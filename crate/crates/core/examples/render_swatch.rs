//! Renders the training swatch for a few hair colors and writes PNGs.
//!
//! cargo run --release --example render_swatch -- [out_dir] [resolution] [spp]

use std::path::PathBuf;

use hairdigi::render::{preset_swatch_scene, tonemap, write_png, Scene, EXPOSURE};
use hairdigi::HairParams;

fn main() -> hairdigi::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "swatches".into()));
    let res: u32 = args.next().map_or(128, |s| s.parse().expect("resolution"));
    let spp: u32 = args.next().map_or(64, |s| s.parse().expect("spp"));
    std::fs::create_dir_all(&out).map_err(|e| hairdigi::Error::Io { path: out.clone(), source: e })?;

    let mut params = preset_swatch_scene(7);
    params.width = res;
    params.height = res;
    params.spp = spp;
    let scene = Scene::new(params)?;

    let colors = [
        ("blond", HairParams::natural(0.05, 0.4)?),
        ("auburn", HairParams::natural(0.3, 0.2)?),
        ("brown", HairParams::natural(0.5, 0.9)?),
        ("black", HairParams::natural(0.95, 1.0)?),
        ("dyed_blue", HairParams::new([40.0, 80.0, 220.0], 0.8, 0.05, 0.5)?),
    ];
    for (name, h) in colors {
        let (img, stats) = scene.render(&h, 0);
        let path = out.join(format!("{name}.png"));
        write_png(&tonemap(&img, EXPOSURE), &path)?;
        println!(
            "{name:10} mean luminance {:.4}  {:.2}s  -> {}",
            img.mean_luminance(),
            stats.wall_time_s,
            path.display()
        );
    }
    Ok(())
}
