//! Renders a digitized color on a full hairstyle: the built-in straight
//! hair, or a strand file in the binary hair model format.
//!
//! cargo run --release --example render_portrait -- [out.png] [params] [model.hair]

use std::path::PathBuf;

use hairdigi::render::{preset_portrait_scene, tonemap, write_png, PortraitStyle, Scene, EXPOSURE};
use hairdigi::HairParams;

fn main() -> hairdigi::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "portrait.png".into()));
    let h = match args.next() {
        Some(p) => p.parse::<HairParams>()?,
        None => HairParams::natural(0.3, 0.2)?,
    };
    let style = match args.next() {
        Some(path) => PortraitStyle::HairModel(path.into()),
        None => PortraitStyle::Straight,
    };
    let mut params = preset_portrait_scene(&style, 0)?;
    // Preview quality; the preset default is 64.
    params.spp = 16;
    let scene = Scene::new(params)?;
    let (img, stats) = scene.render(&h, 0);
    write_png(&tonemap(&img, EXPOSURE), &out)?;
    println!(
        "{} strands, {}x{} at {} spp in {:.1}s -> {}",
        scene.strands().strands().len(),
        stats.width,
        stats.height,
        stats.spp,
        stats.wall_time_s,
        out.display()
    );
    Ok(())
}
