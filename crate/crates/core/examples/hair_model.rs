//! Writes a generated hairstyle in the binary hair model format, reads it
//! back and renders it with the portrait rig.
//!
//! cargo run --release --example hair_model -- [out_dir]

use std::path::PathBuf;

use hairdigi::geometry::{generate_straight_hair, load_hair_model, HairModelFile, StraightHairConfig};
use hairdigi::render::{preset_portrait_scene, tonemap, write_png, PortraitStyle, Scene, EXPOSURE};
use hairdigi::HairParams;

fn main() -> hairdigi::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "hair_model".into()));
    std::fs::create_dir_all(&out).map_err(|e| hairdigi::Error::Io { path: out.clone(), source: e })?;

    let cfg = StraightHairConfig {
        count: 800,
        ..Default::default()
    };
    let set = generate_straight_hair(&cfg)?;
    let file = HairModelFile::from_strands(set.strands(), "generated straight hair");
    let path = out.join("straight.hair");
    let bytes = file.to_bytes();
    std::fs::write(&path, &bytes).map_err(|e| hairdigi::Error::Io { path: path.clone(), source: e })?;
    println!("{} strands, {} points, {} bytes", file.strand_count, file.point_count, bytes.len());

    let set = load_hair_model(&path)?;
    println!("reloaded {} strands, {} curve pieces, bounds {:?}", set.strands().len(), set.pieces().len(), set.bounds());

    let mut params = preset_portrait_scene(&PortraitStyle::HairModel(path), 0)?;
    params.width = 128;
    params.height = 128;
    params.spp = 8;
    let (img, stats) = Scene::new(params)?.render(&HairParams::natural(0.15, 0.6)?, 0);
    write_png(&tonemap(&img, EXPOSURE), &out.join("render.png"))?;
    println!("rendered in {:.1}s", stats.wall_time_s);
    Ok(())
}
