//! Estimates the color parameters of a swatch photo and shows them on the
//! straight-hair portrait.
//!
//! cargo run --release --example digitize -- <model.ckpt> <image.png> [portrait.png]

use std::path::PathBuf;

use hairdigi::encoder::{digitize_file, load_checkpoint};
use hairdigi::render::{preset_portrait_scene, tonemap, write_png, PortraitStyle, Scene, EXPOSURE};

fn main() -> hairdigi::Result<()> {
    let mut args = std::env::args().skip(1);
    let usage = "usage: digitize <model.ckpt> <image.png> [portrait.png]";
    let ckpt = PathBuf::from(args.next().expect(usage));
    let image = PathBuf::from(args.next().expect(usage));
    let model = load_checkpoint(&ckpt)?.model()?;
    let h = digitize_file(&model, &image)?;
    print!("{}", h.to_record());

    if let Some(out) = args.next() {
        let mut params = preset_portrait_scene(&PortraitStyle::Straight, 0)?;
        params.spp = 16;
        let (img, _) = Scene::new(params)?.render(&h, 0);
        write_png(&tonemap(&img, EXPOSURE), &PathBuf::from(&out))?;
        println!("portrait -> {out}");
    }
    Ok(())
}
