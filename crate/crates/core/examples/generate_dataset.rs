//! Generates a synthetic swatch dataset. Rerunning with the same arguments
//! resumes an interrupted run.
//!
//! cargo run --release --example generate_dataset -- [out_dir] [n] [resolution] [spp]

use std::path::PathBuf;

use hairdigi::dataset::{generate_dataset, split, RenderSettings};

fn main() -> hairdigi::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "swatch_data".into()));
    let n: usize = args.next().map_or(64, |s| s.parse().expect("n"));
    let res: u32 = args.next().map_or(64, |s| s.parse().expect("resolution"));
    let spp: u32 = args.next().map_or(32, |s| s.parse().expect("spp"));

    let settings = RenderSettings {
        width: res,
        height: res,
        spp,
        ..RenderSettings::desk()
    };
    let start = std::time::Instant::now();
    let manifest = generate_dataset(n, 7, &out, &settings, 0)?;
    println!("{} images in {:.1}s", manifest.len(), start.elapsed().as_secs_f64());

    let (train, val, test) = split(&manifest, [0.8, 0.1, 0.1], 7)?;
    train.export(&out.join("split/train"))?;
    val.export(&out.join("split/val"))?;
    test.export(&out.join("split/test"))?;
    println!("split {} / {} / {}", train.len(), val.len(), test.len());
    for r in manifest.records().iter().take(3) {
        println!("{}  {}", r.image_path, r.params.to_record().replace('\n', " "));
    }
    Ok(())
}
