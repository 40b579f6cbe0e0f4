//! L1 and multi-scale structural similarity between two images of equal
//! size.
//!
//! cargo run --release --example image_metrics -- <a.png> <b.png>

use std::path::PathBuf;

use hairdigi::eval::{l1, ms_ssim, ms_ssim_scales};
use hairdigi::render::read_rgb;

fn main() -> hairdigi::Result<()> {
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let usage = "usage: image_metrics <a.png> <b.png>";
    let a = read_rgb(&args.next().expect(usage))?;
    let b = read_rgb(&args.next().expect(usage))?;
    println!("L1       {:.3}", l1(&a, &b)?);
    println!("MS-SSIM  {:.5}  ({} scales)", ms_ssim(&a, &b)?, ms_ssim_scales(a.width(), a.height()));
    Ok(())
}
