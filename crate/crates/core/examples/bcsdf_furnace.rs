//! White furnace check of the fiber scattering function: a fiber that
//! absorbs nothing must scatter all incoming energy. Also prints how the
//! scattered energy of a brown fiber splits with the outgoing angle.
//!
//! cargo run --release --example bcsdf_furnace -- [samples]

use hairdigi::bcsdf::{furnace_energy, FiberMaterial};
use hairdigi::rng::rng_from_seed;
use hairdigi::{HairParams, SpectralAbsorption};

fn main() -> hairdigi::Result<()> {
    let samples: usize = std::env::args().nth(1).map_or(200_000, |s| s.parse().expect("samples"));
    let white = FiberMaterial::new(SpectralAbsorption::ZERO, 1.55, 0.3, 0.3, 2f64.to_radians())?;
    let brown = FiberMaterial::from_hair(&HairParams::natural(0.5, 0.3)?);
    let mut rng = rng_from_seed(1);
    println!("theta_o  white            brown (r g b)");
    for deg in [0.0, 30.0, 60.0, 80.0] {
        let t = f64::to_radians(deg);
        let w = furnace_energy(&white, t, samples, &mut rng);
        let b = furnace_energy(&brown, t, samples, &mut rng);
        println!(
            "{deg:5.0}    {:.4}           {:.3} {:.3} {:.3}",
            w.luminance(),
            b.0[0],
            b.0[1],
            b.0[2]
        );
    }
    Ok(())
}
