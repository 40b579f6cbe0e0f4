//! Round-trip evaluation of a test dataset: estimate, re-render under the
//! original scene, compare. The estimator is a checkpoint, `oracle` (ground
//! truth, a lower bound on the error) or `random` (a baseline).
//!
//! cargo run --release --example evaluate -- <model.ckpt|oracle|random> <test_dir>

use std::path::PathBuf;

use hairdigi::dataset::DatasetManifest;
use hairdigi::encoder::load_checkpoint;
use hairdigi::eval::{evaluate_roundtrip, Estimator};

fn main() -> hairdigi::Result<()> {
    let mut args = std::env::args().skip(1);
    let usage = "usage: evaluate <model.ckpt|oracle|random> <test_dir>";
    let which = args.next().expect(usage);
    let test = DatasetManifest::load(&PathBuf::from(args.next().expect(usage)))?;
    let model;
    let estimator = match which.as_str() {
        "oracle" => Estimator::Oracle,
        "random" => Estimator::Random { seed: 0 },
        path => {
            model = load_checkpoint(&PathBuf::from(path))?.model()?;
            Estimator::Model(&model)
        }
    };
    let report = evaluate_roundtrip(&estimator, &test, &which, 0)?;
    print!("{}", report.table());
    let worst = report
        .rows
        .iter()
        .filter(|r| r.l1.is_some())
        .max_by(|a, b| a.l1.partial_cmp(&b.l1).unwrap());
    if let Some(r) = worst {
        println!("worst: {} (L1 {:.2})", r.image_path, r.l1.unwrap());
    }
    Ok(())
}
