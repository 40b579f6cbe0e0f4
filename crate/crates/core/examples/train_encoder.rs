//! Trains the encoder on a dataset directory and writes a checkpoint and a
//! loss curve. An existing checkpoint at the output path is resumed.
//!
//! cargo run --release --example train_encoder -- <data_dir> [model.ckpt] [epochs]

use std::path::PathBuf;

use hairdigi::dataset::{load_dataset, DatasetManifest};
use hairdigi::encoder::{load_checkpoint, write_loss_csv, Architecture, EncoderModel, TrainConfig, Trainer};

fn main() -> hairdigi::Result<()> {
    let mut args = std::env::args().skip(1);
    let data_dir = PathBuf::from(args.next().expect("usage: train_encoder <data_dir> [model.ckpt] [epochs]"));
    let ckpt = PathBuf::from(args.next().unwrap_or_else(|| "model.ckpt".into()));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));

    let size = DatasetManifest::load(&data_dir)?.header().settings.width as usize;
    let data = load_dataset(&data_dir)?;
    let mut trainer = if ckpt.exists() {
        Trainer::from_checkpoint(load_checkpoint(&ckpt)?)?
    } else {
        let model = EncoderModel::<f32>::new(Architecture::standard(size), 0)?;
        Trainer::new(model, TrainConfig::desk(), 0)?
    };
    trainer.set_epochs(epochs);
    println!(
        "{} images, {} weights, starting at epoch {}",
        data.len(),
        trainer.model().params().len(),
        trainer.epoch()
    );
    while trainer.epoch() < epochs {
        let t = std::time::Instant::now();
        let loss = trainer.run_epoch(&data)?;
        println!("epoch {:4}  loss {loss:.5}  {:.1}s", trainer.epoch(), t.elapsed().as_secs_f64());
    }
    hairdigi::encoder::save_checkpoint(&trainer.checkpoint(), &ckpt)?;
    write_loss_csv(trainer.history(), &ckpt.with_extension("csv"))?;
    Ok(())
}
