//! Adam training loop, checkpoint container and loss history.
//!
//! Checkpoint layout (little-endian): 8-byte magic, `u32` version, `u32`
//! length plus JSON metadata (architecture and its hash, training config,
//! completed epochs, seeds, optimizer step count, loss history), `u64`
//! parameter count, then weights, first moments and second moments as
//! `f32` arrays, and finally a SHA-256 digest of everything before it.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Architecture, EncoderModel, InputImage};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::params::NormalizedParams;
use crate::rng::derive_seed;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HDIGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Gradients whose global norm exceeds this are rescaled onto it.
    pub clip_norm: f64,
    /// Write a checkpoint every this many epochs; zero writes only the last.
    pub checkpoint_every: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl TrainConfig {
    /// 400 epochs, batch 32, learning rate 1e-6, for a corpus of thousands
    /// of images.
    pub fn full() -> Self {
        TrainConfig {
            epochs: 400,
            batch_size: 32,
            learning_rate: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 5.0,
            checkpoint_every: 10,
            seed: 0,
        }
    }

    /// 100 epochs, batch 32, learning rate 1e-3, sized for a few hundred
    /// training images.
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return Err(Error::Config("Adam moments must lie in [0, 1) with positive epsilon".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip norm must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::full()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn update(&mut self, params: &mut [f32], grad: &[f32], cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let c1 = 1.0 - (cfg.beta1 as f32).powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - (cfg.beta2 as f32).powi(self.step.min(i32::MAX as u64) as i32);
        let (lr, eps) = (cfg.learning_rate as f32, cfg.epsilon as f32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Everything needed to continue training bit-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub architecture: Architecture,
    pub config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub init_seed: u64,
    pub adam: AdamState,
    pub params: Vec<f32>,
    /// Mean training loss of each completed epoch.
    pub history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    architecture: Architecture,
    architecture_hash: String,
    config: TrainConfig,
    epoch: usize,
    init_seed: u64,
    shuffle_seed: u64,
    adam_step: u64,
    history: Vec<f64>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<EncoderModel<f32>> {
        EncoderModel::from_params(self.architecture.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = CheckpointMeta {
            architecture: self.architecture.clone(),
            architecture_hash: self.architecture.hash(),
            config: self.config.clone(),
            epoch: self.epoch,
            init_seed: self.init_seed,
            shuffle_seed: self.config.seed,
            adam_step: self.adam.step,
            history: self.history.clone(),
        };
        let json = serde_json::to_vec(&meta).expect("metadata serializes");
        let mut out = Vec::with_capacity(64 + json.len() + 12 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for arr in [&self.params, &self.adam.m, &self.adam.v] {
            for v in arr.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 8 + 4 + 4 + 8 + 32 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch; file is corrupt or truncated"));
        }
        let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported checkpoint version {version}")));
        }
        let json_len = u32::from_le_bytes(body[12..16].try_into().unwrap()) as usize;
        let json_end = 16 + json_len;
        if body.len() < json_end + 8 {
            return Err(bad("truncated metadata"));
        }
        let meta: CheckpointMeta =
            serde_json::from_slice(&body[16..json_end]).map_err(|e| bad(&format!("bad metadata: {e}")))?;
        if meta.architecture.hash() != meta.architecture_hash {
            return Err(bad("architecture hash does not match descriptor"));
        }
        let n = u64::from_le_bytes(body[json_end..json_end + 8].try_into().unwrap()) as usize;
        if n != meta.architecture.param_count() {
            return Err(bad("parameter count does not match architecture"));
        }
        let floats = &body[json_end + 8..];
        if floats.len() != 12 * n {
            return Err(bad("weight arrays have the wrong length"));
        }
        let read = |k: usize| -> Vec<f32> {
            floats[4 * n * k..4 * n * (k + 1)]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        Ok(Checkpoint {
            architecture: meta.architecture,
            config: meta.config,
            epoch: meta.epoch,
            init_seed: meta.init_seed,
            adam: AdamState {
                step: meta.adam_step,
                m: read(1),
                v: read(2),
            },
            params: read(0),
            history: meta.history,
        })
    }
}

pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, c.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::Config(format!("model file {} does not exist", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

/// `epoch,mean_loss` rows, epochs counted from 1.
pub fn write_loss_csv(history: &[f64], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "epoch,mean_loss").unwrap();
    for (i, l) in history.iter().enumerate() {
        writeln!(out, "{},{l}", i + 1).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Optimizer state around a model.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: EncoderModel<f32>,
    adam: AdamState,
    config: TrainConfig,
    init_seed: u64,
    epoch: usize,
    history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EncoderModel<f32>,
    pub history: Vec<f64>,
    pub checkpoint: Checkpoint,
}

impl Trainer {
    pub fn new(model: EncoderModel<f32>, config: TrainConfig, init_seed: u64) -> Result<Self> {
        config.validate()?;
        let n = model.params().len();
        Ok(Trainer {
            model,
            adam: AdamState::new(n),
            config,
            init_seed,
            epoch: 0,
            history: Vec::new(),
        })
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        c.config.validate()?;
        let model = c.model()?;
        Ok(Trainer {
            model,
            adam: c.adam,
            config: c.config,
            init_seed: c.init_seed,
            epoch: c.epoch,
            history: c.history,
        })
    }

    pub fn model(&self) -> &EncoderModel<f32> {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Replaces the target epoch count, e.g. to extend a finished run.
    pub fn set_epochs(&mut self, epochs: usize) {
        self.config.epochs = epochs;
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            architecture: self.model.architecture().clone(),
            config: self.config.clone(),
            epoch: self.epoch,
            init_seed: self.init_seed,
            adam: self.adam.clone(),
            params: self.model.params().to_vec(),
            history: self.history.clone(),
        }
    }

    /// One clipped Adam step on a batch; returns the batch loss before the
    /// update.
    pub fn step(&mut self, images: &[&InputImage], labels: &[NormalizedParams]) -> Result<f64> {
        let (loss, mut grad) = self.model.loss_and_gradient(images, labels)?;
        let loss = loss as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged("non-finite loss".into()));
        }
        let norm = grad.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Diverged("non-finite gradient".into()));
        }
        if norm > self.config.clip_norm {
            let s = (self.config.clip_norm / norm) as f32;
            grad.iter_mut().for_each(|g| *g *= s);
        }
        self.adam.update(self.model.params_mut(), &grad, &self.config);
        Ok(loss)
    }

    /// Trains one epoch over a shuffled order and records its mean loss.
    pub fn run_epoch(&mut self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let order = data.epoch_order(derive_seed(self.config.seed, self.epoch as u64));
        let mut total = 0.0;
        for (b, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let images: Vec<&InputImage> = chunk.iter().map(|&i| data.image(i)).collect();
            let labels: Vec<NormalizedParams> = chunk.iter().map(|&i| data.label(i)).collect();
            let loss = self.step(&images, &labels).map_err(|e| match e {
                Error::Diverged(m) => Error::Diverged(format!("{m} at epoch {}, batch {b}", self.epoch + 1)),
                other => other,
            })?;
            total += loss * chunk.len() as f64;
        }
        let mean = total / data.len() as f64;
        self.epoch += 1;
        self.history.push(mean);
        Ok(mean)
    }

    /// Runs until the configured epoch count, writing checkpoints at the
    /// configured cadence and after the last epoch.
    pub fn run(&mut self, data: &Dataset, checkpoint_path: Option<&Path>) -> Result<()> {
        while self.epoch < self.config.epochs {
            let loss = self.run_epoch(data)?;
            log::info!("epoch {} loss {loss:.6}", self.epoch);
            let cadence = self.config.checkpoint_every;
            let due = self.epoch == self.config.epochs || (cadence > 0 && self.epoch % cadence == 0);
            if let (Some(path), true) = (checkpoint_path, due) {
                save_checkpoint(&self.checkpoint(), path)?;
            }
        }
        Ok(())
    }
}

/// Trains a fresh trainer around `model` for `config.epochs` epochs.
pub fn train(
    model: EncoderModel<f32>,
    data: &Dataset,
    config: &TrainConfig,
    init_seed: u64,
    checkpoint_path: Option<&Path>,
) -> Result<TrainOutcome> {
    let mut t = Trainer::new(model, config.clone(), init_seed)?;
    t.run(data, checkpoint_path)?;
    Ok(TrainOutcome {
        checkpoint: t.checkpoint(),
        history: t.history.clone(),
        model: t.model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ckpt() -> Checkpoint {
        let arch = Architecture {
            widths: vec![2, 3],
            ..Architecture::standard(8)
        };
        let model = EncoderModel::<f32>::new(arch, 4).unwrap();
        let mut t = Trainer::new(model, TrainConfig::desk(), 4).unwrap();
        t.adam.step = 7;
        t.adam.m.iter_mut().enumerate().for_each(|(i, m)| *m = i as f32 * 0.5);
        t.history = vec![0.5, 0.25];
        t.epoch = 2;
        t.checkpoint()
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = ckpt();
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let bytes = ckpt().to_bytes();
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(Checkpoint::from_bytes(&flipped).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 5]).is_err());
        assert!(Checkpoint::from_bytes(b"nonsense").is_err());
    }

    #[test]
    fn presets() {
        let p = TrainConfig::full();
        assert_eq!((p.epochs, p.batch_size, p.learning_rate), (400, 32, 1e-6));
        let d = TrainConfig::desk();
        assert_eq!((d.epochs, d.batch_size, d.learning_rate), (100, 32, 1e-3));
        assert!(TrainConfig { epochs: 0, ..p }.validate().is_err());
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = TrainConfig { learning_rate: 0.1, ..TrainConfig::desk() };
        let mut a = AdamState::new(2);
        let mut p = [1.0f32, 1.0];
        a.update(&mut p, &[3.0, -0.5], &cfg);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] - 1.1).abs() < 1e-6);
    }
}
