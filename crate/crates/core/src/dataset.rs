//! Synthetic training corpora of rendered swatches and their parameters.
//!
//! A dataset directory holds `manifest.header.json` (render settings and
//! seeds), `manifest.jsonl` (one record per image) and `images/%08d.png`.
//! Item `i` is fully determined by the base seed and `i`, so generation can
//! resume after an interruption and any record can be re-rendered alone.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use image::RgbImage;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::InputImage;
use crate::error::{Error, Result};
use crate::geometry::{StrandSet, SwatchConfig};
use crate::params::{HairParams, NormalizedParams};
use crate::render::presets::{
    DEFAULT_MAX_DEPTH, DEFAULT_RESOLUTION, DEFAULT_SPP, SWATCH_AZIMUTH, SWATCH_CAMERA_RADIUS_MM,
    SWATCH_INCLINATION,
};
use crate::render::{
    preset_swatch_scene, read_rgb, tonemap, write_png, GeometrySpec, Scene, SceneParams, EXPOSURE,
};
use crate::rng::{derive_seed, rng_from_seed, substream};

pub const HEADER_FILE: &str = "manifest.header.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const IMAGE_DIR: &str = "images";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Bumped whenever the renderer's output for the same settings changes, so
/// stale images are never resumed into a dataset.
pub const RENDER_REVISION: u32 = 2;

/// Everything besides the per-item seed that affects an image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub width: u32,
    pub height: u32,
    pub spp: u32,
    pub max_depth: u32,
    pub exposure: f64,
    pub geometry: GeometrySpec,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            width: DEFAULT_RESOLUTION,
            height: DEFAULT_RESOLUTION,
            spp: DEFAULT_SPP,
            max_depth: DEFAULT_MAX_DEPTH,
            exposure: EXPOSURE,
            geometry: GeometrySpec::Swatch(SwatchConfig::default()),
        }
    }
}

impl RenderSettings {
    /// 64x64 pixels at 32 samples per pixel.
    pub fn desk() -> Self {
        RenderSettings {
            width: 64,
            height: 64,
            spp: 32,
            ..Self::default()
        }
    }

    /// Hex SHA-256 of the settings, the code version and the render revision.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(CODE_VERSION.as_bytes());
        h.update(RENDER_REVISION.to_le_bytes());
        h.update(serde_json::to_vec(self).expect("settings serialize"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The swatch scene for one item.
    pub fn scene(&self, scene_seed: u64) -> SceneParams {
        let mut s = preset_swatch_scene(scene_seed);
        s.width = self.width;
        s.height = self.height;
        s.spp = self.spp;
        s.max_depth = self.max_depth;
        s.geometry = self.geometry.clone();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRanges {
    pub radius_mm: f64,
    pub inclination: (f64, f64),
    pub azimuth: (f64, f64),
}

impl Default for CameraRanges {
    fn default() -> Self {
        CameraRanges {
            radius_mm: SWATCH_CAMERA_RADIUS_MM,
            inclination: SWATCH_INCLINATION,
            azimuth: SWATCH_AZIMUTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: String,
    pub base_seed: u64,
    pub n: usize,
    pub settings: RenderSettings,
    pub settings_hash: String,
    pub camera: CameraRanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub index: usize,
    /// Relative to the dataset directory.
    pub image_path: String,
    pub params: HairParams,
    pub scene_seed: u64,
    pub settings_hash: String,
}

/// Seed and hair parameters of item `index`.
pub fn plan_item(base_seed: u64, index: usize) -> (u64, HairParams) {
    let scene_seed = derive_seed(base_seed, index as u64);
    let h = HairParams::sample(&mut substream(scene_seed, 2));
    (scene_seed, h)
}

pub fn image_name(index: usize) -> String {
    format!("{IMAGE_DIR}/{index:08}.png")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    root: PathBuf,
    header: DatasetHeader,
    records: Vec<DatasetRecord>,
}

fn read_header(dir: &Path) -> Result<DatasetHeader> {
    let path = dir.join(HEADER_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Parses manifest rows, skipping lines that do not decode (such as a line
/// cut short by an interrupted run).
fn read_rows(dir: &Path) -> Result<Vec<DatasetRecord>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DatasetRecord>(line) {
            Ok(r) => rows.push(r),
            Err(e) => log::warn!("{}:{}: skipping unreadable row: {e}", path.display(), i + 1),
        }
    }
    Ok(rows)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl DatasetManifest {
    /// Opens a dataset from its directory or either manifest file.
    pub fn load(path: &Path) -> Result<Self> {
        let root = if path.is_dir() {
            path.to_path_buf()
        } else {
            path.parent().map(Path::to_path_buf).unwrap_or_default()
        };
        if !root.join(HEADER_FILE).exists() {
            return Err(Error::Config(format!("{} holds no dataset header", root.display())));
        }
        let header = read_header(&root)?;
        let mut records = read_rows(&root)?;
        records.sort_by_key(|r| r.index);
        records.dedup_by_key(|r| r.index);
        for r in &records {
            if r.settings_hash != header.settings_hash {
                return Err(Error::Load {
                    record: r.image_path.clone(),
                    message: "settings hash differs from the dataset header".into(),
                });
            }
        }
        Ok(DatasetManifest { root, header, records })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn records(&self) -> &[DatasetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn image_path(&self, r: &DatasetRecord) -> PathBuf {
        self.root.join(&r.image_path)
    }

    pub fn scene(&self, r: &DatasetRecord) -> SceneParams {
        self.header.settings.scene(r.scene_seed)
    }

    fn manifest_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r).expect("record serializes");
            out.push(b'\n');
        }
        out
    }

    /// Writes header and rows (sorted by index) into the dataset directory.
    pub fn save(&self) -> Result<()> {
        let header = serde_json::to_vec_pretty(&self.header)?;
        write_atomic(&self.root.join(HEADER_FILE), &header)?;
        write_atomic(&self.root.join(MANIFEST_FILE), &self.manifest_bytes())
    }

    /// Same header, only the given records, still resolved against this
    /// dataset's directory.
    pub fn subset(&self, indices: &[usize]) -> DatasetManifest {
        DatasetManifest {
            root: self.root.clone(),
            header: DatasetHeader {
                n: indices.len(),
                ..self.header.clone()
            },
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Copies the referenced images into `dir` and writes a standalone
    /// dataset there.
    pub fn export(&self, dir: &Path) -> Result<DatasetManifest> {
        let images = dir.join(IMAGE_DIR);
        std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
        for r in &self.records {
            let dst = dir.join(&r.image_path);
            std::fs::copy(self.image_path(r), &dst).map_err(|e| Error::io(&dst, e))?;
        }
        let out = DatasetManifest {
            root: dir.to_path_buf(),
            header: DatasetHeader {
                n: self.records.len(),
                ..self.header.clone()
            },
            records: self.records.clone(),
        };
        out.save()?;
        Ok(out)
    }

    /// Re-renders one record from its seed and the dataset settings.
    pub fn render_record(&self, r: &DatasetRecord, strands: Option<&std::sync::Arc<StrandSet>>) -> Result<RgbImage> {
        render_item(&self.header.settings, r.scene_seed, &r.params, strands)
    }
}

/// Renders and tonemaps one swatch image.
pub fn render_item(
    settings: &RenderSettings,
    scene_seed: u64,
    h: &HairParams,
    strands: Option<&std::sync::Arc<StrandSet>>,
) -> Result<RgbImage> {
    let params = settings.scene(scene_seed);
    let scene = match strands {
        Some(s) => Scene::with_strands(params, s.clone())?,
        None => Scene::new(params)?,
    };
    let (img, stats) = scene.render(h, 0);
    if stats.nonfinite_samples > 0 {
        log::warn!("{} non-finite samples clamped", stats.nonfinite_samples);
    }
    Ok(tonemap(&img, settings.exposure))
}

/// Renders `n` items into `out_dir`, reusing rows already present. Items
/// render in parallel on `threads` workers (zero: all cores); finished rows
/// are appended by one writer as they complete, and the manifest is
/// rewritten in index order at the end.
pub fn generate_dataset(
    n: usize,
    base_seed: u64,
    out_dir: &Path,
    settings: &RenderSettings,
    threads: usize,
) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let images = out_dir.join(IMAGE_DIR);
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let settings_hash = settings.hash();
    let header_path = out_dir.join(HEADER_FILE);
    if header_path.exists() {
        let old = read_header(out_dir)?;
        if old.settings_hash != settings_hash || old.base_seed != base_seed {
            return Err(Error::Config(format!(
                "{} already holds a dataset with different settings or seed",
                out_dir.display()
            )));
        }
    }
    let header = DatasetHeader {
        version: CODE_VERSION.to_string(),
        base_seed,
        n,
        settings: settings.clone(),
        settings_hash: settings_hash.clone(),
        camera: CameraRanges::default(),
    };
    write_atomic(&header_path, &serde_json::to_vec_pretty(&header)?)?;

    let mut done: Vec<DatasetRecord> = read_rows(out_dir)?
        .into_iter()
        .filter(|r| {
            let (seed, h) = plan_item(base_seed, r.index);
            r.index < n
                && r.settings_hash == settings_hash
                && r.scene_seed == seed
                && r.params == h
                && r.image_path == image_name(r.index)
                && out_dir.join(&r.image_path).exists()
        })
        .collect();
    done.sort_by_key(|r| r.index);
    done.dedup_by_key(|r| r.index);
    let mut manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        header,
        records: done,
    };
    // Drop invalid rows before appending new ones.
    manifest.save()?;
    let have: std::collections::HashSet<usize> = manifest.records.iter().map(|r| r.index).collect();
    let todo: Vec<usize> = (0..n).filter(|i| !have.contains(i)).collect();
    if todo.is_empty() {
        return Ok(manifest);
    }
    log::info!("rendering {} of {n} items", todo.len());

    let strands = std::sync::Arc::new(settings.geometry.build()?);
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let (tx, rx) = mpsc::channel::<DatasetRecord>();
    let writer = {
        let path = manifest_path.clone();
        std::thread::spawn(move || -> Result<Vec<DatasetRecord>> {
            let mut file = OpenOptions::new()
                .append(true)
                .create(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            let mut written = Vec::new();
            for r in rx {
                let mut line = serde_json::to_vec(&r)?;
                line.push(b'\n');
                file.write_all(&line).and_then(|_| file.flush()).map_err(|e| Error::io(&path, e))?;
                written.push(r);
            }
            Ok(written)
        })
    };

    let work = || -> Result<()> {
        todo.par_iter().try_for_each_with(tx, |tx, &i| {
            let (scene_seed, h) = plan_item(base_seed, i);
            let img = render_item(settings, scene_seed, &h, Some(&strands))?;
            let rel = image_name(i);
            let path = out_dir.join(&rel);
            let tmp = path.with_extension("png.tmp");
            img.save_with_format(&tmp, image::ImageFormat::Png).map_err(|e| Error::Image {
                path: tmp.clone(),
                message: e.to_string(),
            })?;
            std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
            let record = DatasetRecord {
                index: i,
                image_path: rel,
                params: h,
                scene_seed,
                settings_hash: settings_hash.clone(),
            };
            tx.send(record).map_err(|_| Error::Config("manifest writer stopped".into()))
        })
    };
    let result = if threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)
    };
    let written = writer.join().expect("manifest writer panicked")?;
    result?;
    manifest.records.extend(written);
    manifest.records.sort_by_key(|r| r.index);
    manifest.save()?;
    Ok(manifest)
}

/// Decoded images with normalized labels, held in memory.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    images: Vec<InputImage>,
    labels: Vec<NormalizedParams>,
}

impl Dataset {
    pub fn from_samples(samples: Vec<(InputImage, NormalizedParams)>) -> Self {
        let (images, labels) = samples.into_iter().unzip();
        Dataset { images, labels }
    }

    pub fn from_manifest(m: &DatasetManifest) -> Result<Self> {
        let images = m
            .records
            .par_iter()
            .map(|r| {
                let path = m.image_path(r);
                let img = read_rgb(&path).map_err(|e| Error::Load {
                    record: r.image_path.clone(),
                    message: e.to_string(),
                })?;
                if img.width() != m.header.settings.width || img.height() != m.header.settings.height {
                    return Err(Error::Load {
                        record: r.image_path.clone(),
                        message: format!("image is {}x{}", img.width(), img.height()),
                    });
                }
                Ok(InputImage::from_rgb8(&img))
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = m.records.iter().map(|r| r.params.normalize()).collect();
        Ok(Dataset { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, i: usize) -> &InputImage {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> NormalizedParams {
        self.labels[i]
    }

    /// A permutation of all indices, fixed by `seed`.
    pub fn epoch_order(&self, seed: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut rng_from_seed(seed));
        order
    }

    pub fn iter_epoch(&self, seed: u64) -> impl Iterator<Item = (&InputImage, NormalizedParams)> + '_ {
        self.epoch_order(seed).into_iter().map(move |i| (&self.images[i], self.labels[i]))
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_manifest(&DatasetManifest::load(path)?)
}

/// Disjoint train, validation and test subsets covering the manifest.
/// Counts are rounded for the first two parts; the test part takes the
/// remainder.
pub fn split(
    m: &DatasetManifest,
    fractions: [f64; 3],
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest)> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be in [0, 1] and sum to 1")));
    }
    let n = m.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let mut parts = [
        order[..n_train].to_vec(),
        order[n_train..n_train + n_val].to_vec(),
        order[n_train + n_val..].to_vec(),
    ];
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok((m.subset(&parts[0]), m.subset(&parts[1]), m.subset(&parts[2])))
}

pub fn write_image(img: &RgbImage, path: &Path) -> Result<()> {
    write_png(img, path)
}
