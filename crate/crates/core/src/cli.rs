//! Command-line front end. Every subcommand is deterministic for a fixed
//! `--seed`; exit status is 0 on success, 2 for usage or configuration
//! errors and 3 for failures while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{generate_dataset, load_dataset, DatasetManifest, RenderSettings};
use crate::encoder::{
    digitize_file, load_checkpoint, save_checkpoint, write_loss_csv, Architecture, EncoderModel, TrainConfig,
    Trainer,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_roundtrip, Estimator};
use crate::params::HairParams;
use crate::render::{
    preset_portrait_scene, preset_swatch_scene, tonemap, write_png, PortraitStyle, Scene, SceneParams, EXPOSURE,
};

#[derive(Debug, Parser)]
#[command(name = "hairdigi", version, about = "Hair color rendering, training and digitization")]
pub struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render hair with given color parameters.
    Render(RenderArgs),
    /// Generate a synthetic swatch dataset.
    Dataset(DatasetArgs),
    /// Train the encoder on a dataset.
    Train(TrainArgs),
    /// Estimate color parameters from an image.
    Digitize(DigitizeArgs),
    /// Round-trip evaluation on a test dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Parameter file, or inline `key=value,...` record.
    #[arg(long)]
    pub params: String,
    /// swatch | portrait-straight | hair-model PATH
    #[arg(long, num_args = 1..=2, default_values_t = ["swatch".to_string()])]
    pub scene: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Resolution as WxH or a single size.
    #[arg(long, value_parser = parse_res)]
    pub res: Option<(u32, u32)>,
    #[arg(long)]
    pub spp: Option<u32>,
    /// Also write the linear image as PFM next to the PNG.
    #[arg(long)]
    pub hdr: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_res)]
    pub res: Option<(u32, u32)>,
    #[arg(long)]
    pub spp: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Full,
    Desk,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults for epochs, batch size and learning rate.
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    pub preset: Preset,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Continue from the checkpoint at --out.
    #[arg(long)]
    pub resume: bool,
    /// Per-epoch loss CSV; defaults to the checkpoint path with a .csv extension.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DigitizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Parameter file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Re-render the estimate: swatch | portrait-straight | hair-model PATH
    #[arg(long, num_args = 1..=2)]
    pub rerender: Option<Vec<String>>,
    /// PNG for --rerender; defaults to --out with a .png extension.
    #[arg(long)]
    pub rerender_out: Option<PathBuf>,
    #[arg(long, value_parser = parse_res)]
    pub res: Option<(u32, u32)>,
    #[arg(long)]
    pub spp: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint path, or `oracle` / `random`.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub test: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_res(s: &str) -> std::result::Result<(u32, u32), String> {
    let (w, h) = match s.split_once(['x', 'X']) {
        Some((w, h)) => (w, h),
        None => (s, s),
    };
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    if w == 0 || h == 0 {
        return Err("resolution must be positive".into());
    }
    Ok((w, h))
}

/// Exit status for an error: 2 when the input was wrong, 3 when running failed.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Range { .. }
        | Error::Parse(_)
        | Error::Format { .. }
        | Error::Dimension(_)
        | Error::Config(_)
        | Error::Checkpoint(_) => 2,
        Error::Load { .. } | Error::Diverged(_) | Error::Io { .. } | Error::Image { .. } | Error::Json(_) => 3,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Render(a) => cmd_render(cli, a),
        Command::Dataset(a) => cmd_dataset(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Digitize(a) => cmd_digitize(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
    }
}

fn read_params(arg: &str) -> Result<HairParams> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        HairParams::parse_record(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    } else if arg.contains('=') {
        HairParams::parse_record(arg)
    } else {
        Err(Error::Config(format!("parameter file {arg} does not exist")))
    }
}

fn scene_for(spec: &[String], seed: u64, res: Option<(u32, u32)>, spp: Option<u32>) -> Result<SceneParams> {
    let mut s = match spec {
        [k] if k == "swatch" => preset_swatch_scene(seed),
        [k] if k == "portrait-straight" => preset_portrait_scene(&PortraitStyle::Straight, seed)?,
        [k, path] if k == "hair-model" => preset_portrait_scene(&PortraitStyle::HairModel(path.into()), seed)?,
        _ => {
            return Err(Error::Config(format!(
                "unknown scene `{}`; expected swatch, portrait-straight or hair-model PATH",
                spec.join(" ")
            )))
        }
    };
    if let Some((w, h)) = res {
        s.width = w;
        s.height = h;
    }
    if let Some(n) = spp {
        s.spp = n;
    }
    s.validate()?;
    Ok(s)
}

fn render_to(h: &HairParams, params: SceneParams, out: &Path, hdr: bool, threads: usize, verbose: bool) -> Result<()> {
    let scene = Scene::new(params)?;
    let (img, stats) = scene.render(h, threads);
    write_png(&tonemap(&img, EXPOSURE), out)?;
    if hdr {
        img.write_pfm(&out.with_extension("pfm"))?;
    }
    if verbose {
        println!("{}", serde_json::to_string(&stats)?);
    }
    Ok(())
}

fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

fn cmd_render(cli: &Cli, a: &RenderArgs) -> Result<()> {
    let h = read_params(&a.params)?;
    let params = scene_for(&a.scene, cli.seed, a.res, a.spp)?;
    render_to(&h, params, &a.out, a.hdr, cli.threads, cli.verbose)
}

fn cmd_dataset(cli: &Cli, a: &DatasetArgs) -> Result<()> {
    let mut settings = RenderSettings::default();
    if let Some((w, h)) = a.res {
        settings.width = w;
        settings.height = h;
    }
    if let Some(n) = a.spp {
        settings.spp = n;
    }
    if settings.spp == 0 {
        return Err(Error::Config("spp must be positive".into()));
    }
    let m = generate_dataset(a.n, cli.seed, &a.out, &settings, cli.threads)?;
    log::info!("{} records in {}", m.len(), a.out.display());
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut config = match a.preset {
        Preset::Full => TrainConfig::full(),
        Preset::Desk => TrainConfig::desk(),
    };
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(b) = a.batch {
        config.batch_size = b;
    }
    if let Some(lr) = a.lr {
        config.learning_rate = lr;
    }
    config.seed = cli.seed;
    config.validate()?;
    let manifest = DatasetManifest::load(&a.data)?;
    let (w, h) = (manifest.header().settings.width, manifest.header().settings.height);
    if w != h {
        return Err(Error::Config(format!("training images must be square, dataset is {w}x{h}")));
    }
    let mut trainer = if a.resume {
        let mut t = Trainer::from_checkpoint(load_checkpoint(&a.out)?)?;
        if t.model().architecture().input_width != w as usize {
            return Err(Error::Config("checkpoint input size differs from the dataset".into()));
        }
        t.set_epochs(config.epochs);
        t
    } else {
        let model = EncoderModel::<f32>::new(Architecture::standard(w as usize), cli.seed)?;
        Trainer::new(model, config, cli.seed)?
    };
    let data = with_pool(cli.threads, || load_dataset(&a.data))??;
    with_pool(cli.threads, || trainer.run(&data, Some(&a.out)))??;
    // A resumed run that had nothing left to do still leaves a checkpoint.
    if !a.out.exists() {
        save_checkpoint(&trainer.checkpoint(), &a.out)?;
    }
    let csv = a.loss_csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    write_loss_csv(trainer.history(), &csv)?;
    if let Some(last) = trainer.history().last() {
        log::info!("final epoch loss {last:.6}");
    }
    Ok(())
}

fn cmd_digitize(cli: &Cli, a: &DigitizeArgs) -> Result<()> {
    let model = load_checkpoint(&a.model)?.model()?;
    if !a.image.exists() {
        return Err(Error::Config(format!("image {} does not exist", a.image.display())));
    }
    let h = with_pool(cli.threads, || digitize_file(&model, &a.image))??;
    std::fs::write(&a.out, h.to_record()).map_err(|e| Error::io(&a.out, e))?;
    if let Some(spec) = &a.rerender {
        let params = scene_for(spec, cli.seed, a.res, a.spp)?;
        let out = a.rerender_out.clone().unwrap_or_else(|| a.out.with_extension("png"));
        render_to(&h, params, &out, false, cli.threads, cli.verbose)?;
    }
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&a.test)?;
    let checkpoint;
    let model;
    let estimator = match a.model.as_str() {
        "oracle" => Estimator::Oracle,
        "random" => Estimator::Random { seed: cli.seed },
        path => {
            checkpoint = load_checkpoint(Path::new(path))?;
            model = checkpoint.model()?;
            Estimator::Model(&model)
        }
    };
    let report = evaluate_roundtrip(&estimator, &manifest, &a.model, cli.threads)?;
    std::fs::write(&a.out, report.to_json()?).map_err(|e| Error::io(&a.out, e))?;
    print!("{}", report.table());
    Ok(())
}
