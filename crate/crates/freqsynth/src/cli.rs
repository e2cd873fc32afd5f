//! The `freqsynth` command.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use freqsynth_core::evaluation::{error_map, evaluate, EvalConfig, DEFAULT_T_AIR, DEFAULT_T_BONE};
use freqsynth_core::frequency::{decompose, GaussianSpec};
use freqsynth_core::inference::{default_stride, plan_windows, predict_volume};
use freqsynth_core::network::{kernel_elements_per_pair, param_count, Arrangement, HeadKind, Init, SynthesisModel};
use freqsynth_core::synthetic::GeneratorSpec;
use freqsynth_core::training::{prepare_pair, train, EpochRecord, TrainConfig, TrainObserver};
use freqsynth_core::volume::{denormalize_ct, normalize_mr};
use freqsynth_core::{DomainTag, HuRange, Volume};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{apply_setting, format_config, read_config};
use crate::curve::write_curve;
use crate::error::{Error, Result};
use crate::fsv::{read_volume, write_volume};
use crate::manifest::{generate_dataset, Manifest};
use crate::pgm::write_slice_windowed;
use crate::provenance::{sibling, Provenance};
use crate::report::{csv_header, csv_row, format_report, write_report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "freqsynth", version, about = "Frequency-supervised MR to CT synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic paired MR/CT volumes and a manifest.
    GenData(GenDataArgs),
    /// Split a CT volume into low and high frequency bands.
    Decompose(DecomposeArgs),
    /// Train a synthesis model on a manifest.
    Train(TrainArgs),
    /// Synthesize a CT volume from an MR volume.
    Infer(InferArgs),
    /// Compare a synthetic CT against ground truth.
    Eval(EvalArgs),
    /// Print the weight count of a receptive-field arrangement.
    ParamCount(ParamCountArgs),
    /// Write PGM slices of prediction, ground truth and error map.
    ExportSlices(ExportArgs),
}

fn parse_triple(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("invalid extent {p:?}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [n] => Ok([n; 3]),
        [d, h, w] => Ok([d, h, w]),
        _ => Err(format!("expected d,h,w or a single value, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Volume extents as d,h,w.
    #[arg(long, value_parser = parse_triple, default_value = "24,24,24")]
    pub dims: [usize; 3],
    #[arg(long)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_blobs: Option<usize>,
    #[arg(long)]
    pub shell_contrast: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Gaussian sigma in voxels.
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Output directory (defaults to the input's directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub adversarial: bool,
    /// Train the base network with the overall L1 loss only.
    #[arg(long)]
    pub baseline: bool,
    /// Save a checkpoint every N epochs (0 disables).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Start from the parameters of an existing checkpoint.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// MR volume (raw or normalized).
    #[arg(long)]
    pub input: PathBuf,
    /// Output CT volume in HU.
    #[arg(long)]
    pub out: PathBuf,
    /// Window extents (default 16 per axis, capped at the volume size).
    #[arg(long, value_parser = parse_triple)]
    pub window: Option<[usize; 3]>,
    /// Window stride (default half the window).
    #[arg(long, value_parser = parse_triple)]
    pub stride: Option<[usize; 3]>,
    /// Also write the low and high band predictions in HU.
    #[arg(long)]
    pub emit_bands: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Synthetic CT in HU.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth CT in HU.
    #[arg(long)]
    pub gt: PathBuf,
    /// Report file (`key = value`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV file receiving a header and one row.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub label: String,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_T_AIR, allow_hyphen_values = true)]
    pub t_air: f64,
    #[arg(long, default_value_t = DEFAULT_T_BONE, allow_hyphen_values = true)]
    pub t_bone: f64,
}

#[derive(Debug, Args)]
pub struct ParamCountArgs {
    /// stack3d, large-kernel or factorized.
    #[arg(long)]
    pub arrangement: String,
    #[arg(long, default_value_t = 1)]
    pub layers: u64,
    #[arg(long)]
    pub channels: u64,
    #[arg(long)]
    pub k: u64,
    /// Print factorized and dense kernel elements per channel pair instead.
    #[arg(long)]
    pub per_pair: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Axial slice indices (default: the middle slice).
    #[arg(long, value_delimiter = ',')]
    pub slices: Vec<usize>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            EXIT_RUNTIME
        }
    }
}

pub fn execute(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a, argv),
        Command::Decompose(a) => decompose_cmd(a, argv),
        Command::Train(a) => train_cmd(a, argv),
        Command::Infer(a) => infer(a, argv),
        Command::Eval(a) => eval(a, argv),
        Command::ParamCount(a) => param_count_cmd(a),
        Command::ExportSlices(a) => export_slices(a, argv),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn gen_data(a: GenDataArgs, argv: &[String]) -> Result<()> {
    let mut spec = GeneratorSpec::new(a.dims, a.seed);
    if let Some(n) = a.n_blobs {
        spec.n_blobs = n;
    }
    if let Some(c) = a.shell_contrast {
        spec.shell_contrast = c;
    }
    if let Some(s) = a.noise_sigma {
        spec.noise_sigma = s;
    }
    let manifest = generate_dataset(&spec, a.pairs, &a.out)?;
    let mut p = Provenance::new("gen-data", argv);
    p.push("dims", format!("{},{},{}", a.dims[0], a.dims[1], a.dims[2]))
        .push("pairs", a.pairs)
        .push("seed", a.seed)
        .push("n_blobs", spec.n_blobs)
        .push("shell_contrast", spec.shell_contrast)
        .push("noise_sigma", spec.noise_sigma);
    p.write_in(&a.out)?;
    println!("wrote {} pairs to {}", manifest.len(), a.out.display());
    Ok(())
}

fn decompose_cmd(a: DecomposeArgs, argv: &[String]) -> Result<()> {
    let v = read_volume(&a.input)?;
    let spec = GaussianSpec::new(a.sigma)?;
    let bands = decompose(&v, &spec).map_err(|e| Error::from(e).context(a.input.display().to_string()))?;
    let base = match &a.out_dir {
        Some(d) => {
            create_dir(d)?;
            d.join(a.input.file_name().unwrap_or_default())
        }
        None => a.input.clone(),
    };
    let low = sibling(&base, "low.fsv");
    let high = sibling(&base, "high.fsv");
    write_volume(&bands.low, &low)?;
    write_volume(&bands.high, &high)?;
    let mut p = Provenance::new("decompose", argv);
    p.push("input", a.input.display())
        .push("sigma", spec.sigma)
        .push("radius", spec.radius);
    p.write_beside(&base, "decompose")?;
    println!("{}\n{}", low.display(), high.display());
    Ok(())
}

/// Per-epoch progress output and periodic checkpoints.
struct Progress<'a> {
    out: &'a Path,
    every: usize,
    quiet: bool,
    log_every: usize,
    error: Option<Error>,
}

impl TrainObserver for Progress<'_> {
    fn on_epoch(&mut self, r: &EpochRecord, model: &SynthesisModel<f32>) {
        if !self.quiet && (r.epoch % self.log_every == 0 || r.epoch == 1) {
            eprintln!(
                "epoch {:>5}  total {:.6}  high {:.6}  overall {:.6}  adv {:.6}",
                r.epoch, r.loss_total, r.loss_high, r.loss_overall, r.loss_adv
            );
        }
        if self.every > 0 && r.epoch % self.every == 0 && self.error.is_none() {
            let path = self.out.join(format!("epoch_{:05}.fsc", r.epoch));
            if let Err(e) = save_checkpoint(model, None, &path) {
                self.error = Some(e);
            }
        }
    }
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => read_config(p)?,
        None => TrainConfig::default(),
    };
    for s in &a.overrides {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| freqsynth_core::Error::Argument(format!("--set expects KEY=VALUE, got {s:?}")))?;
        apply_setting(&mut cfg, k.trim(), v.trim()).map_err(freqsynth_core::Error::Argument)?;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.adversarial {
        cfg.adversarial = true;
    }
    if a.baseline {
        cfg.head = HeadKind::OverallOnly;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_cmd(a: TrainArgs, argv: &[String]) -> Result<()> {
    let cfg = train_config(&a)?;
    let manifest = Manifest::read(&a.manifest)?;
    let range = HuRange::default();
    let spec = cfg.gaussian()?;
    let dataset = manifest
        .load_pairs()?
        .iter()
        .zip(&manifest.entries)
        .map(|((mr, ct), e)| {
            prepare_pair(mr, ct, &range, &spec)
                .map_err(|err| Error::from(err).context(format!("pair {}", e.index)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = match &a.init {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            if *ck.model.config() != cfg.model_config() {
                return Err(freqsynth_core::Error::Argument(format!(
                    "{} holds a different network configuration than the training config",
                    path.display()
                ))
                .into());
            }
            ck.model
        }
        None => SynthesisModel::new(cfg.model_config(), Init::He { seed: cfg.seed })?,
    };
    create_dir(&a.out)?;
    let mut progress = Progress {
        out: &a.out,
        every: a.checkpoint_every,
        quiet: a.quiet,
        log_every: (cfg.epochs / 20).max(1),
        error: None,
    };
    let outcome = train(&mut model, &dataset, &cfg, &mut progress)?;
    if let Some(e) = progress.error {
        return Err(e);
    }
    save_checkpoint(&model, outcome.discriminator.as_ref(), &a.out.join("model.fsc"))?;
    write_curve(&outcome.curve, &a.out.join("loss.csv"))?;
    let cfg_text = format_config(&cfg);
    let cfg_path = a.out.join("config.txt");
    fs::write(&cfg_path, &cfg_text).map_err(|e| Error::io(&cfg_path, e))?;
    let mut p = Provenance::new("train", argv);
    p.push("manifest", a.manifest.display())
        .push("pairs", dataset.len())
        .push("head", if cfg.head == HeadKind::OverallOnly { "overall-only" } else { "frequency-supervised" })
        .push_block("config", &cfg_text);
    p.write_in(&a.out)?;
    if let Some(last) = outcome.curve.last() {
        println!(
            "trained {} epochs on {} pairs; final loss {} (high {}, overall {})",
            last.epoch,
            dataset.len(),
            last.loss_total,
            last.loss_high,
            last.loss_overall
        );
    }
    Ok(())
}

/// Band volume in HU: the low band carries the offset, the high band only
/// the scale.
fn band_to_hu(v: &Volume, range: &HuRange, offset: bool) -> Result<Volume> {
    let w = range.width();
    let min = if offset { range.min_hu } else { 0.0 };
    let data = v.data().iter().map(|&x| (x as f64 * w + min) as f32).collect();
    Ok(v.with_data(data, v.tag())?)
}

fn infer(a: InferArgs, argv: &[String]) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let input = read_volume(&a.input)?;
    let mr = match input.tag() {
        DomainTag::MrRaw => normalize_mr(&input)?,
        DomainTag::MrNorm => input,
        t => {
            return Err(freqsynth_core::Error::Domain { expected: "MR_RAW or MR_NORM", found: t.name() }.into())
        }
    };
    let dims = mr.dims();
    let window = a.window.unwrap_or([16.min(dims[0]), 16.min(dims[1]), 16.min(dims[2])]);
    let stride = a.stride.unwrap_or_else(|| default_stride(window));
    let plan = plan_windows(dims, window, stride)?;
    let out = predict_volume(&ck.model, &mr, &plan)?;
    let range = HuRange::default();
    write_volume(&denormalize_ct(&out.ct, &range)?, &a.out)?;
    let mut written = vec![a.out.clone()];
    if a.emit_bands {
        for (band, name, offset) in [(&out.low, "low.fsv", true), (&out.high, "high.fsv", false)] {
            let band = band.as_ref().ok_or_else(|| {
                freqsynth_core::Error::Unsupported("this model has no frequency bands".into())
            })?;
            let path = sibling(&a.out, name);
            write_volume(&band_to_hu(band, &range, offset)?, &path)?;
            written.push(path);
        }
    }
    let mut p = Provenance::new("infer", argv);
    p.push("checkpoint", a.checkpoint.display())
        .push("input", a.input.display())
        .push("window", format!("{},{},{}", window[0], window[1], window[2]))
        .push("stride", format!("{},{},{}", stride[0], stride[1], stride[2]))
        .push("windows", plan.origins().len())
        .push("clamped", out.clamped);
    p.write_beside(&a.out, "infer")?;
    for w in written {
        println!("{}", w.display());
    }
    if out.clamped > 0 {
        eprintln!("note: {} voxels clamped into the HU range", out.clamped);
    }
    Ok(())
}

fn eval(a: EvalArgs, argv: &[String]) -> Result<()> {
    let pred = read_volume(&a.pred)?;
    let gt = read_volume(&a.gt)?;
    let cfg = EvalConfig { sigma: a.sigma, t_air: a.t_air, t_bone: a.t_bone, ..EvalConfig::default() };
    let mut report = evaluate(&pred, &gt, &cfg)?;
    report.provenance = vec![
        ("tool".into(), crate::provenance::TOOL.into()),
        ("pred".into(), a.pred.display().to_string()),
        ("gt".into(), a.gt.display().to_string()),
        ("sigma".into(), a.sigma.to_string()),
        ("t_air".into(), a.t_air.to_string()),
        ("t_bone".into(), a.t_bone.to_string()),
    ];
    print!("{}", format_report(&report));
    let mut p = Provenance::new("eval", argv);
    p.push("pred", a.pred.display()).push("gt", a.gt.display());
    if let Some(out) = &a.out {
        write_report(&report, out)?;
        p.write_beside(out, "eval")?;
    }
    if let Some(csv) = &a.csv {
        let text = format!("{}\n{}\n", csv_header(), csv_row(&a.label, &report));
        fs::write(csv, text).map_err(|e| Error::io(csv, e))?;
        p.write_beside(csv, "eval")?;
    }
    Ok(())
}

fn param_count_cmd(a: ParamCountArgs) -> Result<()> {
    let arrangement = Arrangement::parse(&a.arrangement)?;
    if a.per_pair {
        let (fact, dense) = kernel_elements_per_pair(a.k);
        println!("{fact} {dense}");
    } else {
        println!("{}", param_count(arrangement, a.layers, a.channels, a.k)?);
    }
    Ok(())
}

fn export_slices(a: ExportArgs, argv: &[String]) -> Result<()> {
    let pred = read_volume(&a.pred)?;
    let gt = read_volume(&a.gt)?;
    let err = error_map(&pred, &gt)?;
    let depth = pred.dims()[0];
    let slices = if a.slices.is_empty() { vec![depth / 2] } else { a.slices.clone() };
    if let Some(&z) = slices.iter().find(|&&z| z >= depth) {
        return Err(freqsynth_core::Error::Argument(format!("slice {z} out of range (depth {depth})")).into());
    }
    create_dir(&a.out_dir)?;
    let (pl, ph) = pred.min_max();
    let (gl, gh) = gt.min_max();
    let (lo, hi) = (pl.min(gl), ph.max(gh));
    let (el, eh) = err.min_max();
    for &z in &slices {
        write_slice_windowed(&pred, z, lo, hi, &a.out_dir.join(format!("pred_z{z:03}.pgm")))?;
        write_slice_windowed(&gt, z, lo, hi, &a.out_dir.join(format!("gt_z{z:03}.pgm")))?;
        write_slice_windowed(&err, z, el, eh, &a.out_dir.join(format!("error_z{z:03}.pgm")))?;
    }
    let mut p = Provenance::new("export-slices", argv);
    p.push("pred", a.pred.display())
        .push("gt", a.gt.display())
        .push("slices", slices.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
        .push("window", format!("{lo},{hi}"))
        .push("error_window", format!("{el},{eh}"));
    p.write_in(&a.out_dir)?;
    println!("wrote {} slices to {}", slices.len(), a.out_dir.display());
    Ok(())
}
