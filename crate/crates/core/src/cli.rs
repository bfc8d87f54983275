//! Command-line front end. `main` only parses and calls [`run`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;
use serde::Serialize;

use crate::analytics::{angle_matrix, pgd_attack, NullSpaceMode, PgdConfig, ProbeOptions, StepRule, WalkOptions};
use crate::data::{load_mnist_dir, make_spiral, Dataset, SpiralSpec};
use crate::error::{Error, Result};
use crate::io::{load_model, save_json_precise, save_model};
use crate::network::NetworkModel;
use crate::polytope::{insphere, remove_redundant};
use crate::region::extract_region;
use crate::render::{histogram, rasterize, render, render_matrix, HistogramSeries, ImageFormat, RenderStyle, SlicePlane};
use crate::sweep::{run_sweep, write_report, AnalysisSet, AnalyzeConfig, ClassTargets};
use crate::train::{evaluate, train_with_progress, TrainConfig, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const THREADS_ENV: &str = "REGIONLAB_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "regionlab", version, about = "Train ReLU networks and analyze their linear regions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Train a model and write its JSON, history CSV and config echo.
    Train(TrainArgs),
    /// Run the per-point region sweep and write point and aggregate reports.
    Analyze(AnalyzeArgs),
    /// Export the region containing one point.
    Region(RegionArgs),
    /// Render region and class maps on a 2D slice of input space.
    Slice(SliceArgs),
    /// Run PGD on test points and report the outcomes.
    Attack(AttackArgs),
    /// Pairwise constraint-normal angles of one region.
    Angles(AnglesArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Use the synthetic two-class spiral.
    #[arg(long, conflicts_with = "mnist")]
    pub spiral: bool,
    /// Directory holding the four MNIST IDX files (optionally gzipped).
    #[arg(long, value_name = "DIR")]
    pub mnist: Option<PathBuf>,
    /// Seed of the spiral training set; the test set uses this plus 1000.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 500)]
    pub spiral_points: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spiral_turns: f64,
    #[arg(long, default_value_t = 0.0)]
    pub spiral_noise: f64,
}

impl DataArgs {
    pub fn load(&self, train: bool) -> Result<Dataset> {
        if let Some(dir) = &self.mnist {
            return load_mnist_dir(dir, train);
        }
        if !self.spiral {
            return Err(Error::Config("pass --spiral or --mnist DIR".into()));
        }
        Ok(make_spiral(&SpiralSpec {
            points_per_class: self.spiral_points,
            turns: self.spiral_turns,
            noise_std: self.spiral_noise,
            seed: if train { self.data_seed } else { self.data_seed.wrapping_add(1000) },
        }))
    }

    fn name(&self) -> &'static str {
        if self.mnist.is_some() {
            "mnist"
        } else {
            "spiral"
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    #[arg(long, default_value = "run")]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads, 0 for one per core. REGIONLAB_THREADS overrides.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "vanilla")]
    pub variant: String,
    /// Comma-separated hidden widths; default 10,10,10 on the spiral and 1024,1024,1024 otherwise.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    /// Base name of the output files; default `<dataset>_<variant>`.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PgdArgs {
    /// L-infinity attack radius.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// PGD step size.
    #[arg(long, default_value_t = 0.01)]
    pub pgd_steps: f64,
    #[arg(long, default_value_t = 40)]
    pub pgd_iters: usize,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
}

impl PgdArgs {
    fn config(&self, seed: u64) -> PgdConfig {
        PgdConfig {
            eps: self.eps,
            step: self.pgd_steps,
            iters: self.pgd_iters,
            restarts: self.restarts,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Model JSON files; each gets its own report files.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Remove redundant constraints before the insphere LP.
    #[arg(long)]
    pub reduce: bool,
    /// Comma-separated analyses to skip: insphere, probes, decision, adversarial, surround.
    #[arg(long, default_value = "")]
    pub skip: String,
    #[command(flatten)]
    pub pgd: PgdArgs,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon_ray: f64,
    #[arg(long, default_value_t = 100)]
    pub directions: usize,
    #[arg(long, default_value_t = 10_000)]
    pub resolution: usize,
    /// Null-space mode for ray directions: logits or differences; chosen by shape when absent.
    #[arg(long)]
    pub null_space: Option<String>,
    #[arg(long, default_value_t = 1e-6)]
    pub probe_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub probe_iters: usize,
    /// Use the open-loop step rule in class probes.
    #[arg(long)]
    pub open_loop: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegionArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Test-set index of the generating point.
    #[arg(long, conflicts_with = "point")]
    pub point_id: Option<usize>,
    /// Literal generating point, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub point: Option<Vec<f64>>,
    #[arg(long)]
    pub reduce: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SliceArgs {
    /// Model JSON files rendered on the same plane.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// The plane spanned by the two input axes of a 2D model.
    #[arg(long, conflicts_with = "points")]
    pub toy2d: bool,
    /// Three test-set indices spanning the plane.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub points: Option<Vec<usize>>,
    /// Fraction of the point span added on each side of the plane.
    #[arg(long, default_value_t = 0.25)]
    pub margin: f64,
    #[arg(long, default_value_t = 400)]
    pub resolution: usize,
    #[arg(long, default_value = "ppm")]
    pub format: String,
    /// Comma-separated styles: regions, classes.
    #[arg(long, value_delimiter = ',', default_value = "regions,classes")]
    pub styles: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AttackArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[command(flatten)]
    pub pgd: PgdArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnglesArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 0)]
    pub point_id: usize,
    #[arg(long, default_value = "ppm")]
    pub format: String,
}

fn model_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    match stem.strip_prefix("model_") {
        Some(rest) if !rest.is_empty() => rest.to_string(),
        _ => stem,
    }
}

fn thread_count(requested: usize) -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(requested)
}

fn prepare(run: &RunArgs, cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&run.output_dir)?;
    let threads = thread_count(run.threads);
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    save_json_precise(&run.output_dir.join("config.json"), cli)
}

fn test_point(data: &Dataset, id: usize) -> Result<Array1<f64>> {
    if id >= data.len() {
        return Err(Error::IndexOutOfRange(format!("point {id} of {}", data.len())));
    }
    Ok(data.point(id))
}

pub fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let variant: Variant = args.variant.parse()?;
    let mut cfg = if args.data.mnist.is_some() {
        TrainConfig {
            variant,
            seed: args.run.seed,
            ..TrainConfig::default()
        }
    } else {
        TrainConfig::spiral(variant, args.run.seed)
    };
    if let Some(h) = &args.hidden {
        cfg.hidden_widths = h.clone();
    }
    if let Some(v) = args.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = args.patience {
        cfg.patience = v;
    }
    if let Some(v) = args.dropout_rate {
        cfg.dropout_rate = v;
    }
    let train_set = args.data.load(true)?;
    let test_set = args.data.load(false)?;
    let start = Instant::now();
    let (model, history) = train_with_progress(&cfg, &train_set, |r| {
        log::info!(
            "epoch {} train loss {:.4} acc {:.4} val loss {:.4} acc {:.4}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.val_loss,
            r.val_accuracy
        );
    })?;
    let seconds = start.elapsed().as_secs_f64();
    let (loss, acc) = evaluate(&model, &test_set)?;
    let name = args
        .name
        .clone()
        .unwrap_or_else(|| format!("{}_{}", args.data.name(), variant.name()));
    let dir = &args.run.output_dir;
    save_model(&dir.join(format!("model_{name}.json")), &model)?;
    let mut w = csv::Writer::from_path(dir.join(format!("history_{name}.csv")))?;
    for r in &history.epochs {
        w.serialize(r)?;
    }
    w.flush()?;
    println!(
        "{name}: test accuracy {:.2}% (loss {loss:.4}), best epoch {}, {seconds:.1}s",
        100.0 * acc,
        history.best_epoch
    );
    Ok(EXIT_OK)
}

pub fn analyze_config(args: &AnalyzeArgs) -> Result<AnalyzeConfig> {
    let null_space = match args.null_space.as_deref() {
        None => None,
        Some("logits") => Some(NullSpaceMode::Logits),
        Some("differences") => Some(NullSpaceMode::Differences),
        Some(other) => return Err(Error::Config(format!("unknown null-space mode {other:?}"))),
    };
    Ok(AnalyzeConfig {
        points: args.points,
        seed: args.run.seed,
        reduce: args.reduce,
        analyses: args.skip.parse::<AnalysisSet>()?,
        probe: ProbeOptions {
            tol: args.probe_tol,
            max_iters: args.probe_iters,
            rule: if args.open_loop { StepRule::OpenLoop } else { StepRule::AwayStep },
        },
        pgd: args.pgd.config(args.run.seed),
        interpolation_resolution: args.resolution,
        directions: args.directions,
        epsilon_ray: args.epsilon_ray,
        walk: WalkOptions::default(),
        null_space,
    })
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32> {
    let cfg = analyze_config(args)?;
    let train_set = args.data.load(true)?;
    let test_set = args.data.load(false)?;
    let mut partial = false;
    for path in &args.models {
        let model = load_model(path)?;
        let name = model_name(path);
        let targets = ClassTargets::new(&model, &train_set)?;
        let start = Instant::now();
        let report = run_sweep(&name, &model, &test_set, &targets, &cfg);
        write_report(&args.run.output_dir, &report)?;
        let a = &report.aggregate;
        let mean = |s: &Option<crate::sweep::Stats>| s.map(|s| format!("{:.4}", s.mean)).unwrap_or("-".into());
        println!(
            "{name}: {} points, {} with errors, mean inradius {}, mean class regions {}, mean distortion {}, {:.1}s",
            a.points,
            a.failed_points,
            mean(&a.manifold_inradius),
            mean(&a.class_region_count),
            mean(&a.distortion),
            start.elapsed().as_secs_f64()
        );
        let rho: Vec<f64> = report.records.iter().flat_map(|r| r.relevance.iter().copied()).collect();
        if !rho.is_empty() {
            let svg = histogram(&[HistogramSeries { label: name.clone(), values: rho }], 40, Some((-1.0, 1.0)), true);
            std::fs::write(args.run.output_dir.join(format!("relevance_{name}.svg")), svg)?;
        }
        partial |= a.failed_points > 0;
    }
    Ok(if partial { EXIT_PARTIAL } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct RegionSummaryFile {
    constraint_count: usize,
    total_inequalities: usize,
    retained: Option<usize>,
    inradius: f64,
    center: Vec<f64>,
}

pub fn cmd_region(args: &RegionArgs) -> Result<i32> {
    let model = load_model(&args.model)?;
    let x = match (&args.point, args.point_id) {
        (Some(p), _) => Array1::from(p.clone()),
        (None, Some(id)) => test_point(&args.data.load(false)?, id)?,
        (None, None) => return Err(Error::Config("pass --point-id or --point".into())),
    };
    if x.len() != model.input_dim() {
        return Err(Error::InputShape {
            expected: model.input_dim(),
            got: x.len(),
        });
    }
    if !model.in_bounds(x.view(), 0.0) {
        return Err(Error::OutOfBounds);
    }
    let system = extract_region(&model, x.view())?;
    let name = model_name(&args.model);
    let dir = &args.run.output_dir;
    save_json_precise(&dir.join(format!("region_{name}.json")), &system.to_file())?;
    let (measured, retained) = if args.reduce {
        let (reduced, _) = remove_redundant(&system)?;
        save_json_precise(&dir.join(format!("region_{name}_reduced.json")), &reduced.to_file())?;
        let n = reduced.len();
        (reduced, Some(n))
    } else {
        (system.clone(), None)
    };
    let ball = insphere(&measured)?;
    println!(
        "{name}: {} node constraints, {} inequalities with the box{}, inradius {:.6e}",
        system.len(),
        system.total_inequalities(),
        retained.map(|n| format!(", {n} retained")).unwrap_or_default(),
        ball.inradius
    );
    save_json_precise(
        &dir.join(format!("region_{name}_summary.json")),
        &RegionSummaryFile {
            constraint_count: system.len(),
            total_inequalities: system.total_inequalities(),
            retained,
            inradius: ball.inradius,
            center: ball.center,
        },
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_slice(args: &SliceArgs) -> Result<i32> {
    let format: ImageFormat = args.format.parse()?;
    let styles = args
        .styles
        .iter()
        .map(|s| s.parse::<RenderStyle>())
        .collect::<Result<Vec<_>>>()?;
    let models = args.models.iter().map(|p| load_model(p)).collect::<Result<Vec<NetworkModel>>>()?;
    let res = (args.resolution, args.resolution);
    let plane = match (&args.points, args.toy2d) {
        (_, true) => {
            if models[0].input_dim() != 2 {
                return Err(Error::Config("--toy2d needs a two-input model".into()));
            }
            SlicePlane::toy2d(models[0].input_bounds(), res)
        }
        (Some(ids), false) => {
            if ids.len() != 3 {
                return Err(Error::Config(format!("--points needs three ids, got {}", ids.len())));
            }
            let data = args.data.load(false)?;
            let p = ids.iter().map(|&i| test_point(&data, i)).collect::<Result<Vec<_>>>()?;
            SlicePlane::through_points(p[0].view(), p[1].view(), p[2].view(), args.margin, res)?
        }
        (None, false) => return Err(Error::Config("pass --toy2d or --points i,j,k".into())),
    };
    let dir = &args.run.output_dir;
    save_json_precise(&dir.join("plane.json"), &plane)?;
    for (path, model) in args.models.iter().zip(&models) {
        let name = model_name(path);
        let raster = rasterize(model, &plane)?;
        for &style in &styles {
            let prefix = match style {
                RenderStyle::Regions => "regions",
                RenderStyle::Classes => "classes",
            };
            std::fs::write(
                dir.join(format!("{prefix}_{name}.{}", format.extension())),
                render(&raster, style, format),
            )?;
        }
        println!("{name}: {} unique regions on the slice", raster.unique_regions());
    }
    Ok(EXIT_OK)
}

pub fn cmd_attack(args: &AttackArgs) -> Result<i32> {
    let model = load_model(&args.model)?;
    let data = args.data.load(false)?;
    let name = model_name(&args.model);
    let indices = crate::sweep::sample_indices(data.len(), args.points, args.run.seed);
    let (lo, hi) = model.input_bounds();
    let mut w = csv::Writer::from_path(args.run.output_dir.join(format!("attack_{name}.csv")))?;
    w.write_record(["point_id", "dataset_index", "label", "adversarial_class", "success", "loss", "linf"])?;
    let mut failures = 0usize;
    let mut successes = 0usize;
    for (id, &i) in indices.iter().enumerate() {
        let x = data.point(i);
        let cfg = args.pgd.config(args.run.seed.wrapping_add(id as u64));
        match pgd_attack(&model, x.view(), data.labels[i], &cfg) {
            Ok(out) => {
                let linf = (&out.x_adv - &x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                debug_assert!(out.x_adv.iter().all(|v| (lo..=hi).contains(v)));
                successes += out.success as usize;
                w.write_record([
                    id.to_string(),
                    i.to_string(),
                    data.labels[i].to_string(),
                    model.classify(out.x_adv.view())?.to_string(),
                    out.success.to_string(),
                    out.loss.to_string(),
                    linf.to_string(),
                ])?;
            }
            Err(e) => {
                failures += 1;
                log::warn!("point {id}: {e}");
            }
        }
    }
    w.flush()?;
    println!("{name}: {successes} of {} attacks succeeded", indices.len() - failures);
    Ok(if failures > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

pub fn cmd_angles(args: &AnglesArgs) -> Result<i32> {
    let format: ImageFormat = args.format.parse()?;
    let model = load_model(&args.model)?;
    let x = test_point(&args.data.load(false)?, args.point_id)?;
    let system = extract_region(&model, x.view())?;
    let angles = angle_matrix(&system);
    let name = model_name(&args.model);
    let dir = &args.run.output_dir;
    save_json_precise(&dir.join(format!("angles_{name}.json")), &angles)?;
    save_json_precise(&dir.join(format!("angles_{name}_blocks.json")), &angles.layer_block_means())?;
    std::fs::write(
        dir.join(format!("angles_{name}.{}", format.extension())),
        render_matrix(&angles.degrees, 0.0, 180.0, format),
    )?;
    println!("{name}: {} constraints, {} dead", angles.len(), angles.dead.len());
    Ok(EXIT_OK)
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Train(a) => {
            prepare(&a.run, cli)?;
            cmd_train(a)
        }
        Command::Analyze(a) => {
            prepare(&a.run, cli)?;
            cmd_analyze(a)
        }
        Command::Region(a) => {
            prepare(&a.run, cli)?;
            cmd_region(a)
        }
        Command::Slice(a) => {
            prepare(&a.run, cli)?;
            cmd_slice(a)
        }
        Command::Attack(a) => {
            prepare(&a.run, cli)?;
            cmd_attack(a)
        }
        Command::Angles(a) => {
            prepare(&a.run, cli)?;
            cmd_angles(a)
        }
    }
}

/// Parses `args` and runs the command, mapping errors to exit code 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FATAL
        }
    }
}
