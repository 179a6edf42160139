//! The `fingait` command line. Every command that writes files also writes
//! a manifest with the resolved flags and sha256 checksums of its inputs and
//! outputs.

mod config;
mod manifest;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use config::{expand_config, parse_config};
pub use manifest::{manifest_path, Artifact, Manifest};

use crate::datagen::{
    experiment_grid, holdout_split, is_holdout, load_dataset, persist_traces, resolve_trace_ref, run_experiment,
    save_dataset, DatasetRow, GaitRun,
};
use crate::error::{Error, Result};
use crate::fom::{fom_sweep, write_contour_csv, FomConfig, FomSource, SliceSpec, VelocityMode};
use crate::gait::{Gait, Material};
use crate::plant::PlantParams;
use crate::search::{run_search, Algorithm, BruteGrid, ModelPair, SearchRequest, WeightVector, DEFAULT_DEADLINE_S};
use crate::sim::{
    gen_requests, simulate, trade_off_curve, weight_sweep, write_records_csv, write_sweep_csv, write_tradeoff_csv,
    ScriptKind, SimConfig, DEFAULT_REQUESTS,
};
use crate::surrogate::{
    bench_inference, evaluate, fit_feedforward, fit_polynomial_with, fit_sequence, interpolate_grid, load_model,
    save_model, FeedforwardConfig, ForwardModel, GridResolution, PlantModel, PolyFitOptions, Predictor,
    SequenceConfig, SequenceSample, Target,
};
use crate::trace::{load_trace, DEFAULT_SAMPLES_PER_CYCLE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Default root for outputs whose path is not given.
pub const DATA_DIR_ENV: &str = "FIN_GAIT_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "fingait", version, about = "Flapping-fin gait surrogates and inverse gait search")]
pub struct Cli {
    /// key = value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the synthetic experiment grid and write a dataset CSV.
    Datagen(DatagenArgs),
    /// Fit a forward model to a dataset.
    Train(TrainArgs),
    /// Mean absolute error of a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Predict thrust and power over a dense grid.
    Interpolate(InterpolateArgs),
    /// Single-threaded inference throughput.
    Bench(BenchArgs),
    /// Figure of merit over a 2-D slice.
    FomSweep(FomSweepArgs),
    /// One inverse gait search.
    Search(SearchArgs),
    /// Closed-loop simulation over a request script.
    Simulate(SimulateArgs),
    /// Simulations over the weight simplex.
    Sweep(SweepArgs),
    /// Simulations along the thrust/power weight line.
    Tradeoff(TradeoffArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Linear,
    Quartic,
    Ff,
    Seq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// Train on the interpolation split, stop early on the held-out rows.
    Holdout,
    /// Train on every row.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSet {
    All,
    Train,
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceChoice {
    Plant,
    Models,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityChoice {
    Unit,
    TipSpeed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatagenArgs {
    /// Material name, or `all`.
    #[arg(long)]
    pub material: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write one post-processed trace per gait here.
    #[arg(long)]
    pub traces_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_CYCLE)]
    pub samples_per_cycle: usize,
    /// Plant parameter file.
    #[arg(long)]
    pub plant: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelChoice,
    #[arg(long)]
    pub target: Target,
    /// Required when the dataset holds more than one material.
    #[arg(long)]
    pub material: Option<Material>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Split::Holdout)]
    pub split: Split,
    /// Fail on a rank-deficient polynomial basis instead of pruning it.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = RowSet::All)]
    pub rows: RowSet,
    /// Also write the report here, with a manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub thrust: PathBuf,
    #[arg(long)]
    pub power: PathBuf,
    /// `fine`, `coarse`, or four steps `f,stroke,pitch,spo`.
    #[arg(long, default_value = "fine")]
    pub resolution: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub thrust_model: Option<PathBuf>,
    #[arg(long)]
    pub power_model: Option<PathBuf>,
    /// Use the plant surfaces as perfect models.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub material: Option<Material>,
    #[arg(long)]
    pub plant: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FomSweepArgs {
    #[arg(long, value_enum, default_value_t = SourceChoice::Plant)]
    pub source: SourceChoice,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long, default_value = "f=2,spo=0")]
    pub fix: String,
    #[arg(long, default_value = "stroke,pitch")]
    pub vary: String,
    #[arg(long, value_enum, default_value_t = VelocityChoice::TipSpeed)]
    pub velocity: VelocityChoice,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long, default_value = "f=1,stroke=30,pitch=30,spo=0")]
    pub current: String,
    #[arg(long, allow_negative_numbers = true)]
    pub target: f64,
    #[arg(long, default_value = "1,0,0")]
    pub weights: String,
    #[arg(long, default_value = "gps")]
    pub algo: Algorithm,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_DEADLINE_S)]
    pub deadline: f64,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Brute-force grid: `fine`, `coarse` or four steps.
    #[arg(long, default_value = "coarse")]
    pub grid: String,
    /// Also write the result here, with a manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LoopArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long, default_value = "normal")]
    pub script: ScriptKind,
    #[arg(long, default_value_t = DEFAULT_REQUESTS)]
    pub requests: usize,
    /// Request-script seed; defaults to `--seed`.
    #[arg(long)]
    pub script_seed: Option<u64>,
    #[arg(long, default_value = "gps")]
    pub algo: Algorithm,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_DEADLINE_S)]
    pub deadline: f64,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Realize outcomes from sampled plant traces.
    #[arg(long)]
    pub noisy: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: LoopArgs,
    #[arg(long, default_value = "1,0,0")]
    pub weights: String,
    /// Fill the per-cycle elapsed column and write timing.json. Timed
    /// outputs are not reproducible byte for byte.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: LoopArgs,
    #[arg(long, default_value_t = 0.05)]
    pub increment: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub run: LoopArgs,
    /// Comma-separated thrust weights; defaults to 0, 0.05, ..., 1.
    #[arg(long)]
    pub wt_grid: Option<String>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let args = match expand_config(&Cli::command(), args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("fingait: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.jobs == 0 {
        eprintln!("fingait: --jobs must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("fingait: thread pool: {e}");
            return EXIT_INTERNAL;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("fingait: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::Config(_) => EXIT_USAGE,
        Error::RankDeficient { .. }
        | Error::ModelFormat { .. }
        | Error::Data { .. }
        | Error::Io { .. }
        | Error::Csv(_) => EXIT_DATA,
        Error::Training { .. } => EXIT_INTERNAL,
        Error::Simulation { source, .. } => exit_code(source),
    }
}

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Datagen(a) => cmd_datagen(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Interpolate(a) => cmd_interpolate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::FomSweep(a) => cmd_fom_sweep(a),
        Command::Search(a) => cmd_search(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Tradeoff(a) => cmd_tradeoff(a),
    }
}

fn output_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn out_or(path: &Option<PathBuf>, default: impl AsRef<Path>) -> PathBuf {
    path.clone().unwrap_or_else(|| output_root().join(default))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        None => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn load_plant(path: &Option<PathBuf>, manifest: &mut Manifest) -> Result<PlantParams> {
    match path {
        Some(p) => {
            manifest.input(p)?;
            PlantParams::load(p)
        }
        None => Ok(PlantParams::default()),
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::config(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        // a closed reader (`| head`) is not a failure of the command
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(|e| Error::io("<stdout>", e)),
    }
}

fn parse_resolution(spec: &str) -> Result<GridResolution> {
    if !spec.contains(',') {
        return GridResolution::preset(spec);
    }
    let v: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::input(format!("resolution '{spec}' is not four numbers")))?;
    let [step_freq, step_stroke, step_pitch, step_spo] = v[..] else {
        return Err(Error::input(format!("resolution '{spec}' needs four steps")));
    };
    let res = GridResolution {
        step_freq,
        step_stroke,
        step_pitch,
        step_spo,
    };
    res.validate()?;
    Ok(res)
}

fn parse_materials(s: &str) -> Result<Vec<Material>> {
    if s.trim().eq_ignore_ascii_case("all") {
        Ok(Material::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

fn cmd_datagen(a: &DatagenArgs) -> Result<()> {
    let mut manifest = Manifest::new("datagen", a)?;
    let materials = parse_materials(&a.material)?;
    let plant = load_plant(&a.plant, &mut manifest)?;
    let default_name = match materials[..] {
        [m] => format!("dataset_{}.csv", m.key()),
        _ => "dataset_all.csv".to_string(),
    };
    let out = out_or(&a.out, default_name);
    let grid = experiment_grid();
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for m in materials {
        let mut runs = run_experiment(&grid, m, &plant, a.seed, a.samples_per_cycle)?;
        if let Some(dir) = &a.traces_dir {
            persist_traces(&mut runs, dir)?;
            traces.extend(runs.iter().filter_map(|r| r.row.trace_ref.as_ref().map(PathBuf::from)));
        }
        rows.extend(runs.into_iter().map(|r| r.row));
    }
    ensure_parent(&out)?;
    save_dataset(&rows, &out)?;
    manifest.output(&out)?;
    if !traces.is_empty() {
        manifest.outputs.push(Artifact::group("traces", &traces)?);
    }
    manifest.write(&manifest_path(&out))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn rows_for(path: &Path, material: Option<Material>) -> Result<(Vec<DatasetRow>, Material)> {
    let rows = load_dataset(path)?;
    let m = match material {
        Some(m) => m,
        None => {
            let first = rows
                .first()
                .ok_or_else(|| Error::data(path, "dataset is empty"))?
                .material;
            if rows.iter().any(|r| r.material != first) {
                return Err(Error::input("dataset holds several materials; pass --material"));
            }
            first
        }
    };
    let rows: Vec<DatasetRow> = rows.into_iter().filter(|r| r.material == m).collect();
    if rows.is_empty() {
        return Err(Error::data(path, format!("no rows for {}", m.name())));
    }
    Ok((rows, m))
}

fn sequence_samples(rows: &[DatasetRow], data: &Path, traces: &mut Vec<PathBuf>) -> Result<Vec<SequenceSample>> {
    rows.iter()
        .map(|row| {
            let r = row.trace_ref.as_deref().ok_or_else(|| {
                Error::data(data, "sequence training needs traces; run datagen with --traces-dir")
            })?;
            let path = resolve_trace_ref(r, data);
            let trace = load_trace(&path)?;
            traces.push(path);
            SequenceSample::from_run(&GaitRun { row: row.clone(), trace })
        })
        .collect()
}

#[derive(Serialize)]
struct TrainReport {
    kind: String,
    target: Target,
    material: Material,
    train_rows: usize,
    holdout_rows: usize,
    train_mae: Option<f64>,
    holdout_mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs_run: Option<usize>,
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let mut manifest = Manifest::new("train", a)?;
    manifest.input(&a.data)?;
    let (rows, material) = rows_for(&a.data, a.material)?;
    let (train, hold) = match a.split {
        Split::Holdout => holdout_split(&rows),
        Split::None => (rows.clone(), Vec::new()),
    };
    if train.is_empty() {
        return Err(Error::data(&a.data, "no training rows after the split"));
    }
    let hold_opt = (!hold.is_empty()).then_some(&hold[..]);
    let poly_opts = if a.strict {
        PolyFitOptions::default()
    } else {
        PolyFitOptions::prune()
    };
    let mut epochs_run = None;
    let mut model: ForwardModel = match a.model {
        ModelChoice::Linear => fit_polynomial_with(&train, 1, a.target, &poly_opts)?,
        ModelChoice::Quartic => fit_polynomial_with(&train, 4, a.target, &poly_opts)?,
        ModelChoice::Ff => {
            let mut cfg = FeedforwardConfig::default();
            if let Some(e) = a.epochs {
                cfg.epochs = e;
            }
            if let Some(p) = a.patience {
                cfg.patience = p;
            }
            fit_feedforward(&train, hold_opt, &cfg, a.target, a.seed)?
        }
        ModelChoice::Seq => {
            let mut cfg = SequenceConfig::default();
            if let Some(e) = a.epochs {
                cfg.epochs = e;
            }
            if let Some(p) = a.patience {
                cfg.patience = p;
            }
            let mut traces = Vec::new();
            let train_s = sequence_samples(&train, &a.data, &mut traces)?;
            let hold_s = sequence_samples(&hold, &a.data, &mut traces)?;
            manifest.inputs.push(Artifact::group("traces", &traces)?);
            let hold_s = (!hold_s.is_empty()).then_some(&hold_s[..]);
            let fit = fit_sequence(&train_s, hold_s, &cfg, a.seed)?;
            epochs_run = Some(fit.epochs_run);
            fit.model.retarget(a.target)?
        }
    };
    if let Some(h) = hold_opt {
        model.holdout_mae = Some(evaluate(&model, h)?.mae);
    }
    let out = out_or(&a.out, format!("{}_{}_{}.model", model.kind(), a.target, material.key()));
    save_model(&model, &out)?;
    manifest.output(&out)?;
    manifest.write(&manifest_path(&out))?;
    print_json(&TrainReport {
        kind: model.kind().to_string(),
        target: a.target,
        material,
        train_rows: train.len(),
        holdout_rows: hold.len(),
        train_mae: model.train_mae,
        holdout_mae: model.holdout_mae,
        epochs_run,
    })
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut manifest = Manifest::new("evaluate", a)?;
    manifest.input(&a.model)?;
    manifest.input(&a.data)?;
    let model = load_model(&a.model, None)?;
    let (rows, _) = rows_for(&a.data, Some(model.material()))?;
    let rows: Vec<DatasetRow> = match a.rows {
        RowSet::All => rows,
        RowSet::Train => rows.into_iter().filter(|r| !is_holdout(&r.gait)).collect(),
        RowSet::Holdout => rows.into_iter().filter(|r| is_holdout(&r.gait)).collect(),
    };
    let report = evaluate(&model, &rows)?;
    if let Some(out) = &a.out {
        ensure_parent(out)?;
        manifest::write_json(&report, out)?;
        manifest.output(out)?;
        manifest.write(&manifest_path(out))?;
    }
    print_json(&report)
}

fn cmd_interpolate(a: &InterpolateArgs) -> Result<()> {
    let mut manifest = Manifest::new("interpolate", a)?;
    manifest.input(&a.thrust)?;
    manifest.input(&a.power)?;
    let thrust = load_role(&a.thrust, Target::Thrust)?;
    let power = load_role(&a.power, Target::Power)?;
    let res = parse_resolution(&a.resolution)?;
    let out = out_or(&a.out, "grid.csv");
    let n = interpolate_grid(&thrust, &power, &res, create(&out)?)?;
    manifest.output(&out)?;
    manifest.write(&manifest_path(&out))?;
    eprintln!("wrote {n} grid rows to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct BenchOutput {
    kind: String,
    target: Target,
    material: Material,
    predictions: u64,
    elapsed_s: f64,
    per_second: f64,
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    if !(a.seconds > 0.0 && a.seconds.is_finite()) {
        return Err(Error::input("--seconds must be positive"));
    }
    let model = load_model(&a.model, None)?;
    let r = bench_inference(&model, Duration::from_secs_f64(a.seconds));
    print_json(&BenchOutput {
        kind: model.kind().to_string(),
        target: model.target(),
        material: model.material(),
        predictions: r.predictions,
        elapsed_s: r.elapsed_s,
        per_second: r.per_second,
    })
}

/// Loads a model for `target`. A sequence model trained for the other
/// target answers for this one through its second head.
fn load_role(path: &Path, target: Target) -> Result<ForwardModel> {
    let m = load_model(path, None)?;
    if m.target() == target {
        return Ok(m);
    }
    m.retarget(target).map_err(|e| Error::ModelFormat {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn load_models(a: &ModelArgs, manifest: &mut Manifest) -> Result<(Box<dyn Predictor>, Box<dyn Predictor>, PlantParams)> {
    let plant = load_plant(&a.plant, manifest)?;
    if a.oracle {
        if a.thrust_model.is_some() || a.power_model.is_some() {
            return Err(Error::input("--oracle excludes --thrust-model and --power-model"));
        }
        let m = a
            .material
            .ok_or_else(|| Error::input("--oracle needs --material"))?;
        return Ok((
            Box::new(PlantModel::new(m, Target::Thrust, plant.clone())),
            Box::new(PlantModel::new(m, Target::Power, plant.clone())),
            plant,
        ));
    }
    let (Some(tp), Some(pp)) = (&a.thrust_model, &a.power_model) else {
        return Err(Error::input("missing --thrust-model and --power-model (or --oracle)"));
    };
    manifest.input(tp)?;
    manifest.input(pp)?;
    let t = load_role(tp, Target::Thrust)?;
    let p = load_role(pp, Target::Power)?;
    if let Some(m) = a.material {
        if t.material() != m {
            return Err(Error::config(format!("models are for {}, not {}", t.material().name(), m.name())));
        }
    }
    Ok((Box::new(t), Box::new(p), plant))
}

fn cmd_fom_sweep(a: &FomSweepArgs) -> Result<()> {
    let mut manifest = Manifest::new("fom-sweep", a)?;
    let slice = SliceSpec::parse(&a.fix, &a.vary)?;
    let cfg = FomConfig {
        velocity_mode: match a.velocity {
            VelocityChoice::Unit => VelocityMode::Unit,
            VelocityChoice::TipSpeed => VelocityMode::TipSpeed,
        },
        ..FomConfig::default()
    };
    let rows = match a.source {
        SourceChoice::Plant => {
            let m = a
                .models
                .material
                .ok_or_else(|| Error::input("missing --material"))?;
            let plant = load_plant(&a.models.plant, &mut manifest)?;
            fom_sweep(&FomSource::Plant { material: m, params: &plant }, &slice, &cfg)?
        }
        SourceChoice::Models => {
            let (t, p, _) = load_models(&a.models, &mut manifest)?;
            crate::surrogate::check_pair(t.as_ref(), p.as_ref())?;
            fom_sweep(
                &FomSource::Models {
                    thrust: t.as_ref(),
                    power: p.as_ref(),
                },
                &slice,
                &cfg,
            )?
        }
    };
    let out = out_or(&a.out, "contour.csv");
    write_contour_csv(&rows, create(&out)?)?;
    manifest.output(&out)?;
    manifest.write(&manifest_path(&out))?;
    eprintln!("wrote {} contour rows to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_search(a: &SearchArgs) -> Result<()> {
    let mut manifest = Manifest::new("search", a)?;
    let (t, p, _) = load_models(&a.models, &mut manifest)?;
    let pair = ModelPair::new(t.as_ref(), p.as_ref())?;
    let current: Gait = a.current.parse()?;
    let weights: WeightVector = a.weights.parse()?;
    let mut req = SearchRequest::new(current, a.target, weights, pair.material(), a.seed);
    req.deadline_s = a.deadline;
    req.eval_budget = a.budget;
    let grid = match a.algo {
        Algorithm::Brute => Some(BruteGrid::from_resolution(&parse_resolution(&a.grid)?)),
        _ => None,
    };
    let result = run_search(a.algo, &req, &pair, grid.as_ref())?;
    if let Some(out) = &a.out {
        ensure_parent(out)?;
        manifest::write_json(&result, out)?;
        manifest.output(out)?;
        manifest.write(&manifest_path(out))?;
    }
    print_json(&result)
}

struct Loop {
    script: crate::sim::RequestScript,
    cfg: SimConfig,
    thrust: Box<dyn Predictor>,
    power: Box<dyn Predictor>,
    plant: PlantParams,
    out_dir: PathBuf,
}

fn prepare_loop(a: &LoopArgs, name: &str, weights: WeightVector, manifest: &mut Manifest) -> Result<Loop> {
    let (thrust, power, plant) = load_models(&a.models, manifest)?;
    let material = crate::surrogate::check_pair(thrust.as_ref(), power.as_ref())?;
    let script = gen_requests(a.script, a.requests, a.script_seed.unwrap_or(a.seed))?;
    let mut cfg = SimConfig::new(weights, material, a.algo, a.seed);
    cfg.deadline_s = a.deadline;
    cfg.eval_budget = a.budget;
    cfg.noisy = a.noisy;
    let out_dir = out_or(&a.out_dir, name);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    Ok(Loop {
        script,
        cfg,
        thrust,
        power,
        plant,
        out_dir,
    })
}

#[derive(Serialize)]
struct ScriptStats {
    kind: ScriptKind,
    n: usize,
    seed: u64,
    mean: f64,
    negative_fraction: f64,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    script: ScriptStats,
    summary: &'a crate::sim::Summary,
}

fn script_stats(s: &crate::sim::RequestScript) -> ScriptStats {
    ScriptStats {
        kind: s.kind,
        n: s.n,
        seed: s.seed,
        mean: s.mean(),
        negative_fraction: s.negative_fraction(),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut manifest = Manifest::new("simulate", a)?;
    let weights: WeightVector = a.weights.parse()?;
    let l = prepare_loop(&a.run, "simulate", weights, &mut manifest)?;
    let pair = ModelPair::new(l.thrust.as_ref(), l.power.as_ref())?;
    let sim = simulate(&l.script, &l.cfg, &pair, &l.plant)?;
    let records = l.out_dir.join("records.csv");
    write_records_csv(&sim.records, a.timing, create(&records)?)?;
    let summary = l.out_dir.join("summary.json");
    manifest::write_json(
        &SimulateOutput {
            script: script_stats(&l.script),
            summary: &sim.summary,
        },
        &summary,
    )?;
    if a.timing {
        manifest::write_json(&sim.timing, &l.out_dir.join("timing.json"))?;
    }
    manifest.output(&records)?;
    manifest.output(&summary)?;
    manifest.write(&l.out_dir.join("manifest.json"))?;
    print_json(&sim.summary)
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut manifest = Manifest::new("sweep", a)?;
    let l = prepare_loop(&a.run, "sweep", WeightVector::thrust_only(), &mut manifest)?;
    let pair = ModelPair::new(l.thrust.as_ref(), l.power.as_ref())?;
    let rows = weight_sweep(&l.script, a.increment, &l.cfg, &pair, &l.plant)?;
    let out = l.out_dir.join("sweep.csv");
    write_sweep_csv(&rows, create(&out)?)?;
    manifest.output(&out)?;
    manifest.write(&l.out_dir.join("manifest.json"))?;
    eprintln!("wrote {} sweep rows to {}", rows.len(), out.display());
    Ok(())
}

fn parse_wt_grid(spec: &Option<String>) -> Result<Vec<f64>> {
    match spec {
        None => Ok((0..=20).map(|i| i as f64 / 20.0).collect()),
        Some(s) => s
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::input(format!("--wt-grid entry '{v}' is not a number")))
            })
            .collect(),
    }
}

fn cmd_tradeoff(a: &TradeoffArgs) -> Result<()> {
    let mut manifest = Manifest::new("tradeoff", a)?;
    let grid = parse_wt_grid(&a.wt_grid)?;
    let l = prepare_loop(&a.run, "tradeoff", WeightVector::thrust_only(), &mut manifest)?;
    let pair = ModelPair::new(l.thrust.as_ref(), l.power.as_ref())?;
    let rows = trade_off_curve(&l.script, &grid, &l.cfg, &pair, &l.plant)?;
    let out = l.out_dir.join("tradeoff.csv");
    write_tradeoff_csv(&rows, create(&out)?)?;
    manifest.output(&out)?;
    manifest.write(&l.out_dir.join("manifest.json"))?;
    eprintln!("wrote {} trade-off rows to {}", rows.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn resolution_specs() {
        assert_eq!(parse_resolution("coarse").unwrap(), GridResolution::coarse());
        let r = parse_resolution("0.25, 5, 5, 22.5").unwrap();
        assert_eq!(r.step_spo, 22.5);
        assert!(parse_resolution("1,2,3").is_err());
        assert!(parse_resolution("medium").is_err());
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::Input("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::data("d.csv", "bad")), EXIT_DATA);
        assert_eq!(exit_code(&Error::Training { epoch: 3 }), EXIT_INTERNAL);
        let nested = Error::Simulation {
            cycle: 4,
            source: Box::new(Error::data("m", "x")),
        };
        assert_eq!(exit_code(&nested), EXIT_DATA);
    }

    #[test]
    fn default_trade_off_grid_has_21_points() {
        let g = parse_wt_grid(&None).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[20], 1.0);
        assert!(parse_wt_grid(&Some("0.5,x".into())).is_err());
    }
}
