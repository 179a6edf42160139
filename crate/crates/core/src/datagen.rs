//! Experimental protocol: the gait grid, ten-cycle runs with middle-cycle
//! extraction, training rows, and the interpolation holdout split.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{Gait, Material};
use crate::plant::{plant_trace, PlantParams};
use crate::trace::{cycle_summary, save_trace, CycleTrace, SUPPLY_VOLTAGE};

pub const STROKE_LEVELS: [f64; 6] = [0.0, 15.0, 25.0, 32.5, 40.0, 55.0];
pub const PITCH_LEVELS: [f64; 6] = [0.0, 15.0, 25.0, 32.0, 38.0, 55.0];
pub const FREQ_LEVELS: [f64; 6] = [0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
pub const SPO_LEVELS: [f64; 4] = [-22.5, 0.0, 22.5, 45.0];

pub const CYCLES_PER_GAIT: usize = 10;
/// Zero-based cycle indices kept for analysis (cycles 3 through 7).
pub const KEPT_CYCLES: std::ops::Range<usize> = 2..7;

/// Full factorial grid in Φ-major order, then Θ, f, δ.
pub fn experiment_grid() -> Vec<Gait> {
    let mut grid = Vec::with_capacity(864);
    for &stroke in &STROKE_LEVELS {
        for &pitch in &PITCH_LEVELS {
            for &f in &FREQ_LEVELS {
                for &spo in &SPO_LEVELS {
                    grid.push(Gait::new(f, stroke, pitch, spo));
                }
            }
        }
    }
    grid
}

/// One training row: cycle averages of the kept cycles of one gait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub material: Material,
    pub gait: Gait,
    pub voltage: f64,
    pub thrust_avg: f64,
    pub power_avg: f64,
    pub trace_ref: Option<String>,
}

/// A processed gait run: the row plus the sample-wise mean trace of the
/// kept cycles.
#[derive(Debug, Clone)]
pub struct GaitRun {
    pub row: DatasetRow,
    pub trace: CycleTrace,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stable seed mixing: `derive_seed(a, b)` differs for every `(a, b)`.
pub fn derive_seed(parent: u64, child: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ child.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Seed of gait `index` for `material` under `master`.
pub fn gait_seed(master: u64, material: Material, index: usize) -> u64 {
    derive_seed(derive_seed(master, material.index()), index as u64)
}

fn run_one(
    index: usize,
    g: &Gait,
    material: Material,
    params: &PlantParams,
    master: u64,
    samples_per_cycle: usize,
) -> Result<GaitRun> {
    let seed = gait_seed(master, material, index);
    let cycles = (0..CYCLES_PER_GAIT)
        .map(|c| plant_trace(g, material, params, derive_seed(seed, c as u64), samples_per_cycle))
        .collect::<Result<Vec<_>>>()?;
    let kept = &cycles[KEPT_CYCLES];
    let mut thrust = 0.0;
    let mut power = 0.0;
    for c in kept {
        let s = cycle_summary(c)?;
        thrust += s.thrust_avg;
        power += s.power_avg;
    }
    let k = kept.len() as f64;
    Ok(GaitRun {
        row: DatasetRow {
            material,
            gait: *g,
            voltage: SUPPLY_VOLTAGE,
            thrust_avg: thrust / k,
            power_avg: power / k,
            trace_ref: None,
        },
        trace: CycleTrace::mean_of(kept)?,
    })
}

/// Runs every gait and keeps the post-processed trace. Output order follows
/// `grid` regardless of how the work is scheduled.
pub fn run_experiment(
    grid: &[Gait],
    material: Material,
    params: &PlantParams,
    seed: u64,
    samples_per_cycle: usize,
) -> Result<Vec<GaitRun>> {
    if grid.is_empty() {
        return Err(Error::input("experiment grid is empty"));
    }
    grid.par_iter()
        .enumerate()
        .map(|(i, g)| run_one(i, g, material, params, seed, samples_per_cycle))
        .collect()
}

/// Dataset rows without traces.
pub fn run_and_postprocess(
    grid: &[Gait],
    material: Material,
    params: &PlantParams,
    seed: u64,
    samples_per_cycle: usize,
) -> Result<Vec<DatasetRow>> {
    Ok(run_experiment(grid, material, params, seed, samples_per_cycle)?
        .into_iter()
        .map(|r| r.row)
        .collect())
}

/// Writes each run's trace under `dir` and records its path in the row.
pub fn persist_traces(runs: &mut [GaitRun], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, run) in runs.iter_mut().enumerate() {
        let path = dir.join(format!("{}_{i:04}.csv", run.row.material.key()));
        save_trace(&run.trace, &path)?;
        run.row.trace_ref = Some(path.to_string_lossy().into_owned());
    }
    Ok(())
}

/// Holdout membership criteria for interpolation tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum HoldoutCriterion {
    Freq1p25,
    Spo0,
    Stroke25,
    Pitch25,
}

impl HoldoutCriterion {
    pub const ALL: [HoldoutCriterion; 4] = [
        HoldoutCriterion::Freq1p25,
        HoldoutCriterion::Spo0,
        HoldoutCriterion::Stroke25,
        HoldoutCriterion::Pitch25,
    ];

    pub fn key(self) -> &'static str {
        match self {
            HoldoutCriterion::Freq1p25 => "f=1.25",
            HoldoutCriterion::Spo0 => "spo=0",
            HoldoutCriterion::Stroke25 => "stroke=25",
            HoldoutCriterion::Pitch25 => "pitch=25",
        }
    }

    pub fn matches(self, g: &Gait) -> bool {
        let near = |a: f64, b: f64| (a - b).abs() < 1e-9;
        match self {
            HoldoutCriterion::Freq1p25 => near(g.frequency, 1.25),
            HoldoutCriterion::Spo0 => near(g.spo, 0.0),
            HoldoutCriterion::Stroke25 => near(g.stroke_amp, 25.0),
            HoldoutCriterion::Pitch25 => near(g.pitch_amp, 25.0),
        }
    }
}

pub fn is_holdout(g: &Gait) -> bool {
    HoldoutCriterion::ALL.iter().any(|c| c.matches(g))
}

/// Splits items into `(train, holdout)` by gait; order within each part
/// follows the input.
pub fn partition_holdout<T: Clone>(items: &[T], gait_of: impl Fn(&T) -> Gait) -> (Vec<T>, Vec<T>) {
    let (holdout, train): (Vec<T>, Vec<T>) = items.iter().cloned().partition(|it| is_holdout(&gait_of(it)));
    (train, holdout)
}

pub fn holdout_split(rows: &[DatasetRow]) -> (Vec<DatasetRow>, Vec<DatasetRow>) {
    partition_holdout(rows, |r| r.gait)
}

const DATASET_HEADER: [&str; 9] = [
    "material",
    "frequency_hz",
    "stroke_amp_deg",
    "pitch_amp_deg",
    "spo_deg",
    "voltage_v",
    "thrust_avg_n",
    "power_avg_w",
    "trace_ref",
];

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    material: String,
    frequency_hz: f64,
    stroke_amp_deg: f64,
    pitch_amp_deg: f64,
    spo_deg: f64,
    voltage_v: f64,
    thrust_avg_n: f64,
    power_avg_w: f64,
    trace_ref: String,
}

pub fn write_dataset_csv<W: Write>(rows: &[DatasetRow], out: W) -> Result<()> {
    // explicit header so that an empty table still carries one
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(DATASET_HEADER)?;
    for r in rows {
        w.serialize(DatasetRecord {
            material: r.material.name().to_string(),
            frequency_hz: r.gait.frequency,
            stroke_amp_deg: r.gait.stroke_amp,
            pitch_amp_deg: r.gait.pitch_amp,
            spo_deg: r.gait.spo,
            voltage_v: r.voltage,
            thrust_avg_n: r.thrust_avg,
            power_avg_w: r.power_avg,
            trace_ref: r.trace_ref.clone().unwrap_or_default(),
        })?;
    }
    w.flush().map_err(|e| Error::io("<dataset csv>", e))?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<DatasetRow>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != DATASET_HEADER {
        return Err(Error::input(format!(
            "dataset csv header mismatch: expected {}",
            DATASET_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let rec: DatasetRecord = rec?;
        rows.push(DatasetRow {
            material: rec.material.parse()?,
            gait: Gait::new(rec.frequency_hz, rec.stroke_amp_deg, rec.pitch_amp_deg, rec.spo_deg),
            voltage: rec.voltage_v,
            thrust_avg: rec.thrust_avg_n,
            power_avg: rec.power_avg_w,
            trace_ref: (!rec.trace_ref.is_empty()).then_some(rec.trace_ref),
        });
    }
    Ok(rows)
}

pub fn save_dataset(rows: &[DatasetRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_csv(rows, std::io::BufWriter::new(f))
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_csv(std::io::BufReader::new(f)).map_err(|e| Error::data(path, e.to_string()))
}

/// Resolves a row's trace reference: as written, else relative to the
/// dataset file's directory.
pub fn resolve_trace_ref(trace_ref: &str, dataset_path: &Path) -> PathBuf {
    let p = PathBuf::from(trace_ref);
    if p.is_absolute() || p.exists() {
        return p;
    }
    match dataset_path.parent() {
        Some(dir) => dir.join(&p),
        None => p,
    }
}
