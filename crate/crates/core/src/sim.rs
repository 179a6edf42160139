//! Cycle-by-cycle control loop: request scripts, search, actuation on the
//! plant, and summaries over weight sweeps.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::derive_seed;
use crate::error::{Error, Result};
use crate::fom::{figure_of_merit, fom_loss, FomConfig};
use crate::gait::{is_feasible, Gait, Material, StepSizes};
use crate::plant::{plant_power_avg, plant_thrust_avg, plant_trace, PlantParams};
use crate::search::{run_search, Algorithm, ModelPair, SearchRequest, WeightVector, DEFAULT_DEADLINE_S};
use crate::trace::{cycle_summary, DEFAULT_SAMPLES_PER_CYCLE};

pub const DEFAULT_REQUESTS: usize = 1010;
/// Records excluded from summaries while the loop leaves the rest gait.
pub const WARMUP_RECORDS: usize = 10;
pub const THRUST_REQUEST_LIMIT: f64 = 1.2;
pub const NORMAL_MEAN: f64 = 0.5;
pub const NORMAL_STD: f64 = 0.594;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptKind {
    Uniform,
    Normal,
}

impl FromStr for ScriptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(ScriptKind::Uniform),
            "normal" => Ok(ScriptKind::Normal),
            other => Err(Error::input(format!("unknown script '{other}' (uniform or normal)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestScript {
    pub kind: ScriptKind,
    pub n: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

impl RequestScript {
    pub fn negative_fraction(&self) -> f64 {
        self.values.iter().filter(|v| **v < 0.0).count() as f64 / self.n as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n as f64
    }
}

/// Thrust requests in `[-1.2, 1.2]` N. Normal draws outside the range are
/// redrawn rather than clipped.
pub fn gen_requests(kind: ScriptKind, n: usize, seed: u64) -> Result<RequestScript> {
    if n <= WARMUP_RECORDS {
        return Err(Error::input(format!("a script needs at least {} requests", WARMUP_RECORDS + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = THRUST_REQUEST_LIMIT;
    let values = match kind {
        ScriptKind::Uniform => (0..n).map(|_| rng.random_range(-lim..=lim)).collect(),
        ScriptKind::Normal => {
            let dist = Normal::new(NORMAL_MEAN, NORMAL_STD).expect("valid normal");
            (0..n)
                .map(|_| loop {
                    let v: f64 = dist.sample(&mut rng);
                    if (-lim..=lim).contains(&v) {
                        break v;
                    }
                })
                .collect()
        }
    };
    Ok(RequestScript { kind, n, seed, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub weights: WeightVector,
    pub material: Material,
    pub algorithm: Algorithm,
    pub steps: StepSizes,
    pub deadline_s: f64,
    pub eval_budget: Option<usize>,
    /// Parent of the per-cycle search seeds.
    pub seed: u64,
    pub fom: FomConfig,
    /// Realize outcomes from a sampled trace instead of the mean surfaces.
    pub noisy: bool,
}

impl SimConfig {
    pub fn new(weights: WeightVector, material: Material, algorithm: Algorithm, seed: u64) -> Self {
        SimConfig {
            weights,
            material,
            algorithm,
            steps: StepSizes::default(),
            deadline_s: DEFAULT_DEADLINE_S,
            eval_budget: None,
            seed,
            fom: FomConfig::default(),
            noisy: false,
        }
    }
}

/// The loop starts from the smallest attainable gait.
pub fn rest_gait() -> Gait {
    Gait::new(0.75, 0.0, 0.0, 0.0).project()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub t_target: f64,
    pub chosen: Gait,
    pub t_pred: f64,
    pub p_pred: f64,
    pub t_realized: f64,
    pub p_realized: f64,
    /// Search loss components, computed on the predictions.
    pub loss_t: f64,
    pub loss_k: f64,
    pub loss_p: f64,
    pub loss_total: f64,
    /// Realized figure of merit; `None` below the power floor.
    pub fom: Option<f64>,
    pub fom_loss: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub material: Material,
    pub weights: WeightVector,
    pub algorithm: Algorithm,
    pub records: usize,
    pub summarized: usize,
    /// Mean `|t_target − t_realized|`.
    pub mean_loss_t: f64,
    pub mean_loss_t_pred: f64,
    pub mean_loss_k: f64,
    pub mean_power: f64,
    pub mean_thrust: f64,
    pub mean_fom: Option<f64>,
    pub fom_count: usize,
    pub mean_fom_loss: Option<f64>,
    pub fom_loss_count: usize,
}

/// Wall-clock statistics, kept apart from [`Summary`] because they vary run
/// to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_elapsed_s: f64,
    pub max_elapsed_s: f64,
    pub over_deadline: usize,
    pub deadline_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub records: Vec<CycleRecord>,
    pub summary: Summary,
    pub timing: Timing,
}

fn mean_opt(vals: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut s, mut n) = (0.0, 0);
    for v in vals.flatten() {
        s += v;
        n += 1;
    }
    ((n > 0).then(|| s / n as f64), n)
}

/// Summary over records after the warm-up. Depends on nothing but the
/// records themselves.
pub fn summarize(records: &[CycleRecord], cfg: &SimConfig) -> Summary {
    let kept = &records[WARMUP_RECORDS.min(records.len())..];
    let n = kept.len().max(1) as f64;
    let mean = |f: &dyn Fn(&CycleRecord) -> f64| kept.iter().map(f).sum::<f64>() / n;
    let (mean_fom, fom_count) = mean_opt(kept.iter().map(|r| r.fom));
    let (mean_fom_loss, fom_loss_count) = mean_opt(kept.iter().map(|r| r.fom_loss));
    Summary {
        material: cfg.material,
        weights: cfg.weights,
        algorithm: cfg.algorithm,
        records: records.len(),
        summarized: kept.len(),
        mean_loss_t: mean(&|r| (r.t_target - r.t_realized).abs()),
        mean_loss_t_pred: mean(&|r| r.loss_t),
        mean_loss_k: mean(&|r| r.loss_k),
        mean_power: mean(&|r| r.p_realized),
        mean_thrust: mean(&|r| r.t_realized),
        mean_fom,
        fom_count,
        mean_fom_loss,
        fom_loss_count,
    }
}

pub fn simulate(
    script: &RequestScript,
    cfg: &SimConfig,
    models: &ModelPair<'_>,
    plant: &PlantParams,
) -> Result<Simulation> {
    if models.material() != cfg.material {
        return Err(Error::config(format!(
            "models are for {} but the simulation is for {}",
            models.material().name(),
            cfg.material.name()
        )));
    }
    cfg.fom.validate()?;
    let mut current = rest_gait();
    let mut records = Vec::with_capacity(script.n);
    for (i, &target) in script.values.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        let req = SearchRequest {
            current,
            t_target: target,
            weights: cfg.weights,
            steps: cfg.steps,
            material: cfg.material,
            deadline_s: cfg.deadline_s,
            eval_budget: cfg.eval_budget,
            seed,
        };
        let res = run_search(cfg.algorithm, &req, models, None).map_err(|e| Error::Simulation {
            cycle: i,
            source: Box::new(e),
        })?;
        let g = res.gait;
        debug_assert!(is_feasible(&g));
        let (t_real, p_real) = if cfg.noisy {
            let tr = plant_trace(&g, cfg.material, plant, derive_seed(seed, 1), DEFAULT_SAMPLES_PER_CYCLE)
                .and_then(|t| cycle_summary(&t))
                .map_err(|e| Error::Simulation {
                    cycle: i,
                    source: Box::new(e),
                })?;
            (tr.thrust_avg, tr.power_avg)
        } else {
            (plant_thrust_avg(&g, cfg.material, plant), plant_power_avg(&g, cfg.material, plant))
        };
        let v = cfg.fom.velocity(&g);
        records.push(CycleRecord {
            cycle: i,
            t_target: target,
            chosen: g,
            t_pred: res.t_pred,
            p_pred: res.p_pred,
            t_realized: t_real,
            p_realized: p_real,
            loss_t: res.loss_t,
            loss_k: res.loss_k,
            loss_p: res.loss_p,
            loss_total: res.loss_total,
            fom: figure_of_merit(t_real, p_real, v, &cfg.fom),
            fom_loss: fom_loss(target, res.t_pred, v, res.p_pred, &cfg.fom),
            elapsed_s: res.elapsed_s,
        });
        current = g;
    }
    let summary = summarize(&records, cfg);
    let el: Vec<f64> = records.iter().map(|r| r.elapsed_s).collect();
    let timing = Timing {
        mean_elapsed_s: el.iter().sum::<f64>() / el.len() as f64,
        max_elapsed_s: el.iter().copied().fold(0.0, f64::max),
        over_deadline: el.iter().filter(|e| **e > cfg.deadline_s).count(),
        deadline_s: cfg.deadline_s,
    };
    Ok(Simulation {
        records,
        summary,
        timing,
    })
}

/// Every `(w_t, w_k, w_p)` with entries in `{0, inc, 2·inc, …, 1}` summing
/// to one, ordered by `w_t` then `w_k`.
pub fn weight_lattice(increment: f64) -> Result<Vec<WeightVector>> {
    if !(increment.is_finite() && increment > 0.0 && increment <= 1.0) {
        return Err(Error::input("weight increment must be in (0, 1]"));
    }
    let k = (1.0 / increment).round() as usize;
    if (k as f64 * increment - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("weight increment {increment} does not divide 1")));
    }
    let mut out = Vec::new();
    for i in 0..=k {
        for j in 0..=k - i {
            let l = k - i - j;
            out.push(WeightVector::new(i as f64 / k as f64, j as f64 / k as f64, l as f64 / k as f64)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub weights: WeightVector,
    pub summary: Summary,
}

/// One simulation per lattice point, run in parallel and returned in
/// lattice order.
pub fn weight_sweep(
    script: &RequestScript,
    increment: f64,
    base: &SimConfig,
    models: &ModelPair<'_>,
    plant: &PlantParams,
) -> Result<Vec<SweepRow>> {
    let lattice = weight_lattice(increment)?;
    run_weights(script, &lattice, base, models, plant)
}

fn run_weights(
    script: &RequestScript,
    weights: &[WeightVector],
    base: &SimConfig,
    models: &ModelPair<'_>,
    plant: &PlantParams,
) -> Result<Vec<SweepRow>> {
    weights
        .par_iter()
        .map(|w| {
            let cfg = SimConfig {
                weights: *w,
                ..base.clone()
            };
            let sim = simulate(script, &cfg, models, plant)?;
            Ok(SweepRow {
                weights: *w,
                summary: sim.summary,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub w_t: f64,
    pub mean_loss_t: f64,
    pub mean_loss_k: f64,
    pub mean_power: f64,
    pub mean_fom: Option<f64>,
    pub mean_fom_loss: Option<f64>,
}

/// Simulations along `(w_t, 0, 1 − w_t)`.
pub fn trade_off_curve(
    script: &RequestScript,
    w_t_grid: &[f64],
    base: &SimConfig,
    models: &ModelPair<'_>,
    plant: &PlantParams,
) -> Result<Vec<TradeoffRow>> {
    let weights = w_t_grid
        .iter()
        .map(|&wt| {
            if !(0.0..=1.0).contains(&wt) {
                return Err(Error::input(format!("w_t {wt} is outside [0, 1]")));
            }
            WeightVector::new(wt, 0.0, 1.0 - wt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(run_weights(script, &weights, base, models, plant)?
        .into_iter()
        .map(|r| TradeoffRow {
            w_t: r.weights.w_t,
            mean_loss_t: r.summary.mean_loss_t,
            mean_loss_k: r.summary.mean_loss_k,
            mean_power: r.summary.mean_power,
            mean_fom: r.summary.mean_fom,
            mean_fom_loss: r.summary.mean_fom_loss,
        })
        .collect())
}

pub const RECORDS_HEADER: [&str; 17] = [
    "cycle",
    "t_target_n",
    "frequency_hz",
    "stroke_amp_deg",
    "pitch_amp_deg",
    "spo_deg",
    "t_pred_n",
    "p_pred_w",
    "t_realized_n",
    "p_realized_w",
    "loss_t",
    "loss_k",
    "loss_p",
    "loss_total",
    "fom",
    "fom_loss",
    "elapsed_s",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// With `timing = false` the `elapsed_s` column is left empty so that the
/// file is a pure function of the inputs.
pub fn write_records_csv<W: Write>(records: &[CycleRecord], timing: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.cycle.to_string(),
            r.t_target.to_string(),
            r.chosen.frequency.to_string(),
            r.chosen.stroke_amp.to_string(),
            r.chosen.pitch_amp.to_string(),
            r.chosen.spo.to_string(),
            r.t_pred.to_string(),
            r.p_pred.to_string(),
            r.t_realized.to_string(),
            r.p_realized.to_string(),
            r.loss_t.to_string(),
            r.loss_k.to_string(),
            r.loss_p.to_string(),
            r.loss_total.to_string(),
            opt(r.fom),
            opt(r.fom_loss),
            if timing { r.elapsed_s.to_string() } else { String::new() },
        ])?;
    }
    w.flush().map_err(|e| Error::io("<records csv>", e))
}

pub const SWEEP_HEADER: [&str; 10] = [
    "w_t",
    "w_k",
    "w_p",
    "mean_loss_t",
    "mean_loss_k",
    "mean_power_w",
    "mean_thrust_n",
    "mean_fom",
    "mean_fom_loss",
    "summarized",
];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let s = &r.summary;
        w.write_record([
            r.weights.w_t.to_string(),
            r.weights.w_k.to_string(),
            r.weights.w_p.to_string(),
            s.mean_loss_t.to_string(),
            s.mean_loss_k.to_string(),
            s.mean_power.to_string(),
            s.mean_thrust.to_string(),
            opt(s.mean_fom),
            opt(s.mean_fom_loss),
            s.summarized.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))
}

pub const TRADEOFF_HEADER: [&str; 6] = ["w_t", "mean_loss_t", "mean_loss_k", "mean_power_w", "mean_fom", "mean_fom_loss"];

pub fn write_tradeoff_csv<W: Write>(rows: &[TradeoffRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRADEOFF_HEADER)?;
    for r in rows {
        w.write_record([
            r.w_t.to_string(),
            r.mean_loss_t.to_string(),
            r.mean_loss_k.to_string(),
            r.mean_power.to_string(),
            opt(r.mean_fom),
            opt(r.mean_fom_loss),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<tradeoff csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{PlantModel, Target};
    use proptest::prelude::*;

    fn plant_models(m: Material) -> (PlantModel, PlantModel) {
        let p = PlantParams::default();
        (
            PlantModel::new(m, Target::Thrust, p.clone()),
            PlantModel::new(m, Target::Power, p),
        )
    }

    fn cfg(w: (f64, f64, f64)) -> SimConfig {
        let mut c = SimConfig::new(
            WeightVector::new(w.0, w.1, w.2).unwrap(),
            Material::Rigid,
            Algorithm::Gps,
            3,
        );
        c.deadline_s = 60.0;
        c
    }

    #[test]
    fn lattice_has_231_points_at_005() {
        let l = weight_lattice(0.05).unwrap();
        assert_eq!(l.len(), 231);
        assert!(l.iter().all(|w| (w.w_t + w.w_k + w.w_p - 1.0).abs() <= 1e-9));
        assert_eq!(weight_lattice(0.5).unwrap().len(), 6);
        assert!(weight_lattice(0.3).is_err());
    }

    #[test]
    fn scripts_are_deterministic_and_in_range() {
        for kind in [ScriptKind::Uniform, ScriptKind::Normal] {
            let a = gen_requests(kind, DEFAULT_REQUESTS, 42).unwrap();
            let b = gen_requests(kind, DEFAULT_REQUESTS, 42).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.values.len(), 1010);
            assert!(a.values.iter().all(|v| v.abs() <= 1.2));
        }
        assert!(gen_requests(ScriptKind::Uniform, 10, 0).is_err());
    }

    #[test]
    fn summary_skips_warmup_and_is_recomputable() {
        let (t, p) = plant_models(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        let script = gen_requests(ScriptKind::Normal, 40, 1).unwrap();
        let c = cfg((0.8, 0.0, 0.2));
        let sim = simulate(&script, &c, &pair, &PlantParams::default()).unwrap();
        assert_eq!(sim.records.len(), 40);
        assert_eq!(sim.summary.summarized, 30);
        let kept = &sim.records[10..];
        let lt = kept.iter().map(|r| (r.t_target - r.t_realized).abs()).sum::<f64>() / 30.0;
        assert!((sim.summary.mean_loss_t - lt).abs() < 1e-12);
        assert!(sim.records.iter().all(|r| is_feasible(&r.chosen)));
        let again = simulate(&script, &c, &pair, &PlantParams::default()).unwrap();
        assert_eq!(again.summary, sim.summary);
        let strip = |r: &CycleRecord| CycleRecord { elapsed_s: 0.0, ..r.clone() };
        assert!(sim.records.iter().zip(&again.records).all(|(a, b)| strip(a) == strip(b)));
    }

    #[test]
    fn smoothness_only_never_moves() {
        let (t, p) = plant_models(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        let script = gen_requests(ScriptKind::Uniform, 20, 2).unwrap();
        let sim = simulate(&script, &cfg((0.0, 1.0, 0.0)), &pair, &PlantParams::default()).unwrap();
        for r in &sim.records {
            assert_eq!(r.loss_k, 0.0);
            assert_eq!(r.chosen, rest_gait());
        }
    }

    #[test]
    fn thrust_only_tracks_achievable_targets_on_a_perfect_model() {
        let (t, p) = plant_models(Material::Pdms1To10);
        let pair = ModelPair::new(&t, &p).unwrap();
        let mut script = gen_requests(ScriptKind::Uniform, 30, 5).unwrap();
        script.values.iter_mut().for_each(|v| *v *= 0.5);
        let mut c = cfg((1.0, 0.0, 0.0));
        c.material = Material::Pdms1To10;
        let sim = simulate(&script, &c, &pair, &PlantParams::default()).unwrap();
        assert!(sim.summary.mean_loss_t < 0.05, "{}", sim.summary.mean_loss_t);
    }

    #[test]
    fn material_mismatch_is_rejected() {
        let (t, p) = plant_models(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        let script = gen_requests(ScriptKind::Uniform, 20, 2).unwrap();
        let mut c = cfg((1.0, 0.0, 0.0));
        c.material = Material::Pdms1To20;
        assert!(simulate(&script, &c, &pair, &PlantParams::default()).is_err());
    }

    #[test]
    fn records_csv_has_the_documented_columns() {
        let (t, p) = plant_models(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        let script = gen_requests(ScriptKind::Uniform, 12, 2).unwrap();
        let sim = simulate(&script, &cfg((0.5, 0.25, 0.25)), &pair, &PlantParams::default()).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&sim.records, false, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RECORDS_HEADER.join(","));
        assert_eq!(lines.count(), 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn uniform_scripts_stay_in_range(seed in any::<u64>(), n in 11usize..200) {
            let s = gen_requests(ScriptKind::Uniform, n, seed).unwrap();
            prop_assert_eq!(s.values.len(), n);
            prop_assert!(s.values.iter().all(|v| (-1.2..=1.2).contains(v)));
        }
    }
}
