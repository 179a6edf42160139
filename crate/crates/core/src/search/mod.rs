//! Inverse gait search: pick the next gait for a thrust request under a
//! weighted loss over thrust error, kinematic smoothness and power.
//!
//! All algorithms work in step-normalized coordinates (each kinematic
//! divided by its [`StepSizes`] entry) and project every probe into the
//! attainable region before evaluating it.

mod brute;
mod gps;
mod hjps;
mod mc;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{
    is_feasible, kinematic_distance, pitch_bound, stroke_bound, Gait, Material, StepSizes, FEASIBILITY_MARGIN,
    FREQ_MAX, FREQ_MIN, SPO_MAX, SPO_MIN,
};
use crate::surrogate::{check_pair, Predictor};

pub use brute::{brute_force, BruteGrid, MAX_BRUTE_POINTS};
pub use gps::{search_gps, GpsConfig};
pub use hjps::{search_hjps, HjpsConfig};
pub use mc::search_mc;

pub const DEFAULT_DEADLINE_S: f64 = 0.5;
pub const MC_DEFAULT_BUDGET: usize = 300;
pub const GPS_DEFAULT_BUDGET: usize = 200;
pub const HJPS_DEFAULT_BUDGET: usize = 200;

/// `(w_t, w_k, w_p)` on the unit simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w_t: f64,
    pub w_k: f64,
    pub w_p: f64,
}

impl WeightVector {
    pub fn new(w_t: f64, w_k: f64, w_p: f64) -> Result<Self> {
        let w = WeightVector { w_t, w_k, w_p };
        let parts = [w_t, w_k, w_p];
        if parts.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::input(format!("weights must lie in [0, 1], got {w}")));
        }
        if (w_t + w_k + w_p - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("weights must sum to 1, got {w}")));
        }
        Ok(w)
    }

    pub fn thrust_only() -> Self {
        WeightVector {
            w_t: 1.0,
            w_k: 0.0,
            w_p: 0.0,
        }
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.w_t, self.w_k, self.w_p)
    }
}

impl FromStr for WeightVector {
    type Err = Error;

    /// `"0.8,0,0.2"` in `(w_t, w_k, w_p)` order.
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::input(format!("weights '{s}' are not three numbers")))?;
        match v[..] {
            [a, b, c] => WeightVector::new(a, b, c),
            _ => Err(Error::input(format!("weights '{s}' need exactly three values"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mc,
    Hjps,
    Gps,
    Brute,
}

impl Algorithm {
    pub const SEARCHES: [Algorithm; 3] = [Algorithm::Mc, Algorithm::Hjps, Algorithm::Gps];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mc => "mc",
            Algorithm::Hjps => "hjps",
            Algorithm::Gps => "gps",
            Algorithm::Brute => "brute",
        }
    }

    pub fn default_budget(self) -> usize {
        match self {
            Algorithm::Mc => MC_DEFAULT_BUDGET,
            Algorithm::Hjps => HJPS_DEFAULT_BUDGET,
            Algorithm::Gps | Algorithm::Brute => GPS_DEFAULT_BUDGET,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mc" => Ok(Algorithm::Mc),
            "hjps" => Ok(Algorithm::Hjps),
            "gps" => Ok(Algorithm::Gps),
            "brute" => Ok(Algorithm::Brute),
            other => Err(Error::input(format!("unknown algorithm '{other}' (mc, hjps, gps, brute)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub current: Gait,
    pub t_target: f64,
    pub weights: WeightVector,
    pub steps: StepSizes,
    pub material: Material,
    pub deadline_s: f64,
    /// `None` selects the algorithm's default budget.
    pub eval_budget: Option<usize>,
    pub seed: u64,
}

impl SearchRequest {
    pub fn new(current: Gait, t_target: f64, weights: WeightVector, material: Material, seed: u64) -> Self {
        SearchRequest {
            current,
            t_target,
            weights,
            steps: StepSizes::default(),
            material,
            deadline_s: DEFAULT_DEADLINE_S,
            eval_budget: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.deadline_s.is_finite() && self.deadline_s > 0.0) {
            return Err(Error::input("deadline must be positive"));
        }
        if !self.t_target.is_finite() {
            return Err(Error::input("thrust target must be finite"));
        }
        if !is_feasible(&self.current) {
            return Err(Error::input(format!("current gait {} is not attainable", self.current)));
        }
        if self.eval_budget == Some(0) {
            return Err(Error::input("eval budget must be at least 1"));
        }
        WeightVector::new(self.weights.w_t, self.weights.w_k, self.weights.w_p)?;
        StepSizes::new(self.steps.s_stroke, self.steps.s_pitch, self.steps.s_freq, self.steps.s_spo)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Converged,
    Budget,
    Deadline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub t_pred: f64,
    pub p_pred: f64,
    pub loss_t: f64,
    pub loss_k: f64,
    pub loss_p: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub algorithm: Algorithm,
    pub gait: Gait,
    pub t_pred: f64,
    pub p_pred: f64,
    pub loss_total: f64,
    pub loss_t: f64,
    pub loss_k: f64,
    pub loss_p: f64,
    pub evals: usize,
    pub elapsed_s: f64,
    pub terminated_by: Termination,
}

impl SearchResult {
    pub fn breakdown(&self) -> LossBreakdown {
        LossBreakdown {
            t_pred: self.t_pred,
            p_pred: self.p_pred,
            loss_t: self.loss_t,
            loss_k: self.loss_k,
            loss_p: self.loss_p,
            total: self.loss_total,
        }
    }
}

/// A checked thrust/power predictor pair for one material.
#[derive(Clone, Copy)]
pub struct ModelPair<'a> {
    pub thrust: &'a dyn Predictor,
    pub power: &'a dyn Predictor,
    material: Material,
}

impl<'a> ModelPair<'a> {
    pub fn new(thrust: &'a dyn Predictor, power: &'a dyn Predictor) -> Result<Self> {
        let material = check_pair(thrust, power).map_err(|e| Error::config(e.to_string()))?;
        Ok(ModelPair {
            thrust,
            power,
            material,
        })
    }

    pub fn material(&self) -> Material {
        self.material
    }
}

impl fmt::Debug for ModelPair<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelPair").field("material", &self.material).finish()
    }
}

pub fn total_loss(candidate: &Gait, req: &SearchRequest, models: &ModelPair<'_>) -> Result<LossBreakdown> {
    if models.material != req.material {
        return Err(Error::config(format!(
            "models are for {} but the request is for {}",
            models.material.name(),
            req.material.name()
        )));
    }
    Ok(loss_unchecked(candidate, req, models))
}

fn loss_unchecked(candidate: &Gait, req: &SearchRequest, models: &ModelPair<'_>) -> LossBreakdown {
    let t_pred = models.thrust.predict(candidate);
    let p_pred = models.power.predict(candidate);
    let loss_t = (req.t_target - t_pred).abs();
    let loss_k = kinematic_distance(&req.current, candidate, &req.steps);
    let loss_p = p_pred;
    let w = &req.weights;
    LossBreakdown {
        t_pred,
        p_pred,
        loss_t,
        loss_k,
        loss_p,
        total: w.w_t * loss_t + w.w_k * loss_k + w.w_p * loss_p,
    }
}

/// Lower loss, then lower smoothness loss, then lexicographic gait.
pub(crate) fn better(a: (&Gait, &LossBreakdown), b: (&Gait, &LossBreakdown)) -> bool {
    a.1.total
        .total_cmp(&b.1.total)
        .then(a.1.loss_k.total_cmp(&b.1.loss_k))
        .then_with(|| a.0.lex_cmp(b.0))
        == Ordering::Less
}

/// Counts evaluations, enforces the budget and deadline, and tracks the
/// incumbent.
pub(crate) struct Evaluator<'r, 'm> {
    req: &'r SearchRequest,
    models: &'r ModelPair<'m>,
    budget: usize,
    deadline: Duration,
    start: Instant,
    pub evals: usize,
    pub best: Option<(Gait, LossBreakdown)>,
    stop: Option<Termination>,
}

impl<'r, 'm> Evaluator<'r, 'm> {
    pub fn new(req: &'r SearchRequest, models: &'r ModelPair<'m>, algorithm: Algorithm) -> Result<Self> {
        req.validate()?;
        if models.material != req.material {
            return Err(Error::config(format!(
                "models are for {} but the request is for {}",
                models.material.name(),
                req.material.name()
            )));
        }
        Ok(Evaluator {
            req,
            models,
            budget: req.eval_budget.unwrap_or_else(|| algorithm.default_budget()),
            deadline: Duration::from_secs_f64(req.deadline_s),
            start: Instant::now(),
            evals: 0,
            best: None,
            stop: None,
        })
    }

    pub fn steps(&self) -> &StepSizes {
        &self.req.steps
    }

    pub fn stopped(&self) -> bool {
        self.stop.is_some()
    }

    /// Evaluates the projection of `g`. Returns `None` once the budget or
    /// deadline is exhausted.
    pub fn eval(&mut self, g: &Gait) -> Option<(Gait, LossBreakdown)> {
        if self.stop.is_some() {
            return None;
        }
        if self.evals >= self.budget {
            self.stop = Some(Termination::Budget);
            return None;
        }
        if self.evals > 0 && self.start.elapsed() >= self.deadline {
            self.stop = Some(Termination::Deadline);
            return None;
        }
        let p = g.project();
        let l = loss_unchecked(&p, self.req, self.models);
        self.evals += 1;
        let improves = match &self.best {
            None => true,
            Some((bg, bl)) => better((&p, &l), (bg, bl)),
        };
        if improves {
            self.best = Some((p, l));
        }
        Some((p, l))
    }

    /// Evaluates a point given in normalized coordinates.
    pub fn eval_norm(&mut self, y: [f64; 4]) -> Option<([f64; 4], LossBreakdown)> {
        let g = self.req.steps.denormalize(y);
        self.eval(&g).map(|(p, l)| (self.req.steps.normalize(&p), l))
    }

    pub fn finish(self, algorithm: Algorithm, converged: bool) -> SearchResult {
        let (gait, l) = self.best.expect("at least one evaluation");
        let terminated_by = match self.stop {
            Some(t) => t,
            None if converged => Termination::Converged,
            None => Termination::Budget,
        };
        SearchResult {
            algorithm,
            gait,
            t_pred: l.t_pred,
            p_pred: l.p_pred,
            loss_total: l.total,
            loss_t: l.loss_t,
            loss_k: l.loss_k,
            loss_p: l.loss_p,
            evals: self.evals,
            elapsed_s: self.start.elapsed().as_secs_f64(),
            terminated_by,
        }
    }
}

/// Uniform draw from the attainable box: frequency first, then each
/// amplitude below its frequency-dependent bound.
pub(crate) fn sample_feasible<R: Rng>(rng: &mut R) -> Gait {
    let f = rng.random_range(FREQ_MIN..=FREQ_MAX);
    let stroke = rng.random_range(FEASIBILITY_MARGIN..stroke_bound(f) - FEASIBILITY_MARGIN);
    let pitch = rng.random_range(FEASIBILITY_MARGIN..pitch_bound(f) - FEASIBILITY_MARGIN);
    let spo = rng.random_range(SPO_MIN..=SPO_MAX);
    Gait::new(f, stroke, pitch, spo)
}

/// Runs one of the three search algorithms, or brute force on `grid`.
pub fn run_search(
    algorithm: Algorithm,
    req: &SearchRequest,
    models: &ModelPair<'_>,
    grid: Option<&BruteGrid>,
) -> Result<SearchResult> {
    match algorithm {
        Algorithm::Mc => search_mc(req, models),
        Algorithm::Hjps => search_hjps(req, models, &HjpsConfig::default()),
        Algorithm::Gps => search_gps(req, models, &GpsConfig::default()),
        Algorithm::Brute => {
            let default = BruteGrid::coarse();
            brute_force(req, grid.unwrap_or(&default), models)
        }
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::plant::PlantParams;
    use crate::surrogate::{PlantModel, Target};

    pub fn plant_pair(m: Material) -> (PlantModel, PlantModel) {
        let p = PlantParams::default();
        (
            PlantModel::new(m, Target::Thrust, p.clone()),
            PlantModel::new(m, Target::Power, p),
        )
    }

    pub fn request(target: f64, w: (f64, f64, f64), seed: u64) -> SearchRequest {
        let mut r = SearchRequest::new(
            Gait::new(1.0, 30.0, 30.0, 0.0),
            target,
            WeightVector::new(w.0, w.1, w.2).unwrap(),
            Material::Rigid,
            seed,
        );
        // wall-clock limits would make unit tests flaky on loaded machines
        r.deadline_s = 60.0;
        r
    }
}
