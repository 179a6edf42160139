//! Forward gait→thrust and gait→power models.
//!
//! Three families share one [`ForwardModel`] wrapper: least-squares
//! polynomials, a fully-connected network on the static kinematics, and a
//! gated recurrent network that predicts the per-sample thrust and power
//! history of a cycle and averages it.

mod eval;
mod ff;
mod io;
mod optim;
mod poly;
mod seq;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{Axis, Gait, Material};
use crate::plant::{plant_power_avg, plant_thrust_avg, PlantParams};

pub use eval::{
    bench_inference, check_pair, evaluate, interpolate_grid, BenchReport, GridResolution, MaeReport, SubsetMae,
    GRID_HEADER,
};
pub use ff::{fit_feedforward, FeedforwardConfig, FeedforwardNet};
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_FORMAT_VERSION};
pub use optim::OptimizerConfig;
pub use poly::{
    fit_polynomial, fit_polynomial_with, monomial_name, monomials, Degeneracy, Exponents, PolyFitOptions,
    PolynomialModel, MAX_DEGREE,
};
pub use seq::{fit_sequence, SequenceConfig, SequenceNet, SequenceSample, SequenceTraining};

/// Quantity a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Thrust,
    Power,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Thrust => "thrust",
            Target::Power => "power",
        }
    }

    pub fn of(self, row: &crate::datagen::DatasetRow) -> f64 {
        match self {
            Target::Thrust => row.thrust_avg,
            Target::Power => row.power_avg,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "thrust" => Ok(Target::Thrust),
            "power" => Ok(Target::Power),
            other => Err(Error::input(format!("unknown target '{other}' (expected thrust or power)"))),
        }
    }
}

/// Anything that maps a gait to a cycle-average thrust or power.
pub trait Predictor: Send + Sync {
    fn predict(&self, g: &Gait) -> f64;
    fn target(&self) -> Target;
    fn material(&self) -> Material;
}

/// Min–max map of each static kinematic onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    /// `(lo, hi)` per axis in [`Axis::ALL`] order.
    pub ranges: [(f64, f64); 4],
}

impl Default for InputNorm {
    /// Experimental grid ranges.
    fn default() -> Self {
        InputNorm {
            ranges: [(0.75, 2.0), (0.0, 55.0), (0.0, 55.0), (-22.5, 45.0)],
        }
    }
}

impl InputNorm {
    pub fn apply(&self, g: &Gait) -> [f64; 4] {
        let a = g.to_array();
        let mut u = [0.0; 4];
        for i in 0..4 {
            let (lo, hi) = self.ranges[i];
            u[i] = 2.0 * (a[i] - lo) / (hi - lo) - 1.0;
        }
        u
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, (lo, hi)) in Axis::ALL.iter().zip(self.ranges) {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::config(format!("normalization range for {axis} is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Polynomial { degree: usize },
    Feedforward,
    Sequence,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Polynomial { degree: 1 } => f.write_str("linear"),
            ModelKind::Polynomial { degree: 4 } => f.write_str("quartic"),
            ModelKind::Polynomial { degree } => write!(f, "polynomial-{degree}"),
            ModelKind::Feedforward => f.write_str("feedforward"),
            ModelKind::Sequence => f.write_str("sequence"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ModelBody {
    Polynomial(PolynomialModel),
    Feedforward(FeedforwardNet),
    Sequence(SequenceNet),
}

/// A trained predictor for one `(material, target)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    pub(crate) target: Target,
    pub(crate) material: Material,
    pub(crate) norm: InputNorm,
    pub(crate) body: ModelBody,
    /// Training MAE in target units, when known.
    pub train_mae: Option<f64>,
    /// MAE on the rows used for early stopping, when any were given.
    pub holdout_mae: Option<f64>,
}

impl ForwardModel {
    pub fn kind(&self) -> ModelKind {
        match &self.body {
            ModelBody::Polynomial(p) => ModelKind::Polynomial { degree: p.degree },
            ModelBody::Feedforward(_) => ModelKind::Feedforward,
            ModelBody::Sequence(_) => ModelKind::Sequence,
        }
    }

    pub fn norm(&self) -> &InputNorm {
        &self.norm
    }

    /// The same model answering for the other target. Only sequence models
    /// carry both heads.
    pub fn retarget(&self, target: Target) -> Result<ForwardModel> {
        match &self.body {
            ModelBody::Sequence(net) => {
                let k = seq_head(target);
                Ok(ForwardModel {
                    target,
                    train_mae: net.train_mae[k].is_finite().then_some(net.train_mae[k]),
                    holdout_mae: net.holdout_mae.map(|m| m[k]),
                    ..self.clone()
                })
            }
            _ if target == self.target => Ok(self.clone()),
            _ => Err(Error::config(format!(
                "{} model predicts {} only",
                self.kind(),
                self.target
            ))),
        }
    }

    /// Sequence nets only: the predicted per-sample history of the target
    /// over one cycle.
    pub fn predict_trace(&self, g: &Gait) -> Option<Vec<f64>> {
        match &self.body {
            ModelBody::Sequence(net) => {
                let u = self.norm.apply(g);
                let out = net.predict_series(&u, net.samples_per_cycle);
                let k = seq_head(self.target);
                Some(out.iter().map(|o| o[k]).collect())
            }
            _ => None,
        }
    }

    /// Sequence nets only: the same model evaluated on `n` samples per cycle.
    pub fn with_samples_per_cycle(&self, n: usize) -> Result<ForwardModel> {
        match &self.body {
            ModelBody::Sequence(net) => {
                if n < crate::trace::MIN_SAMPLES_PER_CYCLE {
                    return Err(Error::input("samples_per_cycle must be at least 8"));
                }
                let mut net = net.clone();
                net.samples_per_cycle = n;
                Ok(ForwardModel {
                    body: ModelBody::Sequence(net),
                    ..self.clone()
                })
            }
            _ => Err(Error::config("only sequence models have a time axis")),
        }
    }
}

fn seq_head(target: Target) -> usize {
    match target {
        Target::Thrust => 0,
        Target::Power => 1,
    }
}

/// Deterministic scalar prediction. No feasibility check is applied.
pub fn predict_avg(model: &ForwardModel, g: &Gait) -> f64 {
    let u = model.norm.apply(g);
    match &model.body {
        ModelBody::Polynomial(p) => p.eval(&u),
        ModelBody::Feedforward(net) => net.predict(&u),
        ModelBody::Sequence(net) => net.predict_avg(&u, net.samples_per_cycle)[seq_head(model.target)],
    }
}

impl Predictor for ForwardModel {
    fn predict(&self, g: &Gait) -> f64 {
        predict_avg(self, g)
    }

    fn target(&self) -> Target {
        self.target
    }

    fn material(&self) -> Material {
        self.material
    }
}

/// The deterministic plant surfaces used as a (perfect) forward model.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub material: Material,
    pub target: Target,
    pub params: PlantParams,
}

impl PlantModel {
    pub fn new(material: Material, target: Target, params: PlantParams) -> Self {
        PlantModel {
            material,
            target,
            params,
        }
    }
}

impl Predictor for PlantModel {
    fn predict(&self, g: &Gait) -> f64 {
        match self.target {
            Target::Thrust => plant_thrust_avg(g, self.material, &self.params),
            Target::Power => plant_power_avg(g, self.material, &self.params),
        }
    }

    fn target(&self) -> Target {
        self.target
    }

    fn material(&self) -> Material {
        self.material
    }
}

/// A predictor that always returns the same value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantModel {
    pub value: f64,
    pub target: Target,
    pub material: Material,
}

impl Predictor for ConstantModel {
    fn predict(&self, _g: &Gait) -> f64 {
        self.value
    }

    fn target(&self) -> Target {
        self.target
    }

    fn material(&self) -> Material {
        self.material
    }
}
