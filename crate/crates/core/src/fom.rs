//! Dimensionless figure of merit, the fin-tip velocity scale, the FOM loss
//! and contour/sweep exports.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{Axis, Gait, Material};
use crate::datagen::{FREQ_LEVELS, PITCH_LEVELS, SPO_LEVELS, STROKE_LEVELS};
use crate::plant::{plant_power_avg, plant_thrust_avg, PlantParams};
use crate::surrogate::Predictor;

/// Distance from the stroke axis to the fin tip of the tested fin, m.
pub const DEFAULT_R_TIP: f64 = 0.18125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VelocityMode {
    /// `v = 1 m/s` for relative comparisons.
    Unit,
    /// Mean fin-tip speed.
    TipSpeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FomConfig {
    pub r_tip: f64,
    pub velocity_mode: VelocityMode,
    /// η is undefined at or below this power, W.
    pub epsilon_power: f64,
}

impl Default for FomConfig {
    fn default() -> Self {
        FomConfig {
            r_tip: DEFAULT_R_TIP,
            velocity_mode: VelocityMode::TipSpeed,
            epsilon_power: 0.05,
        }
    }
}

impl FomConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_tip > 0.0) || !(self.epsilon_power > 0.0) {
            return Err(Error::config("r_tip and epsilon_power must be positive"));
        }
        Ok(())
    }

    /// Velocity scale for `g` under the configured mode.
    pub fn velocity(&self, g: &Gait) -> f64 {
        match self.velocity_mode {
            VelocityMode::Unit => 1.0,
            VelocityMode::TipSpeed => tip_speed(g, self.r_tip),
        }
    }
}

/// Mean fin-tip speed `2π (4Φ/360) r_tip f`, m/s.
pub fn tip_speed(g: &Gait, r_tip: f64) -> f64 {
    2.0 * PI * (4.0 * g.stroke_amp / 360.0) * r_tip * g.frequency
}

/// `η = F v / P`, or `None` when the power is at or below `epsilon_power`.
pub fn figure_of_merit(thrust_avg: f64, power_avg: f64, v: f64, cfg: &FomConfig) -> Option<f64> {
    (power_avg > cfg.epsilon_power).then(|| thrust_avg * v / power_avg)
}

/// `L_η = |T_target − T_pred| v / p`, or `None` when `p` is at or below
/// `epsilon_power`.
pub fn fom_loss(t_target: f64, t_pred: f64, v: f64, p: f64, cfg: &FomConfig) -> Option<f64> {
    (p > cfg.epsilon_power).then(|| (t_target - t_pred).abs() * v / p)
}

/// Where contour values come from.
pub enum FomSource<'a> {
    Plant {
        material: Material,
        params: &'a PlantParams,
    },
    Models {
        thrust: &'a dyn Predictor,
        power: &'a dyn Predictor,
    },
}

impl FomSource<'_> {
    fn evaluate(&self, g: &Gait) -> (f64, f64) {
        match self {
            FomSource::Plant { material, params } => (
                plant_thrust_avg(g, *material, params),
                plant_power_avg(g, *material, params),
            ),
            FomSource::Models { thrust, power } => (thrust.predict(g), power.predict(g)),
        }
    }
}

/// Which axes are held constant and which are swept.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub fixed: Vec<(Axis, f64)>,
    /// Swept axes with the values each one takes.
    pub vary: Vec<(Axis, Vec<f64>)>,
}

/// Default sweep values for an axis: the experimental grid levels.
pub fn grid_levels(axis: Axis) -> Vec<f64> {
    match axis {
        Axis::Frequency => FREQ_LEVELS.to_vec(),
        Axis::Stroke => STROKE_LEVELS.to_vec(),
        Axis::Pitch => PITCH_LEVELS.to_vec(),
        Axis::Spo => SPO_LEVELS.to_vec(),
    }
}

impl SliceSpec {
    /// Parses `fix = "f=2,spo=0"` and `vary = "stroke,pitch"`; swept axes
    /// take the experimental grid levels.
    pub fn parse(fix: &str, vary: &str) -> Result<Self> {
        let mut fixed = Vec::new();
        for part in fix.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::input(format!("fixed axis '{part}' is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("fixed axis '{part}' is not numeric")))?;
            fixed.push((k.parse()?, v));
        }
        let vary = vary
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<Axis>().map(|a| (a, grid_levels(a))))
            .collect::<Result<Vec<_>>>()?;
        let spec = SliceSpec { fixed, vary };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in Axis::ALL {
            let n_fixed = self.fixed.iter().filter(|(a, _)| *a == axis).count();
            let n_vary = self.vary.iter().filter(|(a, _)| *a == axis).count();
            if n_fixed + n_vary != 1 {
                return Err(Error::input(format!(
                    "axis '{axis}' must be either fixed or varied exactly once"
                )));
            }
        }
        if self.vary.is_empty() || self.vary.iter().any(|(_, v)| v.is_empty()) {
            return Err(Error::input("slice is empty: nothing to vary"));
        }
        Ok(())
    }

    /// Every gait of the slice. The first varied axis changes slowest.
    pub fn gaits(&self) -> Result<Vec<Gait>> {
        self.validate()?;
        let mut base = [0.0; 4];
        for (a, v) in &self.fixed {
            base[a.index()] = *v;
        }
        let mut out = vec![base];
        for (axis, values) in &self.vary {
            out = out
                .into_iter()
                .flat_map(|g| {
                    values.iter().map(move |&v| {
                        let mut h = g;
                        h[axis.index()] = v;
                        h
                    })
                })
                .collect();
        }
        Ok(out.into_iter().map(Gait::from_array).collect())
    }
}

/// One contour row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourRow {
    pub gait: Gait,
    pub thrust: f64,
    pub power: f64,
    pub fom: Option<f64>,
}

/// Thrust, power and η over a slice, in [`SliceSpec::gaits`] order.
pub fn fom_sweep(source: &FomSource<'_>, slice: &SliceSpec, cfg: &FomConfig) -> Result<Vec<ContourRow>> {
    cfg.validate()?;
    let gaits = slice.gaits()?;
    Ok(gaits
        .into_iter()
        .map(|g| {
            let (thrust, power) = source.evaluate(&g);
            ContourRow {
                gait: g,
                thrust,
                power,
                fom: figure_of_merit(thrust, power, cfg.velocity(&g), cfg),
            }
        })
        .collect())
}

pub const CONTOUR_HEADER: [&str; 7] = [
    "stroke_deg",
    "pitch_deg",
    "frequency_hz",
    "spo_deg",
    "thrust_n",
    "power_w",
    "fom",
];

/// Streams contour rows as CSV; `fom` is empty when undefined.
pub struct ContourWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ContourWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(CONTOUR_HEADER)?;
        Ok(ContourWriter { inner })
    }

    pub fn write(&mut self, row: &ContourRow) -> Result<()> {
        let g = row.gait;
        let fom = row.fom.map(|v| v.to_string()).unwrap_or_default();
        self.inner.write_record(&[
            g.stroke_amp.to_string(),
            g.pitch_amp.to_string(),
            g.frequency.to_string(),
            g.spo.to_string(),
            row.thrust.to_string(),
            row.power.to_string(),
            fom,
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("<contour csv>", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::io("<contour csv>", e.into_error()))
    }
}

pub fn write_contour_csv<W: Write>(rows: &[ContourRow], out: W) -> Result<()> {
    let mut w = ContourWriter::new(out)?;
    for r in rows {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

/// Mean of the defined η values, `None` when none are defined.
pub fn mean_fom(rows: &[ContourRow]) -> Option<f64> {
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.fom).collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}
