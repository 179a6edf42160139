//! Accuracy reports, dense prediction grids and throughput measurement.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{DatasetRow, HoldoutCriterion};
use crate::error::{Error, Result};
use crate::gait::{Axis, Gait, Material};

use super::{Predictor, Target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMae {
    pub key: String,
    pub n: usize,
    /// `None` when no row matches the criterion.
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub material: Material,
    pub target: Target,
    pub n: usize,
    pub mae: f64,
    pub max_error: f64,
    /// One entry per holdout criterion, in fixed order.
    pub subsets: Vec<SubsetMae>,
}

impl MaeReport {
    pub fn subset(&self, key: &str) -> Option<&SubsetMae> {
        self.subsets.iter().find(|s| s.key == key)
    }
}

pub fn evaluate(model: &dyn Predictor, rows: &[DatasetRow]) -> Result<MaeReport> {
    if rows.is_empty() {
        return Err(Error::input("cannot evaluate on zero rows"));
    }
    let target = model.target();
    let errs: Vec<f64> = rows
        .iter()
        .map(|r| (model.predict(&r.gait) - target.of(r)).abs())
        .collect();
    let n = rows.len();
    let mae = errs.iter().sum::<f64>() / n as f64;
    let max_error = errs.iter().copied().fold(0.0, f64::max);
    let subsets = HoldoutCriterion::ALL
        .iter()
        .map(|c| {
            let sel: Vec<f64> = rows
                .iter()
                .zip(&errs)
                .filter(|(r, _)| c.matches(&r.gait))
                .map(|(_, e)| *e)
                .collect();
            SubsetMae {
                key: c.key().to_string(),
                n: sel.len(),
                mae: (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64),
            }
        })
        .collect();
    Ok(MaeReport {
        material: model.material(),
        target,
        n,
        mae,
        max_error,
        subsets,
    })
}

/// Checks that two predictors form a thrust/power pair for one material.
pub fn check_pair(thrust: &dyn Predictor, power: &dyn Predictor) -> Result<Material> {
    if thrust.target() != Target::Thrust {
        return Err(Error::input(format!("thrust model predicts {}", thrust.target())));
    }
    if power.target() != Target::Power {
        return Err(Error::input(format!("power model predicts {}", power.target())));
    }
    if thrust.material() != power.material() {
        return Err(Error::input(format!(
            "thrust model is for {} but power model is for {}",
            thrust.material().name(),
            power.material().name()
        )));
    }
    Ok(thrust.material())
}

/// Axis increments for a dense grid over the experimental ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridResolution {
    pub step_freq: f64,
    pub step_stroke: f64,
    pub step_pitch: f64,
    pub step_spo: f64,
}

impl GridResolution {
    /// 1° amplitudes, 0.125 Hz, 5.625° phase offset.
    pub fn fine() -> Self {
        GridResolution {
            step_freq: 0.125,
            step_stroke: 1.0,
            step_pitch: 1.0,
            step_spo: 5.625,
        }
    }

    /// 5° amplitudes, 0.25 Hz, 11.25° phase offset.
    pub fn coarse() -> Self {
        GridResolution {
            step_freq: 0.25,
            step_stroke: 5.0,
            step_pitch: 5.0,
            step_spo: 11.25,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fine" => Ok(Self::fine()),
            "coarse" => Ok(Self::coarse()),
            other => Err(Error::input(format!("unknown grid resolution '{other}' (fine or coarse)"))),
        }
    }

    fn step(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Frequency => self.step_freq,
            Axis::Stroke => self.step_stroke,
            Axis::Pitch => self.step_pitch,
            Axis::Spo => self.step_spo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for axis in Axis::ALL {
            let s = self.step(axis);
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::input(format!("grid step for {axis} must be positive")));
            }
        }
        Ok(())
    }

    /// `lo, lo + s, …` up to `hi`; the last level is the largest multiple
    /// not exceeding `hi` (with a small tolerance).
    pub fn levels(&self, axis: Axis) -> Vec<f64> {
        let (lo, hi) = axis_range(axis);
        let s = self.step(axis);
        let n = ((hi - lo) / s + 1e-9).floor() as usize;
        (0..=n).map(|k| lo + k as f64 * s).collect()
    }

    pub fn len(&self) -> usize {
        Axis::ALL.iter().map(|&a| self.levels(a).len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn axis_range(axis: Axis) -> (f64, f64) {
    match axis {
        Axis::Frequency => (crate::gait::FREQ_MIN, crate::gait::FREQ_MAX),
        Axis::Stroke | Axis::Pitch => (0.0, 55.0),
        Axis::Spo => (crate::gait::SPO_MIN, crate::gait::SPO_MAX),
    }
}

pub const GRID_HEADER: [&str; 6] = [
    "frequency_hz",
    "stroke_amp_deg",
    "pitch_amp_deg",
    "spo_deg",
    "thrust_n",
    "power_w",
];

/// Streams predictions over the grid, stroke-major then pitch, frequency and
/// phase offset. Each stroke slice is predicted in parallel and written in
/// order. Returns the number of rows written.
pub fn interpolate_grid<W: Write>(
    thrust: &dyn Predictor,
    power: &dyn Predictor,
    res: &GridResolution,
    out: W,
) -> Result<usize> {
    check_pair(thrust, power)?;
    res.validate()?;
    let strokes = res.levels(Axis::Stroke);
    let pitches = res.levels(Axis::Pitch);
    let freqs = res.levels(Axis::Frequency);
    let spos = res.levels(Axis::Spo);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_HEADER)?;
    let mut rows = 0;
    for &s in &strokes {
        let mut slice = Vec::with_capacity(pitches.len() * freqs.len() * spos.len());
        for &p in &pitches {
            for &f in &freqs {
                slice.extend(spos.iter().map(|&d| Gait::new(f, s, p, d)));
            }
        }
        let preds: Vec<(f64, f64)> = slice
            .par_iter()
            .map(|g| (thrust.predict(g), power.predict(g)))
            .collect();
        for (g, (t, pw)) in slice.iter().zip(preds) {
            w.write_record([
                g.frequency.to_string(),
                g.stroke_amp.to_string(),
                g.pitch_amp.to_string(),
                g.spo.to_string(),
                t.to_string(),
                pw.to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| Error::io("<grid output>", e))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub predictions: u64,
    pub elapsed_s: f64,
    pub per_second: f64,
}

/// Single-threaded steady-state throughput: cycles through a fixed probe
/// set for at least `duration` after a short warm-up.
pub fn bench_inference(model: &dyn Predictor, duration: Duration) -> BenchReport {
    let probes: Vec<Gait> = crate::datagen::experiment_grid()
        .into_iter()
        .step_by(7)
        .collect();
    for g in probes.iter().take(16) {
        std::hint::black_box(model.predict(std::hint::black_box(g)));
    }
    let start = Instant::now();
    let mut n = 0u64;
    loop {
        for g in &probes {
            std::hint::black_box(model.predict(std::hint::black_box(g)));
        }
        n += probes.len() as u64;
        if start.elapsed() >= duration {
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    BenchReport {
        predictions: n,
        elapsed_s: elapsed,
        per_second: n as f64 / elapsed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{experiment_grid, run_and_postprocess};
    use crate::plant::PlantParams;
    use crate::surrogate::{ConstantModel, PlantModel};

    fn rigid_rows() -> Vec<DatasetRow> {
        run_and_postprocess(&experiment_grid(), Material::Rigid, &PlantParams::default(), 5, 16).unwrap()
    }

    #[test]
    fn perfect_model_has_zero_error() {
        let rows: Vec<DatasetRow> = experiment_grid()
            .into_iter()
            .map(|g| {
                let p = PlantParams::default();
                DatasetRow {
                    material: Material::Rigid,
                    gait: g,
                    voltage: 4.98,
                    thrust_avg: crate::plant::plant_thrust_avg(&g, Material::Rigid, &p),
                    power_avg: crate::plant::plant_power_avg(&g, Material::Rigid, &p),
                    trace_ref: None,
                }
            })
            .collect();
        let m = PlantModel::new(Material::Rigid, Target::Thrust, PlantParams::default());
        let r = evaluate(&m, &rows).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.max_error, 0.0);
    }

    #[test]
    fn constant_zero_mae_is_mean_absolute_target() {
        let rows = rigid_rows();
        let zero = ConstantModel {
            value: 0.0,
            target: Target::Thrust,
            material: Material::Rigid,
        };
        let r = evaluate(&zero, &rows).unwrap();
        let mut oracle = 0.0;
        for row in &rows {
            oracle += row.thrust_avg.abs();
        }
        oracle /= rows.len() as f64;
        assert!((r.mae - oracle).abs() < 1e-12);
        let keys: Vec<&str> = r.subsets.iter().map(|s| s.key.as_str()).collect();
        assert_eq!(keys, ["f=1.25", "spo=0", "stroke=25", "pitch=25"]);
        // 864 / 6 rows sit at f = 1.25
        assert_eq!(r.subset("f=1.25").unwrap().n, 144);
        assert!(evaluate(&zero, &[]).is_err());
    }

    #[test]
    fn grid_sizes_follow_axis_counts() {
        assert_eq!(GridResolution::fine().len(), 56 * 56 * 11 * 13);
        assert_eq!(GridResolution::fine().len(), 448_448);
        assert_eq!(GridResolution::coarse().len(), 12 * 12 * 6 * 7);
        assert_eq!(GridResolution::coarse().levels(Axis::Spo).last(), Some(&45.0));
    }

    #[test]
    fn coarse_grid_streams_every_row_and_matches_predict() {
        let p = PlantParams::default();
        let t = PlantModel::new(Material::Rigid, Target::Thrust, p.clone());
        let w = PlantModel::new(Material::Rigid, Target::Power, p);
        let mut buf = Vec::new();
        let n = interpolate_grid(&t, &w, &GridResolution::coarse(), &mut buf).unwrap();
        assert_eq!(n, 6048);
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let mut count = 0;
        for rec in rdr.records() {
            let rec = rec.unwrap();
            let v: Vec<f64> = rec.iter().map(|x| x.parse().unwrap()).collect();
            let g = Gait::new(v[0], v[1], v[2], v[3]);
            assert_eq!(v[4], t.predict(&g));
            assert_eq!(v[5], w.predict(&g));
            count += 1;
        }
        assert_eq!(count, 6048);
    }

    #[test]
    fn pair_checks_catch_swaps() {
        let p = PlantParams::default();
        let t = PlantModel::new(Material::Rigid, Target::Thrust, p.clone());
        let w = PlantModel::new(Material::Pdms1To10, Target::Power, p.clone());
        assert!(check_pair(&t, &w).is_err());
        assert!(check_pair(&t, &t).is_err());
    }

    #[test]
    fn bench_counts_predictions() {
        let zero = ConstantModel {
            value: 0.0,
            target: Target::Thrust,
            material: Material::Rigid,
        };
        let r = bench_inference(&zero, Duration::from_millis(20));
        assert!(r.predictions > 0 && r.elapsed_s >= 0.02);
    }
}
