//! Synthetic ground-truth plant used in place of tank measurements.
//!
//! The mean surfaces encode the reported per-material extremes, orderings
//! and monotone trends; the trace generator adds the twice-per-cycle thrust
//! ripple, measurement noise that grows at low frequency, and rectified
//! actuator currents whose mean power matches [`plant_power_avg`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{Gait, Material};
use crate::trace::{cycle_phase, synthesize_waveforms, CycleTrace, SUPPLY_VOLTAGE};

pub const PLANT_FORMAT_VERSION: u32 = 1;

/// Fraction of mean electrical power drawn by the stroke actuator.
const STROKE_POWER_SHARE: f64 = 0.7;
/// Relative amplitude of the thrust ripple at twice the flap frequency.
const THRUST_RIPPLE: f64 = 0.6;

/// Calibration constants for one fin material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialPlant {
    /// Peak thrust, N.
    pub t_scale: f64,
    /// Power coefficient, W.
    pub p_scale: f64,
    pub p_pitch_gain: f64,
    /// Thrust noise standard deviation at 2 Hz, N.
    pub noise_base: f64,
    /// Additional noise per Hz below 2 Hz, N/Hz.
    pub noise_lowfreq_gain: f64,
}

impl MaterialPlant {
    fn calibrated(t_scale: f64, max_power: f64, p_pitch_gain: f64) -> Self {
        MaterialPlant {
            t_scale,
            // grid maximum sits at Φ ≥ 45, f = 2, Θ = 55
            p_scale: max_power / (1.0 + p_pitch_gain),
            p_pitch_gain,
            noise_base: 0.02,
            noise_lowfreq_gain: 0.01,
        }
    }

    pub fn noise_sigma(&self, frequency: f64) -> f64 {
        (self.noise_base + self.noise_lowfreq_gain * (2.0 - frequency)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub rigid: MaterialPlant,
    pub pdms_1_10: MaterialPlant,
    pub pdms_1_20: MaterialPlant,
    /// Frequency exponent of forward (positive) thrust.
    pub forward_freq_exponent: f64,
    /// Frequency exponent of reverse (negative) thrust.
    pub reverse_freq_exponent: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            rigid: MaterialPlant::calibrated(1.2, 7.6, 0.5),
            pdms_1_10: MaterialPlant::calibrated(2.1, 7.1, 0.6),
            pdms_1_20: MaterialPlant::calibrated(1.6, 7.1, 0.45),
            forward_freq_exponent: 1.5,
            reverse_freq_exponent: 0.9,
        }
    }
}

impl PlantParams {
    pub fn material(&self, m: Material) -> &MaterialPlant {
        match m {
            Material::Rigid => &self.rigid,
            Material::Pdms1To10 => &self.pdms_1_10,
            Material::Pdms1To20 => &self.pdms_1_20,
        }
    }

    fn material_mut(&mut self, m: Material) -> &mut MaterialPlant {
        match m {
            Material::Rigid => &mut self.rigid,
            Material::Pdms1To10 => &mut self.pdms_1_10,
            Material::Pdms1To20 => &mut self.pdms_1_20,
        }
    }

    /// Same surfaces with all measurement noise removed.
    pub fn noiseless(&self) -> Self {
        let mut p = self.clone();
        for m in Material::ALL {
            let mp = p.material_mut(m);
            mp.noise_base = 0.0;
            mp.noise_lowfreq_gain = 0.0;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        for m in Material::ALL {
            let mp = self.material(m);
            if !(mp.t_scale > 0.0) || !(mp.p_scale > 0.0) {
                return Err(Error::config(format!(
                    "plant {}: t_scale and p_scale must be positive",
                    m.key()
                )));
            }
            if !(mp.p_pitch_gain >= 0.0) || !(mp.noise_base >= 0.0) || !(mp.noise_lowfreq_gain >= 0.0)
            {
                return Err(Error::config(format!(
                    "plant {}: gains and noise terms must be non-negative",
                    m.key()
                )));
            }
        }
        if !(self.forward_freq_exponent > 0.0) || !(self.reverse_freq_exponent > 0.0) {
            return Err(Error::config("plant frequency exponents must be positive"));
        }
        Ok(())
    }

    /// Plain-text `key = value` form.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# fingait synthetic plant parameters");
        let _ = writeln!(s, "format_version = {PLANT_FORMAT_VERSION}");
        let _ = writeln!(s, "forward_freq_exponent = {}", self.forward_freq_exponent);
        let _ = writeln!(s, "reverse_freq_exponent = {}", self.reverse_freq_exponent);
        for m in Material::ALL {
            let mp = self.material(m);
            let k = m.key();
            let _ = writeln!(s, "{k}.t_scale = {}", mp.t_scale);
            let _ = writeln!(s, "{k}.p_scale = {}", mp.p_scale);
            let _ = writeln!(s, "{k}.p_pitch_gain = {}", mp.p_pitch_gain);
            let _ = writeln!(s, "{k}.noise_base = {}", mp.noise_base);
            let _ = writeln!(s, "{k}.noise_lowfreq_gain = {}", mp.noise_lowfreq_gain);
        }
        s
    }

    /// Parses the `key = value` form. Keys not present keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = PlantParams::default();
        let mut version = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("plant config line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::config(format!("plant config line {}: '{}' is not a number", lineno + 1, value.trim()))
            })?;
            match key {
                "format_version" => version = Some(value),
                "forward_freq_exponent" => p.forward_freq_exponent = value,
                "reverse_freq_exponent" => p.reverse_freq_exponent = value,
                _ => {
                    let (mat, field) = key
                        .split_once('.')
                        .ok_or_else(|| Error::config(format!("plant config: unknown key '{key}'")))?;
                    let m: Material = mat.parse().map_err(|_| Error::config(format!("plant config: unknown material '{mat}'")))?;
                    let mp = p.material_mut(m);
                    match field {
                        "t_scale" => mp.t_scale = value,
                        "p_scale" => mp.p_scale = value,
                        "p_pitch_gain" => mp.p_pitch_gain = value,
                        "noise_base" => mp.noise_base = value,
                        "noise_lowfreq_gain" => mp.noise_lowfreq_gain = value,
                        _ => return Err(Error::config(format!("plant config: unknown key '{key}'"))),
                    }
                }
            }
        }
        match version {
            Some(v) if v == PLANT_FORMAT_VERSION as f64 => {}
            Some(v) => return Err(Error::config(format!("unsupported plant config version {v}"))),
            None => return Err(Error::config("plant config is missing format_version")),
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }
}

/// Offset factor `cos(2(δ + π/8))`: 1 at δ = −22.5°, 0 at 22.5°, negative beyond.
fn offset_factor(spo_deg: f64) -> f64 {
    (2.0 * (spo_deg.to_radians() + PI / 8.0)).cos()
}

/// Deterministic cycle-average thrust, N.
pub fn plant_thrust_avg(g: &Gait, m: Material, params: &PlantParams) -> f64 {
    let mp = params.material(m);
    let c = offset_factor(g.spo);
    let exponent = if c >= 0.0 {
        params.forward_freq_exponent
    } else {
        params.reverse_freq_exponent
    };
    mp.t_scale
        * (g.frequency.max(0.0) / 2.0).powf(exponent)
        * (g.stroke_amp.max(0.0) / 55.0).powf(1.2)
        * (PI * g.pitch_amp / 75.0).sin()
        * c
}

/// Deterministic cycle-average electrical power, W. Never negative.
pub fn plant_power_avg(g: &Gait, m: Material, params: &PlantParams) -> f64 {
    let mp = params.material(m);
    let stroke = g.stroke_amp.clamp(0.0, 45.0) / 45.0;
    let freq = (g.frequency.max(0.0) / 2.0).powi(2);
    mp.p_scale * stroke * freq * (1.0 + mp.p_pitch_gain * g.pitch_amp.max(0.0) / 55.0)
}

/// One noisy cycle of plant measurements. Deterministic given `seed`.
pub fn plant_trace(
    g: &Gait,
    m: Material,
    params: &PlantParams,
    seed: u64,
    samples_per_cycle: usize,
) -> Result<CycleTrace> {
    let kin = synthesize_waveforms(g, samples_per_cycle)?;
    let n = samples_per_cycle;
    let mean_thrust = plant_thrust_avg(g, m, params);
    let mean_power = plant_power_avg(g, m, params);
    let sigma = params.material(m).noise_sigma(g.frequency);
    let offset = g.spo.to_radians();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::config(format!("plant noise: {e}")))?;

    let stroke_shape: Vec<f64> = (0..n).map(|j| cycle_phase(j, n).sin().abs()).collect();
    let pitch_shape: Vec<f64> = (0..n).map(|j| (cycle_phase(j, n) + offset).cos().abs()).collect();
    // scale against the sampled means so the trace power equals the surface
    let stroke_mean = stroke_shape.iter().sum::<f64>() / n as f64;
    let pitch_mean = pitch_shape.iter().sum::<f64>() / n as f64;
    let a = STROKE_POWER_SHARE * mean_power / (SUPPLY_VOLTAGE * stroke_mean);
    let b = (1.0 - STROKE_POWER_SHARE) * mean_power / (SUPPLY_VOLTAGE * pitch_mean);

    let thrust = (0..n)
        .map(|j| {
            let ripple = 1.0 + THRUST_RIPPLE * (2.0 * cycle_phase(j, n)).cos();
            let eps = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            mean_thrust * ripple + eps
        })
        .collect();

    Ok(CycleTrace {
        time: kin.time,
        stroke_angle: kin.stroke_angle,
        pitch_angle: kin.pitch_angle,
        thrust,
        lift: vec![0.0; n],
        side: vec![0.0; n],
        current_stroke: stroke_shape.iter().map(|s| a * s).collect(),
        current_pitch: pitch_shape.iter().map(|s| b * s).collect(),
        voltage: SUPPLY_VOLTAGE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::experiment_grid;
    use crate::trace::cycle_summary;

    fn params() -> PlantParams {
        PlantParams::default()
    }

    #[test]
    fn zero_stroke_gives_nothing() {
        for m in Material::ALL {
            let g = Gait::new(1.5, 0.0, 30.0, 0.0);
            assert_eq!(plant_thrust_avg(&g, m, &params()), 0.0);
            assert_eq!(plant_power_avg(&g, m, &params()), 0.0);
        }
    }

    #[test]
    fn peak_thrust_example() {
        let g = Gait::new(2.0, 55.0, 38.0, -22.5);
        let t = plant_thrust_avg(&g, Material::Pdms1To10, &params());
        let expected = 2.1 * (PI * 38.0 / 75.0).sin();
        assert!((t - expected).abs() < 1e-12);
        assert!((t - 2.0996).abs() < 1e-3);
    }

    #[test]
    fn large_offset_reverses_thrust() {
        let g = Gait::new(2.0, 55.0, 38.0, 45.0);
        for m in Material::ALL {
            assert!(plant_thrust_avg(&g, m, &params()) < 0.0);
        }
    }

    #[test]
    fn calibration_on_grid() {
        let grid = experiment_grid();
        let p = params();
        for (m, t_max, p_max) in [
            (Material::Rigid, 1.2, 7.6),
            (Material::Pdms1To10, 2.1, 7.1),
            (Material::Pdms1To20, 1.6, 7.1),
        ] {
            let (best, tmax) = grid
                .iter()
                .map(|g| (*g, plant_thrust_avg(g, m, &p)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert_eq!(best, Gait::new(2.0, 55.0, 38.0, -22.5), "{m}");
            assert!((tmax - t_max).abs() <= 0.01, "{m}: {tmax}");
            let pmax = grid.iter().map(|g| plant_power_avg(g, m, &p)).fold(0.0, f64::max);
            assert!((pmax - p_max).abs() <= 0.05, "{m}: {pmax}");
        }
    }

    #[test]
    fn thrust_magnitude_ordering() {
        let p = params();
        for g in experiment_grid() {
            let r = plant_thrust_avg(&g, Material::Rigid, &p).abs();
            let a = plant_thrust_avg(&g, Material::Pdms1To10, &p).abs();
            let b = plant_thrust_avg(&g, Material::Pdms1To20, &p).abs();
            assert!(a >= b && b >= r, "{g}");
            if r > 1e-12 {
                assert!(a > b && b > r);
            }
        }
    }

    #[test]
    fn power_monotone_in_each_axis() {
        let p = params();
        let grid = experiment_grid();
        for m in Material::ALL {
            for g in &grid {
                let base = plant_power_avg(g, m, &p);
                assert!(base >= 0.0);
                for (dphi, dtheta, df) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 0.05)] {
                    let h = Gait::new(g.frequency + df, g.stroke_amp + dphi, g.pitch_amp + dtheta, g.spo);
                    assert!(plant_power_avg(&h, m, &p) >= base);
                }
            }
        }
    }

    #[test]
    fn offset_optimum_is_most_negative() {
        let p = params();
        for g in experiment_grid() {
            let best = plant_thrust_avg(&g.with(crate::gait::Axis::Spo, -22.5), Material::Rigid, &p);
            assert!(plant_thrust_avg(&g, Material::Rigid, &p) <= best + 1e-15);
        }
    }

    #[test]
    fn trace_is_deterministic_and_powered_right() {
        let g = Gait::new(1.25, 40.0, 32.0, 0.0);
        let p = params();
        let a = plant_trace(&g, Material::Pdms1To20, &p, 7, 50).unwrap();
        let b = plant_trace(&g, Material::Pdms1To20, &p, 7, 50).unwrap();
        assert_eq!(a, b);
        let c = plant_trace(&g, Material::Pdms1To20, &p, 8, 50).unwrap();
        assert_ne!(a.thrust, c.thrust);
        let s = cycle_summary(&a).unwrap();
        let truth = plant_power_avg(&g, Material::Pdms1To20, &p);
        assert!((s.power_avg - truth).abs() <= 0.01 * truth);
    }

    #[test]
    fn trace_mean_converges_to_surface() {
        let g = Gait::new(1.0, 40.0, 32.0, -22.5);
        let p = params();
        let n = 50;
        let cycles = 1000;
        let mut sum = 0.0;
        for seed in 0..cycles {
            let t = plant_trace(&g, Material::Rigid, &p, seed, n).unwrap();
            sum += t.thrust.iter().sum::<f64>();
        }
        let mean = sum / (cycles as f64 * n as f64);
        let truth = plant_thrust_avg(&g, Material::Rigid, &p);
        let sigma = p.rigid.noise_sigma(g.frequency);
        let tol = 3.0 * sigma / ((cycles as f64 * n as f64).sqrt());
        assert!((mean - truth).abs() <= tol, "{mean} vs {truth} (tol {tol})");
    }

    #[test]
    fn summary_matches_surface_within_noise() {
        let g = Gait::new(1.5, 32.5, 25.0, 0.0);
        let p = params();
        let t = plant_trace(&g, Material::Pdms1To10, &p, 3, 50).unwrap();
        let s = cycle_summary(&t).unwrap();
        let sigma = p.pdms_1_10.noise_sigma(g.frequency);
        let truth = plant_thrust_avg(&g, Material::Pdms1To10, &p);
        assert!((s.thrust_avg - truth).abs() <= 3.0 * sigma / (50f64).sqrt());
    }

    #[test]
    fn config_roundtrip_and_errors() {
        let p = params();
        let text = p.to_config_string();
        assert_eq!(PlantParams::from_config_str(&text).unwrap(), p);
        assert!(PlantParams::from_config_str("rigid.t_scale = 1").is_err());
        let bad = text.replace("rigid.t_scale = 1.2", "rigid.t_scale = -1");
        assert!(PlantParams::from_config_str(&bad).is_err());
        assert!(PlantParams::from_config_str("format_version = 1\nsteel.t_scale = 2").is_err());
    }
}
