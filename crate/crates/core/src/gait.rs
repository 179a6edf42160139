//! Gait parameters, the attainable-gait constraint and the normalized
//! kinematic metric.
//!
//! Angles are degrees everywhere; radians only appear inside trig calls.
//! Array views of a gait use the order `[frequency, stroke, pitch, spo]`,
//! which is also the lexicographic tie-break order used by the searches.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest and highest flap frequency of the experimental grid, Hz.
pub const FREQ_MIN: f64 = 0.75;
pub const FREQ_MAX: f64 = 2.0;
/// Stroke-pitch offset range, degrees.
pub const SPO_MIN: f64 = -22.5;
pub const SPO_MAX: f64 = 45.0;
/// Margin used to turn the strict attainable-gait inequalities into
/// numerically strict ones when projecting.
pub const FEASIBILITY_MARGIN: f64 = 1e-6;

/// Fin material design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Material {
    Rigid,
    #[serde(rename = "PDMS_1_10")]
    Pdms1To10,
    #[serde(rename = "PDMS_1_20")]
    Pdms1To20,
}

impl Material {
    pub const ALL: [Material; 3] = [Material::Rigid, Material::Pdms1To10, Material::Pdms1To20];

    pub fn name(self) -> &'static str {
        match self {
            Material::Rigid => "Rigid",
            Material::Pdms1To10 => "PDMS_1_10",
            Material::Pdms1To20 => "PDMS_1_20",
        }
    }

    /// Short key used in config files.
    pub fn key(self) -> &'static str {
        match self {
            Material::Rigid => "rigid",
            Material::Pdms1To10 => "pdms_1_10",
            Material::Pdms1To20 => "pdms_1_20",
        }
    }

    /// Young's modulus in Pa. Informational only; nothing is computed from it.
    pub fn youngs_modulus(self) -> f64 {
        match self {
            Material::Rigid => 1.0e9,
            Material::Pdms1To10 => 850.0e3,
            Material::Pdms1To20 => 310.0e3,
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            Material::Rigid => 0,
            Material::Pdms1To10 => 1,
            Material::Pdms1To20 => 2,
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Material {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "rigid" | "nylon" | "rigidnylon" => Ok(Material::Rigid),
            "pdms110" => Ok(Material::Pdms1To10),
            "pdms120" => Ok(Material::Pdms1To20),
            _ => Err(Error::input(format!(
                "unknown material '{s}' (expected Rigid, PDMS_1_10 or PDMS_1_20)"
            ))),
        }
    }
}

/// One of the four static kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    Frequency,
    Stroke,
    Pitch,
    Spo,
}

impl Axis {
    /// Array order used throughout the crate.
    pub const ALL: [Axis; 4] = [Axis::Frequency, Axis::Stroke, Axis::Pitch, Axis::Spo];

    pub fn index(self) -> usize {
        match self {
            Axis::Frequency => 0,
            Axis::Stroke => 1,
            Axis::Pitch => 2,
            Axis::Spo => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Frequency => "f",
            Axis::Stroke => "stroke",
            Axis::Pitch => "pitch",
            Axis::Spo => "spo",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "freq" | "frequency" => Ok(Axis::Frequency),
            "stroke" | "phi" | "stroke_amp" => Ok(Axis::Stroke),
            "pitch" | "theta" | "pitch_amp" => Ok(Axis::Pitch),
            "spo" | "delta" | "offset" => Ok(Axis::Spo),
            other => Err(Error::input(format!(
                "unknown kinematic axis '{other}' (expected f, stroke, pitch or spo)"
            ))),
        }
    }
}

/// One static kinematic setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gait {
    /// Flap frequency, Hz.
    pub frequency: f64,
    /// Stroke amplitude Φ, degrees.
    pub stroke_amp: f64,
    /// Pitch amplitude Θ, degrees.
    pub pitch_amp: f64,
    /// Stroke-pitch offset δ, degrees (pitch leads stroke).
    pub spo: f64,
}

impl Gait {
    pub const fn new(frequency: f64, stroke_amp: f64, pitch_amp: f64, spo: f64) -> Self {
        Gait {
            frequency,
            stroke_amp,
            pitch_amp,
            spo,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.frequency, self.stroke_amp, self.pitch_amp, self.spo]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Gait::new(a[0], a[1], a[2], a[3])
    }

    pub fn get(&self, axis: Axis) -> f64 {
        self.to_array()[axis.index()]
    }

    pub fn with(&self, axis: Axis, value: f64) -> Self {
        let mut a = self.to_array();
        a[axis.index()] = value;
        Gait::from_array(a)
    }

    /// Lexicographic comparison in `(f, Φ, Θ, δ)` order.
    pub fn lex_cmp(&self, other: &Gait) -> std::cmp::Ordering {
        let a = self.to_array();
        let b = other.to_array();
        for i in 0..4 {
            match a[i].total_cmp(&b[i]) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    }

    /// The gait moved into the attainable region, shrunk by
    /// [`FEASIBILITY_MARGIN`] so the strict bounds hold numerically.
    /// Frequency and offset are clamped to the experimental ranges.
    pub fn project(&self) -> Gait {
        let f = clamp_finite(self.frequency, FREQ_MIN, FREQ_MAX);
        let spo = clamp_finite(self.spo, SPO_MIN, SPO_MAX);
        let stroke = clamp_finite(
            self.stroke_amp,
            FEASIBILITY_MARGIN,
            stroke_bound(f) - FEASIBILITY_MARGIN,
        );
        let pitch = clamp_finite(
            self.pitch_amp,
            FEASIBILITY_MARGIN,
            pitch_bound(f) - FEASIBILITY_MARGIN,
        );
        Gait::new(f, stroke, pitch, spo)
    }
}

fn clamp_finite(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        lo
    } else {
        v.clamp(lo, hi)
    }
}

impl fmt::Display for Gait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "f={},stroke={},pitch={},spo={}",
            self.frequency, self.stroke_amp, self.pitch_amp, self.spo
        )
    }
}

impl FromStr for Gait {
    type Err = Error;

    /// Parses `"f=1,stroke=30,pitch=30,spo=0"`; every axis is required.
    fn from_str(s: &str) -> Result<Self> {
        let mut values: [Option<f64>; 4] = [None; 4];
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::input(format!("gait component '{part}' is not key=value")))?;
            let axis: Axis = k.parse()?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("gait component '{part}' is not numeric")))?;
            values[axis.index()] = Some(v);
        }
        let mut a = [0.0; 4];
        for axis in Axis::ALL {
            a[axis.index()] = values[axis.index()]
                .ok_or_else(|| Error::input(format!("gait '{s}' is missing '{axis}'")))?;
        }
        Ok(Gait::from_array(a))
    }
}

/// Per-kinematic step sizes that cost one unit of smoothness loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub s_stroke: f64,
    pub s_pitch: f64,
    pub s_freq: f64,
    pub s_spo: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes {
            s_stroke: 5.0,
            s_pitch: 5.0,
            s_freq: 0.125,
            s_spo: 11.25,
        }
    }
}

impl StepSizes {
    pub fn new(s_stroke: f64, s_pitch: f64, s_freq: f64, s_spo: f64) -> Result<Self> {
        let s = StepSizes {
            s_stroke,
            s_pitch,
            s_freq,
            s_spo,
        };
        if s.to_array().iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(s)
        } else {
            Err(Error::input("step sizes must be finite and strictly positive"))
        }
    }

    /// `[s_freq, s_stroke, s_pitch, s_spo]`, matching [`Gait::to_array`].
    pub fn to_array(&self) -> [f64; 4] {
        [self.s_freq, self.s_stroke, self.s_pitch, self.s_spo]
    }

    pub fn normalize(&self, g: &Gait) -> [f64; 4] {
        let a = g.to_array();
        let s = self.to_array();
        [a[0] / s[0], a[1] / s[1], a[2] / s[2], a[3] / s[3]]
    }

    pub fn denormalize(&self, u: [f64; 4]) -> Gait {
        let s = self.to_array();
        Gait::from_array([u[0] * s[0], u[1] * s[1], u[2] * s[2], u[3] * s[3]])
    }
}

/// Upper stroke-amplitude bound at frequency `f`.
pub fn stroke_bound(f: f64) -> f64 {
    97.0 - 30.0 * f
}

/// Upper pitch-amplitude bound at frequency `f`.
pub fn pitch_bound(f: f64) -> f64 {
    75.0 - 26.0 * f
}

/// A single violated attainable-gait bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub axis: Axis,
    pub value: f64,
    /// The bound the value failed to stay strictly inside of.
    pub bound: f64,
    pub upper: bool,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.upper {
            write!(f, "{} = {} is not < {}", self.axis, self.value, self.bound)
        } else {
            write!(f, "{} = {} is not > {}", self.axis, self.value, self.bound)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible,
    Infeasible(Vec<Violation>),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Checks `0 < Φ < 97 − 30f` and `0 < Θ < 75 − 26f`.
pub fn validate_gait(g: &Gait) -> Result<Feasibility> {
    if !g.is_finite() {
        return Err(Error::input(format!("gait has non-finite fields: {g:?}")));
    }
    let mut violations = Vec::new();
    let checks = [
        (Axis::Stroke, g.stroke_amp, stroke_bound(g.frequency)),
        (Axis::Pitch, g.pitch_amp, pitch_bound(g.frequency)),
    ];
    for (axis, value, upper) in checks {
        if value <= 0.0 {
            violations.push(Violation {
                axis,
                value,
                bound: 0.0,
                upper: false,
            });
        }
        if value >= upper {
            violations.push(Violation {
                axis,
                value,
                bound: upper,
                upper: true,
            });
        }
    }
    if violations.is_empty() {
        Ok(Feasibility::Feasible)
    } else {
        Ok(Feasibility::Infeasible(violations))
    }
}

/// Convenience wrapper: `true` iff the gait is finite and attainable.
pub fn is_feasible(g: &Gait) -> bool {
    matches!(validate_gait(g), Ok(Feasibility::Feasible))
}

/// Normalized Euclidean distance between two gaits.
pub fn kinematic_distance(current: &Gait, proposed: &Gait, s: &StepSizes) -> f64 {
    let x = current.to_array();
    let y = proposed.to_array();
    let s = s.to_array();
    (0..4)
        .map(|i| {
            let d = (y[i] - x[i]).abs() / s[i];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn feasible_low_frequency() {
        let g = Gait::new(0.75, 55.0, 55.0, 0.0);
        assert_eq!(stroke_bound(0.75), 74.5);
        assert_eq!(pitch_bound(0.75), 55.5);
        assert!(validate_gait(&g).unwrap().is_feasible());
    }

    #[test]
    fn stroke_bound_is_strict() {
        let g = Gait::new(2.0, 37.0, 20.0, 0.0);
        match validate_gait(&g).unwrap() {
            Feasibility::Infeasible(v) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].axis, Axis::Stroke);
                assert_eq!(v[0].bound, 37.0);
                assert!(v[0].upper);
            }
            Feasibility::Feasible => panic!("boundary gait must be infeasible"),
        }
    }

    #[test]
    fn feasible_mid_frequency() {
        let g = Gait::new(1.0, 50.0, 40.0, 22.5);
        assert_eq!(stroke_bound(1.0), 67.0);
        assert_eq!(pitch_bound(1.0), 49.0);
        assert!(validate_gait(&g).unwrap().is_feasible());
    }

    #[test]
    fn zero_amplitude_violates_lower_bound() {
        let g = Gait::new(1.0, 0.0, 10.0, 0.0);
        let Feasibility::Infeasible(v) = validate_gait(&g).unwrap() else {
            panic!("zero stroke is not attainable");
        };
        assert!(!v[0].upper);
    }

    #[test]
    fn non_finite_is_input_error() {
        let g = Gait::new(f64::NAN, 10.0, 10.0, 0.0);
        assert!(matches!(validate_gait(&g), Err(Error::Input(_))));
    }

    #[test]
    fn distance_examples() {
        let s1 = StepSizes::new(1.0, 1.0, 0.125, 11.25).unwrap();
        let a = Gait::new(1.0, 30.0, 30.0, 0.0);
        assert_eq!(kinematic_distance(&a, &a, &s1), 0.0);
        let b = Gait::new(1.0, 33.0, 34.0, 0.0);
        assert!((kinematic_distance(&a, &b, &s1) - 5.0).abs() < 1e-12);
        let s5 = StepSizes::new(5.0, 1.0, 0.125, 11.25).unwrap();
        let c = Gait::new(1.0, 40.0, 30.0, 0.0);
        assert!((kinematic_distance(&a, &c, &s5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn step_sizes_must_be_positive() {
        assert!(StepSizes::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(StepSizes::new(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn parse_gait_and_material() {
        let g: Gait = "f=1,stroke=30,pitch=30,spo=0".parse().unwrap();
        assert_eq!(g, Gait::new(1.0, 30.0, 30.0, 0.0));
        assert!("f=1,stroke=30".parse::<Gait>().is_err());
        assert_eq!("PDMS_1_10".parse::<Material>().unwrap(), Material::Pdms1To10);
        assert_eq!("pdms-1-20".parse::<Material>().unwrap(), Material::Pdms1To20);
        assert_eq!("rigid".parse::<Material>().unwrap(), Material::Rigid);
        assert!("steel".parse::<Material>().is_err());
    }

    #[test]
    fn projection_lands_inside() {
        let g = Gait::new(2.5, 90.0, -3.0, 60.0).project();
        assert!(is_feasible(&g));
        assert_eq!(g.frequency, FREQ_MAX);
        assert_eq!(g.spo, SPO_MAX);
        let rest = Gait::new(0.75, 0.0, 0.0, 0.0).project();
        assert!(is_feasible(&rest));
        assert_eq!(rest.stroke_amp, FEASIBILITY_MARGIN);
    }

    fn arb_gait() -> impl Strategy<Value = Gait> {
        (0.75f64..2.0, 0.0f64..75.0, 0.0f64..56.0, -22.5f64..45.0)
            .prop_map(|(f, p, t, d)| Gait::new(f, p, t, d))
    }

    proptest! {
        #[test]
        fn feasibility_monotone_in_frequency(g in arb_gait(), shrink in 0.0f64..1.0) {
            if is_feasible(&g) {
                let lower = Gait { frequency: g.frequency * shrink, ..g };
                prop_assert!(is_feasible(&lower));
            }
        }

        #[test]
        fn distance_is_a_metric(a in arb_gait(), b in arb_gait(), c in arb_gait()) {
            let s = StepSizes::default();
            let ab = kinematic_distance(&a, &b, &s);
            let ba = kinematic_distance(&b, &a, &s);
            let bc = kinematic_distance(&b, &c, &s);
            let ac = kinematic_distance(&a, &c, &s);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(kinematic_distance(&a, &a, &s), 0.0);
            if a != b {
                prop_assert!(ab > 0.0);
            }
        }

        #[test]
        fn distance_scale_invariant(a in arb_gait(), d in -10.0f64..10.0, k in 0.1f64..10.0) {
            let s = StepSizes::default();
            let b = a.with(Axis::Stroke, a.stroke_amp + d);
            let scaled_b = a.with(Axis::Stroke, a.stroke_amp + k * d);
            let scaled_s = StepSizes { s_stroke: s.s_stroke * k, ..s };
            let base = kinematic_distance(&a, &b, &s);
            let scaled = kinematic_distance(&a, &scaled_b, &scaled_s);
            prop_assert!((base - scaled).abs() < 1e-9 * (1.0 + base));
        }

        #[test]
        fn projection_always_feasible(
            f in -5.0f64..5.0, p in -100.0f64..200.0, t in -100.0f64..200.0, d in -90.0f64..90.0
        ) {
            let g = Gait::new(f, p, t, d).project();
            prop_assert!(is_feasible(&g));
        }
    }
}
