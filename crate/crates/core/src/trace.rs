//! Per-cycle time histories: kinematic waveform synthesis, electrical power
//! and cycle averaging, plus the trace CSV format.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::Gait;

/// Supply voltage held constant across every experiment, V.
pub const SUPPLY_VOLTAGE: f64 = 4.98;
pub const DEFAULT_SAMPLES_PER_CYCLE: usize = 50;
pub const MIN_SAMPLES_PER_CYCLE: usize = 8;

/// Sampled stroke/pitch angle histories for one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub time: Vec<f64>,
    pub stroke_angle: Vec<f64>,
    pub pitch_angle: Vec<f64>,
}

/// `φ(t) = Φ sin(2πft)`, `θ(t) = Θ sin(2πft + δ)` at `t_j = j / (f n)`.
pub fn synthesize_waveforms(g: &Gait, samples_per_cycle: usize) -> Result<Kinematics> {
    if samples_per_cycle < MIN_SAMPLES_PER_CYCLE {
        return Err(Error::input(format!(
            "samples_per_cycle must be >= {MIN_SAMPLES_PER_CYCLE}, got {samples_per_cycle}"
        )));
    }
    if !(g.frequency > 0.0) || !g.is_finite() {
        return Err(Error::input("waveform synthesis needs a finite, positive frequency"));
    }
    let n = samples_per_cycle;
    let offset = g.spo.to_radians();
    let mut k = Kinematics {
        time: Vec::with_capacity(n),
        stroke_angle: Vec::with_capacity(n),
        pitch_angle: Vec::with_capacity(n),
    };
    for j in 0..n {
        let t = j as f64 / (g.frequency * n as f64);
        let phase = cycle_phase(j, n);
        k.time.push(t);
        k.stroke_angle.push(g.stroke_amp * phase.sin());
        k.pitch_angle.push(g.pitch_amp * (phase + offset).sin());
    }
    Ok(k)
}

/// `2πf·t_j`, computed from the sample index so it does not depend on `f`.
pub(crate) fn cycle_phase(j: usize, n: usize) -> f64 {
    2.0 * PI * j as f64 / n as f64
}

/// Total electrical power of both actuators, `P = I_φ V + I_θ V`.
pub fn instantaneous_power(i_stroke: f64, i_pitch: f64, voltage: f64) -> Result<f64> {
    if i_stroke < 0.0 || i_pitch < 0.0 || !i_stroke.is_finite() || !i_pitch.is_finite() {
        return Err(Error::input(format!(
            "actuator currents must be finite and non-negative (got {i_stroke}, {i_pitch})"
        )));
    }
    if !(voltage > 0.0) || !voltage.is_finite() {
        return Err(Error::input(format!("voltage must be positive, got {voltage}")));
    }
    Ok(i_stroke * voltage + i_pitch * voltage)
}

/// Sampled measurements over one flap cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub time: Vec<f64>,
    pub stroke_angle: Vec<f64>,
    pub pitch_angle: Vec<f64>,
    pub thrust: Vec<f64>,
    pub lift: Vec<f64>,
    pub side: Vec<f64>,
    pub current_stroke: Vec<f64>,
    pub current_pitch: Vec<f64>,
    pub voltage: f64,
}

impl CycleTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.time.len();
        let lens = [
            self.stroke_angle.len(),
            self.pitch_angle.len(),
            self.thrust.len(),
            self.lift.len(),
            self.side.len(),
            self.current_stroke.len(),
            self.current_pitch.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::input("trace series have mismatched lengths"));
        }
        if n == 0 {
            return Err(Error::input("trace is empty"));
        }
        if n < MIN_SAMPLES_PER_CYCLE {
            return Err(Error::input(format!(
                "trace has {n} samples, need at least {MIN_SAMPLES_PER_CYCLE}"
            )));
        }
        if !(self.voltage > 0.0) {
            return Err(Error::input("trace voltage must be positive"));
        }
        if self
            .current_stroke
            .iter()
            .chain(&self.current_pitch)
            .any(|&c| c < 0.0)
        {
            return Err(Error::input("trace currents must be non-negative"));
        }
        Ok(())
    }

    /// Per-sample electrical power.
    pub fn power(&self) -> Result<Vec<f64>> {
        self.current_stroke
            .iter()
            .zip(&self.current_pitch)
            .map(|(&a, &b)| instantaneous_power(a, b, self.voltage))
            .collect()
    }

    /// Sample-wise mean of several traces of equal length; the time axis is
    /// taken from the first.
    pub fn mean_of(traces: &[CycleTrace]) -> Result<CycleTrace> {
        let first = traces
            .first()
            .ok_or_else(|| Error::input("cannot average zero traces"))?;
        let n = first.len();
        if traces.iter().any(|t| t.len() != n) {
            return Err(Error::input("cannot average traces of different lengths"));
        }
        let k = traces.len() as f64;
        let avg = |pick: fn(&CycleTrace) -> &Vec<f64>| -> Vec<f64> {
            (0..n)
                .map(|j| traces.iter().map(|t| pick(t)[j]).sum::<f64>() / k)
                .collect()
        };
        Ok(CycleTrace {
            time: first.time.clone(),
            stroke_angle: avg(|t| &t.stroke_angle),
            pitch_angle: avg(|t| &t.pitch_angle),
            thrust: avg(|t| &t.thrust),
            lift: avg(|t| &t.lift),
            side: avg(|t| &t.side),
            current_stroke: avg(|t| &t.current_stroke),
            current_pitch: avg(|t| &t.current_pitch),
            voltage: traces.iter().map(|t| t.voltage).sum::<f64>() / k,
        })
    }
}

/// Cycle-average thrust, power and (optionally) figure of merit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub thrust_avg: f64,
    pub power_avg: f64,
    pub fom: Option<f64>,
}

/// Averages thrust and electrical power over a trace. `fom` is left unset.
pub fn cycle_summary(trace: &CycleTrace) -> Result<CycleSummary> {
    trace.validate()?;
    let n = trace.len() as f64;
    let thrust_avg = trace.thrust.iter().sum::<f64>() / n;
    let power_avg = trace.power()?.iter().sum::<f64>() / n;
    Ok(CycleSummary {
        thrust_avg,
        power_avg,
        fom: None,
    })
}

const TRACE_HEADER: [&str; 9] = [
    "time_s",
    "stroke_deg",
    "pitch_deg",
    "thrust_n",
    "lift_n",
    "side_n",
    "current_stroke_a",
    "current_pitch_a",
    "voltage_v",
];

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    time_s: f64,
    stroke_deg: f64,
    pitch_deg: f64,
    thrust_n: f64,
    lift_n: f64,
    side_n: f64,
    current_stroke_a: f64,
    current_pitch_a: f64,
    voltage_v: f64,
}

pub fn write_trace_csv<W: Write>(trace: &CycleTrace, out: W) -> Result<()> {
    // explicit header so that an empty table still carries one
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for j in 0..trace.len() {
        w.serialize(TraceRecord {
            time_s: trace.time[j],
            stroke_deg: trace.stroke_angle[j],
            pitch_deg: trace.pitch_angle[j],
            thrust_n: trace.thrust[j],
            lift_n: trace.lift[j],
            side_n: trace.side[j],
            current_stroke_a: trace.current_stroke[j],
            current_pitch_a: trace.current_pitch[j],
            voltage_v: trace.voltage,
        })?;
    }
    w.flush().map_err(|e| Error::io("<trace csv>", e))?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<CycleTrace> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(Error::input(format!(
            "trace csv header mismatch: expected {}",
            TRACE_HEADER.join(",")
        )));
    }
    let mut t = CycleTrace {
        time: vec![],
        stroke_angle: vec![],
        pitch_angle: vec![],
        thrust: vec![],
        lift: vec![],
        side: vec![],
        current_stroke: vec![],
        current_pitch: vec![],
        voltage: 0.0,
    };
    for rec in r.deserialize() {
        let rec: TraceRecord = rec?;
        t.time.push(rec.time_s);
        t.stroke_angle.push(rec.stroke_deg);
        t.pitch_angle.push(rec.pitch_deg);
        t.thrust.push(rec.thrust_n);
        t.lift.push(rec.lift_n);
        t.side.push(rec.side_n);
        t.current_stroke.push(rec.current_stroke_a);
        t.current_pitch.push(rec.current_pitch_a);
        t.voltage = rec.voltage_v;
    }
    t.validate()?;
    Ok(t)
}

pub fn save_trace(trace: &CycleTrace, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(trace, std::io::BufWriter::new(f))
}

pub fn load_trace(path: &Path) -> Result<CycleTrace> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace_csv(std::io::BufReader::new(f)).map_err(|e| Error::data(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_trace(n: usize, thrust: f64, i_s: f64, i_p: f64) -> CycleTrace {
        CycleTrace {
            time: (0..n).map(|j| j as f64 / n as f64).collect(),
            stroke_angle: vec![0.0; n],
            pitch_angle: vec![0.0; n],
            thrust: vec![thrust; n],
            lift: vec![0.0; n],
            side: vec![0.0; n],
            current_stroke: vec![i_s; n],
            current_pitch: vec![i_p; n],
            voltage: SUPPLY_VOLTAGE,
        }
    }

    #[test]
    fn waveform_examples() {
        let k = synthesize_waveforms(&Gait::new(1.0, 40.0, 30.0, 45.0), 8).unwrap();
        assert_eq!(k.stroke_angle[0], 0.0);
        assert!((k.stroke_angle[2] - 40.0).abs() < 1e-12);
        assert!((k.pitch_angle[0] - 21.213203435596427).abs() < 1e-9);
        assert_eq!(k.time[2], 0.25);
    }

    #[test]
    fn waveform_rejects_short_cycles() {
        assert!(synthesize_waveforms(&Gait::new(1.0, 40.0, 30.0, 0.0), 7).is_err());
    }

    #[test]
    fn power_examples() {
        assert_eq!(instantaneous_power(0.0, 0.0, 4.98).unwrap(), 0.0);
        assert!((instantaneous_power(0.6, 0.4, 4.98).unwrap() - 4.98).abs() < 1e-12);
        assert!((instantaneous_power(0.5, 0.3, 4.98).unwrap() - 3.984).abs() < 1e-12);
        assert!(instantaneous_power(-0.1, 0.3, 4.98).is_err());
        assert!(instantaneous_power(0.1, 0.3, 0.0).is_err());
    }

    #[test]
    fn summary_of_constant_trace() {
        let s = cycle_summary(&constant_trace(50, 1.0, 0.5, 0.3)).unwrap();
        assert!((s.thrust_avg - 1.0).abs() < 1e-12);
        assert!((s.power_avg - 3.984).abs() < 1e-12);
        assert!(s.fom.is_none());
    }

    #[test]
    fn summary_of_empty_trace_is_error() {
        let t = constant_trace(0, 1.0, 0.5, 0.3);
        assert!(matches!(cycle_summary(&t), Err(Error::Input(_))));
    }

    #[test]
    fn trace_csv_roundtrip() {
        let t = constant_trace(10, 0.25, 0.1, 0.2);
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_s,stroke_deg,pitch_deg,thrust_n,lift_n,side_n,"));
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), t);
    }

    proptest! {
        #[test]
        fn waveform_extrema_match_amplitudes(
            f in 0.75f64..2.0, phi in 0.0f64..70.0, theta in 0.0f64..55.0, spo in -22.5f64..45.0,
            quarter in 2usize..20
        ) {
            let n = quarter * 4;
            let g = Gait::new(f, phi, theta, spo);
            let k = synthesize_waveforms(&g, n).unwrap();
            prop_assert!((k.stroke_angle[quarter] - phi).abs() < 1e-9);
            prop_assert!((k.stroke_angle[3 * quarter] + phi).abs() < 1e-9);
            let max_pitch = k.pitch_angle.iter().cloned().fold(f64::MIN, f64::max);
            let min_pitch = k.pitch_angle.iter().cloned().fold(f64::MAX, f64::min);
            // one sample spacing in phase bounds the sampled extremum
            let tol = theta * (1.0 - (PI / n as f64).cos()) + 1e-9;
            prop_assert!((max_pitch - theta).abs() <= tol);
            prop_assert!((min_pitch + theta).abs() <= tol);
        }

        #[test]
        fn power_is_linear(a in 0.0f64..3.0, b in 0.0f64..3.0, v in 0.1f64..12.0, k in 0.0f64..4.0) {
            let p = instantaneous_power(a, b, v).unwrap();
            prop_assert!((instantaneous_power(k * a, b, v).unwrap()
                - (k * a * v + b * v)).abs() < 1e-9);
            prop_assert!((instantaneous_power(a, b, k * v + 0.1).unwrap()
                - (a + b) * (k * v + 0.1)).abs() < 1e-9);
            prop_assert!((p - (a + b) * v).abs() < 1e-9);
        }
    }
}
