//! LSTM over one flapping cycle: per-sample thrust and power histories.
//!
//! Each timestep sees the normalized gait plus the sine and cosine of the
//! cycle phase. The cycle-average prediction is the mean of the per-step
//! outputs.

use matrixmultiply::dgemm;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{derive_seed, GaitRun};
use crate::error::{Error, Result};
use crate::gait::{Gait, Material};
use crate::trace::{cycle_phase, MIN_SAMPLES_PER_CYCLE};

use super::optim::{Optimizer, OptimizerConfig};
use super::{ForwardModel, InputNorm, ModelBody, Target};

/// Per-step input width: four kinematics, sin and cos of phase.
pub const SEQ_INPUTS: usize = 6;
pub const SEQ_OUTPUTS: usize = 2;

/// One cycle of training data.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub material: Material,
    pub gait: Gait,
    pub thrust: Vec<f64>,
    pub power: Vec<f64>,
}

impl SequenceSample {
    pub fn from_run(run: &GaitRun) -> Result<Self> {
        Ok(SequenceSample {
            material: run.row.material,
            gait: run.row.gait,
            thrust: run.trace.thrust.clone(),
            power: run.trace.power()?,
        })
    }

    fn mean(&self, k: usize) -> f64 {
        let v = if k == 0 { &self.thrust } else { &self.power };
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub patience: usize,
    pub norm: InputNorm,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            hidden: 32,
            epochs: 1000,
            batch_size: 32,
            // plain momentum stalls on the recurrent weights
            optimizer: OptimizerConfig::adam(0.005),
            patience: 50,
            norm: InputNorm::default(),
        }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::config("sequence hidden width and batch_size must be positive"));
        }
        self.norm.validate()
    }
}

/// Flat parameter layout: gate weights `(6 + H) × 4H` row-major with gate
/// blocks ordered input, forget, cell, output; gate biases `4H`; head
/// weights `H × 2`; head biases `2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceNet {
    pub hidden: usize,
    pub samples_per_cycle: usize,
    pub params: Vec<f64>,
    pub y_mean: [f64; 2],
    pub y_std: [f64; 2],
    pub train_mae: [f64; 2],
    pub holdout_mae: Option<[f64; 2]>,
}

struct Layout {
    h: usize,
    k: usize,
    w: usize,
    b: usize,
    wy: usize,
    by: usize,
    len: usize,
}

impl Layout {
    fn new(h: usize) -> Self {
        let k = SEQ_INPUTS + h;
        let w = 0;
        let b = w + k * 4 * h;
        let wy = b + 4 * h;
        let by = wy + h * SEQ_OUTPUTS;
        Layout {
            h,
            k,
            w,
            b,
            wy,
            by,
            len: by + SEQ_OUTPUTS,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn step_input(u: &[f64; 4], j: usize, n: usize) -> [f64; SEQ_INPUTS] {
    let ph = cycle_phase(j, n);
    [u[0], u[1], u[2], u[3], ph.sin(), ph.cos()]
}

impl SequenceNet {
    pub fn init(hidden: usize, samples_per_cycle: usize, seed: u64) -> Self {
        let lay = Layout::new(hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; lay.len];
        let a = 1.0 / (hidden as f64).sqrt();
        for p in &mut params[lay.w..lay.b] {
            *p = rng.random_range(-a..a);
        }
        for p in &mut params[lay.b + hidden..lay.b + 2 * hidden] {
            *p = 1.0;
        }
        let ay = (6.0 / (hidden + SEQ_OUTPUTS) as f64).sqrt();
        for p in &mut params[lay.wy..lay.by] {
            *p = rng.random_range(-ay..ay);
        }
        SequenceNet {
            hidden,
            samples_per_cycle,
            params,
            y_mean: [0.0; 2],
            y_std: [1.0; 2],
            train_mae: [f64::NAN; 2],
            holdout_mae: None,
        }
    }

    /// Output rows `[thrust, power]` for `n` steps of one cycle.
    pub fn predict_series(&self, u: &[f64; 4], n: usize) -> Vec<[f64; 2]> {
        let lay = Layout::new(self.hidden);
        let (h_n, k) = (lay.h, lay.k);
        let w = &self.params[lay.w..lay.b];
        let b = &self.params[lay.b..lay.wy];
        let wy = &self.params[lay.wy..lay.by];
        let by = &self.params[lay.by..lay.len];
        let mut z = vec![0.0; k];
        let mut c = vec![0.0; h_n];
        let mut g = vec![0.0; 4 * h_n];
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            z[..SEQ_INPUTS].copy_from_slice(&step_input(u, j, n));
            g.copy_from_slice(b);
            for (kk, zk) in z.iter().enumerate() {
                if *zk == 0.0 {
                    continue;
                }
                let row = &w[kk * 4 * h_n..(kk + 1) * 4 * h_n];
                for (gj, wj) in g.iter_mut().zip(row) {
                    *gj += zk * wj;
                }
            }
            let mut y = [by[0], by[1]];
            for i in 0..h_n {
                let ig = sigmoid(g[i]);
                let fg = sigmoid(g[h_n + i]);
                let cg = g[2 * h_n + i].tanh();
                let og = sigmoid(g[3 * h_n + i]);
                c[i] = fg * c[i] + ig * cg;
                let hi = og * c[i].tanh();
                z[SEQ_INPUTS + i] = hi;
                y[0] += hi * wy[i * SEQ_OUTPUTS];
                y[1] += hi * wy[i * SEQ_OUTPUTS + 1];
            }
            out.push([
                y[0] * self.y_std[0] + self.y_mean[0],
                y[1] * self.y_std[1] + self.y_mean[1],
            ]);
        }
        out
    }

    /// Mean over the predicted series.
    pub fn predict_avg(&self, u: &[f64; 4], n: usize) -> [f64; 2] {
        let s = self.predict_series(u, n);
        let mut acc = [0.0; 2];
        for o in &s {
            acc[0] += o[0];
            acc[1] += o[1];
        }
        [acc[0] / n as f64, acc[1] / n as f64]
    }
}

/// Forward and backward state for a batch of `bsz` sequences of length `t`.
struct Tape {
    bsz: usize,
    t: usize,
    z: Vec<f64>,     // t × bsz × k
    gates: Vec<f64>, // t × bsz × 4h, activated
    c: Vec<f64>,     // (t + 1) × bsz × h, c[0] = 0
    tc: Vec<f64>,    // t × bsz × h
    y: Vec<f64>,     // t × bsz × 2
}

impl Tape {
    fn new(lay: &Layout, bsz: usize, t: usize) -> Self {
        Tape {
            bsz,
            t,
            z: vec![0.0; t * bsz * lay.k],
            gates: vec![0.0; t * bsz * 4 * lay.h],
            c: vec![0.0; (t + 1) * bsz * lay.h],
            tc: vec![0.0; t * bsz * lay.h],
            y: vec![0.0; t * bsz * SEQ_OUTPUTS],
        }
    }
}

/// `c (m×n) = beta·c + a (m×k) · b (k×n)`, with explicit strides so that
/// transposed operands need no copies.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    // SAFETY: the callers pass slices whose extents cover every index
    // reachable through the given dimensions and strides.
    unsafe {
        dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc,
        );
    }
}

fn forward_batch(params: &[f64], lay: &Layout, inputs: &[[f64; 4]], t: usize, tape: &mut Tape) {
    let (h, k, bsz) = (lay.h, lay.k, inputs.len());
    debug_assert_eq!(tape.bsz, bsz);
    let w = &params[lay.w..lay.b];
    let b = &params[lay.b..lay.wy];
    let wy = &params[lay.wy..lay.by];
    let by = &params[lay.by..lay.len];
    let g4 = 4 * h;
    for step in 0..t {
        let zs = step * bsz * k;
        for (r, u) in inputs.iter().enumerate() {
            let row = &mut tape.z[zs + r * k..zs + (r + 1) * k];
            row[..SEQ_INPUTS].copy_from_slice(&step_input(u, step, t));
            if step == 0 {
                row[SEQ_INPUTS..].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        if step > 0 {
            // h_{t-1} = o ⊙ tanh(c) from the previous step
            let gp = (step - 1) * bsz * g4;
            let tp = (step - 1) * bsz * h;
            for r in 0..bsz {
                for i in 0..h {
                    tape.z[zs + r * k + SEQ_INPUTS + i] =
                        tape.gates[gp + r * g4 + 3 * h + i] * tape.tc[tp + r * h + i];
                }
            }
        }
        let gs = step * bsz * g4;
        {
            let gslice = &mut tape.gates[gs..gs + bsz * g4];
            for r in 0..bsz {
                gslice[r * g4..(r + 1) * g4].copy_from_slice(b);
            }
            gemm(
                bsz,
                k,
                g4,
                &tape.z[zs..zs + bsz * k],
                k as isize,
                1,
                w,
                g4 as isize,
                1,
                1.0,
                gslice,
                g4 as isize,
                1,
            );
        }
        let cs_prev = step * bsz * h;
        let cs = (step + 1) * bsz * h;
        let ts = step * bsz * h;
        for r in 0..bsz {
            let gr = &mut tape.gates[gs + r * g4..gs + (r + 1) * g4];
            for i in 0..h {
                gr[i] = sigmoid(gr[i]);
                gr[h + i] = sigmoid(gr[h + i]);
                gr[2 * h + i] = gr[2 * h + i].tanh();
                gr[3 * h + i] = sigmoid(gr[3 * h + i]);
                let c = gr[h + i] * tape.c[cs_prev + r * h + i] + gr[i] * gr[2 * h + i];
                tape.c[cs + r * h + i] = c;
                tape.tc[ts + r * h + i] = c.tanh();
            }
        }
        let ys = step * bsz * SEQ_OUTPUTS;
        for r in 0..bsz {
            let mut y = [by[0], by[1]];
            for i in 0..h {
                let hi = tape.gates[gs + r * g4 + 3 * h + i] * tape.tc[ts + r * h + i];
                y[0] += hi * wy[i * SEQ_OUTPUTS];
                y[1] += hi * wy[i * SEQ_OUTPUTS + 1];
            }
            tape.y[ys + r * SEQ_OUTPUTS..ys + (r + 1) * SEQ_OUTPUTS].copy_from_slice(&y);
        }
    }
}

/// Gradient of `scale · Σ (y − target)²` over the batch; `targets` is laid
/// out like `tape.y`. Returns the unscaled sum of squared errors.
fn backward_batch(params: &[f64], lay: &Layout, tape: &Tape, targets: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
    let (h, k, bsz, t) = (lay.h, lay.k, tape.bsz, tape.t);
    let g4 = 4 * h;
    let w = &params[lay.w..lay.b];
    let wy = &params[lay.wy..lay.by];
    let (gw, rest) = grad.split_at_mut(lay.b);
    let (gb, rest) = rest.split_at_mut(g4);
    let (gwy, gby) = rest.split_at_mut(h * SEQ_OUTPUTS);

    let mut sse = 0.0;
    let mut dh_next = vec![0.0; bsz * h];
    let mut dc_next = vec![0.0; bsz * h];
    let mut dgate = vec![0.0; bsz * g4];
    let mut dz = vec![0.0; bsz * k];
    for step in (0..t).rev() {
        let ys = step * bsz * SEQ_OUTPUTS;
        let gs = step * bsz * g4;
        let ts = step * bsz * h;
        let cs_prev = step * bsz * h;
        for r in 0..bsz {
            let mut dy = [0.0; 2];
            for o in 0..SEQ_OUTPUTS {
                let e = tape.y[ys + r * SEQ_OUTPUTS + o] - targets[ys + r * SEQ_OUTPUTS + o];
                sse += e * e;
                dy[o] = 2.0 * e * scale;
                gby[o] += dy[o];
            }
            for i in 0..h {
                let o_g = tape.gates[gs + r * g4 + 3 * h + i];
                let tc = tape.tc[ts + r * h + i];
                let hi = o_g * tc;
                gwy[i * SEQ_OUTPUTS] += hi * dy[0];
                gwy[i * SEQ_OUTPUTS + 1] += hi * dy[1];
                let dh = dh_next[r * h + i] + dy[0] * wy[i * SEQ_OUTPUTS] + dy[1] * wy[i * SEQ_OUTPUTS + 1];
                let i_g = tape.gates[gs + r * g4 + i];
                let f_g = tape.gates[gs + r * g4 + h + i];
                let c_g = tape.gates[gs + r * g4 + 2 * h + i];
                let dc = dc_next[r * h + i] + dh * o_g * (1.0 - tc * tc);
                let c_prev = tape.c[cs_prev + r * h + i];
                let d = &mut dgate[r * g4..(r + 1) * g4];
                d[i] = dc * c_g * i_g * (1.0 - i_g);
                d[h + i] = dc * c_prev * f_g * (1.0 - f_g);
                d[2 * h + i] = dc * i_g * (1.0 - c_g * c_g);
                d[3 * h + i] = dh * tc * o_g * (1.0 - o_g);
                dc_next[r * h + i] = dc * f_g;
            }
        }
        for r in 0..bsz {
            for (g, d) in gb.iter_mut().zip(&dgate[r * g4..(r + 1) * g4]) {
                *g += d;
            }
        }
        let zs = step * bsz * k;
        // dW += Zᵀ · dG
        gemm(
            k,
            bsz,
            g4,
            &tape.z[zs..zs + bsz * k],
            1,
            k as isize,
            &dgate,
            g4 as isize,
            1,
            1.0,
            gw,
            g4 as isize,
            1,
        );
        // dZ = dG · Wᵀ
        gemm(bsz, g4, k, &dgate, g4 as isize, 1, w, 1, g4 as isize, 0.0, &mut dz, k as isize, 1);
        for r in 0..bsz {
            dh_next[r * h..(r + 1) * h].copy_from_slice(&dz[r * k + SEQ_INPUTS..(r + 1) * k]);
        }
    }
    sse
}

fn mae_pair(net: &SequenceNet, norm: &InputNorm, samples: &[SequenceSample]) -> [f64; 2] {
    let mut acc = [0.0; 2];
    for s in samples {
        let p = net.predict_avg(&norm.apply(&s.gait), net.samples_per_cycle);
        acc[0] += (p[0] - s.mean(0)).abs();
        acc[1] += (p[1] - s.mean(1)).abs();
    }
    let n = samples.len() as f64;
    [acc[0] / n, acc[1] / n]
}

fn check_samples(samples: &[SequenceSample], material: Material, t: usize) -> Result<()> {
    for s in samples {
        if s.material != material {
            return Err(Error::input("sequence samples mix materials"));
        }
        if s.thrust.len() != t || s.power.len() != t {
            return Err(Error::input(format!(
                "sequence samples must share one length; expected {t}, got {}/{}",
                s.thrust.len(),
                s.power.len()
            )));
        }
        if s.thrust.iter().chain(&s.power).any(|v| !v.is_finite()) {
            return Err(Error::input("sequence sample contains non-finite values"));
        }
    }
    Ok(())
}

fn sample_order(a: &SequenceSample, b: &SequenceSample) -> std::cmp::Ordering {
    a.gait
        .lex_cmp(&b.gait)
        .then_with(|| a.thrust.iter().zip(&b.thrust).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
}

/// Results of a sequence fit. The returned model answers for thrust; use
/// [`ForwardModel::retarget`] for the power head.
#[derive(Debug, Clone)]
pub struct SequenceTraining {
    pub model: ForwardModel,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

pub fn fit_sequence(
    train: &[SequenceSample],
    holdout: Option<&[SequenceSample]>,
    config: &SequenceConfig,
    seed: u64,
) -> Result<SequenceTraining> {
    config.validate()?;
    let first = train.first().ok_or_else(|| Error::input("no training traces"))?;
    let material = first.material;
    let t = first.thrust.len();
    if t < MIN_SAMPLES_PER_CYCLE {
        return Err(Error::input("training traces are shorter than 8 samples"));
    }
    check_samples(train, material, t)?;
    let held: Option<Vec<SequenceSample>> = match holdout {
        Some(h) if !h.is_empty() => {
            check_samples(h, material, t)?;
            Some(h.to_vec())
        }
        _ => None,
    };
    let mut data = train.to_vec();
    data.sort_by(sample_order);

    let lay = Layout::new(config.hidden);
    let mut net = SequenceNet::init(config.hidden, t, seed);
    for o in 0..SEQ_OUTPUTS {
        let vals = data.iter().flat_map(|s| if o == 0 { &s.thrust } else { &s.power });
        let n = (data.len() * t) as f64;
        let mean = vals.clone().sum::<f64>() / n;
        let var = vals.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        net.y_mean[o] = mean;
        net.y_std[o] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let inputs: Vec<[f64; 4]> = data.iter().map(|s| config.norm.apply(&s.gait)).collect();
    // targets[i] is laid out t × 2 in standardized units
    let targets: Vec<Vec<f64>> = data
        .iter()
        .map(|s| {
            (0..t)
                .flat_map(|j| {
                    [
                        (s.thrust[j] - net.y_mean[0]) / net.y_std[0],
                        (s.power[j] - net.y_mean[1]) / net.y_std[1],
                    ]
                })
                .collect()
        })
        .collect();

    let monitored: &[SequenceSample] = held.as_deref().unwrap_or(&data);
    let score_of = |net: &SequenceNet| {
        let m = mae_pair(net, &config.norm, monitored);
        m[0] / net.y_std[0] + m[1] / net.y_std[1]
    };
    let mut best = net.params.clone();
    let mut best_score = score_of(&net);
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs_run = 0;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut opt = Optimizer::new(config.optimizer, lay.len);
    let mut grad = vec![0.0; lay.len];
    let mut batch_inputs = Vec::with_capacity(config.batch_size);
    let mut batch_targets = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for batch in order.chunks(config.batch_size) {
            let bsz = batch.len();
            batch_inputs.clear();
            batch_inputs.extend(batch.iter().map(|&i| inputs[i]));
            batch_targets.clear();
            batch_targets.resize(t * bsz * SEQ_OUTPUTS, 0.0);
            for (r, &i) in batch.iter().enumerate() {
                for step in 0..t {
                    let dst = step * bsz * SEQ_OUTPUTS + r * SEQ_OUTPUTS;
                    batch_targets[dst..dst + SEQ_OUTPUTS].copy_from_slice(&targets[i][step * 2..step * 2 + 2]);
                }
            }
            let mut tape = Tape::new(&lay, bsz, t);
            forward_batch(&net.params, &lay, &batch_inputs, t, &mut tape);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / (bsz * t * SEQ_OUTPUTS) as f64;
            sse += backward_batch(&net.params, &lay, &tape, &batch_targets, scale, &mut grad);
            opt.step(&mut net.params, &grad);
        }
        epochs_run = epoch + 1;
        if !sse.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Training { epoch });
        }
        let score = score_of(&net);
        if score < best_score {
            best_score = score;
            best.clone_from(&net.params);
            best_epoch = epoch + 1;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    net.params = best;
    net.train_mae = mae_pair(&net, &config.norm, &data);
    net.holdout_mae = held.as_deref().map(|h| mae_pair(&net, &config.norm, h));
    let model = ForwardModel {
        target: Target::Thrust,
        material,
        norm: config.norm,
        train_mae: Some(net.train_mae[0]),
        holdout_mae: net.holdout_mae.map(|m| m[0]),
        body: ModelBody::Sequence(net),
    };
    Ok(SequenceTraining {
        model,
        epochs_run,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::predict_avg;

    fn toy_samples(n: usize, t: usize) -> Vec<SequenceSample> {
        (0..n)
            .map(|i| {
                let x = i as f64;
                let g = Gait::new(
                    0.75 + 1.25 * (x * 0.618_033_988_7).fract(),
                    55.0 * (x * 0.414_213_562_3).fract(),
                    55.0 * (x * 0.732_050_807_6).fract(),
                    -22.5 + 67.5 * (x * 0.236_067_977_5).fract(),
                );
                let amp = g.frequency * g.stroke_amp / 55.0;
                let thrust = (0..t).map(|j| amp * (1.0 + 0.6 * (2.0 * cycle_phase(j, t)).cos())).collect();
                let power = (0..t).map(|j| 0.5 + g.pitch_amp / 55.0 * cycle_phase(j, t).sin().abs()).collect();
                SequenceSample {
                    material: Material::Rigid,
                    gait: g,
                    thrust,
                    power,
                }
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let lay = Layout::new(3);
        let mut net = SequenceNet::init(3, 8, 5);
        // exercise the whole parameter vector
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in &mut net.params {
            *p += rng.random_range(-0.3..0.3);
        }
        let inputs = [[0.2, -0.5, 0.7, 0.1], [-0.9, 0.4, 0.0, 0.6]];
        let t = 8;
        let targets: Vec<f64> = (0..t * 2 * 2).map(|i| (i as f64 * 0.37).sin()).collect();
        let loss = |p: &[f64]| {
            let mut tape = Tape::new(&lay, 2, t);
            forward_batch(p, &lay, &inputs, t, &mut tape);
            tape.y.iter().zip(&targets).map(|(y, z)| (y - z).powi(2)).sum::<f64>()
        };
        let mut tape = Tape::new(&lay, 2, t);
        forward_batch(&net.params, &lay, &inputs, t, &mut tape);
        let mut grad = vec![0.0; lay.len];
        backward_batch(&net.params, &lay, &tape, &targets, 1.0, &mut grad);
        let h = 1e-6;
        for i in 0..lay.len {
            let mut p = net.params.clone();
            p[i] += h;
            let up = loss(&p);
            p[i] -= 2.0 * h;
            let down = loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-5 * (1.0 + fd.abs()), "param {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn batched_forward_agrees_with_single_prediction() {
        let lay = Layout::new(4);
        let net = SequenceNet::init(4, 12, 2);
        let inputs = [[0.1, 0.2, -0.3, 0.4], [0.9, -0.9, 0.5, -0.5]];
        let mut tape = Tape::new(&lay, 2, 12);
        forward_batch(&net.params, &lay, &inputs, 12, &mut tape);
        for (r, u) in inputs.iter().enumerate() {
            let s = net.predict_series(u, 12);
            for (j, o) in s.iter().enumerate() {
                let y = &tape.y[j * 2 * 2 + r * 2..j * 2 * 2 + r * 2 + 2];
                assert!((o[0] - y[0]).abs() < 1e-12 && (o[1] - y[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_mean_is_the_average_prediction() {
        let samples = toy_samples(40, 16);
        let cfg = SequenceConfig {
            hidden: 8,
            epochs: 5,
            ..Default::default()
        };
        let fit = fit_sequence(&samples, None, &cfg, 4).unwrap();
        let g = Gait::new(1.1, 30.0, 20.0, 5.0);
        for target in [Target::Thrust, Target::Power] {
            let m = fit.model.retarget(target).unwrap();
            let tr = m.predict_trace(&g).unwrap();
            let mean = tr.iter().sum::<f64>() / tr.len() as f64;
            assert!((mean - predict_avg(&m, &g)).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_reproducible_and_reduces_error() {
        let samples = toy_samples(48, 16);
        let cfg = SequenceConfig {
            hidden: 8,
            epochs: 60,
            optimizer: OptimizerConfig::adam(0.01),
            ..Default::default()
        };
        let a = fit_sequence(&samples, None, &cfg, 8).unwrap();
        let b = fit_sequence(&samples, None, &cfg, 8).unwrap();
        assert_eq!(a.model, b.model);
        let zero = fit_sequence(&samples, None, &SequenceConfig { epochs: 0, ..cfg.clone() }, 8).unwrap();
        assert!(a.model.train_mae.unwrap() < zero.model.train_mae.unwrap());
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mut samples = toy_samples(4, 16);
        samples[2].thrust.pop();
        assert!(fit_sequence(&samples, None, &SequenceConfig::default(), 0).is_err());
    }
}
