//! Fully-connected tanh network on the four static kinematics.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{derive_seed, DatasetRow};
use crate::error::{Error, Result};

use super::optim::{Optimizer, OptimizerConfig};
use super::poly::single_material;
use super::{ForwardModel, InputNorm, ModelBody, Target};

#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Epochs without improvement in monitored MAE before stopping.
    pub patience: usize,
    pub norm: InputNorm,
}

impl Default for FeedforwardConfig {
    fn default() -> Self {
        FeedforwardConfig {
            hidden: vec![64, 64],
            epochs: 1000,
            batch_size: 32,
            optimizer: OptimizerConfig::momentum(0.01),
            patience: 50,
            norm: InputNorm::default(),
        }
    }
}

impl FeedforwardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("feedforward hidden widths must be non-empty and positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        self.norm.validate()
    }
}

/// Weights are stored flat: for each layer, a row-major `out × in` matrix
/// followed by `out` biases. Outputs are trained in standardized units and
/// mapped back with `y_mean`/`y_std`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNet {
    pub layers: Vec<usize>,
    pub params: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl FeedforwardNet {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layers: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(layers));
        for w in layers.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-a..a)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        FeedforwardNet {
            layers: layers.to_vec(),
            params,
            y_mean: 0.0,
            y_std: 1.0,
        }
    }

    fn raw(&self, u: &[f64; 4]) -> f64 {
        let mut a: Vec<f64> = u.to_vec();
        let mut off = 0;
        let last = self.layers.len() - 2;
        for (l, w) in self.layers.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let (wm, rest) = self.params[off..].split_at(n_in * n_out);
            let b = &rest[..n_out];
            let mut z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + dot(&wm[o * n_in..(o + 1) * n_in], &a))
                .collect();
            if l < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
            off += n_in * n_out + n_out;
        }
        a[0]
    }

    pub fn predict(&self, u: &[f64; 4]) -> f64 {
        self.raw(u) * self.y_std + self.y_mean
    }

    /// Accumulates `d(0.5·(raw − y)²)/dθ · scale` into `grad`; returns the
    /// squared error.
    fn backprop(&self, u: &[f64; 4], y: f64, scale: f64, grad: &mut [f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        let n_layers = self.layers.len() - 1;
        acts.clear();
        acts.push(u.to_vec());
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for (l, w) in self.layers.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            offsets.push(off);
            let wm = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let a = &acts[l];
            let mut z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + dot(&wm[o * n_in..(o + 1) * n_in], a))
                .collect();
            if l + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
            off += n_in * n_out + n_out;
        }
        let err = acts[n_layers][0] - y;
        let mut delta = vec![err * scale];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layers[l], self.layers[l + 1]);
            let off = offsets[l];
            let a_in = &acts[l];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                gb[o] += delta[o];
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(a_in) {
                    *g += delta[o] * a;
                }
            }
            if l > 0 {
                let wm = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    for (p, w) in prev.iter_mut().zip(&wm[o * n_in..(o + 1) * n_in]) {
                        *p += delta[o] * w;
                    }
                }
                // tanh' = 1 − a²
                for (p, a) in prev.iter_mut().zip(a_in) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
        err * err
    }
}

fn param_count(layers: &[usize]) -> usize {
    layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn canonical_order(rows: &mut [([f64; 4], f64)]) {
    rows.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.total_cmp(&b.1))
    });
}

fn mae(net: &FeedforwardNet, rows: &[([f64; 4], f64)]) -> f64 {
    rows.iter().map(|(u, y)| (net.predict(u) - y).abs()).sum::<f64>() / rows.len() as f64
}

/// Mini-batch training on squared error. When `holdout` rows are given
/// early stopping monitors their MAE, otherwise the training MAE; the best
/// epoch's parameters are returned.
pub fn fit_feedforward(
    train: &[DatasetRow],
    holdout: Option<&[DatasetRow]>,
    config: &FeedforwardConfig,
    target: Target,
    seed: u64,
) -> Result<ForwardModel> {
    config.validate()?;
    let material = single_material(train)?;
    if let Some(h) = holdout {
        if h.iter().any(|r| r.material != material) {
            return Err(Error::input("holdout rows are for a different material"));
        }
    }
    let prep = |rows: &[DatasetRow]| -> Vec<([f64; 4], f64)> {
        let mut v: Vec<_> = rows.iter().map(|r| (config.norm.apply(&r.gait), target.of(r))).collect();
        canonical_order(&mut v);
        v
    };
    let data = prep(train);
    let held = holdout.filter(|h| !h.is_empty()).map(prep);

    let n = data.len() as f64;
    let y_mean = data.iter().map(|d| d.1).sum::<f64>() / n;
    let var = data.iter().map(|d| (d.1 - y_mean).powi(2)).sum::<f64>() / n;
    let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };

    let mut layers = vec![4];
    layers.extend(&config.hidden);
    layers.push(1);
    let mut net = FeedforwardNet::init(&layers, seed);
    net.y_mean = y_mean;
    net.y_std = y_std;

    let monitor = |net: &FeedforwardNet| mae(net, held.as_deref().unwrap_or(&data));
    let mut best = net.params.clone();
    let mut best_score = monitor(&net);
    let mut since_best = 0;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut opt = Optimizer::new(config.optimizer, net.params.len());
    let mut grad = vec![0.0; net.params.len()];
    let mut acts = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sse = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let (u, y) = &data[i];
                sse += net.backprop(u, (y - y_mean) / y_std, scale, &mut grad, &mut acts);
            }
            opt.step(&mut net.params, &grad);
        }
        if !sse.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Training { epoch });
        }
        let score = monitor(&net);
        if score < best_score {
            best_score = score;
            best.clone_from(&net.params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    net.params = best;
    let train_mae = mae(&net, &data);
    let holdout_mae = held.as_deref().map(|h| mae(&net, h));
    Ok(ForwardModel {
        target,
        material,
        norm: config.norm,
        body: ModelBody::Feedforward(net),
        train_mae: Some(train_mae),
        holdout_mae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::{Gait, Material};
    use crate::surrogate::predict_avg;

    fn rows(n: usize, f: impl Fn(&Gait) -> f64) -> Vec<DatasetRow> {
        (0..n)
            .map(|i| {
                let x = i as f64;
                let g = Gait::new(
                    0.75 + 1.25 * (x * 0.618_033_988_7).fract(),
                    55.0 * (x * 0.414_213_562_3).fract(),
                    55.0 * (x * 0.732_050_807_6).fract(),
                    -22.5 + 67.5 * (x * 0.236_067_977_5).fract(),
                );
                DatasetRow {
                    material: Material::Rigid,
                    gait: g,
                    voltage: 4.98,
                    thrust_avg: f(&g),
                    power_avg: 0.0,
                    trace_ref: None,
                }
            })
            .collect()
    }

    fn small() -> FeedforwardConfig {
        FeedforwardConfig {
            hidden: vec![8, 8],
            epochs: 200,
            ..Default::default()
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = FeedforwardNet::init(&[4, 5, 3, 1], 7);
        let u = [0.3, -0.2, 0.9, -0.7];
        let y = 0.4;
        let mut grad = vec![0.0; net.params.len()];
        net.backprop(&u, y, 2.0, &mut grad, &mut Vec::new());
        let loss = |p: &[f64]| {
            let n = FeedforwardNet {
                params: p.to_vec(),
                ..net.clone()
            };
            (n.raw(&u) - y).powi(2)
        };
        let h = 1e-6;
        for i in 0..net.params.len() {
            let mut p = net.params.clone();
            p[i] += h;
            let up = loss(&p);
            p[i] -= 2.0 * h;
            let down = loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-6, "param {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn zero_epochs_returns_the_initialization() {
        let data = rows(64, |g| g.frequency);
        let cfg = FeedforwardConfig {
            epochs: 0,
            ..small()
        };
        let m = fit_feedforward(&data, None, &cfg, Target::Thrust, 3).unwrap();
        let ModelBody::Feedforward(net) = &m.body else { unreachable!() };
        assert_eq!(net.params, FeedforwardNet::init(&[4, 8, 8, 1], 3).params);
    }

    #[test]
    fn same_seed_same_parameters_and_row_order_does_not_matter() {
        let data = rows(64, |g| (g.stroke_amp / 20.0).sin() * g.frequency);
        let a = fit_feedforward(&data, None, &small(), Target::Thrust, 11).unwrap();
        let b = fit_feedforward(&data, None, &small(), Target::Thrust, 11).unwrap();
        assert_eq!(a, b);
        let mut rev = data.clone();
        rev.reverse();
        let c = fit_feedforward(&rev, None, &small(), Target::Thrust, 11).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn learns_a_smooth_surface() {
        let surf = |g: &Gait| 0.5 * g.frequency + (g.pitch_amp / 30.0).sin();
        let data = rows(200, surf);
        let m = fit_feedforward(&data, None, &FeedforwardConfig::default(), Target::Thrust, 1).unwrap();
        assert!(m.train_mae.unwrap() < 0.05, "train MAE {}", m.train_mae.unwrap());
        let g = Gait::new(1.3, 20.0, 27.0, 10.0);
        assert!((predict_avg(&m, &g) - surf(&g)).abs() < 0.15);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let data = rows(64, |g| g.frequency * 1e3);
        let cfg = FeedforwardConfig {
            optimizer: OptimizerConfig::momentum(1e6),
            ..small()
        };
        assert!(matches!(
            fit_feedforward(&data, None, &cfg, Target::Thrust, 0),
            Err(Error::Training { .. })
        ));
    }
}
