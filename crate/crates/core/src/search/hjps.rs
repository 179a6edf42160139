//! Hooke–Jeeves pattern search.

use crate::error::Result;

use super::{Algorithm, Evaluator, LossBreakdown, ModelPair, SearchRequest, SearchResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjpsConfig {
    /// Initial step in normalized units.
    pub delta0: f64,
    pub min_delta: f64,
}

impl Default for HjpsConfig {
    fn default() -> Self {
        HjpsConfig {
            delta0: 4.0,
            min_delta: 0.25,
        }
    }
}

type Point = ([f64; 4], LossBreakdown);

/// Tries `±delta` along each axis in turn, keeping any move that lowers the
/// loss. `None` once the evaluator has stopped.
fn explore(ev: &mut Evaluator<'_, '_>, start: Point, delta: f64) -> Option<Point> {
    let mut cur = start;
    for axis in 0..4 {
        for sign in [1.0, -1.0] {
            let mut y = cur.0;
            y[axis] += sign * delta;
            let cand = ev.eval_norm(y)?;
            if cand.1.total < cur.1.total {
                cur = cand;
                break;
            }
        }
    }
    Some(cur)
}

pub fn search_hjps(req: &SearchRequest, models: &ModelPair<'_>, cfg: &HjpsConfig) -> Result<SearchResult> {
    let mut ev = Evaluator::new(req, models, Algorithm::Hjps)?;
    let y0 = ev.steps().normalize(&req.current);
    let mut base = ev.eval_norm(y0).expect("first evaluation always runs");
    let mut delta = cfg.delta0;
    let mut converged = false;
    'outer: loop {
        let Some(x) = explore(&mut ev, base, delta) else { break };
        if x.1.total < base.1.total {
            let (mut prev, mut cur) = (base.0, x);
            loop {
                let mut p = cur.0;
                for i in 0..4 {
                    p[i] += cur.0[i] - prev[i];
                }
                let Some(pp) = ev.eval_norm(p) else { break 'outer };
                let Some(y) = explore(&mut ev, pp, delta) else { break 'outer };
                if y.1.total < cur.1.total {
                    prev = cur.0;
                    cur = y;
                } else {
                    break;
                }
            }
            base = cur;
        } else {
            delta *= 0.5;
            if delta < cfg.min_delta {
                converged = true;
                break;
            }
        }
    }
    Ok(ev.finish(Algorithm::Hjps, converged))
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::*;
    use crate::surrogate::{ConstantModel, Predictor, Target};

    /// Power model shaped as a quadratic bowl in normalized coordinates.
    pub(crate) struct Bowl {
        pub centre: [f64; 4],
    }

    impl Predictor for Bowl {
        fn predict(&self, g: &Gait) -> f64 {
            let y = StepSizes::default().normalize(g);
            (0..4).map(|i| (y[i] - self.centre[i]).powi(2)).sum()
        }
        fn target(&self) -> Target {
            Target::Power
        }
        fn material(&self) -> Material {
            Material::Rigid
        }
    }

    #[test]
    fn converges_on_a_convex_bowl() {
        let min = Gait::new(1.3, 22.0, 18.0, 5.0);
        let bowl = Bowl {
            centre: StepSizes::default().normalize(&min),
        };
        let zero = ConstantModel {
            value: 0.0,
            target: Target::Thrust,
            material: Material::Rigid,
        };
        let pair = ModelPair::new(&zero, &bowl).unwrap();
        let mut req = request(0.0, (0.0, 0.0, 1.0), 1);
        req.eval_budget = Some(10_000);
        let r = search_hjps(&req, &pair, &HjpsConfig::default()).unwrap();
        assert_eq!(r.terminated_by, Termination::Converged);
        let y = StepSizes::default().normalize(&r.gait);
        let d: f64 = (0..4).map(|i| (y[i] - bowl.centre[i]).powi(2)).sum::<f64>().sqrt();
        assert!(d < 0.5, "distance {d}");
    }

    #[test]
    fn never_worse_than_the_start() {
        let (t, p) = plant_pair(Material::Pdms1To10);
        let pair = ModelPair::new(&t, &p).unwrap();
        for seed in 0..20 {
            let mut req = request(-1.2 + 0.12 * seed as f64, (0.6, 0.2, 0.2), seed);
            req.material = Material::Pdms1To10;
            let r = search_hjps(&req, &pair, &HjpsConfig::default()).unwrap();
            let start = total_loss(&req.current, &req, &pair).unwrap();
            assert!(r.loss_total <= start.total);
            assert!(is_feasible(&r.gait));
        }
    }
}
