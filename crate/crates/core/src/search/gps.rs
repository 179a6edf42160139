//! Generalized pattern search with a random SEARCH step and a complete
//! axis POLL.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gait::{pitch_bound, stroke_bound};

use super::{sample_feasible, Algorithm, Evaluator, LossBreakdown, ModelPair, SearchRequest, SearchResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsConfig {
    /// Initial mesh size in normalized units.
    pub delta0: f64,
    /// Random mesh points tried in each SEARCH step.
    pub search_samples: usize,
    pub expand: f64,
    pub contract: f64,
    pub max_delta: f64,
    pub min_delta: f64,
}

impl Default for GpsConfig {
    fn default() -> Self {
        GpsConfig {
            delta0: 4.0,
            search_samples: 10,
            expand: 2.0,
            contract: 0.5,
            max_delta: 16.0,
            min_delta: 0.25,
        }
    }
}

type Point = ([f64; 4], LossBreakdown);

/// Directions along the frequency-coupled amplitude bounds that lie within
/// one mesh step of `y`. Axis moves alone cannot slide along these edges, so
/// an incumbent pinned on one would otherwise stall.
fn edge_directions(y: &[f64; 4], delta: f64, s: &[f64; 4]) -> Vec<[f64; 4]> {
    let f = y[0] * s[0];
    let near_stroke = stroke_bound(f) - y[1] * s[1] < delta * s[1];
    let near_pitch = pitch_bound(f) - y[2] * s[2] < delta * s[2];
    // d(bound)/df in degrees per Hz
    let tangent = |stroke: bool, pitch: bool| {
        let mut d = [
            1.0 / s[0],
            if stroke { -30.0 / s[1] } else { 0.0 },
            if pitch { -26.0 / s[2] } else { 0.0 },
            0.0,
        ];
        let scale = delta / d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        d.iter_mut().for_each(|v| *v *= scale);
        d
    };
    let mut out = Vec::new();
    if near_stroke {
        out.push(tangent(true, false));
    }
    if near_pitch {
        out.push(tangent(false, true));
    }
    if near_stroke && near_pitch {
        out.push(tangent(true, true));
    }
    out
}

/// SEARCH draws attainable gaits uniformly and snaps them onto the mesh of
/// size Δ centred on the incumbent; any improvement is accepted and the mesh
/// expands. Otherwise all eight `±Δ` axis neighbours, plus the edge
/// directions of any nearby amplitude bound, are polled and the best
/// improving one accepted; a failed poll contracts the mesh.
pub fn search_gps(req: &SearchRequest, models: &ModelPair<'_>, cfg: &GpsConfig) -> Result<SearchResult> {
    let mut ev = Evaluator::new(req, models, Algorithm::Gps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let y0 = ev.steps().normalize(&req.current);
    let mut best: Point = ev.eval_norm(y0).expect("first evaluation always runs");
    let mut delta = cfg.delta0;
    let mut converged = false;
    'outer: loop {
        let mut improved = false;
        for _ in 0..cfg.search_samples {
            let y = ev.steps().normalize(&sample_feasible(&mut rng));
            let mut snapped = best.0;
            for i in 0..4 {
                snapped[i] += delta * ((y[i] - best.0[i]) / delta).round();
            }
            if snapped == best.0 {
                continue;
            }
            let Some(cand) = ev.eval_norm(snapped) else { break 'outer };
            if cand.1.total < best.1.total {
                best = cand;
                improved = true;
            }
        }
        if improved {
            delta = (delta * cfg.expand).min(cfg.max_delta);
            continue;
        }
        let mut dirs: Vec<[f64; 4]> = Vec::with_capacity(14);
        for axis in 0..4 {
            let mut d = [0.0; 4];
            d[axis] = delta;
            dirs.push(d);
        }
        dirs.extend(edge_directions(&best.0, delta, &ev.steps().to_array()));
        let mut poll: Option<Point> = None;
        for d in &dirs {
            for sign in [1.0, -1.0] {
                let mut y = best.0;
                for i in 0..4 {
                    y[i] += sign * d[i];
                }
                let Some(cand) = ev.eval_norm(y) else { break 'outer };
                if poll.as_ref().is_none_or(|p| cand.1.total < p.1.total) {
                    poll = Some(cand);
                }
            }
        }
        match poll {
            Some(p) if p.1.total < best.1.total => best = p,
            _ => {
                delta *= cfg.contract;
                if delta < cfg.min_delta {
                    converged = true;
                    break;
                }
            }
        }
    }
    Ok(ev.finish(Algorithm::Gps, converged))
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::*;
    use super::edge_directions;
    use crate::gait::{stroke_bound, Gait, StepSizes};

    #[test]
    fn thrust_only_requests_are_met_closely() {
        let (t, p) = plant_pair(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        for (i, target) in [-0.5, -0.2, 0.0, 0.2, 0.4, 0.6].iter().enumerate() {
            let req = request(*target, (1.0, 0.0, 0.0), i as u64);
            let r = search_gps(&req, &pair, &GpsConfig::default()).unwrap();
            assert!(r.loss_t <= 0.05, "target {target}: loss_t {}", r.loss_t);
            assert!(r.evals <= GPS_DEFAULT_BUDGET);
        }
    }

    #[test]
    fn slides_along_a_coupled_bound() {
        let (t, p) = plant_pair(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        let mut req = request(1.1, (1.0, 0.0, 0.0), 0);
        req.current = Gait::new(2.0, 37.0, 23.0, -22.5).project();
        let r = search_gps(&req, &pair, &GpsConfig::default()).unwrap();
        let b = brute_force(&req, &BruteGrid::coarse(), &pair).unwrap();
        assert!(r.loss_t <= b.loss_t + 1e-3, "gps {} brute {}", r.loss_t, b.loss_t);
    }

    #[test]
    fn edge_directions_follow_the_bounds() {
        let s = StepSizes::default().to_array();
        let on_edge = StepSizes::default().normalize(&Gait::new(1.5, stroke_bound(1.5) - 0.1, 10.0, 0.0));
        let dirs = edge_directions(&on_edge, 1.0, &s);
        assert_eq!(dirs.len(), 1);
        let d = dirs[0];
        // moving along d keeps stroke + 30 f constant
        assert!((d[1] * s[1] + 30.0 * d[0] * s[0]).abs() < 1e-12);
        let inside = StepSizes::default().normalize(&Gait::new(1.0, 20.0, 20.0, 0.0));
        assert!(edge_directions(&inside, 1.0, &s).is_empty());
    }

    #[test]
    fn stops_at_the_budget() {
        let (t, p) = plant_pair(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        let mut req = request(0.3, (0.4, 0.3, 0.3), 3);
        req.eval_budget = Some(7);
        let r = search_gps(&req, &pair, &GpsConfig::default()).unwrap();
        assert_eq!(r.evals, 7);
        assert_eq!(r.terminated_by, Termination::Budget);
    }
}
