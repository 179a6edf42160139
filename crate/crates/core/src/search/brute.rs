//! Exhaustive evaluation over a discretized attainable region.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{is_feasible, Axis, Gait};
use crate::surrogate::GridResolution;

use super::{better, loss_unchecked, Algorithm, ModelPair, SearchRequest, SearchResult, Termination};

pub const MAX_BRUTE_POINTS: usize = 1_000_000;

/// Explicit per-axis levels in `(f, Φ, Θ, δ)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteGrid {
    pub levels: [Vec<f64>; 4],
}

impl BruteGrid {
    pub fn from_resolution(res: &GridResolution) -> Self {
        BruteGrid {
            levels: Axis::ALL.map(|a| res.levels(a)),
        }
    }

    pub fn coarse() -> Self {
        Self::from_resolution(&GridResolution::coarse())
    }

    pub fn single(g: Gait) -> Self {
        BruteGrid {
            levels: g.to_array().map(|v| vec![v]),
        }
    }

    /// Attainable grid points in lexicographic order.
    pub fn points(&self) -> Result<Vec<Gait>> {
        let raw: usize = self.levels.iter().map(Vec::len).product();
        if raw == 0 {
            return Err(Error::input("brute-force grid has an empty axis"));
        }
        let [fs, ss, ps, ds] = &self.levels;
        let mut out = Vec::new();
        for &f in fs {
            for &s in ss {
                for &p in ps {
                    for &d in ds {
                        let g = Gait::new(f, s, p, d);
                        if is_feasible(&g) {
                            if out.len() == MAX_BRUTE_POINTS {
                                return Err(Error::input(format!(
                                    "brute-force grid has more than {MAX_BRUTE_POINTS} attainable points"
                                )));
                            }
                            out.push(g);
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::input("brute-force grid has no attainable points"));
        }
        Ok(out)
    }
}

/// Exact minimum of the total loss over the grid's attainable points.
/// Budget and deadline do not apply.
pub fn brute_force(req: &SearchRequest, grid: &BruteGrid, models: &ModelPair<'_>) -> Result<SearchResult> {
    req.validate()?;
    let start = Instant::now();
    super::total_loss(&req.current, req, models)?;
    let pts = grid.points()?;
    let mut best: Option<(Gait, super::LossBreakdown)> = None;
    for g in &pts {
        let l = loss_unchecked(g, req, models);
        if best.as_ref().is_none_or(|(bg, bl)| better((g, &l), (bg, bl))) {
            best = Some((*g, l));
        }
    }
    let (gait, l) = best.expect("non-empty grid");
    Ok(SearchResult {
        algorithm: Algorithm::Brute,
        gait,
        t_pred: l.t_pred,
        p_pred: l.p_pred,
        loss_total: l.total,
        loss_t: l.loss_t,
        loss_k: l.loss_k,
        loss_p: l.loss_p,
        evals: pts.len(),
        elapsed_s: start.elapsed().as_secs_f64(),
        terminated_by: Termination::Converged,
    })
}
