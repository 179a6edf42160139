//! Monte Carlo search over the attainable box.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{sample_feasible, Algorithm, Evaluator, ModelPair, SearchRequest, SearchResult};

/// The current gait is evaluated first, then uniform samples until the
/// budget or deadline runs out; the best is returned.
pub fn search_mc(req: &SearchRequest, models: &ModelPair<'_>) -> Result<SearchResult> {
    let mut ev = Evaluator::new(req, models, Algorithm::Mc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    ev.eval(&req.current);
    while !ev.stopped() {
        let g = sample_feasible(&mut rng);
        ev.eval(&g);
    }
    Ok(ev.finish(Algorithm::Mc, false))
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::*;

    #[test]
    fn budget_one_returns_the_current_gait() {
        let (t, p) = plant_pair(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        let mut req = request(0.3, (1.0, 0.0, 0.0), 4);
        req.eval_budget = Some(1);
        let r = search_mc(&req, &pair).unwrap();
        assert_eq!(r.gait, req.current.project());
        assert_eq!(r.evals, 1);
        assert_eq!(r.terminated_by, Termination::Budget);
    }

    #[test]
    fn never_worse_than_the_current_gait() {
        let (t, p) = plant_pair(Material::Rigid);
        let pair = ModelPair::new(&t, &p).unwrap();
        for seed in 0..20 {
            let req = request(0.1 * seed as f64 - 1.0, (0.5, 0.3, 0.2), seed);
            let r = search_mc(&req, &pair).unwrap();
            let start = total_loss(&req.current.project(), &req, &pair).unwrap();
            assert!(r.loss_total <= start.total);
            assert_eq!(r.evals, MC_DEFAULT_BUDGET);
        }
    }
}
