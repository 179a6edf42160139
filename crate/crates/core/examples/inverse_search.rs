//! One inverse request answered by every search algorithm against
//! feedforward surrogates.

use std::error::Error;

use fingait::datagen::{experiment_grid, run_and_postprocess};
use fingait::plant::PlantParams;
use fingait::search::{run_search, Algorithm, BruteGrid, ModelPair, SearchRequest, WeightVector};
use fingait::surrogate::{fit_feedforward, FeedforwardConfig, Target};
use fingait::{Gait, Material};

fn main() -> Result<(), Box<dyn Error>> {
    let m = Material::Pdms1To10;
    let rows = run_and_postprocess(&experiment_grid(), m, &PlantParams::default(), 0, 50)?;
    // the attainable box reaches stroke 74.5 deg, past the 55 deg the data
    // covers; a quartic extrapolates there to negative power and every
    // search would chase it
    let cfg = FeedforwardConfig::default();
    let thrust = fit_feedforward(&rows, None, &cfg, Target::Thrust, 0)?;
    let power = fit_feedforward(&rows, None, &cfg, Target::Power, 0)?;
    let models = ModelPair::new(&thrust, &power)?;

    let current: Gait = "f=1,stroke=30,pitch=30,spo=0".parse()?;
    let req = SearchRequest::new(current, 0.5, WeightVector::new(0.8, 0.0, 0.2)?, m, 7);
    let grid = BruteGrid::coarse();
    for algo in Algorithm::SEARCHES.into_iter().chain([Algorithm::Brute]) {
        let r = run_search(algo, &req, &models, Some(&grid))?;
        println!(
            "{:<5} loss {:.4} (L_t {:.4}, P {:.3} W) {:>5} evals {:>7.2} ms  {:?}",
            algo.name(),
            r.loss_total,
            r.loss_t,
            r.p_pred,
            r.evals,
            r.elapsed_s * 1e3,
            r.gait.to_array()
        );
    }
    Ok(())
}
