//! Fits linear, quartic and feedforward surrogates on the interpolation
//! split and compares their held-out error.

use std::error::Error;

use fingait::datagen::{experiment_grid, holdout_split, run_and_postprocess};
use fingait::plant::PlantParams;
use fingait::surrogate::{
    decode_model, encode_model, evaluate, fit_feedforward, fit_polynomial_with, FeedforwardConfig, PolyFitOptions,
    Target,
};
use fingait::Material;

fn main() -> Result<(), Box<dyn Error>> {
    let rows = run_and_postprocess(&experiment_grid(), Material::Rigid, &PlantParams::default(), 0, 50)?;
    let (train, hold) = holdout_split(&rows);

    for target in [Target::Thrust, Target::Power] {
        let linear = fit_polynomial_with(&train, 1, target, &PolyFitOptions::prune())?;
        let quartic = fit_polynomial_with(&train, 4, target, &PolyFitOptions::prune())?;
        let ff = fit_feedforward(&train, Some(&hold), &FeedforwardConfig::default(), target, 0)?;
        for m in [&linear, &quartic, &ff] {
            let r = evaluate(m, &hold)?;
            println!("{target:>6} {:<12} holdout MAE {:.4}  max {:.4}", m.kind().to_string(), r.mae, r.max_error);
        }

        // models survive a save/load cycle bit for bit
        let back = decode_model(&encode_model(&ff), "mem".as_ref())?;
        assert_eq!(back, ff);
    }
    Ok(())
}
