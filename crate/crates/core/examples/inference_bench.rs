//! Single-threaded prediction throughput for each surrogate family.

use std::error::Error;
use std::time::Duration;

use fingait::datagen::{experiment_grid, run_experiment};
use fingait::plant::PlantParams;
use fingait::surrogate::{
    bench_inference, fit_feedforward, fit_polynomial, fit_sequence, FeedforwardConfig, SequenceConfig, SequenceSample,
    Target,
};
use fingait::Material;

fn main() -> Result<(), Box<dyn Error>> {
    let runs = run_experiment(&experiment_grid(), Material::Rigid, &PlantParams::default(), 0, 50)?;
    let rows: Vec<_> = runs.iter().map(|r| r.row.clone()).collect();
    let samples: Vec<SequenceSample> = runs.iter().map(SequenceSample::from_run).collect::<Result<_, _>>()?;

    // throughput does not depend on how well trained a model is
    let ff_cfg = FeedforwardConfig { epochs: 5, ..Default::default() };
    let seq_cfg = SequenceConfig { epochs: 2, ..Default::default() };
    let models = [
        fit_polynomial(&rows, 1, Target::Thrust)?,
        fingait::surrogate::fit_polynomial_with(&rows, 4, Target::Thrust, &fingait::surrogate::PolyFitOptions::prune())?,
        fit_feedforward(&rows, None, &ff_cfg, Target::Thrust, 0)?,
        fit_sequence(&samples, None, &seq_cfg, 0)?.model,
    ];
    for m in &models {
        let r = bench_inference(m, Duration::from_secs(2));
        println!("{:<12} {:>12.0} predictions/s ({:.2} us each)", m.kind().to_string(), r.per_second, 1e6 / r.per_second);
    }
    Ok(())
}
