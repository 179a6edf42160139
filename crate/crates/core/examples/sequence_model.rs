//! Trains the recurrent surrogate on per-sample cycle traces and prints its
//! predicted thrust history for one unseen gait.
//!
//!     cargo run --release --example sequence_model -- 200

use std::error::Error;

use fingait::datagen::{experiment_grid, partition_holdout, run_experiment};
use fingait::plant::{plant_thrust_avg, PlantParams};
use fingait::surrogate::{evaluate, fit_sequence, predict_avg, SequenceConfig, SequenceSample, Target};
use fingait::{Gait, Material};

fn main() -> Result<(), Box<dyn Error>> {
    let epochs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    let plant = PlantParams::default();
    let runs = run_experiment(&experiment_grid(), Material::Pdms1To20, &plant, 0, 50)?;
    let samples: Vec<SequenceSample> = runs.iter().map(SequenceSample::from_run).collect::<Result<_, _>>()?;
    let (train, hold) = partition_holdout(&samples, |s| s.gait);

    let cfg = SequenceConfig { epochs, ..Default::default() };
    let fit = fit_sequence(&train, Some(&hold), &cfg, 0)?;
    println!("{} epochs (best {})", fit.epochs_run, fit.best_epoch);

    let thrust = fit.model;
    let power = thrust.retarget(Target::Power)?;
    let hold_rows: Vec<_> = runs
        .iter()
        .filter(|r| fingait::datagen::is_holdout(&r.row.gait))
        .map(|r| r.row.clone())
        .collect();
    println!("holdout MAE: thrust {:.4} N, power {:.4} W", evaluate(&thrust, &hold_rows)?.mae, evaluate(&power, &hold_rows)?.mae);

    let g = Gait::new(1.25, 40.0, 32.0, -11.0);
    let series = thrust.predict_trace(&g).unwrap();
    println!("gait {:?}: mean {:.3} N (plant {:.3} N)", g.to_array(), predict_avg(&thrust, &g), plant_thrust_avg(&g, Material::Pdms1To20, &plant));
    for (j, t) in series.iter().enumerate().step_by(5) {
        println!("  sample {j:>2}: {t:+.3} N");
    }
    Ok(())
}
