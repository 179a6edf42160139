//! Runs the 864-gait experiment on the synthetic plant for one material and
//! writes the dataset plus one averaged trace per gait.
//!
//!     cargo run --release --example synthesize_dataset -- pdms-1:10 out/

use std::error::Error;
use std::path::PathBuf;

use fingait::datagen::{experiment_grid, holdout_split, persist_traces, run_experiment, save_dataset};
use fingait::plant::PlantParams;
use fingait::trace::{cycle_summary, DEFAULT_SAMPLES_PER_CYCLE};
use fingait::Material;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let material: Material = args.next().as_deref().unwrap_or("rigid").parse()?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));

    let grid = experiment_grid();
    let mut runs = run_experiment(&grid, material, &PlantParams::default(), 0, DEFAULT_SAMPLES_PER_CYCLE)?;
    persist_traces(&mut runs, &out.join("traces"))?;
    let rows: Vec<_> = runs.iter().map(|r| r.row.clone()).collect();
    save_dataset(&rows, &out.join(format!("dataset_{}.csv", material.key())))?;

    let (train, hold) = holdout_split(&rows);
    println!("{}: {} gaits, {} train / {} held out", material.name(), rows.len(), train.len(), hold.len());

    let best = runs
        .iter()
        .max_by(|a, b| a.row.thrust_avg.total_cmp(&b.row.thrust_avg))
        .unwrap();
    let s = cycle_summary(&best.trace)?;
    println!(
        "strongest gait {:?}: {:.3} N at {:.2} W (trace mean {:.3} N)",
        best.row.gait.to_array(),
        best.row.thrust_avg,
        best.row.power_avg,
        s.thrust_avg
    );
    Ok(())
}
