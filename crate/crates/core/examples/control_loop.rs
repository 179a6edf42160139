//! The closed loop: a normal request script, one GPS search per cycle, the
//! plant reporting what the chosen gait actually does.
//!
//!     cargo run --release --example control_loop -- 0.8,0,0.2

use std::error::Error;
use std::fs::File;

use fingait::datagen::{experiment_grid, run_and_postprocess};
use fingait::plant::PlantParams;
use fingait::search::{Algorithm, ModelPair, WeightVector};
use fingait::sim::{gen_requests, simulate, write_records_csv, ScriptKind, SimConfig, DEFAULT_REQUESTS};
use fingait::surrogate::{fit_feedforward, FeedforwardConfig, Target};
use fingait::Material;

fn main() -> Result<(), Box<dyn Error>> {
    let weights: WeightVector = std::env::args().nth(1).as_deref().unwrap_or("0.8,0,0.2").parse()?;
    let plant = PlantParams::default();
    let script = gen_requests(ScriptKind::Normal, DEFAULT_REQUESTS, 0)?;
    std::fs::create_dir_all("out")?;
    for m in Material::ALL {
        let rows = run_and_postprocess(&experiment_grid(), m, &plant, 0, 50)?;
        let ff = FeedforwardConfig::default();
        let thrust = fit_feedforward(&rows, None, &ff, Target::Thrust, 0)?;
        let power = fit_feedforward(&rows, None, &ff, Target::Power, 0)?;
        let cfg = SimConfig::new(weights, m, Algorithm::Gps, 0);
        let sim = simulate(&script, &cfg, &ModelPair::new(&thrust, &power)?, &plant)?;
        let s = &sim.summary;
        println!(
            "{:<10} L_t {:.3} N  L_k {:.2}  P {:.2} W  eta {:.3}  (mean search {:.1} ms)",
            m.name(),
            s.mean_loss_t,
            s.mean_loss_k,
            s.mean_power,
            s.mean_fom.unwrap_or(f64::NAN),
            sim.timing.mean_elapsed_s * 1e3
        );
        write_records_csv(&sim.records, true, File::create(format!("out/records_{}.csv", m.key()))?)?;
    }
    Ok(())
}
