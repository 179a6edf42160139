//! Trade-off between thrust tracking and power along `(w_t, 0, 1 - w_t)`,
//! and a coarse pass over the whole weight simplex.

use std::error::Error;

use fingait::plant::PlantParams;
use fingait::search::{Algorithm, ModelPair, WeightVector};
use fingait::sim::{gen_requests, trade_off_curve, weight_sweep, ScriptKind, SimConfig};
use fingait::surrogate::{PlantModel, Target};
use fingait::Material;

fn main() -> Result<(), Box<dyn Error>> {
    let m = Material::Pdms1To20;
    let plant = PlantParams::default();
    // plant-exact models isolate the search from surrogate error
    let thrust = PlantModel::new(m, Target::Thrust, plant.clone());
    let power = PlantModel::new(m, Target::Power, plant.clone());
    let models = ModelPair::new(&thrust, &power)?;
    let script = gen_requests(ScriptKind::Normal, 200, 0)?;
    let base = SimConfig::new(WeightVector::thrust_only(), m, Algorithm::Gps, 0);

    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    println!("  w_t   L_t     P     eta");
    for r in trade_off_curve(&script, &grid, &base, &models, &plant)? {
        println!("{:5.2} {:6.3} {:6.3} {:6.3}", r.w_t, r.mean_loss_t, r.mean_power, r.mean_fom.unwrap_or(f64::NAN));
    }

    let rows = weight_sweep(&script, 0.25, &base, &models, &plant)?;
    let best = rows
        .iter()
        .min_by(|a, b| a.summary.mean_power.total_cmp(&b.summary.mean_power))
        .unwrap();
    println!("{} lattice points; least power at {:?}", rows.len(), best.weights);
    Ok(())
}
