//! Dense thrust/power table from a pair of surrogates, streamed to CSV.

use std::error::Error;
use std::fs::File;
use std::io::BufWriter;

use fingait::datagen::{experiment_grid, run_and_postprocess};
use fingait::plant::PlantParams;
use fingait::surrogate::{fit_polynomial_with, interpolate_grid, GridResolution, PolyFitOptions, Target};
use fingait::Material;

fn main() -> Result<(), Box<dyn Error>> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "coarse".into());
    let res = GridResolution::preset(&preset)?;
    let rows = run_and_postprocess(&experiment_grid(), Material::Rigid, &PlantParams::default(), 0, 50)?;
    let thrust = fit_polynomial_with(&rows, 4, Target::Thrust, &PolyFitOptions::prune())?;
    let power = fit_polynomial_with(&rows, 4, Target::Power, &PolyFitOptions::prune())?;
    std::fs::create_dir_all("out")?;
    let out = BufWriter::new(File::create(format!("out/grid_{preset}.csv"))?);
    let n = interpolate_grid(&thrust, &power, &res, out)?;
    println!("{n} rows ({} expected) written to out/grid_{preset}.csv", res.len());
    Ok(())
}
