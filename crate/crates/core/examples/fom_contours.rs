//! Figure-of-merit contours over stroke and pitch at 2 Hz for every fin,
//! written as CSV for external plotting.

use std::error::Error;
use std::fs::File;

use fingait::fom::{fom_sweep, mean_fom, write_contour_csv, FomConfig, FomSource, SliceSpec};
use fingait::plant::PlantParams;
use fingait::Material;

fn main() -> Result<(), Box<dyn Error>> {
    let plant = PlantParams::default();
    let cfg = FomConfig::default();
    let slice = SliceSpec::parse("f=2,spo=0", "stroke,pitch")?;
    std::fs::create_dir_all("out")?;
    for m in Material::ALL {
        let rows = fom_sweep(&FomSource::Plant { material: m, params: &plant }, &slice, &cfg)?;
        let best = rows
            .iter()
            .filter(|r| r.fom.is_some())
            .max_by(|a, b| a.fom.unwrap().total_cmp(&b.fom.unwrap()))
            .unwrap();
        println!(
            "{:<10} mean eta {:.4}, best {:.4} at stroke {} pitch {}",
            m.name(),
            mean_fom(&rows).unwrap_or(f64::NAN),
            best.fom.unwrap(),
            best.gait.stroke_amp,
            best.gait.pitch_amp
        );
        write_contour_csv(&rows, File::create(format!("out/contour_{}.csv", m.key()))?)?;
    }
    Ok(())
}
