//! One matchline discharging through its mismatching cells, compared with
//! the single-pole estimate R·C·ln 2.

use camsim::analysis::simulate_at_distance;
use camsim::analysis::Placement;
use camsim::cell::CellTechnology;
use camsim::network::ArrayConfig;
use camsim::transient::SimulationSettings;

fn main() -> camsim::Result<()> {
    let cols = 16;
    let config = ArrayConfig::new(1, cols);
    let tech = CellTechnology::fefet(4e6);
    let settings = SimulationSettings {
        trace: true,
        ..Default::default()
    };
    let c_ml = cols as f64 * config.matchline_c_per_cell_f;
    println!("{:>5} {:>12} {:>14}", "hdist", "delay_ns", "rc_ln2_ns");
    for h in [1, 2, 4, 8, 16] {
        let res = simulate_at_distance(&config, &tech, &settings, h, Placement::Contiguous, 1)?;
        let t = res.row_delay(0).seconds().unwrap();
        let single_pole = tech.rref_ohm / h as f64 * c_ml * std::f64::consts::LN_2;
        println!("{h:>5} {:>12.4} {:>14.4}", t * 1e9, single_pole * 1e9);
        if h == 4 {
            res.trace.as_ref().unwrap().write_csv(std::fs::File::create(
                std::env::temp_dir().join("single_row_discharge.csv"),
            ).map_err(|e| camsim::Error::Config(e.to_string()))?)?;
        }
    }
    println!("trace at HDist 4 written to {}", std::env::temp_dir().join("single_row_discharge.csv").display());
    println!("(the gap to R·C·ln 2 is the gate turn-on and the transistor in series with Rref)");
    Ok(())
}
