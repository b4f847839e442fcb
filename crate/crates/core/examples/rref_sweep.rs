//! Worst-case MDD of an SOT array as the reference resistance grows.
//!
//! `cargo run --release --example rref_sweep -- [size]`

use camsim::analysis::{sweep_rref, Placement};
use camsim::cell::CellTechnology;
use camsim::network::ArrayConfig;
use camsim::transient::SimulationSettings;

fn main() -> camsim::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(32, |a| a.parse().expect("array size"));
    let config = ArrayConfig::new(n, n);
    let hdists: Vec<usize> = (1..=(n * 3 / 8).max(2)).collect();
    let eval = 1..=hdists.len() - 1;
    let rrefs = [0.0, 0.5e6, 1e6, 2e6, 4e6, 8e6];
    let points = sweep_rref(
        &config,
        &CellTechnology::sot(0.0),
        &SimulationSettings::default(),
        &rrefs,
        &hdists,
        Placement::Random,
        1,
    )?;
    println!("{n}x{n} SOT array, MDD over HDist {eval:?}");
    for p in &points {
        let curve: Vec<String> = p.report.entries.iter().map(|(_, m)| m.csv_value()).collect();
        println!(
            "Rref {:>4.1} MOhm: worst {:>3}  [{}]",
            p.rref_ohm / 1e6,
            p.report.worst_case(eval.clone()).csv_value(),
            curve.join(",")
        );
    }
    Ok(())
}
