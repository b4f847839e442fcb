//! Delay spread of SOT, SOT-R and SOT-R PRE under fabricated-device variation.
//!
//! `cargo run --release --example monte_carlo -- [trials]`

use camsim::analysis::{compute_mdd, monte_carlo_study, CornerMode, Placement};
use camsim::cell::CellTechnology;
use camsim::device::DeviceSigmas;
use camsim::network::{ArrayConfig, Scheme};
use camsim::transient::SimulationSettings;

fn main() -> camsim::Result<()> {
    let trials: usize = std::env::args().nth(1).map_or(30, |a| a.parse().expect("trial count"));
    let n = 32;
    let hdists = [4, 5, 8, 9, 16, 17];
    let settings = SimulationSettings::default();
    let designs = [
        ("SOT", Scheme::Standard, 0.0),
        ("SOT-R", Scheme::Standard, 4e6),
        ("SOT-R PRE", Scheme::ProlongedPre, 4e6),
    ];
    println!("{n}x{n}, {trials} trials per HDist, sigmas {:?}", DeviceSigmas::FABRICATED);
    for (name, scheme, rref) in designs {
        let config = ArrayConfig::new(n, n).with_scheme(scheme);
        let pops = monte_carlo_study(
            &config,
            &CellTechnology::sot(rref),
            &settings,
            &hdists,
            trials,
            &DeviceSigmas::FABRICATED,
            Placement::Random,
            7,
        )?;
        let cells: Vec<String> = pops
            .iter()
            .step_by(2)
            .map(|p| format!("h{:<2} sigma/mean {:>5.2}%", p.hdist, 100.0 * p.relative_sigma()))
            .collect();
        let mdd: Vec<String> = pops
            .chunks(2)
            .map(|pair| {
                compute_mdd(pair, CornerMode::ThreeSigma)
                    .map(|r| r.get(pair[0].hdist).map_or("-".into(), |m| m.csv_value()))
                    .unwrap_or_default()
            })
            .collect();
        println!("{name:<10} {}  (3-sigma MDD<=1 at h: {})", cells.join("  "), mdd.join(","));
    }
    Ok(())
}
