//! Search delay and energy of the modified designs against plain SOT at
//! HDist 20, with the energy split into its parts.

use camsim::analysis::{compare_designs, simulate_at_distance, Design, Placement};
use camsim::cell::CellTechnology;
use camsim::network::{ArrayConfig, Scheme};
use camsim::transient::SimulationSettings;

fn main() -> camsim::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(128, |a| a.parse().expect("array size"));
    let base = ArrayConfig::new(n, n);
    let pre = base.clone().with_scheme(Scheme::ProlongedPre);
    let designs = vec![
        Design::new(base.clone(), CellTechnology::sot(0.0)),
        Design::new(base.clone(), CellTechnology::sot(4e6)),
        Design::new(pre.clone(), CellTechnology::sot(4e6)),
    ];
    let settings = SimulationSettings::default();
    let h = 20.min(n);
    for r in compare_designs(&designs, &settings, h, Placement::Random, 1)? {
        println!(
            "{:<10} delay {:>7.3} ns ({:.2}x)  energy {:>8.2} fJ ({:.2}x)",
            r.design,
            r.delay_s * 1e9,
            r.delay_ratio,
            r.energy_j * 1e15,
            r.energy_ratio
        );
    }
    println!();
    for d in &designs {
        let e = simulate_at_distance(&d.array, &d.technology, &settings, h, Placement::Random, 1)?.energy;
        println!(
            "{:<10} search {:>7.2} fJ  precharge {:>7.2} fJ (hold {:.2}, recharge {:.2})  balance error {:.1e}",
            d.name,
            e.search_energy_j * 1e15,
            e.precharge_energy_j * 1e15,
            e.hold_energy_j * 1e15,
            e.recharge_energy_j * 1e15,
            e.balance_error()
        );
    }
    Ok(())
}
