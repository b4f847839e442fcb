//! MTJ resistance roll-off with bias and the SOT gate divider it feeds.

use camsim::cell::{gate_drive, CellState, CellTechnology};
use camsim::device::{MtjModel, MtjState};

fn main() -> camsim::Result<()> {
    let mtj = MtjModel::default();
    println!("R_P = {:.3} MOhm", mtj.r_parallel() / 1e6);
    println!("{:>8} {:>10} {:>12}", "bias_v", "tmr", "r_ap_mohm");
    for i in 0..=10 {
        let v = 0.1 * i as f64;
        println!("{v:>8.2} {:>10.3} {:>12.4}", mtj.tmr(v), mtj.resistance(MtjState::Antiparallel, v) / 1e6);
    }

    let sot = CellTechnology::sot(4e6);
    println!("\n{:>8} {:>12} {:>12}", "vsl_v", "gate_miss", "gate_match");
    for i in 0..=7 {
        let vsl = 0.1 * i as f64;
        let miss = gate_drive(&sot, CellState::new(false, true), vsl)?;
        let hit = gate_drive(&sot, CellState::new(true, true), vsl)?;
        println!("{vsl:>8.2} {miss:>12.4} {hit:>12.4}");
    }
    println!("discharge transistor threshold: {} V", sot.transistor.vth_v);
    Ok(())
}
