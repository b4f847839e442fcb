//! Row-position delay spread with and without the prolonged precharge.

use camsim::analysis::{sweep_hdist, Placement};
use camsim::cell::CellTechnology;
use camsim::network::{ArrayConfig, Scheme};
use camsim::transient::{simulate_search, SimulationSettings};

fn main() -> camsim::Result<()> {
    let n = 64;
    let h = 32;
    let tech = CellTechnology::fefet(4e6);
    let settings = SimulationSettings::default();
    for scheme in [Scheme::Standard, Scheme::ProlongedPre] {
        let config = ArrayConfig::new(n, n).with_scheme(scheme);
        let pop = &sweep_hdist(&config, &tech, &settings, &[h], Placement::Random, 1)?[0];
        let delays: Vec<f64> = pop.delays().collect();
        println!(
            "{:?}: mean {:.4} ns, spread {:.3}% (row 0 {:.4} ns, row {} {:.4} ns)",
            scheme,
            pop.fitted_mean_s * 1e9,
            100.0 * pop.relative_range(),
            delays[0] * 1e9,
            n - 1,
            delays[n - 1] * 1e9
        );
    }

    // Where the hold ends: the searchlines have settled before release.
    let config = ArrayConfig::new(n, n).with_scheme(Scheme::ProlongedPre);
    let query = camsim::analysis::study_query(1, n);
    let stored = camsim::analysis::words_at_distance(&query, n, h, Placement::Random, 1);
    let net = camsim::network::build_network(&config, &tech, &stored, &query, None)?;
    let res = simulate_search(&net, &settings)?;
    let slowest_sl = res.searchline_rise_s.iter().flatten().fold(0.0_f64, |a, &b| a.max(b));
    println!(
        "hold released at {:.4} ns; slowest far-end searchline reached Vs/2 at {:.4} ns",
        res.release_time_s * 1e9,
        slowest_sl * 1e9
    );
    Ok(())
}
