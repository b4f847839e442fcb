use camsim::analysis::{simulate_at_distance, Placement};
use camsim::cell::{CellTechnology, TransistorModel};
use camsim::network::{ArrayConfig, NodeKind, Scheme};
use camsim::transient::{Segment, SimulationSettings};

fn ideal_switch(rref: f64) -> CellTechnology {
    let mut t = CellTechnology::fefet(rref);
    t.transistor = TransistorModel {
        vth_v: 0.47,
        k_sat_a_per_v2: 1.0,
        r_on_min_ohm: 1e-3,
        c_gate_f: 0.0,
    };
    t
}

#[test]
fn single_pole_dissipates_half_cv2() {
    let (r, c) = (4e6, 10e-15);
    let mut cfg = ArrayConfig::new(1, 1);
    cfg.matchline_c_per_cell_f = c;
    let tau = r * c;
    let s = SimulationSettings {
        t_max_s: 20.0 * tau,
        run_to_t_max: true,
        ..Default::default()
    };
    let res = simulate_at_distance(&cfg, &ideal_switch(r), &s, 1, Placement::Contiguous, 0).unwrap();
    let ml: f64 = res
        .power
        .samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].2.matchline_dissipation_w + w[1].2.matchline_dissipation_w))
        .sum();
    let vdd = cfg.vdd_v;
    let expect = 0.5 * c * vdd * vdd;
    assert!((ml / expect - 1.0).abs() < 0.005, "{ml:e} vs {expect:e}");
    assert!((res.energy.recharge_energy_j / (c * vdd * vdd) - 1.0).abs() < 0.005);
    assert!(res.energy.balance_error() < 0.005);
}

#[test]
fn matched_search_costs_only_searchline_charging() {
    let cfg = ArrayConfig::new(16, 8);
    let tech = CellTechnology::fefet(4e6);
    let res = simulate_at_distance(&cfg, &tech, &SimulationSettings::default(), 0, Placement::Random, 9).unwrap();
    let net = {
        let query = camsim::analysis::study_query(9, cfg.cols);
        let stored = camsim::analysis::words_at_distance(&query, cfg.rows, 0, Placement::Random, 9);
        camsim::network::build_network(&cfg, &tech, &stored, &query, None).unwrap()
    };
    let c_sl: f64 = net
        .nodes()
        .iter()
        .zip(net.node_capacitance())
        .filter(|(k, _)| matches!(k, NodeKind::Searchline { .. }))
        .map(|(_, c)| c)
        .sum();
    let expect = 0.5 * c_sl * cfg.vs_v * cfg.vs_v;
    let e = res.energy;
    assert!((e.search_energy_j / expect - 1.0).abs() < 0.01, "{:e} vs {expect:e}", e.search_energy_j);
    assert!(e.precharge_energy_j.abs() < 1e-3 * expect);
}

#[test]
fn hold_energy_matches_resistive_hand_check() {
    let rref = 4e6;
    let k = 4;
    let t_hold = 5e-9;
    let mut cfg = ArrayConfig::new(1, 8).with_scheme(Scheme::ProlongedPre);
    cfg.precharge_hold_s = Some(t_hold);
    let res = simulate_at_distance(&cfg, &ideal_switch(rref), &SimulationSettings::default(), k, Placement::Contiguous, 0)
        .unwrap();
    let vdd = cfg.vdd_v;
    let expect = k as f64 * vdd * vdd / rref * t_hold;
    let got = res.energy.hold_energy_j;
    assert!((got / expect - 1.0).abs() < 0.01, "{got:e} vs {expect:e}");
    assert!((res.release_time_s - t_hold).abs() < 1e-15);
    assert!(res.power.samples.iter().any(|s| s.1 == Segment::Hold));
}

#[test]
fn energy_balances_across_designs() {
    let s = SimulationSettings::default();
    for scheme in [Scheme::Standard, Scheme::ProlongedPre] {
        let cfg = ArrayConfig::new(16, 16).with_scheme(scheme);
        for tech in [
            CellTechnology::sot(0.0),
            CellTechnology::sot(4e6),
            CellTechnology::fefet(4e6),
            CellTechnology::sram(1e6),
        ] {
            let e = simulate_at_distance(&cfg, &tech, &s, 6, Placement::Random, 11).unwrap().energy;
            assert!(e.balance_error() < 0.005, "{} {scheme:?}: {}", tech.label(), e.balance_error());
            for v in [e.search_energy_j, e.precharge_energy_j, e.hold_energy_j, e.recharge_energy_j] {
                assert!(v >= 0.0);
            }
            assert!((e.total_j - e.search_energy_j - e.precharge_energy_j).abs() <= 1e-12 * e.total_j);
        }
    }
}

#[test]
fn prolonged_precharge_costs_more_energy() {
    let s = SimulationSettings::default();
    let tech = CellTechnology::sot(4e6);
    let std = simulate_at_distance(&ArrayConfig::new(16, 16), &tech, &s, 6, Placement::Random, 2).unwrap();
    let pre = simulate_at_distance(
        &ArrayConfig::new(16, 16).with_scheme(Scheme::ProlongedPre),
        &tech,
        &s,
        6,
        Placement::Random,
        2,
    )
    .unwrap();
    assert!(pre.energy.total_j > std.energy.total_j);
    assert!(pre.energy.hold_energy_j > 0.0);
    assert_eq!(std.energy.hold_energy_j, 0.0);
}
