use camsim::analysis::{simulate_at_distance, study_query, words_at_distance, Placement};
use camsim::cell::{CellTechnology, TransistorModel};
use camsim::network::{build_network, ArrayConfig, Scheme};
use camsim::transient::{simulate_search, Method, RowDelay, SimulationSettings};

/// FeFET cell whose transistor is an ideal switch, so the matchline sees a
/// single pole through `rref`.
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

fn single_pole_delay(r: f64, c: f64, settings: &SimulationSettings) -> f64 {
    let mut cfg = ArrayConfig::new(1, 1);
    cfg.matchline_c_per_cell_f = c;
    let res = simulate_at_distance(&cfg, &ideal_switch(r), settings, 1, Placement::Contiguous, 0).unwrap();
    res.row_delay(0).seconds().unwrap()
}

#[test]
fn single_pole_matches_rc_ln2() {
    let s = SimulationSettings::default();
    for r in [0.5e6, 1e6, 4e6, 8e6] {
        for c in [1e-15, 10e-15, 100e-15] {
            let t = single_pole_delay(r, c, &s);
            let expect = r * c * std::f64::consts::LN_2;
            assert!((t / expect - 1.0).abs() < 0.01, "R {r:e} C {c:e}: {t:e} vs {expect:e}");
        }
    }
}

#[test]
fn every_method_meets_the_oracle() {
    // Backward Euler is first order; it needs a tighter step tolerance for
    // the same global accuracy.
    for (method, tol) in [(Method::BackwardEuler, 2e-5), (Method::Trapezoidal, 1e-4), (Method::Bdf2, 1e-4)] {
        let s = SimulationSettings {
            method,
            tolerance_v: tol,
            ..Default::default()
        };
        let t = single_pole_delay(4e6, 10e-15, &s);
        let expect = 4e6 * 10e-15 * std::f64::consts::LN_2;
        assert!((t / expect - 1.0).abs() < 0.01, "{method:?}: {t:e} vs {expect:e}");
    }
}

#[test]
fn two_branches_halve_the_delay() {
    let s = SimulationSettings::default();
    let mut cfg = ArrayConfig::new(1, 2);
    cfg.matchline_c_per_cell_f = 5e-15;
    let tech = ideal_switch(2e6);
    let one = simulate_at_distance(&cfg, &tech, &s, 1, Placement::Contiguous, 0).unwrap();
    let two = simulate_at_distance(&cfg, &tech, &s, 2, Placement::Contiguous, 0).unwrap();
    let ratio = one.row_delay(0).seconds().unwrap() / two.row_delay(0).seconds().unwrap();
    assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
}

#[test]
fn matched_row_never_discharges() {
    for scheme in [Scheme::Standard, Scheme::ProlongedPre] {
        let cfg = ArrayConfig::new(4, 8).with_scheme(scheme);
        for tech in [CellTechnology::sot(4e6), CellTechnology::fefet(4e6), CellTechnology::sram(0.0)] {
            let res = simulate_at_distance(&cfg, &tech, &SimulationSettings::default(), 0, Placement::Random, 3).unwrap();
            assert!(res.delays.iter().all(|d| *d == RowDelay::NoDischarge), "{tech:?} {scheme:?}");
        }
    }
}

#[test]
fn delay_converges_on_tolerance_halving() {
    let cfg = ArrayConfig::new(16, 16);
    for tech in [CellTechnology::sot(4e6), CellTechnology::fefet(4e6)] {
        let coarse = SimulationSettings::default();
        let fine = SimulationSettings {
            tolerance_v: coarse.tolerance_v / 2.0,
            ..coarse.clone()
        };
        let a = simulate_at_distance(&cfg, &tech, &coarse, 5, Placement::Random, 2).unwrap();
        let b = simulate_at_distance(&cfg, &tech, &fine, 5, Placement::Random, 2).unwrap();
        for (x, y) in a.delays.iter().zip(&b.delays) {
            let (x, y) = (x.seconds().unwrap(), y.seconds().unwrap());
            assert!((x / y - 1.0).abs() < 0.01, "{x:e} vs {y:e}");
        }
    }
}

#[test]
fn sense_voltage_never_rises_after_release() {
    let cfg = ArrayConfig::new(8, 8);
    let s = SimulationSettings {
        trace: true,
        run_to_t_max: true,
        t_max_s: 20e-9,
        ..Default::default()
    };
    let res = simulate_at_distance(&cfg, &CellTechnology::sot(1e6), &s, 3, Placement::Random, 5).unwrap();
    let trace = res.trace.unwrap();
    // Second-order steps may dip below 0 V by less than the step tolerance
    // before relaxing back.
    let mut rises = 0.0_f64;
    for (a, b) in trace.values.iter().zip(trace.values.iter().skip(1)) {
        for row in 0..cfg.rows {
            rises = rises.max(b[row] - a[row]);
        }
    }
    assert!(rises < s.tolerance_v, "largest rise {rises:e}");
}

#[test]
fn prolonged_precharge_equalises_row_positions() {
    let cfg = ArrayConfig::new(32, 32).with_scheme(Scheme::ProlongedPre);
    let query = study_query(4, 32);
    let stored = words_at_distance(&query, 32, 8, Placement::Contiguous, 4);
    let net = build_network(&cfg, &CellTechnology::fefet(4e6), &stored, &query, None).unwrap();
    let res = simulate_search(&net, &SimulationSettings::default()).unwrap();
    let d: Vec<f64> = res.delays.iter().map(|d| d.seconds().unwrap()).collect();
    let (lo, hi) = d.iter().fold((f64::MAX, 0.0_f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!((hi - lo) / lo < 1e-3, "spread {}", (hi - lo) / lo);
}

#[test]
fn standard_scheme_delays_grow_with_distance_from_drivers() {
    let cfg = ArrayConfig::new(32, 32);
    let query = study_query(4, 32);
    let stored = words_at_distance(&query, 32, 8, Placement::Contiguous, 4);
    let net = build_network(&cfg, &CellTechnology::fefet(4e6), &stored, &query, None).unwrap();
    let res = simulate_search(&net, &SimulationSettings::default()).unwrap();
    let d: Vec<f64> = res.delays.iter().map(|d| d.seconds().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[1] >= w[0]), "{d:?}");
    assert!(d[31] > d[0]);
}

#[test]
fn doubling_wire_resistance_slows_far_searchline() {
    let mut cfg = ArrayConfig::new(64, 8);
    let tech = CellTechnology::sot(4e6);
    let s = SimulationSettings::default();
    let rise = |cfg: &ArrayConfig| {
        let res = simulate_at_distance(cfg, &tech, &s, 4, Placement::Random, 1).unwrap();
        res.searchline_rise_s.iter().map(|r| r.unwrap()).fold(0.0, f64::max)
    };
    let base = rise(&cfg);
    cfg.wire_r_per_cell_ohm *= 2.0;
    assert!(rise(&cfg) > base);
}

#[test]
fn cells_below_threshold_report_no_discharge() {
    let mut tech = CellTechnology::sram(1e6);
    tech.transistor.vth_v = 0.8;
    let res = simulate_at_distance(&ArrayConfig::new(2, 4), &tech, &SimulationSettings::default(), 2, Placement::Random, 1)
        .unwrap();
    assert!(res.delays.iter().all(|d| *d == RowDelay::NoDischarge));
}

#[test]
fn slow_discharge_times_out() {
    let s = SimulationSettings {
        t_max_s: 5e-9,
        ..Default::default()
    };
    let res = simulate_at_distance(&ArrayConfig::new(2, 4), &CellTechnology::sram(1e15), &s, 2, Placement::Random, 1)
        .unwrap();
    assert!(res.delays.iter().all(|d| *d == RowDelay::TimedOut));
    assert_eq!(res.timed_out_rows(), vec![0, 1]);
}
