//! Implicit transient integration of the search operation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issues, Result};
use crate::network::{CircuitNetwork, NodeId, Phase, PowerSample, Scheme};

/// Largest number of samples per node written to a trace file.
pub const TRACE_MAX_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BackwardEuler,
    Trapezoidal,
    /// Variable-step second-order backward difference.
    Bdf2,
}

impl Method {
    fn order(self) -> i32 {
        match self {
            Method::BackwardEuler => 1,
            Method::Trapezoidal | Method::Bdf2 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    #[serde(default = "defaults::method")]
    pub method: Method,
    #[serde(default = "defaults::dt_initial")]
    pub dt_initial_s: f64,
    /// Per-step local truncation error target.
    #[serde(default = "defaults::tolerance")]
    pub tolerance_v: f64,
    /// Evaluation window after matchline release; also caps an automatic hold.
    #[serde(default = "defaults::t_max")]
    pub t_max_s: f64,
    /// Automatic hold ends once every node moves slower than this.
    #[serde(default = "defaults::steady_state_eps")]
    pub steady_state_eps_v_per_s: f64,
    #[serde(default = "defaults::dt_min")]
    pub dt_min_s: f64,
    #[serde(default = "defaults::newton_max_iterations")]
    pub newton_max_iterations: usize,
    /// Keep integrating to `t_max_s` after every row has resolved.
    #[serde(default)]
    pub run_to_t_max: bool,
    /// Record sense-node and far-end searchline voltages.
    #[serde(default)]
    pub trace: bool,
}

mod defaults {
    use super::Method;
    pub fn method() -> Method {
        Method::Bdf2
    }
    pub fn dt_initial() -> f64 {
        1e-16
    }
    pub fn tolerance() -> f64 {
        1e-4
    }
    pub fn t_max() -> f64 {
        1e-6
    }
    pub fn steady_state_eps() -> f64 {
        1e6
    }
    pub fn dt_min() -> f64 {
        1e-22
    }
    pub fn newton_max_iterations() -> usize {
        50
    }
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            method: defaults::method(),
            dt_initial_s: defaults::dt_initial(),
            tolerance_v: defaults::tolerance(),
            t_max_s: defaults::t_max(),
            steady_state_eps_v_per_s: defaults::steady_state_eps(),
            dt_min_s: defaults::dt_min(),
            newton_max_iterations: defaults::newton_max_iterations(),
            run_to_t_max: false,
            trace: false,
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        for (field, v) in [
            ("simulation.dt_initial_s", self.dt_initial_s),
            ("simulation.tolerance_v", self.tolerance_v),
            ("simulation.t_max_s", self.t_max_s),
            ("simulation.steady_state_eps_v_per_s", self.steady_state_eps_v_per_s),
            ("simulation.dt_min_s", self.dt_min_s),
        ] {
            issues.require(v > 0.0 && v.is_finite(), field, "must be finite and > 0");
        }
        issues.require(
            self.dt_min_s <= self.dt_initial_s,
            "simulation.dt_min_s",
            "must not exceed dt_initial_s",
        );
        issues.require(
            self.newton_max_iterations >= 1,
            "simulation.newton_max_iterations",
            "must be >= 1",
        );
        issues.finish()
    }
}

/// Outcome for one row's sense node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowDelay {
    /// Seconds from matchline release to the threshold crossing.
    Crossed(f64),
    /// No conducting discharge path once the array settled.
    NoDischarge,
    /// Still discharging when the evaluation window closed.
    TimedOut,
}

impl RowDelay {
    pub fn seconds(self) -> Option<f64> {
        match self {
            RowDelay::Crossed(t) => Some(t),
            _ => None,
        }
    }

    /// CSV cell: the delay in seconds, or a sentinel.
    pub fn csv_value(self) -> String {
        match self {
            RowDelay::Crossed(t) => format!("{t:.9e}"),
            RowDelay::NoDischarge => "NO_DISCHARGE".into(),
            RowDelay::TimedOut => "TIMED_OUT".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Hold,
    Evaluate,
}

/// Power flows at each accepted time point, plus the stored-energy endpoints
/// needed to close the balance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PowerTrace {
    pub samples: Vec<(f64, Segment, PowerSampleRecord)>,
    pub stored_initial_j: f64,
    pub stored_final_j: f64,
    /// Energy the precharge supply spends restoring every matchline node to Vdd.
    pub recharge_j: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerSampleRecord {
    pub searchline_source_w: f64,
    pub precharge_source_w: f64,
    pub searchline_dissipation_w: f64,
    pub matchline_dissipation_w: f64,
}

impl From<PowerSample> for PowerSampleRecord {
    fn from(p: PowerSample) -> Self {
        Self {
            searchline_source_w: p.searchline_source,
            precharge_source_w: p.precharge_source,
            searchline_dissipation_w: p.searchline_dissipation,
            matchline_dissipation_w: p.matchline_dissipation,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Searchline-side dissipation over the whole operation plus matchline
    /// dissipation during evaluation.
    pub search_energy_j: f64,
    /// Hold-phase precharge supply energy plus matchline recharge.
    pub precharge_energy_j: f64,
    pub total_j: f64,
    pub hold_energy_j: f64,
    pub recharge_energy_j: f64,
    pub delivered_j: f64,
    pub dissipated_j: f64,
    pub stored_delta_j: f64,
}

impl EnergyBreakdown {
    /// |delivered − dissipated − Δstored| relative to the delivered energy.
    pub fn balance_error(&self) -> f64 {
        let scale = self.delivered_j.abs().max(self.dissipated_j.abs()).max(f64::MIN_POSITIVE);
        (self.delivered_j - self.dissipated_j - self.stored_delta_j).abs() / scale
    }
}

/// Trapezoidal integration of the recorded power flows.
pub fn extract_energy(trace: &PowerTrace) -> EnergyBreakdown {
    let mut sl_src = 0.0;
    let mut pre_src_hold = 0.0;
    let mut sl_diss = 0.0;
    let mut ml_diss_hold = 0.0;
    let mut ml_diss_eval = 0.0;
    for w in trace.samples.windows(2) {
        let (t0, s0, p0) = w[0];
        let (t1, s1, p1) = w[1];
        if s0 != s1 {
            continue;
        }
        let h = 0.5 * (t1 - t0);
        sl_src += h * (p0.searchline_source_w + p1.searchline_source_w);
        sl_diss += h * (p0.searchline_dissipation_w + p1.searchline_dissipation_w);
        let ml = h * (p0.matchline_dissipation_w + p1.matchline_dissipation_w);
        match s0 {
            Segment::Hold => {
                pre_src_hold += h * (p0.precharge_source_w + p1.precharge_source_w);
                ml_diss_hold += ml;
            }
            Segment::Evaluate => ml_diss_eval += ml,
        }
    }
    let search = sl_diss + ml_diss_eval;
    let precharge = pre_src_hold + trace.recharge_j;
    EnergyBreakdown {
        search_energy_j: search,
        precharge_energy_j: precharge,
        total_j: search + precharge,
        hold_energy_j: pre_src_hold,
        recharge_energy_j: trace.recharge_j,
        delivered_j: sl_src + pre_src_hold,
        dissipated_j: sl_diss + ml_diss_hold + ml_diss_eval,
        stored_delta_j: trace.stored_final_j - trace.stored_initial_j,
    }
}

/// Sampled node voltages.
#[derive(Debug, Clone, Default)]
pub struct VoltageTrace {
    pub nodes: Vec<NodeId>,
    pub times: Vec<f64>,
    /// `values[k][j]`: node `nodes[j]` at `times[k]`.
    pub values: Vec<Vec<f64>>,
}

impl VoltageTrace {
    /// Writes `time_s,node_id,voltage_v`, keeping at most
    /// [`TRACE_MAX_SAMPLES`] evenly strided samples per node.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_s", "node_id", "voltage_v"])?;
        let stride = self.times.len().div_ceil(TRACE_MAX_SAMPLES).max(1);
        for (k, t) in self.times.iter().enumerate().step_by(stride) {
            for (j, node) in self.nodes.iter().enumerate() {
                w.write_record([
                    format!("{t:.9e}"),
                    node.0.to_string(),
                    format!("{:.9e}", self.values[k][j]),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TransientResult {
    pub delays: Vec<RowDelay>,
    /// Matchline release instant; 0 for the standard scheme.
    pub release_time_s: f64,
    pub end_time_s: f64,
    pub energy: EnergyBreakdown,
    pub power: PowerTrace,
    /// Time for each column's far-end searchline node to reach half the drive.
    pub searchline_rise_s: Vec<Option<f64>>,
    pub final_state: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub trace: Option<VoltageTrace>,
}

impl TransientResult {
    pub fn row_delay(&self, row: usize) -> RowDelay {
        self.delays[row]
    }

    /// Slowest crossing delay, if any row crossed.
    pub fn worst_delay(&self) -> Option<f64> {
        self.delays.iter().filter_map(|d| d.seconds()).reduce(f64::max)
    }

    pub fn timed_out_rows(&self) -> Vec<usize> {
        (0..self.delays.len())
            .filter(|&r| self.delays[r] == RowDelay::TimedOut)
            .collect()
    }
}

/// Time at which the quadratic through three samples falls through `level`
/// inside the last interval; linear when only two samples are available or
/// the quadratic root is not bracketed.
fn crossing_time(pts: &[(f64, f64)], level: f64) -> f64 {
    let n = pts.len();
    let (t1, v1) = pts[n - 2];
    let (t2, v2) = pts[n - 1];
    let linear = t1 + (v1 - level) / (v1 - v2) * (t2 - t1);
    if n < 3 {
        return linear;
    }
    let (t0, v0) = pts[n - 3];
    // Newton form around t2 in s = t − t2.
    let d01 = (v1 - v0) / (t1 - t0);
    let d12 = (v2 - v1) / (t2 - t1);
    let a = (d12 - d01) / (t2 - t0);
    let b = d12 + a * (t2 - t1);
    let c = v2 - level;
    let s = if a.abs() < 1e-300 {
        -c / b
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return linear;
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let r1 = q / a;
        let r2 = c / q;
        let lo = t1 - t2;
        match (lo..=0.0).contains(&r1) {
            true => r1,
            false => r2,
        }
    };
    let t = t2 + s;
    if t >= t1 && t <= t2 && t.is_finite() {
        t
    } else {
        linear
    }
}

/// Per-step integrator data; `coeff·x − hist` is the capacitor companion term.
struct Companion {
    coeff: Vec<f64>,
    hist: Vec<f64>,
}

struct History {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl History {
    fn restart(&mut self, t: f64, x: &[f64]) {
        self.times.clear();
        self.states.clear();
        self.push(t, x);
    }

    fn push(&mut self, t: f64, x: &[f64]) {
        if self.times.len() == 3 {
            self.times.remove(0);
            self.states.remove(0);
        }
        self.times.push(t);
        self.states.push(x.to_vec());
    }

    fn len(&self) -> usize {
        self.times.len()
    }

    /// Extrapolated state at `t` from the last `points` samples.
    fn predict(&self, t: f64, points: usize, out: &mut [f64]) {
        let k = self.len();
        let ts = &self.times[k - points..];
        let xs = &self.states[k - points..];
        // Lagrange weights.
        let w: Vec<f64> = (0..points)
            .map(|i| {
                (0..points)
                    .filter(|&j| j != i)
                    .map(|j| (t - ts[j]) / (ts[i] - ts[j]))
                    .product()
            })
            .collect();
        for (n, o) in out.iter_mut().enumerate() {
            *o = (0..points).map(|i| w[i] * xs[i][n]).sum();
        }
    }
}

struct Tracker {
    rows: usize,
    threshold: f64,
    sense: Vec<usize>,
    points: Vec<Vec<(f64, f64)>>,
    delays: Vec<Option<RowDelay>>,
    far_sl: Vec<usize>,
    sl_half: f64,
    sl_prev: Vec<(f64, f64)>,
    sl_rise: Vec<Option<f64>>,
}

impl Tracker {
    fn release(&mut self, t: f64, x: &[f64]) {
        for r in 0..self.rows {
            self.points[r].clear();
            self.points[r].push((t, x[self.sense[r]]));
        }
    }

    fn observe(&mut self, t: f64, x: &[f64], release: Option<f64>) {
        for (c, &node) in self.far_sl.iter().enumerate() {
            let (tp, vp) = self.sl_prev[c];
            let v = x[node];
            if self.sl_rise[c].is_none() && vp < self.sl_half && v >= self.sl_half {
                self.sl_rise[c] = Some(tp + (self.sl_half - vp) / (v - vp) * (t - tp));
            }
            self.sl_prev[c] = (t, v);
        }
        let Some(t0) = release else { return };
        for r in 0..self.rows {
            if self.delays[r].is_some() {
                continue;
            }
            let pts = &mut self.points[r];
            pts.push((t, x[self.sense[r]]));
            if pts.len() > 3 {
                pts.remove(0);
            }
            let n = pts.len();
            if n >= 2 && pts[n - 2].1 > self.threshold && pts[n - 1].1 <= self.threshold {
                let tc = crossing_time(pts, self.threshold);
                self.delays[r] = Some(RowDelay::Crossed((tc - t0).max(0.0)));
            }
        }
    }

    fn all_resolved(&self) -> bool {
        self.delays.iter().all(|d| d.is_some())
    }
}

/// Simulate one search operation.
///
/// Searchlines step to their drive level at t = 0. With the standard scheme
/// matchlines are released at the same instant; with the prolonged precharge
/// they stay connected to Vdd until the hold ends and delays are measured from
/// the release.
pub fn simulate_search(network: &CircuitNetwork, settings: &SimulationSettings) -> Result<TransientResult> {
    settings.validate()?;
    let cfg = &network.config;
    let n = network.node_count();
    let n_upper = network.upper_len();
    let rows = network.rows();
    let caps = network.node_capacitance().to_vec();

    let mut x = network.initial_state();
    let holding = cfg.scheme == Scheme::ProlongedPre;
    let mut phase = Phase {
        searchline_v: cfg.vs_v,
        precharge: holding,
    };
    let mut release: Option<f64> = (!holding).then_some(0.0);
    let hold_limit = cfg.precharge_hold_s.unwrap_or(settings.t_max_s);

    let mut tracker = Tracker {
        rows,
        threshold: cfg.sense_threshold(),
        sense: (0..rows).map(|r| network.sense_node(r).0).collect(),
        points: vec![Vec::with_capacity(4); rows],
        delays: vec![None; rows],
        far_sl: (0..network.cols())
            .map(|c| network.searchline_node(c, rows - 1).0)
            .collect(),
        sl_half: 0.5 * cfg.vs_v,
        sl_prev: vec![(0.0, 0.0); network.cols()],
        sl_rise: vec![None; network.cols()],
    };
    if release.is_some() {
        tracker.release(0.0, &x);
    }

    let trace_nodes: Vec<NodeId> = if settings.trace {
        (0..rows)
            .map(|r| network.sense_node(r))
            .chain((0..network.cols()).map(|c| network.searchline_node(c, rows - 1)))
            .collect()
    } else {
        Vec::new()
    };
    let mut vtrace = settings.trace.then(|| VoltageTrace {
        nodes: trace_nodes.clone(),
        ..Default::default()
    });
    let record_trace = |vt: &mut Option<VoltageTrace>, t: f64, x: &[f64]| {
        if let Some(vt) = vt {
            vt.times.push(t);
            vt.values.push(trace_nodes.iter().map(|n| x[n.0]).collect());
        }
    };
    record_trace(&mut vtrace, 0.0, &x);

    let segment = |p: &Phase| if p.precharge { Segment::Hold } else { Segment::Evaluate };
    let mut power = PowerTrace {
        stored_initial_j: network.stored_energy(&x),
        ..Default::default()
    };
    power.samples.push((0.0, segment(&phase), network.power(&x, &phase).into()));

    let mut hist = History {
        times: Vec::with_capacity(3),
        states: Vec::with_capacity(3),
    };
    hist.restart(0.0, &x);
    let mut t = 0.0;
    let mut dt = settings.dt_initial_s;
    let dt_max = settings.t_max_s / 50.0;
    let newton_tol = 1e-3 * settings.tolerance_v;
    let mut comp = Companion {
        coeff: vec![0.0; n],
        hist: vec![0.0; n],
    };
    let mut x_new = x.clone();
    let mut pred = vec![0.0; n];
    let mut f_prev: Vec<f64> = Vec::new();
    let mut h_prev = 0.0;
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    loop {
        let t_end = match release {
            Some(t0) => t0 + settings.t_max_s,
            None => hold_limit,
        };
        dt = dt.min(t_end - t).min(dt_max);
        if dt < settings.dt_min_s {
            if t_end - t < settings.dt_min_s {
                // Landed on the boundary.
                dt = t_end - t;
            } else {
                return Err(Error::StepUnderflow { time: t, dt });
            }
        }

        let since = hist.len();
        // Second-order steps need three points for their error estimate.
        let method = if since < 3 { Method::BackwardEuler } else { settings.method };
        match method {
            Method::BackwardEuler => {
                for i in 0..n {
                    comp.coeff[i] = caps[i] / dt;
                    comp.hist[i] = comp.coeff[i] * x[i];
                }
            }
            Method::Trapezoidal => {
                if f_prev.is_empty() {
                    f_prev = network.kcl_residual(&x, &phase);
                }
                for i in 0..n {
                    comp.coeff[i] = 2.0 * caps[i] / dt;
                    comp.hist[i] = comp.coeff[i] * x[i] - f_prev[i];
                }
            }
            Method::Bdf2 => {
                let w = dt / h_prev;
                let a0 = (1.0 + 2.0 * w) / (1.0 + w);
                let a1 = -(1.0 + w);
                let a2 = w * w / (1.0 + w);
                let xm1 = &hist.states[hist.len() - 2];
                for i in 0..n {
                    comp.coeff[i] = caps[i] * a0 / dt;
                    comp.hist[i] = -caps[i] / dt * (a1 * x[i] + a2 * xm1[i]);
                }
            }
        }

        x_new.copy_from_slice(&x);
        let solved = network
            .solve_upper(
                &mut x_new,
                &phase,
                Some((&comp.coeff[..n_upper], &comp.hist[..n_upper])),
                settings.newton_max_iterations,
                newton_tol,
            )
            .and_then(|_| network.solve_lower(&mut x_new, &phase, Some((&comp.coeff, &comp.hist)), None));
        if let Err(e) = solved {
            log::debug!("step rejected at t={t:e}, dt={dt:e}: {e}");
            rejected += 1;
            dt *= 0.25;
            if dt < settings.dt_min_s {
                return Err(Error::StepUnderflow { time: t, dt });
            }
            continue;
        }

        // Local truncation error from the predictor–corrector difference.
        let p = method.order();
        let err = if since >= 2 {
            let (points, factor) = match method {
                Method::BackwardEuler => (2, dt / (2.0 * dt + h_prev)),
                Method::Bdf2 => (3, 2.0 / 11.0),
                Method::Trapezoidal => (3, 1.0 / 13.0),
            };
            hist.predict(t + dt, points, &mut pred);
            let mut worst = 0.0_f64;
            for i in 0..n {
                if caps[i] > 0.0 {
                    worst = worst.max((x_new[i] - pred[i]).abs());
                }
            }
            factor * worst / settings.tolerance_v
        } else {
            0.0
        };
        if err > 1.0 {
            rejected += 1;
            dt *= (0.9 * err.powf(-1.0 / f64::from(p + 1))).clamp(0.1, 0.9);
            if dt < settings.dt_min_s {
                return Err(Error::StepUnderflow { time: t, dt });
            }
            continue;
        }

        // Accept.
        let mut max_rate = 0.0_f64;
        for i in 0..n {
            max_rate = max_rate.max(((x_new[i] - x[i]) / dt).abs());
        }
        let mut upper_rate = 0.0_f64;
        for i in 0..n_upper {
            upper_rate = upper_rate.max(((x_new[i] - x[i]) / dt).abs());
        }
        t += dt;
        accepted += 1;
        std::mem::swap(&mut x, &mut x_new);
        hist.push(t, &x);
        h_prev = dt;
        if method == Method::Trapezoidal || settings.method == Method::Trapezoidal {
            f_prev = network.kcl_residual(&x, &phase);
        }
        power.samples.push((t, segment(&phase), network.power(&x, &phase).into()));
        tracker.observe(t, &x, release);
        record_trace(&mut vtrace, t, &x);

        let growth = if err > 0.0 {
            (0.9 * err.powf(-1.0 / f64::from(p + 1))).clamp(0.2, 2.0)
        } else {
            2.0
        };
        dt *= growth;

        match release {
            None => {
                let hold_done = match cfg.precharge_hold_s {
                    Some(h) => t >= h * (1.0 - 1e-12),
                    None => max_rate < settings.steady_state_eps_v_per_s || t >= hold_limit,
                };
                if cfg.precharge_hold_s.is_none() && t >= hold_limit {
                    log::warn!("precharge hold reached t_max before steady state");
                }
                if hold_done {
                    release = Some(t);
                    phase.precharge = false;
                    tracker.release(t, &x);
                    power.samples.push((t, segment(&phase), network.power(&x, &phase).into()));
                    hist.restart(t, &x);
                    f_prev.clear();
                    dt = settings.dt_initial_s;
                }
            }
            Some(t0) => {
                if upper_rate < settings.steady_state_eps_v_per_s {
                    for r in 0..rows {
                        if tracker.delays[r].is_none() && row_conductance(network, &x, r) == 0.0 {
                            tracker.delays[r] = Some(RowDelay::NoDischarge);
                        }
                    }
                }
                let done = t >= t0 + settings.t_max_s * (1.0 - 1e-12);
                if done || (!settings.run_to_t_max && tracker.all_resolved()) {
                    break;
                }
            }
        }
    }

    let delays: Vec<RowDelay> = tracker
        .delays
        .iter()
        .enumerate()
        .map(|(r, d)| match d {
            Some(d) => *d,
            None if row_conductance(network, &x, r) == 0.0 => RowDelay::NoDischarge,
            None => RowDelay::TimedOut,
        })
        .collect();
    power.stored_final_j = network.stored_energy(&x);
    let vdd = cfg.vdd_v;
    power.recharge_j = (n_upper..n).map(|i| caps[i] * vdd * (vdd - x[i]).max(0.0)).sum();
    let energy = extract_energy(&power);

    Ok(TransientResult {
        delays,
        release_time_s: release.unwrap_or(t),
        end_time_s: t,
        energy,
        power,
        searchline_rise_s: tracker.sl_rise,
        final_state: x,
        steps_accepted: accepted,
        steps_rejected: rejected,
        trace: vtrace,
    })
}

/// Total discharge conductance of a row at state `x`.
pub fn row_conductance(network: &CircuitNetwork, x: &[f64], row: usize) -> f64 {
    (0..network.cols())
        .map(|c| {
            let p = network.cell(row, c);
            if p.gated_off {
                return 0.0;
            }
            let gate = network
                .gate_node(c, row)
                .unwrap_or_else(|| network.searchline_node(c, row));
            p.conductance(x[gate.0]).0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_crossing_is_exact_for_parabola() {
        let f = |t: f64| 1.0 - 0.3 * t - 0.2 * t * t;
        let pts: Vec<(f64, f64)> = [0.0, 0.7, 1.5].iter().map(|&t| (t, f(t))).collect();
        let level = 0.5;
        // 0.2 t² + 0.3 t − 0.5 = 0 → t = 1
        let tc = crossing_time(&pts, level);
        assert!((tc - 1.0).abs() < 1e-12, "{tc}");
        let lin = crossing_time(&pts[1..], level);
        assert!(lin > 0.7 && lin < 1.5);
    }

    #[test]
    fn lagrange_predictor_reproduces_quadratics() {
        let mut h = History {
            times: vec![],
            states: vec![],
        };
        let f = |t: f64| 2.0 + t - 3.0 * t * t;
        for t in [0.0, 0.1, 0.35] {
            h.push(t, &[f(t)]);
        }
        let mut out = [0.0];
        h.predict(0.6, 3, &mut out);
        assert!((out[0] - f(0.6)).abs() < 1e-12);
    }

    #[test]
    fn settings_validation() {
        assert!(SimulationSettings::default().validate().is_ok());
        let s = SimulationSettings {
            tolerance_v: 0.0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = SimulationSettings {
            t_max_s: -1.0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn energy_integration_of_constant_power() {
        let rec = PowerSampleRecord {
            searchline_source_w: 2.0,
            searchline_dissipation_w: 2.0,
            ..Default::default()
        };
        let trace = PowerTrace {
            samples: vec![(0.0, Segment::Evaluate, rec), (0.5, Segment::Evaluate, rec), (1.5, Segment::Evaluate, rec)],
            ..Default::default()
        };
        let e = extract_energy(&trace);
        assert!((e.search_energy_j - 3.0).abs() < 1e-12);
        assert!((e.delivered_j - 3.0).abs() < 1e-12);
        assert!(e.balance_error() < 1e-12);
        assert_eq!(e.total_j, e.search_energy_j + e.precharge_energy_j);
    }
}
