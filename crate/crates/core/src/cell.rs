//! Electrical abstraction of one CAM cell's search path.
//!
//! Only the searchline that is driven high is modelled; its complement sits at
//! ground. A cell is a gate-drive stage (direct tap, or the SOT MTJ divider)
//! feeding a discharge transistor that is in series with `rref` from the
//! matchline to ground.

use serde::{Deserialize, Serialize};

use crate::device::{mtj_current, CellVariation, FefetModel, MtjModel, MtjState};
use crate::error::{Error, Issues, Result};

/// Convergence target of the SOT divider solve, volts.
pub const GATE_TOLERANCE_V: f64 = 1e-6;
pub const GATE_MAX_ITERATIONS: usize = 100;
const GATE_DAMPING: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechnologyKind {
    Sot,
    Fefet,
    Sram,
}

impl TechnologyKind {
    pub fn label(self) -> &'static str {
        match self {
            TechnologyKind::Sot => "SOT",
            TechnologyKind::Fefet => "FeFET",
            TechnologyKind::Sram => "SRAM",
        }
    }
}

/// Discharge transistor reduced to a gate-controlled channel resistance
/// `max(r_on_min, 1 / (k·(Vg − Vth)))`, hard off at or below threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransistorModel {
    pub vth_v: f64,
    pub k_sat_a_per_v2: f64,
    pub r_on_min_ohm: f64,
    /// Gate capacitance; loads the searchline directly (FeFET, SRAM) or the
    /// divider midpoint (SOT).
    pub c_gate_f: f64,
}

impl TransistorModel {
    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        for (field, v) in [
            ("transistor.vth_v", self.vth_v),
            ("transistor.k_sat_a_per_v2", self.k_sat_a_per_v2),
            ("transistor.r_on_min_ohm", self.r_on_min_ohm),
        ] {
            issues.require(v > 0.0, field, "must be > 0");
        }
        issues.require(self.c_gate_f >= 0.0, "transistor.c_gate_f", "must be >= 0");
        issues.finish()
    }

    /// Channel resistance at gate voltage `gate` with threshold `vth`.
    pub fn channel_resistance(&self, vth: f64, gate: f64) -> f64 {
        let ov = gate - vth;
        if ov <= 0.0 {
            f64::INFINITY
        } else {
            (1.0 / (self.k_sat_a_per_v2 * ov)).max(self.r_on_min_ohm)
        }
    }
}

/// Conductance of the transistor + `rref` path and its derivative in the gate
/// voltage.
pub(crate) fn path_conductance(vth: f64, k: f64, r_on_min: f64, rref: f64, gate: f64) -> (f64, f64) {
    let ov = gate - vth;
    if ov <= 0.0 {
        return (0.0, 0.0);
    }
    let r_sq = 1.0 / (k * ov);
    if r_sq <= r_on_min {
        (1.0 / (r_on_min + rref), 0.0)
    } else {
        // g = k·ov / (1 + k·ov·rref)
        let d = 1.0 + k * ov * rref;
        (k * ov / d, k / (d * d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTechnology {
    pub kind: TechnologyKind,
    /// Series reference resistance; 0 is the unmodified design.
    pub rref_ohm: f64,
    pub transistor: TransistorModel,
    pub mtj: Option<MtjModel>,
    pub fefet: Option<FefetModel>,
}

impl CellTechnology {
    /// SOT cell. The gate sees the MTJ divider output (about 0.5 V on a
    /// mismatch), so the turn-on is set by `c_gate_f` and the divider resistance.
    pub fn sot(rref_ohm: f64) -> Self {
        Self {
            kind: TechnologyKind::Sot,
            rref_ohm,
            transistor: TransistorModel {
                vth_v: 0.40,
                k_sat_a_per_v2: 1.0e-4,
                r_on_min_ohm: 20e3,
                c_gate_f: 0.2e-15,
            },
            mtj: Some(MtjModel::default()),
            fefet: None,
        }
    }

    /// FeFET cell; the ferroelectric gate stack loads the searchline with
    /// about twice the capacitance of a logic transistor.
    pub fn fefet(rref_ohm: f64) -> Self {
        Self {
            kind: TechnologyKind::Fefet,
            rref_ohm,
            transistor: TransistorModel {
                vth_v: 0.47,
                k_sat_a_per_v2: 2.0e-4,
                r_on_min_ohm: 20e3,
                c_gate_f: 1.0e-15,
            },
            mtj: None,
            fefet: Some(FefetModel::default()),
        }
    }

    pub fn sram(rref_ohm: f64) -> Self {
        Self {
            kind: TechnologyKind::Sram,
            rref_ohm,
            transistor: TransistorModel {
                vth_v: 0.35,
                k_sat_a_per_v2: 2.0e-4,
                r_on_min_ohm: 20e3,
                c_gate_f: 0.5e-15,
            },
            mtj: None,
            fefet: None,
        }
    }

    pub fn preset(kind: TechnologyKind, rref_ohm: f64) -> Self {
        match kind {
            TechnologyKind::Sot => Self::sot(rref_ohm),
            TechnologyKind::Fefet => Self::fefet(rref_ohm),
            TechnologyKind::Sram => Self::sram(rref_ohm),
        }
    }

    pub fn with_rref(mut self, rref_ohm: f64) -> Self {
        self.rref_ohm = rref_ohm;
        self
    }

    /// Human-readable design name, e.g. `SOT-R` or `FeFET`.
    pub fn label(&self) -> String {
        if self.rref_ohm > 0.0 {
            format!("{}-R", self.kind.label())
        } else {
            self.kind.label().to_string()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        issues.require(self.rref_ohm >= 0.0, "technology.rref_ohm", "must be >= 0");
        issues.absorb(self.transistor.validate());
        let is_sot = self.kind == TechnologyKind::Sot;
        let is_fefet = self.kind == TechnologyKind::Fefet;
        match &self.mtj {
            Some(m) if is_sot => issues.absorb(m.validate()),
            Some(_) => issues.push("technology.mtj", "only valid for SOT cells"),
            None if is_sot => issues.push("technology.mtj", "required for SOT cells"),
            None => {}
        }
        match &self.fefet {
            Some(f) if is_fefet => issues.absorb(f.validate()),
            Some(_) => issues.push("technology.fefet", "only valid for FeFET cells"),
            None if is_fefet => issues.push("technology.fefet", "required for FeFET cells"),
            None => {}
        }
        issues.finish()
    }

    /// Threshold of the discharge transistor for a cell in `state`.
    pub fn effective_vth(&self, state: CellState) -> f64 {
        match (&self.fefet, self.kind) {
            (Some(f), TechnologyKind::Fefet) => {
                if state.is_match() {
                    f.vth_high_v
                } else {
                    f.vth_low_v
                }
            }
            _ => self.transistor.vth_v,
        }
    }

    /// Per-cell electrical parameters with `variation` applied.
    pub fn cell_params(&self, state: CellState, variation: &CellVariation) -> CellParams {
        let divider = self.mtj.as_ref().filter(|_| self.kind == TechnologyKind::Sot).map(|m| {
            let (upper, lower) = sot_branch_states(state);
            SotDivider {
                upper: MtjBranch::new(m, upper, variation.mtj_upper_scale),
                lower: MtjBranch::new(m, lower, variation.mtj_lower_scale),
            }
        });
        let gated_off = self.kind == TechnologyKind::Sram && state.is_match();
        CellParams {
            vth: self.effective_vth(state) + variation.vth_shift,
            k: self.transistor.k_sat_a_per_v2,
            r_on_min: self.transistor.r_on_min_ohm,
            rref: self.rref_ohm * variation.rref_scale,
            divider,
            gated_off,
        }
    }
}

/// Stored bit and search bit of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellState {
    pub stored: bool,
    pub search: bool,
}

impl CellState {
    pub fn new(stored: bool, search: bool) -> Self {
        Self { stored, search }
    }

    pub fn is_match(&self) -> bool {
        self.stored == self.search
    }
}

/// MTJ states of the (driven-side, ground-side) divider branches.
///
/// A stored 0 holds P on the S side and AP on the SB side; a stored 1 the
/// reverse. On a mismatch the P device faces the driven line, lifting the gate.
pub fn sot_branch_states(state: CellState) -> (MtjState, MtjState) {
    if state.is_match() {
        (MtjState::Antiparallel, MtjState::Parallel)
    } else {
        (MtjState::Parallel, MtjState::Antiparallel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtjBranch {
    pub r_parallel: f64,
    pub tmr0: f64,
    pub v_half: f64,
    pub state: MtjState,
}

impl MtjBranch {
    pub fn new(model: &MtjModel, state: MtjState, scale: f64) -> Self {
        Self {
            r_parallel: model.r_parallel() * scale,
            tmr0: model.tmr_zero_bias,
            v_half: model.half_bias_voltage_v,
            state,
        }
    }

    /// Current for bias `v` and its derivative.
    pub fn current(&self, v: f64) -> (f64, f64) {
        mtj_current(self.r_parallel, self.tmr0, self.v_half, self.state, v)
    }

    pub fn resistance(&self, v: f64) -> f64 {
        match self.state {
            MtjState::Parallel => self.r_parallel,
            MtjState::Antiparallel => {
                let x = v / self.v_half;
                self.r_parallel * (1.0 + self.tmr0 / (1.0 + x * x))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SotDivider {
    pub upper: MtjBranch,
    pub lower: MtjBranch,
}

impl SotDivider {
    /// Self-consistent midpoint voltage for `vsl` on the driven line, by
    /// damped fixed-point iteration on the resistive divider ratio.
    pub fn solve(&self, vsl: f64) -> Result<f64> {
        let mut vg = vsl * self.lower.r_parallel / (self.upper.r_parallel + self.lower.r_parallel);
        for _ in 0..GATE_MAX_ITERATIONS {
            let ru = self.upper.resistance(vsl - vg);
            let rl = self.lower.resistance(vg);
            let target = vsl * rl / (ru + rl);
            let step = target - vg;
            if step.abs() < 0.1 * GATE_TOLERANCE_V {
                return Ok(target);
            }
            vg += GATE_DAMPING * step;
        }
        Err(Error::NonConvergence {
            solver: "SOT divider",
            iterations: GATE_MAX_ITERATIONS,
            residual: (vsl * self.lower.resistance(vg)
                / (self.upper.resistance(vsl - vg) + self.lower.resistance(vg))
                - vg)
                .abs(),
        })
    }

    /// KCL mismatch at the midpoint: current in from the top minus current out
    /// to ground.
    pub fn midpoint_residual(&self, vsl: f64, vg: f64) -> f64 {
        self.upper.current(vsl - vg).0 - self.lower.current(vg).0
    }
}

/// Everything the network needs to stamp one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub vth: f64,
    pub k: f64,
    pub r_on_min: f64,
    pub rref: f64,
    pub divider: Option<SotDivider>,
    /// SRAM match: the stored complementary pair holds the gate at 0.
    pub gated_off: bool,
}

impl CellParams {
    pub fn conductance(&self, gate: f64) -> (f64, f64) {
        path_conductance(self.vth, self.k, self.r_on_min, self.rref, gate)
    }
}

/// Steady-state gate voltage of the discharge transistor.
pub fn gate_drive(tech: &CellTechnology, state: CellState, searchline_voltage: f64) -> Result<f64> {
    if !(searchline_voltage >= 0.0) {
        return Err(Error::validation("searchline_voltage", "must be >= 0"));
    }
    let params = tech.cell_params(state, &CellVariation::default());
    match (tech.kind, params.divider) {
        (TechnologyKind::Sot, Some(d)) => d.solve(searchline_voltage),
        (TechnologyKind::Sram, _) if state.is_match() => Ok(0.0),
        _ => Ok(searchline_voltage),
    }
}

/// Matchline discharge current through one cell.
pub fn discharge_current(tech: &CellTechnology, state: CellState, gate: f64, matchline_voltage: f64) -> f64 {
    let vth = tech.effective_vth(state);
    let (g, _) = path_conductance(
        vth,
        tech.transistor.k_sat_a_per_v2,
        tech.transistor.r_on_min_ohm,
        tech.rref_ohm,
        gate,
    );
    g * matchline_voltage.max(0.0)
}

/// Steady-state current drawn from the driven searchline by one cell.
pub fn searchline_load_current(tech: &CellTechnology, state: CellState, searchline_voltage: f64) -> Result<f64> {
    let params = tech.cell_params(state, &CellVariation::default());
    match params.divider {
        Some(d) => {
            let vg = d.solve(searchline_voltage)?;
            Ok(d.upper.current(searchline_voltage - vg).0)
        }
        None => Ok(0.0),
    }
}
