//! Array circuit assembly.
//!
//! Each column has one searchline ladder driven from row 0; each row has a
//! matchline ladder whose precharge driver and sense point sit at column 0.
//! Node numbering puts every searchline-side node (searchline, plus the SOT
//! divider midpoint right after its searchline node) before every matchline
//! node. Nothing on the matchline side injects current into the searchline
//! side, so the nodal Jacobian is block lower-triangular: the searchline block
//! is banded (bandwidth 1, or 2 with divider nodes) and the matchline block is
//! tridiagonal.

use serde::{Deserialize, Serialize};

use crate::cell::{CellParams, CellState, CellTechnology, TechnologyKind};
use crate::device::CellVariation;
use crate::error::{Error, Issues, Result};
use crate::linalg::{BandMatrix, DenseMatrix, Stamp};

pub const DC_MAX_ITERATIONS: usize = 200;
/// Residual current target of DC solves, amperes.
pub const DC_RESIDUAL_A: f64 = 1e-12;
/// Keeper conductance that holds a released, non-discharging matchline at
/// its precharge level in DC.
pub const DC_KEEPER_S: f64 = 1e-15;
const NEWTON_MAX_STEP_V: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Standard,
    ProlongedPre,
}

impl Scheme {
    pub fn suffix(self) -> &'static str {
        match self {
            Scheme::Standard => "",
            Scheme::ProlongedPre => " PRE",
        }
    }
}

/// Array geometry, parasitics, drive levels and precharge scheme.
///
/// Parasitic defaults are order-of-magnitude values for a 7 nm-class cell
/// pitch, not extracted numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "defaults::vdd")]
    pub vdd_v: f64,
    #[serde(default = "defaults::vs")]
    pub vs_v: f64,
    #[serde(default = "defaults::wire_r")]
    pub wire_r_per_cell_ohm: f64,
    #[serde(default = "defaults::wire_c")]
    pub wire_c_per_cell_f: f64,
    #[serde(default = "defaults::ml_c")]
    pub matchline_c_per_cell_f: f64,
    /// Defaults to `vdd_v / 2`.
    #[serde(default)]
    pub sense_threshold_v: Option<f64>,
    #[serde(default = "defaults::scheme")]
    pub scheme: Scheme,
    /// Fixed hold time for the prolonged precharge; `None` holds until the
    /// array reaches steady state.
    #[serde(default)]
    pub precharge_hold_s: Option<f64>,
    #[serde(default = "defaults::driver_r")]
    pub driver_r_ohm: f64,
}

mod defaults {
    use super::Scheme;
    pub fn vdd() -> f64 {
        0.7
    }
    pub fn vs() -> f64 {
        0.7
    }
    pub fn wire_r() -> f64 {
        20.0
    }
    pub fn wire_c() -> f64 {
        0.05e-15
    }
    pub fn ml_c() -> f64 {
        0.1e-15
    }
    pub fn scheme() -> Scheme {
        Scheme::Standard
    }
    pub fn driver_r() -> f64 {
        1e3
    }
}

impl ArrayConfig {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            vdd_v: defaults::vdd(),
            vs_v: defaults::vs(),
            wire_r_per_cell_ohm: defaults::wire_r(),
            wire_c_per_cell_f: defaults::wire_c(),
            matchline_c_per_cell_f: defaults::ml_c(),
            sense_threshold_v: None,
            scheme: Scheme::Standard,
            precharge_hold_s: None,
            driver_r_ohm: defaults::driver_r(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn sense_threshold(&self) -> f64 {
        self.sense_threshold_v.unwrap_or(self.vdd_v / 2.0)
    }

    /// Copy with every optional field resolved, for manifests.
    pub fn resolved(&self) -> Self {
        Self {
            sense_threshold_v: Some(self.sense_threshold()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        issues.require(self.rows >= 1, "array.rows", "must be >= 1");
        issues.require(self.cols >= 1, "array.cols", "must be >= 1");
        for (field, v) in [
            ("array.vdd_v", self.vdd_v),
            ("array.vs_v", self.vs_v),
            ("array.wire_r_per_cell_ohm", self.wire_r_per_cell_ohm),
            ("array.wire_c_per_cell_f", self.wire_c_per_cell_f),
            ("array.matchline_c_per_cell_f", self.matchline_c_per_cell_f),
            ("array.driver_r_ohm", self.driver_r_ohm),
        ] {
            issues.require(v > 0.0, field, "must be > 0");
        }
        let th = self.sense_threshold();
        issues.require(
            th > 0.0 && th < self.vdd_v,
            "array.sense_threshold_v",
            format!("must lie in (0, vdd) = (0, {})", self.vdd_v),
        );
        if let Some(h) = self.precharge_hold_s {
            issues.require(h > 0.0, "array.precharge_hold_s", "must be > 0");
        }
        issues.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Searchline { col: usize, row: usize },
    /// SOT divider midpoint driving the discharge transistor.
    Gate { col: usize, row: usize },
    Matchline { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriverKind {
    Searchline { col: usize },
    Precharge { row: usize },
}

/// Ideal source behind an output resistance, attached to a ladder's first node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    pub kind: DriverKind,
    pub node: NodeId,
    pub resistance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MtjSide {
    /// Between the driven searchline and the divider midpoint.
    Upper,
    /// Between the divider midpoint and the grounded complementary line.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Branch {
    Wire { a: NodeId, b: NodeId, resistance: f64 },
    Capacitor { node: NodeId, capacitance: f64 },
    Mtj { a: NodeId, b: Option<NodeId>, cell: usize, side: MtjSide },
    /// Transistor + reference resistor from a matchline node to ground,
    /// controlled by the voltage on `gate`.
    Discharge { matchline: NodeId, gate: NodeId, cell: usize },
}

/// Source state during one search phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub searchline_v: f64,
    pub precharge: bool,
}

/// Instantaneous power flows, watts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PowerSample {
    pub searchline_source: f64,
    pub precharge_source: f64,
    pub searchline_dissipation: f64,
    pub matchline_dissipation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    Upper,
    Lower,
    Full,
}

/// Assembled array netlist for one stored pattern and query.
#[derive(Debug, Clone)]
pub struct CircuitNetwork {
    pub config: ArrayConfig,
    pub technology: CellTechnology,
    /// Row-major `rows × cols`.
    pub stored: Vec<bool>,
    pub query: Vec<bool>,
    nodes: Vec<NodeKind>,
    node_cap: Vec<f64>,
    branches: Vec<Branch>,
    /// `branches[..upper_split]` only touch searchline-side KCL rows.
    upper_split: usize,
    drivers: Vec<Driver>,
    cells: Vec<CellParams>,
    n_upper: usize,
    upper_bw: usize,
    upper_linear: bool,
}

/// Build the array network. `variation`, when given, holds one entry per cell
/// (row-major) applied on top of the technology's nominal parameters.
pub fn build_network(
    config: &ArrayConfig,
    tech: &CellTechnology,
    stored: &[Vec<bool>],
    query: &[bool],
    variation: Option<&[CellVariation]>,
) -> Result<CircuitNetwork> {
    config.validate()?;
    tech.validate()?;
    let (rows, cols) = (config.rows, config.cols);
    if stored.len() != rows {
        return Err(Error::validation(
            "stored",
            format!("expected {rows} rows, got {}", stored.len()),
        ));
    }
    if let Some((r, w)) = stored.iter().enumerate().find(|(_, w)| w.len() != cols) {
        return Err(Error::validation(
            format!("stored[{r}]"),
            format!("expected {cols} bits, got {}", w.len()),
        ));
    }
    if query.len() != cols {
        return Err(Error::validation(
            "query",
            format!("expected {cols} bits, got {}", query.len()),
        ));
    }
    if let Some(v) = variation {
        if v.len() != rows * cols {
            return Err(Error::validation(
                "variation",
                format!("expected {} cells, got {}", rows * cols, v.len()),
            ));
        }
    }

    let sot = tech.kind == TechnologyKind::Sot;
    let stride = if sot { 2 } else { 1 };
    let per_col = rows * stride;
    let n_upper = cols * per_col;
    let n = n_upper + rows * cols;
    let sl = |c: usize, r: usize| NodeId(c * per_col + r * stride);
    let gate = |c: usize, r: usize| NodeId(c * per_col + r * stride + 1);
    let ml = |r: usize, c: usize| NodeId(n_upper + r * cols + c);

    let nominal = CellVariation::default();
    let cells: Vec<CellParams> = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let state = CellState::new(stored[r][c], query[c]);
            tech.cell_params(state, variation.map_or(&nominal, |v| &v[i]))
        })
        .collect();

    let mut nodes = vec![NodeKind::Searchline { col: 0, row: 0 }; n];
    let mut node_cap = vec![0.0; n];
    let sl_cap = config.wire_c_per_cell_f + if sot { 0.0 } else { tech.transistor.c_gate_f };
    for c in 0..cols {
        for r in 0..rows {
            nodes[sl(c, r).0] = NodeKind::Searchline { col: c, row: r };
            node_cap[sl(c, r).0] = sl_cap;
            if sot {
                nodes[gate(c, r).0] = NodeKind::Gate { col: c, row: r };
                node_cap[gate(c, r).0] = tech.transistor.c_gate_f;
            }
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            nodes[ml(r, c).0] = NodeKind::Matchline { row: r, col: c };
            node_cap[ml(r, c).0] = config.matchline_c_per_cell_f;
        }
    }

    let mut branches = Vec::new();
    for c in 0..cols {
        for r in 0..rows {
            if r + 1 < rows {
                branches.push(Branch::Wire {
                    a: sl(c, r),
                    b: sl(c, r + 1),
                    resistance: config.wire_r_per_cell_ohm,
                });
            }
            if sot {
                let cell = r * cols + c;
                branches.push(Branch::Mtj {
                    a: sl(c, r),
                    b: Some(gate(c, r)),
                    cell,
                    side: MtjSide::Upper,
                });
                branches.push(Branch::Mtj {
                    a: gate(c, r),
                    b: None,
                    cell,
                    side: MtjSide::Lower,
                });
            }
        }
    }
    let upper_split = branches.len();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                branches.push(Branch::Wire {
                    a: ml(r, c),
                    b: ml(r, c + 1),
                    resistance: config.wire_r_per_cell_ohm,
                });
            }
            let cell = r * cols + c;
            if !cells[cell].gated_off {
                branches.push(Branch::Discharge {
                    matchline: ml(r, c),
                    gate: if sot { gate(c, r) } else { sl(c, r) },
                    cell,
                });
            }
        }
    }
    for (i, &cap) in node_cap.iter().enumerate() {
        if cap > 0.0 {
            branches.push(Branch::Capacitor {
                node: NodeId(i),
                capacitance: cap,
            });
        }
    }

    let mut drivers = Vec::with_capacity(rows + cols);
    for c in 0..cols {
        drivers.push(Driver {
            kind: DriverKind::Searchline { col: c },
            node: sl(c, 0),
            resistance: config.driver_r_ohm,
        });
    }
    for r in 0..rows {
        drivers.push(Driver {
            kind: DriverKind::Precharge { row: r },
            node: ml(r, 0),
            resistance: config.driver_r_ohm,
        });
    }

    Ok(CircuitNetwork {
        config: config.clone(),
        technology: tech.clone(),
        stored: stored.iter().flatten().copied().collect(),
        query: query.to_vec(),
        nodes,
        node_cap,
        branches,
        upper_split,
        drivers,
        cells,
        n_upper,
        upper_bw: stride,
        upper_linear: !sot,
    })
}

impl CircuitNetwork {
    pub fn rows(&self) -> usize {
        self.config.rows
    }

    pub fn cols(&self) -> usize {
        self.config.cols
    }

    /// Number of unknown node voltages.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of ideal-source driver nodes.
    pub fn driver_count(&self) -> usize {
        self.drivers.len()
    }

    pub fn nodes(&self) -> &[NodeKind] {
        &self.nodes
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn drivers(&self) -> &[Driver] {
        &self.drivers
    }

    pub fn cell(&self, row: usize, col: usize) -> &CellParams {
        &self.cells[row * self.cols() + col]
    }

    pub fn node_capacitance(&self) -> &[f64] {
        &self.node_cap
    }

    pub(crate) fn upper_len(&self) -> usize {
        self.n_upper
    }

    fn stride(&self) -> usize {
        self.upper_bw
    }

    pub fn searchline_node(&self, col: usize, row: usize) -> NodeId {
        NodeId(col * self.rows() * self.stride() + row * self.stride())
    }

    pub fn gate_node(&self, col: usize, row: usize) -> Option<NodeId> {
        (self.stride() == 2).then(|| NodeId(self.searchline_node(col, row).0 + 1))
    }

    pub fn matchline_node(&self, row: usize, col: usize) -> NodeId {
        NodeId(self.n_upper + row * self.cols() + col)
    }

    /// The node the row's sense inverter watches.
    pub fn sense_node(&self, row: usize) -> NodeId {
        self.matchline_node(row, 0)
    }

    pub fn hamming_distance(&self, row: usize) -> usize {
        let cols = self.cols();
        self.stored[row * cols..(row + 1) * cols]
            .iter()
            .zip(&self.query)
            .filter(|(s, q)| s != q)
            .count()
    }

    pub fn discharge_branch_count(&self) -> usize {
        self.branches
            .iter()
            .filter(|b| matches!(b, Branch::Discharge { .. }))
            .count()
    }

    /// Series wire resistance from the column's driver to the searchline
    /// node at `row`, found by walking the wire branches.
    pub fn searchline_path_resistance(&self, col: usize, row: usize) -> f64 {
        let target = self.searchline_node(col, row);
        let mut at = self.searchline_node(col, 0);
        let mut total = 0.0;
        let mut prev: Option<NodeId> = None;
        while at != target {
            let next = self.branches[..self.upper_split].iter().find_map(|b| match *b {
                Branch::Wire { a, b, resistance } if a == at && Some(b) != prev => {
                    Some((b, resistance))
                }
                Branch::Wire { a, b, resistance } if b == at && Some(a) != prev => {
                    Some((a, resistance))
                }
                _ => None,
            });
            let Some((node, r)) = next else {
                return f64::INFINITY;
            };
            // Ladders are chains, so following increasing index reaches `target`.
            if node.0 < at.0 {
                return f64::INFINITY;
            }
            prev = Some(at);
            at = node;
            total += r;
        }
        total
    }

    /// Initial state: searchlines and gates discharged, matchlines precharged.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.node_count()];
        x[self.n_upper..].iter_mut().for_each(|v| *v = self.config.vdd_v);
        x
    }

    fn driver_source(&self, d: &Driver, phase: &Phase) -> Option<f64> {
        match d.kind {
            DriverKind::Searchline { .. } => Some(phase.searchline_v),
            DriverKind::Precharge { .. } => phase.precharge.then_some(self.config.vdd_v),
        }
    }

    /// Adds each branch's current leaving its KCL nodes into `f` and its
    /// Jacobian entries into `jac`. `map` translates global node indices into
    /// matrix indices. In the lower block, gate voltages are treated as fixed.
    pub(crate) fn stamp<S: Stamp, M: Fn(usize) -> usize>(
        &self,
        x: &[f64],
        phase: &Phase,
        block: Block,
        f: &mut [f64],
        jac: &mut S,
        map: M,
    ) {
        let branches = match block {
            Block::Upper => &self.branches[..self.upper_split],
            Block::Lower => &self.branches[self.upper_split..],
            Block::Full => &self.branches[..],
        };
        let two_terminal = |a: usize, b: Option<usize>, i: f64, g: f64, f: &mut [f64], jac: &mut S| {
            let ma = map(a);
            f[ma] += i;
            jac.add(ma, ma, g);
            if let Some(b) = b {
                let mb = map(b);
                f[mb] -= i;
                jac.add(mb, mb, g);
                jac.add(ma, mb, -g);
                jac.add(mb, ma, -g);
            }
        };
        for br in branches {
            match *br {
                Branch::Wire { a, b, resistance } => {
                    let g = 1.0 / resistance;
                    two_terminal(a.0, Some(b.0), g * (x[a.0] - x[b.0]), g, f, jac);
                }
                Branch::Capacitor { .. } => {}
                Branch::Mtj { a, b, cell, side } => {
                    let d = self.cells[cell].divider.as_ref().expect("MTJ branch on non-SOT cell");
                    let m = match side {
                        MtjSide::Upper => &d.upper,
                        MtjSide::Lower => &d.lower,
                    };
                    let vb = b.map_or(0.0, |b| x[b.0]);
                    let (i, g) = m.current(x[a.0] - vb);
                    two_terminal(a.0, b.map(|b| b.0), i, g, f, jac);
                }
                Branch::Discharge { matchline, gate, cell } => {
                    let (g, dg) = self.cells[cell].conductance(x[gate.0]);
                    let vml = x[matchline.0];
                    let m = map(matchline.0);
                    f[m] += g * vml;
                    jac.add(m, m, g);
                    if block == Block::Full && dg != 0.0 {
                        jac.add(m, map(gate.0), dg * vml);
                    }
                }
            }
        }
        for d in &self.drivers {
            let upper_side = d.node.0 < self.n_upper;
            let in_block = match block {
                Block::Upper => upper_side,
                Block::Lower => !upper_side,
                Block::Full => true,
            };
            if !in_block {
                continue;
            }
            if let Some(vsrc) = self.driver_source(d, phase) {
                let g = 1.0 / d.resistance;
                let m = map(d.node.0);
                f[m] += g * (x[d.node.0] - vsrc);
                jac.add(m, m, g);
            }
        }
    }

    /// Net current leaving every node through resistive branches and drivers.
    pub fn kcl_residual(&self, x: &[f64], phase: &Phase) -> Vec<f64> {
        let mut f = vec![0.0; self.node_count()];
        self.stamp(x, phase, Block::Full, &mut f, &mut NoJacobian, |i| i);
        f
    }

    pub fn power(&self, x: &[f64], phase: &Phase) -> PowerSample {
        let mut p = PowerSample::default();
        for br in &self.branches {
            match *br {
                Branch::Wire { a, b, resistance } => {
                    let v = x[a.0] - x[b.0];
                    let w = v * v / resistance;
                    if a.0 < self.n_upper {
                        p.searchline_dissipation += w;
                    } else {
                        p.matchline_dissipation += w;
                    }
                }
                Branch::Capacitor { .. } => {}
                Branch::Mtj { a, b, cell, side } => {
                    let d = self.cells[cell].divider.as_ref().expect("MTJ branch on non-SOT cell");
                    let m = match side {
                        MtjSide::Upper => &d.upper,
                        MtjSide::Lower => &d.lower,
                    };
                    let v = x[a.0] - b.map_or(0.0, |b| x[b.0]);
                    p.searchline_dissipation += v * m.current(v).0;
                }
                Branch::Discharge { matchline, gate, cell } => {
                    let (g, _) = self.cells[cell].conductance(x[gate.0]);
                    let v = x[matchline.0];
                    p.matchline_dissipation += g * v * v;
                }
            }
        }
        for d in &self.drivers {
            if let Some(vsrc) = self.driver_source(d, phase) {
                let i = (vsrc - x[d.node.0]) / d.resistance;
                let w = i * i * d.resistance;
                match d.kind {
                    DriverKind::Searchline { .. } => {
                        p.searchline_source += vsrc * i;
                        p.searchline_dissipation += w;
                    }
                    DriverKind::Precharge { .. } => {
                        p.precharge_source += vsrc * i;
                        p.matchline_dissipation += w;
                    }
                }
            }
        }
        p
    }

    pub fn stored_energy(&self, x: &[f64]) -> f64 {
        self.node_cap
            .iter()
            .zip(x)
            .map(|(c, v)| 0.5 * c * v * v)
            .sum()
    }

    /// Total conductance from each node to ground or to an active source.
    pub fn ground_conductance(&self, x: &[f64], phase: &Phase) -> Vec<f64> {
        let mut g = vec![0.0; self.node_count()];
        for br in &self.branches {
            match *br {
                Branch::Mtj { a, b: None, cell, side } => {
                    let d = self.cells[cell].divider.as_ref().expect("MTJ branch on non-SOT cell");
                    let m = match side {
                        MtjSide::Upper => &d.upper,
                        MtjSide::Lower => &d.lower,
                    };
                    g[a.0] += m.current(x[a.0]).1;
                }
                Branch::Discharge { matchline, gate, cell } => {
                    g[matchline.0] += self.cells[cell].conductance(x[gate.0]).0;
                }
                _ => {}
            }
        }
        for d in &self.drivers {
            if self.driver_source(d, phase).is_some() {
                g[d.node.0] += 1.0 / d.resistance;
            }
        }
        g
    }

    /// Newton on the searchline block alone; `extra` adds the integrator's
    /// capacitor companion terms (`coeff[i]·x[i] − hist[i]`).
    pub(crate) fn solve_upper(
        &self,
        x: &mut [f64],
        phase: &Phase,
        companion: Option<(&[f64], &[f64])>,
        max_iter: usize,
        abstol_v: f64,
    ) -> Result<usize> {
        let n = self.n_upper;
        let mut jac = BandMatrix::new(n, self.upper_bw);
        let mut f = vec![0.0; n];
        for iter in 0..max_iter {
            jac.clear();
            f.iter_mut().for_each(|v| *v = 0.0);
            self.stamp(x, phase, Block::Upper, &mut f, &mut jac, |i| i);
            if let Some((coeff, hist)) = companion {
                for i in 0..n {
                    f[i] += coeff[i] * x[i] - hist[i];
                    jac.add(i, i, coeff[i]);
                }
            }
            f.iter_mut().for_each(|v| *v = -*v);
            jac.factor_solve(&mut f)?;
            let mut max_dx = 0.0_f64;
            for i in 0..n {
                let dx = f[i].clamp(-NEWTON_MAX_STEP_V, NEWTON_MAX_STEP_V);
                x[i] += dx;
                max_dx = max_dx.max(dx.abs());
            }
            if self.upper_linear || max_dx < abstol_v {
                return Ok(iter + 1);
            }
        }
        Err(Error::NonConvergence {
            solver: "searchline Newton",
            iterations: max_iter,
            residual: f64::NAN,
        })
    }

    /// Linear solve of the matchline block with the searchline side fixed.
    pub(crate) fn solve_lower(
        &self,
        x: &mut [f64],
        phase: &Phase,
        companion: Option<(&[f64], &[f64])>,
        keeper: Option<(f64, f64)>,
    ) -> Result<()> {
        let off = self.n_upper;
        let n = self.node_count() - off;
        let mut jac = BandMatrix::new(n, 1);
        let mut f = vec![0.0; n];
        self.stamp(x, phase, Block::Lower, &mut f, &mut jac, |i| i - off);
        if let Some((coeff, hist)) = companion {
            for i in 0..n {
                f[i] += coeff[off + i] * x[off + i] - hist[off + i];
                jac.add(i, i, coeff[off + i]);
            }
        }
        if let Some((g, v)) = keeper {
            for i in 0..n {
                f[i] += g * (x[off + i] - v);
                jac.add(i, i, g);
            }
        }
        f.iter_mut().for_each(|v| *v = -*v);
        jac.factor_solve(&mut f)?;
        for i in 0..n {
            x[off + i] += f[i];
        }
        Ok(())
    }

    fn dc_phase(&self, matchlines_held: bool) -> Phase {
        Phase {
            searchline_v: self.config.vs_v,
            precharge: matchlines_held,
        }
    }

    fn dc_initial_guess(&self) -> Result<Vec<f64>> {
        let mut x = self.initial_state();
        let vs = self.config.vs_v;
        for c in 0..self.cols() {
            for r in 0..self.rows() {
                x[self.searchline_node(c, r).0] = vs;
                if let Some(g) = self.gate_node(c, r) {
                    let d = self.cell(r, c).divider.expect("SOT cell without divider");
                    x[g.0] = d.solve(vs)?;
                }
            }
        }
        Ok(x)
    }
}

struct NoJacobian;

impl Stamp for NoJacobian {
    #[inline]
    fn add(&mut self, _: usize, _: usize, _: f64) {}
}

/// DC operating point with searchlines driven and matchlines either held at
/// Vdd through their precharge drivers or released. A released matchline with
/// no conducting cell stays at its precharge level.
pub fn dc_steady_state(network: &CircuitNetwork, matchlines_held: bool) -> Result<Vec<f64>> {
    let phase = network.dc_phase(matchlines_held);
    let mut x = network.dc_initial_guess()?;
    network.solve_upper(&mut x, &phase, None, DC_MAX_ITERATIONS, 1e-12)?;
    let keeper = (!matchlines_held).then_some((DC_KEEPER_S, network.config.vdd_v));
    network.solve_lower(&mut x, &phase, None, keeper)?;
    check_dc_residual(network, &x, &phase, keeper)?;
    Ok(x)
}

fn check_dc_residual(
    network: &CircuitNetwork,
    x: &[f64],
    phase: &Phase,
    keeper: Option<(f64, f64)>,
) -> Result<()> {
    let mut f = network.kcl_residual(x, phase);
    if let Some((g, v)) = keeper {
        for i in network.n_upper..f.len() {
            f[i] += g * (x[i] - v);
        }
    }
    let worst = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if worst > DC_RESIDUAL_A {
        return Err(Error::NonConvergence {
            solver: "DC operating point",
            iterations: DC_MAX_ITERATIONS,
            residual: worst,
        });
    }
    Ok(())
}

/// Reference DC solve: damped Newton on the whole network with a dense
/// Jacobian, assembled with node indices permuted by `perm`
/// (`perm[global] = matrix index`). Independent of the block structure the
/// fast path relies on.
pub fn dc_steady_state_dense(
    network: &CircuitNetwork,
    matchlines_held: bool,
    perm: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let n = network.node_count();
    let identity: Vec<usize> = (0..n).collect();
    let perm = perm.unwrap_or(&identity);
    let phase = network.dc_phase(matchlines_held);
    let keeper = (!matchlines_held).then_some((DC_KEEPER_S, network.config.vdd_v));
    let mut x = network.dc_initial_guess()?;
    for _ in 0..DC_MAX_ITERATIONS {
        let mut jac = DenseMatrix::zeros(n);
        let mut f = vec![0.0; n];
        network.stamp(&x, &phase, Block::Full, &mut f, &mut jac, |i| perm[i]);
        if let Some((g, v)) = keeper {
            for i in network.n_upper..n {
                f[perm[i]] += g * (x[i] - v);
                jac.add(perm[i], perm[i], g);
            }
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = jac.solve(&rhs)?;
        let mut max_dx = 0.0_f64;
        for i in 0..n {
            let d = dx[perm[i]].clamp(-NEWTON_MAX_STEP_V, NEWTON_MAX_STEP_V);
            x[i] += d;
            max_dx = max_dx.max(d.abs());
        }
        if max_dx < 1e-12 {
            check_dc_residual(network, &x, &phase, keeper)?;
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        solver: "dense DC Newton",
        iterations: DC_MAX_ITERATIONS,
        residual: f64::NAN,
    })
}
