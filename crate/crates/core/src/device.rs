//! Device models: the thin-film reference resistor, MTJs and FeFET threshold
//! states, plus Gaussian device-variation sampling.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Issues, Result};
use crate::seed;

/// Width of the TLM test structures contact resistance is quoted at, µm.
pub const TLM_REFERENCE_WIDTH_UM: f64 = 10.0;

/// Sheet resistance of the Nb-doped WS2 film, Ω/square.
pub const WS2_SHEET_RESISTANCE: f64 = 3.3e6;

/// Default 3-sigma spread of the reference resistance.
pub const RREF_SIGMA3_FRACTION: f64 = 0.27;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlmPoint {
    pub spacing_um: f64,
    pub resistance_ohm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_v: Option<f64>,
}

/// Total resistance versus contact spacing for one TLM structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlmDataset {
    pub width_um: f64,
    pub points: Vec<TlmPoint>,
}

impl TlmDataset {
    pub fn new(width_um: f64, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self {
            width_um,
            points: points
                .into_iter()
                .map(|(spacing_um, resistance_ohm)| TlmPoint {
                    spacing_um,
                    resistance_ohm,
                    voltage_v: None,
                })
                .collect(),
        }
    }

    /// Synthetic dataset on the line `R = 2·Rc + Rsh·L/W`.
    pub fn synthetic(width_um: f64, sheet: f64, contact: f64, spacings_um: &[f64]) -> Self {
        Self::new(
            width_um,
            spacings_um
                .iter()
                .map(|&l| (l, 2.0 * contact + sheet * l / width_um)),
        )
    }

    /// Reads `spacing_um,resistance_ohm[,voltage_v]` rows.
    pub fn from_csv_reader(reader: impl Read, width_um: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let points = rdr
            .deserialize::<TlmPoint>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let data = Self { width_um, points };
        data.validate()?;
        Ok(data)
    }

    pub fn from_csv_path(path: &Path, width_um: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, width_um)
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["spacing_um", "resistance_ohm"])?;
        for p in &self.points {
            wtr.write_record([p.spacing_um.to_string(), p.resistance_ohm.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_um > 0.0) {
            return Err(Error::validation("width_um", "must be > 0"));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p.spacing_um > 0.0) {
                return Err(Error::validation(
                    format!("points[{i}].spacing_um"),
                    "must be > 0",
                ));
            }
            if !(p.resistance_ohm > 0.0) {
                return Err(Error::validation(
                    format!("points[{i}].resistance_ohm"),
                    "must be > 0",
                ));
            }
        }
        Ok(())
    }
}

/// Sheet and contact resistance extracted from a TLM dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmExtraction {
    /// Ω/square.
    pub sheet_resistance: f64,
    /// Single-contact resistance at `reference_width_um`, Ω.
    pub contact_resistance: f64,
    /// RMS residual of the reported line, Ω.
    pub fit_residual: f64,
    /// Largest absolute residual of the reported line, Ω.
    pub max_residual: f64,
    /// Set when the least-squares intercept was negative and clamped to zero.
    pub contact_clamped: bool,
    /// Relative 3-sigma spread of fabricated resistors.
    pub sigma_fraction: f64,
    pub reference_width_um: f64,
}

impl FilmExtraction {
    /// An ideal film with no contact resistance.
    pub fn ideal(sheet_resistance: f64) -> Self {
        Self {
            sheet_resistance,
            contact_resistance: 0.0,
            fit_residual: 0.0,
            max_residual: 0.0,
            contact_clamped: false,
            sigma_fraction: RREF_SIGMA3_FRACTION,
            reference_width_um: TLM_REFERENCE_WIDTH_UM,
        }
    }
}

/// Least-squares fit of `R_total(L) = 2·Rc + (Rsh/W)·L`.
pub fn tlm_fit(data: &TlmDataset) -> Result<FilmExtraction> {
    data.validate()?;
    let n = data.points.len();
    let first = data.points.first().map(|p| p.spacing_um);
    let distinct = data
        .points
        .iter()
        .any(|p| Some(p.spacing_um) != first);
    if n < 2 || !distinct {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 distinct contact spacings, got {n} point(s)"
        )));
    }

    let nf = n as f64;
    let mean_l = data.points.iter().map(|p| p.spacing_um).sum::<f64>() / nf;
    let mean_r = data.points.iter().map(|p| p.resistance_ohm).sum::<f64>() / nf;
    let (sxy, sxx) = data.points.iter().fold((0.0, 0.0), |(sxy, sxx), p| {
        let dl = p.spacing_um - mean_l;
        (sxy + dl * (p.resistance_ohm - mean_r), sxx + dl * dl)
    });
    let slope = sxy / sxx;
    let intercept = mean_r - slope * mean_l;
    if !(slope > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "non-positive slope {slope:.4e} Ω/µm"
        )));
    }

    let contact_clamped = intercept < 0.0;
    let contact = if contact_clamped { 0.0 } else { intercept / 2.0 };
    let model = |l: f64| 2.0 * contact + slope * l;
    let (sq, max) = data.points.iter().fold((0.0, 0.0_f64), |(sq, max), p| {
        let r = p.resistance_ohm - model(p.spacing_um);
        (sq + r * r, max.max(r.abs()))
    });

    Ok(FilmExtraction {
        sheet_resistance: slope * data.width_um,
        contact_resistance: contact,
        fit_residual: (sq / nf).sqrt(),
        max_residual: max,
        contact_clamped,
        sigma_fraction: RREF_SIGMA3_FRACTION,
        reference_width_um: data.width_um,
    })
}

/// Resistance of a film resistor of the given footprint.
///
/// Contact resistance is scaled inversely with width from the test-structure
/// width the extraction was made at.
pub fn resistance_from_geometry(
    film: &FilmExtraction,
    length_um: f64,
    width_um: f64,
    contacts: u32,
) -> Result<f64> {
    if !(length_um > 0.0) {
        return Err(Error::validation("length_um", "must be > 0"));
    }
    if !(width_um > 0.0) {
        return Err(Error::validation("width_um", "must be > 0"));
    }
    let body = film.sheet_resistance * length_um / width_um;
    let contact = film.contact_resistance * film.reference_width_um / width_um;
    Ok(body + f64::from(contacts) * contact)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MtjState {
    Parallel,
    Antiparallel,
}

/// Magnetic tunnel junction with Lorentzian TMR bias roll-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtjModel {
    pub diameter_nm: f64,
    pub ra_ohm_um2: f64,
    /// TMR at zero bias as a fraction (1.0 = 100 %).
    pub tmr_zero_bias: f64,
    /// Bias at which the TMR has dropped to half its zero-bias value.
    pub half_bias_voltage_v: f64,
}

impl Default for MtjModel {
    fn default() -> Self {
        Self {
            diameter_nm: 45.0,
            ra_ohm_um2: 3000.0,
            tmr_zero_bias: 1.5,
            half_bias_voltage_v: 0.5,
        }
    }
}

impl MtjModel {
    pub fn area_um2(&self) -> f64 {
        let r = self.diameter_nm * 1e-3 / 2.0;
        PI * r * r
    }

    pub fn r_parallel(&self) -> f64 {
        self.ra_ohm_um2 / self.area_um2()
    }

    pub fn tmr(&self, bias: f64) -> f64 {
        let x = bias / self.half_bias_voltage_v;
        self.tmr_zero_bias / (1.0 + x * x)
    }

    /// Unchecked resistance evaluation.
    pub fn resistance(&self, state: MtjState, bias: f64) -> f64 {
        match state {
            MtjState::Parallel => self.r_parallel(),
            MtjState::Antiparallel => self.r_parallel() * (1.0 + self.tmr(bias)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        for (field, v) in [
            ("mtj.diameter_nm", self.diameter_nm),
            ("mtj.ra_ohm_um2", self.ra_ohm_um2),
            ("mtj.tmr_zero_bias", self.tmr_zero_bias),
            ("mtj.half_bias_voltage_v", self.half_bias_voltage_v),
        ] {
            issues.require(v > 0.0, field, "must be > 0");
        }
        issues.finish()
    }
}

/// Resistance of an MTJ in `state` at `bias` volts.
///
/// Logs a warning beyond twice the half-bias voltage, where the roll-off
/// model is no longer representative.
pub fn mtj_resistance(model: &MtjModel, state: MtjState, bias: f64) -> f64 {
    if bias.abs() > 2.0 * model.half_bias_voltage_v {
        log::warn!(
            "MTJ bias {bias:.3} V exceeds model validity (2·V_half = {:.3} V)",
            2.0 * model.half_bias_voltage_v
        );
    }
    model.resistance(state, bias)
}

/// Current through an MTJ and its derivative with respect to bias.
pub(crate) fn mtj_current(r_parallel: f64, tmr0: f64, v_half: f64, state: MtjState, v: f64) -> (f64, f64) {
    match state {
        MtjState::Parallel => (v / r_parallel, 1.0 / r_parallel),
        MtjState::Antiparallel => {
            let x = v / v_half;
            let d = 1.0 + x * x;
            let r = r_parallel * (1.0 + tmr0 / d);
            let dr = -r_parallel * tmr0 * 2.0 * v / (v_half * v_half * d * d);
            (v / r, (r - v * dr) / (r * r))
        }
    }
}

/// FeFET threshold states; the memory window separates them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FefetModel {
    pub vth_low_v: f64,
    pub vth_high_v: f64,
}

impl Default for FefetModel {
    fn default() -> Self {
        // 0.46 V window centred on the 0.7 V search level.
        Self {
            vth_low_v: 0.47,
            vth_high_v: 0.93,
        }
    }
}

impl FefetModel {
    pub fn memory_window(&self) -> f64 {
        self.vth_high_v - self.vth_low_v
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.memory_window() > 0.0) {
            return Err(Error::validation(
                "fefet",
                format!(
                    "memory window must be positive (vth_low {} V, vth_high {} V)",
                    self.vth_low_v, self.vth_high_v
                ),
            ));
        }
        Ok(())
    }
}

/// Nominal values of the varied device parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceNominal {
    pub rref: f64,
    pub mtj_r: f64,
    pub vth: f64,
}

/// 3-sigma variability, as quoted for fabricated devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSigmas {
    /// Relative 3-sigma spread of the reference resistor.
    #[serde(default)]
    pub rref_frac: f64,
    /// Relative 3-sigma spread of each MTJ's resistance.
    #[serde(default)]
    pub mtj_frac: f64,
    /// Absolute 3-sigma threshold-voltage spread, volts.
    #[serde(default)]
    pub vth_abs_v: f64,
}

impl DeviceSigmas {
    pub const NONE: Self = Self {
        rref_frac: 0.0,
        mtj_frac: 0.0,
        vth_abs_v: 0.0,
    };

    /// 27 % reference resistance, 15 % MTJ resistance, 42 mV threshold.
    pub const FABRICATED: Self = Self {
        rref_frac: RREF_SIGMA3_FRACTION,
        mtj_frac: 0.15,
        vth_abs_v: 0.042,
    };

    pub fn is_zero(&self) -> bool {
        self.rref_frac == 0.0 && self.mtj_frac == 0.0 && self.vth_abs_v == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        for (field, v) in [
            ("sigmas.rref_frac", self.rref_frac),
            ("sigmas.mtj_frac", self.mtj_frac),
            ("sigmas.vth_abs_v", self.vth_abs_v),
        ] {
            issues.require(v >= 0.0, field, "must be >= 0");
        }
        issues.require(self.rref_frac < 1.0, "sigmas.rref_frac", "must be < 1");
        issues.require(self.mtj_frac < 1.0, "sigmas.mtj_frac", "must be < 1");
        issues.finish()
    }
}

/// Multiplicative and additive perturbations applied to one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellVariation {
    pub rref_scale: f64,
    /// Scale of the MTJ between the driven searchline and the gate node.
    pub mtj_upper_scale: f64,
    /// Scale of the MTJ between the gate node and the grounded searchline.
    pub mtj_lower_scale: f64,
    pub vth_shift: f64,
}

impl Default for CellVariation {
    fn default() -> Self {
        Self {
            rref_scale: 1.0,
            mtj_upper_scale: 1.0,
            mtj_lower_scale: 1.0,
            vth_shift: 0.0,
        }
    }
}

/// Draws `1 + N(0, σ)` until strictly positive.
fn positive_scale<R: Rng + ?Sized>(rng: &mut R, sigma3: f64) -> f64 {
    if sigma3 == 0.0 {
        return 1.0;
    }
    let sigma = sigma3 / 3.0;
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let s = 1.0 + sigma * z;
        if s > 0.0 {
            return s;
        }
    }
}

fn normal_shift<R: Rng + ?Sized>(rng: &mut R, sigma3: f64) -> f64 {
    if sigma3 == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    sigma3 / 3.0 * z
}

impl DeviceSigmas {
    /// One cell's worth of independent draws.
    pub fn draw_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> CellVariation {
        CellVariation {
            rref_scale: positive_scale(rng, self.rref_frac),
            mtj_upper_scale: positive_scale(rng, self.mtj_frac),
            mtj_lower_scale: positive_scale(rng, self.mtj_frac),
            vth_shift: normal_shift(rng, self.vth_abs_v),
        }
    }

    /// Per-cell variation for one Monte Carlo trial, `rows × cols` row-major.
    pub fn draw_array(&self, seed: u64, trial: usize, rows: usize, cols: usize) -> Vec<CellVariation> {
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let mut rng = seed::rng_for(
                    seed,
                    &[seed::stream::DEVICE, trial as u64, r as u64, c as u64],
                );
                out.push(self.draw_cell(&mut rng));
            }
        }
        out
    }
}

/// `n` independent perturbed parameter sets around `nominal`.
pub fn sample_device_variation(
    nominal: DeviceNominal,
    sigmas: DeviceSigmas,
    seed: u64,
    n: usize,
) -> Vec<DeviceNominal> {
    (0..n)
        .map(|i| {
            let mut rng = seed::rng_for(seed, &[seed::stream::DEVICE, i as u64]);
            let v = sigmas.draw_cell(&mut rng);
            DeviceNominal {
                rref: nominal.rref * v.rref_scale,
                mtj_r: nominal.mtj_r * v.mtj_upper_scale,
                vth: nominal.vth + v.vth_shift,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const SPACINGS: [f64; 7] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];

    fn ols_oracle(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        // Normal equations solved by Cramer's rule.
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let det = n * sxx - sx * sx;
        let intercept = (sy * sxx - sx * sxy) / det;
        let slope = (n * sxy - sx * sy) / det;
        (intercept, slope)
    }

    #[test]
    fn tlm_recovers_noise_free_film() {
        let data = TlmDataset::synthetic(10.0, 3.3e6, 10e3, &SPACINGS);
        let fit = tlm_fit(&data).unwrap();
        assert!((fit.sheet_resistance / 3.3e6 - 1.0).abs() < 1e-12);
        assert!((fit.contact_resistance / 10e3 - 1.0).abs() < 1e-9);
        assert!(fit.fit_residual < 1e-6);
        assert!(!fit.contact_clamped);
    }

    #[test]
    fn tlm_two_points_through_origin() {
        let data = TlmDataset::new(1.0, [(0.2, 0.2e6), (0.5, 0.5e6)]);
        let fit = tlm_fit(&data).unwrap();
        assert!((fit.sheet_resistance - 1e6).abs() < 1e-6);
        assert!(fit.contact_resistance.abs() < 1e-6);
    }

    #[test]
    fn tlm_noisy_matches_ols_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut data = TlmDataset::synthetic(10.0, 3.3e6, 20e3, &SPACINGS);
        for p in &mut data.points {
            let z: f64 = StandardNormal.sample(&mut rng);
            p.resistance_ohm *= 1.0 + 0.03 * z;
        }
        let xs: Vec<f64> = data.points.iter().map(|p| p.spacing_um).collect();
        let ys: Vec<f64> = data.points.iter().map(|p| p.resistance_ohm).collect();
        let (a, b) = ols_oracle(&xs, &ys);
        let fit = tlm_fit(&data).unwrap();
        assert!(((fit.sheet_resistance) / (b * 10.0) - 1.0).abs() < 1e-9);
        if a > 0.0 {
            assert!((fit.contact_resistance / (a / 2.0) - 1.0).abs() < 1e-9);
        } else {
            assert!(fit.contact_clamped);
        }
    }

    #[test]
    fn tlm_clamps_negative_intercept() {
        let data = TlmDataset::new(1.0, [(0.1, 0.05e6), (0.2, 0.15e6), (0.3, 0.25e6)]);
        let fit = tlm_fit(&data).unwrap();
        assert!(fit.contact_clamped);
        assert_eq!(fit.contact_resistance, 0.0);
        assert!(fit.fit_residual > 0.0);
    }

    #[test]
    fn tlm_rejects_degenerate_and_invalid_input() {
        let one = TlmDataset::new(10.0, [(0.1, 1e6)]);
        assert!(matches!(tlm_fit(&one), Err(Error::DegenerateFit(_))));
        let same = TlmDataset::new(10.0, [(0.1, 1e6), (0.1, 1.1e6)]);
        assert!(matches!(tlm_fit(&same), Err(Error::DegenerateFit(_))));
        let neg = TlmDataset::new(10.0, [(0.1, -1e6), (0.2, 1e6)]);
        assert!(matches!(tlm_fit(&neg), Err(Error::Validation { .. })));
        let zero_w = TlmDataset::new(0.0, [(0.1, 1e6), (0.2, 2e6)]);
        assert!(matches!(tlm_fit(&zero_w), Err(Error::Validation { .. })));
    }

    #[test]
    fn tlm_csv_round_trip() {
        let data = TlmDataset::synthetic(10.0, 3.3e6, 10e3, &SPACINGS);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("spacing_um,resistance_ohm\n"));
        let back = TlmDataset::from_csv_reader(&buf[..], 10.0).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn geometry_square_and_series() {
        let film = FilmExtraction::ideal(3.3e6);
        let square = resistance_from_geometry(&film, 0.2, 0.2, 2).unwrap();
        assert!((square - 3.3e6).abs() < 1e-6);
        let double = resistance_from_geometry(&film, 0.4, 0.2, 2).unwrap();
        assert!((double - 2.0 * square).abs() < 1e-6);
        assert!(resistance_from_geometry(&film, 0.0, 0.2, 2).is_err());
        assert!(resistance_from_geometry(&film, 0.2, -1.0, 2).is_err());
    }

    #[test]
    fn geometry_contact_scales_inversely_with_width() {
        let mut film = FilmExtraction::ideal(1e6);
        film.contact_resistance = 1e3;
        let narrow = resistance_from_geometry(&film, 1.0, 0.2, 2).unwrap();
        assert!((narrow - (5e6 + 2.0 * 1e3 * 50.0)).abs() < 1e-6);
    }

    #[test]
    fn mtj_parallel_area_and_zero_bias() {
        let m = MtjModel::default();
        let area = PI * 0.0225_f64 * 0.0225;
        assert!((m.area_um2() - area).abs() < 1e-15);
        assert!((m.area_um2() - 1.59e-3).abs() < 1e-5);
        let rp = m.ra_ohm_um2 / area;
        assert!((m.resistance(MtjState::Parallel, 0.3) - rp).abs() < 1e-6);
        let rap0 = m.resistance(MtjState::Antiparallel, 0.0);
        assert!((rap0 - rp * (1.0 + m.tmr_zero_bias)).abs() < 1e-6);
    }

    #[test]
    fn mtj_half_bias_point() {
        let m = MtjModel::default();
        let rp = m.r_parallel();
        let r = mtj_resistance(&m, MtjState::Antiparallel, m.half_bias_voltage_v);
        assert!((r - rp * (1.0 + m.tmr_zero_bias / 2.0)).abs() < 1e-6);
    }

    #[test]
    fn mtj_current_derivative_matches_finite_difference() {
        let m = MtjModel::default();
        for &v in &[-0.6, -0.2, 0.0, 0.1, 0.45, 0.9] {
            let h = 1e-6;
            let f = |v| mtj_current(m.r_parallel(), m.tmr_zero_bias, m.half_bias_voltage_v, MtjState::Antiparallel, v).0;
            let fd = (f(v + h) - f(v - h)) / (2.0 * h);
            let (_, d) = mtj_current(m.r_parallel(), m.tmr_zero_bias, m.half_bias_voltage_v, MtjState::Antiparallel, v);
            assert!((fd - d).abs() < 1e-6 * d.abs(), "v={v}: {fd} vs {d}");
        }
    }

    #[test]
    fn fefet_window() {
        let f = FefetModel::default();
        assert!((f.memory_window() - 0.46).abs() < 1e-12);
        assert!(f.validate().is_ok());
        let bad = FefetModel {
            vth_low_v: 0.5,
            vth_high_v: 0.4,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_sigma_returns_nominal() {
        let nominal = DeviceNominal {
            rref: 4e6,
            mtj_r: 1e6,
            vth: 0.35,
        };
        for s in sample_device_variation(nominal, DeviceSigmas::NONE, 9, 100) {
            assert_eq!(s, nominal);
        }
    }

    fn spread(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn sampled_spreads_match_configured_sigmas() {
        let nominal = DeviceNominal {
            rref: 4e6,
            mtj_r: 1e6,
            vth: 0.35,
        };
        let draws = sample_device_variation(nominal, DeviceSigmas::FABRICATED, 2024, 100_000);
        let rref: Vec<f64> = draws.iter().map(|d| d.rref / nominal.rref).collect();
        let (_, sd) = spread(&rref);
        assert!((sd / 0.09 - 1.0).abs() < 0.02, "rref sd {sd}");
        let vth: Vec<f64> = draws.iter().map(|d| d.vth).collect();
        let (_, sd) = spread(&vth);
        assert!((3.0 * sd / 0.042 - 1.0).abs() < 0.02, "vth 3σ {}", 3.0 * sd);
    }

    #[test]
    fn sampling_is_reproducible() {
        let nominal = DeviceNominal {
            rref: 4e6,
            mtj_r: 1e6,
            vth: 0.35,
        };
        let a = sample_device_variation(nominal, DeviceSigmas::FABRICATED, 5, 64);
        let b = sample_device_variation(nominal, DeviceSigmas::FABRICATED, 5, 64);
        let bits = |v: &[DeviceNominal]| -> Vec<u64> {
            v.iter().flat_map(|d| [d.rref.to_bits(), d.mtj_r.to_bits(), d.vth.to_bits()]).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = sample_device_variation(nominal, DeviceSigmas::FABRICATED, 6, 64);
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn resistances_stay_positive_under_large_sigma() {
        let s = DeviceSigmas {
            rref_frac: 0.99,
            mtj_frac: 3.0,
            vth_abs_v: 0.0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let v = s.draw_cell(&mut rng);
            assert!(v.rref_scale > 0.0 && v.mtj_upper_scale > 0.0 && v.mtj_lower_scale > 0.0);
        }
    }
}
