//! Delay populations, minimum detectable distance, Monte Carlo studies and
//! design comparisons.

use std::io::Write;
use std::ops::RangeInclusive;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::CellTechnology;
use crate::device::{CellVariation, DeviceSigmas};
use crate::error::{Error, Result};
use crate::network::{build_network, ArrayConfig};
use crate::seed::{rng_for, stream};
use crate::transient::{simulate_search, RowDelay, SimulationSettings, TransientResult};

/// Where the mismatching columns of a test word sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// A seeded random subset per (hdist, row).
    #[default]
    Random,
    /// Columns `0..hdist`, nearest the sense point.
    Contiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySample {
    pub trial: usize,
    pub row: usize,
    pub delay: RowDelay,
}

/// Delays observed at one Hamming distance, with a moment-based Gaussian fit
/// over the rows that crossed the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayPopulation {
    pub hdist: usize,
    pub samples: Vec<DelaySample>,
    pub fitted_mean_s: f64,
    pub fitted_sigma_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// Number of samples that crossed; zero marks a non-statistical population.
    pub crossed: usize,
}

impl DelayPopulation {
    pub fn new(hdist: usize, samples: Vec<DelaySample>) -> Self {
        let d: Vec<f64> = samples.iter().filter_map(|s| s.delay.seconds()).collect();
        let n = d.len();
        let (mean, sigma, min, max) = if n == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = d.iter().sum::<f64>() / n as f64;
            let sigma = if n > 1 {
                (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (mean, sigma, min, max)
        };
        Self {
            hdist,
            samples,
            fitted_mean_s: mean,
            fitted_sigma_s: sigma,
            min_s: min,
            max_s: max,
            crossed: n,
        }
    }

    /// Synthetic population from bare delays (trial 0, one row per value).
    pub fn from_delays(hdist: usize, delays: &[f64]) -> Self {
        let samples = delays
            .iter()
            .enumerate()
            .map(|(row, &t)| DelaySample {
                trial: 0,
                row,
                delay: RowDelay::Crossed(t),
            })
            .collect();
        Self::new(hdist, samples)
    }

    pub fn is_statistical(&self) -> bool {
        self.crossed > 0
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().filter_map(|s| s.delay.seconds())
    }

    /// σ / mean.
    pub fn relative_sigma(&self) -> f64 {
        self.fitted_sigma_s / self.fitted_mean_s
    }

    /// (max − min) / mean.
    pub fn relative_range(&self) -> f64 {
        (self.max_s - self.min_s) / self.fitted_mean_s
    }

    pub fn corners(&self, mode: CornerMode) -> (f64, f64) {
        match mode {
            CornerMode::MinMax => (self.min_s, self.max_s),
            CornerMode::ThreeSigma => (
                self.fitted_mean_s - 3.0 * self.fitted_sigma_s,
                self.fitted_mean_s + 3.0 * self.fitted_sigma_s,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CornerMode {
    MinMax,
    ThreeSigma,
}

impl CornerMode {
    pub fn label(self) -> &'static str {
        match self {
            CornerMode::MinMax => "MIN_MAX",
            CornerMode::ThreeSigma => "THREE_SIGMA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mdd {
    Resolved(usize),
    Unresolvable,
}

impl Mdd {
    pub fn value(self) -> Option<usize> {
        match self {
            Mdd::Resolved(v) => Some(v),
            Mdd::Unresolvable => None,
        }
    }

    pub fn csv_value(self) -> String {
        match self {
            Mdd::Resolved(v) => v.to_string(),
            Mdd::Unresolvable => "UNRESOLVABLE".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MddReport {
    pub corner_mode: CornerMode,
    pub entries: Vec<(usize, Mdd)>,
}

impl MddReport {
    pub fn get(&self, hdist: usize) -> Option<Mdd> {
        self.entries.iter().find(|(h, _)| *h == hdist).map(|(_, m)| *m)
    }

    /// Largest MDD over the entries whose HDist lies in `range`; unresolvable
    /// if any of them is.
    pub fn worst_case(&self, range: RangeInclusive<usize>) -> Mdd {
        self.entries
            .iter()
            .filter(|(h, _)| range.contains(h))
            .map(|(_, m)| *m)
            .max()
            .unwrap_or(Mdd::Unresolvable)
    }
}

/// MDD(h) is the smallest Δ ≥ 1 for which the slow corner at h + Δ is
/// strictly faster than the fast corner at h. Populations must cover a
/// contiguous HDist range; non-statistical populations (h = 0, all
/// NO_DISCHARGE) get no entry and never separate.
pub fn compute_mdd(populations: &[DelayPopulation], mode: CornerMode) -> Result<MddReport> {
    for w in populations.windows(2) {
        if w[1].hdist != w[0].hdist + 1 {
            return Err(Error::validation(
                "populations",
                format!("HDist range not contiguous: {} followed by {}", w[0].hdist, w[1].hdist),
            ));
        }
    }
    let entries = populations
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_statistical())
        .map(|(i, p)| {
            let (lo, _) = p.corners(mode);
            let mdd = populations[i + 1..]
                .iter()
                .enumerate()
                .find(|(_, q)| q.is_statistical() && q.corners(mode).1 < lo)
                .map_or(Mdd::Unresolvable, |(d, _)| Mdd::Resolved(d + 1));
            (p.hdist, mdd)
        })
        .collect();
    Ok(MddReport {
        corner_mode: mode,
        entries,
    })
}

/// Random query word for a study.
pub fn study_query(seed: u64, cols: usize) -> Vec<bool> {
    let mut rng = rng_for(seed, &[stream::QUERY]);
    (0..cols).map(|_| rng.random::<bool>()).collect()
}

/// Stored words with exactly `hdist` mismatches against `query` in every row.
pub fn words_at_distance(
    query: &[bool],
    rows: usize,
    hdist: usize,
    placement: Placement,
    seed: u64,
) -> Vec<Vec<bool>> {
    let cols = query.len();
    (0..rows)
        .map(|r| {
            let mut flip = vec![false; cols];
            match placement {
                Placement::Contiguous => flip[..hdist].iter_mut().for_each(|f| *f = true),
                Placement::Random => {
                    let mut rng = rng_for(seed, &[stream::PLACEMENT, hdist as u64, r as u64]);
                    for c in sample(&mut rng, cols, hdist) {
                        flip[c] = true;
                    }
                }
            }
            query.iter().zip(&flip).map(|(q, f)| q ^ f).collect()
        })
        .collect()
}

fn check_hdists(config: &ArrayConfig, hdists: &[usize]) -> Result<()> {
    if let Some(h) = hdists.iter().find(|&&h| h > config.cols) {
        return Err(Error::validation(
            "study.hdist_set",
            format!("HDist {h} exceeds the {} columns", config.cols),
        ));
    }
    Ok(())
}

fn run_one(
    config: &ArrayConfig,
    tech: &CellTechnology,
    settings: &SimulationSettings,
    hdist: usize,
    trial: usize,
    placement: Placement,
    seed: u64,
    variation: Option<&[CellVariation]>,
) -> Result<TransientResult> {
    let query = study_query(seed, config.cols);
    let stored = words_at_distance(&query, config.rows, hdist, placement, seed);
    build_network(config, tech, &stored, &query, variation)
        .and_then(|net| simulate_search(&net, settings))
        .map_err(|e| Error::Simulation {
            hdist,
            trial,
            source: Box::new(e),
        })
}

/// Nominal run with every row at `hdist`, the unit every sweep is built from.
pub fn simulate_at_distance(
    config: &ArrayConfig,
    tech: &CellTechnology,
    settings: &SimulationSettings,
    hdist: usize,
    placement: Placement,
    seed: u64,
) -> Result<TransientResult> {
    check_hdists(config, &[hdist])?;
    run_one(config, tech, settings, hdist, 0, placement, seed, None)
}

fn samples_of(result: &TransientResult, trial: usize) -> Vec<DelaySample> {
    result
        .delays
        .iter()
        .enumerate()
        .map(|(row, &delay)| DelaySample { trial, row, delay })
        .collect()
}

/// One nominal simulation per HDist with every row holding a word at that
/// distance, so each row position contributes one sample.
pub fn sweep_hdist(
    config: &ArrayConfig,
    tech: &CellTechnology,
    settings: &SimulationSettings,
    hdists: &[usize],
    placement: Placement,
    seed: u64,
) -> Result<Vec<DelayPopulation>> {
    check_hdists(config, hdists)?;
    hdists
        .par_iter()
        .map(|&h| {
            let res = run_one(config, tech, settings, h, 0, placement, seed, None)?;
            Ok(DelayPopulation::new(h, samples_of(&res, 0)))
        })
        .collect()
}

/// Repeats the sweep placement `n_trials` times with fresh per-cell device
/// variation. Variation is keyed by (seed, trial, row, col), so trial `k`
/// sees the same devices at every HDist.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_study(
    config: &ArrayConfig,
    tech: &CellTechnology,
    settings: &SimulationSettings,
    hdists: &[usize],
    n_trials: usize,
    sigmas: &DeviceSigmas,
    placement: Placement,
    seed: u64,
) -> Result<Vec<DelayPopulation>> {
    if n_trials < 2 {
        return Err(Error::validation("study.n_trials", "must be >= 2"));
    }
    sigmas.validate()?;
    check_hdists(config, hdists)?;
    let jobs: Vec<(usize, usize)> = hdists
        .iter()
        .flat_map(|&h| (0..n_trials).map(move |t| (h, t)))
        .collect();
    let runs: Vec<Vec<DelaySample>> = jobs
        .par_iter()
        .map(|&(h, trial)| {
            let variation = sigmas.draw_array(seed, trial, config.rows, config.cols);
            let res = run_one(config, tech, settings, h, trial, placement, seed, Some(&variation))?;
            Ok(samples_of(&res, trial))
        })
        .collect::<Result<_>>()?;
    let populations = hdists
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let samples = runs[i * n_trials..(i + 1) * n_trials].concat();
            let pop = DelayPopulation::new(h, samples);
            if !pop.is_statistical() && h > 0 {
                log::warn!("HDist {h}: no sample crossed the threshold; excluded from fitting");
            }
            pop
        })
        .collect();
    Ok(populations)
}

/// A named array + technology pair for comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub name: String,
    pub array: ArrayConfig,
    pub technology: CellTechnology,
}

impl Design {
    /// Name such as `SOT-R PRE`.
    pub fn new(array: ArrayConfig, technology: CellTechnology) -> Self {
        let name = format!("{}{}", technology.label(), array.scheme.suffix());
        Self {
            name,
            array,
            technology,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub design: String,
    /// Slowest row, measured from matchline release.
    pub delay_s: f64,
    /// Total energy of the operation, including any precharge hold.
    pub energy_j: f64,
    pub delay_ratio: f64,
    pub energy_ratio: f64,
}

/// Runs every design with all rows at `reference_hdist` and reports delay
/// and energy relative to the first design.
pub fn compare_designs(
    designs: &[Design],
    settings: &SimulationSettings,
    reference_hdist: usize,
    placement: Placement,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    let Some(first) = designs.first() else {
        return Err(Error::validation("designs", "at least one design is required"));
    };
    for d in designs {
        if (d.array.rows, d.array.cols) != (first.array.rows, first.array.cols) {
            return Err(Error::validation(
                format!("designs.{}", d.name),
                "all designs must share array dimensions",
            ));
        }
    }
    check_hdists(&first.array, &[reference_hdist])?;
    if reference_hdist == 0 {
        return Err(Error::validation("study.reference_hdist", "must be >= 1"));
    }
    let measured: Vec<(f64, f64)> = designs
        .par_iter()
        .map(|d| {
            let res = run_one(&d.array, &d.technology, settings, reference_hdist, 0, placement, seed, None)?;
            if !res.timed_out_rows().is_empty() {
                log::warn!("{}: {} rows timed out", d.name, res.timed_out_rows().len());
            }
            Ok((res.worst_delay().unwrap_or(f64::NAN), res.energy.total_j))
        })
        .collect::<Result<_>>()?;
    let (d0, e0) = measured[0];
    Ok(designs
        .iter()
        .zip(&measured)
        .map(|(d, &(delay, energy))| ComparisonRow {
            design: d.name.clone(),
            delay_s: delay,
            energy_j: energy,
            delay_ratio: delay / d0,
            energy_ratio: energy / e0,
        })
        .collect())
}

/// MDD curve for each reference resistance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrefPoint {
    pub rref_ohm: f64,
    pub populations: Vec<DelayPopulation>,
    pub report: MddReport,
}

pub fn sweep_rref(
    config: &ArrayConfig,
    tech: &CellTechnology,
    settings: &SimulationSettings,
    rrefs: &[f64],
    hdists: &[usize],
    placement: Placement,
    seed: u64,
) -> Result<Vec<RrefPoint>> {
    rrefs
        .iter()
        .map(|&r| {
            let t = tech.clone().with_rref(r);
            let populations = sweep_hdist(config, &t, settings, hdists, placement, seed)?;
            let report = compute_mdd(&populations, CornerMode::MinMax)?;
            Ok(RrefPoint {
                rref_ohm: r,
                populations,
                report,
            })
        })
        .collect()
}

pub fn write_populations_csv(writer: impl Write, populations: &[DelayPopulation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hdist", "trial", "row_position", "delay_s"])?;
    for p in populations {
        for s in &p.samples {
            w.write_record([
                p.hdist.to_string(),
                s.trial.to_string(),
                s.row.to_string(),
                s.delay.csv_value(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("delay_populations.csv", e))?;
    Ok(())
}

pub fn write_mdd_csv(writer: impl Write, report: &MddReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hdist", "mdd", "corner_mode"])?;
    for (h, m) in &report.entries {
        w.write_record([h.to_string(), m.csv_value(), report.corner_mode.label().to_string()])?;
    }
    w.flush().map_err(|e| Error::io("mdd_report.csv", e))?;
    Ok(())
}

pub fn write_comparison_csv(writer: impl Write, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["design", "delay_s", "energy_j", "delay_ratio", "energy_ratio"])?;
    for r in rows {
        w.write_record([
            r.design.clone(),
            format!("{:e}", r.delay_s),
            format!("{:e}", r.energy_j),
            format!("{}", r.delay_ratio),
            format!("{}", r.energy_ratio),
        ])?;
    }
    w.flush().map_err(|e| Error::io("comparison.csv", e))?;
    Ok(())
}

/// `rref_ohm,hdist,mdd,corner_mode` for every point of an Rref sweep.
pub fn write_rref_sweep_csv(writer: impl Write, points: &[RrefPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rref_ohm", "hdist", "mdd", "corner_mode"])?;
    for p in points {
        for (h, m) in &p.report.entries {
            w.write_record([
                format!("{:e}", p.rref_ohm),
                h.to_string(),
                m.csv_value(),
                p.report.corner_mode.label().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("rref_sweep.csv", e))?;
    Ok(())
}
