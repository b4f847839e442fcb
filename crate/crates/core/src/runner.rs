//! Executes an [`ExperimentConfig`] and writes its artifacts.
//!
//! `run_manifest.json` is written first with `complete: false` and rewritten
//! with `complete: true` once every artifact is on disk, so an interrupted run
//! is recognisable. The manifest's `config` object is itself a valid config.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{
    compare_designs, compute_mdd, monte_carlo_study, simulate_at_distance, sweep_hdist,
    write_comparison_csv, write_mdd_csv, write_populations_csv, write_rref_sweep_csv, DelayPopulation,
    Design, Mdd, MddReport, RrefPoint,
};
use crate::config::{ExperimentConfig, StudyKind};
use crate::device::{tlm_fit, FilmExtraction, TlmDataset};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "run_manifest.json";
pub const DEFAULT_OUTPUT_DIR: &str = "camsim-out";

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trace: bool,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable result lines.
    pub lines: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    complete: bool,
    config: &'a ExperimentConfig,
    artifacts: Vec<String>,
}

struct Outputs {
    root: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Outputs {
    fn create(&mut self, rel: impl AsRef<Path>) -> Result<BufWriter<File>> {
        let path = self.root.join(rel.as_ref());
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(rel.as_ref().to_path_buf());
        Ok(BufWriter::new(f))
    }

    fn write_manifest(&self, config: &ExperimentConfig, complete: bool) -> Result<()> {
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            complete,
            config,
            artifacts: self
                .artifacts
                .iter()
                .map(|p| p.to_string_lossy().replace('\\', "/"))
                .collect(),
        };
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Applies overrides and validates; the returned config is what the manifest
/// records.
pub fn prepare(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut c = config.clone();
    if let Some(s) = opts.seed {
        c.study.seed = s;
    }
    if let Some(d) = &opts.output_dir {
        c.output_dir = Some(d.clone());
    }
    if opts.trace {
        c.simulation.trace = true;
    }
    c.validate()?;
    let mut r = c.resolved();
    r.output_dir = Some(c.output_dir.clone().unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into()));
    Ok(r)
}

pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = prepare(config, opts)?;
    let root = cfg.output_dir.clone().expect("set by prepare");
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let mut out = Outputs {
        root: root.clone(),
        artifacts: Vec::new(),
    };
    out.write_manifest(&cfg, false)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let lines = pool.install(|| execute(&cfg, &mut out))?;

    out.write_manifest(&cfg, true)?;
    Ok(RunSummary {
        output_dir: root,
        artifacts: out.artifacts,
        lines,
    })
}

fn execute(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<String>> {
    let designs = cfg.designs();
    let mut lines = Vec::new();
    match cfg.study.kind {
        StudyKind::TlmFit => {
            let path = cfg.study.tlm_csv.as_ref().expect("validated");
            let width = cfg.study.width_um.expect("validated");
            let fit = tlm_fit(&TlmDataset::from_csv_path(path, width)?)?;
            write_tlm_csv(out.create("tlm_fit.csv")?, &fit)?;
            lines.push(describe_fit(&fit));
        }
        StudyKind::Compare => {
            compare(cfg, &designs, out, &mut lines)?;
        }
        StudyKind::Sweep | StudyKind::MonteCarlo => {
            let nested = designs.len() > 1;
            let mut summary = Vec::new();
            for d in &designs {
                log::info!("{}: {:?} over HDist {:?}", d.name, cfg.study.kind, cfg.hdists());
                let pops = populations(cfg, d)?;
                let report = compute_mdd(&pops, cfg.corner_mode())?;
                let dir = if nested { PathBuf::from(slug(&d.name)) } else { PathBuf::new() };
                write_populations_csv(out.create(dir.join("delay_populations.csv"))?, &pops)?;
                write_mdd_csv(out.create(dir.join("mdd_report.csv"))?, &report)?;
                write_stats_csv(out.create(dir.join("population_stats.csv"))?, &pops)?;
                let (a, b) = cfg.mdd_range();
                let worst = report.worst_case(a..=b);
                lines.push(format!("{}: worst-case MDD over HDist {a}..={b} = {}", d.name, worst.csv_value()));
                summary.push((d.clone(), pops, report, worst));
            }
            write_summary_csv(out.create("mdd_summary.csv")?, &summary, cfg.mdd_range())?;
            if cfg.study.rref_sweep_ohm.is_some() {
                let points: Vec<RrefPoint> = summary
                    .iter()
                    .map(|(d, pops, report, _)| RrefPoint {
                        rref_ohm: d.technology.rref_ohm,
                        populations: pops.clone(),
                        report: report.clone(),
                    })
                    .collect();
                write_rref_sweep_csv(out.create("rref_sweep.csv")?, &points)?;
            }
            compare(cfg, &designs, out, &mut lines)?;
        }
    }
    if cfg.simulation.trace && cfg.study.kind != StudyKind::TlmFit {
        for d in &designs {
            let res = simulate_at_distance(
                &d.array,
                &d.technology,
                &cfg.simulation,
                cfg.reference_hdist(),
                cfg.study.placement,
                cfg.study.seed,
            )?;
            if let Some(trace) = &res.trace {
                let rel = PathBuf::from("traces").join(format!("{}_h{}.csv", slug(&d.name), cfg.reference_hdist()));
                trace.write_csv(out.create(rel)?)?;
            }
        }
    }
    Ok(lines)
}

fn populations(cfg: &ExperimentConfig, d: &Design) -> Result<Vec<DelayPopulation>> {
    // Study runs never record traces; those come from one dedicated run.
    let settings = crate::transient::SimulationSettings {
        trace: false,
        ..cfg.simulation.clone()
    };
    match cfg.study.kind {
        StudyKind::MonteCarlo => monte_carlo_study(
            &d.array,
            &d.technology,
            &settings,
            &cfg.hdists(),
            cfg.n_trials(),
            &cfg.sigmas(),
            cfg.study.placement,
            cfg.study.seed,
        ),
        _ => sweep_hdist(
            &d.array,
            &d.technology,
            &settings,
            &cfg.hdists(),
            cfg.study.placement,
            cfg.study.seed,
        ),
    }
}

fn compare(cfg: &ExperimentConfig, designs: &[Design], out: &mut Outputs, lines: &mut Vec<String>) -> Result<()> {
    let settings = crate::transient::SimulationSettings {
        trace: false,
        ..cfg.simulation.clone()
    };
    let h = cfg.reference_hdist();
    let rows = compare_designs(designs, &settings, h, cfg.study.placement, cfg.study.seed)?;
    write_comparison_csv(out.create("comparison.csv")?, &rows)?;
    for r in &rows {
        lines.push(format!(
            "{} @ HDist {h}: delay {:.4} ns ({:.3}x), energy {:.4} fJ ({:.3}x)",
            r.design,
            r.delay_s * 1e9,
            r.delay_ratio,
            r.energy_j * 1e15,
            r.energy_ratio
        ));
    }
    Ok(())
}

/// Lowercase alphanumerics with `_` separators, for directory names.
pub fn slug(name: &str) -> String {
    let mut s = String::new();
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            s.push(ch.to_ascii_lowercase());
        } else if ch == '.' {
            s.push('p');
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}

fn finish_csv<W: Write>(w: csv::Writer<W>, name: &str) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(name, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(name, e))
}

fn write_stats_csv(w: impl Write, pops: &[DelayPopulation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "hdist",
        "samples",
        "crossed",
        "mean_s",
        "sigma_s",
        "relative_sigma",
        "min_s",
        "max_s",
    ])?;
    for p in pops {
        let num = |v: f64| if v.is_finite() { format!("{v:e}") } else { String::new() };
        w.write_record([
            p.hdist.to_string(),
            p.samples.len().to_string(),
            p.crossed.to_string(),
            num(p.fitted_mean_s),
            num(p.fitted_sigma_s),
            num(p.relative_sigma()),
            num(p.min_s),
            num(p.max_s),
        ])?;
    }
    finish_csv(w, "population_stats.csv")
}

type SummaryRow = (Design, Vec<DelayPopulation>, MddReport, Mdd);

fn write_summary_csv(w: impl Write, rows: &[SummaryRow], (a, b): (usize, usize)) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["design", "rref_ohm", "hdist_from", "hdist_to", "worst_mdd", "corner_mode"])?;
    for (d, _, report, worst) in rows {
        w.write_record([
            d.name.clone(),
            format!("{:e}", d.technology.rref_ohm),
            a.to_string(),
            b.to_string(),
            worst.csv_value(),
            report.corner_mode.label().to_string(),
        ])?;
    }
    finish_csv(w, "mdd_summary.csv")
}

fn write_tlm_csv(w: impl Write, fit: &FilmExtraction) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "sheet_resistance_ohm_per_sq",
        "contact_resistance_ohm",
        "fit_residual_ohm",
        "max_residual_ohm",
        "contact_clamped",
        "width_um",
    ])?;
    w.write_record([
        format!("{:e}", fit.sheet_resistance),
        format!("{:e}", fit.contact_resistance),
        format!("{:e}", fit.fit_residual),
        format!("{:e}", fit.max_residual),
        fit.contact_clamped.to_string(),
        fit.reference_width_um.to_string(),
    ])?;
    finish_csv(w, "tlm_fit.csv")
}

pub fn describe_fit(fit: &FilmExtraction) -> String {
    let mut s = format!(
        "sheet resistance {:.4} MOhm/sq, contact resistance {:.3} kOhm, rms residual {:.3} kOhm (max {:.3} kOhm)",
        fit.sheet_resistance / 1e6,
        fit.contact_resistance / 1e3,
        fit.fit_residual / 1e3,
        fit.max_residual / 1e3
    );
    if fit.contact_clamped {
        s.push_str("; negative intercept clamped to zero contact resistance");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_path_safe() {
        assert_eq!(slug("SOT-R PRE"), "sot_r_pre");
        assert_eq!(slug("FeFET-R 0.500 MOhm"), "fefet_r_0p500_mohm");
    }
}
