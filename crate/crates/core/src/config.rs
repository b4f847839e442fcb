//! Declarative experiment configuration.
//!
//! A config is one TOML file with `[array]`, `[technology]`, `[simulation]`
//! and `[study]` tables. Unknown keys are rejected everywhere. Technology
//! tables start from the preset for `kind` and override only the sub-models
//! that are given.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{CornerMode, Design, Placement};
use crate::cell::{CellTechnology, TechnologyKind, TransistorModel};
use crate::device::{DeviceSigmas, FefetModel, MtjModel};
use crate::error::{Error, Issues, Result};
use crate::network::{ArrayConfig, Scheme};
use crate::transient::SimulationSettings;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REFERENCE_HDIST: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Sweep,
    MonteCarlo,
    Compare,
    TlmFit,
}

/// Technology preset plus optional sub-model overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologySpec {
    pub kind: TechnologyKind,
    #[serde(default)]
    pub rref_ohm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transistor: Option<TransistorModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mtj: Option<MtjModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fefet: Option<FefetModel>,
}

impl TechnologySpec {
    pub fn build(&self) -> CellTechnology {
        let mut t = CellTechnology::preset(self.kind, self.rref_ohm);
        if let Some(tr) = self.transistor {
            t.transistor = tr;
        }
        if self.mtj.is_some() {
            t.mtj = self.mtj;
        }
        if self.fefet.is_some() {
            t.fefet = self.fefet;
        }
        t
    }

    /// Same technology with every sub-model spelled out.
    pub fn resolved(&self) -> Self {
        let t = self.build();
        Self {
            kind: t.kind,
            rref_ohm: t.rref_ohm,
            transistor: Some(t.transistor),
            mtj: t.mtj,
            fefet: t.fefet,
        }
    }
}

/// One entry of `[[study.designs]]`; unset fields inherit from the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology: Option<TechnologySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precharge_hold_s: Option<f64>,
}

/// Either an explicit list or an inclusive `{ from, to }` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HdistSet {
    List(Vec<usize>),
    Range { from: usize, to: usize },
}

impl HdistSet {
    pub fn values(&self) -> Vec<usize> {
        match self {
            HdistSet::List(v) => v.clone(),
            HdistSet::Range { from, to } => (*from..=*to).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hdist_set: Option<HdistSet>,
    /// HDist range the worst-case MDD is taken over; defaults to every
    /// swept HDist that has a successor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdd_range: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<DeviceSigmas>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Runs the sweep once per reference resistance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rref_sweep_ohm: Option<Vec<f64>>,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_hdist: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner_mode: Option<CornerMode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub designs: Vec<DesignSpec>,
    /// TLM dataset, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tlm_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_um: Option<f64>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub array: ArrayConfig,
    pub technology: TechnologySpec,
    #[serde(default)]
    pub simulation: SimulationSettings,
    pub study: StudyConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a TOML config, or the `config` object of a run manifest when the
    /// file ends in `.json`. Relative `tlm_csv` paths are made absolute
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Manifest {
                config: ExperimentConfig,
            }
            serde_json::from_str::<Manifest>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                .config
        } else {
            Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        if let Some(csv) = &cfg.study.tlm_csv {
            if csv.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.study.tlm_csv = Some(base.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn hdists(&self) -> Vec<usize> {
        match &self.study.hdist_set {
            Some(s) => s.values(),
            None => (1..=self.array.cols).collect(),
        }
    }

    pub fn reference_hdist(&self) -> usize {
        self.study
            .reference_hdist
            .unwrap_or(DEFAULT_REFERENCE_HDIST.min(self.array.cols))
    }

    pub fn corner_mode(&self) -> CornerMode {
        self.study.corner_mode.unwrap_or(match self.study.kind {
            StudyKind::MonteCarlo => CornerMode::ThreeSigma,
            _ => CornerMode::MinMax,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.study.n_trials.unwrap_or(100)
    }

    pub fn sigmas(&self) -> DeviceSigmas {
        self.study.sigmas.unwrap_or(DeviceSigmas::FABRICATED)
    }

    /// Inclusive HDist range for worst-case MDD.
    pub fn mdd_range(&self) -> (usize, usize) {
        if let Some([a, b]) = self.study.mdd_range {
            return (a, b);
        }
        let h = self.hdists();
        let lo = h.iter().copied().filter(|&h| h > 0).min().unwrap_or(1);
        let hi = h.iter().copied().max().unwrap_or(1).saturating_sub(1).max(lo);
        (lo, hi)
    }

    /// The designs a study runs: the explicit list, one per swept Rref, or
    /// the top-level technology alone.
    pub fn designs(&self) -> Vec<Design> {
        if !self.study.designs.is_empty() {
            return self
                .study
                .designs
                .iter()
                .map(|d| {
                    let mut array = self.array.clone();
                    if let Some(s) = d.scheme {
                        array.scheme = s;
                    }
                    if d.precharge_hold_s.is_some() {
                        array.precharge_hold_s = d.precharge_hold_s;
                    }
                    let tech = d.technology.as_ref().unwrap_or(&self.technology).build();
                    let mut design = Design::new(array, tech);
                    if let Some(n) = &d.name {
                        design.name = n.clone();
                    }
                    design
                })
                .collect();
        }
        let tech = self.technology.build();
        match &self.study.rref_sweep_ohm {
            Some(rrefs) => rrefs
                .iter()
                .map(|&r| {
                    let mut d = Design::new(self.array.clone(), tech.clone().with_rref(r));
                    d.name = format!("{} {:.3} MOhm", d.name, r / 1e6);
                    d
                })
                .collect(),
            None => vec![Design::new(self.array.clone(), tech)],
        }
    }

    /// Every check, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        issues.absorb(self.array.validate());
        issues.absorb(self.technology.build().validate());
        issues.absorb(self.simulation.validate());
        let st = &self.study;
        let hd = self.hdists();
        match st.kind {
            StudyKind::TlmFit => {
                match &st.tlm_csv {
                    None => issues.push("study.tlm_csv", "required for tlm_fit"),
                    Some(p) if !p.is_file() => {
                        issues.push("study.tlm_csv", format!("file not found: {}", p.display()))
                    }
                    Some(_) => {}
                }
                match st.width_um {
                    None => issues.push("study.width_um", "required for tlm_fit"),
                    Some(w) => issues.require(w > 0.0, "study.width_um", "must be > 0"),
                }
            }
            _ => {
                issues.require(st.tlm_csv.is_none(), "study.tlm_csv", "only valid for tlm_fit");
                issues.require(st.width_um.is_none(), "study.width_um", "only valid for tlm_fit");
            }
        }
        if let Some(HdistSet::Range { from, to }) = &st.hdist_set {
            issues.require(from <= to, "study.hdist_set", "range must have from <= to");
        }
        if matches!(st.kind, StudyKind::Sweep | StudyKind::MonteCarlo) {
            issues.require(!hd.is_empty(), "study.hdist_set", "must not be empty");
            issues.require(
                hd.windows(2).all(|w| w[1] == w[0] + 1),
                "study.hdist_set",
                "must be a contiguous ascending range",
            );
        }
        if let Some(h) = hd.iter().find(|&&h| h > self.array.cols) {
            issues.push(
                "study.hdist_set",
                format!("HDist {h} exceeds the {} columns", self.array.cols),
            );
        }
        if let Some([a, b]) = st.mdd_range {
            issues.require(a >= 1 && a <= b, "study.mdd_range", "must satisfy 1 <= from <= to");
        }
        let rh = self.reference_hdist();
        issues.require(
            (1..=self.array.cols).contains(&rh),
            "study.reference_hdist",
            format!("must lie in 1..={}", self.array.cols),
        );
        if st.kind == StudyKind::MonteCarlo {
            issues.require(self.n_trials() >= 2, "study.n_trials", "must be >= 2");
            issues.absorb(self.sigmas().validate());
        } else {
            issues.require(st.n_trials.is_none(), "study.n_trials", "only valid for monte_carlo");
            issues.require(st.sigmas.is_none(), "study.sigmas", "only valid for monte_carlo");
        }
        if let Some(r) = &st.rref_sweep_ohm {
            issues.require(!r.is_empty(), "study.rref_sweep_ohm", "must not be empty");
            issues.require(
                r.iter().all(|&v| v >= 0.0 && v.is_finite()),
                "study.rref_sweep_ohm",
                "values must be finite and >= 0",
            );
            issues.require(
                st.designs.is_empty(),
                "study.rref_sweep_ohm",
                "cannot be combined with study.designs",
            );
        }
        for (i, d) in st.designs.iter().enumerate() {
            if let Some(t) = &d.technology {
                let mut sub = Issues::default();
                sub.absorb(t.build().validate());
                if let Err(e) = sub.finish() {
                    for f in e.field_issues() {
                        issues.push(format!("study.designs[{i}].{}", f.field), f.message);
                    }
                }
            }
            if let Some(h) = d.precharge_hold_s {
                issues.require(h > 0.0, format!("study.designs[{i}].precharge_hold_s"), "must be > 0");
            }
        }
        let designs = self.designs();
        let mut names: Vec<&str> = designs.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            issues.push("study.designs", "design names must be unique; set `name`");
        }
        issues.finish()
    }

    /// Copy with every default written out, as echoed into the manifest.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.array = c.array.resolved();
        c.technology = c.technology.resolved();
        for d in &mut c.study.designs {
            d.technology = Some(d.technology.as_ref().unwrap_or(&self.technology).resolved());
            d.scheme = Some(d.scheme.unwrap_or(self.array.scheme));
        }
        if c.study.kind != StudyKind::TlmFit {
            c.study.hdist_set = Some(HdistSet::List(self.hdists()));
            c.study.reference_hdist = Some(self.reference_hdist());
            c.study.corner_mode = Some(self.corner_mode());
            let (a, b) = self.mdd_range();
            c.study.mdd_range = Some([a, b]);
        }
        if c.study.kind == StudyKind::MonteCarlo {
            c.study.n_trials = Some(self.n_trials());
            c.study.sigmas = Some(self.sigmas());
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[array]
rows = 1
cols = 4

[technology]
kind = "fefet"
rref_ohm = 4e6

[study]
kind = "sweep"
hdist_set = { from = 0, to = 4 }
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.hdists(), vec![0, 1, 2, 3, 4]);
        assert_eq!(c.reference_hdist(), 4);
        assert_eq!(c.mdd_range(), (1, 3));
        assert_eq!(c.corner_mode(), CornerMode::MinMax);
        assert_eq!(c.designs().len(), 1);
        assert_eq!(c.designs()[0].name, "FeFET-R");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let bad = MINIMAL.replace("rows = 1", "rows = 1\nrowz = 2");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("rowz"), "{err}");
        let bad = MINIMAL.replace("kind = \"sweep\"", "kind = \"sweep\"\nseeed = 3");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn every_violation_is_listed() {
        let bad = MINIMAL
            .replace("rows = 1", "rows = 0\nvdd_v = -1.0")
            .replace("rref_ohm = 4e6", "rref_ohm = -5.0")
            .replace("to = 4", "to = 9");
        let c = ExperimentConfig::from_toml_str(&bad).unwrap();
        let fields: Vec<String> = c
            .validate()
            .unwrap_err()
            .field_issues()
            .into_iter()
            .map(|f| f.field)
            .collect();
        for f in ["array.rows", "array.vdd_v", "technology.rref_ohm", "study.hdist_set"] {
            assert!(fields.iter().any(|x| x == f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap().resolved();
        let json = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.resolved(), c);
        let toml_text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&toml_text).unwrap(), c);
    }

    #[test]
    fn overrides_replace_preset_submodels() {
        let text = MINIMAL.replace(
            "rref_ohm = 4e6",
            "rref_ohm = 4e6\n[technology.transistor]\nvth_v = 0.3\nk_sat_a_per_v2 = 1e-3\nr_on_min_ohm = 1e3\nc_gate_f = 0.0",
        );
        let t = ExperimentConfig::from_toml_str(&text).unwrap().technology.build();
        assert_eq!(t.transistor.vth_v, 0.3);
        assert!(t.fefet.is_some());
    }

    #[test]
    fn design_list_inherits_top_level() {
        let text = format!(
            "{MINIMAL}\n[[study.designs]]\n[[study.designs]]\nscheme = \"prolonged_pre\"\n[[study.designs]]\ntechnology = {{ kind = \"sram\", rref_ohm = 0.0 }}\n"
        );
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        c.validate().unwrap();
        let names: Vec<String> = c.designs().into_iter().map(|d| d.name).collect();
        assert_eq!(names, ["FeFET-R", "FeFET-R PRE", "SRAM"]);
    }

    #[test]
    fn tlm_fit_requires_existing_file() {
        let text = MINIMAL.replace(
            "kind = \"sweep\"\nhdist_set = { from = 0, to = 4 }",
            "kind = \"tlm_fit\"\ntlm_csv = \"/nonexistent/x.csv\"\nwidth_um = 10.0",
        );
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("file not found"), "{err}");
    }
}
