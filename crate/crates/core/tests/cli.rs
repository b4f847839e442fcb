use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_camsim");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn camsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn camsim")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn minimal_sweep_writes_all_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = configs().join("minimal_sweep.toml");
    let t0 = std::time::Instant::now();
    let o = camsim(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    assert_eq!(header(&out.join("mdd_report.csv")), "hdist,mdd,corner_mode");
    assert_eq!(header(&out.join("delay_populations.csv")), "hdist,trial,row_position,delay_s");
    assert_eq!(header(&out.join("comparison.csv")), "design,delay_s,energy_j,delay_ratio,energy_ratio");

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config"]["array"]["sense_threshold_v"], 0.35);
    assert_eq!(manifest["config"]["simulation"]["method"], "bdf2");
}

#[test]
fn reruns_and_manifest_replays_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("minimal_sweep.toml");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = camsim(&["run", cfg.to_str().unwrap(), "--output-dir", d.to_str().unwrap(), "--jobs", "2"]);
        assert!(o.status.success());
    }
    let replay = dir.path().join("replay");
    let o = camsim(&[
        "run",
        a.join("run_manifest.json").to_str().unwrap(),
        "--output-dir",
        replay.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["mdd_report.csv", "delay_populations.csv", "comparison.csv", "population_stats.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, fs::read(replay.join(f)).unwrap(), "{f} (replay)");
    }
}

#[test]
fn seed_override_changes_placement() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[array]\nrows = 4\ncols = 8\n[technology]\nkind = \"sot\"\nrref_ohm = 1e6\n[study]\nkind = \"sweep\"\nhdist_set = [3, 4]\n";
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, text).unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = camsim(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
        assert_eq!(m["config"]["study"]["seed"].as_u64().unwrap().to_string(), seed);
        fs::read(out.join("delay_populations.csv")).unwrap()
    };
    assert_ne!(run("1", "s1"), run("2", "s2"));
}

#[test]
fn trace_flag_writes_voltage_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let cfg = configs().join("minimal_sweep.toml");
    let o = camsim(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap(), "--trace"]);
    assert!(o.status.success());
    let traces: Vec<_> = fs::read_dir(out.join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 1);
    let path = traces[0].as_ref().unwrap().path();
    assert_eq!(header(&path), "time_s,node_id,voltage_v");
}

#[test]
fn validate_lists_every_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[array]\nrows = 0\ncols = 4\ndriver_r_ohm = -1.0\n[technology]\nkind = \"fefet\"\nrref_ohm = -1.0\n[study]\nkind = \"monte_carlo\"\nn_trials = 1\n",
    )
    .unwrap();
    let o = camsim(&["validate", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    for f in ["array.rows", "array.driver_r_ohm", "technology.rref_ohm", "study.n_trials"] {
        assert!(err.contains(f), "{f} missing from:\n{err}");
    }
}

#[test]
fn unknown_keys_are_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "[array]\nrows = 1\ncols = 4\nvdd = 0.7\n[technology]\nkind = \"sram\"\n[study]\nkind = \"sweep\"\n").unwrap();
    let o = camsim(&["validate", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("vdd"));
}

#[test]
fn bundled_configs_validate() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let o = camsim(&["validate", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn tlm_fit_reports_sheet_resistance() {
    let csv = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tlm_synthetic.csv");
    let o = camsim(&["tlm-fit", csv.to_str().unwrap(), "--width-um", "10"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("sheet resistance 3.3000 MOhm/sq"), "{text}");
    assert!(text.contains("residual"), "{text}");
}

#[test]
fn tlm_fit_study_resolves_csv_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tlm");
    let cfg = configs().join("tlm_fit.toml");
    let o = camsim(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("tlm_fit.csv")).unwrap();
    let sheet: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((sheet / 3.3e6 - 1.0).abs() < 1e-9, "{text}");
}

#[test]
fn multi_design_sweep_uses_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[array]\nrows = 4\ncols = 6\n[technology]\nkind = \"sot\"\n[study]\nkind = \"sweep\"\nhdist_set = { from = 1, to = 6 }\nrref_sweep_ohm = [0.0, 1e6]\nreference_hdist = 3\n";
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("o");
    let o = camsim(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap(), "--jobs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("sot_0p000_mohm/mdd_report.csv").is_file());
    assert!(out.join("sot_r_1p000_mohm/delay_populations.csv").is_file());
    assert_eq!(header(&out.join("rref_sweep.csv")), "rref_ohm,hdist,mdd,corner_mode");
    let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 3);
}
