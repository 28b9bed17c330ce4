use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use moment_control::cli::{
    analyze, cmd_classify, preset_config, quotient, synthesize, verify, ControlMode, Overrides, RunConfig, StoredControl, PRESETS,
};
use moment_control::spectral::InitialData;
use moment_control::Error;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn key(text: &str, name: &str) -> String {
    let prefix = format!("{name}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("{name} missing in\n{text}")).to_string()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn presets_round_trip() {
    for p in PRESETS {
        let cfg = preset_config(p).unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg, "{p}");
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }
}

#[test]
fn checked_in_configs_match_presets() {
    for p in PRESETS {
        let cfg = RunConfig::load(&configs_dir().join(format!("{p}.toml")), &Overrides::default()).unwrap();
        assert_eq!(cfg, preset_config(p).unwrap(), "{p}");
    }
}

#[test]
fn layered_preset_replaces_tagged_tables() {
    let cfg = RunConfig::load(&configs_dir().join("q1-zero-data.toml"), &Overrides::default()).unwrap();
    assert!(cfg.initial.is_zero());
    assert_eq!(cfg.coupling, preset_config("q1").unwrap().coupling);
}

#[test]
fn overrides_and_validation() {
    let mut cfg = preset_config("q1").unwrap();
    cfg.apply(&Overrides { seed: Some(9), modes: Some(3), horizon: Some(0.25) });
    assert_eq!((cfg.seed, cfg.modes, cfg.horizon), (9, 3, 0.25));
    let mut bad = cfg.clone();
    bad.tolerances.duality = 0.0;
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let mut bad = cfg.clone();
    bad.horizon = -1.0;
    assert!(bad.validate().is_err());
    let err = RunConfig::from_toml("preset = \"q1\"\nbogus = 1\n").unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
    let err = RunConfig::from_toml("preset = \"nope\"\n").unwrap_err();
    assert!(err.to_string().contains("unknown preset"), "{err}");
    let err = RunConfig::from_toml("mode = \"distributed\"\nhorizon = \n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn analyze_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut q1 = preset_config("q1").unwrap();
    q1.analysis_modes = Some(8);
    analyze(&q1, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("spectral.csv")).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| (r[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-12));

    analyze(&preset_config("zero").unwrap(), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("spectral.csv")).unwrap();
    assert!(data_rows(&text).iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0 && r[3].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn classify_exit_codes_and_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_classify(&preset_config("zero").unwrap(), dir.path()).unwrap();
    assert_eq!(out.exit_code, 2);
    let text = fs::read_to_string(dir.path().join("classify.txt")).unwrap();
    assert_eq!(key(&text, "witness.k"), "1");
    assert_eq!(key(&text, "witness.verified"), "true");

    let out = cmd_classify(&preset_config("q1").unwrap(), dir.path()).unwrap();
    assert_eq!(out.exit_code, 0);
    let text = fs::read_to_string(dir.path().join("classify.txt")).unwrap();
    assert!(key(&text, "T0_estimate").parse::<f64>().unwrap().abs() < 1e-6);

    cmd_classify(&preset_config("surrogate").unwrap(), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("classify.txt")).unwrap();
    assert!((key(&text, "T0_estimate").parse::<f64>().unwrap() - 0.4).abs() < 1e-6);

    let out = cmd_classify(&preset_config("tuned").unwrap(), dir.path()).unwrap();
    assert_eq!(out.exit_code, 2);
    assert_eq!(key(&fs::read_to_string(dir.path().join("classify.txt")).unwrap(), "witness.k"), "2");
}

fn zero_data(preset: &str) -> RunConfig {
    RunConfig { initial: InitialData::default(), ..preset_config(preset).unwrap() }
}

#[test]
fn zero_data_gives_zero_control_and_trivial_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = zero_data("q1");
    synthesize(&cfg, dir.path()).unwrap();
    let stored = StoredControl::load(&dir.path().join("control.json")).unwrap();
    let d = stored.distributed.unwrap();
    assert!(d.shapes.is_none() && d.v.iter().flatten().flatten().all(|&x| x == 0.0));
    let out = verify(&cfg, &dir.path().join("control.json"), dir.path()).unwrap();
    assert_eq!(out.exit_code, 0);
    assert_eq!(key(&fs::read_to_string(dir.path().join("verify.txt")).unwrap(), "ratio").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn uncontrolled_run_fails_with_heat_decay() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = zero_data("zero");
    let err = synthesize(&RunConfig { initial: preset_config("zero").unwrap().initial, ..cfg.clone() }, dir.path()).unwrap_err();
    assert!(matches!(err, Error::FailedPrecondition { .. }), "{err}");
    cfg.allow_uncontrollable = true;
    synthesize(&cfg, dir.path()).unwrap();
    let run = preset_config("zero").unwrap();
    let out = verify(&run, &dir.path().join("control.json"), dir.path()).unwrap();
    assert_eq!(out.exit_code, 2);
    let text = fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    let ratio: f64 = key(&text, "ratio").parse().unwrap();
    assert!((ratio - (-run.horizon).exp()).abs() < 1e-6, "{ratio}");
    assert_eq!(key(&text, "config_matches_control"), "false");
}

#[test]
fn mismatched_truncation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = zero_data("q1");
    synthesize(&cfg, dir.path()).unwrap();
    let other = RunConfig { modes: cfg.modes + 1, ..cfg };
    let err = verify(&other, &dir.path().join("control.json"), dir.path()).unwrap_err();
    assert!(err.to_string().contains("K ="), "{err}");
}

#[test]
fn boundary_preset_emits_control_table_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_config("boundary-q1").unwrap();
    assert_eq!(cfg.mode, ControlMode::Boundary);
    synthesize(&cfg, dir.path()).unwrap();
    let samples = fs::read_to_string(dir.path().join("control_samples.csv")).unwrap();
    assert_eq!(data_rows(&samples).len(), cfg.samples);
    let modes = fs::read_to_string(dir.path().join("boundary_modes.csv")).unwrap();
    assert_eq!(data_rows(&modes).len(), cfg.modes);
    let out = verify(&cfg, &dir.path().join("control.json"), dir.path()).unwrap();
    assert_eq!(out.exit_code, 0, "{}", out.summary);
}

#[test]
fn quotient_flags_zero_coupling() {
    let dir = tempfile::tempdir().unwrap();
    quotient(&preset_config("zero").unwrap(), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("quotient.txt")).unwrap();
    assert_eq!(key(&text, "degenerate"), "true");
}

fn all_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())).collect();
    v.sort();
    v
}

#[test]
fn outputs_are_deterministic_and_carry_provenance() {
    let cfg = preset_config("boundary-q1").unwrap();
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            analyze(&cfg, dir.path()).unwrap();
            cmd_classify(&cfg, dir.path()).unwrap();
            synthesize(&cfg, dir.path()).unwrap();
            verify(&cfg, &dir.path().join("control.json"), dir.path()).unwrap();
            all_files(dir.path())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let hash = cfg.hash().unwrap();
    for (name, bytes) in &runs[0] {
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains(&format!("config_sha256{}{hash}", if name.ends_with(".json") { "\": \"" } else { "=" })), "{name}");
        if !name.ends_with(".json") {
            assert!(text.starts_with("# momentctl "), "{name}");
            assert!(text.contains("K=6") && text.contains("tolerances "), "{name}");
        }
    }
}

#[test]
fn binary_reports_verdict_in_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let run = |preset: &str| {
        Command::new(env!("CARGO_BIN_EXE_momentctl"))
            .args(["classify", "--config"])
            .arg(configs_dir().join(format!("{preset}.toml")))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run("zero"), Some(2));
    assert_eq!(run("q1"), Some(0));
    let missing = Command::new(env!("CARGO_BIN_EXE_momentctl")).args(["analyze", "--config", "/nonexistent.toml"]).output().unwrap().status;
    assert_eq!(missing.code(), Some(1));
    let status = Command::new(env!("CARGO_BIN_EXE_momentctl"))
        .args(["analyze", "--K", "3", "--config"])
        .arg(configs_dir().join("q1.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("spectral.csv")).unwrap();
    assert!(text.contains("K=3"));
}
