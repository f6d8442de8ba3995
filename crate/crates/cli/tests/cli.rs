//! End-to-end runs of the `vlasov` binary.

use std::path::Path;
use std::process::{Command, Output};

use vlasov_cli::{presets, RunManifest, ScenarioConfig};
use vlasov_core::Vec3;

fn vlasov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlasov"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, c: &ScenarioConfig) -> String {
    let p = dir.join(name);
    std::fs::write(&p, c.emit()).unwrap();
    p.to_string_lossy().into_owned()
}

fn small_free_streaming() -> ScenarioConfig {
    let mut c = presets::free_streaming();
    c.particles = 200;
    c.t_final = 0.2;
    c
}

fn run(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> (i32, RunManifest) {
    let mut args = vec![cmd, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = vlasov(&args);
    let code = o.status.code().unwrap();
    (code, RunManifest::load(out).unwrap())
}

#[test]
fn help_and_presets() {
    assert_eq!(vlasov(&["--help"]).status.code(), Some(0));
    assert_eq!(vlasov(&["--version"]).status.code(), Some(0));
    let list = vlasov(&["preset", "list"]);
    assert_eq!(list.status.code(), Some(0));
    assert_eq!(String::from_utf8(list.stdout).unwrap().lines().count(), presets::PRESET_NAMES.len());
    assert_eq!(vlasov(&["preset", "no-such-preset"]).status.code(), Some(3));
    assert_eq!(vlasov(&["simulate", "--bogus"]).status.code(), Some(3));
}

#[test]
fn malformed_and_invalid_configs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema_version\": 1,").unwrap();
    let o = vlasov(&["simulate", "--config", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let mut c = small_free_streaming();
    c.t_final = -1.0;
    let cfg = write_config(dir.path(), "neg.json", &c);
    let o = vlasov(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn oversized_gravitating_mass_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = presets::two_cluster(-1, 0);
    c.profile = vlasov_core::phase::InitialProfile::gaussian(vec![presets::lump(
        Vec3::ZERO,
        Vec3::ZERO,
        0.05,
        0.05,
        100.0,
    )])
    .unwrap();
    let cfg = write_config(dir.path(), "heavy.json", &c);
    let out = dir.path().join("run");
    let (code, m) = run("validate", &cfg, &out, &[]);
    assert_eq!(code, 3);
    assert_eq!(m.exit_code, 3);
    assert!(out.join("validation.json").is_file());
    let (code, _) = run("simulate", &cfg, &dir.path().join("sim"), &[]);
    assert_eq!(code, 3);
}

#[test]
fn blow_up_exits_2_and_keeps_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = presets::two_cluster(1, 0);
    c.profile = vlasov_core::phase::InitialProfile::gaussian(vec![presets::lump(
        Vec3::ZERO,
        Vec3::ZERO,
        0.05,
        0.05,
        5.0,
    )])
    .unwrap();
    c.particles = 300;
    c.integrator.v_max_guard = 2.0;
    let cfg = write_config(dir.path(), "c.json", &c);
    let out = dir.path().join("run");
    let (code, m) = run("simulate", &cfg, &out, &[]);
    assert_eq!(code, 2, "{m:?}");
    assert!(matches!(m.state, vlasov_cli::RunState::BlowUp { .. }));
    assert!(out.join("ledger.csv").is_file());
    assert!(m.artifacts.contains_key("ledger.csv"));
}

#[test]
fn free_streaming_simulate_and_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_free_streaming();
    c.diagnostics.casimir_resolution = 1.0;
    let cfg = write_config(dir.path(), "c.json", &c);
    let out = dir.path().join("run");
    let (code, m) = run("diagnose", &cfg, &out, &[]);
    assert_eq!(code, 3, "diagnose needs a simulated run first");
    assert!(!m.all_passed || m.checks.is_empty());

    let (code, m) = run("simulate", &cfg, &out, &[]);
    assert_eq!(code, 0, "{m:?}");
    assert_eq!(m.config_hash.as_deref(), Some(c.hash().as_str()));
    for f in ["config.json", "ledger.csv", "validation.json", "snapshots/manifest.json"] {
        assert!(m.artifacts.contains_key(f), "{f} missing from {:?}", m.artifacts.keys());
    }
    let (code, m) = run("diagnose", &cfg, &out, &[]);
    assert_eq!(code, 0, "{:?}", m.checks);
    assert!(m.all_passed);
    assert!(out.join("diagnostics.json").is_file() && out.join("residuals.json").is_file());

    let mut other = c.clone();
    other.seed += 1;
    let cfg2 = write_config(dir.path(), "c2.json", &other);
    let (code, _) = run("diagnose", &cfg2, &out, &[]);
    assert_eq!(code, 3, "a different config must not diagnose this run");
}

#[test]
fn picard_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = presets::weak_coupling();
    c.picard.samples = 64;
    let cfg = write_config(dir.path(), "c.json", &c);
    let out = dir.path().join("run");
    let (code, m) = run("picard", &cfg, &out, &[]);
    assert_eq!(code, 0, "{:?}", m.checks);
    assert!(out.join("picard.json").is_file());
    assert!(m.checks.iter().any(|k| k.name == "picard_contraction" && k.passed));
}

#[test]
fn artifacts_do_not_depend_on_threads_or_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = presets::two_cluster(1, 1);
    c.particles = 300;
    c.t_final = 0.2;
    let cfg = write_config(dir.path(), "c.json", &c);
    let (a, ma) = run("simulate", &cfg, &dir.path().join("a"), &["--threads", "1"]);
    let (b, mb) = run("simulate", &cfg, &dir.path().join("b"), &["--threads", "3"]);
    assert_eq!((a, b), (0, 0));
    assert_eq!(ma.threads, 1);
    assert_eq!(mb.threads, 3);
    assert_eq!(ma.artifacts, mb.artifacts);
    assert_eq!(
        std::fs::read(dir.path().join("a/ledger.csv")).unwrap(),
        std::fs::read(dir.path().join("b/ledger.csv")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_free_streaming());
    let (_, a) = run("simulate", &cfg, &dir.path().join("a"), &[]);
    let (_, b) = run("simulate", &cfg, &dir.path().join("b"), &["--seed", "9"]);
    assert_eq!(a.seed, Some(0));
    assert_eq!(b.seed, Some(9));
    assert_ne!(a.config_hash, b.config_hash);
}
