use std::path::PathBuf;
use std::process::{Command, Output};

fn wavelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavelab")).args(args).output().expect("binary runs")
}

fn scenarios_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios"].iter().collect()
}

const TINY: &str = r#"
schema = 1
name = "tiny"
kind = "ber"
snr_db = [10.0, 20.0]
trials = 3
seed = 1

[channel]
profile = { kind = "RandomSparse", paths = 3, max_delay = 4.0, max_doppler = 0.0, integer = true }

[[systems]]
label = "ofdm"
frame = { waveform = "OFDM", m = 64, n = 4, delta_f = 15000.0, prefix = { kind = "FullCP", len = 8 } }
pilot = { kind = "BlockFrequency" }
ce_domain = "Frequency"
equalizer = { domain = "Frequency", method = "OneTap" }
"#;

#[test]
fn missing_scenario_is_a_usage_error() {
    let out = wavelab(&["run", "missing.scn"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.scn"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(wavelab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(wavelab(&["run"]).status.code(), Some(2));
}

#[test]
fn oracle_check_passes() {
    let out = wavelab(&["oracle-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains(", 0 failed"));
}

#[test]
fn lists_shipped_scenarios() {
    let out = wavelab(&["list-scenarios", scenarios_dir().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["fig4_static.scn", "fig5_eva.scn", "birth_death.scn"] {
        assert!(text.contains(name), "{text}");
    }
    assert!(!text.contains("invalid"), "{text}");
}

#[test]
fn run_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("tiny.scn");
    std::fs::write(&scn, TINY).unwrap();
    let record = dir.path().join("out/tiny.json");
    let out = wavelab(&["run", scn.to_str().unwrap(), "--out", record.to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ofdm"));
    assert!(record.exists());

    let csv = dir.path().join("tiny.csv");
    let out = wavelab(&["export-plotdata", record.to_str().unwrap(), csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("system,snr_db,ber,nmse_db,flops,reduction_db,trials,stderr,bits"));
    assert_eq!(text.lines().count(), 3);

    let missing = dir.path().join("nope.json");
    let out = wavelab(&["export-plotdata", missing.to_str().unwrap(), csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_prints_reports() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("tiny.scn");
    std::fs::write(&scn, TINY).unwrap();
    let out = wavelab(&["analyze", scn.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("delay resolution"));
    assert!(text.contains("sparsity Frequency"));
    assert!(text.contains("pulse"));
}
