use std::path::{Path, PathBuf};

use super::*;

fn small(id: ExperimentId, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(id);
    cfg.out_dir = dir.to_path_buf();
    cfg.count = 1500;
    cfg.truncation = Some(48);
    cfg.svg = true;
    cfg
}

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

#[test]
fn shipped_presets_match_builtin_defaults() {
    for id in ExperimentId::ALL {
        let path = presets_dir().join(format!("{}.cfg", id.name()));
        let loaded = ExperimentConfig::load(&path).unwrap();
        assert_eq!(loaded, ExperimentConfig::preset(id), "{}", path.display());
    }
}

#[test]
fn manifest_lists_outputs_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(ExperimentId::GeneralizedTable2, dir.path());
    let run = execute(&cfg, &[]).unwrap();
    let m = &run.manifest;
    assert_eq!(m.tool, TOOL);
    assert_eq!(m.config, cfg);
    for f in ["sequence.csv", "signal.csv", "signal.json", "spectrum.csv", "peaks.csv", "report.json", "spectrum.svg"] {
        assert!(m.outputs.iter().any(|d| d.path == Path::new(f)), "{f} missing from manifest");
    }
    for stage in ["generate", "sequence", "signal", "spectrum", "peaks", "report"] {
        assert!(m.stages.iter().any(|s| s.stage == stage), "{stage}");
    }
    assert_eq!(m.truncation_errors.len(), 1);
    assert_eq!(m.truncation_errors[0].kind, "estimate");
    assert_eq!(m.checks.len(), 10);
    assert!(!dir.path().join(FAILURE_FILE).exists());

    let manifest_path = dir.path().join(manifest::MANIFEST_FILE);
    assert_eq!(RunManifest::load(&manifest_path).unwrap(), *m);
    let report = verify_manifest(&manifest_path).unwrap();
    assert!(report.ok());
    assert_eq!(report.checked, m.outputs.len());

    std::fs::write(dir.path().join("peaks.csv"), "rank\n").unwrap();
    std::fs::remove_file(dir.path().join("report.json")).unwrap();
    let report = verify_manifest(&manifest_path).unwrap();
    assert!(!report.ok());
    assert_eq!(report.mismatched, vec![PathBuf::from("peaks.csv")]);
    assert_eq!(report.missing, vec![PathBuf::from("report.json")]);
}

#[test]
fn failed_stage_leaves_failure_record_and_no_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let ok = small(ExperimentId::GeneralizedTable2, dir.path());
    execute(&ok, &[]).unwrap();

    // primes 2 and 3 are one unit apart, so dt = 2 must be refused
    let mut bad = ok.clone();
    bad.dt = 2.0;
    let err = execute(&bad, &[]).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "signal", .. }), "{err}");
    assert!(err.is_validation());
    assert!(!dir.path().join(manifest::MANIFEST_FILE).exists());
    let record: serde_json::Value = io::read_json(&dir.path().join(FAILURE_FILE)).unwrap();
    assert!(record["error"].as_str().unwrap().contains("signal"));
    let partial: Vec<&str> = record["partial_outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(partial.contains(&"sequence.csv"));

    execute(&ok, &[]).unwrap();
    assert!(!dir.path().join(FAILURE_FILE).exists());
}

#[test]
fn invalid_config_is_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentId::Hist1, &dir.path().join("never"));
    cfg.count = 1;
    assert!(execute(&cfg, &[]).unwrap_err().is_validation());
    assert!(!dir.path().join("never").exists());
}

#[test]
fn histogram_chart_has_one_bar_per_difference() {
    let dir = tempfile::tempdir().unwrap();
    let run = execute(&small(ExperimentId::Hist1, dir.path()), &[]).unwrap();
    let hist = run.histogram.unwrap();
    let svg = std::fs::read_to_string(dir.path().join("histogram.svg")).unwrap();
    assert_eq!(svg.matches("class=\"bar\"").count(), hist.counts.len());
    assert_eq!(run.metrics["jumping_champion"], 6.0);
    assert!(run.manifest.checks_passed());
}

#[test]
fn small_hist2_reports_spikes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentId::Hist2, dir.path());
    cfg.max_diff = 300;
    cfg.check_spikes = vec![6, 30, 210];
    let run = execute(&cfg, &[]).unwrap();
    let spikes = run.spikes.unwrap().differences();
    assert!(spikes.contains(&6) && spikes.contains(&30) && spikes.contains(&210), "{spikes:?}");
    let json: serde_json::Value = io::read_json(&dir.path().join("spikes.json")).unwrap();
    assert_eq!(json["spikes"].as_array().unwrap().len(), spikes.len());
}

#[test]
fn translation_windows_track_prefixes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentId::TranslationWindows, dir.path());
    cfg.windows = vec![(1, 800), (801, 1600)];
    cfg.svg = false;
    let run = execute(&cfg, &[]).unwrap();
    assert!(run.table("window1/").is_some() && run.table("window2/").is_some());
    assert!(dir.path().join("window2/peaks.csv").exists());
    assert!(dir.path().join("matches.json").exists());
    assert!(!run.manifest.outputs.iter().any(|f| f.path.extension().is_some_and(|e| e == "svg")));
    assert!(run.manifest.stages.iter().any(|s| s.stage == "window2/signal"));
}

#[test]
fn seq_run_writes_control_track() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentId::Seq2Run, dir.path());
    cfg.count = 600;
    let run = execute(&cfg, &[]).unwrap();
    assert!(run.table("").is_some() && run.table("control/").is_some());
    assert!(dir.path().join("spectrum_logx.svg").exists());
    assert!(dir.path().join("control/spectrum_logx.svg").exists());
    assert!(run.manifest.checks.is_empty());
}

#[test]
fn poisson_control_with_fixed_reference() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentId::PoissonControl, dir.path());
    cfg.control_reference = Some(f64::MAX);
    let run = execute(&cfg, &[]).unwrap();
    assert!(run.table("reference/").is_none());
    assert_eq!(run.metrics["reference_prominence"], f64::MAX);
    assert!(run.manifest.checks_passed());
}

#[test]
fn classical_run_records_error_bound() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentId::ClassicalTable1, dir.path());
    cfg.count = 400;
    cfg.classical_radius = Some(200.0);
    let run = execute(&cfg, &[]).unwrap();
    let t = &run.manifest.truncation_errors;
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].kind, "bound");
    assert!(t[0].value.is_finite() && t[0].value > 0.0);
}
