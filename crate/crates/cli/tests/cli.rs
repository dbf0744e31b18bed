use std::path::Path;
use std::process::{Command, Output};

fn primesig(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_primesig"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn single_steps_chain_from_sequence_to_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = primesig(d, &["seq", "primes", "--count", "800"]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(d.join("sequence.csv").exists() && d.join("sequence.json").exists());

    let out = primesig(d, &["hist", "sequence.csv"]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains("most frequent difference: Some(6)"));
    for f in ["histogram.csv", "histogram.svg", "spikes.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    assert_eq!(code(&primesig(d, &["hist", "sequence.csv", "--mode", "all-pairs"])), 0);

    let out = primesig(d, &["--truncation", "32", "signal", "sequence.csv"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let out = primesig(d, &["spectrum", "signal.csv"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let out = primesig(d, &["peaks", "spectrum.csv"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let peaks = std::fs::read_to_string(d.join("peaks.csv")).unwrap();
    assert!(peaks.starts_with("rank,frequency,wavelength,magnitude,prominence"));
    assert!(peaks.lines().count() > 5);
}

#[test]
fn classical_signal_and_other_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&primesig(d, &["seq", "primes-window", "--lo", "10", "--count", "200"])), 0);
    let out = primesig(d, &["signal", "sequence.csv", "--method", "classical"]);
    assert_eq!(code(&out), 0, "{out:?}");
    for kind in ["seq1", "seq2", "cramer"] {
        let out = primesig(d, &["--out", kind, "seq", kind, "--count", "300", "--bound", "3000"]);
        assert_eq!(code(&out), 0, "{kind}: {out:?}");
        assert!(d.join(kind).join("sequence.csv").exists());
    }
    assert_eq!(code(&primesig(d, &["seq", "primorials", "--count", "6"])), 0);
    let table = std::fs::read_to_string(d.join("primorials.json")).unwrap();
    assert!(table.contains("\"30030\""));
}

#[test]
fn experiment_manifest_verifies_until_tampered() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.cfg"), "experiment = Hist1\ncount = 2000\nout_dir = run\n").unwrap();
    let out = primesig(d, &["--config", "small.cfg", "experiment", "hist1", "--check"]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains("PASS most frequent consecutive gap"));

    let manifest = std::fs::read_to_string(d.join("run/manifest.json")).unwrap();
    assert!(manifest.contains("small.cfg"));
    let out = primesig(d, &["verify", "run/manifest.json"]);
    assert_eq!(code(&out), 0, "{out:?}");

    std::fs::write(d.join("run/histogram.csv"), "gap,count\n").unwrap();
    let out = primesig(d, &["verify", "run/manifest.json"]);
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).contains("CHANGED histogram.csv"));
}

#[test]
fn failed_check_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.cfg"), "experiment = Hist1\ncount = 2000\ncheck_champion = 4\n").unwrap();
    let out = primesig(d, &["--config", "c.cfg", "--out", "o", "experiment", "hist1", "--check"]);
    assert_eq!(code(&out), 4, "{out:?}");
    assert!(stdout(&out).contains("FAIL most frequent consecutive gap"));
    // without --check a failed check is reported but not fatal
    let out = primesig(d, &["--config", "c.cfg", "--out", "o", "experiment", "hist1"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&primesig(d, &["--dt", "-1", "experiment", "hist1"])), 2);
    assert_eq!(code(&primesig(d, &["experiment", "Table3"])), 2);
    assert_eq!(code(&primesig(d, &["--threads", "0", "experiment", "hist1"])), 2);
    assert_eq!(code(&primesig(d, &["--truncation", "3", "experiment", "hist1"])), 2);
    std::fs::write(d.join("bad.cfg"), "experiment = Hist1\nno_such_key = 1\n").unwrap();
    assert_eq!(code(&primesig(d, &["--config", "bad.cfg", "experiment", "hist1"])), 2);
    assert!(!d.join("out").exists());
}

#[test]
fn stage_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&primesig(d, &["signal", "missing.csv"])), 3);
    assert_eq!(code(&primesig(d, &["verify", "missing.json"])), 3);
}

#[test]
fn printed_config_matches_shipped_preset() {
    let dir = tempfile::tempdir().unwrap();
    let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    for id in ["Hist1", "GeneralizedTable2", "TranslationWindows"] {
        let out = primesig(dir.path(), &["experiment", id, "--print-config"]);
        assert_eq!(code(&out), 0);
        let printed: Vec<String> = stdout(&out)
            .lines()
            .filter(|l| !l.starts_with("parallel"))
            .map(String::from)
            .collect();
        let shipped = std::fs::read_to_string(presets.join(format!("{id}.cfg"))).unwrap();
        let shipped: Vec<String> = shipped.lines().filter(|l| !l.starts_with('#')).map(String::from).collect();
        assert_eq!(printed, shipped, "{id}");
    }
}
