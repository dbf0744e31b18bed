//! End-to-end experiment runs: sequence, signal, spectrum, peaks, reports.
//!
//! Each run writes into its own output directory and finishes with a
//! `manifest.json` listing every output with its SHA-256 digest. A failed
//! run leaves `FAILED.json` naming the stage, the cause, and the files
//! written so far, and no manifest.

pub mod config;
pub mod manifest;
pub mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::classical::{reconstruct_classical, ClassicalBandParams};
use crate::error::{Error, Result};
use crate::gap_histogram::{consecutive_gaps, find_spikes, pair_diff_histogram, GapHistogram, SpikeReport};
use crate::generalized::{make_lattice, reconstruct_generalized};
use crate::io;
use crate::par::Exec;
use crate::peaks::{compare_peak_tables, detect_peaks, max_prominence_near, PeakMatchReport, PeakTable};
use crate::sequences::{
    control_sample, primes_first, primes_window, seq1_up_to, seq2_first, ControlDensity, ControlMode,
    IntegerSequence,
};
use crate::signal::{Provenance, Signal, UniformGrid};
use crate::spectrum::{magnitude_spectrum, Spectrum};

pub use config::{ExperimentConfig, ExperimentId};
pub use manifest::{verify_manifest, CheckResult, FileDigest, RunManifest, StageTiming, TruncationRecord, VerifyReport};
use svg::{emit_svg_chart, envelope, ChartKind, ChartStyle};

pub const TOOL: &str = concat!("primesig ", env!("CARGO_PKG_VERSION"));
pub const FAILURE_FILE: &str = "FAILED.json";

/// Grid samples drawn in the signal chart.
const SIGNAL_CHART_POINTS: usize = 2000;
/// Buckets in the spectrum chart envelope.
const SPECTRUM_CHART_POINTS: usize = 2000;
/// Peaks listed per table in `report.json`.
const REPORT_PEAKS: usize = 20;

/// Everything a run produced, in memory as well as on disk.
#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub manifest: RunManifest,
    /// Peak tables keyed by track (`""`, `"window2/"`, `"control/"`, ...).
    pub peak_tables: Vec<(String, PeakTable)>,
    pub histogram: Option<GapHistogram>,
    pub spikes: Option<SpikeReport>,
    pub metrics: BTreeMap<String, f64>,
}

impl ExperimentRun {
    pub fn table(&self, track: &str) -> Option<&PeakTable> {
        self.peak_tables.iter().find(|(k, _)| k == track).map(|(_, t)| t)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    execute(cfg, &[]).map(|r| r.manifest)
}

/// Runs the experiment; `inputs` (such as the config file) are digested
/// into the manifest.
pub fn execute(cfg: &ExperimentConfig, inputs: &[PathBuf]) -> Result<ExperimentRun> {
    cfg.validate()?;
    let root = cfg.out_dir.clone();
    std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    for stale in [FAILURE_FILE, manifest::MANIFEST_FILE] {
        let p = root.join(stale);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    let input_digests = inputs
        .iter()
        .map(|p| FileDigest::of(Path::new(""), p))
        .collect::<Result<Vec<_>>>()?;

    let mut run = Runner::new(cfg);
    let outcome = match cfg.experiment {
        ExperimentId::Hist1 => run.hist1(),
        ExperimentId::Hist2 => run.hist2(),
        ExperimentId::ClassicalTable1 => run.classical_table1(),
        ExperimentId::GeneralizedTable2 => run.generalized_table2(),
        ExperimentId::TranslationWindows => run.translation_windows(),
        ExperimentId::PoissonControl => run.poisson_control(),
        ExperimentId::Seq1Run => run.seq_run(ControlDensity::Seq1),
        ExperimentId::Seq2Run => run.seq_run(ControlDensity::Seq2),
    }
    .and_then(|()| run.stage("report", |r| r.write_report()));

    if let Err(e) = outcome {
        run.flag_failure(&e);
        return Err(e);
    }
    run.finish(input_digests)
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    error: String,
    partial_outputs: &'a [PathBuf],
}

#[derive(Serialize)]
struct Report<'a> {
    experiment: ExperimentId,
    metrics: &'a BTreeMap<String, f64>,
    checks: &'a [CheckResult],
    top_peaks: BTreeMap<&'a str, Vec<&'a crate::peaks::Peak>>,
    spikes: Option<Vec<u64>>,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    exec: Exec,
    root: PathBuf,
    prefix: String,
    outputs: Vec<PathBuf>,
    stages: Vec<StageTiming>,
    truncation: Vec<TruncationRecord>,
    checks: Vec<CheckResult>,
    metrics: BTreeMap<String, f64>,
    tables: Vec<(String, PeakTable)>,
    histogram: Option<GapHistogram>,
    spikes: Option<SpikeReport>,
}

fn fmt_wavelength(w: f64) -> String {
    let s = format!("{w:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Runner {
            cfg,
            exec: cfg.exec(),
            root: cfg.out_dir.clone(),
            prefix: String::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
            truncation: Vec::new(),
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            tables: Vec::new(),
            histogram: None,
            spikes: None,
        }
    }

    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self).map_err(|e| Error::Stage {
            stage: name,
            source: Box::new(e),
        });
        self.stages.push(StageTiming {
            stage: format!("{}{name}", self.prefix),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Registers an output file under the current track prefix.
    fn file(&mut self, name: &str) -> Result<PathBuf> {
        let rel = PathBuf::from(format!("{}{name}", self.prefix));
        let full = self.root.join(&rel);
        if let Some(dir) = full.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        self.outputs.push(rel);
        Ok(full)
    }

    /// A CSV and its JSON sidecar.
    fn csv_pair(&mut self, name: &str) -> Result<PathBuf> {
        let csv = self.file(name)?;
        self.file(&Path::new(name).with_extension("json").to_string_lossy())?;
        Ok(csv)
    }

    fn chart(&mut self, name: &str, series: &[(f64, f64)], style: &ChartStyle) -> Result<()> {
        if !self.cfg.svg {
            return Ok(());
        }
        let text = emit_svg_chart(series, style)?;
        let path = self.file(name)?;
        io::write_text(&path, &text)
    }

    fn check(&mut self, name: String, passed: bool, detail: String) {
        self.checks.push(CheckResult { name, passed, detail });
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(format!("{}{key}", self.prefix), value);
    }

    fn save_sequence(&mut self, seq: &IntegerSequence) -> Result<()> {
        self.stage("sequence", |r| {
            let path = r.csv_pair("sequence.csv")?;
            seq.save(&path)
        })
    }

    fn save_signal(&mut self, signal: &Signal, title: &str) -> Result<()> {
        let path = self.csv_pair("signal.csv")?;
        signal.save(&path, self.cfg.signal_rows)?;
        let head: Vec<(f64, f64)> = (0..signal.len().min(SIGNAL_CHART_POINTS))
            .map(|i| (signal.grid.point(i), signal.amplitudes[i]))
            .collect();
        self.chart("signal.svg", &head, &ChartStyle::new(ChartKind::Line, title, "t", "amplitude"))
    }

    fn spectrum_and_peaks(&mut self, signal: &Signal, log_chart: bool) -> Result<(Spectrum, PeakTable)> {
        let spectrum = self.stage("spectrum", |r| {
            let sp = magnitude_spectrum(signal, r.cfg.spectrum)?;
            let path = r.csv_pair("spectrum.csv")?;
            sp.save(&path, r.cfg.spectrum_rows)?;
            let series: Vec<(f64, f64)> = (1..sp.len())
                .map(|k| (sp.frequency(k as f64), sp.magnitudes[k]))
                .collect();
            let series = envelope(&series, SPECTRUM_CHART_POINTS);
            let style = ChartStyle::new(ChartKind::Line, "Magnitude spectrum", "frequency (cycles per unit)", "|X|");
            r.chart("spectrum.svg", &series, &style)?;
            if log_chart {
                r.chart("spectrum_logx.svg", &series, &style.log_x())?;
            }
            Ok(sp)
        })?;
        let table = self.stage("peaks", |r| {
            let t = detect_peaks(&spectrum, &r.cfg.peaks)?;
            let path = r.csv_pair("peaks.csv")?;
            t.save(&path)?;
            Ok(t)
        })?;
        self.tables.push((self.prefix.clone(), table.clone()));
        Ok((spectrum, table))
    }

    /// Unit amplitudes on the sequence as a sampling lattice.
    fn generalized_track(&mut self, seq: &IntegerSequence, log_chart: bool) -> Result<(Spectrum, PeakTable)> {
        self.save_sequence(seq)?;
        let signal = self.stage("signal", |r| {
            let lattice = make_lattice(&seq.as_f64(), r.cfg.scheme)?;
            let min_speed = lattice.speeds().iter().copied().fold(f64::INFINITY, f64::min);
            if r.cfg.dt > min_speed {
                return Err(Error::InvalidParam(format!(
                    "dt = {} exceeds the smallest sample spacing {min_speed}; the spectrum would alias",
                    r.cfg.dt
                )));
            }
            let pts = lattice.points();
            let grid = UniformGrid::covering(pts[0], pts[pts.len() - 1], r.cfg.dt)?;
            let amps = vec![1.0; lattice.len()];
            let s = reconstruct_generalized(&lattice, &amps, grid, &r.cfg.kernel()?, r.exec)?;
            if let Provenance::Generalized {
                truncation_error_estimate: Some(e),
                ..
            } = s.provenance
            {
                let signal = format!("{}signal.csv", r.prefix);
                r.truncation.push(TruncationRecord {
                    signal,
                    kind: "estimate".into(),
                    value: e,
                });
            }
            r.save_signal(&s, &format!("Generalized sampling signal: {}", seq.label()))?;
            Ok(s)
        })?;
        self.spectrum_and_peaks(&signal, log_chart)
    }

    /// Indicator amplitudes on the integer lattice from 1 through the last
    /// sequence element.
    fn classical_track(&mut self, seq: &IntegerSequence) -> Result<(Spectrum, PeakTable)> {
        self.save_sequence(seq)?;
        let signal = self.stage("signal", |r| {
            let params = ClassicalBandParams::new(r.cfg.omega_max)?;
            let nyquist = 1.0 / (2.0 * params.omega_max);
            if r.cfg.dt > nyquist {
                return Err(Error::InvalidParam(format!(
                    "dt = {} exceeds the Nyquist spacing {nyquist}",
                    r.cfg.dt
                )));
            }
            let last = *seq.values().last().expect("validated nonempty");
            let points: Vec<f64> = (1..=last).map(|n| n as f64).collect();
            let amps: Vec<f64> = (1..=last).map(|n| if seq.contains(n) { 1.0 } else { 0.0 }).collect();
            let grid = UniformGrid::covering(1.0, last as f64, r.cfg.dt)?;
            let s = reconstruct_classical(&points, &amps, params, grid, r.cfg.classical_radius, r.exec)?;
            if let Provenance::Classical { error_bound, .. } = s.provenance {
                let signal = format!("{}signal.csv", r.prefix);
                r.truncation.push(TruncationRecord {
                    signal,
                    kind: "bound".into(),
                    value: error_bound,
                });
            }
            r.save_signal(&s, &format!("Classical sampling signal: {}", seq.label()))?;
            Ok(s)
        })?;
        self.spectrum_and_peaks(&signal, false)
    }

    fn wavelength_checks(&mut self, table: &PeakTable) {
        let (tol, top) = (self.cfg.check_tolerance, self.cfg.check_top);
        for &w in &self.cfg.check_wavelengths.clone() {
            let name = format!("{}wavelength {} in top {top}", self.prefix, fmt_wavelength(w));
            match table.find(w, tol, top) {
                Some((rank, p)) => self.check(name, true, format!("rank {rank}, wavelength {}", p.wavelength)),
                None => {
                    let nearest = table
                        .peaks
                        .iter()
                        .enumerate()
                        .min_by(|a, b| (a.1.wavelength / w - 1.0).abs().total_cmp(&(b.1.wavelength / w - 1.0).abs()))
                        .map(|(i, p)| format!("closest: rank {} at {}", i + 1, p.wavelength))
                        .unwrap_or_else(|| "table is empty".into());
                    self.check(name, false, format!("no peak within {tol} relative; {nearest}"));
                }
            }
        }
    }

    fn hist1(&mut self) -> Result<()> {
        let seq = self.stage("generate", |r| primes_first(r.cfg.count))?;
        self.save_sequence(&seq)?;
        let hist = self.stage("histogram", |r| {
            let h = consecutive_gaps(&seq)?;
            let path = r.file("histogram.csv")?;
            h.save(&path)?;
            let bars: Vec<(f64, f64)> = h.counts.iter().map(|(&d, &c)| (d as f64, c as f64)).collect();
            r.chart(
                "histogram.svg",
                &bars,
                &ChartStyle::new(ChartKind::Bar, "Gaps between consecutive primes", "gap", "count"),
            )?;
            Ok(h)
        })?;
        let champion = hist.argmax();
        if let Some(c) = champion {
            self.metric("jumping_champion", c as f64);
        }
        if let Some(want) = self.cfg.check_champion {
            self.check(
                "most frequent consecutive gap".into(),
                champion == Some(want),
                format!("expected {want}, found {champion:?}"),
            );
        }
        self.histogram = Some(hist);
        Ok(())
    }

    fn hist2(&mut self) -> Result<()> {
        let seq = self.stage("generate", |r| primes_window(2, r.cfg.count))?;
        self.save_sequence(&seq)?;
        let hist = self.stage("histogram", |r| {
            let h = pair_diff_histogram(&seq, r.cfg.max_diff, r.exec)?;
            let path = r.file("histogram.csv")?;
            h.save(&path)?;
            let bars: Vec<(f64, f64)> = h.counts.iter().map(|(&d, &c)| (d as f64, c as f64)).collect();
            r.chart(
                "histogram.svg",
                &bars,
                &ChartStyle::new(ChartKind::Bar, "Differences between all pairs of primes", "difference", "count"),
            )?;
            Ok(h)
        })?;
        let spikes = self.stage("spikes", |r| {
            let s = find_spikes(&hist, r.cfg.spike_window, r.cfg.spike_ratio)?;
            let path = r.file("spikes.json")?;
            s.save(&path)?;
            Ok(s)
        })?;
        let found = spikes.differences();
        for &d in &self.cfg.check_spikes.clone() {
            self.check(
                format!("spike at difference {d}"),
                found.contains(&d),
                format!("{} spikes found", found.len()),
            );
        }
        self.histogram = Some(hist);
        self.spikes = Some(spikes);
        Ok(())
    }

    fn classical_table1(&mut self) -> Result<()> {
        let seq = self.stage("generate", |r| primes_first(r.cfg.count))?;
        let (_, table) = self.classical_track(&seq)?;
        self.wavelength_checks(&table);
        Ok(())
    }

    fn generalized_table2(&mut self) -> Result<()> {
        let seq = self.stage("generate", |r| primes_first(r.cfg.count))?;
        let (spectrum, table) = self.generalized_track(&seq, false)?;
        let w = self.cfg.control_wavelength;
        if let Some(p) = max_prominence_near(&spectrum, w, self.cfg.check_tolerance) {
            self.metric(&format!("prominence_near_{}", fmt_wavelength(w)), p);
        }
        self.wavelength_checks(&table);
        Ok(())
    }

    fn translation_windows(&mut self) -> Result<()> {
        let mut tables = Vec::new();
        for (i, &(lo, hi)) in self.cfg.windows.clone().iter().enumerate() {
            self.prefix = format!("window{}/", i + 1);
            let seq = self.stage("generate", |_| primes_window(lo, hi))?;
            let (_, table) = self.generalized_track(&seq, false)?;
            self.wavelength_checks(&table);
            tables.push(table);
        }
        self.prefix.clear();

        let tol = self.cfg.check_tolerance;
        let reports: Vec<PeakMatchReport> = tables[1..]
            .iter()
            .map(|t| compare_peak_tables(&tables[0], t, tol))
            .collect();
        self.stage("compare", |r| {
            let path = r.file("matches.json")?;
            io::write_json(&path, &reports)
        })?;
        for &w in &self.cfg.check_wavelengths.clone() {
            let matched = reports.iter().all(|rep| rep.matches_wavelength(&tables[0], w, tol));
            self.check(
                format!("wavelength {} matched across all windows", fmt_wavelength(w)),
                matched,
                format!("{} windows compared against window 1", reports.len()),
            );
        }
        Ok(())
    }

    fn poisson_control(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let seq = self.stage("generate", |_| {
            control_sample(cfg.count, cfg.seed, cfg.control_mode, ControlDensity::Primes)
        })?;
        let (spectrum, _) = self.generalized_track(&seq, false)?;
        let (w, tol) = (cfg.control_wavelength, cfg.check_tolerance);
        let control = max_prominence_near(&spectrum, w, tol).unwrap_or(0.0);

        let reference = match cfg.control_reference {
            Some(p) => p,
            None => {
                self.prefix = "reference/".into();
                let primes = self.stage("generate", |_| primes_first(cfg.count))?;
                let (sp, _) = self.generalized_track(&primes, false)?;
                self.prefix.clear();
                max_prominence_near(&sp, w, tol).ok_or_else(|| Error::Stage {
                    stage: "reference",
                    source: Box::new(Error::InvalidParam(format!(
                        "prime reference spectrum has no peak near wavelength {w}"
                    ))),
                })?
            }
        };
        self.metric("control_prominence", control);
        self.metric("reference_prominence", reference);
        self.metric("prominence_ratio", control / reference);
        self.check(
            format!(
                "no control peak near wavelength {} reaches {} of the prime peak",
                fmt_wavelength(w),
                cfg.control_threshold
            ),
            control < cfg.control_threshold * reference,
            format!("control {control:.3}, primes {reference:.3}, ratio {:.4}", control / reference),
        );
        Ok(())
    }

    fn seq_run(&mut self, density: ControlDensity) -> Result<()> {
        let cfg = self.cfg;
        let seq = self.stage("generate", |_| match density {
            ControlDensity::Seq1 => seq1_up_to(cfg.seq1_bound),
            _ => seq2_first(cfg.count),
        })?;
        self.generalized_track(&seq, true)?;
        self.prefix = "control/".into();
        let n = seq.len() as u64;
        let control = self.stage("generate", |_| control_sample(n, cfg.seed, ControlMode::Cramer, density))?;
        self.generalized_track(&control, true)?;
        self.prefix.clear();
        Ok(())
    }

    fn write_report(&mut self) -> Result<()> {
        let path = self.file("report.json")?;
        let top_peaks = self
            .tables
            .iter()
            .map(|(k, t)| (k.as_str(), t.peaks.iter().take(REPORT_PEAKS).collect()))
            .collect();
        io::write_json(
            &path,
            &Report {
                experiment: self.cfg.experiment,
                metrics: &self.metrics,
                checks: &self.checks,
                top_peaks,
                spikes: self.spikes.as_ref().map(|s| s.differences()),
            },
        )
    }

    fn flag_failure(&self, e: &Error) {
        let path = self.root.join(FAILURE_FILE);
        // best effort: the original error is what the caller reports
        let _ = io::write_json(
            &path,
            &FailureRecord {
                error: e.to_string(),
                partial_outputs: &self.outputs,
            },
        );
    }

    fn finish(self, inputs: Vec<FileDigest>) -> Result<ExperimentRun> {
        let outputs = self
            .outputs
            .iter()
            .map(|rel| FileDigest::of(&self.root, rel))
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: TOOL.into(),
            config: self.cfg.clone(),
            threads: crate::par::thread_count(self.exec),
            inputs,
            outputs,
            stages: self.stages,
            truncation_errors: self.truncation,
            checks: self.checks,
        };
        io::write_json(&self.root.join(manifest::MANIFEST_FILE), &manifest)?;
        Ok(ExperimentRun {
            manifest,
            peak_tables: self.tables,
            histogram: self.histogram,
            spikes: self.spikes,
            metrics: self.metrics,
        })
    }
}

#[cfg(test)]
mod tests;
