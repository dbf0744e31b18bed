//! Experiment configuration and its flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Lists are comma separated, ranges are written `lo-hi`, and wavelengths
//! may be fractions such as `30/7`. Optional numbers accept `none`.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generalized::{KernelEvalConfig, SpeedScheme};
use crate::peaks::PeakParams;
use crate::sequences::ControlMode;
use crate::spectrum::{SpectrumOptions, WindowKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    Hist1,
    Hist2,
    ClassicalTable1,
    GeneralizedTable2,
    TranslationWindows,
    PoissonControl,
    Seq1Run,
    Seq2Run,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Hist1,
        ExperimentId::Hist2,
        ExperimentId::ClassicalTable1,
        ExperimentId::GeneralizedTable2,
        ExperimentId::TranslationWindows,
        ExperimentId::PoissonControl,
        ExperimentId::Seq1Run,
        ExperimentId::Seq2Run,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Hist1 => "Hist1",
            ExperimentId::Hist2 => "Hist2",
            ExperimentId::ClassicalTable1 => "ClassicalTable1",
            ExperimentId::GeneralizedTable2 => "GeneralizedTable2",
            ExperimentId::TranslationWindows => "TranslationWindows",
            ExperimentId::PoissonControl => "PoissonControl",
            ExperimentId::Seq1Run => "Seq1Run",
            ExperimentId::Seq2Run => "Seq2Run",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', '-'], "");
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::Parse(format!("unknown experiment `{s}`")))
    }
}

/// Fully resolved parameters of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub parallel: bool,

    /// Number of sequence elements (primes, SEQ2 terms, control size).
    pub count: u64,
    /// 1-based inclusive prime-index ranges for `TranslationWindows`.
    pub windows: Vec<(u64, u64)>,
    /// Exclusive upper bound for SEQ1.
    pub seq1_bound: u64,
    pub control_mode: ControlMode,

    pub dt: f64,
    pub scheme: SpeedScheme,
    pub truncation: Option<usize>,
    pub singularity_epsilon: f64,
    pub omega_max: f64,
    pub classical_radius: Option<f64>,

    pub spectrum: SpectrumOptions,
    pub peaks: PeakParams,

    pub max_diff: u64,
    pub spike_window: u64,
    pub spike_ratio: f64,

    pub check_wavelengths: Vec<f64>,
    pub check_spikes: Vec<u64>,
    pub check_champion: Option<u64>,
    pub check_tolerance: f64,
    pub check_top: usize,
    /// Wavelength whose prominence the Poisson control compares.
    pub control_wavelength: f64,
    pub control_threshold: f64,
    /// Prime-run prominence to compare against; computed when `None`.
    pub control_reference: Option<f64>,

    /// Grid-index step between rows of the signal CSV.
    pub signal_rows: usize,
    /// Bin step between rows of the spectrum CSV.
    pub spectrum_rows: usize,
    pub svg: bool,
}

impl ExperimentConfig {
    /// Defaults for `id`, matching the shipped preset files.
    pub fn preset(id: ExperimentId) -> Self {
        let mut c = ExperimentConfig {
            experiment: id,
            out_dir: PathBuf::from("out").join(id.name()),
            seed: 1,
            parallel: cfg!(feature = "parallel"),
            count: 50_000,
            windows: Vec::new(),
            seq1_bound: 209_760,
            control_mode: ControlMode::Cramer,
            dt: 0.25,
            scheme: SpeedScheme::Centered,
            truncation: Some(512),
            singularity_epsilon: KernelEvalConfig::default().singularity_epsilon,
            omega_max: crate::classical::ClassicalBandParams::INTEGER_LATTICE.omega_max,
            classical_radius: Some(5000.0),
            spectrum: SpectrumOptions::default(),
            peaks: PeakParams::default(),
            max_diff: 2400,
            spike_window: 20,
            spike_ratio: 1.2,
            check_wavelengths: Vec::new(),
            check_spikes: Vec::new(),
            check_champion: None,
            check_tolerance: 0.005,
            check_top: 50,
            control_wavelength: 30.0,
            control_threshold: 0.5,
            control_reference: None,
            signal_rows: 1,
            spectrum_rows: 1,
            svg: true,
        };
        match id {
            ExperimentId::Hist1 => c.check_champion = Some(6),
            ExperimentId::Hist2 => c.check_spikes = vec![6, 30, 210, 2310],
            ExperimentId::ClassicalTable1 => {
                c.check_wavelengths = vec![20.0, 12.0, 20.0 / 3.0, 6.0, 5.0, 4.0];
            }
            ExperimentId::GeneralizedTable2 => {
                c.check_wavelengths = vec![
                    210.0,
                    30.0,
                    22.0,
                    14.0,
                    10.0,
                    6.0,
                    30.0 / 7.0,
                    3.0,
                    2.5,
                    30.0 / 13.0,
                ];
            }
            ExperimentId::TranslationWindows => {
                c.windows = vec![(1, 10_000), (10_001, 20_000), (20_001, 30_000)];
                c.check_wavelengths = vec![6.0, 30.0];
            }
            ExperimentId::PoissonControl | ExperimentId::Seq1Run => {}
            ExperimentId::Seq2Run => c.count = 5871,
        }
        if !matches!(id, ExperimentId::Hist1 | ExperimentId::Hist2) {
            // full-resolution signal and spectrum CSVs run to ~200 MB
            c.signal_rows = 16;
            c.spectrum_rows = 16;
        }
        c
    }

    /// Preset for the experiment named in `text`, overlaid with its keys.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let id = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .ok_or_else(|| Error::Parse("config lacks an `experiment` key".into()))?
            .1
            .parse()?;
        let mut cfg = Self::preset(id);
        cfg.apply_pairs(&pairs)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key = value` lines on top of this config. An `experiment`
    /// key must agree with the current one.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        self.apply_pairs(&parse_pairs(text)?)
    }

    fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "experiment" => {
                let id: ExperimentId = v.parse()?;
                if id != self.experiment {
                    return Err(Error::Parse(format!(
                        "config is for {id}, but {} was requested",
                        self.experiment
                    )));
                }
            }
            "out_dir" => self.out_dir = PathBuf::from(v),
            "seed" => self.seed = num(key, v)?,
            "parallel" => self.parallel = flag(key, v)?,
            "count" => self.count = num(key, v)?,
            "windows" => self.windows = list(v, |s| range(key, s))?,
            "seq1_bound" => self.seq1_bound = num(key, v)?,
            "control_mode" => {
                self.control_mode = match v {
                    "cramer" => ControlMode::Cramer,
                    "geometric_gaps" => ControlMode::GeometricGaps,
                    _ => return Err(bad(key, v)),
                }
            }
            "dt" => self.dt = num(key, v)?,
            "scheme" => {
                self.scheme = match v {
                    "centered" => SpeedScheme::Centered,
                    "forward" => SpeedScheme::Forward,
                    _ => return Err(bad(key, v)),
                }
            }
            "truncation" => self.truncation = opt(key, v)?,
            "singularity_epsilon" => self.singularity_epsilon = num(key, v)?,
            "omega_max" => self.omega_max = num(key, v)?,
            "classical_radius" => self.classical_radius = opt(key, v)?,
            "window" => {
                self.spectrum.window = match v {
                    "rectangular" => WindowKind::Rectangular,
                    "hann" => WindowKind::Hann,
                    _ => return Err(bad(key, v)),
                }
            }
            "pad_to_pow2" => self.spectrum.pad_to_pow2 = flag(key, v)?,
            "subtract_mean" => self.spectrum.subtract_mean = flag(key, v)?,
            "min_prominence_ratio" => self.peaks.min_prominence_ratio = num(key, v)?,
            "min_bin" => self.peaks.min_bin = num(key, v)?,
            "merge_radius_bins" => self.peaks.merge_radius_bins = num(key, v)?,
            "baseline_halfwidth" => self.peaks.baseline_halfwidth = num(key, v)?,
            "whitening_exponent" => self.peaks.whitening_exponent = num(key, v)?,
            "max_peaks" => self.peaks.max_peaks = num(key, v)?,
            "noise_floor_ratio" => self.peaks.noise_floor_ratio = num(key, v)?,
            "max_diff" => self.max_diff = num(key, v)?,
            "spike_window" => self.spike_window = num(key, v)?,
            "spike_ratio" => self.spike_ratio = num(key, v)?,
            "check_wavelengths" => self.check_wavelengths = list(v, |s| fraction(key, s))?,
            "check_spikes" => self.check_spikes = list(v, |s| num(key, s))?,
            "check_champion" => self.check_champion = opt(key, v)?,
            "check_tolerance" => self.check_tolerance = num(key, v)?,
            "check_top" => self.check_top = num(key, v)?,
            "control_wavelength" => self.control_wavelength = fraction(key, v)?,
            "control_threshold" => self.control_threshold = num(key, v)?,
            "control_reference" => self.control_reference = opt(key, v)?,
            "signal_rows" => self.signal_rows = num(key, v)?,
            "spectrum_rows" => self.spectrum_rows = num(key, v)?,
            "svg" => self.svg = flag(key, v)?,
            _ => return Err(Error::Parse(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelEvalConfig> {
        KernelEvalConfig::new(self.truncation, self.singularity_epsilon)
    }

    pub fn exec(&self) -> crate::par::Exec {
        if self.parallel {
            crate::par::Exec::Parallel
        } else {
            crate::par::Exec::Sequential
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParam(m));
        if self.count < 2 {
            return fail(format!("count must be at least 2, got {}", self.count));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        self.kernel()?;
        self.peaks.validate()?;
        if !(self.omega_max > 0.0) {
            return fail("omega_max must be positive".into());
        }
        if matches!(self.classical_radius, Some(r) if !(r > 0.0)) {
            return fail("classical_radius must be positive".into());
        }
        if self.spike_window < 2 || !(self.spike_ratio > 1.0) {
            return fail("spike detection needs spike_window >= 2 and spike_ratio > 1".into());
        }
        if self.max_diff == 0 {
            return fail("max_diff must be positive".into());
        }
        if self.check_wavelengths.iter().any(|w| !(*w > 0.0)) {
            return fail("check wavelengths must be positive".into());
        }
        if !(self.check_tolerance >= 0.0) || self.check_top == 0 {
            return fail("check_tolerance must be non-negative and check_top positive".into());
        }
        if self.experiment == ExperimentId::TranslationWindows && self.windows.is_empty() {
            return fail("TranslationWindows needs at least one window".into());
        }
        if let Some(&(lo, hi)) = self.windows.iter().find(|(lo, hi)| *lo == 0 || hi <= lo) {
            return fail(format!("window {lo}-{hi} is not a valid 1-based index range"));
        }
        if self.signal_rows == 0 || self.spectrum_rows == 0 {
            return fail("row strides must be positive".into());
        }
        Ok(())
    }

    /// The resolved config in the same text format, one key per line.
    pub fn to_text(&self) -> String {
        let opt_s = |o: Option<String>| o.unwrap_or_else(|| "none".into());
        let join = |v: Vec<String>| v.join(", ");
        let lines: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("seed", self.seed.to_string()),
            ("parallel", self.parallel.to_string()),
            ("count", self.count.to_string()),
            (
                "windows",
                join(self.windows.iter().map(|(a, b)| format!("{a}-{b}")).collect()),
            ),
            ("seq1_bound", self.seq1_bound.to_string()),
            (
                "control_mode",
                match self.control_mode {
                    ControlMode::Cramer => "cramer",
                    ControlMode::GeometricGaps => "geometric_gaps",
                }
                .into(),
            ),
            ("dt", self.dt.to_string()),
            (
                "scheme",
                match self.scheme {
                    SpeedScheme::Forward => "forward",
                    _ => "centered",
                }
                .into(),
            ),
            ("truncation", opt_s(self.truncation.map(|w| w.to_string()))),
            ("singularity_epsilon", self.singularity_epsilon.to_string()),
            ("omega_max", self.omega_max.to_string()),
            ("classical_radius", opt_s(self.classical_radius.map(|r| r.to_string()))),
            (
                "window",
                match self.spectrum.window {
                    WindowKind::Rectangular => "rectangular",
                    WindowKind::Hann => "hann",
                }
                .into(),
            ),
            ("pad_to_pow2", self.spectrum.pad_to_pow2.to_string()),
            ("subtract_mean", self.spectrum.subtract_mean.to_string()),
            ("min_prominence_ratio", self.peaks.min_prominence_ratio.to_string()),
            ("min_bin", self.peaks.min_bin.to_string()),
            ("merge_radius_bins", self.peaks.merge_radius_bins.to_string()),
            ("baseline_halfwidth", self.peaks.baseline_halfwidth.to_string()),
            ("whitening_exponent", self.peaks.whitening_exponent.to_string()),
            ("max_peaks", self.peaks.max_peaks.to_string()),
            ("noise_floor_ratio", self.peaks.noise_floor_ratio.to_string()),
            ("max_diff", self.max_diff.to_string()),
            ("spike_window", self.spike_window.to_string()),
            ("spike_ratio", self.spike_ratio.to_string()),
            (
                "check_wavelengths",
                join(self.check_wavelengths.iter().map(|w| w.to_string()).collect()),
            ),
            (
                "check_spikes",
                join(self.check_spikes.iter().map(|d| d.to_string()).collect()),
            ),
            ("check_champion", opt_s(self.check_champion.map(|d| d.to_string()))),
            ("check_tolerance", self.check_tolerance.to_string()),
            ("check_top", self.check_top.to_string()),
            ("control_wavelength", self.control_wavelength.to_string()),
            ("control_threshold", self.control_threshold.to_string()),
            ("control_reference", opt_s(self.control_reference.map(|r| r.to_string()))),
            ("signal_rows", self.signal_rows.to_string()),
            ("spectrum_rows", self.spectrum_rows.to_string()),
            ("svg", self.svg.to_string()),
        ];
        lines
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn bad(key: &str, value: &str) -> Error {
    Error::Parse(format!("invalid value `{value}` for `{key}`"))
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad(key, v))
}

fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v)),
    }
}

fn fraction(key: &str, v: &str) -> Result<f64> {
    match v.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (num(key, a)?, num(key, b)?);
            if b == 0.0 {
                return Err(bad(key, v));
            }
            Ok(a / b)
        }
        None => num(key, v),
    }
}

fn range(key: &str, v: &str) -> Result<(u64, u64)> {
    let (a, b) = v.split_once('-').ok_or_else(|| bad(key, v))?;
    Ok((num(key, a)?, num(key, b)?))
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect()
}
