use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use primesig::classical::{reconstruct_classical, ClassicalBandParams};
use primesig::gap_histogram::{consecutive_gaps, find_spikes, pair_diff_histogram};
use primesig::generalized::{make_lattice, reconstruct_generalized};
use primesig::io;
use primesig::peaks::detect_peaks;
use primesig::pipeline::svg::{emit_svg_chart, ChartKind, ChartStyle};
use primesig::pipeline::{execute, verify_manifest, ExperimentConfig, ExperimentId};
use primesig::sequences::{
    control_sample, primes_first, primes_window, primorials, seq1_up_to, seq2_first, ControlDensity,
    IntegerSequence,
};
use primesig::signal::{Signal, UniformGrid};
use primesig::spectrum::{magnitude_spectrum, Spectrum};

const EXIT_VALIDATION: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(name = "primesig", version, about = "Sampling-theory signals from integer sequences and their spectra")]
struct Cli {
    /// Flat `key = value` config; its keys override the experiment preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Grid spacing of reconstructed signals.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Nearest sample points per generalized kernel sum, or `none`.
    #[arg(long, global = true)]
    truncation: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeqKind {
    Primes,
    PrimesWindow,
    Primorials,
    Seq1,
    Seq2,
    Cramer,
}

#[derive(Clone, Copy, ValueEnum)]
enum HistMode {
    Consecutive,
    AllPairs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Generalized,
    Classical,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sequence into `sequence.csv`.
    Seq {
        kind: SeqKind,
        /// Element count (primes, seq2, cramer) or largest k (primorials).
        #[arg(long, default_value_t = 50_000)]
        count: u64,
        /// Exclusive bound for seq1.
        #[arg(long, default_value_t = 209_760)]
        bound: u64,
        /// 1-based first index for primes-window.
        #[arg(long, default_value_t = 1)]
        lo: u64,
    },
    /// Gap or pair-difference histogram of a sequence CSV.
    Hist {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = HistMode::Consecutive)]
        mode: HistMode,
    },
    /// Reconstruct a signal from a sequence CSV.
    Signal {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Generalized)]
        method: Method,
    },
    /// Magnitude spectrum of a signal CSV.
    Spectrum { input: PathBuf },
    /// Ranked peaks of a spectrum CSV.
    Peaks { input: PathBuf },
    /// Run a complete experiment.
    Experiment {
        id: String,
        /// Exit with status 4 when an acceptance check fails.
        #[arg(long)]
        check: bool,
        /// Print the resolved config in file format and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Re-hash the outputs listed in a manifest.
    Verify { manifest: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .chain()
                .find_map(|c| c.downcast_ref::<primesig::Error>())
                .is_none_or(primesig::Error::is_validation);
            ExitCode::from(if validation { EXIT_VALIDATION } else { EXIT_STAGE })
        }
    }
}

/// Preset for `id` overlaid with the config file and command-line flags.
fn resolve(cli: &Cli, id: ExperimentId) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::preset(id);
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)?;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = cli.dt {
        cfg.set("dt", &dt.to_string())?;
    }
    if let Some(w) = &cli.truncation {
        cfg.set("truncation", w)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Config for single-step subcommands: the `--config` file's own
/// experiment preset when given, otherwise the generalized-table preset.
fn step_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let id = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?.experiment,
        None => ExperimentId::GeneralizedTable2,
    };
    let mut cfg = resolve(cli, id)?;
    if cli.out.is_none() {
        cfg.out_dir = PathBuf::from(".");
    }
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(primesig::Error::InvalidParam("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Experiment { id, check, print_config } => {
            let id: ExperimentId = id.parse()?;
            let cfg = resolve(&cli, id)?;
            if *print_config {
                print!("{}", cfg.to_text());
                return Ok(0);
            }
            let inputs: Vec<PathBuf> = cli.config.iter().cloned().collect();
            let run = execute(&cfg, &inputs)?;
            for s in &run.manifest.stages {
                println!("stage {:<24} {:>9.3} s", s.stage, s.seconds);
            }
            for c in &run.manifest.checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("manifest: {}", cfg.out_dir.join("manifest.json").display());
            Ok(if *check && !run.manifest.checks_passed() { EXIT_CHECK } else { 0 })
        }
        Command::Verify { manifest } => {
            let report = verify_manifest(manifest)?;
            for p in &report.missing {
                println!("MISSING {}", p.display());
            }
            for p in &report.mismatched {
                println!("CHANGED {}", p.display());
            }
            println!("{} outputs checked", report.checked);
            Ok(if report.ok() { 0 } else { EXIT_CHECK })
        }
        Command::Seq { kind, count, bound, lo } => {
            let cfg = step_config(&cli)?;
            let seq = match kind {
                SeqKind::Primorials => {
                    let table = primorials(usize::try_from(*count)?)?;
                    let path = cfg.out_dir.join("primorials.json");
                    io::write_json(&path, &table)?;
                    println!("wrote {}", path.display());
                    return Ok(0);
                }
                SeqKind::Primes => primes_first(*count)?,
                SeqKind::PrimesWindow => primes_window(*lo, lo + count - 1)?,
                SeqKind::Seq1 => seq1_up_to(*bound)?,
                SeqKind::Seq2 => seq2_first(*count)?,
                SeqKind::Cramer => control_sample(*count, cfg.seed, cfg.control_mode, ControlDensity::Primes)?,
            };
            let path = cfg.out_dir.join("sequence.csv");
            seq.save(&path)?;
            println!("wrote {} ({} values)", path.display(), seq.len());
            Ok(0)
        }
        Command::Hist { input, mode } => {
            let cfg = step_config(&cli)?;
            let seq = IntegerSequence::load(input)?;
            let hist = match mode {
                HistMode::Consecutive => consecutive_gaps(&seq)?,
                HistMode::AllPairs => pair_diff_histogram(&seq, cfg.max_diff, cfg.exec())?,
            };
            hist.save(&cfg.out_dir.join("histogram.csv"))?;
            let bars: Vec<(f64, f64)> = hist.counts.iter().map(|(&d, &c)| (d as f64, c as f64)).collect();
            let svg = emit_svg_chart(&bars, &ChartStyle::new(ChartKind::Bar, &seq.label(), "difference", "count"))?;
            io::write_text(&cfg.out_dir.join("histogram.svg"), &svg)?;
            let spikes = find_spikes(&hist, cfg.spike_window, cfg.spike_ratio)?;
            spikes.save(&cfg.out_dir.join("spikes.json"))?;
            println!("most frequent difference: {:?}", hist.argmax());
            println!("spikes: {:?}", spikes.differences());
            Ok(0)
        }
        Command::Signal { input, method } => {
            let cfg = step_config(&cli)?;
            let seq = IntegerSequence::load(input)?;
            let signal = match method {
                Method::Generalized => {
                    let lattice = make_lattice(&seq.as_f64(), cfg.scheme)?;
                    let pts = lattice.points();
                    let grid = UniformGrid::covering(pts[0], pts[pts.len() - 1], cfg.dt)?;
                    let amps = vec![1.0; lattice.len()];
                    reconstruct_generalized(&lattice, &amps, grid, &cfg.kernel()?, cfg.exec())?
                }
                Method::Classical => {
                    let last = *seq.values().last().context("empty sequence")?;
                    let points: Vec<f64> = (1..=last).map(|n| n as f64).collect();
                    let amps: Vec<f64> = (1..=last).map(|n| if seq.contains(n) { 1.0 } else { 0.0 }).collect();
                    let grid = UniformGrid::covering(1.0, last as f64, cfg.dt)?;
                    let params = ClassicalBandParams::new(cfg.omega_max)?;
                    reconstruct_classical(&points, &amps, params, grid, cfg.classical_radius, cfg.exec())?
                }
            };
            write_signal(&signal, &cfg.out_dir.join("signal.csv"))
        }
        Command::Spectrum { input } => {
            let cfg = step_config(&cli)?;
            let signal = Signal::load(input)?;
            let sp = magnitude_spectrum(&signal, cfg.spectrum)?;
            let path = cfg.out_dir.join("spectrum.csv");
            sp.save(&path, 1)?;
            println!("wrote {} ({} bins, step {} cycles/unit)", path.display(), sp.len(), sp.bin_frequency_step);
            Ok(0)
        }
        Command::Peaks { input } => {
            let cfg = step_config(&cli)?;
            let sp = Spectrum::load(input)?;
            let table = detect_peaks(&sp, &cfg.peaks)?;
            table.save(&cfg.out_dir.join("peaks.csv"))?;
            for (i, p) in table.peaks.iter().take(20).enumerate() {
                println!("{:>3}  wavelength {:>12.5}  prominence {:.4}", i + 1, p.wavelength, p.prominence);
            }
            Ok(0)
        }
    }
}

fn write_signal(signal: &Signal, path: &Path) -> anyhow::Result<u8> {
    if signal.is_empty() {
        bail!("empty signal");
    }
    signal.save(path, 1)?;
    println!("wrote {} ({} samples)", path.display(), signal.len());
    Ok(0)
}
