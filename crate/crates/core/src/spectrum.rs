//! Magnitude spectra of sampled signals.

use std::path::Path;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io;
use crate::signal::Signal;

pub const MIN_SIGNAL_LEN: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub window: WindowKind,
    pub pad_to_pow2: bool,
    pub subtract_mean: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            window: WindowKind::Rectangular,
            pad_to_pow2: true,
            subtract_mean: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// `|X_k|` for `k = 0..=M/2`.
    pub magnitudes: Vec<f64>,
    /// `1 / (M dt)`, cycles per abscissa unit.
    pub bin_frequency_step: f64,
    pub dt: f64,
    pub padded_len: usize,
    pub signal_len: usize,
    pub options: SpectrumOptions,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumSidecar {
    dt: f64,
    padded_len: usize,
    signal_len: usize,
    bin_frequency_step: f64,
    #[serde(flatten)]
    options: SpectrumOptions,
    row_stride: usize,
}

/// Mean removal, windowing and zero padding, in that order. The result has
/// the transform length.
pub fn prepare(amplitudes: &[f64], opts: &SpectrumOptions) -> Result<Vec<f64>> {
    let n = amplitudes.len();
    if n < MIN_SIGNAL_LEN {
        return Err(Error::Length {
            what: "spectrum input",
            needed: MIN_SIGNAL_LEN,
            got: n,
        });
    }
    let mean = if opts.subtract_mean {
        amplitudes.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let m = if opts.pad_to_pow2 { n.next_power_of_two() } else { n };
    let mut out = Vec::with_capacity(m);
    out.extend(amplitudes.iter().enumerate().map(|(i, a)| {
        let w = match opts.window {
            WindowKind::Rectangular => 1.0,
            WindowKind::Hann => {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()
            }
        };
        (a - mean) * w
    }));
    out.resize(m, 0.0);
    Ok(out)
}

/// Forward DFT `X_k = sum_i x_i exp(-2 pi i k / M)` over the full length.
pub fn dft(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Positive-frequency magnitude spectrum of a uniformly sampled signal.
pub fn magnitude_spectrum(signal: &Signal, opts: SpectrumOptions) -> Result<Spectrum> {
    let prepared = prepare(&signal.amplitudes, &opts)?;
    let m = prepared.len();
    let full = dft(&prepared);
    Ok(Spectrum {
        magnitudes: full[..=m / 2].iter().map(|c| c.norm()).collect(),
        bin_frequency_step: 1.0 / (m as f64 * signal.grid.spacing),
        dt: signal.grid.spacing,
        padded_len: m,
        signal_len: signal.len(),
        options: opts,
    })
}

/// `1 / frequency`, in abscissa units.
pub fn wavelength_of(frequency: f64) -> Result<f64> {
    if !(frequency > 0.0) {
        return Err(Error::ZeroFrequency);
    }
    Ok(1.0 / frequency)
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn frequency(&self, bin: f64) -> f64 {
        bin * self.bin_frequency_step
    }

    /// `None` for bin 0.
    pub fn wavelength(&self, bin: usize) -> Option<f64> {
        wavelength_of(self.frequency(bin as f64)).ok()
    }

    /// Writes `bin,frequency,wavelength,magnitude` for every `stride`-th bin
    /// plus the sidecar. Bin 0 has an empty wavelength field.
    pub fn save(&self, csv_path: &Path, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let rows = (0..self.len()).step_by(stride).map(|k| {
            vec![
                k.to_string(),
                self.frequency(k as f64).to_string(),
                self.wavelength(k).map(|w| w.to_string()).unwrap_or_default(),
                self.magnitudes[k].to_string(),
            ]
        });
        io::write_csv(csv_path, &["bin", "frequency", "wavelength", "magnitude"], rows)?;
        io::write_json(
            &io::sidecar_path(csv_path),
            &SpectrumSidecar {
                dt: self.dt,
                padded_len: self.padded_len,
                signal_len: self.signal_len,
                bin_frequency_step: self.bin_frequency_step,
                options: self.options,
                row_stride: stride,
            },
        )
    }

    /// Reads a spectrum written by [`Spectrum::save`] with stride 1.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let sidecar: SpectrumSidecar = io::read_json(&io::sidecar_path(csv_path))?;
        if sidecar.row_stride != 1 {
            return Err(Error::Parse(format!(
                "{} holds a decimated spectrum (stride {})",
                csv_path.display(),
                sidecar.row_stride
            )));
        }
        let records = io::read_csv(csv_path, &["bin", "frequency", "wavelength", "magnitude"])?;
        let mut magnitudes = Vec::with_capacity(records.len());
        for (k, r) in records.iter().enumerate() {
            if io::field::<usize>(r, 0)? != k {
                return Err(Error::Parse(format!("bin column out of order at row {k}")));
            }
            magnitudes.push(io::field::<f64>(r, 3)?);
        }
        Ok(Spectrum {
            magnitudes,
            bin_frequency_step: sidecar.bin_frequency_step,
            dt: sidecar.dt,
            padded_len: sidecar.padded_len,
            signal_len: sidecar.signal_len,
            options: sidecar.options,
        })
    }
}
