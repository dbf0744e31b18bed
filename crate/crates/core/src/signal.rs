//! Uniform evaluation grids and sampled signals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::par::{map_range, Exec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub origin: f64,
    pub spacing: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn new(origin: f64, spacing: f64, count: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() || !origin.is_finite() {
            return Err(Error::invalid(format!(
                "grid needs finite origin and positive spacing, got origin={origin}, spacing={spacing}"
            )));
        }
        if count == 0 {
            return Err(Error::invalid("grid needs at least one point"));
        }
        Ok(UniformGrid {
            origin,
            spacing,
            count,
        })
    }

    /// Grid from `first` to `last` inclusive. When `spacing` divides
    /// `last - first`, `last` is the final grid point.
    pub fn covering(first: f64, last: f64, spacing: f64) -> Result<Self> {
        if !(last >= first) {
            return Err(Error::invalid(format!("grid span [{first}, {last}] is empty")));
        }
        let steps = ((last - first) / spacing + 1e-9).floor() as usize;
        Self::new(first, spacing, steps + 1)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.point(i))
    }

    pub fn last(&self) -> f64 {
        self.point(self.count - 1)
    }
}

/// How a signal was produced; echoed in its JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Provenance {
    Classical {
        lattice: String,
        omega_max: f64,
        /// `None` means the sum ran over every sample.
        truncation_radius: Option<f64>,
        /// Bound on |truncated - full| at every grid point.
        error_bound: f64,
    },
    Generalized {
        lattice: String,
        scheme: crate::generalized::SpeedScheme,
        truncation: Option<usize>,
        singularity_epsilon: f64,
        /// Max |W-term - reference| over a probe subset of the grid.
        truncation_error_estimate: Option<f64>,
    },
    /// Loaded from a CSV without a sidecar, or synthesized directly.
    Raw { source: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub grid: UniformGrid,
    pub amplitudes: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
struct SignalSidecar {
    grid: UniformGrid,
    #[serde(flatten)]
    provenance: Provenance,
    /// Grid-index step between CSV rows; above 1 the CSV is decimated.
    row_stride: usize,
}

impl Signal {
    pub fn new(grid: UniformGrid, amplitudes: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if amplitudes.len() != grid.count {
            return Err(Error::Length {
                what: "signal amplitudes",
                needed: grid.count,
                got: amplitudes.len(),
            });
        }
        if let Some(i) = amplitudes.iter().position(|a| !a.is_finite()) {
            return Err(Error::invalid(format!(
                "amplitude at grid index {i} is not finite"
            )));
        }
        Ok(Signal {
            grid,
            amplitudes,
            provenance,
        })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: UniformGrid, exec: Exec, f: impl Fn(f64) -> f64 + Send + Sync) -> Result<Self> {
        let amps = map_range(exec, grid.count, |i| f(grid.point(i)));
        Signal::new(
            grid,
            amps,
            Provenance::Raw {
                source: "synthetic".into(),
            },
        )
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Writes `t,amplitude` rows, every `stride`-th grid point, plus the
    /// JSON sidecar.
    pub fn save(&self, csv_path: &Path, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let rows = (0..self.len())
            .step_by(stride)
            .map(|i| vec![self.grid.point(i).to_string(), self.amplitudes[i].to_string()]);
        io::write_csv(csv_path, &["t", "amplitude"], rows)?;
        io::write_json(
            &io::sidecar_path(csv_path),
            &SignalSidecar {
                grid: self.grid,
                provenance: self.provenance.clone(),
                row_stride: stride,
            },
        )
    }

    /// Reads a signal CSV. The grid is taken from the sidecar when present
    /// (and must be undecimated), otherwise inferred from the `t` column.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let records = io::read_csv(csv_path, &["t", "amplitude"])?;
        let mut ts = Vec::with_capacity(records.len());
        let mut amps = Vec::with_capacity(records.len());
        for r in &records {
            ts.push(io::field::<f64>(r, 0)?);
            amps.push(io::field::<f64>(r, 1)?);
        }
        if ts.len() < 2 {
            return Err(Error::Length {
                what: "signal CSV rows",
                needed: 2,
                got: ts.len(),
            });
        }
        let sidecar = io::sidecar_path(csv_path);
        let (grid, provenance) = if sidecar.exists() {
            let s: SignalSidecar = io::read_json(&sidecar)?;
            if s.row_stride != 1 {
                return Err(Error::Parse(format!(
                    "{} holds a decimated signal (stride {})",
                    csv_path.display(),
                    s.row_stride
                )));
            }
            (s.grid, s.provenance)
        } else {
            let spacing = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
            (
                UniformGrid::new(ts[0], spacing, ts.len())?,
                Provenance::Raw {
                    source: csv_path.display().to_string(),
                },
            )
        };
        Signal::new(grid, amps, provenance)
    }
}
