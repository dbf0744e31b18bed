//! Reconstruction with a time-varying bandwidth.
//!
//! Given sample points `t_n` with speeds `t'_n > 0`,
//!
//! ```text
//! g(t)       = sum_m t'_m / (t - t_m)^2
//! G(t, t_n)  = (-1)^z(t, t_n) sqrt(t'_n) / |t - t_n| * g(t)^(-1/2)
//! G(s, t)    = (-1)^(#points between s and t) g(s)^(-1/2) g(t)^(-1/2)
//!              * sum_m t'_m / ((t - t_m)(s - t_m))
//! ```
//!
//! where `z(t, t_n)` counts the sample points strictly between `t` and
//! `t_n`. The one-argument kernel is the `s -> t_n` limit of the
//! two-argument one, which fixes the exponent of `g` at `-1/2` and the sign
//! convention: `G(t_n, t_n) = 1`, `G(t_m, t_n) = 0` for `m != n`, and the
//! kernel is smooth across every sample point.
//!
//! On the equidistant lattice `t_n = n pi / A` with constant speeds the
//! kernel reduces to `sin(A (t - s)) / (A (t - s))`. Speeds enter only
//! through ratios, so rescaling all of them leaves every kernel unchanged.
//! For that lattice `g(t) = A pi csc^2(A t)` when `t'_n = pi / A`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_range, Exec};
use crate::signal::{Provenance, Signal, UniformGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedScheme {
    /// Interior `(t_{n+1} - t_{n-1}) / 2`; endpoints half the adjacent gap.
    Centered,
    /// `t_{n+1} - t_n`; the last speed repeats the previous one.
    Forward,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleLattice {
    points: Vec<f64>,
    speeds: Vec<f64>,
    sqrt_speeds: Vec<f64>,
    scheme: SpeedScheme,
}

fn check_points(points: &[f64]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::Length {
            what: "sample lattice",
            needed: 2,
            got: points.len(),
        });
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("lattice point {i} is not finite")));
    }
    if let Some(i) = points.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(Error::NotIncreasing { index: i + 1 });
    }
    Ok(())
}

/// Lattice with speeds derived from the points by `scheme`.
pub fn make_lattice(points: &[f64], scheme: SpeedScheme) -> Result<SampleLattice> {
    check_points(points)?;
    let n = points.len();
    let speeds: Vec<f64> = match scheme {
        SpeedScheme::Centered => (0..n)
            .map(|i| match i {
                0 => (points[1] - points[0]) / 2.0,
                i if i == n - 1 => (points[n - 1] - points[n - 2]) / 2.0,
                i => (points[i + 1] - points[i - 1]) / 2.0,
            })
            .collect(),
        SpeedScheme::Forward => (0..n)
            .map(|i| {
                let i = i.min(n - 2);
                points[i + 1] - points[i]
            })
            .collect(),
        SpeedScheme::Custom => {
            return Err(Error::invalid(
                "custom speeds must be supplied with SampleLattice::with_speeds",
            ))
        }
    };
    SampleLattice::build(points.to_vec(), speeds, scheme)
}

impl SampleLattice {
    pub fn with_speeds(points: Vec<f64>, speeds: Vec<f64>) -> Result<Self> {
        check_points(&points)?;
        if speeds.len() != points.len() {
            return Err(Error::Length {
                what: "lattice speeds",
                needed: points.len(),
                got: speeds.len(),
            });
        }
        Self::build(points, speeds, SpeedScheme::Custom)
    }

    fn build(points: Vec<f64>, speeds: Vec<f64>, scheme: SpeedScheme) -> Result<Self> {
        if let Some(i) = speeds.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!(
                "speed {i} must be positive and finite, got {}",
                speeds[i]
            )));
        }
        let sqrt_speeds = speeds.iter().map(|s| s.sqrt()).collect();
        Ok(SampleLattice {
            points,
            speeds,
            sqrt_speeds,
            scheme,
        })
    }

    /// Same points, every speed multiplied by `c`.
    pub fn scale_speeds(&self, c: f64) -> Result<Self> {
        let speeds = self.speeds.iter().map(|s| s * c).collect();
        Self::build(self.points.clone(), speeds, self.scheme)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn scheme(&self) -> SpeedScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points strictly below `t`.
    fn below(&self, t: f64) -> usize {
        self.points.partition_point(|&p| p < t)
    }

    /// Index of a point within `eps` of `t`, nearest first.
    fn near_point(&self, t: f64, eps: f64) -> Option<usize> {
        let k = self.below(t);
        let left = k.checked_sub(1).map(|i| (i, t - self.points[i]));
        let right = (k < self.len()).then(|| (k, self.points[k] - t));
        [left, right]
            .into_iter()
            .flatten()
            .filter(|&(_, d)| d <= eps)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Count of lattice points strictly inside `(min(t, t_n), max(t, t_n))`.
    /// Always taken over the full lattice, independent of truncation.
    pub fn z_count(&self, t: f64, t_n: f64) -> usize {
        let (a, b) = if t <= t_n { (t, t_n) } else { (t_n, t) };
        if a == b {
            return 0;
        }
        let above_a = self.points.partition_point(|&p| p <= a);
        let below_b = self.below(b);
        below_b.saturating_sub(above_a)
    }

    /// Index range of the `w` points nearest to `t` (all points when `w` is
    /// `None` or exceeds the lattice). Ties resolve toward lower indices.
    fn window(&self, t: f64, w: Option<usize>) -> Range<usize> {
        let n = self.len();
        let w = match w {
            Some(w) if w < n => w,
            _ => return 0..n,
        };
        // Shift the window right while its far-right neighbour is strictly
        // nearer than its leftmost member; the predicate is monotone in lo.
        let (mut lo, mut hi) = (0usize, n - w);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.points[mid + w] - t < t - self.points[mid] {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo..lo + w
    }

    fn g_over(&self, t: f64, range: Range<usize>) -> f64 {
        let mut g = 0.0;
        for m in range {
            let d = t - self.points[m];
            g += self.speeds[m] / (d * d);
        }
        g
    }
}

/// Truncation and pole handling shared by all kernel evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEvalConfig {
    /// Number of nearest sample points included in each lattice sum;
    /// `None` sums over the whole lattice.
    pub truncation: Option<usize>,
    /// Arguments this close to a sample point use the limit forms.
    pub singularity_epsilon: f64,
}

impl Default for KernelEvalConfig {
    fn default() -> Self {
        KernelEvalConfig {
            truncation: Some(512),
            singularity_epsilon: 1e-9,
        }
    }
}

impl KernelEvalConfig {
    pub const MIN_TRUNCATION: usize = 8;

    pub fn new(truncation: Option<usize>, singularity_epsilon: f64) -> Result<Self> {
        if let Some(w) = truncation {
            if w < Self::MIN_TRUNCATION {
                return Err(Error::invalid(format!(
                    "truncation W = {w} is below the minimum of {}",
                    Self::MIN_TRUNCATION
                )));
            }
        }
        if !(singularity_epsilon >= 0.0) {
            return Err(Error::invalid("singularity epsilon must be non-negative"));
        }
        Ok(KernelEvalConfig {
            truncation,
            singularity_epsilon,
        })
    }

    pub fn unlimited() -> Self {
        KernelEvalConfig {
            truncation: None,
            ..Self::default()
        }
    }

    pub fn with_truncation(w: usize) -> Result<Self> {
        Self::new(Some(w), KernelEvalConfig::default().singularity_epsilon)
    }
}

/// `g(t)` over the `W` points nearest to `t`.
pub fn g_function(t: f64, lattice: &SampleLattice, cfg: &KernelEvalConfig) -> Result<f64> {
    if let Some(i) = lattice.near_point(t, cfg.singularity_epsilon) {
        return Err(Error::Pole {
            t,
            point: lattice.points[i],
        });
    }
    Ok(lattice.g_over(t, lattice.window(t, cfg.truncation)))
}

/// Free-function form of [`SampleLattice::z_count`].
pub fn z_count(t: f64, t_n: f64, lattice: &SampleLattice) -> usize {
    lattice.z_count(t, t_n)
}

fn sign(z: usize) -> f64 {
    if z.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// One-argument kernel `G(t, t_n)`; `t_n` must be a lattice point.
pub fn kernel_g1(t: f64, t_n: f64, lattice: &SampleLattice, cfg: &KernelEvalConfig) -> Result<f64> {
    let n = lattice
        .points
        .binary_search_by(|p| p.total_cmp(&t_n))
        .map_err(|_| Error::NotALatticePoint { t: t_n })?;
    Ok(kernel_g1_index(t, n, lattice, cfg))
}

/// `G(t, t_n)` for the lattice point with index `n`.
pub fn kernel_g1_index(t: f64, n: usize, lattice: &SampleLattice, cfg: &KernelEvalConfig) -> f64 {
    if let Some(m) = lattice.near_point(t, cfg.singularity_epsilon) {
        return if m == n { 1.0 } else { 0.0 };
    }
    let g = lattice.g_over(t, lattice.window(t, cfg.truncation));
    let t_n = lattice.points[n];
    sign(lattice.z_count(t, t_n)) * lattice.sqrt_speeds[n] / ((t - t_n).abs() * g.sqrt())
}

/// Two-argument kernel `G(s, t)`. Arguments on the lattice delegate to the
/// one-argument limit form. The lattice sums run over the union of the
/// windows nearest `s` and `t`, so the result is symmetric bit for bit and
/// equals 1 on the diagonal.
pub fn kernel_g2(s: f64, t: f64, lattice: &SampleLattice, cfg: &KernelEvalConfig) -> Result<f64> {
    let eps = cfg.singularity_epsilon;
    match (lattice.near_point(s, eps), lattice.near_point(t, eps)) {
        (Some(a), Some(b)) => return Ok(if a == b { 1.0 } else { 0.0 }),
        (Some(n), None) => return Ok(kernel_g1_index(t, n, lattice, cfg)),
        (None, Some(n)) => return Ok(kernel_g1_index(s, n, lattice, cfg)),
        (None, None) => {}
    }
    let ws = lattice.window(s, cfg.truncation);
    let wt = lattice.window(t, cfg.truncation);
    #[allow(clippy::single_range_in_vec_init)]
    let ranges: Vec<Range<usize>> = if ws.start.max(wt.start) <= ws.end.min(wt.end) {
        vec![ws.start.min(wt.start)..ws.end.max(wt.end)]
    } else if ws.start < wt.start {
        vec![ws, wt]
    } else {
        vec![wt, ws]
    };

    let (mut gs, mut gt, mut cross) = (0.0, 0.0, 0.0);
    for m in ranges.into_iter().flatten() {
        let ds = s - lattice.points[m];
        let dt = t - lattice.points[m];
        let sp = lattice.speeds[m];
        gs += sp / (ds * ds);
        gt += sp / (dt * dt);
        cross += sp / (ds * dt);
    }
    let between = lattice.below(s).abs_diff(lattice.below(t));
    // products commute exactly in floating point, so G(s,t) == G(t,s) bit for bit
    Ok(sign(between) * cross / (gs * gt).sqrt())
}

/// Value of `sum_n G(t, t_n) amp_n` at a single abscissa.
fn evaluate_at(
    t: f64,
    lattice: &SampleLattice,
    weights: &[f64],
    amplitudes: &[f64],
    cfg: &KernelEvalConfig,
) -> f64 {
    if let Some(m) = lattice.near_point(t, cfg.singularity_epsilon) {
        return amplitudes[m];
    }
    let below = lattice.below(t);
    let range = lattice.window(t, cfg.truncation);
    let mut g = 0.0;
    let mut acc = 0.0;
    for m in range {
        let d = t - lattice.points[m];
        let inv = 1.0 / d.abs();
        g += lattice.speeds[m] * inv * inv;
        let z = if m < below { below - 1 - m } else { m - below };
        let term = weights[m] * inv;
        if z & 1 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc / g.sqrt()
}

/// Number of grid points probed for the truncation-error estimate.
const ERROR_PROBES: usize = 64;

/// Reconstructs `sum_n G(t, t_n) amp_n` on `grid`. Grid points within the
/// singularity epsilon of a sample return that sample's amplitude.
///
/// For truncated runs the provenance records the largest deviation, over
/// evenly spaced probe points, from the same sum taken with four times as
/// many neighbours (or the whole lattice, when that is no larger).
pub fn reconstruct_generalized(
    lattice: &SampleLattice,
    amplitudes: &[f64],
    grid: UniformGrid,
    cfg: &KernelEvalConfig,
    exec: Exec,
) -> Result<Signal> {
    if amplitudes.len() != lattice.len() {
        return Err(Error::Length {
            what: "generalized sample amplitudes",
            needed: lattice.len(),
            got: amplitudes.len(),
        });
    }
    let weights: Vec<f64> = lattice
        .sqrt_speeds
        .iter()
        .zip(amplitudes)
        .map(|(s, a)| s * a)
        .collect();
    let amps = map_range(exec, grid.count, |i| {
        evaluate_at(grid.point(i), lattice, &weights, amplitudes, cfg)
    });

    let estimate = cfg.truncation.filter(|&w| w < lattice.len()).map(|w| {
        let reference = KernelEvalConfig {
            truncation: Some(4 * w).filter(|&r| r < lattice.len()),
            ..*cfg
        };
        let step = (grid.count / ERROR_PROBES).max(1);
        // offset by half a step so probes avoid the lattice-aligned endpoints
        (step / 2..grid.count)
            .step_by(step)
            .map(|i| {
                let t = grid.point(i);
                (amps[i] - evaluate_at(t, lattice, &weights, amplitudes, &reference)).abs()
            })
            .fold(0.0, f64::max)
    });

    Signal::new(
        grid,
        amps,
        Provenance::Generalized {
            lattice: format!("{} points", lattice.len()),
            scheme: lattice.scheme,
            truncation: cfg.truncation,
            singularity_epsilon: cfg.singularity_epsilon,
            truncation_error_estimate: estimate,
        },
    )
}
