//! Peak detection and ranking on magnitude spectra.
//!
//! Candidates are local maxima whose topographic prominence clears
//! `min_prominence_ratio` times the median magnitude. Spectra of sampled
//! sequences carry a broad low-frequency pedestal, so raw prominence alone
//! ranks pedestal wiggles above sharp high-frequency lines. Candidates are
//! therefore ranked by salience,
//!
//! ```text
//! salience = prominence / (local_median^a * global_median^(1 - a))
//! ```
//!
//! a partial whitening against the running median of the spectrum around
//! the peak. Ranked candidates closer than `merge_radius_bins` to a
//! stronger one are dropped. Every step depends on magnitude ratios only,
//! so the table is unchanged when the spectrum is scaled.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::spectrum::{Spectrum, SpectrumOptions};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    /// Prominence threshold as a multiple of the median magnitude.
    pub min_prominence_ratio: f64,
    /// Bins below this are ignored (bin 0 always is).
    pub min_bin: usize,
    pub merge_radius_bins: usize,
    /// Half-width of the running-median window, in cycles per unit.
    pub baseline_halfwidth: f64,
    /// Weight `a` of the local median in the salience denominator.
    pub whitening_exponent: f64,
    pub max_peaks: usize,
    /// Prominence below this fraction of the largest magnitude counts as
    /// rounding noise.
    pub noise_floor_ratio: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            min_prominence_ratio: 1.0,
            min_bin: 1,
            merge_radius_bins: 8,
            baseline_halfwidth: 5e-4,
            whitening_exponent: 2.0 / 3.0,
            max_peaks: 100,
            noise_floor_ratio: 1e-9,
        }
    }
}

impl PeakParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_prominence_ratio >= 0.0) {
            return Err(Error::invalid("min_prominence_ratio must be non-negative"));
        }
        if !(self.baseline_halfwidth > 0.0) {
            return Err(Error::invalid("baseline_halfwidth must be positive"));
        }
        if !(0.0..=1.0).contains(&self.whitening_exponent) {
            return Err(Error::invalid("whitening_exponent must lie in [0, 1]"));
        }
        if !(self.noise_floor_ratio >= 0.0) {
            return Err(Error::invalid("noise_floor_ratio must be non-negative"));
        }
        if self.max_peaks == 0 {
            return Err(Error::invalid("max_peaks must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    /// Parabolically refined, cycles per unit.
    pub frequency: f64,
    pub wavelength: f64,
    pub magnitude: f64,
    pub prominence: f64,
    pub salience: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakTable {
    /// Descending salience.
    pub peaks: Vec<Peak>,
    pub params: PeakParams,
    pub bin_frequency_step: f64,
    pub dt: f64,
    pub padded_len: usize,
    pub spectrum_options: SpectrumOptions,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let len = values.len();
    let (lower, m, _) = values.select_nth_unstable_by(len / 2, f64::total_cmp);
    let m = *m;
    if len % 2 == 1 {
        m
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (below + m) / 2.0
    }
}

/// For every index, the minimum of `x` from just after the nearest strictly
/// higher point on the left (or the start) through the index itself.
fn left_basin_minima(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut stack: Vec<(f64, f64)> = Vec::new();
    for &v in x {
        let mut lowest = v;
        while let Some(&(h, seg_min)) = stack.last() {
            if h > v {
                break;
            }
            lowest = lowest.min(seg_min);
            stack.pop();
        }
        stack.push((v, lowest));
        out.push(lowest);
    }
    out
}

/// Topographic prominence of bin `i`: its height above the higher of the
/// two lowest points separating it from strictly higher terrain.
pub fn prominences(x: &[f64]) -> Vec<f64> {
    let left = left_basin_minima(x);
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    let mut right = left_basin_minima(&rev);
    right.reverse();
    x.iter()
        .zip(left.iter().zip(&right))
        .map(|(&v, (&l, &r))| v - l.max(r))
        .collect()
}

/// Running median over `[k - h, k + blk + h)` for blocks of `blk` bins.
fn blockwise_baseline(x: &[f64], start: usize, h: usize) -> Vec<f64> {
    let blk = (h / 4).max(1);
    let mut base = vec![0.0; x.len()];
    let mut scratch = Vec::new();
    let mut a = 0;
    while a < x.len() {
        let lo = a.saturating_sub(h).max(start);
        let hi = (a + blk + h).min(x.len());
        scratch.clear();
        scratch.extend_from_slice(&x[lo.min(hi)..hi]);
        let m = median(&mut scratch);
        base[a..(a + blk).min(x.len())].fill(m);
        a += blk;
    }
    base
}

/// Offset in `[-0.5, 0.5]` of the vertex of the parabola through three bins.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom < 0.0 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

pub fn detect_peaks(sp: &Spectrum, params: &PeakParams) -> Result<PeakTable> {
    params.validate()?;
    if sp.is_empty() {
        return Err(Error::Length {
            what: "spectrum",
            needed: 1,
            got: 0,
        });
    }
    let x = &sp.magnitudes;
    let n = x.len();
    let start = params.min_bin.max(1);
    let mut table = PeakTable {
        peaks: Vec::new(),
        params: *params,
        bin_frequency_step: sp.bin_frequency_step,
        dt: sp.dt,
        padded_len: sp.padded_len,
        spectrum_options: sp.options,
    };
    if n < start + 2 {
        return Ok(table);
    }

    let global = median(&mut x[start..].to_vec());
    let peak_mag = x[start..].iter().copied().fold(0.0, f64::max);
    let threshold = (params.min_prominence_ratio * global).max(params.noise_floor_ratio * peak_mag);
    let prom = prominences(x);
    let h = ((params.baseline_halfwidth / sp.bin_frequency_step) as usize).max(2);
    let base = blockwise_baseline(x, start, h);
    let a = params.whitening_exponent;

    let mut candidates: Vec<(usize, f64)> = (start..n - 1)
        .filter(|&k| x[k] > x[k - 1] && x[k] >= x[k + 1])
        .filter(|&k| prom[k] > 0.0 && prom[k] >= threshold)
        .map(|k| {
            let denom = (base[k].powf(a) * global.powf(1.0 - a)).max(f64::MIN_POSITIVE);
            (k, prom[k] / denom)
        })
        .collect();
    candidates.sort_by(|p, q| q.1.total_cmp(&p.1).then(p.0.cmp(&q.0)));

    let r = params.merge_radius_bins;
    let mut kept = BTreeSet::new();
    for (k, salience) in candidates {
        if kept.range(k.saturating_sub(r)..=k + r).next().is_some() {
            continue;
        }
        kept.insert(k);
        let bin = k as f64 + parabolic_offset(x[k - 1], x[k], x[k + 1]);
        let frequency = sp.frequency(bin);
        table.peaks.push(Peak {
            bin: k,
            frequency,
            wavelength: 1.0 / frequency,
            magnitude: x[k],
            prominence: prom[k],
            salience,
        });
        if table.peaks.len() == params.max_peaks {
            break;
        }
    }
    Ok(table)
}

#[derive(Debug, Serialize)]
struct PeakSidecar<'a> {
    params: &'a PeakParams,
    bin_frequency_step: f64,
    dt: f64,
    padded_len: usize,
    #[serde(flatten)]
    spectrum_options: SpectrumOptions,
    bins: Vec<usize>,
    salience: Vec<f64>,
}

impl PeakTable {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// First-ranked peak within relative tolerance `tol` of `wavelength`,
    /// with its 1-based rank, searching only the top `within` peaks.
    pub fn find(&self, wavelength: f64, tol: f64, within: usize) -> Option<(usize, &Peak)> {
        self.peaks
            .iter()
            .take(within)
            .enumerate()
            .find(|(_, p)| relative_gap(p.wavelength, wavelength) <= tol)
            .map(|(i, p)| (i + 1, p))
    }

    /// Writes `rank,frequency,wavelength,magnitude,prominence` plus the
    /// sidecar with detection parameters, bins and salience.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let rows = self.peaks.iter().enumerate().map(|(i, p)| {
            vec![
                (i + 1).to_string(),
                p.frequency.to_string(),
                p.wavelength.to_string(),
                p.magnitude.to_string(),
                p.prominence.to_string(),
            ]
        });
        io::write_csv(
            csv_path,
            &["rank", "frequency", "wavelength", "magnitude", "prominence"],
            rows,
        )?;
        io::write_json(
            &io::sidecar_path(csv_path),
            &PeakSidecar {
                params: &self.params,
                bin_frequency_step: self.bin_frequency_step,
                dt: self.dt,
                padded_len: self.padded_len,
                spectrum_options: self.spectrum_options,
                bins: self.peaks.iter().map(|p| p.bin).collect(),
                salience: self.peaks.iter().map(|p| p.salience).collect(),
            },
        )
    }
}

/// Largest prominence of any local maximum whose bin wavelength lies within
/// relative tolerance `tol` of `wavelength`, ignoring ranking and merging.
pub fn max_prominence_near(sp: &Spectrum, wavelength: f64, tol: f64) -> Option<f64> {
    let x = &sp.magnitudes;
    if x.len() < 3 || !(wavelength > 0.0) {
        return None;
    }
    let f_lo = 1.0 / (wavelength * (1.0 + tol));
    let f_hi = 1.0 / (wavelength * (1.0 - tol).max(f64::MIN_POSITIVE));
    let k_lo = ((f_lo / sp.bin_frequency_step).ceil() as usize).max(1);
    let k_hi = ((f_hi / sp.bin_frequency_step).floor() as usize).min(x.len() - 2);
    if k_lo > k_hi {
        return None;
    }
    let prom = prominences(x);
    (k_lo..=k_hi)
        .filter(|&k| x[k] > x[k - 1] && x[k] >= x[k + 1] && prom[k] > 0.0)
        .map(|k| prom[k])
        .reduce(f64::max)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakMatchReport {
    /// `(index in a, index in b)`, 0-based, in rank order of `a`.
    pub matched: Vec<(usize, usize)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
    pub wavelength_tol: f64,
}

impl PeakMatchReport {
    /// Whether some matched pair has its `a` wavelength within `tol` of
    /// `wavelength`.
    pub fn matches_wavelength(&self, a: &PeakTable, wavelength: f64, tol: f64) -> bool {
        self.matched
            .iter()
            .any(|&(i, _)| relative_gap(a.peaks[i].wavelength, wavelength) <= tol)
    }
}

/// Pairs peaks of `a` (in rank order) with the closest unpaired peak of `b`
/// whose wavelength agrees within relative tolerance `wavelength_tol`.
pub fn compare_peak_tables(a: &PeakTable, b: &PeakTable, wavelength_tol: f64) -> PeakMatchReport {
    let mut used = vec![false; b.len()];
    let mut report = PeakMatchReport {
        wavelength_tol,
        ..Default::default()
    };
    for (i, p) in a.peaks.iter().enumerate() {
        let best = b
            .peaks
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, q)| (j, relative_gap(q.wavelength, p.wavelength)))
            .filter(|&(_, gap)| gap <= wavelength_tol)
            .min_by(|x, y| x.1.total_cmp(&y.1));
        match best {
            Some((j, _)) => {
                used[j] = true;
                report.matched.push((i, j));
            }
            None => report.unmatched_a.push(i),
        }
    }
    report.unmatched_b = (0..b.len()).filter(|&j| !used[j]).collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Exec;
    use crate::signal::{Signal, UniformGrid};
    use crate::spectrum::magnitude_spectrum;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spectrum_of(n: usize, f: impl Fn(f64) -> f64 + Send + Sync) -> Spectrum {
        let g = UniformGrid::new(0.0, 1.0, n).unwrap();
        let s = Signal::from_fn(g, Exec::Sequential, f).unwrap();
        magnitude_spectrum(&s, SpectrumOptions::default()).unwrap()
    }

    fn raw(x: Vec<f64>) -> Spectrum {
        Spectrum {
            padded_len: 2 * (x.len() - 1),
            signal_len: 2 * (x.len() - 1),
            magnitudes: x,
            bin_frequency_step: 1.0,
            dt: 1.0,
            options: SpectrumOptions::default(),
        }
    }

    /// O(n^2) prominence by walking outward from the peak.
    fn prominence_oracle(x: &[f64], i: usize) -> f64 {
        let mut lmin = x[i];
        for j in (0..i).rev() {
            if x[j] > x[i] {
                break;
            }
            lmin = lmin.min(x[j]);
        }
        let mut rmin = x[i];
        for &v in &x[i + 1..] {
            if v > x[i] {
                break;
            }
            rmin = rmin.min(v);
        }
        x[i] - lmin.max(rmin)
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn single_tone_gives_one_peak() {
        let (m, k0) = (1024usize, 100usize);
        let sp = spectrum_of(m, |t| (2.0 * PI * k0 as f64 * t / m as f64).cos());
        let t = detect_peaks(&sp, &PeakParams::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.peaks[0].bin, k0);
        assert!((t.peaks[0].wavelength - m as f64 / k0 as f64).abs() < 1e-9);
    }

    #[test]
    fn two_tones_rank_by_magnitude() {
        let m = 1024.0;
        let sp = spectrum_of(1024, |t| {
            0.4 * (2.0 * PI * 60.0 * t / m).cos() + (2.0 * PI * 200.0 * t / m).cos()
        });
        let t = detect_peaks(&sp, &PeakParams::default()).unwrap();
        assert_eq!(t.peaks.iter().map(|p| p.bin).collect::<Vec<_>>(), vec![200, 60]);
    }

    #[test]
    fn nearby_maxima_merge_into_strongest() {
        let mut x = vec![0.0; 64];
        x[20] = 5.0;
        x[24] = 3.0;
        x[40] = 2.0;
        let p = PeakParams {
            min_prominence_ratio: 0.0,
            ..PeakParams::default()
        };
        let t = detect_peaks(&raw(x.clone()), &p).unwrap();
        assert_eq!(t.peaks.iter().map(|p| p.bin).collect::<Vec<_>>(), vec![20, 40]);
        let p = PeakParams {
            merge_radius_bins: 2,
            ..p
        };
        let t = detect_peaks(&raw(x), &p).unwrap();
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn refined_frequency_of_off_bin_tone() {
        // 600 samples padded to 1024; the 3-point parabola is accurate to
        // well under 0.1 bin once the spectrum is oversampled by this much
        for i in 0..40 {
            let true_bin = 150.0 + 0.025 * f64::from(i);
            let sp = spectrum_of(600, |t| (2.0 * PI * true_bin * t / 1024.0 + 0.4).cos());
            let t = detect_peaks(&sp, &PeakParams::default()).unwrap();
            let bin = t.peaks[0].frequency / sp.bin_frequency_step;
            assert!((bin - true_bin).abs() < 0.1, "{true_bin}: {bin}");
        }
    }

    #[test]
    fn match_reports() {
        let sp = spectrum_of(1024, |t| {
            (2.0 * PI * 60.0 * t / 1024.0).cos() + 0.5 * (2.0 * PI * 200.0 * t / 1024.0).cos()
        });
        let a = detect_peaks(&sp, &PeakParams::default()).unwrap();
        let r = compare_peak_tables(&a, &a, 0.005);
        assert_eq!(r.matched, vec![(0, 0), (1, 1)]);
        assert!(r.unmatched_a.is_empty() && r.unmatched_b.is_empty());
        assert!(r.matches_wavelength(&a, 1024.0 / 60.0, 0.005));

        let other = spectrum_of(1024, |t| (2.0 * PI * 333.0 * t / 1024.0).cos());
        let b = detect_peaks(&other, &PeakParams::default()).unwrap();
        let r = compare_peak_tables(&a, &b, 0.005);
        assert!(r.matched.is_empty());
        assert_eq!(r.unmatched_a, vec![0, 1]);
        assert_eq!(r.unmatched_b, vec![0]);
    }

    #[test]
    fn csv_output() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("peaks.csv");
        let sp = spectrum_of(512, |t| (2.0 * PI * 0.1 * t).cos());
        detect_peaks(&sp, &PeakParams::default()).unwrap().save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("rank,frequency,wavelength,magnitude,prominence\n1,"));
        assert!(io::sidecar_path(&path).exists());
    }

    proptest! {
        #[test]
        fn prominence_matches_oracle(x in prop::collection::vec(0u8..6, 3..80)) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let p = prominences(&x);
            for i in 1..x.len() - 1 {
                if x[i] > x[i - 1] && x[i] >= x[i + 1] {
                    prop_assert_eq!(p[i], prominence_oracle(&x, i));
                }
            }
        }

        #[test]
        fn invariant_under_positive_scaling(
            x in prop::collection::vec(0.0f64..10.0, 40..200),
            c in prop::sample::select(vec![1e-6, 0.37, 3.0, 1e8]),
        ) {
            let p = PeakParams { baseline_halfwidth: 4.0, ..PeakParams::default() };
            let a = detect_peaks(&raw(x.clone()), &p).unwrap();
            let b = detect_peaks(&raw(x.iter().map(|v| v * c).collect()), &p).unwrap();
            let bins = |t: &PeakTable| t.peaks.iter().map(|p| p.bin).collect::<Vec<_>>();
            prop_assert_eq!(bins(&a), bins(&b));
        }

        #[test]
        fn peaks_are_local_maxima_in_salience_order(x in prop::collection::vec(0.0f64..10.0, 40..200)) {
            let t = detect_peaks(&raw(x.clone()), &PeakParams::default()).unwrap();
            for p in &t.peaks {
                prop_assert!(p.magnitude >= x[p.bin - 1] && p.magnitude >= x[p.bin + 1]);
                prop_assert!(p.prominence > 0.0);
            }
            prop_assert!(t.peaks.windows(2).all(|w| w[0].salience >= w[1].salience));
        }
    }
}
