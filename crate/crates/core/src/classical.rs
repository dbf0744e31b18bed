//! Classical Shannon reconstruction with the normalized sinc kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_range, Exec};
use crate::sequences::IntegerSequence;
use crate::signal::{Provenance, Signal, UniformGrid};

/// Bandlimit `omega_max` in cycles per unit; the Nyquist spacing is
/// `1 / (2 omega_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBandParams {
    pub omega_max: f64,
}

impl ClassicalBandParams {
    /// Nyquist spacing 1: samples on the integers.
    pub const INTEGER_LATTICE: Self = ClassicalBandParams { omega_max: 0.5 };

    pub fn new(omega_max: f64) -> Result<Self> {
        if !(omega_max > 0.0) || !omega_max.is_finite() {
            return Err(Error::invalid(format!("omega_max must be positive, got {omega_max}")));
        }
        Ok(ClassicalBandParams { omega_max })
    }
}

/// `sin(pi x)`, exactly zero at integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    if x.fract() == 0.0 {
        return 0.0;
    }
    let r = x - 2.0 * (0.5 * x).round();
    (std::f64::consts::PI * r).sin()
}

/// `cos(pi x)`, exactly zero at half-integers.
pub(crate) fn cos_pi(x: f64) -> f64 {
    if (x - 0.5).fract() == 0.0 {
        return 0.0;
    }
    let r = x - 2.0 * (0.5 * x).round();
    (std::f64::consts::PI * r).cos()
}

/// Normalized sinc, `sin(pi x) / (pi x)` with value 1 at 0.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        sin_pi(x) / (std::f64::consts::PI * x)
    }
}

/// `sinc(2 (t - t_n) omega_max)`.
pub fn sinc_kernel(t: f64, t_n: f64, params: ClassicalBandParams) -> f64 {
    sinc(2.0 * (t - t_n) * params.omega_max)
}

/// 1 where the lattice point belongs to `members`, else 0.
pub fn indicator_amplitudes(lattice_points: &[i64], members: &IntegerSequence) -> Vec<f64> {
    lattice_points
        .iter()
        .map(|&p| if p >= 0 && members.contains(p as u64) { 1.0 } else { 0.0 })
        .collect()
}

struct Term {
    t: f64,
    amp: f64,
    sin: f64,
    cos: f64,
}

/// Evaluates `sum_n sinc_kernel(t, t_n) amp_n` on `grid`.
///
/// With `truncation_radius = Some(r)` only samples with `|t - t_n| <= r`
/// contribute, and the returned provenance carries a bound on the absolute
/// truncation error that holds at every grid point. Zero-amplitude samples
/// are skipped.
pub fn reconstruct_classical(
    lattice_points: &[f64],
    amplitudes: &[f64],
    params: ClassicalBandParams,
    grid: UniformGrid,
    truncation_radius: Option<f64>,
    exec: Exec,
) -> Result<Signal> {
    if lattice_points.len() != amplitudes.len() {
        return Err(Error::Length {
            what: "classical sample amplitudes",
            needed: lattice_points.len(),
            got: amplitudes.len(),
        });
    }
    if let Some(i) = lattice_points.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(Error::NotIncreasing { index: i + 1 });
    }
    if let Some(r) = truncation_radius {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("truncation radius must be positive, got {r}")));
        }
    }

    let scale = 2.0 * params.omega_max;
    let terms: Vec<Term> = lattice_points
        .iter()
        .zip(amplitudes)
        .filter(|(_, &a)| a != 0.0)
        .map(|(&t, &amp)| Term {
            t,
            amp,
            sin: sin_pi(scale * t),
            cos: cos_pi(scale * t),
        })
        .collect();

    let amps = map_range(exec, grid.count, |i| {
        let t = grid.point(i);
        let (lo, hi) = match truncation_radius {
            Some(r) => (
                terms.partition_point(|s| s.t < t - r),
                terms.partition_point(|s| s.t <= t + r),
            ),
            None => (0, terms.len()),
        };
        let u = scale * t;
        let (st, ct) = (sin_pi(u), cos_pi(u));
        let mut acc = 0.0;
        for s in &terms[lo..hi] {
            let x = scale * (t - s.t);
            if x == 0.0 {
                acc += s.amp;
            } else {
                // sin(pi (u - u_n)) by the angle-difference identity
                let num = st * s.cos - ct * s.sin;
                acc += s.amp * num / (std::f64::consts::PI * x);
            }
        }
        acc
    });

    let error_bound = match truncation_radius {
        Some(r) => truncation_error_bound(&terms, scale, grid, r, exec),
        None => 0.0,
    };
    Signal::new(
        grid,
        amps,
        Provenance::Classical {
            lattice: format!("{} samples", lattice_points.len()),
            omega_max: params.omega_max,
            truncation_radius,
            error_bound,
        },
    )
}

/// Upper bound on `sum_{|t - t_n| > r} |amp_n| / (pi scale |t - t_n|)` over
/// all grid points, using `|sinc x| <= 1 / (pi |x|)`.
///
/// The grid is cut into blocks of width `r / 8`; within a block `[a, b]`
/// every excluded sample satisfies `t_n < b - r` or `t_n > a + r`, and its
/// distance to any `t` in the block is at least `max(r, a - t_n)` (resp.
/// `max(r, t_n - b)`).
fn truncation_error_bound(terms: &[Term], scale: f64, grid: UniformGrid, r: f64, exec: Exec) -> f64 {
    let per_block = ((r / 8.0 / grid.spacing).floor() as usize).max(1);
    let n_blocks = grid.count.div_ceil(per_block);
    let bounds = map_range(exec, n_blocks, |b| {
        let a = grid.point(b * per_block);
        let z = grid.point(((b + 1) * per_block).min(grid.count) - 1);
        let left = terms.partition_point(|s| s.t < z - r);
        let right = terms.partition_point(|s| s.t <= a + r);
        let mut sum = 0.0;
        for s in &terms[..left] {
            sum += s.amp.abs() / (a - s.t).max(r);
        }
        for s in &terms[right..] {
            sum += s.amp.abs() / (s.t - z).max(r);
        }
        sum / (std::f64::consts::PI * scale)
    });
    bounds.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use crate::sequences::primes_first;

    const P: ClassicalBandParams = ClassicalBandParams::INTEGER_LATTICE;

    #[test]
    fn kernel_values() {
        assert_eq!(sinc_kernel(3.7, 3.7, P), 1.0);
        for k in [-3.0, -1.0, 1.0, 2.0, 50.0] {
            assert_eq!(sinc_kernel(10.0 + k, 10.0, P), 0.0);
        }
        assert_abs_diff_eq!(sinc_kernel(0.5, 0.0, P), 2.0 / std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn sin_cos_pi_exact_points() {
        assert_eq!(sin_pi(611953.0), 0.0);
        assert_eq!(cos_pi(611953.5), 0.0);
        assert_abs_diff_eq!(sin_pi(611953.5), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cos_pi(611953.0), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn indicator_over_primes() {
        let primes = primes_first(10).unwrap();
        let pts: Vec<i64> = (1..=10).collect();
        assert_eq!(
            indicator_amplitudes(&pts, &primes),
            vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]
        );
        let empty = IntegerSequence::custom(vec![], "none").unwrap();
        assert!(indicator_amplitudes(&pts, &empty).iter().all(|&a| a == 0.0));
        let all = IntegerSequence::custom((1..=10).collect(), "all").unwrap();
        assert!(indicator_amplitudes(&pts, &all).iter().all(|&a| a == 1.0));
    }

    #[test]
    fn single_sample() {
        let grid = UniformGrid::new(-2.0, 0.5, 9).unwrap();
        let s = reconstruct_classical(&[0.0], &[1.0], P, grid, None, Exec::Sequential).unwrap();
        for (t, a) in grid.points().zip(&s.amplitudes) {
            if t == 0.0 {
                assert_eq!(*a, 1.0);
            } else if t.fract() == 0.0 {
                assert_eq!(*a, 0.0);
            }
        }
    }

    #[test]
    fn zero_amplitudes_give_zero_signal() {
        let pts: Vec<f64> = (0..20).map(f64::from).collect();
        let grid = UniformGrid::covering(0.0, 19.0, 0.25).unwrap();
        let s = reconstruct_classical(&pts, &[0.0; 20], P, grid, Some(5.0), Exec::Sequential).unwrap();
        assert!(s.amplitudes.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn prime_indicator_at_thirteen() {
        let primes = primes_first(10).unwrap();
        let ints: Vec<i64> = (1..=30).collect();
        let amps = indicator_amplitudes(&ints, &primes);
        let pts: Vec<f64> = ints.iter().map(|&i| i as f64).collect();
        let grid = UniformGrid::covering(1.0, 30.0, 0.25).unwrap();
        let s = reconstruct_classical(&pts, &amps, P, grid, None, Exec::Sequential).unwrap();
        // t = 13 is grid index 48; compare against direct summation
        assert_abs_diff_eq!(s.amplitudes[48], 1.0, epsilon = 1e-12);
        let direct: f64 = pts.iter().zip(&amps).map(|(&tn, &a)| a * sinc(13.0 - tn)).sum();
        assert_abs_diff_eq!(direct, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_unsorted_and_mismatched() {
        let grid = UniformGrid::new(0.0, 1.0, 3).unwrap();
        assert!(reconstruct_classical(&[1.0, 0.0], &[1.0, 1.0], P, grid, None, Exec::Sequential).is_err());
        assert!(reconstruct_classical(&[0.0, 1.0], &[1.0], P, grid, None, Exec::Sequential).is_err());
        assert!(reconstruct_classical(&[0.0], &[1.0], P, grid, Some(0.0), Exec::Sequential).is_err());
    }

    #[test]
    fn truncation_error_within_reported_bound() {
        let primes = primes_first(400).unwrap();
        let last = *primes.values().last().unwrap() as i64;
        let ints: Vec<i64> = (1..=last).collect();
        let amps = indicator_amplitudes(&ints, &primes);
        let pts: Vec<f64> = ints.iter().map(|&i| i as f64).collect();
        let grid = UniformGrid::covering(1.0, last as f64, 0.25).unwrap();
        let full = reconstruct_classical(&pts, &amps, P, grid, None, Exec::Parallel).unwrap();
        for r in [20.0, 100.0, 400.0] {
            let cut = reconstruct_classical(&pts, &amps, P, grid, Some(r), Exec::Parallel).unwrap();
            let Provenance::Classical { error_bound, .. } = cut.provenance else {
                panic!("wrong provenance")
            };
            let measured = full
                .amplitudes
                .iter()
                .zip(&cut.amplitudes)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(measured <= error_bound, "r={r}: {measured} > {error_bound}");
            assert!(error_bound > 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn interpolates_random_patterns(bits in prop::collection::vec(any::<bool>(), 2..500)) {
            let pts: Vec<f64> = (0..bits.len()).map(|i| i as f64).collect();
            let amps: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
            let grid = UniformGrid::covering(0.0, (bits.len() - 1) as f64, 0.25).unwrap();
            let s = reconstruct_classical(&pts, &amps, P, grid, None, Exec::Sequential).unwrap();
            for (i, &a) in amps.iter().enumerate() {
                prop_assert!((s.amplitudes[4 * i] - a).abs() <= 1e-12);
            }
        }

        #[test]
        fn linear_in_amplitudes(
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            x in prop::collection::vec(-1.0f64..1.0, 40),
            y in prop::collection::vec(-1.0f64..1.0, 40),
        ) {
            let pts: Vec<f64> = (0..40).map(f64::from).collect();
            let grid = UniformGrid::covering(0.0, 39.0, 0.3).unwrap();
            let run = |v: &[f64]| reconstruct_classical(&pts, v, P, grid, Some(15.0), Exec::Sequential).unwrap().amplitudes;
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let (rx, ry, rm) = (run(&x), run(&y), run(&mix));
            for i in 0..rm.len() {
                prop_assert!((rm[i] - (a * rx[i] + b * ry[i])).abs() <= 1e-10);
            }
        }
    }
}
