//! Integer sequences consumed by the experiments: primes, primorials, the
//! squares-and-twice-squares sequence (SEQ1), sums of two squares (SEQ2) and
//! seeded random control sequences.
//!
//! Random sequences draw from `ChaCha8Rng` seeded through
//! `SeedableRng::seed_from_u64`; a uniform variate is `Rng::random::<f64>()`
//! (53 random mantissa bits). Both are fixed algorithms, so a `(seed,
//! params)` pair reproduces the same values on every platform.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::par::Exec;
use crate::sieve::{self, nth_prime_upper_bound};

/// Largest prime count `primes_first` accepts by default (~400 MB of output).
pub const DEFAULT_MAX_PRIMES: u64 = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Primes,
    Primorials,
    Seq1,
    Seq2,
    Cramer,
    Custom,
}

/// How a random control sequence is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Each integer `n >= 3` is included independently with probability `1/ln n`.
    #[default]
    Cramer,
    /// i.i.d. geometric gaps whose mean is `ln` of the expected last prime.
    GeometricGaps,
}

/// Inclusion density for a density-matched random control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "density")]
pub enum ControlDensity {
    /// `1/ln n`, the prime density.
    Primes,
    /// Counting function of SEQ1 is `(1 + 1/sqrt 2) sqrt x`, so density
    /// `(1 + 1/sqrt 2) / (2 sqrt n)`.
    Seq1,
    /// Landau-Ramanujan: `K / sqrt(ln n)`.
    Seq2,
}

impl ControlDensity {
    /// Probability of including `n`, clamped to `[0, 1]`.
    pub fn probability(self, n: u64) -> f64 {
        let x = n as f64;
        let p = match self {
            ControlDensity::Primes => 1.0 / x.ln(),
            ControlDensity::Seq1 => (1.0 + std::f64::consts::FRAC_1_SQRT_2) / (2.0 * x.sqrt()),
            ControlDensity::Seq2 => LANDAU_RAMANUJAN / x.ln().sqrt(),
        };
        if p.is_finite() {
            p.clamp(0.0, 1.0)
        } else {
            1.0
        }
    }

    fn first_candidate(self) -> u64 {
        match self {
            ControlDensity::Primes => 3,
            ControlDensity::Seq1 => 1,
            ControlDensity::Seq2 => 2,
        }
    }
}

const LANDAU_RAMANUJAN: f64 = 0.764_223_653_589_220_7;

/// Generation parameters echoed alongside a sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "generator")]
pub enum SequenceParams {
    PrimesFirst { count: u64 },
    PrimesWindow { lo_index: u64, hi_index: u64 },
    Primorials { k_max: usize },
    Seq1 { bound: u64 },
    Seq2 { count: u64 },
    Control {
        count: u64,
        seed: u64,
        mode: ControlMode,
        #[serde(flatten)]
        density: ControlDensity,
    },
    Custom { source: String },
}

impl SequenceParams {
    pub fn seed(&self) -> Option<u64> {
        match self {
            SequenceParams::Control { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegerSequence {
    values: Vec<u64>,
    kind: SequenceKind,
    params: SequenceParams,
}

impl IntegerSequence {
    /// Builds a sequence after checking every invariant of its kind.
    pub fn from_parts(values: Vec<u64>, kind: SequenceKind, params: SequenceParams) -> Result<Self> {
        if let Some(i) = values.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::NotIncreasing { index: i + 1 });
        }
        if kind == SequenceKind::Primes {
            if let Some(&v) = values.iter().find(|&&v| !sieve::is_prime(v)) {
                return Err(Error::NotPrime { value: v });
            }
        }
        Ok(IntegerSequence {
            values,
            kind,
            params,
        })
    }

    pub fn custom(values: Vec<u64>, source: impl Into<String>) -> Result<Self> {
        Self::from_parts(
            values,
            SequenceKind::Custom,
            SequenceParams::Custom {
                source: source.into(),
            },
        )
    }

    // Generators below produce values that satisfy the invariants by construction.
    fn trusted(values: Vec<u64>, kind: SequenceKind, params: SequenceParams) -> Self {
        debug_assert!(values.windows(2).all(|w| w[0] < w[1]));
        IntegerSequence {
            values,
            kind,
            params,
        }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn params(&self) -> &SequenceParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, v: u64) -> bool {
        self.values.binary_search(&v).is_ok()
    }

    /// Values as sample points on the real line.
    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// Short label for provenance echoes.
    pub fn label(&self) -> String {
        match &self.params {
            SequenceParams::PrimesFirst { count } => format!("primes[1..={count}]"),
            SequenceParams::PrimesWindow { lo_index, hi_index } => {
                format!("primes[{lo_index}..={hi_index}]")
            }
            SequenceParams::Primorials { k_max } => format!("primorials[1..={k_max}]"),
            SequenceParams::Seq1 { bound } => format!("seq1(<{bound})"),
            SequenceParams::Seq2 { count } => format!("seq2[1..={count}]"),
            SequenceParams::Control {
                count,
                seed,
                mode,
                density,
            } => format!("control({density:?},{mode:?},n={count},seed={seed})"),
            SequenceParams::Custom { source } => format!("custom({source})"),
        }
    }

    pub fn manifest(&self) -> SequenceManifest {
        SequenceManifest {
            kind: self.kind,
            params: self.params.clone(),
            seed: self.params.seed(),
            count: self.values.len(),
            min: self.values.first().copied(),
            max: self.values.last().copied(),
        }
    }

    /// Writes `index,value` rows (1-based index) plus the JSON manifest
    /// sidecar next to `csv_path`.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let rows = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), v.to_string()]);
        io::write_csv(csv_path, &["index", "value"], rows)?;
        io::write_json(&io::sidecar_path(csv_path), &self.manifest())
    }

    /// Reads a sequence CSV. When the manifest sidecar exists its kind and
    /// params are restored and re-validated; otherwise the result is `Custom`.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let records = io::read_csv(csv_path, &["index", "value"])?;
        let values = records
            .iter()
            .map(|r| io::field::<u64>(r, 1))
            .collect::<Result<Vec<_>>>()?;
        let sidecar = io::sidecar_path(csv_path);
        if sidecar.exists() {
            let m: SequenceManifest = io::read_json(&sidecar)?;
            if m.count != values.len() {
                return Err(Error::Parse(format!(
                    "{}: manifest lists {} values, CSV has {}",
                    sidecar.display(),
                    m.count,
                    values.len()
                )));
            }
            Self::from_parts(values, m.kind, m.params)
        } else {
            Self::custom(values, csv_path.display().to_string())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub kind: SequenceKind,
    pub params: SequenceParams,
    pub seed: Option<u64>,
    pub count: usize,
    pub min: Option<u64>,
    pub max: Option<u64>,
}

/// The first `n` primes.
pub fn primes_first(n: u64) -> Result<IntegerSequence> {
    primes_first_with(n, DEFAULT_MAX_PRIMES, Exec::default())
}

pub fn primes_first_with(n: u64, max_primes: u64, exec: Exec) -> Result<IntegerSequence> {
    if n == 0 {
        return Err(Error::invalid("prime count must be at least 1"));
    }
    if n > max_primes {
        return Err(Error::Resource {
            what: "prime count",
            requested: n,
            limit: max_primes,
        });
    }
    let mut limit = nth_prime_upper_bound(n);
    let mut primes = sieve::primes_up_to(limit, exec);
    while (primes.len() as u64) < n {
        limit *= 2;
        primes = sieve::primes_up_to(limit, exec);
    }
    primes.truncate(n as usize);
    Ok(IntegerSequence::trusted(
        primes,
        SequenceKind::Primes,
        SequenceParams::PrimesFirst { count: n },
    ))
}

/// Primes with 1-based index in `[lo_index, hi_index]`.
pub fn primes_window(lo_index: u64, hi_index: u64) -> Result<IntegerSequence> {
    if lo_index == 0 || lo_index > hi_index {
        return Err(Error::invalid(format!(
            "prime window requires 1 <= lo <= hi, got [{lo_index}, {hi_index}]"
        )));
    }
    let all = primes_first(hi_index)?;
    let values = all.values[(lo_index - 1) as usize..].to_vec();
    Ok(IntegerSequence::trusted(
        values,
        SequenceKind::Primes,
        SequenceParams::PrimesWindow { lo_index, hi_index },
    ))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimorialEntry {
    pub k: usize,
    /// Decimal string; `u128` values do not survive a JSON round trip.
    pub value: String,
    /// Range of `t` in which `p_k#` is expected to be the jumping champion,
    /// as `(lower, upper)` decimal strings.
    pub reign_interval: Option<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimorialTable {
    pub entries: Vec<PrimorialEntry>,
}

impl PrimorialTable {
    pub fn values(&self) -> Vec<u128> {
        self.entries
            .iter()
            .map(|e| e.value.parse().expect("primorial stored as decimal"))
            .collect()
    }
}

/// Goldston-Ledoan reign intervals for `k = 2..=6`; reference data only.
const REIGN_INTERVALS: [(usize, &str, &str); 5] = [
    (2, "4.67e4", "2.32e8"),
    (3, "2.06e44", "5.24e150"),
    (4, "4.64e487", "4.01e2607"),
    (5, "8.78e7769", "1.72e60178"),
    (6, "9.70e134460", "1.72e1386286"),
];

pub fn primorials(k_max: usize) -> Result<PrimorialTable> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let primes = primes_first(k_max as u64)?;
    let mut acc: u128 = 1;
    let mut entries = Vec::with_capacity(k_max);
    for (i, &p) in primes.values().iter().enumerate() {
        let k = i + 1;
        acc = acc.checked_mul(p as u128).ok_or(Error::Overflow { k })?;
        let reign_interval = REIGN_INTERVALS
            .iter()
            .find(|(rk, _, _)| *rk == k)
            .map(|(_, lo, hi)| (lo.to_string(), hi.to_string()));
        entries.push(PrimorialEntry {
            k,
            value: acc.to_string(),
            reign_interval,
        });
    }
    Ok(PrimorialTable { entries })
}

/// Sorted union of `{n^2}` and `{2 n^2}` (n >= 1) strictly below `bound`.
/// The two sets are disjoint because sqrt 2 is irrational.
pub fn seq1_up_to(bound: u64) -> Result<IntegerSequence> {
    if bound == 0 {
        return Err(Error::invalid("SEQ1 bound must be at least 1"));
    }
    let squares = (1u64..).map(|n| n * n).take_while(|&v| v < bound);
    let doubles = (1u64..).map(|n| 2 * n * n).take_while(|&v| v < bound);
    let mut values: Vec<u64> = squares.chain(doubles).collect();
    values.sort_unstable();
    Ok(IntegerSequence::trusted(
        values,
        SequenceKind::Seq1,
        SequenceParams::Seq1 { bound },
    ))
}

/// The first `m` positive integers of the form `a^2 + b^2` with `a, b >= 0`.
pub fn seq2_first(m: u64) -> Result<IntegerSequence> {
    if m == 0 {
        return Err(Error::invalid("SEQ2 count must be at least 1"));
    }
    let mut limit = (4 * m).max(32);
    loop {
        let found = sums_of_two_squares_up_to(limit);
        if found.len() as u64 >= m {
            let values = found[..m as usize].to_vec();
            return Ok(IntegerSequence::trusted(
                values,
                SequenceKind::Seq2,
                SequenceParams::Seq2 { count: m },
            ));
        }
        limit *= 2;
    }
}

fn sums_of_two_squares_up_to(limit: u64) -> Vec<u64> {
    let mut hit = vec![false; limit as usize + 1];
    let mut a = 0u64;
    while a * a <= limit {
        let mut b = a;
        while a * a + b * b <= limit {
            hit[(a * a + b * b) as usize] = true;
            b += 1;
        }
        a += 1;
    }
    hit.iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &h)| h)
        .map(|(n, _)| n as u64)
        .collect()
}

/// Cramér random model: `count` integers, each `n >= 3` included
/// independently with probability `1/ln n`.
pub fn cramer_sample(count: u64, seed: u64) -> Result<IntegerSequence> {
    control_sample(count, seed, ControlMode::Cramer, ControlDensity::Primes)
}

/// Seeded random control sequence of `count` elements.
///
/// `ControlMode::Cramer` scans upward from the first candidate, keeping each
/// integer with the density's probability. `ControlMode::GeometricGaps` only
/// supports the prime density and draws i.i.d. gaps starting from 2.
pub fn control_sample(
    count: u64,
    seed: u64,
    mode: ControlMode,
    density: ControlDensity,
) -> Result<IntegerSequence> {
    if count == 0 {
        return Err(Error::invalid("control sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(count as usize);
    match mode {
        ControlMode::Cramer => {
            let mut n = density.first_candidate();
            while (values.len() as u64) < count {
                if rng.random::<f64>() < density.probability(n) {
                    values.push(n);
                }
                n += 1;
            }
        }
        ControlMode::GeometricGaps => {
            if density != ControlDensity::Primes {
                return Err(Error::invalid(
                    "geometric-gap mode is defined only for the prime density",
                ));
            }
            let mean_gap = (nth_prime_upper_bound(count) as f64).ln().max(1.0);
            let geo = Geometric::new(1.0 / mean_gap)
                .map_err(|e| Error::invalid(format!("geometric gap: {e}")))?;
            let mut n = 2u64;
            while (values.len() as u64) < count {
                n += 1 + geo.sample(&mut rng);
                values.push(n);
            }
        }
    }
    Ok(IntegerSequence::trusted(
        values,
        SequenceKind::Cramer,
        SequenceParams::Control {
            count,
            seed,
            mode,
            density,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_primes(n: usize) -> Vec<u64> {
        (2u64..)
            .filter(|&k| (2..).take_while(|d| d * d <= k).all(|d| k % d != 0))
            .take(n)
            .collect()
    }

    #[test]
    fn first_primes_match_trial_division() {
        assert_eq!(primes_first(5).unwrap().values(), &[2, 3, 5, 7, 11]);
        assert_eq!(primes_first(1).unwrap().values(), &[2]);
        assert_eq!(primes_first(3000).unwrap().values(), trial_primes(3000).as_slice());
    }

    #[test]
    fn primes_first_rejects_zero_and_over_budget() {
        assert!(matches!(primes_first(0), Err(Error::InvalidParam(_))));
        let err = primes_first_with(1001, 1000, Exec::Sequential).unwrap_err();
        assert!(matches!(err, Error::Resource { requested: 1001, .. }));
    }

    #[test]
    fn windows() {
        assert_eq!(primes_window(1, 5).unwrap().values(), &[2, 3, 5, 7, 11]);
        assert_eq!(primes_window(3, 3).unwrap().values(), &[5]);
        assert!(primes_window(4, 3).is_err());
        assert!(primes_window(0, 3).is_err());
    }

    #[test]
    fn primorial_values() {
        let t = primorials(4).unwrap();
        assert_eq!(t.values(), vec![2, 6, 30, 210]);
        assert_eq!(primorials(1).unwrap().values(), vec![2]);
        let t6 = primorials(6).unwrap();
        assert_eq!(*t6.values().last().unwrap(), 30030);
        assert_eq!(t6.entries[0].reign_interval, None);
        assert_eq!(
            t6.entries[3].reign_interval,
            Some(("4.64e487".into(), "4.01e2607".into()))
        );
    }

    #[test]
    fn primorial_overflow_reports_k() {
        // product of the first 26 primes fits in u128, the 27th does not
        assert!(primorials(26).is_ok());
        assert!(matches!(primorials(27), Err(Error::Overflow { k: 27 })));
    }

    #[test]
    fn seq1_small_bounds() {
        assert_eq!(seq1_up_to(10).unwrap().values(), &[1, 2, 4, 8, 9]);
        assert_eq!(seq1_up_to(2).unwrap().values(), &[1]);
        assert!(seq1_up_to(1).unwrap().is_empty());
        assert!(seq1_up_to(0).is_err());
    }

    #[test]
    fn seq2_small_counts() {
        assert_eq!(seq2_first(8).unwrap().values(), &[1, 2, 4, 5, 8, 9, 10, 13]);
        assert_eq!(seq2_first(1).unwrap().values(), &[1]);
    }

    #[test]
    fn cramer_is_deterministic() {
        let a = cramer_sample(500, 42).unwrap();
        let b = cramer_sample(500, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), cramer_sample(500, 43).unwrap().values());
        let one = cramer_sample(1, 7).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.values()[0] >= 3);
    }

    #[test]
    fn geometric_mode_is_deterministic_and_increasing() {
        let a = control_sample(2000, 9, ControlMode::GeometricGaps, ControlDensity::Primes).unwrap();
        let b = control_sample(2000, 9, ControlMode::GeometricGaps, ControlDensity::Primes).unwrap();
        assert_eq!(a, b);
        assert!(a.values().windows(2).all(|w| w[0] < w[1]));
        assert!(control_sample(10, 1, ControlMode::GeometricGaps, ControlDensity::Seq1).is_err());
    }

    #[test]
    fn from_parts_validates() {
        assert!(matches!(
            IntegerSequence::custom(vec![1, 3, 3], "t"),
            Err(Error::NotIncreasing { index: 2 })
        ));
        assert!(matches!(
            IntegerSequence::from_parts(
                vec![2, 3, 9],
                SequenceKind::Primes,
                SequenceParams::Custom { source: "t".into() }
            ),
            Err(Error::NotPrime { value: 9 })
        ));
    }

    #[test]
    fn csv_round_trip_restores_kind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let seq = cramer_sample(300, 5).unwrap();
        seq.save(&path).unwrap();
        let back = IntegerSequence::load(&path).unwrap();
        assert_eq!(back, seq);
        let m: SequenceManifest = io::read_json(&io::sidecar_path(&path)).unwrap();
        assert_eq!(m.seed, Some(5));
        assert_eq!(m.count, 300);
        assert_eq!(m.max, seq.values().last().copied());
    }
}
