//! Consecutive-gap and bounded all-pairs difference histograms, and a
//! parity-aware spike detector over them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::par::{map_chunks, split_ranges, Exec};
use crate::sequences::IntegerSequence;

/// Largest `max_diff` accepted by [`pair_diff_histogram`]; each worker holds
/// a dense `max_diff + 1` tally.
pub const MAX_PAIR_DIFF: u64 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    Consecutive,
    AllPairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapHistogram {
    pub counts: BTreeMap<u64, u64>,
    pub mode: PairingMode,
    /// Cap on recorded differences (all-pairs mode only).
    pub max_diff: Option<u64>,
    pub source: String,
}

impl GapHistogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, d: u64) -> u64 {
        self.counts.get(&d).copied().unwrap_or(0)
    }

    /// Most frequent difference; ties go to the smaller difference.
    pub fn argmax(&self) -> Option<u64> {
        self.counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&d, _)| d)
    }

    /// Largest difference that could carry a count.
    fn upper_difference(&self) -> u64 {
        match self.mode {
            PairingMode::AllPairs => self.max_diff.unwrap_or(0),
            PairingMode::Consecutive => self.counts.keys().next_back().copied().unwrap_or(0),
        }
    }

    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let rows = self
            .counts
            .iter()
            .map(|(d, c)| vec![d.to_string(), c.to_string()]);
        io::write_csv(csv_path, &["difference", "count"], rows)
    }
}

/// Histogram of `seq[i+1] - seq[i]`.
pub fn consecutive_gaps(seq: &IntegerSequence) -> Result<GapHistogram> {
    let v = seq.values();
    if v.len() < 2 {
        return Err(Error::Length {
            what: "consecutive gap histogram",
            needed: 2,
            got: v.len(),
        });
    }
    let mut counts = BTreeMap::new();
    for w in v.windows(2) {
        *counts.entry(w[1] - w[0]).or_insert(0) += 1;
    }
    Ok(GapHistogram {
        counts,
        mode: PairingMode::Consecutive,
        max_diff: None,
        source: seq.label(),
    })
}

/// Histogram of all differences `seq[j] - seq[i] <= max_diff` with `i < j`.
///
/// Each left index scans forward only while the difference stays within
/// `max_diff`, so the cost is proportional to the number of qualifying pairs.
pub fn pair_diff_histogram(
    seq: &IntegerSequence,
    max_diff: u64,
    exec: Exec,
) -> Result<GapHistogram> {
    let v = seq.values();
    if v.len() < 2 {
        return Err(Error::Length {
            what: "pair difference histogram",
            needed: 2,
            got: v.len(),
        });
    }
    if max_diff == 0 {
        return Err(Error::invalid("max_diff must be at least 1"));
    }
    if max_diff > MAX_PAIR_DIFF {
        return Err(Error::Resource {
            what: "max_diff",
            requested: max_diff,
            limit: MAX_PAIR_DIFF,
        });
    }

    let parts = if exec.is_parallel() { 64 } else { 1 };
    let ranges = split_ranges(v.len(), parts);
    let partials = map_chunks(exec, ranges.len(), |c| {
        let mut tally = vec![0u64; max_diff as usize + 1];
        for i in ranges[c].clone() {
            let base = v[i];
            for &x in &v[i + 1..] {
                let d = x - base;
                if d > max_diff {
                    break;
                }
                tally[d as usize] += 1;
            }
        }
        tally
    });

    let mut total = vec![0u64; max_diff as usize + 1];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    let counts = total
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(d, c)| (d as u64, c))
        .collect();
    Ok(GapHistogram {
        counts,
        mode: PairingMode::AllPairs,
        max_diff: Some(max_diff),
        source: seq.label(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub difference: u64,
    pub count: u64,
    /// Median count of same-parity neighbours within the window.
    pub local_baseline: f64,
    /// `count / local_baseline`; `null` in JSON when the baseline is zero.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeReport {
    pub spikes: Vec<Spike>,
    pub window: u64,
    pub ratio: f64,
    pub source: String,
}

impl SpikeReport {
    pub fn differences(&self) -> Vec<u64> {
        self.spikes.iter().map(|s| s.difference).collect()
    }

    pub fn save(&self, json_path: &Path) -> Result<()> {
        io::write_json(json_path, self)
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Flags difference `d` when its count is at least `ratio` times the median
/// count over same-parity differences in `[d - window, d + window]` (d
/// itself excluded) and strictly exceeds its same-parity neighbours `d ± 2`.
/// Missing differences count as zero.
pub fn find_spikes(hist: &GapHistogram, window: u64, ratio: f64) -> Result<SpikeReport> {
    if window < 2 {
        return Err(Error::invalid("spike window must be at least 2"));
    }
    if !(ratio > 1.0) {
        return Err(Error::invalid("spike ratio must exceed 1"));
    }
    if hist.counts.is_empty() {
        return Err(Error::Length {
            what: "spike detection",
            needed: 1,
            got: 0,
        });
    }
    let upper = hist.upper_difference();
    let mut spikes = Vec::new();
    let mut neighbours = Vec::with_capacity(window as usize + 1);

    for (&d, &c) in &hist.counts {
        let left = d.checked_sub(2).filter(|&x| x >= 1).map(|x| hist.count(x));
        let right = (d + 2 <= upper).then(|| hist.count(d + 2));
        let is_local_max = left.is_none_or(|l| c > l) && right.is_none_or(|r| c > r);
        if !is_local_max {
            continue;
        }

        neighbours.clear();
        let lo = d.saturating_sub(window);
        let mut x = lo + (d - lo) % 2;
        while x <= (d + window).min(upper) {
            if x >= 1 && x != d {
                neighbours.push(hist.count(x) as f64);
            }
            x += 2;
        }
        let baseline = median(&mut neighbours);
        if c as f64 >= ratio * baseline {
            spikes.push(Spike {
                difference: d,
                count: c,
                local_baseline: baseline,
                ratio: c as f64 / baseline,
            });
        }
    }
    Ok(SpikeReport {
        spikes,
        window,
        ratio,
        source: hist.source.clone(),
    })
}
