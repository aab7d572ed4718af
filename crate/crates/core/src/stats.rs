//! Digit frequencies and finite-depth diagnostics.
//!
//! Everything here describes a finite prefix. Whether a point is normal,
//! or has no asymptotic digit frequencies at all, is a tail property and is
//! never decided from a prefix.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::{BigInt, RandBigInt};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::encode_rational;
use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::numeric::derive_seed;
use crate::qvector::StochasticVector;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub depth: usize,
    pub counts: BTreeMap<Digit, u64>,
    /// Per digit, `(min, max)` of the running frequency over the trailing half
    /// of the prefix (positions `depth/2 ..= depth`).
    pub oscillation: BTreeMap<Digit, (f64, f64)>,
}

impl FrequencyReport {
    pub fn count(&self, d: &Digit) -> u64 {
        self.counts.get(d).copied().unwrap_or(0)
    }

    pub fn frequency(&self, d: &Digit) -> f64 {
        if self.depth == 0 {
            0.0
        } else {
            self.count(d) as f64 / self.depth as f64
        }
    }

    /// Exact running frequency `N_d / n` at the full depth.
    pub fn exact_frequency(&self, d: &Digit) -> Option<BigRational> {
        (self.depth > 0).then(|| BigRational::new(BigInt::from(self.count(d)), BigInt::from(self.depth)))
    }

    /// Counts over a concatenation are the sums of the counts.
    pub fn merge(&self, other: &FrequencyReport) -> FrequencyReport {
        let mut counts = self.counts.clone();
        for (d, c) in &other.counts {
            *counts.entry(d.clone()).or_insert(0) += c;
        }
        FrequencyReport { depth: self.depth + other.depth, counts, oscillation: BTreeMap::new() }
    }

    pub fn to_csv(&self, v: Option<&StochasticVector>) -> String {
        let mut out = String::from("digit,count,frequency,expected,z\n");
        let n = self.depth as f64;
        for (d, c) in &self.counts {
            let f = *c as f64 / n;
            match v.and_then(|v| v.weight(d).ok()) {
                Some(q) => {
                    let q = q.to_f64();
                    let z = (f - q) / (q * (1.0 - q) / n).sqrt();
                    let _ = writeln!(out, "{d},{c},{f},{q},{z}");
                }
                None => {
                    let _ = writeln!(out, "{d},{c},{f},,");
                }
            }
        }
        out
    }
}

pub fn digit_counts(word: &[Digit]) -> FrequencyReport {
    let n = word.len();
    let window_start = (n / 2).max(1);
    let mut counts: BTreeMap<Digit, u64> = BTreeMap::new();
    // Between occurrences N_d(k)/k only decreases, so extremes over the
    // window sit at its ends or just before/after an occurrence.
    let mut osc: BTreeMap<Digit, (f64, f64)> = BTreeMap::new();
    let mut at_window_start: BTreeMap<Digit, u64> = BTreeMap::new();
    for (idx, d) in word.iter().enumerate() {
        let k = idx + 1;
        if k == window_start + 1 {
            at_window_start = counts.clone();
        }
        let c = counts.entry(d.clone()).or_insert(0);
        *c += 1;
        if k >= window_start {
            let e = osc.entry(d.clone()).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            let after = *c as f64 / k as f64;
            e.1 = e.1.max(after);
            if k > window_start {
                let before = (*c - 1) as f64 / (k - 1) as f64;
                e.0 = e.0.min(before);
            }
        }
    }
    if n > 0 && window_start == n {
        at_window_start = counts.clone();
    }
    for (d, c) in &counts {
        let e = osc.entry(d.clone()).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        let start = at_window_start.get(d).copied().unwrap_or(0) as f64 / window_start as f64;
        let end = *c as f64 / n as f64;
        let start = if window_start == n { end } else { start };
        e.0 = e.0.min(start).min(end);
        e.1 = e.1.max(start).max(end);
    }
    FrequencyReport { depth: n, counts, oscillation: osc }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationPoint {
    pub n: usize,
    pub count: u64,
    pub frequency: f64,
}

/// Running frequency of `digit` at each checkpoint (1-based prefix lengths).
pub fn oscillation_profile(word: &[Digit], digit: &Digit, checkpoints: &[usize]) -> Result<Vec<OscillationPoint>> {
    let mut sorted: Vec<usize> = checkpoints.to_vec();
    sorted.sort_unstable();
    if let Some(&bad) = sorted.iter().find(|&&c| c == 0 || c > word.len()) {
        return Err(Error::param(format!("checkpoint {bad} outside [1, {}]", word.len())));
    }
    let mut prefix_counts = Vec::with_capacity(sorted.len());
    let mut count = 0u64;
    let mut pos = 0usize;
    for &c in &sorted {
        while pos < c {
            if &word[pos] == digit {
                count += 1;
            }
            pos += 1;
        }
        prefix_counts.push((c, count));
    }
    let lookup: BTreeMap<usize, u64> = prefix_counts.into_iter().collect();
    Ok(checkpoints
        .iter()
        .map(|&n| {
            let count = lookup[&n];
            OscillationPoint { n, count, frequency: count as f64 / n as f64 }
        })
        .collect())
}

pub fn oscillation_csv(points: &[OscillationPoint]) -> String {
    let mut out = String::from("n,count,frequency\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.n, p.count, p.frequency);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Each digit from a fresh uniform. The digits of a Lebesgue-uniform point
    /// are i.i.d. with law `q`, so this has the same distribution as encoding
    /// a uniform point, at a fraction of the cost.
    Renewal,
    /// Draw a random dyadic point and encode it exactly.
    ExactPoint,
}

#[derive(Clone, Debug, Serialize)]
pub struct LlnRow {
    pub digit: u64,
    pub count: u64,
    pub empirical: f64,
    pub expected: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LlnReport {
    pub samples: u64,
    pub depth: usize,
    pub seed: u64,
    pub mode: SamplingMode,
    pub rows: Vec<LlnRow>,
}

impl LlnReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("digit,count,frequency,expected,z\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.digit, r.count, r.empirical, r.expected, r.z);
        }
        out
    }
}

/// Empirical frequencies of digits `0..digits` over `samples` points, each
/// expanded to `depth` digits, with per-digit z-scores against `q_i`.
pub fn lln_harness(
    v: &StochasticVector,
    samples: u64,
    depth: usize,
    digits: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<LlnReport> {
    if depth == 0 {
        return Err(Error::param("depth must be at least 1"));
    }
    let mut report = LlnReport { samples, depth, seed, mode, rows: Vec::new() };
    if samples == 0 {
        return Ok(report);
    }
    let counts: Vec<u64> = match mode {
        SamplingMode::Renewal => {
            let sampler = v.sampler()?;
            (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i));
                    let mut local = vec![0u64; digits];
                    for _ in 0..depth {
                        let d = sampler.sample(rng.gen::<f64>());
                        if (d as usize) < digits {
                            local[d as usize] += 1;
                        }
                    }
                    local
                })
                .reduce(|| vec![0u64; digits], add_counts)
        }
        SamplingMode::ExactPoint => {
            let bits = 64 + 16 * depth as u64;
            let partial: Result<Vec<Vec<u64>>> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i));
                    let num = rng.gen_biguint(bits);
                    let x = BigRational::new(BigInt::from(num), BigInt::from(1u8) << bits);
                    let seq = encode_rational(&x, v, depth)?;
                    let mut local = vec![0u64; digits];
                    for d in &seq.digits {
                        if let Some(k) = d.as_u64().filter(|k| (*k as usize) < digits) {
                            local[k as usize] += 1;
                        }
                    }
                    Ok(local)
                })
                .collect();
            partial?.into_iter().fold(vec![0u64; digits], add_counts)
        }
    };
    let total = samples as f64 * depth as f64;
    for (i, &count) in counts.iter().enumerate() {
        let q = v.weight(&Digit::from(i as u64))?.to_f64();
        let empirical = count as f64 / total;
        let z = (empirical - q) / (q * (1.0 - q) / total).sqrt();
        report.rows.push(LlnRow { digit: i as u64, count, empirical, expected: q, z });
    }
    Ok(report)
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    fn word(ds: &[u64]) -> Vec<Digit> {
        ds.iter().map(|&d| Digit::from(d)).collect()
    }

    #[test]
    fn counts_example() {
        let r = digit_counts(&word(&[0, 2, 0, 0]));
        assert_eq!(r.count(&Digit::ZERO), 3);
        assert_eq!(r.count(&Digit::from(2u64)), 1);
        assert_eq!(r.exact_frequency(&Digit::ZERO), Some(ratio(3, 4)));
        let e = digit_counts(&[]);
        assert_eq!(e.depth, 0);
        assert!(e.counts.is_empty());
    }

    #[test]
    fn oscillation_window_extremes() {
        // running freq of 0 on 0,1,1,1,0,0,0,0: window k = 4..8
        let w = word(&[0, 1, 1, 1, 0, 0, 0, 0]);
        let r = digit_counts(&w);
        let (lo, hi) = r.oscillation[&Digit::ZERO];
        let brute: Vec<f64> = (4..=8)
            .map(|k| w[..k].iter().filter(|d| d.is_zero()).count() as f64 / k as f64)
            .collect();
        assert_eq!(lo, brute.iter().cloned().fold(f64::INFINITY, f64::min));
        assert_eq!(hi, brute.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn profile_examples() {
        let zeros = word(&[0; 10]);
        let p = oscillation_profile(&zeros, &Digit::ZERO, &[1, 5, 10]).unwrap();
        assert!(p.iter().all(|x| x.frequency == 1.0));
        let alt: Vec<Digit> = (0..20).map(|i| Digit::from((i % 2) as u64)).collect();
        let p = oscillation_profile(&alt, &Digit::ZERO, &[2, 4, 10, 20]).unwrap();
        assert!(p.iter().all(|x| x.frequency == 0.5));
        assert!(oscillation_profile(&alt, &Digit::ZERO, &[21]).is_err());
        assert!(oscillation_profile(&alt, &Digit::ZERO, &[0]).is_err());
    }

    #[test]
    fn lln_small_runs() {
        let v = StochasticVector::luroth();
        let r = lln_harness(&v, 2000, 50, 3, 7, SamplingMode::Renewal).unwrap();
        assert!(r.max_abs_z() < 4.5, "{:?}", r.rows);
        let again = lln_harness(&v, 2000, 50, 3, 7, SamplingMode::Renewal).unwrap();
        assert_eq!(r.to_csv(), again.to_csv());
        let g = StochasticVector::geometric(ratio(1, 2)).unwrap();
        let r = lln_harness(&g, 2000, 20, 2, 1, SamplingMode::Renewal).unwrap();
        assert!((r.rows[1].empirical - 0.25).abs() < 0.01);
        let r = lln_harness(&v, 300, 20, 2, 3, SamplingMode::ExactPoint).unwrap();
        assert!(r.max_abs_z() < 4.5, "{:?}", r.rows);
        assert!(lln_harness(&v, 0, 5, 2, 1, SamplingMode::Renewal).unwrap().rows.is_empty());
    }
}
