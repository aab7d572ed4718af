//! The digit schedule of `T_{s,l}`: points whose free positions take digits
//! in `{0, …, l-1}` and whose fixed positions are arranged so that no digit
//! has an asymptotic frequency.
//!
//! With `m₀ = 1`, `m_i = max(2, ⌊ln² q_i⌋ 2^i)`, `R₁ = m₁` and
//! `R_k = m₁⋯m_{k-1}(m_k - 1)`, group `k` consists of
//! `s R_k` free positions, `R_k` fixed zeros, runs of digit `j` of length
//! `R_k/m_j` for `j = 1..k-2`, and a run of digit `k-1` of length
//! `m₁⋯m_{k-2} m_k`. Group 1 has no trailing runs.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::codec::{DigitSequence, SequenceTail};
use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::precise;
use crate::qvector::StochasticVector;

pub const MAX_GROUPS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "digit", rename_all = "snake_case")]
pub enum Slot {
    Free,
    Fixed(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TslScheme {
    pub s: u64,
    pub l: u64,
    /// `m_0 = 1, m_1, …, m_{k_max}`.
    pub m: Vec<u64>,
    /// Indices `i` where `⌊ln² q_i⌋ 2^i < 2` and `m_i` was raised to 2.
    pub clamped: Vec<usize>,
}

fn decimal<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn opt_decimal<S: Serializer>(x: &Option<BigUint>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

/// Positions are 1-based: `n_k` is the length of the prefix through group `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupBoundary {
    pub k: usize,
    #[serde(serialize_with = "decimal")]
    pub n: BigUint,
    /// End of the fixed-zero run of group `k`.
    #[serde(serialize_with = "decimal")]
    pub n0: BigUint,
    /// End of the run of ones that follows it (none in group 1).
    #[serde(serialize_with = "opt_decimal")]
    pub n1: Option<BigUint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleCounts {
    pub free: BigUint,
    /// `fixed[j]` = number of `Fixed(j)` positions.
    pub fixed: Vec<BigUint>,
}

pub fn tsl_scheme(v: &StochasticVector, s: u64, l: u64, k_max: usize) -> Result<TslScheme> {
    if s == 0 {
        return Err(Error::param("s must be positive"));
    }
    if l <= 2 {
        return Err(Error::param("l must exceed 2"));
    }
    if k_max == 0 || k_max > MAX_GROUPS {
        return Err(Error::param(format!("k_max must lie in [1, {MAX_GROUPS}]")));
    }
    let mut m = vec![1u64];
    let mut clamped = Vec::new();
    for i in 1..=k_max {
        let q = v.weight(&Digit::from(i as u64))?;
        let fl = precise::floor_ln_squared(&q, v.precision())?;
        let raw = fl
            .checked_mul(1u64 << i)
            .ok_or_else(|| Error::Unsupported(format!("m_{i} overflows 64 bits")))?;
        if raw < 2 {
            clamped.push(i);
        }
        m.push(raw.max(2));
    }
    Ok(TslScheme { s, l, m, clamped })
}

impl TslScheme {
    pub fn k_max(&self) -> usize {
        self.m.len() - 1
    }

    fn check_group(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max() {
            return Err(Error::param(format!("group {k} outside [1, {}]", self.k_max())));
        }
        Ok(())
    }

    /// `Π_{i=1}^{k} m_i`.
    pub fn product(&self, k: usize) -> BigUint {
        self.m[1..=k].iter().fold(BigUint::one(), |acc, &x| acc * x)
    }

    pub fn r(&self, k: usize) -> BigUint {
        if k == 1 {
            BigUint::from(self.m[1])
        } else {
            self.product(k - 1) * (self.m[k] - 1)
        }
    }

    /// The runs of group `k`, in order. Zero-length runs are omitted.
    pub fn runs(&self, k: usize) -> Result<Vec<(Slot, BigUint)>> {
        self.check_group(k)?;
        let r = self.r(k);
        let mut runs = vec![(Slot::Free, &r * self.s), (Slot::Fixed(0), r.clone())];
        if k >= 2 {
            for j in 1..k - 1 {
                let (len, rem) = r.div_rem(&BigUint::from(self.m[j]));
                assert!(rem.is_zero(), "R_{k} is not divisible by m_{j}");
                runs.push((Slot::Fixed(j as u64), len));
            }
            let last = self.product(k - 2) * self.m[k];
            // Same value as R_k m_k / (m_{k-1}(m_k - 1)).
            debug_assert_eq!(&last * self.m[k - 1] * (self.m[k] - 1), &r * self.m[k]);
            runs.push((Slot::Fixed(k as u64 - 1), last));
        }
        Ok(runs.into_iter().filter(|(_, len)| !len.is_zero()).collect())
    }

    /// Boundaries from cumulative run lengths.
    pub fn boundaries(&self, upto: usize) -> Result<Vec<GroupBoundary>> {
        self.check_group(upto)?;
        let mut pos = BigUint::zero();
        let mut out = Vec::with_capacity(upto);
        for k in 1..=upto {
            let mut n0 = None;
            let mut n1 = None;
            for (slot, len) in self.runs(k)? {
                pos += &len;
                match slot {
                    Slot::Fixed(0) => n0 = Some(pos.clone()),
                    Slot::Fixed(1) if n1.is_none() => n1 = Some(pos.clone()),
                    _ => {}
                }
            }
            out.push(GroupBoundary { k, n: pos.clone(), n0: n0.expect("every group has zeros"), n1 });
        }
        Ok(out)
    }

    /// Closed form `n_k⁰ = (s+1) Π_{i≤k} m_i + Σ_{j=1}^{k-2} Π_{i≤k-1} m_i / m_j`.
    pub fn n0_formula(&self, k: usize) -> BigUint {
        let p = self.product(k - 1);
        let mut n = self.product(k) * (self.s + 1);
        for j in 1..k.saturating_sub(1) {
            n += &p / self.m[j];
        }
        n
    }

    /// Closed-form counts after group `k`: `s Π m_i` free positions and
    /// `Π m_i / m_j` positions fixed to `j < k`.
    pub fn counts_formula(&self, k: usize) -> ScheduleCounts {
        let p = self.product(k);
        ScheduleCounts {
            free: &p * self.s,
            fixed: (0..k).map(|j| &p / self.m[j]).collect(),
        }
    }

    /// Lazy iterator over the slots of groups `1..=upto`.
    pub fn schedule(&self, upto: usize) -> Result<Schedule> {
        self.check_group(upto)?;
        let mut runs = Vec::new();
        for k in 1..=upto {
            for (slot, len) in self.runs(k)? {
                let len = len
                    .to_u64()
                    .ok_or_else(|| Error::Unsupported(format!("group {k} is too long to iterate")))?;
                runs.push((slot, len));
            }
        }
        Ok(Schedule { runs, run: 0, used: 0 })
    }

    /// The slot at 1-based position `pos`.
    pub fn slot_at(&self, pos: &BigUint) -> Result<Slot> {
        if pos.is_zero() {
            return Err(Error::param("positions are 1-based"));
        }
        let mut end = BigUint::zero();
        for k in 1..=self.k_max() {
            for (slot, len) in self.runs(k)? {
                end += len;
                if pos <= &end {
                    return Ok(slot);
                }
            }
        }
        Err(Error::param(format!("position {pos} lies beyond group {}", self.k_max())))
    }
}

pub struct Schedule {
    runs: Vec<(Slot, u64)>,
    run: usize,
    used: u64,
}

impl Iterator for Schedule {
    type Item = Slot;

    fn next(&mut self) -> Option<Slot> {
        while let Some(&(slot, len)) = self.runs.get(self.run) {
            if self.used < len {
                self.used += 1;
                return Some(slot);
            }
            self.run += 1;
            self.used = 0;
        }
        None
    }
}

/// `position,kind,digit` rows; free slots leave the digit empty.
pub fn schedule_csv(slots: impl Iterator<Item = Slot>) -> String {
    let mut out = String::from("position,kind,digit\n");
    for (i, slot) in slots.enumerate() {
        let _ = match slot {
            Slot::Free => writeln!(out, "{},free,", i + 1),
            Slot::Fixed(j) => writeln!(out, "{},fixed,{j}", i + 1),
        };
    }
    out
}

/// A law on `{0, …, l-1}` for the free positions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeLaw {
    pub probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl FreeLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::param("free law needs non-negative probabilities"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("free law sums to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(FreeLaw { probs, cumulative })
    }

    /// `q_i / S_l` on `{0, …, l-1}`.
    pub fn truncated(v: &StochasticVector, l: u64) -> Result<Self> {
        let q: Vec<f64> = (0..l).map(|i| v.weight(&Digit::from(i)).map(|w| w.to_f64())).collect::<Result<_>>()?;
        let s: f64 = q.iter().sum();
        Self::new(q.into_iter().map(|x| x / s).collect())
    }

    pub fn uniform(l: u64) -> Result<Self> {
        Self::new(vec![1.0 / l as f64; l as usize])
    }

    pub fn support(&self) -> u64 {
        self.probs.len() as u64
    }

    pub fn draw(&self, u: f64) -> u64 {
        let i = self.cumulative.partition_point(|c| *c <= u);
        i.min(self.probs.len() - 1) as u64
    }
}

/// A word of length `depth` following the schedule; free positions draw i.i.d.
/// from `law`.
pub fn tsl_sampler(scheme: &TslScheme, depth: u64, law: &FreeLaw, seed: u64) -> Result<DigitSequence> {
    if law.support() > scheme.l {
        return Err(Error::param(format!("free law support exceeds l = {}", scheme.l)));
    }
    let groups = groups_covering(scheme, depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let digits = scheme
        .schedule(groups)?
        .take(depth as usize)
        .map(|slot| match slot {
            Slot::Free => Digit::from(law.draw(rng.gen::<f64>())),
            Slot::Fixed(j) => Digit::from(j),
        })
        .collect();
    Ok(DigitSequence::new(digits, SequenceTail::Unspecified))
}

/// Smallest number of groups whose total length reaches `depth`.
pub fn groups_covering(scheme: &TslScheme, depth: u64) -> Result<usize> {
    let b = scheme.boundaries(scheme.k_max())?;
    b.iter()
        .find(|g| g.n >= BigUint::from(depth))
        .map(|g| g.k)
        .ok_or_else(|| Error::param(format!("depth {depth} exceeds the scheme's {} groups", scheme.k_max())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luroth_m_sequence() {
        let v = StochasticVector::luroth();
        let t = tsl_scheme(&v, 1, 4, 10).unwrap();
        assert_eq!(t.m, vec![1, 6, 24, 64, 176, 416, 1024, 2304, 5120, 11264, 23552]);
        assert!(t.clamped.is_empty());
    }

    #[test]
    fn clamping_is_recorded() {
        // q_1 = 1/4 gives ⌊ln² 4⌋ = 1, so m_1 = 2 without clamping; q_1 = 1/2 clamps.
        use crate::numeric::ratio;
        use crate::qvector::TailRule;
        let v = StochasticVector::explicit(
            vec![ratio(1, 8), ratio(1, 2), ratio(1, 8)],
            TailRule::Geometric { ratio: ratio(1, 2) },
        )
        .unwrap();
        let t = tsl_scheme(&v, 1, 3, 3).unwrap();
        assert_eq!(t.m[1], 2);
        assert_eq!(t.clamped, vec![1]);
    }

    #[test]
    fn iteration_matches_closed_forms() {
        let v = StochasticVector::luroth();
        for s in [1u64, 2] {
            for l in [3u64, 4] {
                let t = tsl_scheme(&v, s, l, 4).unwrap();
                let bounds = t.boundaries(4).unwrap();
                let mut free = 0u64;
                let mut fixed = [0u64; 4];
                let mut pos = 0u64;
                let mut last_zero = 0u64;
                let mut k = 0usize;
                for slot in t.schedule(4).unwrap() {
                    pos += 1;
                    match slot {
                        Slot::Free => free += 1,
                        Slot::Fixed(j) => {
                            fixed[j as usize] += 1;
                            if j == 0 {
                                last_zero = pos;
                            }
                        }
                    }
                    if BigUint::from(pos) == bounds[k].n {
                        k += 1;
                        let c = t.counts_formula(k);
                        assert_eq!(BigUint::from(free), c.free);
                        for (j, (got, want)) in fixed.iter().zip(&c.fixed).enumerate().take(k) {
                            assert_eq!(&BigUint::from(*got), want, "s={s} l={l} k={k} j={j}");
                        }
                        assert_eq!(BigUint::from(last_zero), t.n0_formula(k));
                        assert_eq!(bounds[k - 1].n0, t.n0_formula(k));
                    }
                }
                assert_eq!(k, 4);
            }
        }
    }

    #[test]
    fn ones_run_follows_zeros() {
        let v = StochasticVector::luroth();
        let t = tsl_scheme(&v, 1, 3, 4).unwrap();
        let b = t.boundaries(4).unwrap();
        assert_eq!(b[0].n1, None);
        // Group 2: the run of ones is the special run of length m_2.
        assert_eq!(b[1].n1.as_ref().unwrap(), &(&b[1].n0 + t.m[2]));
        for k in 3..=4 {
            assert_eq!(b[k - 1].n1.as_ref().unwrap(), &(&b[k - 1].n0 + t.r(k) / t.m[1]));
        }
    }

    #[test]
    fn slot_lookup_agrees_with_iteration() {
        let v = StochasticVector::luroth();
        let t = tsl_scheme(&v, 1, 3, 3).unwrap();
        for (i, slot) in t.schedule(3).unwrap().enumerate().step_by(37) {
            assert_eq!(t.slot_at(&BigUint::from(i as u64 + 1)).unwrap(), slot);
        }
    }

    #[test]
    fn sampler_respects_fixed_slots() {
        let v = StochasticVector::luroth();
        let t = tsl_scheme(&v, 2, 4, 3).unwrap();
        let law = FreeLaw::truncated(&v, 4).unwrap();
        let w = tsl_sampler(&t, 2000, &law, 9).unwrap();
        for (d, slot) in w.digits.iter().zip(t.schedule(3).unwrap()) {
            match slot {
                Slot::Fixed(j) => assert_eq!(d, &Digit::from(j)),
                Slot::Free => assert!(d.as_u64().unwrap() < 4),
            }
        }
    }

    #[test]
    fn csv_rows() {
        let csv = schedule_csv([Slot::Free, Slot::Fixed(2)].into_iter());
        assert_eq!(csv, "position,kind,digit\n1,free,\n2,fixed,2\n");
    }
}
