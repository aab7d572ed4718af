//! Product measures with independent digits.
//!
//! Position `k` carries its own digit law `p_{·k}`. For such measures the
//! dimension with respect to the cylinder net is
//! `liminf Σ_{k≤n} h_k / Σ_{k≤n} b_k`, with the entropy `h_k = -Σ p ln p`
//! and the cross-entropy `b_k = -Σ p ln q` (under second-moment conditions,
//! checked by [`moment_conditions`]).

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::DigitSequence;
use crate::constructions::cantor::{CantorMode, CantorSampler, CantorScheme};
use crate::constructions::tsl::{tsl_sampler, FreeLaw, Slot, TslScheme};
use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::qvector::{Family, StochasticVector};
use crate::real::Real;

/// The law of a single digit position.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DigitLaw {
    Deterministic { digit: Digit },
    /// `q_i / S_l` on `{0, …, l-1}`.
    TruncatedRenormalized { l: u64 },
    /// `1/l` on `{0, …, l-1}`.
    Uniform { l: u64 },
    /// `q_i / γ_k` on `V_k = [lo, hi]`.
    VkRenormalized { k: usize, lo: Digit, hi: Digit },
}

#[derive(Clone, Debug)]
pub enum MeasureKind {
    /// `ξ(l)`: free positions of `T_{s,l}` follow `q_i/S_l`, fixed positions are deterministic.
    Xi { scheme: TslScheme },
    /// `μ_ξ` on the Cantor-type set: digit `k` follows `q_i/γ_k` on `V_k`.
    CantorGamma { scheme: CantorScheme, depth: usize },
    /// The same law at every position.
    Iid { law: DigitLaw },
}

pub struct ProductMeasure<'a> {
    v: &'a StochasticVector,
    kind: MeasureKind,
    // Truncated law over {0, …, l-1}: ln S_l and ln q_i.
    ln_s_l: f64,
    ln_q_head: Vec<f64>,
    // ln γ_k for the Cantor levels.
    ln_gamma: Vec<f64>,
    gamma: Vec<Real>,
}

/// Mass of a cylinder, always with its logarithm; the exact value is kept
/// for short words over exact vectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mass {
    pub ln_mass: f64,
    pub mass: Option<Real>,
}

const EXACT_MASS_MAX_LEN: usize = 256;

impl<'a> ProductMeasure<'a> {
    pub fn new(v: &'a StochasticVector, kind: MeasureKind) -> Result<Self> {
        let head_len = match &kind {
            MeasureKind::Xi { scheme } => scheme.l,
            MeasureKind::Iid { law: DigitLaw::TruncatedRenormalized { l } | DigitLaw::Uniform { l } } => *l,
            _ => 0,
        };
        let ln_q_head: Vec<f64> =
            (0..head_len).map(|i| v.ln_weight(&Digit::from(i))).collect::<Result<_>>()?;
        let ln_s_l = if head_len > 0 { v.prefix(&Digit::from(head_len))?.ln() } else { 0.0 };
        let (gamma, ln_gamma) = match &kind {
            MeasureKind::CantorGamma { scheme, depth } => {
                let g = scheme.gammas(v, *depth)?;
                let l = g.iter().map(Real::ln).collect();
                (g, l)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Ok(ProductMeasure { v, kind, ln_s_l, ln_q_head, ln_gamma, gamma })
    }

    pub fn xi(v: &'a StochasticVector, scheme: TslScheme) -> Result<Self> {
        Self::new(v, MeasureKind::Xi { scheme })
    }

    pub fn cantor_gamma(v: &'a StochasticVector, scheme: CantorScheme, depth: usize) -> Result<Self> {
        if depth > scheme.exact_depth() {
            return Err(Error::param(format!("depth {depth} exceeds the exact levels ({})", scheme.exact_depth())));
        }
        Self::new(v, MeasureKind::CantorGamma { scheme, depth })
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn vector(&self) -> &StochasticVector {
        self.v
    }

    /// The law at 1-based position `k`.
    pub fn law_at(&self, k: u64) -> Result<DigitLaw> {
        if k == 0 {
            return Err(Error::param("positions are 1-based"));
        }
        match &self.kind {
            MeasureKind::Xi { scheme } => Ok(slot_law(scheme.slot_at(&BigUint::from(k))?, scheme.l)),
            MeasureKind::CantorGamma { scheme, depth } => {
                if k as usize > *depth {
                    return Err(Error::param(format!("position {k} beyond depth {depth}")));
                }
                let (lo, hi) = scheme.v_range(k as usize)?;
                Ok(DigitLaw::VkRenormalized { k: k as usize, lo, hi })
            }
            MeasureKind::Iid { law } => Ok(law.clone()),
        }
    }

    /// `ln p_{d,k}` under `law` (−∞ off the support).
    pub fn ln_prob(&self, law: &DigitLaw, d: &Digit) -> Result<f64> {
        Ok(match law {
            DigitLaw::Deterministic { digit } => {
                if digit == d {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            DigitLaw::TruncatedRenormalized { l } => match d.as_u64().filter(|i| i < l) {
                Some(i) => self.ln_q(i)? - self.ln_s(*l)?,
                None => f64::NEG_INFINITY,
            },
            DigitLaw::Uniform { l } => match d.as_u64().filter(|i| i < l) {
                Some(_) => -(*l as f64).ln(),
                None => f64::NEG_INFINITY,
            },
            DigitLaw::VkRenormalized { k, lo, hi } => {
                if lo <= d && d <= hi {
                    self.v.ln_weight(d)? - self.ln_gamma[k - 1]
                } else {
                    f64::NEG_INFINITY
                }
            }
        })
    }

    fn ln_q(&self, i: u64) -> Result<f64> {
        match self.ln_q_head.get(i as usize) {
            Some(x) => Ok(*x),
            None => self.v.ln_weight(&Digit::from(i)),
        }
    }

    fn ln_s(&self, l: u64) -> Result<f64> {
        if l as usize == self.ln_q_head.len() {
            Ok(self.ln_s_l)
        } else {
            Ok(self.v.prefix(&Digit::from(l))?.ln())
        }
    }

    fn exact_prob(&self, law: &DigitLaw, d: &Digit) -> Result<Option<Real>> {
        Ok(match law {
            DigitLaw::Deterministic { digit } => Some(if digit == d { Real::one() } else { Real::zero() }),
            DigitLaw::TruncatedRenormalized { l } => match d.as_u64().filter(|i| i < l) {
                Some(_) => Some(self.v.weight(d)?.div(&self.v.prefix(&Digit::from(*l))?)),
                None => Some(Real::zero()),
            },
            DigitLaw::Uniform { l } => match d.as_u64().filter(|i| i < l) {
                Some(_) => Some(Real::Exact(crate::numeric::ratio(1, *l))),
                None => Some(Real::zero()),
            },
            DigitLaw::VkRenormalized { k, lo, hi } => {
                if lo <= d && d <= hi {
                    Some(self.v.weight(d)?.div(&self.gamma[k - 1]))
                } else {
                    Some(Real::zero())
                }
            }
        })
    }

    fn laws_for(&self, n: usize) -> Result<Vec<DigitLaw>> {
        match &self.kind {
            MeasureKind::Xi { scheme } => {
                let groups = crate::constructions::tsl::groups_covering(scheme, n as u64)?;
                Ok(scheme.schedule(groups)?.take(n).map(|s| slot_law(s, scheme.l)).collect())
            }
            _ => (1..=n as u64).map(|k| self.law_at(k)).collect(),
        }
    }

    /// `μ(Δ_word) = Π_k p_{α_k, k}`.
    pub fn cylinder_mass(&self, word: &[Digit]) -> Result<Mass> {
        let laws = self.laws_for(word.len())?;
        let mut ln_mass = CompensatedSum::new();
        let mut zero = false;
        for (d, law) in word.iter().zip(&laws) {
            let lp = self.ln_prob(law, d)?;
            if lp == f64::NEG_INFINITY {
                zero = true;
                break;
            }
            ln_mass.add(lp);
        }
        if zero {
            return Ok(Mass { ln_mass: f64::NEG_INFINITY, mass: Some(Real::zero()) });
        }
        let mass = if self.v.is_exact() && word.len() <= EXACT_MASS_MAX_LEN {
            let mut acc = Real::one();
            for (d, law) in word.iter().zip(&laws) {
                match self.exact_prob(law, d)? {
                    Some(p) => acc = acc.mul(&p),
                    None => return Ok(Mass { ln_mass: ln_mass.value(), mass: None }),
                }
            }
            Some(acc)
        } else {
            None
        };
        Ok(Mass { ln_mass: ln_mass.value(), mass })
    }

    /// `(h_k, b_k)` at position `k`.
    pub fn entropy_terms(&self, k: u64) -> Result<(f64, f64)> {
        let law = self.law_at(k)?;
        self.law_entropy(&law)
    }

    pub fn law_entropy(&self, law: &DigitLaw) -> Result<(f64, f64)> {
        match law {
            DigitLaw::Deterministic { digit } => Ok((0.0, -self.v.ln_weight(digit)?)),
            DigitLaw::TruncatedRenormalized { l } => {
                let ln_s = self.ln_s(*l)?;
                let mut b = CompensatedSum::new();
                for i in 0..*l {
                    let lq = self.ln_q(i)?;
                    b.add(-(lq - ln_s).exp() * lq);
                }
                let b = b.value();
                // h = -Σ p (ln q - ln S) = b + ln S
                let h = b + ln_s;
                debug_assert!(h <= b);
                Ok((h, b))
            }
            DigitLaw::Uniform { l } => {
                let mut b = CompensatedSum::new();
                for i in 0..*l {
                    b.add(-self.ln_q(i)?);
                }
                Ok(((*l as f64).ln(), b.value() / *l as f64))
            }
            DigitLaw::VkRenormalized { k, lo, hi } => {
                let (a, z) = match (lo.as_u64(), hi.as_u64()) {
                    (Some(a), Some(z)) if z - a < 50_000_000 => (a, z),
                    _ => return Err(Error::Unsupported(format!("entropy of V_{k} by direct summation"))),
                };
                let lg = self.ln_gamma[k - 1];
                let mut h = CompensatedSum::new();
                let mut b = CompensatedSum::new();
                for i in a..=z {
                    let lq = self.v.ln_weight(&Digit::from(i))?;
                    let p = (lq - lg).exp();
                    h.add(-p * (lq - lg));
                    b.add(-p * lq);
                }
                Ok((h.value(), b.value()))
            }
        }
    }

    /// Draw a word of length `depth` from the measure.
    pub fn sample(&self, depth: usize, seed: u64) -> Result<DigitSequence> {
        match &self.kind {
            MeasureKind::Xi { scheme } => {
                tsl_sampler(scheme, depth as u64, &FreeLaw::truncated(self.v, scheme.l)?, seed)
            }
            MeasureKind::CantorGamma { scheme, .. } => {
                CantorSampler::new(scheme, self.v, CantorMode::GammaWeighted, depth)?.sample(seed)
            }
            MeasureKind::Iid { law } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let digits = match law {
                    DigitLaw::Deterministic { digit } => vec![digit.clone(); depth],
                    DigitLaw::TruncatedRenormalized { l } => {
                        let fl = FreeLaw::truncated(self.v, *l)?;
                        (0..depth).map(|_| Digit::from(fl.draw(rng.gen()))).collect()
                    }
                    DigitLaw::Uniform { l } => (0..depth).map(|_| Digit::from(rng.gen_range(0..*l))).collect(),
                    DigitLaw::VkRenormalized { .. } => {
                        return Err(Error::Unsupported("i.i.d. sampling from a V_k law".into()))
                    }
                };
                Ok(DigitSequence::prefix(digits))
            }
        }
    }
}

fn slot_law(slot: Slot, l: u64) -> DigitLaw {
    match slot {
        Slot::Free => DigitLaw::TruncatedRenormalized { l },
        Slot::Fixed(j) => DigitLaw::Deterministic { digit: Digit::from(j) },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalDimension {
    /// `ln μ(Δ_k)` for `k = 1..=n`.
    pub ln_mass: Vec<f64>,
    /// `ln |Δ_k|`.
    pub ln_length: Vec<f64>,
    /// `ln μ(Δ_k) / ln |Δ_k|`.
    pub ratio: Vec<f64>,
}

impl LocalDimension {
    /// `ln( μ(Δ_k) / |Δ_k|^α )`.
    pub fn ln_mass_over_length(&self, alpha: f64) -> Vec<f64> {
        self.ln_mass.iter().zip(&self.ln_length).map(|(m, l)| m - alpha * l).collect()
    }
}

pub fn local_dimension_series(m: &ProductMeasure<'_>, word: &[Digit]) -> Result<LocalDimension> {
    let laws = m.laws_for(word.len())?;
    let mut ln_mass = CompensatedSum::new();
    let mut ln_len = CompensatedSum::new();
    let mut out = LocalDimension { ln_mass: Vec::new(), ln_length: Vec::new(), ratio: Vec::new() };
    for (k, (d, law)) in word.iter().zip(&laws).enumerate() {
        let lp = m.ln_prob(law, d)?;
        if lp == f64::NEG_INFINITY {
            return Err(Error::Undefined(format!("the word has zero mass at position {}", k + 1)));
        }
        ln_mass.add(lp);
        ln_len.add(m.v.ln_weight(d)?);
        let (a, b) = (ln_mass.value(), ln_len.value());
        out.ln_mass.push(a);
        out.ln_length.push(b);
        out.ratio.push(if a == 0.0 { 0.0 } else { a / b });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentVerdict {
    /// Both series certified convergent.
    Pass,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub horizon: u64,
    /// `Σ_{k≤n} (Σ_i p_{ik} ln² p_{ik}) / k²`.
    pub first_partial: f64,
    /// `Σ_{k≤n} (Σ_i p_{ik} ln² q_i) / k²`.
    pub second_partial: f64,
    /// Certified upper bound for the full first series, when available.
    pub first_bound: Option<f64>,
    /// Certified upper bound for the full second series, when available.
    pub second_bound: Option<f64>,
    pub verdict: MomentVerdict,
}

fn law_second_moments(m: &ProductMeasure<'_>, law: &DigitLaw) -> Result<(f64, f64)> {
    match law {
        DigitLaw::Deterministic { digit } => Ok((0.0, m.v.ln_weight(digit)?.powi(2))),
        DigitLaw::TruncatedRenormalized { l } | DigitLaw::Uniform { l } => {
            let mut a = CompensatedSum::new();
            let mut b = CompensatedSum::new();
            for i in 0..*l {
                let lp = m.ln_prob(law, &Digit::from(i))?;
                let lq = m.ln_q(i)?;
                let p = lp.exp();
                a.add(p * lp * lp);
                b.add(p * lq * lq);
            }
            Ok((a.value(), b.value()))
        }
        DigitLaw::VkRenormalized { k, .. } => Err(Error::Unsupported(format!("second moments of V_{k}"))),
    }
}

/// Partial sums of both moment series up to `horizon`, with certified bounds
/// for the `ξ(l)` and i.i.d. truncated measures.
pub fn moment_conditions(m: &ProductMeasure<'_>, horizon: u64) -> Result<MomentReport> {
    if horizon == 0 {
        return Err(Error::param("horizon must be at least 1"));
    }
    let laws = m.laws_for(horizon as usize)?;
    let mut first = CompensatedSum::new();
    let mut second = CompensatedSum::new();
    let mut cache: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for (k, law) in laws.iter().enumerate() {
        let key = format!("{law:?}");
        let (a, b) = match cache.get(&key) {
            Some(x) => *x,
            None => {
                let x = law_second_moments(m, law)?;
                cache.insert(key, x);
                x
            }
        };
        let w = 1.0 / ((k + 1) as f64).powi(2);
        first.add(a * w);
        second.add(b * w);
    }
    let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
    let (first_bound, second_bound) = match &m.kind {
        MeasureKind::Xi { scheme } => {
            let (a, b) = law_second_moments(m, &DigitLaw::TruncatedRenormalized { l: scheme.l })?;
            // Fix(j) positions all exceed m_j, so Σ_{i∈Fix(j)} 1/i² < 1/m_j.
            match fixed_moment_bound(m.v, scheme)? {
                Some(fixed) => (Some(a * zeta2), Some(b * zeta2 + fixed)),
                None => (Some(a * zeta2), None),
            }
        }
        MeasureKind::Iid { law } if !matches!(law, DigitLaw::VkRenormalized { .. }) => {
            let (a, b) = law_second_moments(m, law)?;
            (Some(a * zeta2), Some(b * zeta2))
        }
        _ => (None, None),
    };
    let verdict = if first_bound.is_some() && second_bound.is_some() {
        MomentVerdict::Pass
    } else {
        MomentVerdict::Inconclusive
    };
    Ok(MomentReport {
        horizon,
        first_partial: first.value(),
        second_partial: second.value(),
        first_bound,
        second_bound,
        verdict,
    })
}

/// `Σ_j ln² q_j / m_j` over all `j >= 0`: exact terms for the scheme's groups,
/// then `ln² q_j / m_j <= 2^{1-j}` once `⌊ln² q_j⌋ >= 1`, which holds for
/// every later `j` when the weights decrease.
fn fixed_moment_bound(v: &StochasticVector, scheme: &TslScheme) -> Result<Option<f64>> {
    let decreasing = !matches!(v.family(), Family::Explicit { .. });
    let k = scheme.k_max();
    let q_k = v.ln_weight(&Digit::from(k as u64))?;
    if !decreasing || q_k * q_k < 1.0 {
        return Ok(None);
    }
    let mut s = CompensatedSum::new();
    for j in 0..=k {
        s.add(v.ln_weight(&Digit::from(j as u64))?.powi(2) / scheme.m[j] as f64);
    }
    Ok(Some(s.value() + 2f64.powi(1 - k as i32)))
}

/// `𝐡_l`, `𝐛_l`, `K` and the limit `s𝐡_l / (s𝐛_l + K)` for `ξ(l)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiClosedForm {
    pub h_l: f64,
    pub b_l: f64,
    pub k_const: f64,
    pub limit: f64,
}

/// `K = ln(1/q₀) + Σ_{i≥1} ln(1/q_i)/m_i`, with `m_i` continued past the
/// scheme by the same rule until the terms drop below double precision.
pub fn k_constant(v: &StochasticVector, scheme: &TslScheme) -> Result<f64> {
    let mut s = CompensatedSum::new();
    s.add(-v.ln_weight(&Digit::ZERO)?);
    for i in 1..=200u64 {
        let lq = v.ln_weight(&Digit::from(i))?;
        let m_i = match scheme.m.get(i as usize) {
            Some(m) => *m as f64,
            None => ((lq * lq).floor() * 2f64.powi(i as i32)).max(2.0),
        };
        let term = -lq / m_i;
        s.add(term);
        if term < 1e-20 * s.value() {
            break;
        }
    }
    Ok(s.value())
}

pub fn xi_closed_form(v: &StochasticVector, scheme: &TslScheme) -> Result<XiClosedForm> {
    let m = ProductMeasure::xi(v, scheme.clone())?;
    let (h_l, b_l) = m.law_entropy(&DigitLaw::TruncatedRenormalized { l: scheme.l })?;
    let k_const = k_constant(v, scheme)?;
    let s = scheme.s as f64;
    Ok(XiClosedForm { h_l, b_l, k_const, limit: s * h_l / (s * b_l + k_const) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioCheckpoint {
    pub k: usize,
    pub n: String,
    /// `Σ_{i≤n} h_i / Σ_{i≤n} b_i` by per-position accumulation.
    pub ratio: f64,
    /// The same ratio from the closed form (for `ξ(l)` measures).
    pub closed_form: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyDimensionReport {
    pub checkpoints: Vec<RatioCheckpoint>,
    /// Minimum of the partial ratios after skipping `burn_in` checkpoints.
    pub liminf_estimate: f64,
    pub closed_form: Option<f64>,
    #[serde(rename = "K")]
    pub k_const: Option<f64>,
    /// Accumulated `Σ h_i` and `Σ b_i` at the last checkpoint.
    pub sum_h: f64,
    pub sum_b: f64,
}

/// Partial entropy ratios of a `ξ(l)` measure at the group ends `n_k`,
/// accumulated run by run with compensated summation.
pub fn entropy_ratio_dimension(m: &ProductMeasure<'_>, groups: usize, burn_in: usize) -> Result<EntropyDimensionReport> {
    let MeasureKind::Xi { scheme } = &m.kind else {
        return Err(Error::Unsupported("group checkpoints need a T_{s,l} measure".into()));
    };
    if groups == 0 || groups > scheme.k_max() {
        return Err(Error::param(format!("groups must lie in [1, {}]", scheme.k_max())));
    }
    if moment_conditions(m, 1000)?.verdict != MomentVerdict::Pass {
        return Err(Error::Hypothesis("moment conditions could not be certified".into()));
    }
    let (h_free, b_free) = m.law_entropy(&DigitLaw::TruncatedRenormalized { l: scheme.l })?;
    let ln_q: Vec<f64> = (0..=groups as u64).map(|j| m.v.ln_weight(&Digit::from(j))).collect::<Result<_>>()?;
    let s = scheme.s as f64;
    let mut sum_h = CompensatedSum::new();
    let mut sum_b = CompensatedSum::new();
    let mut n = BigUint::zero();
    let mut checkpoints = Vec::with_capacity(groups);
    let mut denom_tail = CompensatedSum::new();
    for k in 1..=groups {
        for (slot, len) in scheme.runs(k)? {
            let lf = len.to_f64().unwrap_or(f64::INFINITY);
            n += &len;
            match slot {
                Slot::Free => {
                    sum_h.add(lf * h_free);
                    sum_b.add(lf * b_free);
                }
                Slot::Fixed(j) => sum_b.add(-lf * ln_q[j as usize]),
            }
        }
        // ln(1/q₀) + Σ_{i<k} ln(1/q_i)/m_i
        denom_tail.add(-ln_q[k - 1] / scheme.m[k - 1] as f64);
        let closed = s * h_free / (s * b_free + denom_tail.value());
        checkpoints.push(RatioCheckpoint {
            k,
            n: n.to_string(),
            ratio: sum_h.value() / sum_b.value(),
            closed_form: Some(closed),
        });
    }
    let liminf_estimate = checkpoints
        .iter()
        .skip(burn_in.min(checkpoints.len() - 1))
        .map(|c| c.ratio)
        .fold(f64::INFINITY, f64::min);
    let cf = xi_closed_form(m.v, scheme)?;
    Ok(EntropyDimensionReport {
        checkpoints,
        liminf_estimate,
        closed_form: Some(cf.limit),
        k_const: Some(cf.k_const),
        sum_h: sum_h.value(),
        sum_b: sum_b.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::cantor::cantor_scheme;
    use crate::constructions::tsl::tsl_scheme;
    use crate::numeric::{ln_rational, ratio};

    #[test]
    fn luroth_truncated_entropy_at_two() {
        let v = StochasticVector::luroth();
        let m = ProductMeasure::new(&v, MeasureKind::Iid { law: DigitLaw::TruncatedRenormalized { l: 2 } }).unwrap();
        let (h, b) = m.entropy_terms(1).unwrap();
        let want_h = 0.75 * (4.0f64 / 3.0).ln() + 0.25 * 4f64.ln();
        assert!((h - want_h).abs() < 1e-14);
        // b = 3/4 ln 2 + 1/4 ln 6
        assert!((b - (0.75 * 2f64.ln() + 0.25 * 6f64.ln())).abs() < 1e-14);
        assert!(h <= b);
    }

    #[test]
    fn deterministic_law_entropy() {
        let v = StochasticVector::luroth();
        let m = ProductMeasure::new(&v, MeasureKind::Iid { law: DigitLaw::Deterministic { digit: Digit::from(3u64) } }).unwrap();
        let (h, b) = m.entropy_terms(5).unwrap();
        assert_eq!(h, 0.0);
        assert!((b - 20f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn xi_masses() {
        let v = StochasticVector::luroth();
        let t = tsl_scheme(&v, 2, 3, 3).unwrap();
        let m = ProductMeasure::xi(&v, t.clone()).unwrap();
        // First 2·m₁ = 12 positions are free: mass Π q / S_3^n, S_3 = 3/4.
        let word: Vec<Digit> = [0u64, 1, 2, 0, 0, 1].iter().map(|&d| Digit::from(d)).collect();
        let mass = m.cylinder_mass(&word).unwrap();
        let want = ratio(1, 2) * ratio(1, 6) * ratio(1, 12) * ratio(1, 2) * ratio(1, 2) * ratio(1, 6)
            / (ratio(3, 4) * ratio(3, 4) * ratio(3, 4) * ratio(3, 4) * ratio(3, 4) * ratio(3, 4));
        assert_eq!(mass.mass, Some(Real::Exact(want.clone())));
        assert!((mass.ln_mass - ln_rational(&want)).abs() < 1e-12);
        // Position 13 is a fixed zero; a 1 there has zero mass.
        let mut bad = vec![Digit::ZERO; 12];
        bad.push(Digit::from(1u64));
        assert_eq!(m.cylinder_mass(&bad).unwrap().mass, Some(Real::zero()));
    }

    #[test]
    fn cantor_mass_first_level() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 3).unwrap();
        let m = ProductMeasure::cantor_gamma(&v, s, 2).unwrap();
        let mass = m.cylinder_mass(&[Digit::from(4u64)]).unwrap();
        assert_eq!(mass.mass, Some(Real::Exact(ratio(1, 30) / ratio(8, 33))));
    }

    #[test]
    fn zero_mass_series_is_undefined() {
        let v = StochasticVector::luroth();
        let m = ProductMeasure::new(&v, MeasureKind::Iid { law: DigitLaw::Deterministic { digit: Digit::ZERO } }).unwrap();
        let series = local_dimension_series(&m, &[Digit::ZERO; 5]).unwrap();
        assert!(series.ratio.iter().all(|r| *r == 0.0));
        assert!(local_dimension_series(&m, &[Digit::from(1u64)]).is_err());
    }

    #[test]
    fn entropy_ratio_matches_closed_form() {
        let v = StochasticVector::luroth();
        let t = tsl_scheme(&v, 4, 16, 8).unwrap();
        let m = ProductMeasure::xi(&v, t).unwrap();
        let rep = entropy_ratio_dimension(&m, 8, 1).unwrap();
        for c in &rep.checkpoints {
            let cf = c.closed_form.unwrap();
            assert!(((c.ratio - cf) / cf).abs() < 1e-9, "{c:?}");
        }
        let limit = rep.closed_form.unwrap();
        assert!((limit - 0.82151).abs() < 1e-4, "{limit}");
    }

    #[test]
    fn moments_certified_for_xi() {
        let v = StochasticVector::luroth();
        let t = tsl_scheme(&v, 1, 4, 10).unwrap();
        let m = ProductMeasure::xi(&v, t).unwrap();
        let rep = moment_conditions(&m, 5000).unwrap();
        assert_eq!(rep.verdict, MomentVerdict::Pass);
        assert!(rep.first_partial <= rep.first_bound.unwrap());
        assert!(rep.second_partial <= rep.second_bound.unwrap());
        let d = ProductMeasure::new(&v, MeasureKind::Iid { law: DigitLaw::Deterministic { digit: Digit::from(2u64) } }).unwrap();
        assert_eq!(moment_conditions(&d, 100).unwrap().first_partial, 0.0);
    }
}
