//! The Cantor-type set `C = {x : α_k(x) ∈ V_k for all k}` with
//! `V_k = [l_{2k}, l_{2k+1}]` chosen so sparse that `dim_H C = 0`, while the
//! cylinder net still sees dimension at least `1/m₀`.
//!
//! The recursion is `M₀ = 1`, `l_{2k} = (2^k M_{k-1})^k`,
//! `l_{2k+1} = (l_{2k} + 1)²`, `M_k = M_{k-1} l_{2k+1}`. The values grow
//! doubly exponentially, so integers are kept exactly only while they fit in
//! [`EXACT_BITS_LIMIT`] bits; every level also carries its logarithms.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_rational::BigRational;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::codec::{cylinder_of, DigitSequence, SequenceTail};
use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, ln_biguint, rational_to_f64};
use crate::qvector::{Family, StochasticVector};
use crate::real::Real;

pub const EXACT_BITS_LIMIT: u64 = 1 << 20;
pub const MAX_LEVELS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CantorLevel {
    pub k: usize,
    /// `l_{2k}`, when small enough to hold exactly.
    #[serde(serialize_with = "opt_decimal")]
    pub l_even: Option<BigUint>,
    /// `l_{2k+1}`.
    #[serde(serialize_with = "opt_decimal")]
    pub l_odd: Option<BigUint>,
    pub ln_l_even: f64,
    pub ln_l_odd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CantorScheme {
    pub m0: f64,
    #[serde(serialize_with = "rational_decimal")]
    pub a: BigRational,
    #[serde(serialize_with = "rational_decimal")]
    pub b: BigRational,
    pub levels: Vec<CantorLevel>,
    /// `M_0, …, M_{k_max}`.
    #[serde(serialize_with = "vec_opt_decimal")]
    pub big_m: Vec<Option<BigUint>>,
    pub ln_big_m: Vec<f64>,
}

fn opt_decimal<S: Serializer>(x: &Option<BigUint>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

fn vec_opt_decimal<S: Serializer>(xs: &[Option<BigUint>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|x| x.as_ref().map(|v| v.to_string())))
}

fn rational_decimal<S: Serializer>(x: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&crate::numeric::format_rational(x))
}

/// Builds the scheme for a vector with certified two-sided polynomial decay.
pub fn cantor_scheme(v: &StochasticVector, k_max: usize) -> Result<CantorScheme> {
    let bounds = v.polynomial_bounds().ok_or_else(|| {
        Error::Hypothesis(format!("{} has no certified polynomial decay bounds", v.name()))
    })?;
    CantorScheme::new(bounds.exponent, bounds.lower, bounds.upper, k_max)
}

impl CantorScheme {
    pub fn new(m0: f64, a: BigRational, b: BigRational, k_max: usize) -> Result<Self> {
        if k_max == 0 || k_max > MAX_LEVELS {
            return Err(Error::param(format!("k_max must lie in [1, {MAX_LEVELS}]")));
        }
        let ln2 = std::f64::consts::LN_2;
        let mut big_m = vec![Some(BigUint::one())];
        let mut ln_big_m = vec![0.0];
        let mut levels = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let prev = &big_m[k - 1];
            let ln_prev = ln_big_m[k - 1];
            let ln_l_even = k as f64 * (k as f64 * ln2 + ln_prev);
            let fits = ln_l_even * 2.0 / ln2 + 2.0 < EXACT_BITS_LIMIT as f64;
            let l_even = match prev {
                Some(m) if fits => Some(num_traits::pow(m << k, k)),
                _ => None,
            };
            let l_odd = l_even.as_ref().map(|l| {
                let t = l + 1u32;
                &t * &t
            });
            let (ln_l_even, ln_l_odd) = match (&l_even, &l_odd) {
                (Some(e), Some(o)) => (ln_biguint(e), ln_biguint(o)),
                _ => (ln_l_even, 2.0 * (ln_l_even + (-ln_l_even).exp().ln_1p())),
            };
            let m_k = match (prev, &l_odd) {
                (Some(m), Some(o)) => Some(m * o),
                _ => None,
            };
            big_m.push(m_k.filter(|m| m.bits() <= EXACT_BITS_LIMIT));
            ln_big_m.push(ln_prev + ln_l_odd);
            levels.push(CantorLevel { k, l_even, l_odd, ln_l_even, ln_l_odd });
        }
        Ok(CantorScheme { m0, a, b, levels, big_m, ln_big_m })
    }

    pub fn k_max(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> Result<&CantorLevel> {
        if k == 0 || k > self.levels.len() {
            return Err(Error::param(format!("level {k} outside [1, {}]", self.levels.len())));
        }
        Ok(&self.levels[k - 1])
    }

    /// `l_n` for `n >= 2`.
    pub fn l(&self, n: usize) -> Option<&BigUint> {
        if n < 2 {
            return None;
        }
        let lev = self.levels.get(n / 2 - 1)?;
        if n.is_multiple_of(2) {
            lev.l_even.as_ref()
        } else {
            lev.l_odd.as_ref()
        }
    }

    /// Number of leading levels whose digit ranges are held exactly.
    pub fn exact_depth(&self) -> usize {
        self.levels.iter().take_while(|l| l.l_odd.is_some()).count()
    }

    /// `V_k = [l_{2k}, l_{2k+1}]` as digits.
    pub fn v_range(&self, k: usize) -> Result<(Digit, Digit)> {
        let lev = self.level(k)?;
        match (&lev.l_even, &lev.l_odd) {
            (Some(a), Some(b)) => Ok((Digit::from(a), Digit::from(b))),
            _ => Err(Error::Unsupported(format!("V_{k} is too large to represent exactly"))),
        }
    }

    /// `ln( M_{k-1} (2^{m₀-1} B)^α / l_{2k}^{α(m₀-1)} )`: the α-volume bound of
    /// the covering by the `∇` intervals of rank `k`.
    pub fn nabla_log_volume(&self, k: usize, alpha: f64) -> Result<f64> {
        let lev = self.level(k)?;
        let ln_b = rational_to_f64(&self.b).ln();
        Ok(self.ln_big_m[k - 1] + alpha * ((self.m0 - 1.0) * std::f64::consts::LN_2 + ln_b)
            - alpha * (self.m0 - 1.0) * lev.ln_l_even)
    }

    /// The exact α-volume of the rank-`k` `∇` covering,
    /// `γ_k^α Π_{j<k} Σ_{i∈V_j} q_i^α`, as a log bracket.
    pub fn nabla_exact_log_volume(&self, v: &StochasticVector, k: usize, alpha: f64) -> Result<(f64, f64)> {
        let g = self.gamma(v, k)?;
        let (mut lo, mut hi) = (alpha * crate::numeric::ln_rational(g.lo()), alpha * crate::numeric::ln_rational(g.hi()));
        for j in 1..k {
            let (a, b) = self.v_range(j)?;
            let (l, h) = v.ln_power_sum_range(&a, &b, alpha)?;
            lo += l;
            hi += h;
        }
        Ok((lo, hi))
    }

    /// `γ_k = Σ_{i∈V_k} q_i`.
    pub fn gamma(&self, v: &StochasticVector, k: usize) -> Result<Real> {
        let (a, b) = self.v_range(k)?;
        if let Family::Luroth = v.family() {
            // 1/(a+1) - 1/(b+2), left unreduced when the operands are huge.
            let (a, b) = (a.to_biguint(), b.to_biguint());
            let num = BigInt::from(&b + 1u32 - &a);
            let den = BigInt::from((&a + 1u32) * (&b + 2u32));
            let g = if den.bits() <= 4096 { BigRational::new(num, den) } else { BigRational::new_raw(num, den) };
            return Ok(Real::Exact(g));
        }
        let above = if a.is_zero() { Real::one() } else { v.tail_mass(&a.saturating_sub(&Digit::from(1u64)))? };
        Ok(above.sub(&v.tail_mass(&b)?))
    }

    /// The `γ_k` of the leading exact levels.
    pub fn gammas(&self, v: &StochasticVector, depth: usize) -> Result<Vec<Real>> {
        (1..=depth).map(|k| self.gamma(v, k)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CantorMode {
    /// Digit `k` uniform on `V_k`.
    Uniform,
    /// Digit `k` equal to `i ∈ V_k` with probability `q_i / γ_k`.
    GammaWeighted,
}

struct LevelPlan {
    a: BigUint,
    b: BigUint,
    // Σ_{i>=a} q_i and γ_k.
    // Unused on the integer-only Lüroth path.
    above: Option<Real>,
    gamma: Option<Real>,
}

/// Draws digit words from `C` level by level.
pub struct CantorSampler<'a> {
    v: &'a StochasticVector,
    mode: CantorMode,
    plan: Vec<LevelPlan>,
}

impl<'a> CantorSampler<'a> {
    pub fn new(scheme: &CantorScheme, v: &'a StochasticVector, mode: CantorMode, depth: usize) -> Result<Self> {
        if depth > scheme.exact_depth() {
            return Err(Error::param(format!(
                "depth {depth} exceeds the {} exactly representable levels",
                scheme.exact_depth()
            )));
        }
        let plan = (1..=depth)
            .map(|k| {
                let (a, b) = scheme.v_range(k)?;
                let (above, gamma) = match v.family() {
                    Family::Luroth => (None, None),
                    _ => {
                        let above =
                            if a.is_zero() { Real::one() } else { v.tail_mass(&a.saturating_sub(&Digit::from(1u64)))? };
                        (Some(above), Some(scheme.gamma(v, k)?))
                    }
                };
                Ok(LevelPlan { a: a.to_biguint(), b: b.to_biguint(), above, gamma })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CantorSampler { v, mode, plan })
    }

    pub fn sample(&self, seed: u64) -> Result<DigitSequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut digits = Vec::with_capacity(self.plan.len());
        for lvl in &self.plan {
            let d = match self.mode {
                CantorMode::Uniform => rng.gen_biguint_range(&lvl.a, &(&lvl.b + 1u32)),
                CantorMode::GammaWeighted => self.weighted(lvl, &mut rng)?,
            };
            digits.push(Digit::from(d));
        }
        Ok(DigitSequence::new(digits, SequenceTail::Unspecified))
    }

    // Inverse CDF inside V_k: the digit d with Σ_{i>d} q_i < t <= Σ_{i>=d} q_i,
    // where t = Σ_{i>=a} q_i - u γ_k.
    fn weighted(&self, lvl: &LevelPlan, rng: &mut ChaCha8Rng) -> Result<BigUint> {
        let bits = 2 * lvl.b.bits() + 64;
        let big_u = rng.gen_biguint(bits);
        if let Family::Luroth = self.v.family() {
            // Σ_{i>=d} q_i = 1/(d+1), so with t = 1/(a+1) - u (b+1-a)/((a+1)(b+2)),
            // d = floor(1/t) - 1 in integer arithmetic.
            let (a1, b2) = (&lvl.a + 1u32, &lvl.b + 2u32);
            let num = (&a1 * &b2) << bits;
            let den = (&b2 << bits) - &big_u * (&lvl.b + 1u32 - &lvl.a);
            let d = num / den - 1u32;
            return Ok(d.clamp(lvl.a.clone(), lvl.b.clone()));
        }
        let u = BigRational::new(BigInt::from(big_u), BigInt::one() << bits);
        let (above, gamma) = (lvl.above.as_ref().expect("plan"), lvl.gamma.as_ref().expect("plan"));
        let t = above.sub(&gamma.mul(&Real::Exact(u)));
        let t_mid = t.midpoint();
        let (mut lo, mut hi) = (lvl.a.clone(), lvl.b.clone());
        while lo < hi {
            let mid: BigUint = (&lo + &hi) >> 1u32;
            if self.v.tail_mass(&Digit::from(&mid))?.midpoint() < t_mid {
                hi = mid;
            } else {
                lo = mid + 1u32;
            }
        }
        Ok(lo)
    }
}

pub fn cantor_sampler(
    scheme: &CantorScheme,
    v: &StochasticVector,
    mode: CantorMode,
    depth: usize,
    seed: u64,
) -> Result<DigitSequence> {
    CantorSampler::new(scheme, v, mode, depth)?.sample(seed)
}

/// `count` independent words with per-word seeds derived from `seed`.
pub fn cantor_samples(
    scheme: &CantorScheme,
    v: &StochasticVector,
    mode: CantorMode,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<DigitSequence>> {
    let sampler = CantorSampler::new(scheme, v, mode, depth)?;
    (0..count as u64).into_par_iter().map(|i| sampler.sample(derive_seed(seed, i))).collect()
}

/// Left end of the cylinder of `word`, as a double.
pub fn point_of(word: &[Digit], v: &StochasticVector) -> Result<f64> {
    let c = cylinder_of(word, v)?;
    Ok(c.left.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    // Straightforward restatement of the recursion.
    fn oracle(k_max: usize) -> (Vec<BigUint>, Vec<BigUint>) {
        let mut l = vec![BigUint::from(0u32), BigUint::from(0u32)];
        let mut m = vec![BigUint::from(1u32)];
        for k in 1..=k_max {
            let base = BigUint::from(2u32).pow(k as u32) * &m[k - 1];
            l.push(base.pow(k as u32));
            let next = (&l[2 * k] + BigUint::from(1u32)).pow(2);
            l.push(next);
            let mk = (1..=k).fold(BigUint::from(1u32), |acc, j| acc * &l[2 * j + 1]);
            m.push(mk);
        }
        (l, m)
    }

    #[test]
    fn recursion_values() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 4).unwrap();
        assert_eq!(s.l(2).unwrap(), &BigUint::from(2u32));
        assert_eq!(s.l(3).unwrap(), &BigUint::from(9u32));
        assert_eq!(s.l(4).unwrap(), &BigUint::from(1296u32));
        assert_eq!(s.l(5).unwrap(), &BigUint::from(1_682_209u32));
        assert_eq!(s.big_m[2].as_ref().unwrap(), &BigUint::from(15_139_881u32));
        let (l, m) = oracle(4);
        for (n, want) in l.iter().enumerate().take(10).skip(2) {
            assert_eq!(s.l(n).unwrap(), want, "l_{n}");
        }
        for (k, want) in m.iter().enumerate().take(5) {
            assert_eq!(s.big_m[k].as_ref().unwrap(), want);
            assert!((s.ln_big_m[k] - ln_biguint(want)).abs() < 1e-9 * (1.0 + s.ln_big_m[k]));
        }
    }

    #[test]
    fn large_levels_fall_back_to_logs() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 12).unwrap();
        assert!(s.exact_depth() >= 5 && s.exact_depth() < 12);
        for w in s.ln_big_m.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(s.levels[11].ln_l_even.is_finite());
    }

    #[test]
    fn needs_polynomial_bounds() {
        let g = StochasticVector::geometric(ratio(1, 2)).unwrap();
        assert!(matches!(cantor_scheme(&g, 3), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn nabla_examples() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 3).unwrap();
        let got = s.nabla_log_volume(2, 0.5).unwrap();
        let want = (9.0 * 2f64.sqrt() / 1296f64.sqrt()).ln();
        assert!((got - want).abs() < 1e-12);
        assert!((s.nabla_log_volume(2, 0.0).unwrap() - 9f64.ln()).abs() < 1e-12);
        for k in 1..=3 {
            for alpha in [0.25, 0.5, 1.0] {
                let (_, hi) = s.nabla_exact_log_volume(&v, k, alpha).unwrap();
                assert!(hi <= s.nabla_log_volume(k, alpha).unwrap() + 1e-9, "k={k} alpha={alpha}");
            }
        }
    }

    #[test]
    fn gamma_one_for_luroth() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 2).unwrap();
        assert_eq!(s.gamma(&v, 1).unwrap(), Real::Exact(ratio(8, 33)));
    }

    #[test]
    fn samples_stay_in_levels() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 3).unwrap();
        for mode in [CantorMode::Uniform, CantorMode::GammaWeighted] {
            let words = cantor_samples(&s, &v, mode, 3, 50, 11).unwrap();
            for w in &words {
                for (k, d) in w.digits.iter().enumerate() {
                    let (a, b) = s.v_range(k + 1).unwrap();
                    assert!(&a <= d && d <= &b);
                }
            }
        }
    }

    #[test]
    fn weighted_sampler_matches_law_on_first_level() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 1).unwrap();
        let sampler = CantorSampler::new(&s, &v, CantorMode::GammaWeighted, 1).unwrap();
        let n = 20_000u64;
        let mut counts = [0u64; 8];
        for i in 0..n {
            let d = sampler.sample(derive_seed(5, i)).unwrap().digits[0].as_u64().unwrap();
            counts[(d - 2) as usize] += 1;
        }
        let gamma = 8.0 / 33.0;
        let chi2: f64 = (2..=9u64)
            .map(|i| {
                let p = 1.0 / ((i + 1) * (i + 2)) as f64 / gamma;
                let e = p * n as f64;
                let o = counts[(i - 2) as usize] as f64;
                (o - e).powi(2) / e
            })
            .sum();
        // 1% critical value of chi-square with 7 degrees of freedom.
        assert!(chi2 < 18.475, "chi2 = {chi2}");
    }

    #[test]
    fn generic_weighted_path_agrees_with_closed_form() {
        // The polynomial family exercises the binary-search inversion.
        let v = StochasticVector::polynomial(2.0, ratio(1, 2)).unwrap();
        let s = cantor_scheme(&v, 2).unwrap();
        let w = cantor_sampler(&s, &v, CantorMode::GammaWeighted, 2, 3).unwrap();
        let (a, b) = s.v_range(2).unwrap();
        assert!(a <= w.digits[1] && w.digits[1] <= b);
    }
}
