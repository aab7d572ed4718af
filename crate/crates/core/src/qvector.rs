//! Stochastic vectors `Q∞ = (q₀, q₁, …)` and their closed-form families.
//!
//! A vector owns a cache of prefix sums `c_i = Σ_{j<i} q_j`. The cache only
//! grows, under a write lock, so concurrent readers always see complete
//! entries. Families with closed-form prefix sums answer queries beyond the
//! cache without materializing it; this matters because the alphabet is
//! infinite and heavy-tailed vectors routinely produce huge digits.

use std::fmt;
use std::sync::RwLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::numeric::{
    biguint_to_rational, format_rational, int, ln_add_exp, ln_rational, ln_sub_exp, ratio,
    rational_to_f64,
};
use crate::precise::{self, DEFAULT_PRECISION};
use crate::real::Real;

/// How an explicit vector continues past its listed weights. The residual
/// mass `1 - Σ prefix` is spread over the tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TailRule {
    Unspecified,
    /// `q_{n+j} = R (1 - r) r^j`.
    Geometric {
        #[serde(with = "rational_str")]
        ratio: BigRational,
    },
    /// `q_i = S i^{-exponent}` for `i >= n`, with `S` fixed by the residual mass.
    Polynomial { exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `q_i = 1/((i+1)(i+2))`.
    Luroth,
    /// `q_i = (1-r) r^i`.
    Geometric {
        #[serde(with = "rational_str")]
        ratio: BigRational,
    },
    /// `q_i = (1-q₀) i^{-m₀} / ζ(m₀)` for `i >= 1`.
    Polynomial {
        exponent: f64,
        #[serde(with = "rational_str")]
        q0: BigRational,
    },
    Explicit {
        #[serde(with = "rational_vec_str")]
        weights: Vec<BigRational>,
        tail: TailRule,
    },
}

/// Certified constants with `A / i^{m₀} <= q_i <= B / i^{m₀}` for all `i >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolynomialBounds {
    pub exponent: f64,
    #[serde(with = "rational_str")]
    pub lower: BigRational,
    #[serde(with = "rational_str")]
    pub upper: BigRational,
}

/// A tail sum `Σ q_k^α` in log space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PowerSum {
    Finite { ln_lo: f64, ln_hi: f64 },
    Divergent,
}

impl PowerSum {
    pub fn ln_mid(&self) -> f64 {
        match self {
            PowerSum::Finite { ln_lo, ln_hi } => 0.5 * (ln_lo + ln_hi),
            PowerSum::Divergent => f64::INFINITY,
        }
    }
}

/// Limit of `q_{n+1}/q_n` when the family determines it.
#[derive(Clone, Debug, PartialEq)]
pub enum RatioLimit {
    Exact(BigRational),
    One,
}

pub struct StochasticVector {
    family: Family,
    precision: usize,
    // Polynomial: (1-q₀)/ζ(m₀). Explicit with polynomial tail: R/ζ(m, n).
    scale: Option<Real>,
    // Explicit: c_0..c_n over the listed weights.
    explicit_prefix: Vec<BigRational>,
    cache: RwLock<Vec<Real>>,
}

const SMALL_RANGE: u64 = 2_000_000;
const FLOAT_CACHE_LIMIT: u64 = 1 << 12;

impl StochasticVector {
    fn build(family: Family, precision: usize) -> Result<Self> {
        let mut v = StochasticVector {
            family,
            precision,
            scale: None,
            explicit_prefix: Vec::new(),
            cache: RwLock::new(vec![Real::zero()]),
        };
        v.init()?;
        Ok(v)
    }

    fn init(&mut self) -> Result<()> {
        let prec = self.precision;
        match &self.family {
            Family::Luroth => {}
            Family::Geometric { ratio } => {
                if !(ratio.is_positive() && ratio < &BigRational::one()) {
                    return Err(Error::param(format!(
                        "geometric ratio must lie in (0,1), got {}",
                        format_rational(ratio)
                    )));
                }
            }
            Family::Polynomial { exponent, q0 } => {
                if exponent.is_nan() || *exponent <= 1.0 || !exponent.is_finite() {
                    return Err(Error::param(format!(
                        "polynomial exponent must exceed 1 (the series diverges otherwise), got {exponent}"
                    )));
                }
                if !(q0.is_positive() && q0 < &BigRational::one()) {
                    return Err(Error::param("q0 must lie in (0,1)"));
                }
                let z = precise::zeta(*exponent, prec)?;
                let rest = Real::Exact(BigRational::one() - q0);
                self.scale = Some(rest.div(&z).round_outward(prec as u64 + 16));
            }
            Family::Explicit { weights, tail } => {
                if weights.iter().any(|w| !w.is_positive()) {
                    return Err(Error::param("explicit weights must be positive"));
                }
                let mut acc = BigRational::zero();
                self.explicit_prefix.push(acc.clone());
                for w in weights {
                    acc += w;
                    self.explicit_prefix.push(acc.clone());
                }
                if acc >= BigRational::one() {
                    return Err(Error::param(
                        "explicit prefix must leave positive mass for the infinite tail",
                    ));
                }
                match tail {
                    TailRule::Unspecified => {}
                    TailRule::Geometric { ratio } => {
                        if !(ratio.is_positive() && ratio < &BigRational::one()) {
                            return Err(Error::param("tail ratio must lie in (0,1)"));
                        }
                    }
                    TailRule::Polynomial { exponent } => {
                        if exponent.is_nan() || *exponent <= 1.0 {
                            return Err(Error::param("tail exponent must exceed 1"));
                        }
                        let n = weights.len() as u64;
                        if n == 0 {
                            return Err(Error::param(
                                "a polynomial tail needs at least one listed weight (index 0)",
                            ));
                        }
                        let z = precise::hurwitz_zeta(*exponent, &Digit::from(n), prec)?;
                        let residual = Real::Exact(BigRational::one() - acc);
                        self.scale = Some(residual.div(&z).round_outward(prec as u64 + 16));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn luroth() -> Self {
        Self::build(Family::Luroth, DEFAULT_PRECISION).expect("luroth is valid")
    }

    pub fn geometric(ratio: BigRational) -> Result<Self> {
        Self::build(Family::Geometric { ratio }, DEFAULT_PRECISION)
    }

    /// `q_i ∝ i^{-m₀}` for `i >= 1` with `q₀` absorbing the rest.
    pub fn polynomial(exponent: f64, q0: BigRational) -> Result<Self> {
        Self::build(Family::Polynomial { exponent, q0 }, DEFAULT_PRECISION)
    }

    pub fn explicit(weights: Vec<BigRational>, tail: TailRule) -> Result<Self> {
        Self::build(Family::Explicit { weights, tail }, DEFAULT_PRECISION)
    }

    pub fn from_family(family: Family, precision: usize) -> Result<Self> {
        if precision < 32 {
            return Err(Error::param("precision must be at least 32 bits"));
        }
        Self::build(family, precision)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    /// True when every weight and prefix sum is an exact rational.
    pub fn is_exact(&self) -> bool {
        match &self.family {
            Family::Luroth | Family::Geometric { .. } => true,
            Family::Polynomial { .. } => false,
            Family::Explicit { tail, .. } => !matches!(tail, TailRule::Polynomial { .. }),
        }
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::Luroth => "luroth".into(),
            Family::Geometric { ratio } => format!("geometric:{}", format_rational(ratio)),
            Family::Polynomial { exponent, q0 } => {
                format!("polynomial:{exponent}:q0={}", format_rational(q0))
            }
            Family::Explicit { weights, .. } => format!("explicit[{}]", weights.len()),
        }
    }

    fn explicit_len(&self) -> Option<u64> {
        match &self.family {
            Family::Explicit { weights, .. } => Some(weights.len() as u64),
            _ => None,
        }
    }

    fn residual(&self) -> BigRational {
        BigRational::one() - self.explicit_prefix.last().cloned().unwrap_or_default()
    }

    fn beyond_prefix(&self, i: &Digit) -> Error {
        Error::BeyondPrefix { index: i.to_string(), len: self.explicit_prefix.len().saturating_sub(1) }
    }

    /// The weight `q_i`.
    pub fn weight(&self, i: &Digit) -> Result<Real> {
        match &self.family {
            Family::Luroth => {
                let n = i.to_biguint();
                let den = (&n + 1u32) * (&n + 2u32);
                Ok(Real::Exact(BigRational::new(BigInt::one(), BigInt::from(den))))
            }
            Family::Geometric { ratio } => {
                let e = exponent_u32(i)?;
                Ok(Real::Exact((BigRational::one() - ratio) * ratio.pow(e as i32)))
            }
            Family::Polynomial { exponent, q0 } => {
                if i.is_zero() {
                    Ok(Real::Exact(q0.clone()))
                } else {
                    precise::scaled_pow_neg(self.scale.as_ref().expect("scale"), i, *exponent, self.precision)
                }
            }
            Family::Explicit { weights, tail } => {
                let n = weights.len() as u64;
                if let Some(k) = i.as_u64().filter(|k| *k < n) {
                    return Ok(Real::Exact(weights[k as usize].clone()));
                }
                match tail {
                    TailRule::Unspecified => Err(self.beyond_prefix(i)),
                    TailRule::Geometric { ratio } => {
                        let j = exponent_u32(&i.saturating_sub(&Digit::from(n)))?;
                        Ok(Real::Exact(
                            self.residual() * (BigRational::one() - ratio) * ratio.pow(j as i32),
                        ))
                    }
                    TailRule::Polynomial { exponent } => precise::scaled_pow_neg(
                        self.scale.as_ref().expect("scale"),
                        i,
                        *exponent,
                        self.precision,
                    ),
                }
            }
        }
    }

    /// `ln q_i` in double precision, valid for arbitrarily large digits.
    pub fn ln_weight(&self, i: &Digit) -> Result<f64> {
        match &self.family {
            Family::Luroth => Ok(-(i.ln_plus(1) + i.ln_plus(2))),
            Family::Geometric { ratio } => {
                let r = rational_to_f64(ratio);
                Ok((1.0 - r).ln() + i.to_f64() * r.ln())
            }
            Family::Polynomial { exponent, q0 } => {
                if i.is_zero() {
                    Ok(ln_rational(q0))
                } else {
                    Ok(self.scale.as_ref().expect("scale").ln() - exponent * i.ln_plus(0))
                }
            }
            Family::Explicit { weights, tail } => {
                let n = weights.len() as u64;
                if let Some(k) = i.as_u64().filter(|k| *k < n) {
                    return Ok(ln_rational(&weights[k as usize]));
                }
                match tail {
                    TailRule::Unspecified => Err(self.beyond_prefix(i)),
                    TailRule::Geometric { ratio } => {
                        let r = rational_to_f64(ratio);
                        let j = i.saturating_sub(&Digit::from(n)).to_f64();
                        Ok(ln_rational(&self.residual()) + (1.0 - r).ln() + j * r.ln())
                    }
                    TailRule::Polynomial { exponent } => {
                        Ok(self.scale.as_ref().expect("scale").ln() - exponent * i.ln_plus(0))
                    }
                }
            }
        }
    }

    /// Prefix sum `c_i = Σ_{j<i} q_j`.
    pub fn prefix(&self, i: &Digit) -> Result<Real> {
        if let Some(k) = i.as_u64() {
            let cache = self.cache.read().expect("cache lock");
            if (k as usize) < cache.len() {
                return Ok(cache[k as usize].clone());
            }
        }
        self.prefix_closed_form(i)
    }

    fn prefix_closed_form(&self, i: &Digit) -> Result<Real> {
        match &self.family {
            Family::Luroth => {
                let n = biguint_to_rational(&i.to_biguint());
                Ok(Real::Exact(&n / (&n + BigRational::one())))
            }
            Family::Geometric { ratio } => {
                let e = exponent_u32(i)?;
                Ok(Real::Exact(BigRational::one() - ratio.pow(e as i32)))
            }
            Family::Polynomial { exponent, .. } => {
                if i.is_zero() {
                    return Ok(Real::zero());
                }
                let z = precise::hurwitz_zeta(*exponent, i, self.precision)?;
                let scale = self.scale.as_ref().expect("scale");
                Ok(Real::one().sub(&scale.mul(&z)).round_outward(self.precision as u64 + 16))
            }
            Family::Explicit { tail, .. } => {
                let n = self.explicit_len().expect("explicit");
                if let Some(k) = i.as_u64().filter(|k| *k <= n) {
                    return Ok(Real::Exact(self.explicit_prefix[k as usize].clone()));
                }
                let cn = self.explicit_prefix[n as usize].clone();
                match tail {
                    TailRule::Unspecified => Err(self.beyond_prefix(i)),
                    TailRule::Geometric { ratio } => {
                        let j = exponent_u32(&i.saturating_sub(&Digit::from(n)))?;
                        Ok(Real::Exact(cn + self.residual() * (BigRational::one() - ratio.pow(j as i32))))
                    }
                    TailRule::Polynomial { exponent } => {
                        let z = precise::hurwitz_zeta(*exponent, i, self.precision)?;
                        let scale = self.scale.as_ref().expect("scale");
                        Ok(Real::one().sub(&scale.mul(&z)).round_outward(self.precision as u64 + 16))
                    }
                }
            }
        }
    }

    /// `Σ_{k>i} q_k = 1 - c_{i+1}`, from the family's closed form.
    pub fn tail_mass(&self, i: &Digit) -> Result<Real> {
        let next = i.plus(1);
        match &self.family {
            Family::Luroth => {
                let n = biguint_to_rational(&next.to_biguint());
                Ok(Real::Exact((n + BigRational::one()).recip()))
            }
            Family::Geometric { ratio } => Ok(Real::Exact(ratio.pow(exponent_u32(&next)? as i32))),
            // Power-law tails straight from ζ(m, i+1), keeping relative precision.
            Family::Polynomial { exponent, .. } | Family::Explicit { tail: TailRule::Polynomial { exponent }, .. }
                if next.as_u64().is_none_or(|n| n >= self.explicit_len().unwrap_or(1)) =>
            {
                let z = precise::hurwitz_zeta(*exponent, &next, self.precision)?;
                Ok(self.scale.as_ref().expect("scale").mul(&z).round_outward(self.precision as u64 + 16))
            }
            Family::Explicit { tail: TailRule::Geometric { ratio }, .. }
                if next.as_u64().is_none_or(|n| n >= self.explicit_len().unwrap_or(0)) =>
            {
                let j = exponent_u32(&next.saturating_sub(&Digit::from(self.explicit_len().unwrap_or(0))))?;
                Ok(Real::Exact(self.residual() * ratio.pow(j as i32)))
            }
            _ => Ok(Real::one().sub(&self.prefix_closed_form(&next)?)),
        }
    }

    /// Cumulative sums `c_0 = 0, c_1 = q_0, …, c_{upto+1}`, extending the cache.
    pub fn prefix_sums(&self, upto: usize) -> Result<Vec<Real>> {
        self.extend_cache(upto + 2)?;
        let cache = self.cache.read().expect("cache lock");
        Ok(cache[..upto + 2].to_vec())
    }

    fn extend_cache(&self, len: usize) -> Result<()> {
        if self.cache.read().expect("cache lock").len() >= len {
            return Ok(());
        }
        let mut cache = self.cache.write().expect("cache lock");
        while cache.len() < len {
            let i = cache.len() - 1;
            let q = self.weight(&Digit::from(i as u64))?;
            let next = cache[i].add(&q);
            let next = if next.is_exact() { next } else { next.round_outward(self.precision as u64 + 24) };
            cache.push(next);
        }
        Ok(())
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    /// The digit `d` with `c_d <= r < c_{d+1}`.
    ///
    /// Fails with `PrecisionExhausted` (position 0, the caller knows the
    /// real position) when a bracket overlaps a cylinder boundary.
    pub fn locate(&self, r: &Real) -> Result<Digit> {
        let one = Real::one();
        if r.lo().is_negative() || !r.certainly_lt(&one) {
            if r.hi().is_negative() || r.lo() >= one.lo() || r.is_exact() {
                return Err(Error::Domain(format!("{r} is outside [0, 1)")));
            }
            return Err(self.exhausted());
        }
        if let Real::Exact(x) = r {
            if let Some(d) = self.locate_exact_fast(x)? {
                return Ok(d);
            }
        }
        if !self.is_exact() {
            let want = FLOAT_CACHE_LIMIT as usize;
            let cache_len = self.cache_len();
            if cache_len < want {
                let top = self.cache.read().expect("cache lock").last().cloned().expect("nonempty");
                if !r.certainly_lt(&top) {
                    self.extend_cache(want.min(cache_len * 2 + 64))?;
                    return self.locate(r);
                }
            }
        }
        // Invariant: c_lo <= r; search for the first index with r < c_hi.
        let mut lo = Digit::ZERO;
        let mut hi = Digit::from(1u64);
        loop {
            if self.below(r, &hi)? {
                break;
            }
            lo = hi.clone();
            hi = if hi.bits() < 8 { hi.plus(1) } else { hi.clone() + hi.clone() };
        }
        while lo.plus(1) < hi {
            let mid = lo.midpoint(&hi);
            if self.below(r, &mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }

    // r < c_i, decided with certainty or reported as precision loss.
    fn below(&self, r: &Real, i: &Digit) -> Result<bool> {
        let c = self.prefix(i)?;
        if r.certainly_lt(&c) {
            Ok(true)
        } else if c.certainly_le(r) {
            Ok(false)
        } else {
            Err(self.exhausted())
        }
    }

    fn exhausted(&self) -> Error {
        Error::PrecisionExhausted { position: 0, bits: self.precision }
    }

    fn locate_exact_fast(&self, x: &BigRational) -> Result<Option<Digit>> {
        match &self.family {
            Family::Luroth => {
                // x ∈ [i/(i+1), (i+1)/(i+2))  ⇔  1/(1-x) ∈ [i+1, i+2)
                let inv = (BigRational::one() - x).recip();
                let f = inv.numer().div_floor(inv.denom());
                let d = (f - BigInt::one()).to_biguint().expect("non-negative digit");
                Ok(Some(Digit::from(d)))
            }
            Family::Geometric { ratio } => {
                // Estimate from logs, then settle by exact comparison.
                let one_minus = BigRational::one() - x;
                let est = (ln_rational(&one_minus) / ln_rational(ratio)).floor().max(0.0);
                if !est.is_finite() || est > 1e7 {
                    return Ok(None);
                }
                let mut d = est as u64;
                for _ in 0..8 {
                    let c_d = self.prefix_closed_form(&Digit::from(d))?;
                    let c_next = self.prefix_closed_form(&Digit::from(d + 1))?;
                    if c_d.lo() > x {
                        d = d.saturating_sub(1);
                    } else if x >= c_next.lo() {
                        d += 1;
                    } else {
                        return Ok(Some(Digit::from(d)));
                    }
                }
                Ok(None)
            }
            _ => Ok(None),
        }
    }

    /// Certified polynomial bracketing constants when the family provides them.
    pub fn polynomial_bounds(&self) -> Option<PolynomialBounds> {
        match &self.family {
            // i²/((i+1)(i+2)) increases from 1/6 at i = 1 towards 1.
            Family::Luroth => Some(PolynomialBounds { exponent: 2.0, lower: ratio(1, 6), upper: int(1) }),
            Family::Polynomial { exponent, .. } => {
                let s = self.scale.as_ref().expect("scale");
                Some(PolynomialBounds { exponent: *exponent, lower: s.lo().clone(), upper: s.hi().clone() })
            }
            Family::Explicit { weights, tail: TailRule::Polynomial { exponent } } => {
                // q_i i^m is constant on the tail; the prefix contributes
                // finitely many values (checked in double precision, so
                // widened by a relative 1e-12).
                let s = self.scale.as_ref().expect("scale");
                let mut lower = rational_to_f64(s.lo());
                let mut upper = rational_to_f64(s.hi());
                for (i, w) in weights.iter().enumerate().skip(1) {
                    let v = rational_to_f64(w) * (i as f64).powf(*exponent);
                    lower = lower.min(v);
                    upper = upper.max(v);
                }
                let lo = BigRational::from_float(lower * (1.0 - 1e-12))?;
                let hi = BigRational::from_float(upper * (1.0 + 1e-12))?;
                Some(PolynomialBounds { exponent: *exponent, lower: lo, upper: hi })
            }
            _ => None,
        }
    }

    pub fn ratio_limit(&self) -> Option<RatioLimit> {
        match &self.family {
            Family::Luroth | Family::Polynomial { .. } => Some(RatioLimit::One),
            Family::Geometric { ratio } => Some(RatioLimit::Exact(ratio.clone())),
            Family::Explicit { tail, .. } => match tail {
                TailRule::Unspecified => None,
                TailRule::Geometric { ratio } => Some(RatioLimit::Exact(ratio.clone())),
                TailRule::Polynomial { .. } => Some(RatioLimit::One),
            },
        }
    }

    /// `ln Σ_{k>i} q_k^α`. `None` when the vector carries no tail information.
    pub fn ln_tail_power_sum(&self, i: u64, alpha: f64) -> Result<Option<PowerSum>> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::param("alpha must be positive"));
        }
        Ok(match &self.family {
            Family::Geometric { ratio } => {
                let r = rational_to_f64(ratio);
                let v = alpha * (1.0 - r).ln() + alpha * (i + 1) as f64 * r.ln() - (-(alpha * r.ln()).exp_m1()).ln();
                Some(PowerSum::Finite { ln_lo: v, ln_hi: v })
            }
            Family::Luroth => {
                if 2.0 * alpha <= 1.0 {
                    Some(PowerSum::Divergent)
                } else {
                    Some(luroth_tail_power(i, alpha))
                }
            }
            Family::Polynomial { exponent, .. } => {
                let p = exponent * alpha;
                if p <= 1.0 {
                    Some(PowerSum::Divergent)
                } else {
                    let z = precise::hurwitz_zeta(p, &Digit::from(i + 1), 64)?;
                    let s = alpha * self.scale.as_ref().expect("scale").ln();
                    Some(PowerSum::Finite { ln_lo: s + ln_rational(z.lo()), ln_hi: s + ln_rational(z.hi()) })
                }
            }
            Family::Explicit { weights, tail } => {
                let n = weights.len() as u64;
                let mut head = f64::NEG_INFINITY;
                for k in (i + 1)..n {
                    head = ln_add_exp(head, alpha * ln_rational(&weights[k as usize]));
                }
                let start = (i + 1).max(n);
                let tail_sum = match tail {
                    TailRule::Unspecified => return Ok(None),
                    TailRule::Geometric { ratio } => {
                        let r = rational_to_f64(ratio);
                        let j = (start - n) as f64;
                        let v = alpha * (ln_rational(&self.residual()) + (1.0 - r).ln() + j * r.ln())
                            - (-(alpha * r.ln()).exp_m1()).ln();
                        PowerSum::Finite { ln_lo: v, ln_hi: v }
                    }
                    TailRule::Polynomial { exponent } => {
                        let p = exponent * alpha;
                        if p <= 1.0 {
                            return Ok(Some(PowerSum::Divergent));
                        }
                        let z = precise::hurwitz_zeta(p, &Digit::from(start), 64)?;
                        let s = alpha * self.scale.as_ref().expect("scale").ln();
                        PowerSum::Finite { ln_lo: s + ln_rational(z.lo()), ln_hi: s + ln_rational(z.hi()) }
                    }
                };
                match tail_sum {
                    PowerSum::Finite { ln_lo, ln_hi } => Some(PowerSum::Finite {
                        ln_lo: ln_add_exp(head, ln_lo),
                        ln_hi: ln_add_exp(head, ln_hi),
                    }),
                    PowerSum::Divergent => Some(PowerSum::Divergent),
                }
            }
        })
    }

    /// `ln Σ_{i=a}^{b} q_i^α` as a bracket `(lo, hi)`. Short ranges are summed
    /// term by term; long ranges use monotone integral comparison.
    pub fn ln_power_sum_range(&self, a: &Digit, b: &Digit, alpha: f64) -> Result<(f64, f64)> {
        if a > b {
            return Ok((f64::NEG_INFINITY, f64::NEG_INFINITY));
        }
        let span = b.saturating_sub(a);
        if let (Some(lo), Some(len)) = (a.as_u64(), span.as_u64()) {
            if len < SMALL_RANGE {
                let mut acc = crate::numeric::CompensatedSum::new();
                let mut ln_max = f64::NEG_INFINITY;
                let terms: Vec<f64> = (lo..=lo + len)
                    .map(|i| self.ln_weight(&Digit::from(i)).map(|l| alpha * l))
                    .collect::<Result<_>>()?;
                for t in &terms {
                    ln_max = ln_max.max(*t);
                }
                for t in &terms {
                    acc.add((t - ln_max).exp());
                }
                let v = ln_max + acc.value().ln();
                return Ok((v - 1e-12, v + 1e-12));
            }
        }
        match &self.family {
            Family::Luroth => Ok(power_law_range(0.0, 1.0, 2.0, a, b, alpha, 2.0)),
            Family::Polynomial { exponent, q0 } => {
                let s = self.scale.as_ref().expect("scale").ln();
                let (start, head) = if a.is_zero() {
                    (Digit::from(1u64), alpha * ln_rational(q0))
                } else {
                    (a.clone(), f64::NEG_INFINITY)
                };
                let (lo, hi) = power_law_range(alpha * s, 0.0, 0.0, &start, b, alpha, *exponent);
                Ok((ln_add_exp(head, lo), ln_add_exp(head, hi)))
            }
            Family::Geometric { ratio } => {
                let r = rational_to_f64(ratio);
                let count = b.saturating_sub(a).plus(1).to_f64();
                let ln_first = alpha * ((1.0 - r).ln() + a.to_f64() * r.ln());
                let ln_geo = (-(alpha * count * r.ln()).exp_m1()).ln() - (-(alpha * r.ln()).exp_m1()).ln();
                let v = ln_first + ln_geo;
                Ok((v, v))
            }
            Family::Explicit { .. } => Err(Error::Unsupported(
                "long power-sum ranges over explicit vectors".into(),
            )),
        }
    }

    /// A fast double-precision inverse-CDF digit sampler.
    pub fn sampler(&self) -> Result<DigitSampler> {
        DigitSampler::new(self)
    }
}

impl fmt::Debug for StochasticVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticVector")
            .field("family", &self.name())
            .field("precision", &self.precision)
            .field("cached", &self.cache_len())
            .finish()
    }
}

impl Clone for StochasticVector {
    fn clone(&self) -> Self {
        StochasticVector {
            family: self.family.clone(),
            precision: self.precision,
            scale: self.scale.clone(),
            explicit_prefix: self.explicit_prefix.clone(),
            cache: RwLock::new(self.cache.read().expect("cache lock").clone()),
        }
    }
}

fn exponent_u32(i: &Digit) -> Result<u32> {
    i.as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| Error::Unsupported(format!("geometric power with exponent {i}")))
}

/// Lüroth tail `Σ_{k>i} ((k+1)(k+2))^{-α}` for `α > 1/2`: direct summation of
/// a block, then `(x+2)^{-2α} <= q(x)^α <= (x+1)^{-2α}` with integral bounds.
fn luroth_tail_power(i: u64, alpha: f64) -> PowerSum {
    let block = 20_000u64;
    let p = 2.0 * alpha;
    let mut head = crate::numeric::CompensatedSum::new();
    let mut ln_scale = f64::NEG_INFINITY;
    let first = -alpha * (((i + 2) as f64).ln() + ((i + 3) as f64).ln());
    ln_scale = ln_scale.max(first);
    for k in (i + 1)..=(i + block) {
        let t = -alpha * (((k + 1) as f64).ln() + ((k + 2) as f64).ln());
        head.add((t - ln_scale).exp());
    }
    let big_k = (i + block) as f64;
    // Σ_{k>K} ∈ [(K+3)^{1-p}/(p-1), (K+1)^{1-p}/(p-1)]
    let rem_lo = (1.0 - p) * (big_k + 3.0).ln() - (p - 1.0).ln();
    let rem_hi = (1.0 - p) * (big_k + 1.0).ln() - (p - 1.0).ln();
    let h = ln_scale + head.value().ln();
    PowerSum::Finite { ln_lo: ln_add_exp(h, rem_lo), ln_hi: ln_add_exp(h, rem_hi) }
}

/// Bracket for `ln Σ_{i=a}^{b} e^{ln_scale} ((i+c_lo)(i+c_hi))^{-α p/2}`-style
/// decreasing power laws. For Lüroth (`c_lo = 1, c_hi = 2, p = 2`) the term is
/// squeezed between `(i+2)^{-αp}` and `(i+1)^{-αp}`; for pure power laws
/// (`c_lo = c_hi = 0`) both coincide.
fn power_law_range(ln_scale: f64, c_lo: f64, c_hi: f64, a: &Digit, b: &Digit, alpha: f64, p: f64) -> (f64, f64) {
    let e = alpha * p;
    let ln_int = |from_ln: f64, to_ln: f64| -> f64 {
        // ln ∫_{from}^{to} x^{-e} dx given ln from, ln to.
        if (e - 1.0).abs() < 1e-12 {
            (to_ln - from_ln).ln()
        } else if e < 1.0 {
            ln_sub_exp((1.0 - e) * to_ln, (1.0 - e) * from_ln) - (1.0 - e).ln()
        } else {
            ln_sub_exp((1.0 - e) * from_ln, (1.0 - e) * to_ln) - (e - 1.0).ln()
        }
    };
    // lower: ∫_a^{b+1} (x + c_hi)^{-e}
    let lower = ln_int(a.ln_plus(c_hi as u64), b.ln_plus(1 + c_hi as u64));
    // upper: f(a) + ∫_a^b (x + c_lo)^{-e}
    let first = -e * a.ln_plus(c_lo as u64);
    let upper = if a == b { first } else { ln_add_exp(first, ln_int(a.ln_plus(c_lo as u64), b.ln_plus(c_lo as u64))) };
    (ln_scale + lower, ln_scale + upper.max(lower))
}

/// Inverse-CDF sampler over `f64` uniforms. Digits past the tabulated range
/// are produced from closed-form tails.
#[derive(Clone, Debug)]
pub struct DigitSampler {
    cumulative: Vec<f64>,
    tail: TailSampler,
}

#[derive(Clone, Debug)]
enum TailSampler {
    Luroth,
    Geometric { offset: u64, base: f64, residual: f64, ln_r: f64 },
    PowerLaw { start: u64, base: f64, scale: f64, exponent: f64 },
}

const SAMPLER_TABLE: u64 = 1 << 16;

impl DigitSampler {
    fn new(v: &StochasticVector) -> Result<Self> {
        match v.family() {
            Family::Luroth => Ok(DigitSampler { cumulative: Vec::new(), tail: TailSampler::Luroth }),
            Family::Geometric { ratio } => Ok(DigitSampler {
                cumulative: Vec::new(),
                tail: TailSampler::Geometric { offset: 0, base: 0.0, residual: 1.0, ln_r: rational_to_f64(ratio).ln() },
            }),
            Family::Polynomial { exponent, q0 } => {
                let scale = v.scale.as_ref().expect("scale").to_f64();
                let mut acc = crate::numeric::CompensatedSum::new();
                let mut cumulative = Vec::with_capacity(SAMPLER_TABLE as usize + 1);
                for i in 0..=SAMPLER_TABLE {
                    let q = if i == 0 { rational_to_f64(q0) } else { scale * (i as f64).powf(-exponent) };
                    acc.add(q);
                    cumulative.push(acc.value());
                }
                let base = *cumulative.last().expect("nonempty");
                Ok(DigitSampler {
                    cumulative,
                    tail: TailSampler::PowerLaw {
                        start: SAMPLER_TABLE + 1,
                        base,
                        scale: v.scale.as_ref().expect("scale").to_f64(),
                        exponent: *exponent,
                    },
                })
            }
            Family::Explicit { weights, tail } => {
                let n = weights.len() as u64;
                let cumulative: Vec<f64> = v.explicit_prefix.iter().skip(1).map(rational_to_f64).collect();
                let base = rational_to_f64(&v.explicit_prefix[n as usize]);
                let tail = match tail {
                    TailRule::Unspecified => {
                        return Err(Error::Unsupported(
                            "sampling needs a tail rule beyond the explicit prefix".into(),
                        ))
                    }
                    TailRule::Geometric { ratio } => TailSampler::Geometric {
                        offset: n,
                        base,
                        residual: rational_to_f64(&v.residual()),
                        ln_r: rational_to_f64(ratio).ln(),
                    },
                    TailRule::Polynomial { exponent } => TailSampler::PowerLaw {
                        start: n,
                        base,
                        scale: v.scale.as_ref().expect("scale").to_f64(),
                        exponent: *exponent,
                    },
                };
                Ok(DigitSampler { cumulative, tail })
            }
        }
    }

    /// Digit whose cylinder contains `u ∈ [0,1)`.
    pub fn sample(&self, u: f64) -> u64 {
        if let Some(last) = self.cumulative.last() {
            if u < *last {
                return self.cumulative.partition_point(|c| *c <= u) as u64;
            }
        }
        match &self.tail {
            TailSampler::Luroth => {
                let v = (1.0 / (1.0 - u)).floor() - 1.0;
                if v >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    v.max(0.0) as u64
                }
            }
            TailSampler::Geometric { offset, base, residual, ln_r } => {
                // u - base = residual (1 - r^j)
                let frac = ((u - base) / residual).clamp(0.0, 1.0);
                let j = ((-frac).ln_1p() / ln_r).floor().max(0.0);
                offset.saturating_add(if j >= u64::MAX as f64 { u64::MAX } else { j as u64 })
            }
            TailSampler::PowerLaw { start, base, scale, exponent } => {
                // Remaining mass beyond index i is scale·ζ(m, i) ≈ scale·i^{1-m}/(m-1).
                let remaining = |i: f64| scale * (i.powf(1.0 - exponent) / (exponent - 1.0) + 0.5 * i.powf(-exponent));
                let target = 1.0 - u;
                let _ = base;
                let (mut lo, mut hi) = (*start as f64, (*start as f64) * 2.0);
                while remaining(hi) >= target && hi < 1e300 {
                    lo = hi;
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    if hi - lo <= 1.0 {
                        break;
                    }
                    let mid = (0.5 * (lo + hi)).floor();
                    if remaining(mid) >= target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if lo >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    lo as u64
                }
            }
        }
    }
}

pub(crate) mod rational_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::numeric::format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        crate::numeric::parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod rational_vec_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(crate::numeric::format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| crate::numeric::parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[allow(dead_code)]
fn _assert_sync() {
    fn is_sync<T: Sync + Send>() {}
    is_sync::<StochasticVector>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn d(i: u64) -> Digit {
        Digit::from(i)
    }

    #[test]
    fn luroth_weights_and_tail() {
        let v = StochasticVector::luroth();
        assert_eq!(v.weight(&d(0)).unwrap(), Real::Exact(ratio(1, 2)));
        assert_eq!(v.weight(&d(1)).unwrap(), Real::Exact(ratio(1, 6)));
        assert_eq!(v.weight(&d(2)).unwrap(), Real::Exact(ratio(1, 12)));
        assert_eq!(v.tail_mass(&d(0)).unwrap(), Real::Exact(ratio(1, 2)));
    }

    #[test]
    fn luroth_prefix_sums() {
        let v = StochasticVector::luroth();
        let c = v.prefix_sums(2).unwrap();
        let want = [ratio(0, 1), ratio(1, 2), ratio(2, 3), ratio(3, 4)];
        assert_eq!(c, want.map(Real::Exact).to_vec());
    }

    #[test]
    fn geometric_half() {
        let v = StochasticVector::geometric(ratio(1, 2)).unwrap();
        assert_eq!(v.weight(&d(0)).unwrap(), Real::Exact(ratio(1, 2)));
        assert_eq!(v.weight(&d(1)).unwrap(), Real::Exact(ratio(1, 4)));
        assert_eq!(v.weight(&d(2)).unwrap(), Real::Exact(ratio(1, 8)));
        let c = v.prefix_sums(2).unwrap();
        assert_eq!(c[3], Real::Exact(ratio(7, 8)));
        let c = v.prefix_sums(1).unwrap();
        assert_eq!(c, vec![Real::zero(), Real::Exact(ratio(1, 2)), Real::Exact(ratio(3, 4))]);
    }

    #[test]
    fn geometric_tail_power_closed_form_matches_partial_sums() {
        let v = StochasticVector::geometric(ratio(1, 2)).unwrap();
        for &alpha in &[0.25, 0.5, 1.0] {
            let i = 3u64;
            let PowerSum::Finite { ln_lo, .. } = v.ln_tail_power_sum(i, alpha).unwrap().unwrap() else {
                panic!()
            };
            let direct: f64 = (i + 1..i + 2000).map(|k| (0.5f64 * 0.5f64.powi(k as i32)).powf(alpha)).sum();
            assert!((ln_lo.exp() - direct).abs() < 1e-12 * direct, "alpha {alpha}");
            // closed form: q_i^α r^α / (1 - r^α)
            let qi = 0.5f64.powi(i as i32 + 1);
            let want = qi.powf(alpha) * 0.5f64.powf(alpha) / (1.0 - 0.5f64.powf(alpha));
            assert!((ln_lo.exp() - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StochasticVector::polynomial(1.0, ratio(1, 2)).is_err());
        assert!(StochasticVector::polynomial(0.5, ratio(1, 2)).is_err());
        assert!(StochasticVector::geometric(ratio(1, 1)).is_err());
        assert!(StochasticVector::geometric(ratio(0, 1)).is_err());
        assert!(StochasticVector::explicit(vec![ratio(1, 2), ratio(1, 2)], TailRule::Unspecified).is_err());
        assert!(StochasticVector::explicit(vec![ratio(1, 2), ratio(0, 1)], TailRule::Unspecified).is_err());
    }

    #[test]
    fn polynomial_vector_sums_to_one() {
        let v = StochasticVector::polynomial(2.0, ratio(1, 2)).unwrap();
        assert!(!v.is_exact());
        // c_i from the closed form agrees with accumulated sums.
        let c = v.prefix_sums(50).unwrap();
        let closed = v.prefix_closed_form(&d(51)).unwrap();
        assert!((c[51].to_f64() - closed.to_f64()).abs() < 1e-30);
        assert!(c[51].lo() < closed.hi() && closed.lo() < c[51].hi());
        // 1 - c_{n} equals the tail oracle.
        let t = v.tail_mass(&d(50)).unwrap();
        assert!((1.0 - c[51].to_f64() - t.to_f64()).abs() < 1e-12);
        let b = v.polynomial_bounds().unwrap();
        let q7 = v.weight(&d(7)).unwrap();
        let n49 = BigRational::from_integer(49.into());
        assert!(q7.hi() * &n49 >= b.lower && q7.lo() * &n49 <= b.upper);
    }

    #[test]
    fn locate_matches_cylinders() {
        let v = StochasticVector::luroth();
        assert_eq!(v.locate(&Real::Exact(ratio(1, 2))).unwrap(), d(1));
        assert_eq!(v.locate(&Real::Exact(ratio(1, 3))).unwrap(), d(0));
        assert_eq!(v.locate(&Real::Exact(ratio(999_999, 1_000_000))).unwrap(), d(999_999));
        assert_eq!(v.locate(&Real::Exact(ratio(999_998, 1_000_000))).unwrap(), d(499_999));
        let g = StochasticVector::geometric(ratio(1, 3)).unwrap();
        // c_i = 1 - 3^{-i}; 0.9 ∈ [8/9, 26/27)
        assert_eq!(g.locate(&Real::Exact(ratio(9, 10))).unwrap(), d(2));
        let p = StochasticVector::polynomial(2.0, ratio(1, 2)).unwrap();
        assert_eq!(p.locate(&Real::Exact(ratio(1, 4))).unwrap(), d(0));
        let x = (p.prefix(&d(5000)).unwrap().midpoint() + p.prefix(&d(5001)).unwrap().midpoint()) / BigInt::from(2);
        assert_eq!(p.locate(&Real::Exact(x)).unwrap(), d(5000));
    }

    #[test]
    fn explicit_with_geometric_tail() {
        let v = StochasticVector::explicit(
            vec![ratio(1, 2), ratio(1, 4)],
            TailRule::Geometric { ratio: ratio(1, 2) },
        )
        .unwrap();
        assert!(v.is_exact());
        assert_eq!(v.weight(&d(2)).unwrap(), Real::Exact(ratio(1, 8)));
        assert_eq!(v.weight(&d(3)).unwrap(), Real::Exact(ratio(1, 16)));
        assert_eq!(v.prefix(&d(4)).unwrap(), Real::Exact(ratio(15, 16)));
        let short = StochasticVector::explicit(vec![ratio(1, 2)], TailRule::Unspecified).unwrap();
        assert!(matches!(short.weight(&d(3)), Err(Error::BeyondPrefix { .. })));
    }

    #[test]
    fn luroth_power_sum_range_brackets_direct_sum() {
        let v = StochasticVector::luroth();
        let (lo, hi) = v.ln_power_sum_range(&d(1296), &d(1_682_209), 0.5).unwrap();
        let direct: f64 = (1296u64..=1_682_209)
            .map(|i| 1.0 / (((i + 1) * (i + 2)) as f64).sqrt())
            .sum();
        assert!(lo <= direct.ln() + 1e-9 && direct.ln() <= hi + 1e-9);
        // Long-range bracket: force the integral path with a huge range.
        let a = Digit::from(BigUint::from(10u32).pow(30));
        let b = Digit::from(BigUint::from(10u32).pow(60));
        let (lo, hi) = v.ln_power_sum_range(&a, &b, 0.75).unwrap();
        // ≈ 2 a^{-1/2}
        let want = 2f64.ln() - 15.0 * 10f64.ln();
        assert!(lo <= want + 1e-6 && want <= hi + 1e-6, "{lo} {want} {hi}");
        assert!(hi - lo < 1e-9);
    }

    #[test]
    fn sampler_inverts_cdf() {
        let v = StochasticVector::luroth();
        let s = v.sampler().unwrap();
        assert_eq!(s.sample(0.0), 0);
        assert_eq!(s.sample(0.5), 1);
        assert_eq!(s.sample(0.7), 2);
        let g = StochasticVector::geometric(ratio(1, 2)).unwrap().sampler().unwrap();
        assert_eq!(g.sample(0.49), 0);
        assert_eq!(g.sample(0.5), 1);
        assert_eq!(g.sample(0.8), 2);
        let p = StochasticVector::polynomial(2.0, ratio(1, 2)).unwrap();
        let ps = p.sampler().unwrap();
        assert_eq!(ps.sample(0.25), 0);
        let c3 = p.prefix(&d(3)).unwrap().to_f64();
        assert_eq!(ps.sample(c3 + 1e-12), 3);
        let far = p.prefix(&d(200_000)).unwrap().to_f64();
        let got = ps.sample(far + 1e-15);
        assert!((got as i64 - 200_000).abs() <= 2, "{got}");
    }
}
