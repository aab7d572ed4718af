//! High-precision evaluation for families without rational closed forms.
//!
//! Values are computed with `astro-float` at a working precision comfortably
//! above the requested one, then widened into exact dyadic brackets.

use std::cell::RefCell;
use std::sync::OnceLock;

use astro_float::{BigFloat, Consts, RoundingMode, Sign, Word};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_PRECISION: usize = 128;

const RM: RoundingMode = RoundingMode::ToEven;
const GUARD_BITS: usize = 64;
const EM_TERMS: usize = 30;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

fn check(x: BigFloat, what: &str) -> Result<BigFloat> {
    if x.is_nan() || x.is_inf() {
        Err(Error::Unsupported(format!("non-finite result while computing {what}")))
    } else {
        Ok(x)
    }
}

pub fn from_biguint(n: &BigUint, p: usize) -> BigFloat {
    if n.is_zero() {
        return BigFloat::from_u64(0, p);
    }
    if let Some(v) = n.to_u64() {
        return BigFloat::from_u64(v, p);
    }
    let words: Vec<Word> = n.to_u64_digits();
    let bits = words.len() * 64;
    let exp = i32::try_from(bits).expect("integer too large for astro-float");
    let mut x = BigFloat::from_words(&words, Sign::Pos, exp);
    x.set_precision(p, RM).expect("precision");
    x
}

pub fn from_rational(x: &BigRational, p: usize) -> BigFloat {
    let w = p + GUARD_BITS;
    let n = from_biguint(x.numer().magnitude(), w);
    let d = from_biguint(x.denom().magnitude(), w);
    let q = n.div(&d, w, RM);
    if x.is_negative() {
        q.neg()
    } else {
        q
    }
}

/// Exact rational value of a finite `BigFloat`.
pub fn to_rational(x: &BigFloat) -> BigRational {
    let Some((words, _nbits, sign, exp, _)) = x.as_raw_parts() else {
        return BigRational::zero();
    };
    let mantissa = BigUint::from_slice(
        &words.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect::<Vec<_>>(),
    );
    if mantissa.is_zero() {
        return BigRational::zero();
    }
    let shift = exp as i64 - (words.len() * 64) as i64;
    let m = BigInt::from(mantissa);
    let m = if sign == Sign::Neg { -m } else { m };
    if shift >= 0 {
        BigRational::from_integer(m << shift as usize)
    } else {
        BigRational::new(m, BigInt::one() << (-shift) as usize)
    }
}

/// Widen a value computed at working precision into a bracket good to
/// about `prec` bits.
fn bracket(x: &BigFloat, prec: usize) -> Real {
    let center = to_rational(x);
    let pad = center.abs() / (BigInt::one() << (prec + 6));
    Real::bracket(&center - &pad, &center + &pad).round_outward(prec as u64 + 16)
}

fn digit_to_float(d: &Digit, p: usize) -> BigFloat {
    match d.as_u64() {
        Some(v) => BigFloat::from_u64(v, p),
        None => from_biguint(&d.to_biguint(), p),
    }
}

/// `x^{-s}` as a working-precision float.
fn pow_neg(x: &BigFloat, s: &BigFloat, w: usize, cc: &mut Consts) -> BigFloat {
    x.pow(&s.neg(), w, RM, cc)
}

/// `i^{-s}` for `i >= 1`.
pub fn pow_neg_bracket(i: &Digit, s: f64, prec: usize) -> Result<Real> {
    if i.is_zero() {
        return Err(Error::param("0^{-s} is undefined"));
    }
    let w = prec + GUARD_BITS;
    with_consts(|cc| {
        let x = digit_to_float(i, w);
        let v = check(pow_neg(&x, &BigFloat::from_f64(s, w), w, cc), "power")?;
        Ok(bracket(&v, prec))
    })
}

/// `c * i^{-s}` where `c` is itself a bracket; used for scaled weights.
pub fn scaled_pow_neg(c: &Real, i: &Digit, s: f64, prec: usize) -> Result<Real> {
    Ok(c.mul(&pow_neg_bracket(i, s, prec)?).round_outward(prec as u64 + 16))
}

fn bernoulli_over_factorial() -> &'static [BigRational] {
    static TABLE: OnceLock<Vec<BigRational>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Akiyama–Tanigawa, B_1 = +1/2 convention; only even indices are used.
        let n_max = 2 * EM_TERMS + 2;
        let mut a: Vec<BigRational> = Vec::with_capacity(n_max + 1);
        let mut b = Vec::with_capacity(n_max + 1);
        for m in 0..=n_max {
            a.push(BigRational::new(BigInt::one(), BigInt::from(m + 1)));
            for j in (1..=m).rev() {
                let diff = &a[j - 1] - &a[j];
                a[j - 1] = diff * BigInt::from(j);
            }
            b.push(a[0].clone());
        }
        let mut fact = BigInt::one();
        let mut out = Vec::with_capacity(EM_TERMS + 2);
        out.push(BigRational::zero());
        for k in 1..=EM_TERMS + 1 {
            fact *= BigInt::from((2 * k - 1) * (2 * k));
            out.push(&b[2 * k] / &fact);
        }
        out
    })
}

/// Hurwitz zeta `Σ_{n>=0} (a+n)^{-s}` for real `s > 1` and integer `a >= 1`,
/// by Euler–Maclaurin summation with a rigorous truncation bound.
pub fn hurwitz_zeta(s: f64, a: &Digit, prec: usize) -> Result<Real> {
    if s.is_nan() || s <= 1.0 || !s.is_finite() {
        return Err(Error::param(format!("Hurwitz zeta needs s > 1, got {s}")));
    }
    if a.is_zero() {
        return Err(Error::param("Hurwitz zeta needs a >= 1"));
    }
    let w = prec + GUARD_BITS;
    let min_x = (prec as u64).max(64);
    let direct = match a.as_u64() {
        Some(v) if v < min_x => min_x - v,
        _ => 0,
    };
    let table = bernoulli_over_factorial();
    with_consts(|cc| {
        let sf = BigFloat::from_f64(s, w);
        let mut sum = BigFloat::from_u64(0, w);
        let base = digit_to_float(a, w);
        for n in 0..direct {
            let t = base.add(&BigFloat::from_u64(n, w), w, RM);
            sum = sum.add(&pow_neg(&t, &sf, w, cc), w, RM);
        }
        let x = base.add(&BigFloat::from_u64(direct, w), w, RM);
        let x_neg_s = pow_neg(&x, &sf, w, cc);
        // x^{1-s}/(s-1) + x^{-s}/2
        let s_minus_1 = sf.sub(&BigFloat::from_u64(1, w), w, RM);
        sum = sum.add(&x.mul(&x_neg_s, w, RM).div(&s_minus_1, w, RM), w, RM);
        sum = sum.add(&x_neg_s.div(&BigFloat::from_u64(2, w), w, RM), w, RM);
        // Σ_k B_{2k}/(2k)! · s(s+1)…(s+2k-2) · x^{-s-2k+1}
        let inv_x = BigFloat::from_u64(1, w).div(&x, w, RM);
        let inv_x2 = inv_x.mul(&inv_x, w, RM);
        let mut xpow = x_neg_s.mul(&inv_x, w, RM);
        let mut rising = sf.clone();
        for (k, coef) in table.iter().enumerate().take(EM_TERMS + 1).skip(1) {
            if k >= 2 {
                let f1 = sf.add(&BigFloat::from_u64(2 * k as u64 - 3, w), w, RM);
                let f2 = sf.add(&BigFloat::from_u64(2 * k as u64 - 2, w), w, RM);
                rising = rising.mul(&f1, w, RM).mul(&f2, w, RM);
                xpow = xpow.mul(&inv_x2, w, RM);
            }
            let c = from_rational(coef, w);
            sum = sum.add(&c.mul(&rising, w, RM).mul(&xpow, w, RM), w, RM);
        }
        let sum = check(sum, "Hurwitz zeta")?;
        // First omitted term, in log space.
        let k = EM_TERMS + 1;
        let ln_x = a.ln_plus(direct);
        let ln_coef = crate::numeric::ln_rational(&table[k].abs());
        let ln_rising: f64 = (0..(2 * k - 1)).map(|j| (s + j as f64).ln()).sum();
        let ln_err = ln_coef + ln_rising - (s + 2.0 * k as f64 - 1.0) * ln_x;
        let center = to_rational(&sum);
        let sum_ln = crate::numeric::ln_rational(&center);
        if ln_err - sum_ln > -((prec + 8) as f64) * std::f64::consts::LN_2 {
            return Err(Error::Unsupported(format!(
                "Euler-Maclaurin truncation too coarse for {prec} bits"
            )));
        }
        Ok(bracket(&sum, prec))
    })
}

pub fn zeta(s: f64, prec: usize) -> Result<Real> {
    hurwitz_zeta(s, &Digit::from(1u64), prec)
}

/// `floor(ln(x)^2)` for a positive bracket, refusing when the bracket cannot
/// decide the floor.
pub fn floor_ln_squared(x: &Real, prec: usize) -> Result<u64> {
    let w = prec + GUARD_BITS;
    let f = |v: &BigRational| -> Result<BigFloat> {
        with_consts(|cc| {
            let b = from_rational(v, w);
            let l = b.ln(w, RM, cc);
            check(l.mul(&l, w, RM), "ln^2")
        })
    };
    let a = to_rational(&f(x.lo())?);
    let b = to_rational(&f(x.hi())?);
    let pad = BigRational::new(BigInt::one(), BigInt::one() << (prec - 8));
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let fl = (&lo - &pad).floor();
    let fh = (&hi + &pad).floor();
    if fl != fh {
        return Err(Error::Unsupported(
            "ln^2 q lies too close to an integer to take its integer part".into(),
        ));
    }
    fl.to_integer()
        .to_u64()
        .ok_or_else(|| Error::Unsupported("ln^2 q exceeds u64".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    #[test]
    fn raw_parts_round_trip() {
        let x = BigFloat::from_f64(2.5, 128);
        assert_eq!(to_rational(&x), ratio(5, 2));
        let y = from_biguint(&(BigUint::from(3u32) << 200u32), 256);
        assert_eq!(to_rational(&y), BigRational::from_integer(BigInt::from(3) << 200));
    }

    #[test]
    fn zeta_two_is_pi_squared_over_six() {
        let z = zeta(2.0, 128).unwrap();
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((z.to_f64() - pi2_6).abs() < 1e-15);
        assert!(z.width() < BigRational::new(BigInt::one(), BigInt::one() << 120));
    }

    #[test]
    fn hurwitz_matches_zeta_minus_partial_sum() {
        let z = zeta(3.0, 128).unwrap();
        let h = hurwitz_zeta(3.0, &Digit::from(4u64), 128).unwrap();
        let partial = ratio(1, 1) + ratio(1, 8) + ratio(1, 27);
        let diff = z.sub(&Real::Exact(partial)).sub(&h);
        assert!(diff.lo() <= &BigRational::zero() && diff.hi() >= &BigRational::zero());
    }

    #[test]
    fn hurwitz_at_large_argument() {
        // ζ(2, a) ≈ 1/a + 1/(2a²) for large a.
        let a = 1u64 << 40;
        let h = hurwitz_zeta(2.0, &Digit::from(a), 128).unwrap().to_f64();
        let af = a as f64;
        assert!((h - (1.0 / af + 0.5 / (af * af))).abs() < 1e-25);
    }

    #[test]
    fn floor_of_ln_squared() {
        // ln²(6) = 3.210…, ln²(12) = 6.174…
        assert_eq!(floor_ln_squared(&Real::Exact(ratio(1, 6)), 128).unwrap(), 3);
        assert_eq!(floor_ln_squared(&Real::Exact(ratio(1, 12)), 128).unwrap(), 6);
    }
}
