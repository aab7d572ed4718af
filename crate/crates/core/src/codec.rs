//! Encoding points of `[0,1)` into digit words and decoding words into cylinders.
//!
//! Cylinders are semi-open, `[left, left + length)`, and a point on a
//! boundary belongs to the right-hand cylinder.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::qvector::StochasticVector;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceTail {
    /// The word continues with zeros forever: the point is the left end of its cylinder.
    ZeroTail,
    Unspecified,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitSequence {
    pub digits: Vec<Digit>,
    pub tail: SequenceTail,
}

impl DigitSequence {
    pub fn new(digits: Vec<Digit>, tail: SequenceTail) -> Self {
        DigitSequence { digits, tail }
    }

    /// A finite prefix with nothing known beyond it.
    pub fn prefix(digits: Vec<Digit>) -> Self {
        Self::new(digits, SequenceTail::Unspecified)
    }

    pub fn from_u64s(digits: &[u64], tail: SequenceTail) -> Self {
        Self::new(digits.iter().map(|&d| Digit::from(d)).collect(), tail)
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn to_csv_row(&self) -> String {
        let parts: Vec<String> = self.digits.iter().map(|d| d.to_string()).collect();
        parts.join(",")
    }

    pub fn from_csv_row(row: &str, tail: SequenceTail) -> Result<Self> {
        let row = row.trim();
        if row.is_empty() {
            return Ok(Self::new(Vec::new(), tail));
        }
        let digits = row
            .split(',')
            .map(|s| s.trim().parse::<Digit>().map_err(|_| Error::param(format!("bad digit {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(digits, tail))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cylinder {
    pub word: Vec<Digit>,
    pub left: Real,
    pub length: Real,
    pub log_length: f64,
}

impl Cylinder {
    pub fn unit() -> Self {
        Cylinder { word: Vec::new(), left: Real::zero(), length: Real::one(), log_length: 0.0 }
    }

    pub fn right(&self) -> Real {
        self.left.add(&self.length)
    }

    /// Membership in `[left, right)`; `None` when brackets make it undecidable.
    pub fn contains(&self, x: &BigRational) -> Option<bool> {
        let right = self.right();
        if self.left.hi() <= x && x < right.lo() {
            Some(true)
        } else if x < self.left.lo() || right.hi() <= x {
            Some(false)
        } else {
            None
        }
    }

    /// Sub-cylinder obtained by appending `d`.
    pub fn child(&self, d: &Digit, v: &StochasticVector) -> Result<Cylinder> {
        let c = v.prefix(d)?;
        let q = v.weight(d)?;
        let bits = v.precision() as u64 + 24;
        let mut word = self.word.clone();
        word.push(d.clone());
        Ok(Cylinder {
            word,
            left: self.left.add(&self.length.mul(&c)).round_outward(bits),
            length: self.length.mul(&q).round_outward(bits),
            log_length: self.log_length + v.ln_weight(d)?,
        })
    }

    /// Children for every digit in `[lo, hi]`, left to right.
    pub fn children(&self, lo: &Digit, hi: &Digit, v: &StochasticVector) -> Result<Vec<Cylinder>> {
        if lo > hi {
            return Err(Error::param("empty digit range"));
        }
        let (a, b) = match (lo.as_u64(), hi.as_u64()) {
            (Some(a), Some(b)) if b - a < 10_000_000 => (a, b),
            _ => return Err(Error::Unsupported("more than 10^7 children".into())),
        };
        (a..=b).map(|d| self.child(&Digit::from(d), v)).collect()
    }
}

/// First `depth` digits of `x`. Once the remainder is exactly zero the rest
/// are zeros and the tail is marked [`SequenceTail::ZeroTail`].
pub fn encode(x: &Real, v: &StochasticVector, depth: usize) -> Result<DigitSequence> {
    if x.lo().is_negative() || x.hi() >= &BigRational::one() {
        return Err(Error::Domain(format!("{x} is outside [0, 1)")));
    }
    let bits = v.precision() as u64 + 24;
    let mut r = x.clone();
    let mut digits = Vec::with_capacity(depth);
    for position in 0..depth {
        if r.as_exact().is_some_and(Zero::is_zero) {
            digits.resize(depth, Digit::ZERO);
            return Ok(DigitSequence::new(digits, SequenceTail::ZeroTail));
        }
        let d = v.locate(&r).map_err(|e| match e {
            Error::PrecisionExhausted { bits, .. } => Error::PrecisionExhausted { position: position + 1, bits },
            other => other,
        })?;
        let c = v.prefix(&d)?;
        let q = v.weight(&d)?;
        r = r.sub(&c).div(&q).round_outward(bits);
        digits.push(d);
    }
    let tail = if r.as_exact().is_some_and(Zero::is_zero) {
        SequenceTail::ZeroTail
    } else {
        SequenceTail::Unspecified
    };
    Ok(DigitSequence::new(digits, tail))
}

pub fn encode_rational(x: &BigRational, v: &StochasticVector, depth: usize) -> Result<DigitSequence> {
    encode(&Real::Exact(x.clone()), v, depth)
}

/// Encode many points in parallel; results keep the input order.
pub fn encode_batch(xs: &[BigRational], v: &StochasticVector, depth: usize) -> Vec<Result<DigitSequence>> {
    xs.par_iter().map(|x| encode_rational(x, v, depth)).collect()
}

/// `left = Σ_k (Π_{j<k} q_{α_j}) c_{α_k}`, `length = Π q_{α_k}`.
pub fn cylinder_of(word: &[Digit], v: &StochasticVector) -> Result<Cylinder> {
    let bits = v.precision() as u64 + 24;
    let mut left = Real::zero();
    let mut length = Real::one();
    let mut log_length = 0.0;
    for d in word {
        left = left.add(&length.mul(&v.prefix(d)?)).round_outward(bits);
        length = length.mul(&v.weight(d)?).round_outward(bits);
        log_length += v.ln_weight(d)?;
    }
    Ok(Cylinder { word: word.to_vec(), left, length, log_length })
}

/// The point denoted by a word with a zero tail: the infimum of its cylinder.
pub fn decode(seq: &DigitSequence, v: &StochasticVector) -> Result<Real> {
    match seq.tail {
        SequenceTail::ZeroTail => Ok(cylinder_of(&seq.digits, v)?.left),
        SequenceTail::Unspecified => Err(Error::AmbiguousPoint),
    }
}

/// Classical Lüroth digits `a_k >= 2` of `x ∈ (0,1)`, with `x ∈ [1/a, 1/(a-1))`
/// and `T(x) = a(a-1)x - (a-1)`. Stops early when the remainder reaches 0.
///
/// The classical digits of `x` relate to the increasing-order digits of the
/// reflected point: `a_k(x) = α_k(1 - x) + 2`, away from cylinder boundaries.
pub fn luroth_classical_digits(x: &BigRational, depth: usize) -> Result<Vec<Digit>> {
    if !x.is_positive() || x >= &BigRational::one() {
        return Err(Error::Domain(format!("classical Lüroth digits need x in (0,1), got {x}")));
    }
    let mut r = x.clone();
    let mut out = Vec::with_capacity(depth);
    for _ in 0..depth {
        if r.is_zero() {
            break;
        }
        let inv = r.recip();
        let a = inv.numer().div_ceil(inv.denom());
        let am1 = &a - BigInt::one();
        r = BigRational::from_integer(&a * &am1) * &r - BigRational::from_integer(am1);
        out.push(Digit::from(a.to_biguint().expect("positive digit")));
    }
    Ok(out)
}

/// Index map between the two conventions: `a = α + 2`.
pub fn classical_index(alpha: &Digit) -> Digit {
    alpha.plus(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    fn word(ds: &[u64]) -> Vec<Digit> {
        ds.iter().map(|&d| Digit::from(d)).collect()
    }

    #[test]
    fn encode_examples() {
        let v = StochasticVector::luroth();
        let zero = encode_rational(&ratio(0, 1), &v, 5).unwrap();
        assert_eq!(zero.digits, word(&[0, 0, 0, 0, 0]));
        assert_eq!(zero.tail, SequenceTail::ZeroTail);
        let third = encode_rational(&ratio(1, 3), &v, 4).unwrap();
        assert_eq!(third.digits, word(&[0, 2, 0, 0]));
        assert_eq!(third.to_csv_row(), "0,2,0,0");
        let half = encode_rational(&ratio(1, 2), &v, 1).unwrap();
        assert_eq!(half.digits, word(&[1]));
        assert!(encode_rational(&ratio(1, 1), &v, 3).is_err());
    }

    #[test]
    fn cylinder_examples() {
        let v = StochasticVector::luroth();
        let c = cylinder_of(&word(&[0, 2]), &v).unwrap();
        assert_eq!(c.left, Real::Exact(ratio(1, 3)));
        assert_eq!(c.length, Real::Exact(ratio(1, 24)));
        assert!((c.log_length - (1.0f64 / 24.0).ln()).abs() < 1e-14);
        let u = cylinder_of(&[], &v).unwrap();
        assert_eq!((u.left, u.length), (Real::zero(), Real::one()));
        let g = StochasticVector::geometric(ratio(1, 2)).unwrap();
        let c = cylinder_of(&word(&[1]), &g).unwrap();
        assert_eq!((c.left, c.length), (Real::Exact(ratio(1, 2)), Real::Exact(ratio(1, 4))));
    }

    #[test]
    fn decode_examples() {
        let v = StochasticVector::luroth();
        let s = DigitSequence::from_u64s(&[0, 2, 0, 0], SequenceTail::ZeroTail);
        assert_eq!(decode(&s, &v).unwrap(), Real::Exact(ratio(1, 3)));
        assert_eq!(decode(&DigitSequence::new(vec![], SequenceTail::ZeroTail), &v).unwrap(), Real::zero());
        let g = StochasticVector::geometric(ratio(1, 2)).unwrap();
        let s = DigitSequence::from_u64s(&[1], SequenceTail::ZeroTail);
        assert_eq!(decode(&s, &g).unwrap(), Real::Exact(ratio(1, 2)));
        assert!(matches!(decode(&DigitSequence::prefix(word(&[1])), &v), Err(Error::AmbiguousPoint)));
    }

    #[test]
    fn children_tile_parent() {
        let v = StochasticVector::luroth();
        let kids = Cylinder::unit().children(&Digit::ZERO, &Digit::from(1u64), &v).unwrap();
        assert_eq!(kids[0].left, Real::Exact(ratio(0, 1)));
        assert_eq!(kids[0].length, Real::Exact(ratio(1, 2)));
        assert_eq!(kids[1].left, Real::Exact(ratio(1, 2)));
        assert_eq!(kids[1].right(), Real::Exact(ratio(2, 3)));
        let parent = cylinder_of(&word(&[3, 1]), &v).unwrap();
        let kids = parent.children(&Digit::ZERO, &Digit::from(20u64), &v).unwrap();
        for w in kids.windows(2) {
            assert_eq!(w[0].right(), w[1].left);
        }
        let total = kids.iter().fold(Real::zero(), |acc, k| acc.add(&k.length));
        assert_eq!(total, parent.length.mul(&v.prefix(&Digit::from(21u64)).unwrap()));
    }

    #[test]
    fn classical_digits_examples() {
        assert_eq!(luroth_classical_digits(&ratio(1, 3), 5).unwrap(), word(&[3]));
        assert_eq!(luroth_classical_digits(&ratio(1, 2), 1).unwrap(), word(&[2]));
        assert!(luroth_classical_digits(&ratio(0, 1), 1).is_err());
    }

    #[test]
    fn float_mode_round_trip() {
        let v = StochasticVector::polynomial(2.0, ratio(1, 2)).unwrap();
        let x = ratio(7, 10);
        let s = encode_rational(&x, &v, 6).unwrap();
        let c = cylinder_of(&s.digits, &v).unwrap();
        assert_eq!(c.contains(&x), Some(true));
    }

    #[test]
    fn float_mode_reports_precision_loss() {
        let v = StochasticVector::polynomial(2.0, ratio(1, 2)).unwrap();
        match encode_rational(&ratio(7, 10), &v, 400) {
            Err(Error::PrecisionExhausted { position, .. }) => assert!(position > 1),
            other => panic!("expected precision loss, got {other:?}"),
        }
    }
}
