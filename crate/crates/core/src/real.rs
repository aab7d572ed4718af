//! Exact rationals and rational brackets.
//!
//! Families with rational closed forms compute everything as `Exact`. The
//! float backend produces `Approx` brackets whose endpoints are exact dyadic
//! rationals, so interval arithmetic on them never rounds in the wrong
//! direction.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::numeric::{format_rational, ln_rational, rational_to_f64};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Real {
    Exact(BigRational),
    Approx { lo: BigRational, hi: BigRational },
}

impl Real {
    pub fn zero() -> Real {
        Real::Exact(BigRational::zero())
    }

    pub fn one() -> Real {
        Real::Exact(BigRational::one())
    }

    pub fn bracket(lo: BigRational, hi: BigRational) -> Real {
        debug_assert!(lo <= hi, "inverted bracket");
        if lo == hi {
            Real::Exact(lo)
        } else {
            Real::Approx { lo, hi }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Real::Exact(x) => Some(x),
            Real::Approx { .. } => None,
        }
    }

    pub fn lo(&self) -> &BigRational {
        match self {
            Real::Exact(x) => x,
            Real::Approx { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> &BigRational {
        match self {
            Real::Exact(x) => x,
            Real::Approx { hi, .. } => hi,
        }
    }

    pub fn midpoint(&self) -> BigRational {
        match self {
            Real::Exact(x) => x.clone(),
            Real::Approx { lo, hi } => (lo + hi) / BigInt::from(2),
        }
    }

    pub fn width(&self) -> BigRational {
        self.hi() - self.lo()
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.midpoint())
    }

    /// Natural log of the midpoint. Panics on non-positive values.
    pub fn ln(&self) -> f64 {
        ln_rational(&self.midpoint())
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    /// Every point of `self` is strictly below every point of `other`.
    pub fn certainly_lt(&self, other: &Real) -> bool {
        self.hi() < other.lo()
    }

    /// Every point of `self` is at most every point of `other`.
    pub fn certainly_le(&self, other: &Real) -> bool {
        self.hi() <= other.lo()
    }

    /// Definite comparison, `None` when the brackets overlap.
    pub fn try_cmp(&self, other: &Real) -> Option<Ordering> {
        if let (Real::Exact(a), Real::Exact(b)) = (self, other) {
            return Some(a.cmp(b));
        }
        if self.certainly_lt(other) {
            Some(Ordering::Less)
        } else if other.certainly_lt(self) {
            Some(Ordering::Greater)
        } else {
            None
        }
    }

    pub fn add(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a + b),
            _ => Real::bracket(self.lo() + other.lo(), self.hi() + other.hi()),
        }
    }

    pub fn sub(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a - b),
            _ => Real::bracket(self.lo() - other.hi(), self.hi() - other.lo()),
        }
    }

    pub fn mul(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a * b),
            _ => {
                let cands = [
                    self.lo() * other.lo(),
                    self.lo() * other.hi(),
                    self.hi() * other.lo(),
                    self.hi() * other.hi(),
                ];
                let lo = cands.iter().min().expect("nonempty").clone();
                let hi = cands.iter().max().expect("nonempty").clone();
                Real::bracket(lo, hi)
            }
        }
    }

    /// Panics if the divisor bracket contains zero.
    pub fn div(&self, other: &Real) -> Real {
        assert!(
            other.lo().is_positive() || other.hi().is_negative(),
            "division by a bracket containing zero"
        );
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a / b),
            _ => {
                let inv = Real::bracket(other.hi().recip(), other.lo().recip());
                self.mul(&inv)
            }
        }
    }

    /// Round an `Approx` bracket outward to dyadic endpoints carrying about
    /// `bits` significant bits, keeping denominators bounded. Exact values
    /// pass through untouched.
    pub fn round_outward(self, bits: u64) -> Real {
        match self {
            Real::Exact(_) => self,
            Real::Approx { lo, hi } => {
                let mag = magnitude_bits(&lo).max(magnitude_bits(&hi));
                let e = bits as i64 - mag;
                if e <= 0 {
                    return Real::Approx { lo, hi };
                }
                let scale = BigInt::one() << (e as usize);
                let floor = |x: &BigRational| {
                    let n = x.numer() * &scale;
                    BigRational::new(n.div_floor(x.denom()), scale.clone())
                };
                let ceil = |x: &BigRational| {
                    let n = x.numer() * &scale;
                    BigRational::new(n.div_ceil(x.denom()), scale.clone())
                };
                Real::bracket(floor(&lo), ceil(&hi))
            }
        }
    }
}

// ~log2 |x|, used only to choose a rounding grid.
fn magnitude_bits(x: &BigRational) -> i64 {
    if x.is_zero() {
        return i64::MIN / 4;
    }
    x.numer().bits() as i64 - x.denom().bits() as i64
}

impl From<BigRational> for Real {
    fn from(x: BigRational) -> Self {
        Real::Exact(x)
    }
}

impl std::fmt::Display for Real {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Real::Exact(x) => f.write_str(&format_rational(x)),
            Real::Approx { lo, hi } => write!(f, "[{}, {}]", format_rational(lo), format_rational(hi)),
        }
    }
}

/// Exact values render as `"p/q"`; brackets as `{"lo": "p/q", "hi": "p/q"}`.
impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Real::Exact(x) => s.serialize_str(&format_rational(x)),
            Real::Approx { lo, hi } => {
                let mut st = s.serialize_struct("Bracket", 2)?;
                st.serialize_field("lo", &format_rational(lo))?;
                st.serialize_field("hi", &format_rational(hi))?;
                st.end()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    #[test]
    fn bracket_arithmetic_contains_exact_result() {
        let a = Real::bracket(ratio(1, 3), ratio(2, 5));
        let b = Real::Exact(ratio(1, 7));
        let c = a.sub(&b).div(&Real::bracket(ratio(1, 2), ratio(3, 5)));
        for x in [ratio(1, 3), ratio(2, 5), ratio(7, 20)] {
            for y in [ratio(1, 2), ratio(3, 5)] {
                assert!(c.contains(&((&x - ratio(1, 7)) / &y)));
            }
        }
    }

    #[test]
    fn outward_rounding_keeps_enclosure() {
        let a = Real::bracket(ratio(1, 3), ratio(1, 3) + ratio(1, 1 << 40));
        let r = a.clone().round_outward(20);
        assert!(r.lo() <= a.lo() && r.hi() >= a.hi());
        assert!(r.lo().denom() <= &BigInt::from(1u64 << 22));
    }

    #[test]
    fn exact_serialization() {
        let s = serde_json::to_string(&Real::Exact(ratio(2, 6))).unwrap();
        assert_eq!(s, "\"1/3\"");
    }
}
