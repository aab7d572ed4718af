//! Digits of the infinite alphabet.
//!
//! The alphabet is all of ℕ₀ and the constructions index digits well past
//! `u64::MAX` (the third Cantor level already starts near 10²⁴), so a digit is
//! an unbounded integer. The common case stays unboxed.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numeric::ln_biguint;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Digit(Repr);

// Invariant: `Big` only holds values greater than `u64::MAX`.
#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    Small(u64),
    Big(Box<BigUint>),
}

impl Digit {
    pub const ZERO: Digit = Digit(Repr::Small(0));

    pub fn as_u64(&self) -> Option<u64> {
        match &self.0 {
            Repr::Small(v) => Some(*v),
            Repr::Big(_) => None,
        }
    }

    pub fn to_biguint(&self) -> BigUint {
        match &self.0 {
            Repr::Small(v) => BigUint::from(*v),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0))
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(v) => *v as f64,
            Repr::Big(b) => b.to_f64().unwrap_or(f64::INFINITY),
        }
    }

    /// Natural log of `self + offset`, accurate for arbitrarily large digits.
    pub fn ln_plus(&self, offset: u64) -> f64 {
        match &self.0 {
            Repr::Small(v) => match v.checked_add(offset) {
                Some(s) => (s as f64).ln(),
                None => ln_biguint(&(BigUint::from(*v) + offset)),
            },
            Repr::Big(b) => ln_biguint(&(&**b + offset)),
        }
    }

    pub fn plus(&self, offset: u64) -> Digit {
        match &self.0 {
            Repr::Small(v) => match v.checked_add(offset) {
                Some(s) => Digit(Repr::Small(s)),
                None => Digit::from(BigUint::from(*v) + offset),
            },
            Repr::Big(b) => Digit::from(&**b + offset),
        }
    }

    /// `self - other`, saturating at zero.
    pub fn saturating_sub(&self, other: &Digit) -> Digit {
        if self <= other {
            return Digit::ZERO;
        }
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => Digit(Repr::Small(a - b)),
            _ => Digit::from(self.to_biguint() - other.to_biguint()),
        }
    }

    /// Midpoint `(self + other) / 2`, rounding down.
    pub fn midpoint(&self, other: &Digit) -> Digit {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => {
                Digit(Repr::Small(((*a as u128 + *b as u128) / 2) as u64))
            }
            _ => Digit::from((self.to_biguint() + other.to_biguint()) >> 1u32),
        }
    }

    pub fn bits(&self) -> u64 {
        match &self.0 {
            Repr::Small(v) => 64 - v.leading_zeros() as u64,
            Repr::Big(b) => b.bits(),
        }
    }
}

impl From<u64> for Digit {
    fn from(v: u64) -> Self {
        Digit(Repr::Small(v))
    }
}

impl From<u32> for Digit {
    fn from(v: u32) -> Self {
        Digit(Repr::Small(v as u64))
    }
}

impl From<usize> for Digit {
    fn from(v: usize) -> Self {
        Digit(Repr::Small(v as u64))
    }
}

impl From<BigUint> for Digit {
    fn from(v: BigUint) -> Self {
        match v.to_u64() {
            Some(s) => Digit(Repr::Small(s)),
            None => Digit(Repr::Big(Box::new(v))),
        }
    }
}

impl From<&BigUint> for Digit {
    fn from(v: &BigUint) -> Self {
        match v.to_u64() {
            Some(s) => Digit(Repr::Small(s)),
            None => Digit(Repr::Big(Box::new(v.clone()))),
        }
    }
}

impl Default for Digit {
    fn default() -> Self {
        Digit::ZERO
    }
}

impl Ord for Digit {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.cmp(b),
            (Repr::Small(_), Repr::Big(_)) => Ordering::Less,
            (Repr::Big(_), Repr::Small(_)) => Ordering::Greater,
            (Repr::Big(a), Repr::Big(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Digit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(v) => write!(f, "{v}"),
            Repr::Big(b) => write!(f, "{b}"),
        }
    }
}

impl fmt::Debug for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Digit {
    type Err = num_bigint::ParseBigIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.parse::<u64>() {
            Ok(v) => Ok(Digit::from(v)),
            Err(_) => BigUint::from_str(s).map(Digit::from),
        }
    }
}

impl Zero for Digit {
    fn zero() -> Self {
        Digit::ZERO
    }
    fn is_zero(&self) -> bool {
        Digit::is_zero(self)
    }
}

impl std::ops::Add for Digit {
    type Output = Digit;
    fn add(self, rhs: Digit) -> Digit {
        match (&self.0, &rhs.0) {
            (Repr::Small(a), Repr::Small(b)) => match a.checked_add(*b) {
                Some(s) => Digit(Repr::Small(s)),
                None => Digit::from(BigUint::from(*a) + *b),
            },
            _ => Digit::from(self.to_biguint() + rhs.to_biguint()),
        }
    }
}

// Small digits serialize as JSON numbers, big ones as decimal strings.
impl Serialize for Digit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match &self.0 {
            Repr::Small(v) => s.serialize_u64(*v),
            Repr::Big(b) => s.serialize_str(&b.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Digit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct DigitVisitor;
        impl Visitor<'_> for DigitVisitor {
            type Value = Digit;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or a decimal string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Digit, E> {
                Ok(Digit::from(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Digit, E> {
                u64::try_from(v)
                    .map(Digit::from)
                    .map_err(|_| E::custom("negative digit"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Digit, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(DigitVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_values_normalize() {
        let small = Digit::from(BigUint::from(17u32));
        assert_eq!(small.as_u64(), Some(17));
        let big = Digit::from(BigUint::from(u64::MAX) + 1u32);
        assert_eq!(big.as_u64(), None);
        assert!(small < big);
        assert_eq!(Digit::from(u64::MAX).plus(1), big);
    }

    #[test]
    fn midpoint_and_sub() {
        let a = Digit::from(10u64);
        let b = Digit::from(u64::MAX);
        assert_eq!(a.midpoint(&b).to_biguint(), (BigUint::from(u64::MAX) + 10u32) >> 1u32);
        assert_eq!(a.saturating_sub(&b), Digit::ZERO);
        assert_eq!(b.saturating_sub(&a), Digit::from(u64::MAX - 10));
    }

    #[test]
    fn serde_small_and_big() {
        let d: Vec<Digit> = serde_json::from_str(r#"[3, "123456789012345678901234567890"]"#).unwrap();
        assert_eq!(d[0], Digit::from(3u64));
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"[3,"123456789012345678901234567890"]"#);
    }
}
