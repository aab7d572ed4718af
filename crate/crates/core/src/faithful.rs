//! Sufficient conditions for faithfulness (and non-faithfulness) of the
//! cylinder net of a stochastic vector.
//!
//! Three checks feed the verdict:
//! * the tail power-sum bound `Σ_{k>i} q_k^α <= c(α) q_i^α` for every `i`;
//! * the ratio test `limsup q_{n+1}/q_n < 1`;
//! * two-sided polynomial decay `A/i^{m₀} <= q_i <= B/i^{m₀}`, which forces
//!   non-faithfulness.
//!
//! A finite scan proves nothing about "for every i", so each numeric result
//! states whether it is certified by a closed form or only sampled.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::numeric::{format_rational, least_squares, ln_add_exp, ln_rational, rational_to_f64};
use crate::qvector::{Family, PowerSum, RatioLimit, StochasticVector, TailRule};

pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
pub const DEFAULT_I_MAX: u64 = 10_000;

const OPEN_PROBLEM: &str = "Necessary and sufficient conditions for the cylinder net of a Q∞-expansion \
to be faithful are an open problem; none of the known sufficient conditions (tail power-sum bound, \
ratio test, two-sided polynomial decay) could be certified for this vector.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FaithfulByThm1,
    FaithfulByCorollary,
    NonFaithfulByThm2,
    Unknown,
}

impl Verdict {
    pub fn is_faithful(self) -> bool {
        matches!(self, Verdict::FaithfulByThm1 | Verdict::FaithfulByCorollary)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    /// `sup_i` of the ratio is finite, certified by a closed form.
    Bounded,
    /// The ratio is certified unbounded (or the tail sum diverges).
    Unbounded,
    /// Finite on the scanned range only.
    Sampled,
    /// The vector carries no tail information.
    Unavailable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CAlpha {
    pub alpha: f64,
    /// Supremum over the scanned range (`None` when the tail sum diverges or is unknown).
    pub value: Option<f64>,
    pub certified: bool,
    pub status: BoundStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    /// Exact limit of `q_{n+1}/q_n` when the family determines it, as `"p/q"`.
    pub limit: Option<String>,
    pub sampled_max: Option<f64>,
    pub window: (u64, u64),
    /// True when the limit is certified to be below 1.
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyFit {
    pub m0: f64,
    pub a: String,
    pub b: String,
    pub certified: bool,
    /// Index range the bounds were checked on; `None` means every `i >= 1`.
    pub range: Option<(u64, u64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaithfulSettings {
    pub alpha_grid: Vec<f64>,
    pub i_max: u64,
    pub ratio_window: u64,
}

impl Default for FaithfulSettings {
    fn default() -> Self {
        FaithfulSettings { alpha_grid: DEFAULT_ALPHA_GRID.to_vec(), i_max: DEFAULT_I_MAX, ratio_window: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaithfulnessReport {
    pub verdict: Verdict,
    pub c_of_alpha: Vec<CAlpha>,
    pub ratio_limsup: RatioReport,
    pub poly_fit: Option<PolyFit>,
    pub explanation: String,
}

impl FaithfulnessReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `ln(Σ_{k>i} q_k^α / q_i^α)` for every `i <= i_max`, by backward
/// accumulation from the family's tail oracle at `i_max`.
fn ln_tail_ratios(v: &StochasticVector, alpha: f64, i_max: u64) -> Result<Option<Vec<f64>>> {
    let PowerSum::Finite { ln_lo, ln_hi } = (match v.ln_tail_power_sum(i_max, alpha)? {
        Some(p) => p,
        None => return Ok(None),
    }) else {
        return Ok(None);
    };
    let mut ln_tail = 0.5 * (ln_lo + ln_hi);
    let mut out = vec![0.0; i_max as usize + 1];
    for i in (0..=i_max).rev() {
        let ln_qi = v.ln_weight(&Digit::from(i))?;
        out[i as usize] = ln_tail - alpha * ln_qi;
        ln_tail = ln_add_exp(ln_tail, alpha * ln_qi);
    }
    Ok(Some(out))
}

/// `Σ_{k>i} q_k^α / q_i^α` at a single index, `None` when the tail diverges.
pub fn tail_ratio(v: &StochasticVector, i: u64, alpha: f64) -> Result<Option<f64>> {
    Ok(match v.ln_tail_power_sum(i, alpha)? {
        Some(PowerSum::Finite { ln_lo, ln_hi }) => {
            Some((0.5 * (ln_lo + ln_hi) - alpha * v.ln_weight(&Digit::from(i))?).exp())
        }
        _ => None,
    })
}

pub fn check_thm1(v: &StochasticVector, alpha_grid: &[f64], i_max: u64) -> Result<Vec<CAlpha>> {
    if i_max == 0 {
        return Err(Error::param("i_max must be at least 1"));
    }
    if let Some(bad) = alpha_grid.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::param(format!("alpha {bad} outside (0,1]")));
    }
    let poly = v.polynomial_bounds().is_some();
    alpha_grid
        .iter()
        .map(|&alpha| {
            let ratios = ln_tail_ratios(v, alpha, i_max)?;
            let value = ratios.as_ref().map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp());
            let diverges = matches!(v.ln_tail_power_sum(i_max, alpha)?, Some(PowerSum::Divergent));
            let (status, certified) = if diverges || poly {
                // Two-sided polynomial decay makes the ratio grow at least linearly in i.
                (BoundStatus::Unbounded, true)
            } else if let Some(c) = certified_sup(v, alpha, ratios.as_deref()) {
                return Ok(CAlpha { alpha, value: Some(c), certified: true, status: BoundStatus::Bounded });
            } else if value.is_some() {
                (BoundStatus::Sampled, false)
            } else {
                (BoundStatus::Unavailable, false)
            };
            Ok(CAlpha { alpha, value, certified, status })
        })
        .collect()
}

// Families whose ratio is eventually constant have a certified supremum.
fn certified_sup(v: &StochasticVector, alpha: f64, scanned: Option<&[f64]>) -> Option<f64> {
    let tail_const = |r: &BigRational| {
        let lr = rational_to_f64(r).ln();
        (alpha * lr - (-(alpha * lr).exp_m1()).ln()).exp()
    };
    match v.family() {
        Family::Geometric { ratio } => Some(tail_const(ratio)),
        Family::Explicit { weights, tail: TailRule::Geometric { ratio } } => {
            // Past the listed weights the ratio is the geometric constant.
            let n = weights.len();
            let head = scanned?.iter().take(n + 1).cloned().fold(f64::NEG_INFINITY, f64::max).exp();
            Some(head.max(tail_const(ratio)))
        }
        _ => None,
    }
}

pub fn check_ratio_corollary(v: &StochasticVector, start: u64, window: u64) -> Result<RatioReport> {
    if window < 2 {
        return Err(Error::param("window must be at least 2"));
    }
    let (lo, hi) = match v.family() {
        Family::Explicit { weights, tail: TailRule::Unspecified } => {
            let n = weights.len() as u64;
            let hi = n.saturating_sub(1);
            (hi.saturating_sub(window).min(start), hi)
        }
        _ => (start, start + window),
    };
    let mut sampled_max: Option<f64> = None;
    for n in lo..hi {
        let r = (v.ln_weight(&Digit::from(n + 1))? - v.ln_weight(&Digit::from(n))?).exp();
        sampled_max = Some(sampled_max.map_or(r, |m: f64| m.max(r)));
    }
    let (limit, certified) = match v.ratio_limit() {
        Some(RatioLimit::Exact(r)) => (Some(format_rational(&r)), true),
        Some(RatioLimit::One) => (Some("1".to_string()), false),
        None => (None, false),
    };
    Ok(RatioReport { limit, sampled_max, window: (lo, hi), certified })
}

pub fn check_thm2_hypothesis(v: &StochasticVector) -> Option<PolyFit> {
    if let Some(b) = v.polynomial_bounds() {
        return Some(PolyFit {
            m0: b.exponent,
            a: format_rational(&b.lower),
            b: format_rational(&b.upper),
            certified: true,
            range: None,
        });
    }
    let Family::Explicit { weights, tail: TailRule::Unspecified } = v.family() else {
        return None;
    };
    if weights.len() < 4 {
        return None;
    }
    let xs: Vec<f64> = (1..weights.len()).map(|i| (i as f64).ln()).collect();
    let ys: Vec<f64> = weights[1..].iter().map(ln_rational).collect();
    let fit = least_squares(&xs, &ys)?;
    let m0 = -fit.slope;
    if m0.is_nan() || m0 <= 1.0 {
        return None;
    }
    let scaled: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (y + m0 * x).exp()).collect();
    let a = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let b = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some(PolyFit {
        m0,
        a: format!("{a}"),
        b: format!("{b}"),
        certified: false,
        range: Some((1, weights.len() as u64 - 1)),
    })
}

pub fn verdict(v: &StochasticVector, settings: &FaithfulSettings) -> Result<FaithfulnessReport> {
    let c_of_alpha = check_thm1(v, &settings.alpha_grid, settings.i_max)?;
    let start = settings.i_max.saturating_sub(settings.ratio_window);
    let ratio_limsup = check_ratio_corollary(v, start, settings.ratio_window)?;
    let poly_fit = check_thm2_hypothesis(v);

    let non_faithful = poly_fit.as_ref().is_some_and(|p| p.certified);
    let by_ratio = ratio_limsup.certified;
    let by_tail = !c_of_alpha.is_empty() && c_of_alpha.iter().all(|c| c.certified && c.status == BoundStatus::Bounded);
    if non_faithful && (by_ratio || by_tail) {
        return Err(Error::Hypothesis(format!(
            "{}: conflicting faithful and non-faithful certificates",
            v.name()
        )));
    }
    let (verdict, explanation) = if non_faithful {
        let p = poly_fit.as_ref().expect("checked");
        (
            Verdict::NonFaithfulByThm2,
            format!(
                "q_i is certified between {}/i^{} and {}/i^{} for every i >= 1; two-sided polynomial decay makes the cylinder net non-faithful",
                p.a, p.m0, p.b, p.m0
            ),
        )
    } else if by_ratio {
        (
            Verdict::FaithfulByCorollary,
            format!(
                "q_(n+1)/q_n tends to {} < 1, so the cylinder net is faithful",
                ratio_limsup.limit.as_deref().unwrap_or("?")
            ),
        )
    } else if by_tail {
        (
            Verdict::FaithfulByThm1,
            "sum_(k>i) q_k^alpha <= c(alpha) q_i^alpha holds with certified c(alpha) on the whole alpha grid, so the cylinder net is faithful".to_string(),
        )
    } else {
        (Verdict::Unknown, OPEN_PROBLEM.to_string())
    };
    Ok(FaithfulnessReport { verdict, c_of_alpha, ratio_limsup, poly_fit, explanation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    fn quick() -> FaithfulSettings {
        FaithfulSettings { i_max: 500, ..FaithfulSettings::default() }
    }

    #[test]
    fn geometric_is_faithful_with_closed_form_constant() {
        let v = StochasticVector::geometric(ratio(1, 2)).unwrap();
        let rep = verdict(&v, &quick()).unwrap();
        assert_eq!(rep.verdict, Verdict::FaithfulByCorollary);
        assert_eq!(rep.ratio_limsup.limit.as_deref(), Some("1/2"));
        assert!(rep.poly_fit.is_none());
        for c in &rep.c_of_alpha {
            let want = 2f64.powf(-c.alpha) / (1.0 - 2f64.powf(-c.alpha));
            assert!(c.certified && c.status == BoundStatus::Bounded);
            assert!((c.value.unwrap() - want).abs() < 1e-10, "{c:?}");
        }
        // Partial-sum cross-check at i = 3.
        let direct: f64 = (4..1000).map(|k| 0.5f64.powi(k + 1).powf(0.5)).sum::<f64>() / 0.5f64.powi(4).powf(0.5);
        assert!((tail_ratio(&v, 3, 0.5).unwrap().unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn luroth_is_non_faithful() {
        let v = StochasticVector::luroth();
        let rep = verdict(&v, &quick()).unwrap();
        assert_eq!(rep.verdict, Verdict::NonFaithfulByThm2);
        let p = rep.poly_fit.unwrap();
        assert_eq!((p.m0, p.a.as_str(), p.b.as_str(), p.certified), (2.0, "1/6", "1", true));
        assert!(rep.c_of_alpha.iter().all(|c| c.status == BoundStatus::Unbounded));
        assert!(!rep.ratio_limsup.certified);
        // Half-power tail diverges outright; at 0.6 the ratio keeps growing.
        assert_eq!(tail_ratio(&v, 10, 0.5).unwrap(), None);
        let r: Vec<f64> = [10, 100, 1000].iter().map(|&i| tail_ratio(&v, i, 0.6).unwrap().unwrap()).collect();
        assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
    }

    #[test]
    fn alpha_one_is_tail_mass_over_weight() {
        let v = StochasticVector::luroth();
        for i in [0u64, 5, 40] {
            let got = tail_ratio(&v, i, 1.0).unwrap().unwrap();
            // (1 - c_{i+1}) / q_i = (1/(i+2)) (i+1)(i+2) = i + 1
            assert!((got - (i + 1) as f64).abs() < 1e-6 * (i + 1) as f64, "{i} {got}");
        }
    }

    #[test]
    fn short_explicit_vector_is_unknown() {
        let w: Vec<BigRational> = (1..=10).map(|i| ratio(1, 1 << i)).collect();
        let v = StochasticVector::explicit(w, TailRule::Unspecified).unwrap();
        let rep = verdict(&v, &quick()).unwrap();
        assert_eq!(rep.verdict, Verdict::Unknown);
        assert!(rep.explanation.contains("open problem"));
        assert!(rep.poly_fit.as_ref().is_none_or(|p| !p.certified));
    }

    #[test]
    fn polynomial_family_ratio_tends_to_one() {
        let v = StochasticVector::polynomial(2.0, ratio(1, 2)).unwrap();
        let r = check_ratio_corollary(&v, 100, 50).unwrap();
        assert_eq!(r.limit.as_deref(), Some("1"));
        assert!(!r.certified);
        let rep = verdict(&v, &quick()).unwrap();
        assert_eq!(rep.verdict, Verdict::NonFaithfulByThm2);
    }

    #[test]
    fn luroth_ratio_increases_towards_one() {
        let v = StochasticVector::luroth();
        let mut prev = 0.0;
        for n in [1u64, 10, 100, 1000] {
            let r = (v.ln_weight(&Digit::from(n + 1)).unwrap() - v.ln_weight(&Digit::from(n)).unwrap()).exp();
            assert!((r - (n + 1) as f64 / (n + 3) as f64).abs() < 1e-12);
            assert!(r > prev && r < 1.0);
            prev = r;
        }
    }
}
