//! Numerical dimension estimators: α-volume sweeps over covering families,
//! box counting on point samples, and the restricted-vs-unrestricted gap demo.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::constructions::cantor::{cantor_samples, point_of, CantorMode, CantorScheme};
use crate::digit::Digit;
use crate::error::{Error, Result};
use crate::faithful::check_thm2_hypothesis;
use crate::measures::{local_dimension_series, ProductMeasure};
use crate::numeric::{least_squares, ln_add_exp, LinearFit};
use crate::qvector::StochasticVector;

/// Per-step dead band on the trend slope.
pub const DEAD_BAND: f64 = 1e-3;

/// 19 points on (0.05, 0.95).
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).filter(|a| *a < 0.951).collect()
}

/// Dyadic exponents `j` of the box scales `2^-j`.
pub const DEFAULT_SCALE_EXPONENTS: std::ops::RangeInclusive<u32> = 4..=20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    AlphaVolumeSweep,
    BoxCount,
    LocalDimension,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Decaying,
    Growing,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionReport {
    pub method: Method,
    /// α values, or box scales.
    pub grid: Vec<f64>,
    /// Per grid value: the log-volume series over k, or a single box count.
    pub series: Vec<Vec<f64>>,
    /// Index of the first series entry (the first k, or the first scale exponent).
    pub first_index: usize,
    pub trends: Vec<Trend>,
    pub estimate: Estimate,
    pub fit: Option<LinearFit>,
    /// Set when a growing α lies above a decaying one.
    pub inconsistent: bool,
    pub metadata: BTreeMap<String, String>,
}

impl DimensionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.method {
            Method::BoxCount => {
                out.push_str("scale,count\n");
                for (s, c) in self.grid.iter().zip(&self.series) {
                    out.push_str(&format!("{s:e},{}\n", c[0]));
                }
            }
            _ => {
                out.push_str("alpha,k,value\n");
                for (a, row) in self.grid.iter().zip(&self.series) {
                    for (i, y) in row.iter().enumerate() {
                        out.push_str(&format!("{a},{},{y:.12e}\n", self.first_index + i));
                    }
                }
            }
        }
        out
    }
}

/// Classify a log-volume series by the least-squares slope over its last two thirds.
pub fn classify(series: &[f64]) -> Trend {
    let start = series.len() / 3;
    let tail = &series[start..];
    if tail.iter().any(|y| !y.is_finite()) {
        return match tail.last() {
            Some(y) if *y == f64::NEG_INFINITY => Trend::Decaying,
            Some(y) if *y == f64::INFINITY => Trend::Growing,
            _ => Trend::Undetermined,
        };
    }
    let xs: Vec<f64> = (0..tail.len()).map(|i| i as f64).collect();
    match least_squares(&xs, tail) {
        Some(f) if f.slope > DEAD_BAND => Trend::Growing,
        Some(f) if f.slope < -DEAD_BAND => Trend::Decaying,
        _ => Trend::Undetermined,
    }
}

/// Evaluate `log_volume(k, α)` over the grid and bracket the critical exponent
/// between the largest growing α and the smallest decaying α.
pub fn alpha_volume_sweep<F>(
    log_volume: F,
    alpha_grid: &[f64],
    k_range: std::ops::RangeInclusive<usize>,
) -> Result<DimensionReport>
where
    F: Fn(usize, f64) -> Result<f64> + Sync,
{
    if alpha_grid.is_empty() {
        return Err(Error::param("empty α grid"));
    }
    if k_range.clone().count() < 3 {
        return Err(Error::param("k range needs at least 3 ranks"));
    }
    if alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("α grid must be strictly increasing"));
    }
    let series: Vec<Vec<f64>> = alpha_grid
        .par_iter()
        .map(|&a| k_range.clone().map(|k| log_volume(k, a)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let trends: Vec<Trend> = series.iter().map(|s| classify(s)).collect();
    let growing = alpha_grid.iter().zip(&trends).filter(|(_, t)| **t == Trend::Growing).map(|(a, _)| *a);
    let decaying = alpha_grid.iter().zip(&trends).filter(|(_, t)| **t == Trend::Decaying).map(|(a, _)| *a);
    let lo = growing.clone().fold(0.0, f64::max);
    let hi = decaying.clone().fold(f64::INFINITY, f64::min);
    let inconsistent = growing.clone().any(|g| decaying.clone().any(|d| d < g));
    let hi_b = if hi.is_finite() { hi } else { 1.0f64.max(lo) };
    Ok(DimensionReport {
        method: Method::AlphaVolumeSweep,
        grid: alpha_grid.to_vec(),
        series,
        first_index: *k_range.start(),
        trends,
        estimate: Estimate { value: 0.5 * (lo + hi_b), lo, hi: hi_b },
        fit: None,
        inconsistent,
        metadata: BTreeMap::new(),
    })
}

/// Log α-volume of the rank-`k` covering of `C` by its own cylinders:
/// `Σ_{j≤k} ln Σ_{i∈V_j} q_i^α`.
pub fn cantor_cylinder_log_volume(scheme: &CantorScheme, v: &StochasticVector, k: usize, alpha: f64) -> Result<f64> {
    let mut total = 0.0;
    for j in 1..=k {
        let (a, b) = scheme.v_range(j)?;
        let (lo, hi) = v.ln_power_sum_range(&a, &b, alpha)?;
        total += 0.5 * (lo + hi);
    }
    Ok(total)
}

/// Log α-volume of the rank-`k` cylinders of `[0,1)` with every digit below `n`,
/// plus the remaining set as one interval.
pub fn truncated_cylinder_log_volume(v: &StochasticVector, n: u64, k: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("need at least one digit"));
    }
    let (lo, hi) = v.ln_power_sum_range(&Digit::ZERO, &Digit::from(n - 1), alpha)?;
    let ln_cyl = k as f64 * 0.5 * (lo + hi);
    let ln_s = v.prefix(&Digit::from(n))?.ln();
    let covered = (k as f64 * ln_s).exp();
    if covered >= 1.0 {
        return Ok(ln_cyl);
    }
    Ok(ln_add_exp(ln_cyl, alpha * (-covered).ln_1p()))
}

/// Occupied-box counts at scales `2^-j`, with a least-squares slope over the
/// scales whose count stays at most a quarter of the sample size.
pub fn box_count(points: &[f64], scale_exponents: &[u32]) -> Result<DimensionReport> {
    if points.len() < 100 {
        return Err(Error::param(format!("box counting needs at least 100 points, got {}", points.len())));
    }
    if scale_exponents.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("scale exponents must be strictly increasing"));
    }
    if points.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Domain("points must lie in [0, 1]".into()));
    }
    let counts: Vec<usize> = scale_exponents
        .par_iter()
        .map(|&j| {
            let scale = (j as f64).exp2();
            let mut boxes: Vec<u64> = points.iter().map(|x| (x * scale).floor() as u64).collect();
            boxes.sort_unstable();
            boxes.dedup();
            boxes.len()
        })
        .collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "box counts must not decrease as the scale shrinks");
    let limit = points.len() / 4;
    let usable: Vec<(f64, f64)> = scale_exponents
        .iter()
        .zip(&counts)
        .filter(|(_, c)| **c <= limit)
        .map(|(j, c)| (*j as f64 * std::f64::consts::LN_2, (*c as f64).ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::param(format!("only {} usable scales", usable.len())));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.iter().cloned().unzip();
    let fit = least_squares(&xs, &ys).expect("distinct scales");
    let band = fit.residual / (xs.len() as f64).sqrt();
    let mut metadata = BTreeMap::new();
    metadata.insert("points".into(), points.len().to_string());
    metadata.insert("usable_scales".into(), usable.len().to_string());
    Ok(DimensionReport {
        method: Method::BoxCount,
        grid: scale_exponents.iter().map(|j| (-(*j as f64)).exp2()).collect(),
        series: counts.iter().map(|c| vec![*c as f64]).collect(),
        first_index: scale_exponents.first().copied().unwrap_or(0) as usize,
        trends: Vec::new(),
        estimate: Estimate { value: fit.slope, lo: fit.slope - band, hi: fit.slope + band },
        fit: Some(fit),
        inconsistent: false,
        metadata,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSettings {
    pub samples: usize,
    /// Words used for the local-dimension bound.
    pub words: usize,
    /// Sample depth for box counting (limited by double precision).
    pub box_depth: usize,
    pub scale_exponents: Vec<u32>,
    pub alpha_step: f64,
    pub seed: u64,
}

impl Default for GapSettings {
    fn default() -> Self {
        GapSettings {
            samples: 10_000,
            words: 100,
            box_depth: 3,
            scale_exponents: DEFAULT_SCALE_EXPONENTS.collect(),
            alpha_step: 0.01,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub vector: String,
    pub m0: f64,
    /// Box-count proxy for the unrestricted dimension.
    pub unrestricted_proxy: DimensionReport,
    /// Largest α on the step grid with `ln(μ(Δ_k)/|Δ_k|^α)` strictly
    /// decreasing over ranks `2..=depth` for every word.
    pub restricted_lower_bound: f64,
    pub restricted: DimensionReport,
    pub target_unrestricted: f64,
    pub target_restricted_lower: f64,
    pub restricted_upper_side: String,
}

impl GapReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `ln(μ(Δ_k)/|Δ_k|^α)` for `k = 1..=depth` along every word.
pub fn restricted_series(
    measure: &ProductMeasure<'_>,
    words: &[Vec<Digit>],
    alpha: f64,
) -> Result<Vec<Vec<f64>>> {
    words
        .par_iter()
        .map(|w| Ok(local_dimension_series(measure, w)?.ln_mass_over_length(alpha)))
        .collect()
}

fn strictly_decreasing(s: &[f64]) -> bool {
    s.windows(2).all(|w| w[1] < w[0])
}

/// Pairs the box-count proxy on samples of `C` with the local-dimension lower
/// bound under the cylinder net.
pub fn faithfulness_gap_demo(v: &StochasticVector, scheme: &CantorScheme, settings: &GapSettings) -> Result<GapReport> {
    let fit = check_thm2_hypothesis(v)
        .filter(|f| f.certified)
        .ok_or_else(|| Error::Hypothesis(format!("{} has no certified polynomial bounds", v.name())))?;
    let depth = scheme.exact_depth();
    if settings.box_depth > depth || depth < 2 {
        return Err(Error::param(format!("scheme holds only {depth} exact levels")));
    }
    let samples = cantor_samples(scheme, v, CantorMode::GammaWeighted, settings.box_depth, settings.samples, settings.seed)?;
    let points: Vec<f64> = samples.par_iter().map(|w| point_of(&w.digits, v)).collect::<Result<_>>()?;
    let mut proxy = box_count(&points, &settings.scale_exponents)?;
    proxy.metadata.insert("depth".into(), settings.box_depth.to_string());
    proxy.metadata.insert("seed".into(), settings.seed.to_string());
    proxy.metadata.insert("vector".into(), v.name());

    let measure = ProductMeasure::cantor_gamma(v, scheme.clone(), depth)?;
    let words: Vec<Vec<Digit>> = cantor_samples(
        scheme,
        v,
        CantorMode::GammaWeighted,
        depth,
        settings.words,
        crate::numeric::derive_seed(settings.seed, u64::MAX),
    )?
    .into_iter()
    .map(|w| w.digits)
    .collect();
    let local: Vec<_> = words.par_iter().map(|w| local_dimension_series(&measure, w)).collect::<Result<_>>()?;
    let steps = (1.0 / settings.alpha_step).round() as usize;
    let grid: Vec<f64> = (1..steps).map(|i| i as f64 * settings.alpha_step).collect();
    let mut bound = 0.0;
    let mut series = Vec::with_capacity(grid.len());
    for &a in &grid {
        let per_word: Vec<Vec<f64>> = local.iter().map(|l| l.ln_mass_over_length(a)).collect();
        if per_word.iter().all(|s| strictly_decreasing(&s[1..])) {
            bound = a;
        }
        // Worst (largest) value over the words at each rank.
        let worst: Vec<f64> = (0..depth)
            .map(|k| per_word.iter().map(|s| s[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        series.push(worst);
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("vector".into(), v.name());
    metadata.insert("depth".into(), depth.to_string());
    metadata.insert("words".into(), settings.words.to_string());
    metadata.insert("seed".into(), settings.seed.to_string());
    let restricted = DimensionReport {
        method: Method::LocalDimension,
        grid: grid.clone(),
        series,
        first_index: 1,
        trends: Vec::new(),
        estimate: Estimate { value: bound, lo: bound, hi: bound + settings.alpha_step },
        fit: None,
        inconsistent: false,
        metadata,
    };
    Ok(GapReport {
        vector: v.name(),
        m0: fit.m0,
        unrestricted_proxy: proxy,
        restricted_lower_bound: bound,
        restricted,
        target_unrestricted: 0.0,
        target_restricted_lower: 1.0 / fit.m0,
        restricted_upper_side: "unverified: equality with 1/m0 is not checked".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::cantor::cantor_scheme;
    use crate::numeric::ratio;
    use rand::{Rng, SeedableRng};

    #[test]
    fn grid_has_nineteen_points() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 19);
        assert!(g[0] > 0.0499 && g[18] < 0.9501);
    }

    #[test]
    fn uniform_box_count_slope_near_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let exps: Vec<u32> = DEFAULT_SCALE_EXPONENTS.collect();
        let r = box_count(&pts, &exps).unwrap();
        assert!((r.estimate.value - 1.0).abs() < 0.05, "{}", r.estimate.value);
    }

    #[test]
    fn constant_points_slope_zero() {
        let pts = vec![0.3; 500];
        let exps: Vec<u32> = DEFAULT_SCALE_EXPONENTS.collect();
        assert_eq!(box_count(&pts, &exps).unwrap().estimate.value, 0.0);
        assert!(box_count(&pts[..50], &exps).is_err());
        assert!(box_count(&pts, &[4, 5]).is_err());
    }

    #[test]
    fn full_volume_is_one_at_alpha_one() {
        let v = StochasticVector::luroth();
        for k in 1..6 {
            let x = truncated_cylinder_log_volume(&v, 50, k, 1.0).unwrap();
            assert!(x.abs() < 1e-12, "{k}: {x}");
        }
    }

    #[test]
    fn nabla_sweep_brackets_zero() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 40).unwrap();
        let r = alpha_volume_sweep(|k, a| s.nabla_log_volume(k, a), &default_alpha_grid(), 3..=40).unwrap();
        assert!(r.trends.iter().all(|t| *t == Trend::Decaying), "{:?}", r.trends);
        assert_eq!(r.estimate.lo, 0.0);
        assert_eq!(r.estimate.hi, 0.05);
        // The exponent of M_{k-1} turns negative only for k > 1/α.
        let short = alpha_volume_sweep(|k, a| s.nabla_log_volume(k, a), &[0.05], 3..=12).unwrap();
        assert_eq!(short.trends, vec![Trend::Growing]);
    }

    #[test]
    fn cylinder_sweep_brackets_half() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 8).unwrap();
        let k = s.exact_depth();
        let r = alpha_volume_sweep(|k, a| cantor_cylinder_log_volume(&s, &v, k, a), &default_alpha_grid(), 1..=k).unwrap();
        assert!(!r.inconsistent);
        assert!(r.estimate.lo <= 0.5 && 0.5 <= r.estimate.hi, "{:?}", r.estimate);
    }

    #[test]
    fn gap_demo_refuses_geometric() {
        let v = StochasticVector::geometric(ratio(1, 2)).unwrap();
        let s = cantor_scheme(&StochasticVector::luroth(), 3).unwrap();
        assert!(matches!(faithfulness_gap_demo(&v, &s, &GapSettings::default()), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn gap_demo_luroth() {
        let v = StochasticVector::luroth();
        let s = cantor_scheme(&v, 8).unwrap();
        let r = faithfulness_gap_demo(&v, &s, &GapSettings::default()).unwrap();
        eprintln!("proxy {} bound {} depth {}", r.unrestricted_proxy.estimate.value, r.restricted_lower_bound, s.exact_depth());
        assert!(r.unrestricted_proxy.estimate.value < 0.3);
        assert!(r.restricted_lower_bound >= 0.4);
        assert_eq!(r.target_restricted_lower, 0.5);
    }
}
