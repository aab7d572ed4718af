//! Pinned end-to-end reproduction runs. Each scenario resolves its defaults,
//! runs the pipeline and returns a bundle of files plus pass/fail checks.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use qinf_core::constructions::cantor::cantor_scheme;
use qinf_core::constructions::tsl::{tsl_sampler, tsl_scheme, FreeLaw};
use qinf_core::dimest::{faithfulness_gap_demo, GapSettings, DEFAULT_SCALE_EXPONENTS};
use qinf_core::measures::{entropy_ratio_dimension, xi_closed_form, ProductMeasure};
use qinf_core::numeric::biguint_to_rational;
use qinf_core::stats::{lln_harness, oscillation_csv, oscillation_profile, SamplingMode};
use qinf_core::Digit;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Header, OutFile};
use crate::plot::{line_plot, Series};

pub const SCENARIOS: [&str; 4] = ["thm2-gap", "tsl-dimension", "lln", "tsl-oscillation"];

/// Grid of `(s, l)` pairs for the `ξ(l)` dimension table.
pub const S_GRID: [u64; 4] = [1, 4, 16, 64];
pub const L_GRID: [u64; 3] = [4, 16, 64];
/// The grid maximum must exceed `1 - GRID_EPSILON`.
pub const GRID_EPSILON: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.into(), passed, detail }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub files: Vec<OutFile>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Pinned defaults for a scenario; explicit settings in `cfg` override them.
pub fn defaults(name: &str) -> CliResult<ExperimentConfig> {
    let base = ExperimentConfig { vector: Some("luroth".into()), seed: Some(crate::config::DEFAULT_SEED), ..Default::default() };
    let extra = match name {
        "thm2-gap" => ExperimentConfig {
            k_max: Some(8),
            samples: Some(10_000),
            words: Some(100),
            depth: Some(3),
            scales: Some(DEFAULT_SCALE_EXPONENTS.collect()),
            ..Default::default()
        },
        "tsl-dimension" => ExperimentConfig { s: Some(64), l: Some(64), groups: Some(10), ..Default::default() },
        "lln" => ExperimentConfig {
            samples: Some(100_000),
            depth: Some(1000),
            track: Some(5),
            mode: Some("renewal".into()),
            ..Default::default()
        },
        "tsl-oscillation" => ExperimentConfig { s: Some(1), l: Some(4), groups: Some(4), ..Default::default() },
        _ => {
            return Err(CliError::Usage(format!(
                "unknown scenario {name:?}; expected one of {}",
                SCENARIOS.join(", ")
            )))
        }
    };
    Ok(base.merge(extra))
}

pub fn run(name: &str, cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let cfg = cfg.clone().or(defaults(name)?);
    let header = Header { command: name, config: &cfg, seed: Some(cfg.seed()) };
    let mut out = match name {
        "thm2-gap" => thm2_gap(&cfg, header)?,
        "tsl-dimension" => tsl_dimension(&cfg, header)?,
        "lln" => lln(&cfg, header)?,
        "tsl-oscillation" => tsl_oscillation(&cfg, header)?,
        _ => unreachable!("defaults() rejects unknown names"),
    };
    out.files.push(OutFile { name: "checks.json".into(), contents: header.json(&out.checks) });
    Ok(out)
}

fn thm2_gap(cfg: &ExperimentConfig, header: Header<'_>) -> CliResult<Outcome> {
    let v = cfg.vector()?;
    let scheme = cantor_scheme(&v, cfg.k_max.unwrap_or(8))?;
    let settings = GapSettings {
        samples: cfg.samples.unwrap_or(10_000) as usize,
        words: cfg.words.unwrap_or(100),
        box_depth: cfg.depth.unwrap_or(3),
        scale_exponents: cfg.scales.clone().unwrap_or_else(|| DEFAULT_SCALE_EXPONENTS.collect()),
        alpha_step: 0.01,
        seed: cfg.seed(),
    };
    let report = faithfulness_gap_demo(&v, &scheme, &settings)?;
    let proxy = report.unrestricted_proxy.estimate.value;
    let bound = report.restricted_lower_bound;
    let target = report.target_restricted_lower;
    let checks = vec![
        Check::new("unrestricted_proxy_below_0.3", proxy < 0.3, format!("box-count slope {proxy:.6}")),
        Check::new(
            "restricted_bound_near_1/m0",
            bound >= target - 0.1,
            format!("lower bound {bound:.2}, target {target:.6}"),
        ),
    ];
    let box_pts: Vec<(f64, f64)> = report
        .unrestricted_proxy
        .grid
        .iter()
        .zip(&report.unrestricted_proxy.series)
        .map(|(s, c)| (-s.log2(), c[0].ln()))
        .collect();
    let svg = line_plot(
        "Box counts of samples from C",
        "-log2(scale)",
        "ln N(scale)",
        &[Series { name: "ln N".into(), points: box_pts }],
    )?;
    Ok(Outcome {
        files: vec![
            OutFile { name: "gap.json".into(), contents: header.json(&report) },
            OutFile { name: "box_count.csv".into(), contents: header.csv(&report.unrestricted_proxy.to_csv()) },
            OutFile { name: "restricted.csv".into(), contents: header.csv(&report.restricted.to_csv()) },
            OutFile { name: "box_count.svg".into(), contents: header.svg_comment(svg) },
        ],
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub s: u64,
    pub l: u64,
    pub h_l: f64,
    pub b_l: f64,
    #[serde(rename = "K")]
    pub k_const: f64,
    pub limit: f64,
}

/// Closed-form limits over `S_GRID × L_GRID` with the given number of groups.
pub fn dimension_grid(v: &qinf_core::StochasticVector, groups: usize) -> CliResult<Vec<GridRow>> {
    let mut rows = Vec::new();
    for &s in &S_GRID {
        for &l in &L_GRID {
            let t = tsl_scheme(v, s, l, groups)?;
            let cf = xi_closed_form(v, &t)?;
            rows.push(GridRow { s, l, h_l: cf.h_l, b_l: cf.b_l, k_const: cf.k_const, limit: cf.limit });
        }
    }
    Ok(rows)
}

/// Monotone non-decreasing in `s` for each `l`, and in `l` for each `s`.
pub fn grid_is_monotone(rows: &[GridRow]) -> bool {
    let at = |s: u64, l: u64| rows.iter().find(|r| r.s == s && r.l == l).map(|r| r.limit).unwrap_or(f64::NAN);
    let in_s = L_GRID.iter().all(|&l| S_GRID.windows(2).all(|w| at(w[0], l) < at(w[1], l)));
    let in_l = S_GRID.iter().all(|&s| L_GRID.windows(2).all(|w| at(s, w[0]) < at(s, w[1])));
    in_s && in_l
}

fn tsl_dimension(cfg: &ExperimentConfig, header: Header<'_>) -> CliResult<Outcome> {
    let v = cfg.vector()?;
    let (s, l) = (cfg.s.unwrap_or(64), cfg.l.unwrap_or(64));
    let groups = cfg.groups.unwrap_or(10);
    let scheme = tsl_scheme(&v, s, l, groups)?;
    let m = ProductMeasure::xi(&v, scheme)?;
    let report = entropy_ratio_dimension(&m, groups, 1)?;
    let max_rel = report
        .checkpoints
        .iter()
        .map(|c| {
            let cf = c.closed_form.unwrap_or(f64::NAN);
            ((c.ratio - cf) / cf).abs()
        })
        .fold(0.0, f64::max);
    let mut csv = String::from("k,n,ratio,closed_form,relative_error\n");
    for c in &report.checkpoints {
        let cf = c.closed_form.unwrap_or(f64::NAN);
        csv.push_str(&format!("{},{},{:.15e},{:.15e},{:.3e}\n", c.k, c.n, c.ratio, cf, ((c.ratio - cf) / cf).abs()));
    }
    let grid = dimension_grid(&v, groups)?;
    let mut grid_csv = String::from("s,l,h_l,b_l,K,limit\n");
    for r in &grid {
        grid_csv.push_str(&format!("{},{},{:.15e},{:.15e},{:.15e},{:.15e}\n", r.s, r.l, r.h_l, r.b_l, r.k_const, r.limit));
    }
    let grid_max = grid.iter().map(|r| r.limit).fold(f64::NEG_INFINITY, f64::max);
    let monotone = grid_is_monotone(&grid);
    let checks = vec![
        Check::new("partial_ratios_match_closed_form", max_rel <= 1e-9, format!("max relative error {max_rel:.3e}")),
        Check::new("grid_monotone_in_s_and_l", monotone, format!("{} grid points", grid.len())),
        Check::new(
            "grid_max_near_one",
            grid_max > 1.0 - GRID_EPSILON,
            format!("max {grid_max:.6} against 1 - {GRID_EPSILON}"),
        ),
    ];
    let curve: Vec<(f64, f64)> = report.checkpoints.iter().map(|c| (c.k as f64, c.ratio)).collect();
    let limit: Vec<(f64, f64)> =
        report.checkpoints.iter().map(|c| (c.k as f64, report.closed_form.unwrap_or(f64::NAN))).collect();
    let svg = line_plot(
        &format!("Partial entropy ratios, s = {s}, l = {l}"),
        "group k",
        "sum h / sum b",
        &[Series { name: "partial ratio".into(), points: curve }, Series { name: "limit".into(), points: limit }],
    )?;
    #[derive(Serialize)]
    struct Bundle<'a> {
        #[serde(flatten)]
        report: &'a qinf_core::EntropyDimensionReport,
        grid: &'a [GridRow],
    }
    Ok(Outcome {
        files: vec![
            OutFile { name: "entropy_ratio.json".into(), contents: header.json(&Bundle { report: &report, grid: &grid }) },
            OutFile { name: "partial_ratios.csv".into(), contents: header.csv(&csv) },
            OutFile { name: "grid.csv".into(), contents: header.csv(&grid_csv) },
            OutFile { name: "partial_ratios.svg".into(), contents: header.svg_comment(svg) },
        ],
        checks,
    })
}

pub fn sampling_mode(cfg: &ExperimentConfig) -> CliResult<SamplingMode> {
    match cfg.mode.as_deref().unwrap_or("renewal") {
        "renewal" => Ok(SamplingMode::Renewal),
        "exact_point" => Ok(SamplingMode::ExactPoint),
        m => Err(CliError::Usage(format!("unknown sampling mode {m:?}"))),
    }
}

fn lln(cfg: &ExperimentConfig, header: Header<'_>) -> CliResult<Outcome> {
    let v = cfg.vector()?;
    let report = lln_harness(
        &v,
        cfg.samples.unwrap_or(100_000),
        cfg.depth.unwrap_or(1000),
        cfg.track.unwrap_or(5),
        cfg.seed(),
        sampling_mode(cfg)?,
    )?;
    let z = report.max_abs_z();
    let checks = vec![Check::new("all_abs_z_at_most_3", z <= 3.0, format!("max |z| = {z:.4}"))];
    let pts: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.digit as f64, r.z)).collect();
    let svg = line_plot("Digit frequency z-scores", "digit", "z", &[Series { name: "z".into(), points: pts }])?;
    Ok(Outcome {
        files: vec![
            OutFile { name: "lln.csv".into(), contents: header.csv(&report.to_csv()) },
            OutFile { name: "lln.json".into(), contents: header.json(&report) },
            OutFile { name: "lln.svg".into(), contents: header.svg_comment(svg) },
        ],
        checks,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationRow {
    pub k: usize,
    pub n0: String,
    pub n1: String,
    pub count_n0: u64,
    pub count_n1: u64,
    /// `freq(n⁰) / freq(n¹)` as an exact fraction.
    pub frequency_ratio: String,
    /// `n¹ / n⁰`, equal to the ratio above when the counts agree.
    pub length_ratio: String,
    pub length_ratio_f64: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationReport {
    pub s: u64,
    pub l: u64,
    pub groups: usize,
    pub depth: u64,
    pub rows: Vec<OscillationRow>,
    /// `(s + 1 + 1/m₁) / (s + 1)`, the limit of `n¹/n⁰`.
    pub limit_ratio: f64,
}

/// Longest word the oscillation scenario will materialize.
pub const MAX_WORD: u64 = 50_000_000;

/// Counts of digit 0 at `n_k⁰` and `n_k¹` along one sampled `T_{s,l}` word.
pub fn oscillation_rows(
    s: u64,
    l: u64,
    groups: usize,
    seed: u64,
    v: &qinf_core::StochasticVector,
) -> CliResult<(OscillationReport, Vec<qinf_core::stats::OscillationPoint>)> {
    let scheme = tsl_scheme(v, s, l, groups)?;
    let bounds = scheme.boundaries(groups)?;
    let depth = bounds.last().expect("groups >= 1").n.to_u64().filter(|d| *d <= MAX_WORD).ok_or_else(|| {
        CliError::Usage(format!("{groups} groups need more than {MAX_WORD} positions; use fewer groups"))
    })?;
    let word = tsl_sampler(&scheme, depth, &FreeLaw::truncated(v, l)?, seed)?;
    let mut checkpoints: Vec<usize> = Vec::new();
    for b in &bounds {
        checkpoints.push(b.n0.to_usize().expect("fits"));
        if let Some(n1) = &b.n1 {
            checkpoints.push(n1.to_usize().expect("fits"));
        }
        checkpoints.push(b.n.to_usize().expect("fits"));
    }
    // Evenly spaced points in log scale for the plot.
    let ln_d = (depth as f64).ln();
    checkpoints.extend((1..=400).map(|i| ((i as f64 / 400.0 * ln_d).exp().round() as usize).clamp(1, depth as usize)));
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let profile = oscillation_profile(&word.digits, &Digit::ZERO, &checkpoints)?;
    let count_at = |n: &BigUint| {
        let n = n.to_usize().expect("fits");
        profile.iter().find(|p| p.n == n).expect("checkpoint present").count
    };
    let rows = bounds
        .iter()
        .filter_map(|b| b.n1.as_ref().map(|n1| (b, n1)))
        .map(|(b, n1)| {
            let (c0, c1) = (count_at(&b.n0), count_at(n1));
            let n0r = biguint_to_rational(&b.n0);
            let n1r = biguint_to_rational(n1);
            let c = |x: u64| BigRational::from_integer(x.into());
            let freq_ratio = if c1 == 0 { None } else { Some((c(c0) / &n0r) / (c(c1) / &n1r)) };
            let length_ratio = &n1r / &n0r;
            OscillationRow {
                k: b.k,
                n0: b.n0.to_string(),
                n1: n1.to_string(),
                count_n0: c0,
                count_n1: c1,
                frequency_ratio: freq_ratio.map_or("undefined".into(), |r| r.to_string()),
                length_ratio: length_ratio.to_string(),
                length_ratio_f64: length_ratio.to_f64().unwrap_or(f64::NAN),
            }
        })
        .collect();
    let m1 = scheme.m[1] as f64;
    let report = OscillationReport {
        s,
        l,
        groups,
        depth,
        rows,
        limit_ratio: (s as f64 + 1.0 + 1.0 / m1) / (s as f64 + 1.0),
    };
    Ok((report, profile))
}

fn tsl_oscillation(cfg: &ExperimentConfig, header: Header<'_>) -> CliResult<Outcome> {
    let v = cfg.vector()?;
    let (report, profile) =
        oscillation_rows(cfg.s.unwrap_or(1), cfg.l.unwrap_or(4), cfg.groups.unwrap_or(4), cfg.seed(), &v)?;
    let counts_equal = report.rows.iter().all(|r| r.count_n0 == r.count_n1);
    let ratios_exact = report.rows.iter().all(|r| r.frequency_ratio == r.length_ratio);
    let checks = vec![
        Check::new(
            "zero_count_constant_between_n0_and_n1",
            counts_equal && !report.rows.is_empty(),
            format!("{} groups checked", report.rows.len()),
        ),
        Check::new(
            "frequency_ratio_equals_length_ratio",
            ratios_exact && !report.rows.is_empty(),
            format!("limit (s+1+1/m1)/(s+1) = {:.6}", report.limit_ratio),
        ),
    ];
    let pts: Vec<(f64, f64)> = profile.iter().map(|p| ((p.n as f64).log10(), p.frequency)).collect();
    let svg = line_plot(
        "Running frequency of digit 0",
        "log10 n",
        "N0(x, n) / n",
        &[Series { name: "frequency".into(), points: pts }],
    )?;
    let mut rows_csv = String::from("k,n0,n1,count_n0,count_n1,frequency_ratio,length_ratio\n");
    for r in &report.rows {
        rows_csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.k, r.n0, r.n1, r.count_n0, r.count_n1, r.frequency_ratio, r.length_ratio
        ));
    }
    Ok(Outcome {
        files: vec![
            OutFile { name: "oscillation.json".into(), contents: header.json(&report) },
            OutFile { name: "oscillation.csv".into(), contents: header.csv(&oscillation_csv(&profile)) },
            OutFile { name: "boundaries.csv".into(), contents: header.csv(&rows_csv) },
            OutFile { name: "oscillation.svg".into(), contents: header.svg_comment(svg) },
        ],
        checks,
    })
}
