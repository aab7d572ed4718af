//! One function per subcommand. Each takes the resolved configuration and
//! returns what to print and which files to write.

use std::path::PathBuf;

use num_traits::ToPrimitive;
use qinf_core::codec::{cylinder_of, decode, encode};
use qinf_core::constructions::cantor::{cantor_samples, cantor_scheme, point_of};
use qinf_core::constructions::tsl::{schedule_csv, tsl_sampler, tsl_scheme, FreeLaw};
use qinf_core::dimest::{
    alpha_volume_sweep, box_count, cantor_cylinder_log_volume, default_alpha_grid, truncated_cylinder_log_volume,
    DEFAULT_SCALE_EXPONENTS,
};
use qinf_core::faithful::{verdict, FaithfulSettings};
use qinf_core::measures::{entropy_ratio_dimension, local_dimension_series, moment_conditions, ProductMeasure};
use qinf_core::numeric::{derive_seed, format_rational, parse_rational};
use qinf_core::stats::{digit_counts, lln_harness};
use qinf_core::{CantorMode, Digit, DigitSequence, Real, SequenceTail};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Header, OutFile};
use crate::plot::{line_plot, Series};
use crate::scenario::{self, sampling_mode};

#[derive(Clone, Debug, Default)]
pub struct CommandOutput {
    pub stdout: String,
    /// Files written when `--output` is given; paths are relative to it.
    pub files: Vec<OutFile>,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn format(cfg: &ExperimentConfig, default: Format) -> CliResult<Format> {
    let from_ext = cfg.output.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()).map(str::to_string);
    match cfg.format.clone().or(from_ext).as_deref() {
        None => Ok(default),
        Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        Some(f) => Err(CliError::Usage(format!("unknown format {f:?}"))),
    }
}

fn output_name(cfg: &ExperimentConfig, fallback: &str) -> String {
    cfg.output
        .as_ref()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| fallback.to_string())
}

/// Single-document output: bare on stdout, with the header block in the file.
fn single<T: Serialize>(
    cfg: &ExperimentConfig,
    command: &str,
    seed: Option<u64>,
    fmt: Format,
    csv: impl FnOnce() -> String,
    value: &T,
) -> CliResult<CommandOutput> {
    let header = Header { command, config: cfg, seed };
    let (stdout, contents) = match fmt {
        Format::Csv => {
            let body = csv();
            (body.clone(), header.csv(&body))
        }
        Format::Json => {
            let mut body = serde_json::to_string_pretty(value).expect("serializes");
            body.push('\n');
            (body, header.json(value))
        }
    };
    let ext = if fmt == Format::Csv { "csv" } else { "json" };
    let files = vec![OutFile { name: output_name(cfg, &format!("{command}.{ext}")), contents }];
    Ok(CommandOutput { stdout, files, passed: true })
}

fn parse_digits(s: &str) -> CliResult<Vec<Digit>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|d| d.trim().parse::<Digit>().map_err(|_| CliError::Usage(format!("bad digit {d:?}"))))
        .collect()
}

fn parse_point(cfg: &ExperimentConfig) -> CliResult<Real> {
    let x = ExperimentConfig::require(&cfg.x, "x")?;
    let r = parse_rational(&x).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Real::Exact(r))
}

pub fn expand(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let x = parse_point(cfg)?;
    let depth = ExperimentConfig::require(&cfg.depth, "depth")?;
    let seq = encode(&x, &v, depth)?;
    let row = seq.to_csv_row();
    single(cfg, "expand", None, format(cfg, Format::Csv)?, || format!("{row}\n"), &seq)
}

pub fn decode_cmd(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let digits = parse_digits(&ExperimentConfig::require(&cfg.digits, "digits")?)?;
    let tail = match cfg.tail.as_deref().unwrap_or("zero") {
        "zero" => SequenceTail::ZeroTail,
        "unspecified" => SequenceTail::Unspecified,
        t => return Err(CliError::Usage(format!("unknown tail {t:?}"))),
    };
    let x = decode(&DigitSequence::new(digits, tail), &v)?;
    let text = match &x {
        Real::Exact(r) => format_rational(r),
        r => format!("[{}, {}]", format_rational(r.lo()), format_rational(r.hi())),
    };
    single(cfg, "decode", None, format(cfg, Format::Csv)?, || format!("{text}\n"), &json!({ "x": x }))
}

pub fn cylinder(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let digits = parse_digits(&ExperimentConfig::require(&cfg.digits, "digits")?)?;
    let c = cylinder_of(&digits, &v)?;
    let value = json!({
        "word": digits,
        "left": c.left,
        "right": c.right(),
        "length": c.length,
        "log_length": c.log_length,
    });
    let row = match (&c.left, &c.length) {
        (Real::Exact(a), Real::Exact(l)) => format!("{},{}", format_rational(a), format_rational(&(a + l))),
        _ => format!("{},{}", c.left.to_f64(), c.right().to_f64()),
    };
    single(cfg, "cylinder", None, format(cfg, Format::Json)?, || format!("left,right\n{row}\n"), &value)
}

pub fn freqs(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let word = match (&cfg.digits, &cfg.x) {
        (Some(d), _) => parse_digits(d)?,
        (None, Some(_)) => encode(&parse_point(cfg)?, &v, ExperimentConfig::require(&cfg.depth, "depth")?)?.digits,
        (None, None) => return Err(CliError::Usage("give --digits or --x with --depth".into())),
    };
    let report = digit_counts(&word);
    let csv = report.to_csv(Some(&v));
    single(cfg, "freqs", None, format(cfg, Format::Csv)?, || csv, &report)
}

pub fn lln(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let report = lln_harness(
        &v,
        cfg.samples.unwrap_or(10_000),
        cfg.depth.unwrap_or(100),
        cfg.track.unwrap_or(5),
        cfg.seed(),
        sampling_mode(cfg)?,
    )?;
    let mut out = single(cfg, "lln", Some(cfg.seed()), format(cfg, Format::Csv)?, || report.to_csv(), &report)?;
    out.passed = report.max_abs_z() <= 3.0;
    Ok(out)
}

pub fn check_faithful(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let mut settings = FaithfulSettings::default();
    if let Some(g) = &cfg.alpha_grid {
        settings.alpha_grid = g.clone();
    }
    if let Some(i) = cfg.i_max {
        settings.i_max = i;
    }
    let report = verdict(&v, &settings)?;
    single(cfg, "check-faithful", None, Format::Json, String::new, &report)
}

pub fn cantor(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let k_max = cfg.k_max.unwrap_or(6);
    let scheme = cantor_scheme(&v, k_max)?;
    let grid = cfg.alpha_grid.clone().unwrap_or_else(|| qinf_core::faithful::DEFAULT_ALPHA_GRID.to_vec());
    let mut csv = String::from("k,l_2k,l_2k+1,ln_l_2k,ln_l_2k+1,ln_M_k\n");
    for lev in &scheme.levels {
        let show = |x: &Option<num_bigint::BigUint>| x.as_ref().map_or("".to_string(), |v| v.to_string());
        csv.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{:.12e}\n",
            lev.k,
            show(&lev.l_even),
            show(&lev.l_odd),
            lev.ln_l_even,
            lev.ln_l_odd,
            scheme.ln_big_m[lev.k]
        ));
    }
    let mut nabla = Vec::new();
    for &a in &grid {
        let series: Vec<f64> = (1..=k_max).map(|k| scheme.nabla_log_volume(k, a)).collect::<qinf_core::Result<_>>()?;
        nabla.push(json!({ "alpha": a, "log_volume": series }));
    }
    let value = json!({ "scheme": scheme, "exact_depth": scheme.exact_depth(), "nabla": nabla });
    single(cfg, "cantor", None, format(cfg, Format::Json)?, || csv, &value)
}

pub fn tsl_schedule(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let s = ExperimentConfig::require(&cfg.s, "s")?;
    let l = ExperimentConfig::require(&cfg.l, "l")?;
    let groups = cfg.groups.unwrap_or(4);
    let scheme = tsl_scheme(&v, s, l, groups)?;
    let bounds = scheme.boundaries(groups)?;
    let fmt = format(cfg, Format::Csv)?;
    if let Some(depth) = cfg.depth {
        let g = qinf_core::constructions::tsl::groups_covering(&scheme, depth as u64)?;
        let csv = schedule_csv(scheme.schedule(g)?.take(depth));
        let value = json!({ "scheme": scheme, "boundaries": bounds });
        return single(cfg, "tsl-schedule", None, fmt, || csv, &value);
    }
    let mut csv = String::from("k,n,n0,n0_formula,n1\n");
    for b in &bounds {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            b.k,
            b.n,
            b.n0,
            scheme.n0_formula(b.k),
            b.n1.as_ref().map_or(String::new(), |x| x.to_string())
        ));
    }
    let value = json!({ "scheme": scheme, "boundaries": bounds });
    single(cfg, "tsl-schedule", None, fmt, || csv, &value)
}

fn cantor_mode(cfg: &ExperimentConfig) -> CliResult<CantorMode> {
    match cfg.mode.as_deref().unwrap_or("gamma_weighted") {
        "gamma_weighted" => Ok(CantorMode::GammaWeighted),
        "uniform" => Ok(CantorMode::Uniform),
        m => Err(CliError::Usage(format!("unknown Cantor sampling mode {m:?}"))),
    }
}

fn sample_words(cfg: &ExperimentConfig, v: &qinf_core::StochasticVector) -> CliResult<Vec<DigitSequence>> {
    let count = cfg.samples.unwrap_or(10) as usize;
    let seed = cfg.seed();
    match cfg.measure.as_deref().unwrap_or("xi_l") {
        "xi_l" => {
            let s = ExperimentConfig::require(&cfg.s, "s")?;
            let l = ExperimentConfig::require(&cfg.l, "l")?;
            let scheme = tsl_scheme(v, s, l, cfg.groups.unwrap_or(6))?;
            let depth = ExperimentConfig::require(&cfg.depth, "depth")? as u64;
            let law = FreeLaw::truncated(v, l)?;
            (0..count as u64)
                .into_par_iter()
                .map(|i| tsl_sampler(&scheme, depth, &law, derive_seed(seed, i)).map_err(CliError::from))
                .collect()
        }
        "cantor_gamma" => {
            let scheme = cantor_scheme(v, cfg.k_max.unwrap_or(8))?;
            let depth = cfg.depth.unwrap_or(3);
            Ok(cantor_samples(&scheme, v, cantor_mode(cfg)?, depth, count, seed)?)
        }
        m => Err(CliError::Usage(format!("unknown measure {m:?}; expected xi_l or cantor_gamma"))),
    }
}

pub fn sample(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let words = sample_words(cfg, &v)?;
    let mut csv = String::new();
    for w in &words {
        csv.push_str(&w.to_csv_row());
        csv.push('\n');
    }
    single(cfg, "sample", Some(cfg.seed()), format(cfg, Format::Csv)?, || csv, &words)
}

pub fn measure_dim(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    match cfg.measure.as_deref().unwrap_or("xi_l") {
        "xi_l" => {
            let s = ExperimentConfig::require(&cfg.s, "s")?;
            let l = ExperimentConfig::require(&cfg.l, "l")?;
            let groups = cfg.groups.unwrap_or(8);
            let m = ProductMeasure::xi(&v, tsl_scheme(&v, s, l, groups)?)?;
            let report = entropy_ratio_dimension(&m, groups, 1)?;
            let moments = moment_conditions(&m, 1000)?;
            let mut csv = String::from("k,n,ratio,closed_form\n");
            for c in &report.checkpoints {
                csv.push_str(&format!("{},{},{:.15e},{:.15e}\n", c.k, c.n, c.ratio, c.closed_form.unwrap_or(f64::NAN)));
            }
            let value = json!({
                "checkpoints": report.checkpoints,
                "liminf_estimate": report.liminf_estimate,
                "closed_form": report.closed_form,
                "K": report.k_const,
                "moments": moments,
            });
            single(cfg, "measure-dim", None, format(cfg, Format::Json)?, || csv, &value)
        }
        "cantor_gamma" => {
            let scheme = cantor_scheme(&v, cfg.k_max.unwrap_or(8))?;
            let depth = scheme.exact_depth();
            let m = ProductMeasure::cantor_gamma(&v, scheme.clone(), depth)?;
            let words = cantor_samples(&scheme, &v, CantorMode::GammaWeighted, depth, cfg.words.unwrap_or(100), cfg.seed())?;
            let series: Vec<_> =
                words.par_iter().map(|w| local_dimension_series(&m, &w.digits)).collect::<qinf_core::Result<_>>()?;
            let mut csv = String::from("k,median_ratio,min_ratio,max_ratio\n");
            let mut medians = Vec::new();
            for k in 0..depth {
                let mut r: Vec<f64> = series.iter().map(|s| s.ratio[k]).collect();
                r.sort_by(f64::total_cmp);
                let med = r[r.len() / 2];
                medians.push(med);
                csv.push_str(&format!("{},{med:.12e},{:.12e},{:.12e}\n", k + 1, r[0], r[r.len() - 1]));
            }
            let value = json!({ "depth": depth, "words": words.len(), "median_local_dimension": medians });
            single(cfg, "measure-dim", Some(cfg.seed()), format(cfg, Format::Json)?, || csv, &value)
        }
        m => Err(CliError::Usage(format!("unknown measure {m:?}; expected xi_l or cantor_gamma"))),
    }
}

fn with_svg(mut out: CommandOutput, cfg: &ExperimentConfig, header: Header<'_>, svg: impl FnOnce() -> CliResult<String>) -> CliResult<CommandOutput> {
    if cfg.svg.unwrap_or(false) {
        let stem = output_name(cfg, header.command);
        let stem = stem.rsplit_once('.').map_or(stem.clone(), |(a, _)| a.to_string());
        out.files.push(OutFile { name: format!("{stem}.svg"), contents: header.svg_comment(svg()?) });
    }
    Ok(out)
}

pub fn dim_sweep(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let grid = cfg.alpha_grid.clone().unwrap_or_else(default_alpha_grid);
    let covering = cfg.covering.as_deref().unwrap_or("nabla");
    let mut report = match covering {
        "nabla" => {
            let k_max = cfg.k_max.unwrap_or(12);
            let scheme = cantor_scheme(&v, k_max)?;
            alpha_volume_sweep(|k, a| scheme.nabla_log_volume(k, a), &grid, 3..=k_max)?
        }
        "cylinders" => {
            let scheme = cantor_scheme(&v, cfg.k_max.unwrap_or(8))?;
            let k = scheme.exact_depth();
            alpha_volume_sweep(|j, a| cantor_cylinder_log_volume(&scheme, &v, j, a), &grid, 1..=k)?
        }
        "truncated" => {
            let n = cfg.depth.unwrap_or(100) as u64;
            alpha_volume_sweep(|k, a| truncated_cylinder_log_volume(&v, n, k, a), &grid, 1..=cfg.k_max.unwrap_or(10))?
        }
        c => return Err(CliError::Usage(format!("unknown covering {c:?}; expected nabla, cylinders or truncated"))),
    };
    report.metadata.insert("vector".into(), v.name());
    report.metadata.insert("covering".into(), covering.into());
    let header = Header { command: "dim-sweep", config: cfg, seed: None };
    let out = single(cfg, "dim-sweep", None, format(cfg, Format::Json)?, || report.to_csv(), &report)?;
    with_svg(out, cfg, header, || {
        let series: Vec<Series> = report
            .grid
            .iter()
            .zip(&report.series)
            .map(|(a, s)| Series {
                name: format!("alpha = {a}"),
                points: s.iter().enumerate().map(|(i, y)| ((report.first_index + i) as f64, *y)).collect(),
            })
            .collect();
        line_plot("Log alpha-volume of the covering", "rank k", "log volume", &series)
    })
}

pub fn box_count_cmd(cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let v = cfg.vector()?;
    let points: Vec<f64> = match &cfg.input {
        Some(path) => read_points(path)?,
        None => sample_words(&cfg.clone().or(ExperimentConfig { measure: Some("cantor_gamma".into()), samples: Some(10_000), ..Default::default() }), &v)?
            .par_iter()
            .map(|w| point_of(&w.digits, &v))
            .collect::<qinf_core::Result<_>>()?,
    };
    let scales = cfg.scales.clone().unwrap_or_else(|| DEFAULT_SCALE_EXPONENTS.collect());
    let mut report = box_count(&points, &scales)?;
    report.metadata.insert("seed".into(), cfg.seed().to_string());
    let seed = if cfg.input.is_some() { None } else { Some(cfg.seed()) };
    let header = Header { command: "box-count", config: cfg, seed };
    let out = single(cfg, "box-count", seed, format(cfg, Format::Json)?, || report.to_csv(), &report)?;
    with_svg(out, cfg, header, || {
        let pts = report.grid.iter().zip(&report.series).map(|(s, c)| (-s.log2(), c[0].ln())).collect();
        line_plot("Box counts", "-log2(scale)", "ln N", &[Series { name: "ln N".into(), points: pts }])
    })
}

fn read_points(path: &PathBuf) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let first = l.split(',').next().unwrap_or(l);
            match parse_rational(first) {
                Ok(r) => Ok(r.to_f64().unwrap_or(f64::NAN)),
                Err(_) => first.parse::<f64>().map_err(|_| CliError::Usage(format!("bad point {l:?}"))),
            }
        })
        .collect()
}

pub fn scenario_cmd(name: &str, cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    let outcome = scenario::run(name, cfg)?;
    let mut stdout = String::new();
    for c in &outcome.checks {
        stdout.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    Ok(CommandOutput { stdout, passed: outcome.passed(), files: outcome.files })
}
