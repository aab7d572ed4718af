//! Experiment configuration: a flat TOML table whose keys mirror the CLI flags.

use std::path::{Path, PathBuf};

use num_rational::BigRational;
use qinf_core::numeric::parse_rational;
use qinf_core::qvector::{Family, TailRule};
use qinf_core::StochasticVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `luroth`, `geometric[:r]`, `polynomial:m[:q0]` or `explicit:w0,w1,…[;tail]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digits: Option<String>,
    /// `zero` or `unspecified`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub words: Option<usize>,
    /// Digits `0..track` reported by frequency commands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track: Option<usize>,
    /// `xi_l` or `cantor_gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    /// Sampling mode: `renewal`, `exact_point`, `uniform`, `gamma_weighted`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// `nabla`, `cylinders` or `truncated`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covering: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// `csv` or `json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<bool>,
}

macro_rules! merge_fields {
    ($base:expr, $over:expr, $($f:ident),*) => {
        ExperimentConfig { $($f: $over.$f.or($base.$f)),* }
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Field-wise merge; values set in `over` win.
    pub fn merge(self, over: ExperimentConfig) -> ExperimentConfig {
        merge_fields!(
            self, over, vector, precision, seed, x, digits, tail, depth, s, l, k_max, groups, alpha_grid, i_max,
            samples, words, track, measure, mode, covering, scales, input, output, format, svg
        )
    }

    /// Fill unset fields from `defaults`.
    pub fn or(self, defaults: ExperimentConfig) -> ExperimentConfig {
        defaults.merge(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn vector(&self) -> CliResult<StochasticVector> {
        let spec = self.vector.as_deref().unwrap_or("luroth");
        let family = parse_vector(spec)?;
        let precision = self.precision.unwrap_or(qinf_core::precise::DEFAULT_PRECISION);
        Ok(StochasticVector::from_family(family, precision)?)
    }

    pub fn require<T: Clone>(value: &Option<T>, name: &str) -> CliResult<T> {
        value.clone().ok_or_else(|| CliError::Usage(format!("missing --{name}")))
    }
}

fn rational(s: &str) -> CliResult<BigRational> {
    parse_rational(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn number(s: &str) -> CliResult<f64> {
    s.trim().parse().map_err(|_| CliError::Usage(format!("cannot parse {s:?} as a number")))
}

/// Parse the vector grammar used by `--vector` and the `vector` config key.
pub fn parse_vector(spec: &str) -> CliResult<Family> {
    let spec = spec.trim();
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let bad = || CliError::Usage(format!("unrecognized vector {spec:?}"));
    match name {
        "luroth" if rest.is_empty() => Ok(Family::Luroth),
        "geometric" => Ok(Family::Geometric { ratio: rational(if rest.is_empty() { "1/2" } else { rest })? }),
        "polynomial" => {
            let mut parts = rest.split(':');
            let m = number(parts.next().filter(|p| !p.is_empty()).ok_or_else(bad)?)?;
            let q0 = rational(parts.next().unwrap_or("1/2"))?;
            Ok(Family::Polynomial { exponent: m, q0 })
        }
        "explicit" => {
            let (w, tail) = rest.split_once(';').unwrap_or((rest, ""));
            let weights = w.split(',').map(rational).collect::<CliResult<Vec<_>>>()?;
            let tail = match tail.split_once(':').unwrap_or((tail, "")) {
                ("", _) => TailRule::Unspecified,
                ("geometric", r) => TailRule::Geometric { ratio: rational(r)? },
                ("polynomial", m) => TailRule::Polynomial { exponent: number(m)? },
                _ => return Err(bad()),
            };
            Ok(Family::Explicit { weights, tail })
        }
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = ExperimentConfig::from_toml("vector = \"geometric:1/3\"\ndepth = 7\nseed = 1\n").unwrap();
        let flags = ExperimentConfig { depth: Some(9), ..Default::default() };
        let m = file.merge(flags);
        assert_eq!(m.depth, Some(9));
        assert_eq!(m.seed, Some(1));
        assert_eq!(m.vector.as_deref(), Some("geometric:1/3"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("dpeth = 3"), Err(CliError::Config(_))));
    }

    #[test]
    fn vector_grammar() {
        assert_eq!(parse_vector("luroth").unwrap(), Family::Luroth);
        assert!(matches!(parse_vector("polynomial:3").unwrap(), Family::Polynomial { exponent, .. } if exponent == 3.0));
        assert!(matches!(
            parse_vector("explicit:1/2,1/4;geometric:1/2").unwrap(),
            Family::Explicit { tail: TailRule::Geometric { .. }, .. }
        ));
        assert!(parse_vector("cauchy").is_err());
    }
}
