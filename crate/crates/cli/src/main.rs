use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qinf_cli::commands::{self, CommandOutput};
use qinf_cli::output::write_all;
use qinf_cli::{CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "qinf", version, about = "Expansions over stochastic vectors, faithfulness checks and dimension estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML file whose keys mirror the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// luroth | geometric[:r] | polynomial:m[:q0] | explicit:w0,w1,...[;geometric:r|polynomial:m]
    #[arg(long, global = true)]
    vector: Option<String>,
    /// Mantissa bits for float-mode vectors.
    #[arg(long, global = true)]
    precision: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (or directory, for scenarios).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Also write an SVG plot next to the output.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Args, Clone, Default)]
struct Params {
    /// Point as "p/q" or a decimal.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// Comma-separated digit word.
    #[arg(long)]
    digits: Option<String>,
    /// Tail of a decoded word: zero or unspecified.
    #[arg(long)]
    tail: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    s: Option<u64>,
    #[arg(long)]
    l: Option<u64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    /// Comma-separated α values.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    i_max: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    words: Option<usize>,
    /// Report digits 0..track.
    #[arg(long)]
    track: Option<usize>,
    /// xi_l or cantor_gamma.
    #[arg(long)]
    measure: Option<String>,
    /// renewal | exact_point (lln); gamma_weighted | uniform (Cantor samples).
    #[arg(long)]
    mode: Option<String>,
    /// nabla | cylinders | truncated.
    #[arg(long)]
    covering: Option<String>,
    /// Comma-separated dyadic exponents j of the box scales 2^-j.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<u32>>,
    /// File of points, one per line.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Digits of a point.
    Expand(Cmd),
    /// Point of a digit word.
    Decode(Cmd),
    /// Cylinder of a digit word.
    Cylinder(Cmd),
    /// Digit counts and frequencies of one word.
    Freqs(Cmd),
    /// Law-of-large-numbers harness over uniform samples.
    Lln(Cmd),
    /// Faithfulness verdict for the cylinder net of a vector.
    CheckFaithful(Cmd),
    /// Cantor-type scheme: l-values, M-values and ∇ log-volumes.
    Cantor(Cmd),
    /// Digit schedule and group boundaries of T_{s,l}.
    TslSchedule(Cmd),
    /// Sample digit words from a measure.
    Sample(Cmd),
    /// Dimension of a product measure.
    MeasureDim(Cmd),
    /// α-volume sweep over a covering family.
    DimSweep(Cmd),
    /// Box-counting slope of a point set.
    BoxCount(Cmd),
    /// Pinned end-to-end runs: thm2-gap, tsl-dimension, lln, tsl-oscillation.
    Scenario(ScenarioCmd),
}

#[derive(Args)]
struct Cmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    params: Params,
}

#[derive(Args)]
struct ScenarioCmd {
    name: String,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    params: Params,
}

fn resolve(common: &Common, p: &Params) -> CliResult<ExperimentConfig> {
    let flags = ExperimentConfig {
        vector: common.vector.clone(),
        precision: common.precision,
        seed: common.seed,
        x: p.x.clone(),
        digits: p.digits.clone(),
        tail: p.tail.clone(),
        depth: p.depth,
        s: p.s,
        l: p.l,
        k_max: p.k_max,
        groups: p.groups,
        alpha_grid: p.alpha_grid.clone(),
        i_max: p.i_max,
        samples: p.samples,
        words: p.words,
        track: p.track,
        measure: p.measure.clone(),
        mode: p.mode.clone(),
        covering: p.covering.clone(),
        scales: p.scales.clone(),
        input: p.input.clone(),
        output: common.output.clone(),
        format: common.format.clone(),
        svg: common.svg.then_some(true),
    };
    match &common.config {
        Some(path) => Ok(ExperimentConfig::load(path)?.merge(flags)),
        None => Ok(flags),
    }
}

fn run(cli: Cli) -> CliResult<(CommandOutput, ExperimentConfig, bool)> {
    let cmd = match &cli.command {
        Command::Scenario(s) => {
            let cfg = resolve(&s.common, &s.params)?;
            let out = commands::scenario_cmd(&s.name, &cfg)?;
            return Ok((out, cfg, true));
        }
        Command::Expand(c)
        | Command::Decode(c)
        | Command::Cylinder(c)
        | Command::Freqs(c)
        | Command::Lln(c)
        | Command::CheckFaithful(c)
        | Command::Cantor(c)
        | Command::TslSchedule(c)
        | Command::Sample(c)
        | Command::MeasureDim(c)
        | Command::DimSweep(c)
        | Command::BoxCount(c) => c,
    };
    let cfg = resolve(&cmd.common, &cmd.params)?;
    let out = match &cli.command {
        Command::Expand(_) => commands::expand(&cfg)?,
        Command::Decode(_) => commands::decode_cmd(&cfg)?,
        Command::Cylinder(_) => commands::cylinder(&cfg)?,
        Command::Freqs(_) => commands::freqs(&cfg)?,
        Command::Lln(_) => commands::lln(&cfg)?,
        Command::CheckFaithful(_) => commands::check_faithful(&cfg)?,
        Command::Cantor(_) => commands::cantor(&cfg)?,
        Command::TslSchedule(_) => commands::tsl_schedule(&cfg)?,
        Command::Sample(_) => commands::sample(&cfg)?,
        Command::MeasureDim(_) => commands::measure_dim(&cfg)?,
        Command::DimSweep(_) => commands::dim_sweep(&cfg)?,
        Command::BoxCount(_) => commands::box_count_cmd(&cfg)?,
        Command::Scenario(_) => unreachable!(),
    };
    Ok((out, cfg, false))
}

fn emit(out: &CommandOutput, cfg: &ExperimentConfig, scenario: bool) -> CliResult<()> {
    if let Some(path) = &cfg.output {
        let dir = if scenario { path.clone() } else { path.parent().map(PathBuf::from).unwrap_or_default() };
        write_all(&dir, &out.files)?;
    }
    print!("{}", out.stdout);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = run(cli).and_then(|(out, cfg, scenario)| emit(&out, &cfg, scenario).map(|_| out.passed));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qinf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
