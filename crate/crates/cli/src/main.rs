use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use snc_core::channel::{self, validate_params};
use snc_core::density::{PopulationDeConfig, ScalarDeConfig};
use snc_core::ensemble::{rho_star, EdgeDegreeDistribution};
use snc_core::experiment::{self, Campaign, CampaignSpec, CapacityCurveSpec, OracleReport};
use snc_core::{rational, Error, FieldSpec, Rational};

/// Experiments for sparse-graph codes on the symmetric network coding channel.
#[derive(Parser, Debug)]
#[command(name = "snc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity, Singleton bound and achievable points against ω.
    CapacityCurve(CapacityArgs),
    /// Coefficients and rate bookkeeping of a truncated ρ*_k.
    DegreeDist(DegreeArgs),
    /// Scalar density evolution α_t.
    DeScalar(ScalarArgs),
    /// Population density evolution over subspace dimensions.
    DePopulation(PopulationArgs),
    /// Monte Carlo encode/transmit/decode campaign.
    Simulate(SimulateArgs),
    /// Brute-force oracle checks.
    Oracle(OracleArgs),
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct Output {
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CapacityArgs {
    #[arg(long, value_parser = parse_rational)]
    lambda: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "1/100")]
    omega_step: Rational,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct DegreeArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    b: usize,
    #[arg(long, value_parser = parse_rational, default_value = "1/2")]
    lambda: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "1/3")]
    omega: Rational,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ScalarArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 6)]
    b: usize,
    /// Explicit edge distribution "d:p/r,d:p/r" instead of ρ*_k truncated at b.
    #[arg(long)]
    rho: Option<String>,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// Stop once α falls below this value.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ChannelArgs {
    #[arg(long, default_value_t = 2)]
    q: u32,
    #[arg(long = "N")]
    n: usize,
    #[arg(long, value_parser = parse_rational)]
    lambda: Rational,
    #[arg(long, value_parser = parse_rational)]
    omega: Rational,
    /// Defaults to (1-λ)/(λω).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 6)]
    b: usize,
}

#[derive(Args, Debug)]
struct PopulationArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value_t = 1000)]
    pop_size: usize,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Trailing zero rows ℓω' of each codeword (defaults to ℓω).
    #[arg(long)]
    zero_rows: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 1000)]
    pop_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Reuse one code for every trial.
    #[arg(long)]
    fixed_code: bool,
    /// Transmit the all-zero codeword.
    #[arg(long)]
    zero_codeword: bool,
    /// Per-trial JSON-lines log (defaults to <out>.trials.jsonl when --out is set).
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Which {
    RankCount,
    SubspaceOps,
    DeviationBound,
    All,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(value_enum)]
    which: Which,
    /// Field sizes to cover.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    q: Vec<u32>,
    /// Largest l, m for the rank-count oracle.
    #[arg(long, default_value_t = 3)]
    max_dim: usize,
    /// Largest ambient dimension for subspace-ops (q = first --q) and deviation-bound.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 500)]
    cases: usize,
    #[arg(long, default_value_t = 4)]
    max_slack: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Validation(String),
    Oracle(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(msg) => Failure::Io(msg),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn write_out(output: &Output, text: &str) -> Result<(), Failure> {
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn parse_rho(text: &str) -> Result<EdgeDegreeDistribution, Failure> {
    let coeffs = text
        .split(',')
        .map(|part| {
            let (d, p) = part
                .split_once(':')
                .ok_or_else(|| Failure::Validation(format!("expected d:p/r, got {part:?}")))?;
            let d = d.trim().parse().map_err(|_| Failure::Validation(format!("bad degree {d:?}")))?;
            Ok((d, rational::parse(p)?))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok(EdgeDegreeDistribution::new(coeffs)?)
}

fn resolve_k(args: &ChannelArgs) -> Result<usize, Failure> {
    match args.k {
        Some(k) => Ok(k),
        None => channel::achievable_k(&args.lambda, &args.omega).ok_or_else(|| {
            Failure::Validation("(1-lambda)/(lambda*omega) is not an integer; pass --k".into())
        }),
    }
}

fn capacity_curve(args: &CapacityArgs) -> Result<(), Failure> {
    let spec = CapacityCurveSpec { lambda: args.lambda.clone(), omega_step: args.omega_step.clone() };
    write_out(&args.output, &experiment::capacity_curve_csv(&spec)?)
}

fn degree_dist(args: &DegreeArgs) -> Result<(), Failure> {
    let report = experiment::degree_report(args.k, args.b, &args.lambda, &args.omega)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_out(&args.output, &text)
}

fn de_scalar(args: &ScalarArgs) -> Result<(), Failure> {
    let (rho, label) = match &args.rho {
        Some(text) => (parse_rho(text)?, format!("k={} rho={}", args.k, text.replace(' ', ""))),
        None => (rho_star(args.k, args.b)?.dist, format!("k={} b={}", args.k, args.b)),
    };
    let mut config = ScalarDeConfig::new(args.k, rho);
    config.max_iters = args.iters;
    config.epsilon_stop = args.epsilon;
    write_out(&args.output, &experiment::scalar_de_csv_for(&config, &label)?)
}

fn de_population(args: &PopulationArgs) -> Result<(), Failure> {
    let c = &args.channel;
    let params = validate_params(FieldSpec::new(c.q)?, c.n, &c.lambda, &c.omega)?;
    let k = resolve_k(c)?;
    let config = PopulationDeConfig {
        field: params.field,
        m: params.m,
        d: params.s,
        rho: rho_star(k, c.b)?.dist,
        population_size: args.pop_size,
        max_iters: args.iters,
    };
    let label = format!(
        "N={} lambda={} omega={} k={k} b={}",
        c.n,
        rational::format(&c.lambda),
        rational::format(&c.omega),
        c.b
    );
    write_out(&args.output, &experiment::population_de_csv(&config, args.seed, &label)?)
}

const CHUNK: usize = 64;

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let c = &args.channel;
    let spec = CampaignSpec {
        q: c.q,
        n: c.n,
        lambda: c.lambda.clone(),
        omega: c.omega.clone(),
        k: Some(resolve_k(c)?),
        b: c.b,
        zero_rows: args.zero_rows,
        trials: args.trials,
        max_iters: args.iters,
        seed: args.seed,
        fixed_code: args.fixed_code,
        zero_codeword: args.zero_codeword,
        pop_size: args.pop_size,
    };
    let campaign = Campaign::new(&spec)?;
    let log_path = args.log.clone().or_else(|| args.output.out.as_deref().map(log_path_for));
    let mut log = match &log_path {
        Some(p) => Some(File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?),
        None => None,
    };
    // Completed chunks reach the log before the next one starts, so an
    // interrupted run leaves every finished trial on disk.
    let mut records = Vec::with_capacity(spec.trials);
    for start in (0..spec.trials).step_by(CHUNK) {
        let chunk = campaign.run_trials(start..(start + CHUNK).min(spec.trials))?;
        if let Some(f) = log.as_mut() {
            f.write_all(campaign.log_lines(&chunk).as_bytes())?;
            f.flush()?;
        }
        records.extend(chunk);
    }
    let summary = campaign.summarize(records)?;
    if !summary.rate_below_capacity {
        eprintln!(
            "warning: design rate {} is not below capacity {}",
            summary.design_rate_target, summary.capacity
        );
    }
    write_out(&args.output, &experiment::summary_csv(&summary))
}

fn log_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".trials.jsonl");
    out.with_file_name(name)
}

fn oracle(args: &OracleArgs) -> Result<(), Failure> {
    let run = |w: Which| w == args.which || args.which == Which::All;
    let mut reports: Vec<OracleReport> = Vec::new();
    if run(Which::RankCount) {
        reports.push(experiment::rank_count_oracle(args.max_dim, &args.q)?);
    }
    if run(Which::SubspaceOps) {
        let q = *args.q.first().ok_or_else(|| Failure::Validation("--q is empty".into()))?;
        reports.push(experiment::subspace_oracle(args.m.unwrap_or(4), q, args.cases, args.seed)?);
    }
    if run(Which::DeviationBound) {
        reports.push(experiment::deviation_oracle(args.m.unwrap_or(20), args.max_slack, &args.q, args.trials, args.seed)?);
    }
    let body = serde_json::json!({
        "schema": "oracle/v1",
        "which": format!("{:?}", args.which),
        "q": args.q,
        "max_dim": args.max_dim,
        "m": args.m,
        "cases": args.cases,
        "max_slack": args.max_slack,
        "trials": args.trials,
        "seed": args.seed,
        "reports": reports,
    });
    write_out(&args.output, &(serde_json::to_string_pretty(&body).expect("report serializes") + "\n"))?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Oracle(format!("failed: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::CapacityCurve(a) => capacity_curve(a),
        Command::DegreeDist(a) => degree_dist(a),
        Command::DeScalar(a) => de_scalar(a),
        Command::DePopulation(a) => de_population(a),
        Command::Simulate(a) => simulate(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Oracle(msg)) => {
            eprintln!("oracle: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
    }
}
