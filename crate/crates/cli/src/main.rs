//! `shepp-olkin`: verify single instances, run scans, estimate critical orders,
//! compute Hessians and check the functional lemma.
//!
//! Exit status: 0 when every margin holds, 1 when a margin fails (or a critical-order
//! search finds no sign change), 2 on parse or validation errors.

mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shepp_olkin::calculus::{
    entropy_hessian, entropy_second_derivative_analytic, path_entropy, AffinePath,
};
use shepp_olkin::explorer::{
    estimate_critical_q, evaluate_checker, expand_checkers, run_scan_collect, PathFamily, ScanConfig,
    SlopeDistribution, SCHEMA_VERSION,
};
use shepp_olkin::inequalities::{check_functional_lemma, compute_uk, LemmaInputs, LemmaOptions, XLogX};
use shepp_olkin::linalg::symmetric_eigenvalues;
use shepp_olkin::pmf::{compute_pmf, ParamVector};
use shepp_olkin::qentropy::{find_critical_q, CriticalProbe, EntropyKind, ProbeMethod};
use shepp_olkin::Error;

use report::{CheckEntry, HessianOutput, LemmaOutput, VerifyOutput};

/// Environment variable supplying the scan seed when neither a flag nor a config gives one.
const SEED_ENV: &str = "SHEPP_OLKIN_SEED";

#[derive(Parser)]
#[command(name = "shepp-olkin", version, about = "Poisson binomial entropy concavity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a checker suite at one point and direction.
    Verify(VerifyArgs),
    /// Seeded scan over many instances.
    Scan(ScanArgs),
    /// Estimate the order at which concavity breaks.
    CriticalQ(CriticalArgs),
    /// Hessian of the Shannon entropy over the parameters.
    Hessian(HessianArgs),
    /// Check the functional lemma for U(x) = x ln x.
    LemmaCheck(LemmaArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated parameters in [0, 1].
    #[arg(long, allow_hyphen_values = true)]
    p: List,
    /// Comma-separated slopes, one per parameter.
    #[arg(long, allow_hyphen_values = true)]
    slopes: List,
    /// Path time; the point checked is p + t·slopes.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t: f64,
    /// Suite aliases (shannon, renyi, tsallis) or checker ids, comma-separated.
    #[arg(long, default_value = "shannon")]
    suite: String,
    /// Entropy order for Rényi/Tsallis checkers.
    #[arg(long)]
    q: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ScanArgs {
    /// JSON (`.json`) or TOML (`.toml`) scan configuration; keys it sets override inline flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Refuse to combine --config with inline scan flags.
    #[arg(long)]
    strict: bool,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    /// Interior margin ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Checker ids or suite aliases, comma-separated.
    #[arg(long)]
    checks: Option<String>,
    #[arg(long)]
    q_grid: Option<List>,
    #[arg(long)]
    slope_distribution: Option<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    max_certificates: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Probe {
    /// Bisection on "a scan of the family finds a violation".
    Scan,
    /// Bisection on the analytic second derivative of the family.
    Analytic,
    /// Bisection on a centered-difference second derivative of the family.
    FiniteDifference,
    /// Bisection on 2 - 4q + 2^q (binomial2 with tsallis only).
    Threshold,
}

#[derive(Args)]
struct CriticalArgs {
    /// bernoulli, binomial2, binomial_n or random_affine.
    #[arg(long)]
    family: String,
    /// shannon, renyi or tsallis.
    #[arg(long)]
    kind: String,
    /// Bracket `lo,hi` for q.
    #[arg(long)]
    bracket: List,
    #[arg(long, value_enum, default_value_t = Probe::Scan)]
    probe: Probe,
    /// Grid size of the family scan.
    #[arg(long, default_value_t = 1001)]
    instances: usize,
    /// Smallest family parameter (and the Bernoulli probe point).
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct HessianArgs {
    #[arg(long)]
    p: List,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long = "A", allow_hyphen_values = true)]
    a: f64,
    #[arg(long = "B", allow_hyphen_values = true)]
    b: f64,
    #[arg(long = "C", allow_hyphen_values = true)]
    c: f64,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    gamma: f64,
    #[command(flatten)]
    out: OutputArgs,
}

/// Comma-separated decimal numbers.
#[derive(Debug, Clone)]
struct List(Vec<f64>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

/// How a command ended, mapped onto the exit status.
enum Failure {
    /// A margin failed or no critical order was found. Exit 1.
    Check(String),
    /// Bad input. Exit 2.
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoSignChange { .. } => Failure::Check(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

type CmdResult = Result<bool, Failure>;

fn emit(out: &OutputArgs, text: String) -> Result<(), Failure> {
    let text = if text.ends_with('\n') { text } else { text + "\n" };
    match &out.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let slopes = args.slopes.0.clone();
    let params = ParamVector::new(args.p.0.clone())?;
    let path = AffinePath::maximal(params, slopes.clone(), 0.0)?;
    let point = path.at(args.t)?;
    let checkers = expand_checkers(&args.suite.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>())?;
    if checkers.iter().any(|c| c.q_kind().is_some()) && args.q.is_none() {
        return Err(Failure::Invalid("renyi/tsallis checkers need --q".into()));
    }

    let mut checks = BTreeMap::new();
    for checker in checkers {
        let entry = match evaluate_checker(checker, point.as_slice(), &slopes, args.q) {
            Ok(Some(r)) => CheckEntry::Evaluated(r),
            Ok(None) => CheckEntry::NotApplicable,
            Err(e) => return Err(Failure::Invalid(format!("{}: {e}", checker.as_str()))),
        };
        checks.insert(checker.as_str().to_string(), entry);
    }
    let uk = if point.len() >= 2 { Some(compute_uk(&point, &slopes)?) } else { None };
    let report = VerifyOutput {
        schema_version: SCHEMA_VERSION,
        p: point.as_slice().to_vec(),
        slopes,
        t: args.t,
        q: args.q,
        entropy: path_entropy(&path, args.t)?,
        entropy_second_derivative: entropy_second_derivative_analytic(&path, args.t)?,
        pmf: compute_pmf(&point).into_vec(),
        passed: checks.values().all(CheckEntry::holds),
        checks,
        uk,
    };
    let text = match args.out.format {
        Format::Json => json(&report),
        Format::Csv => report.to_csv(),
        Format::Human => report.to_human(),
    };
    emit(&args.out, text)?;
    Ok(report.passed)
}

fn scan_config(args: &ScanArgs) -> Result<ScanConfig, Failure> {
    let inline = args.n_min.is_some()
        || args.n_max.is_some()
        || args.instances.is_some()
        || args.epsilon.is_some()
        || args.checks.is_some()
        || args.q_grid.is_some()
        || args.slope_distribution.is_some()
        || args.family.is_some()
        || args.max_certificates.is_some();
    if args.strict && inline && args.config.is_some() {
        return Err(Failure::Invalid("--strict forbids combining --config with inline scan flags".into()));
    }
    let mut c = ScanConfig::new(args.seed.unwrap_or(0));
    if let Some(v) = args.n_min {
        c.n_range.0 = v;
    }
    if let Some(v) = args.n_max {
        c.n_range.1 = v;
    }
    if let Some(v) = args.instances {
        c.instance_count = v;
    }
    if let Some(v) = args.epsilon {
        c.interior_margin = v;
    }
    if let Some(v) = &args.checks {
        c.inequality_set = v.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(v) = &args.q_grid {
        c.q_grid = Some(v.0.clone());
    }
    if let Some(v) = &args.slope_distribution {
        c.slope_distribution = SlopeDistribution::from_str(v).map_err(Failure::Invalid)?;
    }
    if let Some(v) = &args.family {
        c.family = PathFamily::from_str(v).map_err(Failure::Invalid)?;
    }
    if let Some(v) = args.max_certificates {
        c.max_certificates = v;
    }
    match &args.config {
        Some(path) => Ok(ScanConfig::load_over(path, &c)?),
        None => Ok(c),
    }
}

fn cmd_scan(args: ScanArgs) -> CmdResult {
    let config = scan_config(&args)?;
    let (report, rows) = run_scan_collect(&config)?;
    let text = match args.out.format {
        Format::Json => json(&report),
        Format::Csv => shepp_olkin::explorer::margins_to_csv(&rows),
        Format::Human => report::scan_human(&report),
    };
    emit(&args.out, text)?;
    Ok(report.violation_count == 0)
}

fn cmd_critical_q(args: CriticalArgs) -> CmdResult {
    let family = PathFamily::from_str(&args.family).map_err(Failure::Invalid)?;
    let kind = EntropyKind::from_str(&args.kind).map_err(Failure::Invalid)?;
    let [lo, hi] = args.bracket.0[..] else {
        return Err(Failure::Invalid("--bracket takes exactly two numbers lo,hi".into()));
    };
    let value = match args.probe {
        Probe::Scan => {
            let mut config = ScanConfig::new(args.seed);
            config.instance_count = args.instances;
            config.interior_margin = args.epsilon;
            serde_json::to_value(estimate_critical_q(&config, family, kind, (lo, hi))?)
        }
        probe => {
            let method = if probe == Probe::FiniteDifference {
                ProbeMethod::FiniteDifference
            } else {
                ProbeMethod::Analytic
            };
            let critical = match (family, kind, probe) {
                (PathFamily::Binomial2, EntropyKind::Tsallis, Probe::Threshold) => CriticalProbe::ThresholdPolynomial,
                (PathFamily::Binomial2, EntropyKind::Tsallis, _) => CriticalProbe::Binomial2Tsallis { method },
                (PathFamily::Bernoulli, EntropyKind::Renyi, Probe::Analytic | Probe::FiniteDifference) => {
                    CriticalProbe::BernoulliRenyi { p: args.epsilon, method }
                }
                _ => {
                    return Err(Failure::Invalid(format!(
                        "no direct probe for {} with {}; use --probe scan",
                        family.as_str(),
                        kind.as_str()
                    )))
                }
            };
            let result = find_critical_q(&critical, (lo, hi))?;
            serde_json::to_value(report::DirectCriticalOutput { schema_version: SCHEMA_VERSION, result })
        }
    }
    .expect("reports serialize");
    let text = match args.out.format {
        Format::Json => serde_json::to_string_pretty(&value).expect("value serializes"),
        Format::Csv => report::critical_csv(&value),
        Format::Human => report::critical_human(&value),
    };
    emit(&args.out, text)?;
    Ok(true)
}

fn cmd_hessian(args: HessianArgs) -> CmdResult {
    let params = ParamVector::new(args.p.0)?;
    let h = entropy_hessian(&params)?;
    let scale = h.matrix.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let tolerance = shepp_olkin::inequalities::Tolerance::DEFAULT.for_scale(scale);
    let out = HessianOutput {
        schema_version: SCHEMA_VERSION,
        p: params.as_slice().to_vec(),
        eigenvalues: symmetric_eigenvalues(&h.matrix),
        max_eigenvalue: h.max_eigenvalue,
        tolerance,
        negative_semidefinite: h.max_eigenvalue <= tolerance,
        matrix: h.matrix,
    };
    let text = match args.out.format {
        Format::Json => json(&out),
        Format::Csv => out.to_csv(),
        Format::Human => out.to_human(),
    };
    emit(&args.out, text)?;
    Ok(out.negative_semidefinite)
}

fn cmd_lemma(args: LemmaArgs) -> CmdResult {
    let inputs = LemmaInputs { a: args.a, b: args.b, c: args.c, alpha: args.alpha, beta: args.beta, gamma: args.gamma };
    let r = check_functional_lemma(&XLogX, &inputs, &LemmaOptions::default())?;
    let out = LemmaOutput {
        schema_version: SCHEMA_VERSION,
        inputs,
        margin: r.margin.worst_or_inf(),
        tolerance: r.margin.tolerance,
        holds: r.margin.holds,
        xi_second_min: r.xi_second_min,
        xi_second_argmin: r.xi_second_argmin,
    };
    let text = match args.out.format {
        Format::Json => json(&out),
        Format::Csv => out.to_csv(),
        Format::Human => out.to_human(),
    };
    emit(&args.out, text)?;
    Ok(out.holds)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Scan(a) => cmd_scan(a),
        Command::CriticalQ(a) => cmd_critical_q(a),
        Command::Hessian(a) => cmd_hessian(a),
        Command::LemmaCheck(a) => cmd_lemma(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
