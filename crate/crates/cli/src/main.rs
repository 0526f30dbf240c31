//! `starreach` command-line front end.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array1;

use starreach::model_io::{parse_nnet, parse_problem, NnetMetadata, ProblemSpec};
use starreach::verify::{LabelConvention, RobustStatus, SafetyStatus};
use starreach::{
    check_local_robustness, check_safety, reach, Lp, Method, Network, ReachError, ReachOptions, RobustnessOptions,
    VerifyError,
};

use report::{CounterInputBox, InputDigest, Interval, Report};

const EXIT_USAGE: u8 = 4;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "starreach", version, about = "Star-set reachability and verification for piece-wise linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether any input of the problem reaches an unsafe region.
    Verify(ProblemArgs),
    /// Check local robustness of a labelled input.
    Robust(RobustArgs),
    /// Compute the reachable set and report output bounding boxes.
    Reach(ProblemArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exact,
    Overapprox,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::Exact,
            MethodArg::Overapprox => Method::Overapprox,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConventionArg {
    Max,
    Min,
}

#[derive(Args, Debug)]
struct Common {
    /// Network in NNET format.
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Wall-clock limit in seconds (default 48 hours).
    #[arg(long)]
    timeout: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    #[command(flatten)]
    common: Common,
    /// Problem description in JSON.
    #[arg(long)]
    problem: PathBuf,
}

#[derive(Args, Debug)]
struct RobustArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated input point.
    #[arg(long, allow_hyphen_values = true)]
    input: String,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    label: usize,
    /// Decision threshold for single-output networks.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Whether the label is the largest or the smallest output.
    #[arg(long, value_enum, default_value = "max")]
    convention: ConventionArg,
}

/// Why a run ended without a verdict.
enum Failure {
    Usage(anyhow::Error),
    Timeout(Report),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn read(path: &Path) -> Result<(Vec<u8>, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok((bytes, text))
}

fn load_network(path: &Path) -> Result<(Network, NnetMetadata, InputDigest)> {
    let (bytes, text) = read(path)?;
    let (net, meta) = parse_nnet(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok((net, meta, InputDigest::new("network", &path.display().to_string(), &bytes)))
}

fn load_problem(path: &Path, net: &Network) -> Result<(ProblemSpec, InputDigest)> {
    let (bytes, text) = read(path)?;
    let problem = parse_problem(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    problem.validate(net).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok((problem, InputDigest::new("problem", &path.display().to_string(), &bytes)))
}

fn reach_options(common: &Common, problem_timeout: Option<f64>) -> Result<ReachOptions> {
    let mut opts = ReachOptions {
        threads: common.threads.unwrap_or(0),
        ..Default::default()
    };
    if let Some(t) = common.timeout.or(problem_timeout) {
        if !(t >= 0.0) || !t.is_finite() {
            bail!("timeout must be a nonnegative number of seconds, got {t}");
        }
        opts.timeout = Some(Duration::from_secs_f64(t));
    }
    Ok(opts)
}

fn timeout_report(mut report: Report, err: ReachError) -> Failure {
    match err {
        ReachError::Timeout { stats, .. } => {
            report.verdict = "timeout".into();
            Failure::Timeout(report.with_stats(&stats))
        }
        other => Failure::Usage(other.into()),
    }
}

fn run_problem(args: &ProblemArgs, check: bool) -> Result<(Report, u8), Failure> {
    let (net, meta, net_digest) = load_network(&args.common.network)?;
    let (problem, problem_digest) = load_problem(&args.problem, &net)?;
    let method = args
        .common
        .method
        .map(Method::from)
        .or(problem.method)
        .unwrap_or(Method::Exact);
    let opts = reach_options(&args.common, problem.timeout_seconds)?;
    let inputs = problem.input_stars(Some(&meta)).map_err(anyhow::Error::from)?;
    let report = Report::new(if check { "verify" } else { "reach" }, method, vec![net_digest, problem_digest]);

    let started = Instant::now();
    let result = match reach(&net, &inputs, method, &opts) {
        Ok(r) => r,
        Err(e) => {
            let mut report = report;
            report.reach_time_seconds = started.elapsed().as_secs_f64();
            return Err(timeout_report(report, e));
        }
    };
    let mut report = report.with_stats(&result.stats);
    report.reach_time_seconds = started.elapsed().as_secs_f64();
    report.output_star_count = Some(result.output_stars.len());

    let lp = Lp::new(opts.lp);
    let started = Instant::now();
    if !check || problem.is_reach_only() {
        report.output_boxes = result
            .output_stars
            .iter()
            .map(|s| Ok(s.bounding_box(&lp)?.into_iter().map(Interval::from).collect()))
            .collect::<Result<_, starreach::StarError>>()
            .map_err(anyhow::Error::from)?;
        report.verdict = "reached".into();
        report.check_time_seconds = started.elapsed().as_secs_f64();
        report.lp_call_count += lp.calls();
        return Ok((report, 0));
    }

    let verdict = check_safety(&lp, &result, &problem.unsafe_regions).map_err(anyhow::Error::from)?;
    for c in &verdict.counter_input_stars {
        let bounds = c.star.bounding_box(&lp).map_err(anyhow::Error::from)?;
        report.counter_inputs.push(CounterInputBox {
            output_star: c.output_star,
            region: c.region,
            lower: bounds.iter().map(|b| b.lower).collect(),
            upper: bounds.iter().map(|b| b.upper).collect(),
        });
    }
    report.check_time_seconds = started.elapsed().as_secs_f64();
    report.lp_call_count += lp.calls();
    report.violated_regions = verdict.violated_regions;
    let code = match verdict.status {
        SafetyStatus::Safe => 0,
        SafetyStatus::Unsafe => 1,
        SafetyStatus::Unknown => 2,
    };
    report.verdict = serde_json::to_value(verdict.status)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    Ok((report, code))
}

fn parse_point(text: &str) -> Result<Array1<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("--input: `{t}` is not a number")))
        .collect::<Result<Vec<_>>>()
        .map(Array1::from)
}

fn run_robust(args: &RobustArgs) -> Result<(Report, u8), Failure> {
    let (net, _, net_digest) = load_network(&args.common.network)?;
    let x = parse_point(&args.input)?;
    let method = args.common.method.map(Method::from).unwrap_or(Method::Exact);
    let opts = RobustnessOptions {
        method,
        threshold: args.threshold,
        convention: match args.convention {
            ConventionArg::Max => LabelConvention::Max,
            ConventionArg::Min => LabelConvention::Min,
        },
        reach: reach_options(&args.common, None)?,
    };
    let mut report = Report::new("robust", method, vec![net_digest]);
    let started = Instant::now();
    let result = match check_local_robustness(&net, x.view(), args.delta, args.label, &opts) {
        Ok(r) => r,
        Err(VerifyError::Reach(e)) => {
            report.reach_time_seconds = started.elapsed().as_secs_f64();
            return Err(timeout_report(report, e));
        }
        Err(e) => return Err(Failure::Usage(e.into())),
    };
    report.reach_time_seconds = started.elapsed().as_secs_f64();
    let mut report = report.with_stats(&result.stats);
    report.output_star_count = Some(result.stars.len());
    report.star_labels = result.stars.iter().map(|s| s.label).collect();
    report.output_boxes = result
        .stars
        .iter()
        .map(|s| s.bounds.iter().copied().map(Interval::from).collect())
        .collect();
    let (verdict, code) = match result.status {
        RobustStatus::True => ("true", 0),
        RobustStatus::False => ("false", 1),
        RobustStatus::Inconclusive => ("inconclusive", 2),
    };
    report.verdict = verdict.into();
    Ok((report, code))
}

fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?,
        None => {
            use std::io::Write;
            // a closed pipe is not worth a failure exit
            let _ = writeln!(std::io::stdout().lock(), "{json}");
        }
    }
    eprintln!("{}", report.summary());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let (outcome, out) = match &cli.command {
        Command::Verify(a) => (run_problem(a, true), a.common.out.as_deref()),
        Command::Reach(a) => (run_problem(a, false), a.common.out.as_deref()),
        Command::Robust(a) => (run_robust(a), a.common.out.as_deref()),
    };
    let (report, code) = match outcome {
        Ok(done) => done,
        Err(Failure::Timeout(report)) => (report, EXIT_TIMEOUT),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Err(e) = emit(&report, out) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    ExitCode::from(code)
}
