//! `latticebm`: check lattice operations, build couplings, run verifiers and
//! seeded random suites. Reports are JSON on stdout (or `--out`).
//!
//! Exit codes: 0 verified/passed, 1 violated/failed, 2 input error,
//! 3 inapplicable (`verify` only).

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use latticebm::instance::{CheckName, InstanceSpec, Overrides};
use latticebm::suite::{self, SuiteCheck, SuiteConfig};
use latticebm::{
    AdditiveTotalOrder, Coupling, Decomposition, ExponentQuadruple, LatticeOperation, OperationSpec, Outcome, ProbabilityMeasure,
    VerificationReport,
};

const EXIT_INPUT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "latticebm", version, about = "Exact verifiers for discrete Brunn-Minkowski and transport inequalities on Z^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the complement identity, translation equivariance and Knothe monotonicity on a box.
    CheckOp(CheckOpArgs),
    /// Build the monotone or Knothe coupling of two measure files.
    Couple(CoupleArgs),
    /// Run one verifier on an instance file.
    Verify(VerifyArgs),
    /// Run seeded random instances through the verifiers (line-delimited JSON, summary last).
    RandomSuite(SuiteArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; `-` or absent for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OpArgs {
    /// Operation as JSON, a bare name (`midpoint`, `meet_join`), or a path to a JSON file.
    #[arg(long)]
    op: Option<String>,
    /// Shorthand for `--op <name>`.
    #[arg(long, conflicts_with = "op")]
    kind: Option<String>,
    /// Dimension for operations that do not state one.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct ExponentArgs {
    #[arg(long, value_name = "P/Q")]
    alpha: Option<String>,
    #[arg(long, value_name = "P/Q")]
    beta: Option<String>,
    #[arg(long, value_name = "P/Q")]
    gamma: Option<String>,
    #[arg(long, value_name = "P/Q")]
    delta: Option<String>,
}

impl ExponentArgs {
    fn overrides(&self) -> [Option<String>; 4] {
        [self.alpha.clone(), self.beta.clone(), self.gamma.clone(), self.delta.clone()]
    }

    fn any(&self) -> bool {
        self.overrides().iter().any(Option::is_some)
    }
}

#[derive(Args)]
struct CheckOpArgs {
    #[command(flatten)]
    op: OpArgs,
    /// Half-width of the box `[-r, r]^n` that is scanned.
    #[arg(long, default_value_t = 3)]
    radius: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoupleMode {
    Monotone,
    Knothe,
}

#[derive(Args)]
struct CoupleArgs {
    /// First marginal (measure JSON file).
    #[arg(long)]
    mu: PathBuf,
    /// Second marginal (measure JSON file).
    #[arg(long)]
    nu: PathBuf,
    #[arg(long, value_enum, default_value = "monotone")]
    mode: CoupleMode,
    /// Order for `monotone` (JSON or file); standard lexicographic by default.
    #[arg(long)]
    order: Option<String>,
    /// Block decomposition for `knothe` (JSON or file); one coordinate per block by default.
    #[arg(long)]
    decomposition: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Instance JSON file.
    instance: PathBuf,
    /// One of dbm, set-bm, entropy, p-bound, pointwise, log-laplace.
    #[arg(long)]
    check: String,
    #[command(flatten)]
    op: OpArgs,
    #[command(flatten)]
    exponents: ExponentArgs,
    #[arg(long, env = "DT_TOLERANCE")]
    tolerance: Option<f64>,
    /// Box radius for the operation checks run by `dbm`.
    #[arg(long)]
    radius: Option<u32>,
    /// Seed for the log-Laplace competitors.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: u64,
    #[command(flatten)]
    op: OpArgs,
    /// Fixed exponents; unspecified ones are 1. Random valid exponents per instance if none is given.
    #[command(flatten)]
    exponents: ExponentArgs,
    #[arg(long, env = "DT_TOLERANCE", default_value_t = latticebm::verify::DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Box radius for the operation checks run by `dbm`.
    #[arg(long, default_value_t = 2)]
    radius: u32,
    /// Comma-separated: pointwise, p-bound, entropy, fiber, marginals, dbm, log-laplace.
    #[arg(long, default_value = "pointwise,p-bound,entropy")]
    checks: String,
    #[command(flatten)]
    output: OutputArgs,
}

/// An error that is reported with exit code 2.
struct InputError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CheckOp(a) => check_op(a),
        Command::Couple(a) => couple(a),
        Command::Verify(a) => verify(a),
        Command::RandomSuite(a) => random_suite(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT_ERROR)
        }
    }
}

fn open_output(out: &OutputArgs) -> Result<Box<dyn Write>> {
    Ok(match &out.out {
        Some(p) if p.as_os_str() != "-" => {
            Box::new(BufWriter::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?))
        }
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Inline JSON when the text starts with `{` or `[`, otherwise a file path.
fn json_or_file(text: &str) -> Result<String> {
    let t = text.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(text.to_string())
    } else {
        read(Path::new(text))
    }
}

fn operation_spec(args: &OpArgs) -> Result<Option<OperationSpec>> {
    let text = match (&args.op, &args.kind) {
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => return Ok(None),
    };
    let spec = match OperationSpec::parse(text) {
        Ok(s) => s,
        Err(parse_err) if Path::new(text).is_file() => {
            OperationSpec::parse(&read(Path::new(text))?).map_err(|e| anyhow!("{}: {e} (as inline text: {parse_err})", text))?
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Some(spec))
}

fn build_operation(args: &OpArgs) -> Result<LatticeOperation> {
    let spec = operation_spec(args)?.ok_or_else(|| anyhow!("an operation is required (--op or --kind)"))?;
    Ok(spec.build(args.dim)?)
}

fn outcome_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Verified => 0,
        Outcome::Violated => 1,
        Outcome::Inapplicable => 3,
    }
}

fn check_op(args: CheckOpArgs) -> Result<u8, InputError> {
    let op = build_operation(&args.op)?;
    let reports = op.check_all(args.radius);
    let mut report = match reports.iter().find(|r| !r.is_verified()) {
        None => VerificationReport::verified("operation"),
        Some(bad) => {
            let mut r = VerificationReport::verified("operation");
            r.outcome = Outcome::Violated;
            r.witness = bad.witness.clone();
            r.note = Some(format!("{} fails", bad.check));
            r
        }
    };
    report.subreports = reports;
    let code = if report.is_verified() { 0 } else { 1 };
    let mut out = open_output(&args.output)?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    Ok(code)
}

fn couple(args: CoupleArgs) -> Result<u8, InputError> {
    let mu: ProbabilityMeasure = serde_json::from_str(&read(&args.mu)?).with_context(|| format!("in {}", args.mu.display()))?;
    let nu: ProbabilityMeasure = serde_json::from_str(&read(&args.nu)?).with_context(|| format!("in {}", args.nu.display()))?;
    if mu.dim() != nu.dim() {
        return Err(anyhow!("measures have dimensions {} and {}", mu.dim(), nu.dim()).into());
    }
    let pi = match args.mode {
        CoupleMode::Monotone => {
            let order: AdditiveTotalOrder = match &args.order {
                Some(o) => serde_json::from_str(&json_or_file(o)?).context("in --order")?,
                None => AdditiveTotalOrder::lex(mu.dim()),
            };
            Coupling::monotone(&mu, &nu, &order)?
        }
        CoupleMode::Knothe => {
            let d: Decomposition = match &args.decomposition {
                Some(d) => serde_json::from_str(&json_or_file(d)?).context("in --decomposition")?,
                None => Decomposition::standard(mu.dim()),
            };
            Coupling::knothe(&mu, &nu, &d)?
        }
    };
    if !pi.has_exact_marginals() || pi.left() != &mu || pi.right() != &nu {
        return Err(anyhow!("internal error: coupling marginals are not exact").into());
    }
    let mut out = open_output(&args.output)?;
    writeln!(out, "{}", serde_json::to_string(&pi)?)?;
    out.flush()?;
    Ok(0)
}

fn verify(args: VerifyArgs) -> Result<u8, InputError> {
    let check: CheckName = args.check.parse()?;
    let spec = InstanceSpec::parse(&read(&args.instance)?).with_context(|| format!("in {}", args.instance.display()))?;
    let overrides = Overrides {
        exponents: args.exponents.overrides(),
        tolerance: args.tolerance,
        radius: args.radius,
        seed: args.seed,
        op: operation_spec(&args.op)?,
        dim: args.op.dim,
    };
    let report = spec.run(check, &overrides)?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    Ok(outcome_code(report.outcome))
}

fn random_suite(args: SuiteArgs) -> Result<u8, InputError> {
    let checks = SuiteCheck::parse_list(&args.checks)?;
    let spec = operation_spec(&args.op)?.unwrap_or(OperationSpec::Midpoint { dim: None });
    let op = spec.build(Some(args.op.dim.unwrap_or(1)))?;
    let dim = args.op.dim.unwrap_or(op.dim());
    let exponents = if args.exponents.any() {
        let [a, b, c, d] = args.exponents.overrides().map(|v| v.unwrap_or_else(|| "1".into()));
        Some(ExponentQuadruple::parse(&a, &b, &c, &d)?)
    } else {
        None
    };
    let config = SuiteConfig {
        seed: args.seed,
        instances: args.instances,
        dim,
        op,
        exponents,
        checks,
        tolerance: args.tolerance,
        radius: args.radius,
    };
    let mut out = open_output(&args.output)?;
    let mut write_error = None;
    let summary = suite::run_suite(&config, |r| {
        if write_error.is_none() {
            if let Err(e) = serde_json::to_string(r).map_err(io::Error::from).and_then(|s| writeln!(out, "{s}")) {
                write_error = Some(e);
            }
        }
    })?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    writeln!(out, "{}", serde_json::to_string(&summary)?)?;
    out.flush()?;
    Ok(if summary.all_passed() { 0 } else { 1 })
}
