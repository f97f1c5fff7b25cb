//! Command-line front end: loads instance files, runs the risk engine and
//! emits human-readable or byte-stable JSON reports.
//!
//! Exit codes: 0 success or property pass; 1 property fail (or arbitrage
//! found, fair measure absent, verification failure); 2 input error;
//! 3 numerical error.

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sysrisk::io::{load_instance, load_position, to_json_17, IoError};
use sysrisk::lp::LpError;
use sysrisk::model::RandomVector;
use sysrisk::risk::{
    check_assumption_a, compute_dual, compute_rho, compute_rho_gamma, compute_risk,
    detect_regulatory_arbitrage, find_fair_measure, verify_instance, ArbitrageReport,
    AssumptionAReport, ExtReal, Instance, RiskError, RiskStatus, Tolerances, VerifyReport,
};

/// Environment variable holding a default acceptance-tolerance override;
/// the --tol flag wins over it. Read once at startup.
const TOL_ENV: &str = "SYSRISK_TOL";

const DEFAULT_SEED: u64 = 42;
const FAIR_SAMPLES: usize = 200;

#[derive(Parser)]
#[command(
    name = "sysrisk",
    about = "Robust market-adjusted systemic risk measures on finite scenario spaces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Instance file (JSON).
    #[arg(long)]
    instance: String,
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Acceptance-tolerance override (also via SYSRISK_TOL).
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for randomized validation.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Capital requirement rho(X) of a position (default X = 0).
    Rho {
        #[command(flatten)]
        common: CommonArgs,
        /// Position file (JSON); defaults to the zero profile.
        #[arg(long)]
        x: Option<String>,
    },
    /// The second-aggregation variant rho_Gamma(X).
    RhoGamma {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        x: Option<String>,
    },
    /// Dual representation: maximizing measure vector, penalty and its
    /// decomposition.
    Dual {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        x: Option<String>,
    },
    /// The canonical threshold gamma* = rho(0).
    Gamma {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Regulatory-arbitrage check at a threshold (default gamma*).
    Arbitrage {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Fair measure extraction for a threshold (default gamma*).
    Fair {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Market-richness condition sweep over n = 1..=n_max.
    CheckA {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
    },
    /// Runs the invariant suite on the instance.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Rho { common, .. }
            | Command::RhoGamma { common, .. }
            | Command::Dual { common, .. }
            | Command::Gamma { common }
            | Command::Arbitrage { common, .. }
            | Command::Fair { common, .. }
            | Command::CheckA { common, .. }
            | Command::Verify { common } => common,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Lp(LpError::NumericalBreakdown(_))
            | RiskError::DualExtractionFailed(_)
            | RiskError::FairValidationFailed(_) => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Echo block attached to every report: the resolved threshold and the
/// market-richness status at that threshold.
#[derive(Serialize)]
struct InstanceEcho {
    gamma_star: ExtReal,
    assumption_a: Option<AssumptionEcho>,
}

#[derive(Serialize)]
struct AssumptionEcho {
    gamma: f64,
    checked_n_max: usize,
    holds: bool,
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    command: &'static str,
    instance: String,
    #[serde(flatten)]
    echo: InstanceEcho,
    result: T,
}

#[derive(Serialize)]
struct RhoResult {
    status: RiskStatus,
    value: Option<f64>,
    allocation: Option<Vec<f64>>,
    trade: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct DualReport {
    primal_value: f64,
    dual_value: f64,
    penalty: f64,
    acceptance_component: ExtReal,
    market_component: ExtReal,
    q: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct GammaResult {
    value: ExtReal,
}

#[derive(Serialize)]
struct FairResult {
    found: bool,
    gamma: f64,
    gamma_star: ExtReal,
    q: Option<Vec<Vec<f64>>>,
    samples: Option<usize>,
    seed: u64,
    worst_margin: Option<f64>,
}

fn read_file(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("failed to read {path}: {e}")))
}

fn load(common: &CommonArgs) -> Result<Instance, CliError> {
    let text = read_file(&common.instance)?;
    let mut inst = load_instance(&text)?;
    let env_tol = std::env::var(TOL_ENV).ok().and_then(|v| v.parse::<f64>().ok());
    if let Some(tol) = common.tol.or(env_tol) {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(CliError::Input(format!("tolerance must be positive, got {tol}")));
        }
        let mut t = Tolerances::default();
        t.acceptance = tol;
        inst = inst.with_tolerances(t);
    }
    Ok(inst)
}

fn position(inst: &Instance, x: &Option<String>) -> Result<RandomVector, CliError> {
    match x {
        None => Ok(inst.zero_position()),
        Some(path) => {
            let text = read_file(path)?;
            Ok(load_position(&text, inst)?)
        }
    }
}

/// Resolved threshold and richness status, echoed on every report.
fn echo(inst: &Instance) -> Result<InstanceEcho, CliError> {
    let gamma_star = compute_risk(inst, &inst.zero_position())?.ext_value();
    let assumption_a = match gamma_star {
        ExtReal::Finite(g) => {
            let report = check_assumption_a(inst, g, 10)?;
            Some(AssumptionEcho { gamma: g, checked_n_max: 10, holds: report.all_hold })
        }
        _ => None,
    };
    Ok(InstanceEcho { gamma_star, assumption_a })
}

fn fmt_vec(v: &[f64]) -> String {
    let inner: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", inner.join(", "))
}

fn print_echo(echo: &InstanceEcho) {
    println!("gamma_star: {}", echo.gamma_star);
    match &echo.assumption_a {
        Some(a) => println!(
            "assumption_a: {} for n <= {} at gamma = {}",
            if a.holds { "holds" } else { "FAILS" },
            a.checked_n_max,
            a.gamma
        ),
        None => println!("assumption_a: not applicable (gamma_star not finite)"),
    }
}

fn emit<T: Serialize>(report: &Report<T>, format: Format, text_body: impl FnOnce()) {
    match format {
        Format::Json => println!("{}", to_json_17(report)),
        Format::Text => {
            println!("command: {}", report.command);
            println!("instance: {}", report.instance);
            print_echo(&report.echo);
            text_body();
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let common = cli.command.common();
    let inst = load(common)?;
    let format = common.format;
    let instance_path = common.instance.clone();
    let seed = common.seed;

    match &cli.command {
        Command::Rho { x, .. } | Command::RhoGamma { x, .. } => {
            let is_gamma_variant = matches!(cli.command, Command::RhoGamma { .. });
            let pos = position(&inst, x)?;
            let rr = if is_gamma_variant {
                compute_rho_gamma(&inst, &pos)?
            } else {
                compute_rho(&inst, &pos)?
            };
            let result = RhoResult {
                status: rr.status,
                value: rr.value,
                allocation: rr.allocation.clone(),
                trade: rr.trade.clone(),
            };
            let report = Report {
                command: if is_gamma_variant { "rho-gamma" } else { "rho" },
                instance: instance_path,
                echo: echo(&inst)?,
                result,
            };
            emit(&report, format, || {
                println!("status: {:?}", report.result.status);
                if let Some(v) = report.result.value {
                    println!("value: {v}");
                }
                if let Some(m) = &report.result.allocation {
                    println!("allocation: {}", fmt_vec(m));
                }
                if let Some(h) = &report.result.trade {
                    println!("trade: {}", fmt_vec(h));
                }
            });
            Ok(ExitCode::SUCCESS)
        }
        Command::Dual { x, .. } => {
            let pos = position(&inst, x)?;
            let dual = match compute_dual(&inst, &pos) {
                Ok(d) => d,
                Err(RiskError::NotFinite(status)) => {
                    eprintln!("dual representation unavailable: rho is {status:?}");
                    return Ok(ExitCode::from(1));
                }
                Err(e) => return Err(e.into()),
            };
            let result = DualReport {
                primal_value: dual.primal_value,
                dual_value: dual.dual_value,
                penalty: dual.penalty,
                acceptance_component: dual.decomposition.acceptance_component,
                market_component: dual.decomposition.market_component,
                q: dual.q.weights().to_vec(),
            };
            let report =
                Report { command: "dual", instance: instance_path, echo: echo(&inst)?, result };
            emit(&report, format, || {
                println!("primal_value: {}", report.result.primal_value);
                println!("dual_value: {}", report.result.dual_value);
                println!("penalty: {}", report.result.penalty);
                println!(
                    "penalty_decomposition: acceptance {} + market {}",
                    report.result.acceptance_component, report.result.market_component
                );
                for (i, row) in report.result.q.iter().enumerate() {
                    println!("q[{i}]: {}", fmt_vec(row));
                }
            });
            Ok(ExitCode::SUCCESS)
        }
        Command::Gamma { .. } => {
            let echo_block = echo(&inst)?;
            let result = GammaResult { value: echo_block.gamma_star };
            let report =
                Report { command: "gamma", instance: instance_path, echo: echo_block, result };
            emit(&report, format, || {
                println!("value: {}", report.result.value);
            });
            Ok(ExitCode::SUCCESS)
        }
        Command::Arbitrage { gamma, .. } => {
            let echo_block = echo(&inst)?;
            // Default threshold: the canonical gamma*; in the unbounded
            // regime any finite threshold certifies, so fall back to 0.
            let gamma = match (gamma, echo_block.gamma_star) {
                (Some(g), _) => *g,
                (None, ExtReal::Finite(g)) => g,
                (None, _) => 0.0,
            };
            let arb: ArbitrageReport = detect_regulatory_arbitrage(&inst, gamma)?;
            let found = !arb.arbitrage_free;
            let report = Report {
                command: "arbitrage",
                instance: instance_path,
                echo: echo_block,
                result: arb,
            };
            emit(&report, format, || {
                println!("gamma: {}", report.result.gamma);
                println!("arbitrage_free: {}", report.result.arbitrage_free);
                if report.result.positive_gamma_star {
                    println!("warning: gamma_star is positive; the theory fixes gamma <= 0");
                }
                if let Some(cert) = &report.result.certificate {
                    println!("certificate.allocation: {}", fmt_vec(&cert.allocation));
                    println!("certificate.trade: {}", fmt_vec(&cert.trade));
                    println!("certificate.total_capital: {}", cert.total_capital);
                }
            });
            Ok(if found { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Fair { gamma, .. } => {
            let echo_block = echo(&inst)?;
            let gamma = match (gamma, echo_block.gamma_star) {
                (Some(g), _) => *g,
                (None, ExtReal::Finite(g)) => g,
                (None, _) => f64::NEG_INFINITY,
            };
            let fair = if gamma.is_finite() {
                find_fair_measure(&inst, gamma, seed, FAIR_SAMPLES)?
            } else {
                None
            };
            let found = fair.is_some();
            let result = match fair {
                Some(fm) => FairResult {
                    found: true,
                    gamma,
                    gamma_star: ExtReal::Finite(fm.gamma_star),
                    q: Some(fm.q.weights().to_vec()),
                    samples: Some(fm.samples),
                    seed,
                    worst_margin: Some(fm.worst_margin),
                },
                None => FairResult {
                    found: false,
                    gamma,
                    gamma_star: echo_block.gamma_star,
                    q: None,
                    samples: None,
                    seed,
                    worst_margin: None,
                },
            };
            let report =
                Report { command: "fair", instance: instance_path, echo: echo_block, result };
            emit(&report, format, || {
                println!("found: {}", report.result.found);
                println!("gamma: {}", report.result.gamma);
                if let Some(q) = &report.result.q {
                    for (i, row) in q.iter().enumerate() {
                        println!("q[{i}]: {}", fmt_vec(row));
                    }
                }
                if let Some(margin) = report.result.worst_margin {
                    println!(
                        "validation: {} samples (seed {}), worst margin {margin:.3e}",
                        report.result.samples.unwrap_or(0),
                        report.result.seed
                    );
                }
            });
            Ok(if found { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::CheckA { gamma, n_max, .. } => {
            let echo_block = echo(&inst)?;
            let gamma = match (gamma, echo_block.gamma_star) {
                (Some(g), _) => *g,
                (None, ExtReal::Finite(g)) => g,
                (None, _) => {
                    return Err(CliError::Input(
                        "gamma_star is not finite; pass --gamma explicitly".into(),
                    ))
                }
            };
            let result: AssumptionAReport = check_assumption_a(&inst, gamma, *n_max)?;
            let all_hold = result.all_hold;
            let report =
                Report { command: "check-a", instance: instance_path, echo: echo_block, result };
            emit(&report, format, || {
                println!("gamma: {}", report.result.gamma);
                println!("z: {}", report.result.z);
                for e in &report.result.entries {
                    println!(
                        "n = {}: buffer {} {}; implied bound {} <= {} {}",
                        e.n,
                        e.buffer,
                        if e.holds { "achievable" } else { "NOT achievable" },
                        e.implied_bound_lhs,
                        e.implied_bound_rhs,
                        if e.implied_bound_holds { "holds" } else { "FAILS" },
                    );
                }
                println!("all_hold: {}", report.result.all_hold);
            });
            Ok(if all_hold { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Verify { .. } => {
            let result: VerifyReport = verify_instance(&inst, seed)?;
            let passed = result.passed;
            let report =
                Report { command: "verify", instance: instance_path, echo: echo(&inst)?, result };
            emit(&report, format, || {
                for p in &report.result.properties {
                    println!(
                        "{}: {} ({})",
                        p.name,
                        if p.passed { "pass" } else { "FAIL" },
                        p.detail
                    );
                }
                println!("passed: {}", report.result.passed);
            });
            Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(3)
        }
    }
}
