//! Command-line front end. Reports go to stdout as JSON, diagnostics to
//! stderr.
//!
//! Exit codes: 0 success, 1 analytic negative (invalid network, not
//! stabilizable, drift failure), 2 input error, 3 simulation budget exceeded.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analysis::{analyze_with, AnalysisError, AnalysisReport, Verdict};
use crate::error::{OracleError, SimError};
use crate::lyapunov::{certify_drift, DriftMode, LyapunovData};
use crate::network::{
    induce_pure_network, parse_network, parse_scheduler, uniformize, validate, Network,
    ParsedNetwork, StaticScheduler,
};
use crate::oracle::{auto_bound, solve_at, SolveMode, SHELL_TARGET};
use crate::scalar::{Ratio, Scalar};
use crate::sim::{run_cycles, write_csv, SchedulerPolicy, SimConfig};
use crate::traffic::solve_traffic_reachable;
use crate::traffic_lp::{build_lp, solve_lp, synthesize_scheduler};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "branchq",
    version,
    about = "Stability analysis for controlled branching queueing networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a network file against every definitional constraint.
    Validate(NetworkArgs),
    /// Decide stabilizability, synthesize a scheduler and certify it.
    Analyze {
        #[command(flatten)]
        input: NetworkArgs,
        #[arg(long, value_enum, default_value_t = Mode::Rational)]
        mode: Mode,
        /// Check drift only on the regions where each linear piece is the maximum.
        #[arg(long)]
        exact_regions: bool,
    },
    /// Simulate regeneration cycles under a scheduler.
    Simulate {
        #[command(flatten)]
        input: NetworkArgs,
        /// `synth` for the LP scheduler, or a scheduler JSON file.
        #[arg(long, default_value = "synth")]
        scheduler: String,
        #[arg(long, default_value_t = 10_000)]
        cycles: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        #[arg(long, default_value_t = 30)]
        batches: usize,
        /// Simulated time allowed per replica.
        #[arg(long, default_value_t = 1e7)]
        time_budget: f64,
        /// Directory for trace.csv, occupancy.csv and tail.csv.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Certify negative drift of the piecewise-linear Lyapunov function.
    DriftCheck {
        #[command(flatten)]
        input: NetworkArgs,
        #[arg(long, default_value = "synth")]
        scheduler: String,
        #[arg(long, value_enum, default_value_t = Mode::Rational)]
        mode: Mode,
        #[arg(long)]
        exact_regions: bool,
    },
    /// Stationary distribution of the chain truncated to `‖x‖ ≤ B`.
    Oracle {
        #[command(flatten)]
        input: NetworkArgs,
        #[arg(long, default_value = "synth")]
        scheduler: String,
        /// A bound `B`, or `auto` for the smallest bound with small shell mass.
        #[arg(long, default_value = "auto")]
        bound: String,
        #[arg(long, value_enum, default_value_t = Solver::Auto)]
        solver: Solver,
        /// Shell-mass target of `--bound auto`.
        #[arg(long, default_value_t = SHELL_TARGET)]
        target: f64,
        #[arg(long, default_value_t = 512)]
        max_bound: u32,
    },
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Network JSON file.
    pub path: PathBuf,
    /// Allow uniformization to raise K from 0 to 1 for self-loops.
    #[arg(long)]
    pub raise_k: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Rational,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Auto,
    Exact,
    Float,
}

/// A failure that ends a command with an exit code and a message.
struct Failure {
    code: u8,
    message: String,
    report: Option<Value>,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
            report: None,
        }
    }

    fn negative(message: impl ToString, report: Option<Value>) -> Self {
        Self {
            code: EXIT_NEGATIVE,
            message: message.to_string(),
            report,
        }
    }
}

/// Runs a parsed command line; returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Validate(input) => cmd_validate(&input),
        Command::Analyze {
            input,
            mode,
            exact_regions,
        } => cmd_analyze(&input, mode, drift_mode(exact_regions)),
        Command::Simulate {
            input,
            scheduler,
            cycles,
            seed,
            replicas,
            batches,
            time_budget,
            csv,
        } => {
            let cfg = SimConfig {
                seed,
                cycles,
                time_budget,
                replicas,
                batches,
                ..SimConfig::default()
            };
            cmd_simulate(&input, &scheduler, &cfg, csv.as_deref())
        }
        Command::DriftCheck {
            input,
            scheduler,
            mode,
            exact_regions,
        } => cmd_drift_check(&input, &scheduler, mode, drift_mode(exact_regions)),
        Command::Oracle {
            input,
            scheduler,
            bound,
            solver,
            target,
            max_bound,
        } => cmd_oracle(&input, &scheduler, &bound, solver, target, max_bound),
    };
    let (code, report, message) = match result {
        Ok((code, report)) => (code, Some(report), None),
        Err(f) => (f.code, f.report, Some(f.message)),
    };
    if let Some(report) = report {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        let _ = writeln!(out, "{text}");
    }
    if let Some(message) = message {
        let _ = writeln!(err, "error: {message}");
    }
    code
}

fn drift_mode(exact_regions: bool) -> DriftMode {
    if exact_regions {
        DriftMode::ExactRegions
    } else {
        DriftMode::Superset
    }
}

fn load(input: &NetworkArgs) -> Result<Network, Failure> {
    let text = std::fs::read_to_string(&input.path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", input.path.display())))?;
    let parsed = parse_network(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", input.path.display())))?;
    match parsed {
        ParsedNetwork::Plain(net) => Ok(net),
        ParsedNetwork::Rated(rated) => {
            uniformize(&rated, input.raise_k).map_err(|e| Failure::negative(e, None))
        }
    }
}

fn load_valid(input: &NetworkArgs) -> Result<Network, Failure> {
    let net = load(input)?;
    let report = validate(&net);
    if report.is_ok() {
        Ok(net)
    } else {
        Err(Failure::negative(
            "network is invalid",
            Some(validation_json(&report)),
        ))
    }
}

fn validation_json(report: &crate::network::ValidationReport) -> Value {
    json!({"ok": report.is_ok(), "violations": report.violations})
}

fn scheduler_for(net: &Network, source: &str) -> Result<StaticScheduler, Failure> {
    if source == "synth" {
        let sol = solve_lp(&build_lp::<Ratio>(net)).map_err(|e| Failure::negative(e, None))?;
        return Ok(synthesize_scheduler(net, &sol));
    }
    let text = std::fs::read_to_string(source)
        .map_err(|e| Failure::input(format!("cannot read {source}: {e}")))?;
    let sched =
        parse_scheduler(&text, net).map_err(|e| Failure::input(format!("{source}: {e}")))?;
    sched
        .check(net)
        .map_err(|e| Failure::input(format!("{source}: {e}")))?;
    Ok(sched)
}

fn cmd_validate(input: &NetworkArgs) -> Result<(u8, Value), Failure> {
    let net = load(input)?;
    let report = validate(&net);
    if report.is_ok() {
        Ok((EXIT_OK, validation_json(&report)))
    } else {
        let message = report
            .violations
            .iter()
            .map(|v| v.message.clone())
            .collect::<Vec<_>>()
            .join("; ");
        Err(Failure::negative(message, Some(validation_json(&report))))
    }
}

fn analysis_outcome<S: Scalar>(net: &Network, mode: DriftMode) -> Result<(u8, Value), Failure> {
    match analyze_with::<S>(net, mode) {
        Ok(report) => {
            let code = if report.verdict == Verdict::Stabilizable {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            };
            Ok((
                code,
                tagged(&report, if S::EXACT { "rational" } else { "float" }),
            ))
        }
        Err(AnalysisError::Invalid(v)) => Err(Failure::negative(
            "network is invalid",
            Some(validation_json(&v)),
        )),
        Err(e) => Err(Failure::negative(e, None)),
    }
}

fn tagged<S: Scalar>(report: &AnalysisReport<S>, mode: &str) -> Value {
    let mut v = report.to_json();
    v["mode"] = json!(mode);
    v
}

fn cmd_analyze(input: &NetworkArgs, mode: Mode, drift: DriftMode) -> Result<(u8, Value), Failure> {
    let net = load(input)?;
    match mode {
        Mode::Rational => analysis_outcome::<Ratio>(&net, drift),
        Mode::Float => analysis_outcome::<f64>(&net, drift),
    }
}

fn cmd_simulate(
    input: &NetworkArgs,
    scheduler: &str,
    cfg: &SimConfig,
    csv: Option<&Path>,
) -> Result<(u8, Value), Failure> {
    let net = load_valid(input)?;
    let sched = scheduler_for(&net, scheduler)?;
    match run_cycles(&net, &SchedulerPolicy::Static(sched), cfg) {
        Ok(report) => {
            if let Some(dir) = csv {
                write_csv(&report, net.n, dir).map_err(|e| {
                    Failure::input(format!("cannot write CSV to {}: {e}", dir.display()))
                })?;
            }
            let value: Value =
                serde_json::from_str(&report.to_json_string()).expect("report is JSON");
            Ok((EXIT_OK, value))
        }
        Err(
            ref e @ SimError::BudgetExceededBeforeFirstReturn {
                time_budget,
                completed_cycles,
                final_total,
                ref trace,
            },
        ) => {
            if let Some(dir) = csv {
                write_trace_csv(trace, dir).map_err(|err| {
                    Failure::input(format!("cannot write CSV to {}: {err}", dir.display()))
                })?;
            }
            Err(Failure {
                code: EXIT_BUDGET,
                message: e.to_string(),
                report: Some(json!({
                    "error": "BudgetExceededBeforeFirstReturn",
                    "time_budget": time_budget,
                    "completed_cycles": completed_cycles,
                    "final_total": final_total,
                    "trace": trace,
                })),
            })
        }
        Err(e) => Err(Failure::input(e)),
    }
}

fn write_trace_csv(trace: &[(f64, u64)], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = String::from("time,total\n");
    for (t, x) in trace {
        text.push_str(&format!("{t},{x}\n"));
    }
    std::fs::write(dir.join("trace.csv"), text)
}

fn drift_outcome<S: Scalar>(
    net: &Network,
    sched: &StaticScheduler,
    mode: DriftMode,
) -> Result<(u8, Value), Failure> {
    let induced = induce_pure_network(net, sched).map_err(Failure::input)?;
    let traffic = solve_traffic_reachable::<S>(&induced).map_err(|e| {
        Failure::negative(&e, Some(json!({"passed": false, "error": e.to_string()})))
    })?;
    let ld = LyapunovData::new(traffic.traffic);
    match certify_drift(&ld, mode) {
        Ok(cert) => Ok((EXIT_OK, cert.to_json())),
        Err(e) => Err(Failure::negative(
            &e,
            Some(json!({"passed": false, "mode": mode.name(), "error": e.to_string()})),
        )),
    }
}

fn cmd_drift_check(
    input: &NetworkArgs,
    scheduler: &str,
    mode: Mode,
    drift: DriftMode,
) -> Result<(u8, Value), Failure> {
    let net = load_valid(input)?;
    let sched = scheduler_for(&net, scheduler)?;
    match mode {
        Mode::Rational => drift_outcome::<Ratio>(&net, &sched, drift),
        Mode::Float => drift_outcome::<f64>(&net, &sched, drift),
    }
}

fn cmd_oracle(
    input: &NetworkArgs,
    scheduler: &str,
    bound: &str,
    solver: Solver,
    target: f64,
    max_bound: u32,
) -> Result<(u8, Value), Failure> {
    let net = load_valid(input)?;
    let sched = scheduler_for(&net, scheduler)?;
    let mode = match solver {
        Solver::Auto => SolveMode::Auto,
        Solver::Exact => SolveMode::Exact,
        Solver::Float => SolveMode::Float,
    };
    let result = if bound == "auto" {
        auto_bound(&net, &sched, target, max_bound, mode)
    } else {
        let b: u32 = bound.parse().map_err(|_| {
            Failure::input(format!(
                "--bound expects an integer or `auto`, got {bound:?}"
            ))
        })?;
        solve_at(&net, &sched, b, mode)
    };
    match result {
        Ok(sol) => Ok((EXIT_OK, sol.to_json())),
        Err(e @ OracleError::ShellMassNotReached { .. }) => Err(Failure::negative(e, None)),
        Err(e) => Err(Failure::input(e)),
    }
}
