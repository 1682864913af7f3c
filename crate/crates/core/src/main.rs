//! Command-line front end: loads a model spec, dispatches one subcommand,
//! prints a deterministic report, and signals the outcome through the exit
//! code.
//!
//! Exit codes: 0 success (certificate Unique, all slacks within tolerance,
//! decay bound holds); 1 unreadable or invalid input; 2 certificate
//! Indeterminate or a decay run on an uncertified model; 3 inadmissible
//! norms; 4 state-space cap exceeded; 5 a verified inequality failed at
//! runtime (membership violation, slack below tolerance, falsified
//! contraction, or a decay bound that does not hold).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gibbscert::config::ModelSpec;
use gibbscert::coupling::{iterate, CouplingTable};
use gibbscert::criterion::{certify, UniquenessCertificate, Verdict};
use gibbscert::error::EngineError;
use gibbscert::oracle::{decay_experiment, exact_gibbs, h_moment};
use gibbscert::report::{
    render_certificate, render_decay, render_json, render_membership, render_trajectory,
    ReportHeader,
};
use gibbscert::spin::verify_membership;

#[derive(Parser)]
#[command(
    name = "gibbscert",
    version,
    about = "Certify and exactly verify a contraction-based uniqueness criterion for Gibbs fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the uniqueness certificate for a model spec.
    Certify(CommonArgs),
    /// Couple the exact measure with itself and run chromatic sweeps,
    /// reporting the functional trajectory as CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of full sweeps to run.
        #[arg(long, default_value_t = 10)]
        sweeps: usize,
    },
    /// Compare the exact covariance of two single-site observables against
    /// the certified exponential bound.
    Decay {
        #[command(flatten)]
        common: CommonArgs,
        /// Site of the first observable.
        #[arg(long)]
        l1: String,
        /// Site of the second observable.
        #[arg(long)]
        l2: String,
        /// Per-symbol values of the first observable, comma separated.
        /// Defaults to the symbols read as numbers, or to the indicator of
        /// the first symbol when they do not parse.
        #[arg(long, allow_hyphen_values = true)]
        f: Option<String>,
        /// Per-symbol values of the second observable, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        g: Option<String>,
    },
    /// Check the sensitivity and moment-growth bounds by exhaustive
    /// enumeration of boundary configurations.
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Model spec file (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Override the spec's cutoff K.
    #[arg(long)]
    k: Option<f64>,
    /// Override the spec's slack tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
}

/// A finished report plus the exit code it decides.
type Outcome = Result<(String, u8), (String, u8)>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, outcome) = match &cli.command {
        Command::Certify(common) => (common, cmd_certify(common)),
        Command::Sweep { common, sweeps } => (common, cmd_sweep(common, *sweeps)),
        Command::Decay {
            common,
            l1,
            l2,
            f,
            g,
        } => (
            common,
            cmd_decay(common, l1, l2, f.as_deref(), g.as_deref()),
        ),
        Command::Verify(common) => (common, cmd_verify(common)),
    };
    match outcome {
        Ok((report, code)) => {
            if let Some(path) = &common.out {
                if let Err(e) = std::fs::write(path, report) {
                    eprintln!("error: cannot write '{}': {e}", path.display());
                    return ExitCode::from(1);
                }
            } else {
                print!("{report}");
            }
            ExitCode::from(code)
        }
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load_spec(common: &CommonArgs) -> Result<ModelSpec, (String, u8)> {
    ModelSpec::load(&common.spec).map_err(|e| (e.to_string(), 1))
}

fn header(common: &CommonArgs, spec: &ModelSpec, command: &str) -> ReportHeader {
    ReportHeader {
        command: command.to_owned(),
        spec: common.spec.display().to_string(),
        tol_exact: spec.tol_exact,
        tol_slack: common.tol.unwrap_or(spec.tol_slack),
        cap: spec.cap,
    }
}

fn engine_exit(err: &EngineError) -> u8 {
    match err {
        EngineError::CapExceeded { .. } => 4,
        EngineError::NotCertified { .. } => 2,
        EngineError::ContractionFalsified { .. } | EngineError::DominationFalsified { .. } => 5,
        _ => 1,
    }
}

/// The h-moment entering the prefactor: the spec's override when present,
/// otherwise measured on the exact Gibbs measure.
fn effective_mu_h(spec: &ModelSpec) -> Result<f64, (String, u8)> {
    if let Some(mu_h) = spec.mu_h_override {
        return Ok(mu_h);
    }
    let mu = exact_gibbs(&spec.model, &spec.graph).map_err(|e| (e.to_string(), engine_exit(&e)))?;
    Ok(h_moment(&mu, &spec.model))
}

fn run_certificate(
    common: &CommonArgs,
    spec: &ModelSpec,
) -> Result<UniquenessCertificate, (String, u8)> {
    let k = common.k.unwrap_or(spec.k);
    let mu_h = effective_mu_h(spec)?;
    certify(&spec.params, &spec.graph, k, mu_h).map_err(|e| (e.to_string(), 1))
}

fn cmd_certify(common: &CommonArgs) -> Outcome {
    let spec = load_spec(common)?;
    let cert = run_certificate(common, &spec)?;
    let h = header(common, &spec, "certify");
    let report = if common.json {
        render_json(&h, &cert)
    } else {
        render_certificate(&h, &cert)
    };
    let code = match cert.verdict {
        Verdict::Unique => 0,
        Verdict::Indeterminate => 2,
        Verdict::Inadmissible => 3,
    };
    Ok((report, code))
}

fn cmd_sweep(common: &CommonArgs, sweeps: usize) -> Outcome {
    let spec = load_spec(common)?;
    let k = common.k.unwrap_or(spec.k);
    let tol = common.tol.unwrap_or(spec.tol_slack);
    let cert = run_certificate(common, &spec)?;
    let Some(m) = cert.m else {
        return Err((
            format!(
                "sweep needs admissible norms; verdict was {} (kappa_bar = {}, c_bar = {})",
                cert.verdict, cert.kappa_bar, cert.c_bar
            ),
            3,
        ));
    };
    let mu = exact_gibbs(&spec.model, &spec.graph).map_err(|e| (e.to_string(), engine_exit(&e)))?;
    let table = CouplingTable::product(*mu.space(), mu.weights(), mu.weights(), spec.cap)
        .map_err(|e| (e.to_string(), engine_exit(&e)))?;
    let outcome = iterate(
        table,
        &spec.model,
        &spec.graph,
        &spec.partition,
        &spec.params,
        k,
        &m,
        spec.tol_exact,
        sweeps,
    )
    .map_err(|e| (e.to_string(), engine_exit(&e)))?;

    let h = header(common, &spec, "sweep");
    let report = if common.json {
        render_json(&h, &outcome.rows)
    } else {
        render_trajectory(&h, &outcome.rows)
    };
    let worst = outcome
        .rows
        .iter()
        .filter_map(|row| row.min_slack)
        .fold(f64::INFINITY, f64::min);
    Ok((report, if worst < -tol { 5 } else { 0 }))
}

/// Per-symbol observable values: an explicit comma-separated list, or the
/// symbols themselves when they all read as numbers, or the indicator of
/// the first symbol.
fn observable_values(
    arg: Option<&str>,
    name: &str,
    spec: &ModelSpec,
) -> Result<Vec<f64>, (String, u8)> {
    let m = spec.model.symbol_count();
    match arg {
        Some(text) => {
            let values: Result<Vec<f64>, _> =
                text.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let values = values.map_err(|e| (format!("--{name}: {e}"), 1))?;
            if values.len() != m {
                return Err((
                    format!(
                        "--{name} needs {m} values, one per symbol; got {}",
                        values.len()
                    ),
                    1,
                ));
            }
            Ok(values)
        }
        None => {
            let parsed: Result<Vec<f64>, _> = spec
                .model
                .alphabet()
                .iter()
                .map(|s| s.parse::<f64>())
                .collect();
            Ok(parsed.unwrap_or_else(|_| {
                let mut one_hot = vec![0.0; m];
                one_hot[0] = 1.0;
                one_hot
            }))
        }
    }
}

fn cmd_decay(common: &CommonArgs, l1: &str, l2: &str, f: Option<&str>, g: Option<&str>) -> Outcome {
    let spec = load_spec(common)?;
    let k = common.k.unwrap_or(spec.k);
    let tol = common.tol.unwrap_or(spec.tol_slack);
    let f_values = observable_values(f, "f", &spec)?;
    let g_values = observable_values(g, "g", &spec)?;
    let report = decay_experiment(
        &spec.model,
        &spec.graph,
        &spec.params,
        k,
        l1,
        l2,
        &f_values,
        &g_values,
        spec.mu_h_override,
        spec.cap,
    )
    .map_err(|e| (e.to_string(), engine_exit(&e)))?;

    let h = header(common, &spec, "decay");
    let rendered = if common.json {
        render_json(&h, &report)
    } else {
        render_decay(&h, &report)
    };
    let pass = report.bound_holds
        && report.phi_slack_worst >= -tol
        && report.domination_slack_worst.is_none_or(|s| s >= -tol);
    Ok((rendered, if pass { 0 } else { 5 }))
}

fn cmd_verify(common: &CommonArgs) -> Outcome {
    let spec = load_spec(common)?;
    let k = common.k.unwrap_or(spec.k);
    let report = verify_membership(&spec.model, &spec.graph, k, &spec.params);
    let h = header(common, &spec, "verify");
    let rendered = if common.json {
        render_json(&h, &report)
    } else {
        render_membership(&h, &report)
    };
    Ok((rendered, if report.pass { 0 } else { 5 }))
}
