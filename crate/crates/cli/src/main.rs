use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod load;

/// Hybrid CSP toolkit: parse, simulate, discretize, and verify HCSP models.
#[derive(Debug, Parser)]
#[command(name = "hcsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a model, print it back with diagnostics.
    Parse {
        #[command(flatten)]
        model: ModelArgs,
        /// Write the syntax tree as JSON.
        #[arg(long)]
        emit_json: Option<PathBuf>,
    },
    /// Follow one execution path and print a `time,variable,value` CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Delay budget per step, in seconds.
        #[arg(long, default_value_t = 0.05)]
        d: f64,
        /// Stop after this much simulated time.
        #[arg(long, default_value_t = 100.0)]
        until: f64,
        #[arg(long, env = "HCSP_STATE_CAP", default_value_t = hcsp::semantics::DEFAULT_STATE_CAP)]
        state_cap: usize,
        #[arg(long)]
        emit_csv: Option<PathBuf>,
    },
    /// Replace every ODE by an Euler loop and print the resulting model.
    Discretize {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        precision: Precision,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide (h, ε)-approximate bisimilarity of a model and its
    /// discretization, or of two models.
    Bisim {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        precision: Precision,
        #[command(flatten)]
        explore: ExploreArgs,
        /// Compare against this model instead of the discretization.
        #[arg(long)]
        other: Option<String>,
        /// Write verdict, statistics and relation as JSON.
        #[arg(long)]
        emit_json: Option<PathBuf>,
    },
    /// Reachable interval box of the discretized model, plain and widened by ε.
    Reach {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        precision: Precision,
        #[command(flatten)]
        explore: ExploreArgs,
        /// Explore the model itself instead of its discretization.
        #[arg(long)]
        direct: bool,
        #[arg(long)]
        emit_json: Option<PathBuf>,
        /// Write `time,variable,value` samples of the reachable states.
        #[arg(long)]
        emit_csv: Option<PathBuf>,
    },
    /// Reach plus a safety verdict against a safe box.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        precision: Precision,
        #[command(flatten)]
        explore: ExploreArgs,
        /// Safe interval per variable, e.g. `d=3.3:6.6`.
        #[arg(long, required = true, value_delimiter = ',')]
        safe: Vec<String>,
        #[arg(long)]
        emit_json: Option<PathBuf>,
        #[arg(long)]
        emit_csv: Option<PathBuf>,
    },
    /// Check ε-robust safety of guards and ODE escapes.
    Robust {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        eps: f64,
        /// Window for an escaping ODE to clear its boundary, in seconds.
        #[arg(long)]
        delta: f64,
        /// Delay budget per transition.
        #[arg(long, default_value_t = 0.1)]
        d: f64,
        /// Simulated-time bound of the exploration.
        #[arg(long)]
        until: Option<f64>,
        #[arg(long, env = "HCSP_STATE_CAP", default_value_t = hcsp::semantics::DEFAULT_STATE_CAP)]
        state_cap: usize,
        #[arg(long)]
        emit_json: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// Model file (`.hcsp`) or a file holding a bare process term;
    /// `@watertank` names the bundled case study.
    model: String,
    /// Sets the `horizon` repetition bound to N (and `periods` to 2N).
    #[arg(long)]
    horizon: Option<u32>,
    /// Initial values overriding the model's, e.g. `x=1,y=0`.
    #[arg(long, value_delimiter = ',')]
    init: Vec<String>,
    /// Input values for a channel without a partner, e.g. `ch=1:2:3`.
    #[arg(long)]
    menu: Vec<String>,
}

#[derive(Debug, Clone, Args)]
struct Precision {
    /// Euler step in seconds; chosen from the error bound when absent.
    #[arg(long)]
    h: Option<f64>,
    /// Value precision ε.
    #[arg(long)]
    eps: f64,
    /// Equilibrium times, e.g. `fill=95,drain=8`; others are estimated.
    #[arg(long, value_delimiter = ',')]
    tmap: Vec<String>,
    /// Print the error budget and the step-size inequality per ODE.
    #[arg(long)]
    explain_step: bool,
}

#[derive(Debug, Clone, Args)]
struct ExploreArgs {
    /// Delay budget per transition; defaults to h.
    #[arg(long)]
    d: Option<f64>,
    #[arg(long, env = "HCSP_STATE_CAP", default_value_t = hcsp::semantics::DEFAULT_STATE_CAP)]
    state_cap: usize,
    /// Observed variables, e.g. `d,v`; defaults to every non-readiness variable.
    #[arg(long, value_delimiter = ',')]
    observe: Vec<String>,
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Success,
    /// A negative verdict: not bisimilar, not proven safe, not robust.
    Negative,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
