//! `pmlab`: command-line surface over the perfect-matching laboratory.
//!
//! Every run emits one JSON document carrying `{spec, version, seed}` plus
//! the results, so identical invocations produce byte-identical output.
//! Exit codes: 0 success, 2 suite failure, 3 infeasible regime, 1 any other
//! error.

mod commands;
mod rational;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "pmlab",
    version,
    about = "Perfect-matching statistics of random regular graphs: exact \
             counters, moment formula evaluators, uniform samplers, and the \
             exactly verifiable degree coupling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum PairTableMode {
    #[default]
    Exact,
    Asymptotic,
    Both,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum PairMode {
    Exact,
    #[default]
    Asymptotic,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Mode {
    #[default]
    Exact,
    Asymptotic,
}

#[derive(Subcommand)]
enum Command {
    /// Draw exactly uniform d-regular graphs as graph6 lines
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        streams: u64,
        /// Also write the samples as a .g6 sidecar next to the JSON
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Exact Y (perfect matchings), Z (complement PMs), X (triangles)
    Count {
        /// One graph6 string; otherwise graphs are read from --input
        #[arg(long, conflicts_with = "input")]
        graph: Option<String>,
        /// File of graph6 lines
        #[arg(long)]
        input: Option<std::path::PathBuf>,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Enumerate the complete labeled ensemble with cached Y/Z/X
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Write {out}.g6 and {out}.csv sidecars next to the JSON
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Overlap tables of perfect-matching pairs of K_n by shared edges
    Pairs {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t)]
        mode: PairTableMode,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Moment-formula report, with the exact ensemble oracle on request
    Moments {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: u64,
        /// Pair counts feeding the second-moment k-sum
        #[arg(long, value_enum, default_value_t)]
        pair_mode: PairMode,
        /// Enumerate the ensemble and attach exact moments (subject to caps)
        #[arg(long, default_value_t = false)]
        oracle: bool,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Build a (d -> d+1) coupling config; run steps, bounds, exact marginal
    Coupling {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value_t)]
        mode: Mode,
        /// Threshold knob for the exact config (rational, e.g. 1/10 or 0.1)
        #[arg(long, default_value = "1/10")]
        q: String,
        /// Concentration width for the asymptotic config
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long = "Cprime", default_value_t = 1.0)]
        c_prime: f64,
        /// Monte Carlo coupled steps to run (exact mode)
        #[arg(long, default_value_t = 0)]
        steps: u64,
        /// Compute the exact per-class marginal of G_{d+1}
        #[arg(long, default_value_t = false)]
        marginal: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        streams: u64,
        /// Write step outcomes as {out}.steps.csv next to the JSON
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Chained coupling across consecutive degrees d, d+1, ..., d+steps
    Chain {
        #[arg(long)]
        n: usize,
        /// Starting degree
        #[arg(long)]
        d: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value = "1/10")]
        q: String,
        /// Monte Carlo chain replicas
        #[arg(long, default_value_t = 10000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        streams: u64,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Run a named acceptance suite; nonzero exit on failure
    Verify {
        /// Suite name (see --list)
        #[arg(default_value = "all")]
        suite: String,
        /// List available suites and exit
        #[arg(long, default_value_t = false)]
        list: bool,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
