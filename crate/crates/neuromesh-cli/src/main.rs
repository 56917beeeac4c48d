//! `neuromesh` — train, deploy, and break fault-tolerant per-neuron networks.
//!
//! Pipeline subcommands: `gen-data` → `train` → `deploy` → `simulate`, with
//! `sweep`/`experiment`/`report` for the analytic studies and
//! `node`/`coordinator`/`inject` for a live UDP cluster.

mod commands;
mod faultspec;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "neuromesh", version, about = "Fault-tolerant distributed MLP toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand accepts.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Seed override for anything random in this command.
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value` config file with dotted keys (train.eta=0.001).
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: std::path::PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic regression dataset (train.csv, test.csv).
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train a network and write params.txt plus training_log.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory holding train.csv/test.csv (default: generate from config).
        #[arg(long)]
        data: Option<std::path::PathBuf>,
        /// Disable dropout (control network).
        #[arg(long)]
        no_dropout: bool,
    },
    /// Write a per-neuron deployment bundle from trained parameters.
    Deploy {
        #[command(flatten)]
        common: Common,
        /// params.txt produced by `train`.
        #[arg(long)]
        params: std::path::PathBuf,
    },
    /// Run the deterministic simulated cluster over a workload.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Deployment bundle directory.
        #[arg(long)]
        bundle: std::path::PathBuf,
        /// Workload CSV (dataset format; the y column is used for reporting).
        #[arg(long)]
        workload: std::path::PathBuf,
        /// Fault schedule: `none` or `kill:1:3@t500,kill:coord:0@t800` (ms).
        #[arg(long, default_value = "none")]
        faults: String,
        /// Cap the number of workload inputs.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Degradation sweep over failure counts (writes degradation.csv).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// params.txt produced by `train`.
        #[arg(long)]
        params: std::path::PathBuf,
        /// Test dataset CSV.
        #[arg(long)]
        data: std::path::PathBuf,
        /// Failure counts, e.g. 0,1,2,3,4,5,6,7.
        #[arg(long, default_value = "0,1,2,3,4,5,6,7")]
        k: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Run a named experiment suite end to end.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// degradation | dropout-vs-plain | disconnect | recovery | all
        #[arg(long)]
        name: String,
    },
    /// Render the CSVs in a directory into report.md.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory containing CSV files (default: the --out directory).
        #[arg(long)]
        input: Option<std::path::PathBuf>,
    },
    /// Run one neuron node over UDP (blocks).
    Node {
        #[command(flatten)]
        common: Common,
        /// Cluster endpoint file.
        #[arg(long)]
        cluster: std::path::PathBuf,
        /// Deployment bundle directory.
        #[arg(long)]
        bundle: std::path::PathBuf,
        /// Node id as layer:neuron, e.g. 1:3.
        #[arg(long)]
        id: String,
        /// Exit after this many seconds.
        #[arg(long)]
        run_for: Option<f64>,
    },
    /// Run a coordinator over UDP; primaries drive the workload.
    Coordinator {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cluster: std::path::PathBuf,
        /// Coordinator index from the cluster file.
        #[arg(long, default_value_t = 0)]
        id: u8,
        /// Workload CSV (dataset format).
        #[arg(long)]
        workload: std::path::PathBuf,
        /// Cap the number of workload inputs.
        #[arg(long)]
        limit: Option<usize>,
        /// Exit after this many seconds even if the workload is unfinished.
        #[arg(long)]
        run_for: Option<f64>,
    },
    /// Send a FAULT_INJECT frame to a live cluster member.
    Inject {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cluster: std::path::PathBuf,
        /// Target: `1:3` for a node or `coord:0` for a coordinator.
        #[arg(long)]
        target: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData { common } => commands::gen_data(&common),
        Command::Train {
            common,
            data,
            no_dropout,
        } => commands::train(&common, data.as_deref(), no_dropout),
        Command::Deploy { common, params } => commands::deploy(&common, &params),
        Command::Simulate {
            common,
            bundle,
            workload,
            faults,
            limit,
        } => commands::simulate(&common, &bundle, &workload, &faults, limit),
        Command::Sweep {
            common,
            params,
            data,
            k,
            trials,
        } => commands::sweep(&common, &params, &data, &k, trials),
        Command::Experiment { common, name } => commands::experiment(&common, &name),
        Command::Report { common, input } => commands::report(&common, input.as_deref()),
        Command::Node {
            common,
            cluster,
            bundle,
            id,
            run_for,
        } => commands::node(&common, &cluster, &bundle, &id, run_for),
        Command::Coordinator {
            common,
            cluster,
            id,
            workload,
            limit,
            run_for,
        } => commands::coordinator(&common, &cluster, id, &workload, limit, run_for),
        Command::Inject {
            common,
            cluster,
            target,
        } => commands::inject(&common, &cluster, &target),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("neuromesh: {err:#}");
            ExitCode::FAILURE
        }
    }
}

pub(crate) use Common as CommonArgs;
