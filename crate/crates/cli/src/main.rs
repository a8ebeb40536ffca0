#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use duolift_core::config::keys_help;

mod commands;
mod output;

/// Simulator and experiment harness for a dual-motor ceiling-lift actuator.
#[derive(Debug, Parser)]
#[command(name = "duolift", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write telemetry.csv and summary.json.
    #[command(after_help = keys_help())]
    Run {
        /// Scenario file (TOML). Defaults apply when omitted.
        scenario: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Analytic and simulated fall comparison over the reference rows.
    #[command(after_help = keys_help())]
    Falltable {
        /// Only rows with this load mass (kg).
        #[arg(long)]
        mass: Option<f64>,
        /// Only deceleration rows with this target (m/s²).
        #[arg(long)]
        ad: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Force tracking of the five assistance controllers on the course.
    #[command(after_help = keys_help())]
    Course {
        /// Desired unloading force (N).
        #[arg(long, default_value_t = duolift_core::experiments::course::DEFAULT_F_D)]
        f_desired: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Compare actuator architectures from a design catalog.
    #[command(after_help = keys_help())]
    Design {
        /// Catalog file (TOML). The bundled catalog is used when omitted.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit the EM2 friction law to measured samples (CSV: w2,f_d,tau_f).
    #[command(after_help = keys_help())]
    Identify {
        samples: PathBuf,
        /// tanh sharpness of the direction factor (s/rad).
        #[arg(long, default_value_t = 10.0)]
        sharpness: f64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Options shared by the commands that build a scenario.
#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Parameter file layered under the scenario.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Dotted key override, KEY=VALUE. Repeatable; later wins.
    #[arg(short = 'O', long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Random seed (overrides the scenario's).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the merged configuration as TOML and exit.
    #[arg(long)]
    pub print_effective_config: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Run { scenario, common } => commands::run(scenario.as_deref(), &common),
        Command::Falltable { mass, ad, common } => commands::falltable(mass, ad, &common),
        Command::Course { f_desired, common } => commands::course(f_desired, &common),
        Command::Design { catalog, out } => commands::design(catalog.as_deref(), &out),
        Command::Identify { samples, sharpness, out } => commands::identify(&samples, sharpness, &out),
    };
    match outcome {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::ExpectationFailed(why)) => {
            eprintln!("expectation failed: {why}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
