use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eh_otafl::config::{parse_overrides, BoundConfig, RunConfig};
use eh_otafl::output;
use eh_otafl::trainer::Scenario;

#[derive(Parser)]
#[command(version, about = "Energy-harvesting over-the-air federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// key=value, repeatable; applied after the file
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its round CSV
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<Scenario>,
    },
    /// Run all five scenarios on the same federation
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Repeat the matrix for each value, e.g. `antennas=40,200,800`
        #[arg(long, value_name = "KEY=V1,V2,...")]
        vary: Option<String>,
    },
    /// Evaluate the convergence-bound curves
    Bound {
        #[command(flatten)]
        common: Common,
    },
}

fn run_config(c: &Common) -> eh_otafl::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&parse_overrides(&c.overrides)?)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.out_dir {
        cfg.out_dir = d.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> eh_otafl::Result<Vec<PathBuf>> {
    match cli.command {
        Command::Simulate { common, scenario } => {
            let mut cfg = run_config(&common)?;
            if let Some(s) = scenario {
                cfg.scenario = s;
            }
            Ok(vec![output::simulate(&cfg)?])
        }
        Command::Sweep { common, vary } => {
            let cfg = run_config(&common)?;
            let vary = vary
                .map(|v| {
                    let (k, vals) = v.split_once('=').ok_or_else(|| {
                        eh_otafl::Error::invalid("vary", "expected KEY=V1,V2,...")
                    })?;
                    Ok::<_, eh_otafl::Error>((k.to_string(), vals.split(',').map(str::to_string).collect::<Vec<_>>()))
                })
                .transpose()?;
            output::sweep(&cfg, vary.as_ref().map(|(k, v)| (k.as_str(), v.as_slice())))
        }
        Command::Bound { common } => {
            let mut cfg = match &common.config {
                Some(p) => BoundConfig::load(p)?,
                None => BoundConfig::default(),
            };
            cfg.apply_overrides(&parse_overrides(&common.overrides)?)?;
            if let Some(d) = &common.out_dir {
                cfg.out_dir = d.clone();
            }
            output::bound(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
