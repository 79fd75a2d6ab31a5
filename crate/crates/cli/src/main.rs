use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mbm_core::harness::config::{parse_config_with, validate, Overrides};
use mbm_core::harness::{run_experiment, write_fields, write_paths, ExperimentConfig, Report, Statistic};
use mbm_core::localtime::dirichlet_integral;
use mbm_core::regularity::v_constant;
use mbm_core::{Error, Representation, VGrouping};

/// Simulation and verification lab for multifractional Brownian motion and its local times.
#[derive(Parser)]
#[command(name = "mbm-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output` and MBM_LAB_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ensemble size; overrides `replicas`.
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write replica paths as CSV with JSON sidecars.
    Simulate(Common),
    /// Write replica local-time fields as CSV.
    Localtime {
        #[command(flatten)]
        common: Common,
        /// Keep every n-th time row.
        #[arg(long, default_value_t = 16)]
        stride: usize,
    },
    /// Run the configured statistics and write report.json.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run only this statistic (default parameters if the config lacks it).
        #[arg(long)]
        statistic: Option<String>,
    },
    /// Evaluate the LIL constant V_H or a Dirichlet integral.
    Constants {
        /// Hurst index for V_H.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value = "moving-average")]
        representation: Representation,
        #[arg(long, value_enum, default_value = "printed")]
        grouping: Grouping,
        /// Comma-separated exponents b_1..b_m of the Dirichlet integral.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dirichlet: Vec<f64>,
        /// Window length of the Dirichlet integral.
        #[arg(long, default_value_t = 1.0)]
        window: f64,
    },
    /// Re-render a stored report.
    Report {
        /// Directory holding report.json.
        #[arg(long)]
        out: PathBuf,
        /// Print the raw JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Grouping {
    Printed,
    SharedRoot,
}

fn load(c: &Common) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&c.config)?;
    parse_config_with(
        &text,
        &Overrides {
            seed: c.seed,
            replicas: c.replicas,
            output: c.out.clone(),
        },
    )
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            let dir = cfg.output_dir();
            let files = write_paths(&cfg, &dir)?;
            println!("wrote {} paths to {}", files.len(), dir.display());
        }
        Command::Localtime { common, stride } => {
            let cfg = load(&common)?;
            let dir = cfg.output_dir();
            let files = write_fields(&cfg, &dir, stride)?;
            println!("wrote {} local-time fields to {}", files.len(), dir.display());
        }
        Command::Verify { common, statistic } => {
            let mut cfg = load(&common)?;
            if let Some(name) = statistic {
                cfg.statistics.retain(|s| s.name() == name);
                if cfg.statistics.is_empty() {
                    let s = Statistic::default_for(&name)
                        .ok_or_else(|| Error::Domain(format!("unknown statistic '{name}'")))?;
                    cfg.statistics.push(s);
                }
                let v = validate(&cfg);
                if !v.is_empty() {
                    return Err(Error::Config(v));
                }
            }
            let report = run_experiment(&cfg)?;
            print!("{}", report.render());
            return Ok(report.exit_code as u8);
        }
        Command::Constants {
            h,
            representation,
            grouping,
            dirichlet,
            window,
        } => {
            if h.is_none() && dirichlet.is_empty() {
                return Err(Error::Domain("give --h and/or --dirichlet".into()));
            }
            if let Some(h) = h {
                let g = match grouping {
                    Grouping::Printed => VGrouping::Printed,
                    Grouping::SharedRoot => VGrouping::SharedRoot,
                };
                println!("v_constant({h}, {representation}) = {:.15}", v_constant(h, representation, g)?);
            }
            if !dirichlet.is_empty() {
                println!(
                    "dirichlet_integral({dirichlet:?}, {window}) = {:.15e}",
                    dirichlet_integral(&dirichlet, window)?
                );
            }
        }
        Command::Report { out, json } => {
            let r = Report::read(&out)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{}", r.render());
            }
            return Ok(r.exit_code as u8);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mbm-lab: {e}");
            ExitCode::from(1)
        }
    }
}
