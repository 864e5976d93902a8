//! `dyadrob` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on
//! numerical failure (including a Monte Carlo cell in which every
//! replication failed).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use dyadrob_core::ingest::{dump_network, fit_report, load_network, write_report, FeatureSpec, ReportOptions};
use dyadrob_core::mc::{emit_tables, read_summary_json, render_report, write_summary_json};
use dyadrob_core::robust::{critical_value, CvMode};
use dyadrob_core::{run_mc, simulate_network, Error, McConfig, Result, SimulationDesign};

#[derive(Debug, Parser)]
#[command(name = "dyadrob", version, about = "Robust estimation for dyadic bipartite networks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Worker threads for Monte Carlo runs (overrides the config file).
    #[arg(long, global = true, env = "DYADROB_THREADS")]
    threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one network and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Load a network from CSV and write estimation reports.
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a Monte Carlo experiment and write its tables.
    Mc {
        #[arg(long)]
        config: PathBuf,
        /// Override the replication count of the config.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Print the bias-aware critical value for `t = bias / sd`.
    Cv {
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Use `t + z_{1-α}` instead of the folded-normal quantile.
        #[arg(long)]
        literal: bool,
    },
    /// Render a Monte Carlo summary as text tables.
    Report {
        /// Summary JSON written by `mc`.
        #[arg(long)]
        summary: PathBuf,
        /// Also write the CSV tables into the output directory.
        #[arg(long)]
        csv: bool,
    },
}

/// Input of the `fit` subcommand. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitConfig {
    nodes_a: PathBuf,
    nodes_b: PathBuf,
    edges: PathBuf,
    features: Vec<FeatureSpec>,
    report: ReportOptions,
    #[serde(default = "default_prefix")]
    prefix: String,
}

fn default_prefix() -> String {
    "report".into()
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Returns `Ok(false)` when the run finished but some Monte Carlo cell failed.
fn run(cli: Cli) -> Result<bool> {
    let out = &cli.global.output_dir;
    match cli.command {
        Command::Simulate { config } => {
            let d: SimulationDesign = read_config(&config)?;
            let net = simulate_network(&d)?;
            let files = dump_network(&net, out)?;
            log::info!(
                "wrote {} agents, {} projects, {} links to {}",
                net.n_agents(),
                net.n_projects(),
                net.adjacency().iter().filter(|&&y| y == 1).count(),
                files.edges.display()
            );
        }
        Command::Fit { config } => {
            let cfg: FitConfig = read_config(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let net = load_network(
                &resolve(base, &cfg.nodes_a),
                &resolve(base, &cfg.nodes_b),
                &resolve(base, &cfg.edges),
                &cfg.features,
            )?;
            let tables = fit_report(&net, &cfg.report)?;
            let standardized: Vec<String> = cfg
                .features
                .iter()
                .filter(|f| f.standardize)
                .map(|f| f.name.clone())
                .collect();
            for f in write_report(&tables, out, &cfg.prefix, &cfg.report, &standardized)? {
                println!("{}", f.display());
            }
        }
        Command::Mc { config, replications } => {
            let mut cfg: McConfig = read_config(&config)?;
            if let Some(t) = cli.global.threads {
                cfg.threads = Some(t);
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            let summary = run_mc(&cfg)?;
            create_dir(out)?;
            for f in emit_tables(&summary, out)? {
                println!("{}", f.display());
            }
            let json = out.join(format!("{}_summary.json", cfg.name));
            write_summary_json(&summary, &json)?;
            println!("{}", json.display());
            if summary.any_cell_failed() {
                log::error!("at least one cell had no successful replication");
                return Ok(false);
            }
        }
        Command::Cv { t, alpha, literal } => {
            let mode = if literal { CvMode::Literal } else { CvMode::Folded };
            println!("{:.6}", critical_value(t, alpha, mode)?);
        }
        Command::Report { summary, csv } => {
            let s = read_summary_json(&summary)?;
            print!("{}", render_report(&s));
            if csv {
                create_dir(out)?;
                emit_tables(&s, out)?;
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.global.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
