use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gsp_transient::harness::{synthetic_stations, DEFAULT_BURN_IN};
use gsp_transient::io::commands::{cmd_build_graph, cmd_compare, cmd_run, cmd_theory, ExecOptions};
use gsp_transient::io::config::Overrides;
use gsp_transient::io::stations::write_stations_csv;
use gsp_transient::Error;

/// LMS/RLS estimation of bandlimited graph signals: simulation and transient theory.
#[derive(Parser)]
#[command(name = "gsp-transient", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Experiment configuration (flat JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; the manifest is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `iterations`.
    #[arg(long)]
    iterations: Option<usize>,
    /// Directory for cached graph eigenbases.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the k-NN graph of a station file and print a summary.
    BuildGraph {
        #[arg(long)]
        stations: PathBuf,
        #[arg(long, short)]
        k: usize,
        /// Writes nodes.csv, edges.csv and graph.json here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Monte Carlo simulation plus both theory curves.
    Run {
        #[command(flatten)]
        flags: RunFlags,
        /// Overrides `runs`.
        #[arg(long)]
        runs: Option<usize>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Theory curves only.
    Theory {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Tail deviation between the empirical and theory columns of a results CSV.
    Compare {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: f64,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a synthetic station file.
    Synth {
        #[arg(long, default_value_t = 299)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::BuildGraph {
            stations,
            k,
            out,
            cache_dir,
        } => {
            let opts = ExecOptions {
                threads: None,
                cache_dir,
            };
            let s = cmd_build_graph(&stations, k, out.as_deref(), &opts)?;
            println!(
                "N = {}, k = {}, edges = {}, degree min/mean/max = {}/{:.2}/{}, components = {}, lambda_2 = {:.6}",
                s.n, s.k, s.edges, s.min_degree, s.mean_degree, s.max_degree, s.components,
                s.algebraic_connectivity
            );
        }
        Command::Run {
            flags,
            runs,
            threads,
        } => {
            let overrides = Overrides {
                seed: flags.seed,
                runs,
                iterations: flags.iterations,
            };
            let opts = ExecOptions {
                threads,
                cache_dir: flags.cache_dir,
            };
            let res = cmd_run(&flags.config, overrides, &flags.out, &opts)?;
            let d = res.deviation;
            println!(
                "wrote {} and {}; tail (t >= {}) mean |dB gap|: literal {:.3}, exact {:.3}; exact tail z = {:.2}",
                res.csv.display(),
                res.manifest.display(),
                d.tail_start_t,
                d.paper.mean_abs_db,
                d.exact.mean_abs_db,
                d.exact.tail_z
            );
        }
        Command::Theory { flags } => {
            let overrides = Overrides {
                seed: flags.seed,
                runs: None,
                iterations: flags.iterations,
            };
            let opts = ExecOptions {
                threads: None,
                cache_dir: flags.cache_dir,
            };
            let out = cmd_theory(&flags.config, overrides, &flags.out, &opts)?;
            println!("wrote {}", out.display());
        }
        Command::Compare {
            results,
            burn_in,
            json,
        } => {
            let report = cmd_compare(&results, burn_in)?;
            print!("{}", report.to_text());
            if let Some(path) = json {
                serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &report)?;
            }
        }
        Command::Synth { nodes, seed, out } => {
            let table = synthetic_stations(nodes, seed)?;
            write_stations_csv(&table, BufWriter::new(File::create(&out)?))?;
            println!("wrote {} stations to {}", nodes, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
