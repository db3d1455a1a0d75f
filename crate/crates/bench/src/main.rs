use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cmprisk::simgen::{generate, ScenarioSpec};
use cmprisk::{CsvSchema, Dataset};
use cmprisk_bench::{aggregate, load_results, run_external, run_grid, save_results, write_summary, GridConfig, Method, MethodOptions};

#[derive(Parser)]
#[command(name = "bench", version, about = "Competing-risk method benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation grid and write DIR/results.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Record per-task wall-clock seconds (makes output run-dependent).
        #[arg(long)]
        wall_clock: bool,
    },
    /// Average metrics of a results file per group.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated grouping columns.
        #[arg(long, default_value = "n,p,method")]
        by: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one method on a CSV dataset and write predictions and selection tables.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "time")]
        time_col: String,
        #[arg(long, default_value = "status")]
        status_col: String,
    },
    /// Write one simulated dataset as CSV.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { config, out, jobs, wall_clock } => {
            let grid = GridConfig::load(&config)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("results.csv");
            // Fail on an unwritable destination before any fitting.
            File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            log::info!("{} tasks on {jobs} worker(s)", grid.n_tasks());
            let rows = run_grid(&grid, jobs)?;
            save_results(&path, &rows, wall_clock)?;
            let failed = rows.iter().filter(|r| r.status == cmprisk_bench::Status::Failed).count();
            println!("wrote {} rows ({failed} failed) to {}", rows.len(), path.display());
        }
        Command::Aggregate { input, by, out } => {
            let rows = load_results(&input)?;
            let keys: Vec<&str> = by.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            let groups = aggregate(&rows, &keys)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_summary(BufWriter::new(file), &keys, &groups)?;
            println!("wrote {} groups to {}", groups.len(), out.display());
        }
        Command::Fit { data, method, out, seed, time_col, status_col } => {
            let schema = CsvSchema { time: time_col, status: status_col, ..CsvSchema::default() };
            let dataset = Dataset::load_csv(&data, &schema).with_context(|| format!("loading {}", data.display()))?;
            let report = run_external(&dataset, method, &out, &MethodOptions::default(), seed)?;
            for (name, effect) in &report.selected {
                println!("{name}\t{effect}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Simulate { n, p, seed, out } => {
            let dataset = generate(&ScenarioSpec::new(n, p, seed))?;
            dataset.save_csv(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} subjects to {}", dataset.n(), out.display());
        }
    }
    Ok(())
}
