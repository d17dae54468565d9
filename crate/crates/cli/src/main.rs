//! Command-line front end: roll trajectories, train policies, run the
//! experiment sweeps, and summarize results tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sustainet_core::baselines::Method;
use sustainet_core::env::trajectory::write_trajectory;
use sustainet_core::harness::report::summarize;
use sustainet_core::harness::{run_sweep, simulate, Experiment, ResultsTable, SweepMode};
use sustainet_core::morl::{save_policy, train, TrainConfig};
use sustainet_core::{Config, ModelParamsExt};

#[derive(Parser)]
#[command(name = "sustainet", version, about = "Carbon-aware network simulator and trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to a TOML configuration file; defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<Config> {
        match &self.config {
            Some(path) => Config::from_path(path)
                .with_context(|| format!("loading config {}", path.display())),
            None => Ok(Config::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Roll a fixed or random policy and dump the trajectory log.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Slots to simulate.
        #[arg(long, default_value_t = 200)]
        slots: usize,
        /// Draw actions uniformly instead of holding the box midpoint.
        #[arg(long)]
        random: bool,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train one method under one preference vector.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "proposed")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        /// Preference over sustainability, energy efficiency, delay.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        zeta: Option<Vec<f64>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run an experiment sweep (fig2: arrival rate, fig3: time, fig4: preference).
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "fig2")]
        mode: String,
        /// Method to include; repeat for several.
        #[arg(long = "method", default_values_t = vec!["proposed".to_string(), "ee_only".to_string()])]
        methods: Vec<String>,
        /// Seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Summarize a results table into text and JSON reports.
    Report {
        /// Results table produced by `sweep`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write_curves(path: &Path, outcome: &sustainet_core::morl::TrainOutcome) -> Result<()> {
    use std::fmt::Write as _;
    let mut text = String::from(
        "epoch,mean_S,energy_per_bit,mean_delay,viol_D1,viol_D3,lambda_1,lambda_2,lambda_3,lambda_4,zeta_1,zeta_2,zeta_3\n",
    );
    for row in &outcome.curves {
        write!(
            text,
            "{},{:e},{:e},{:e},{:e},{:e}",
            row.epoch, row.mean_s, row.energy_per_bit, row.mean_delay, row.viol_d1, row.viol_d3
        )?;
        for l in row.lambdas {
            write!(text, ",{l:e}")?;
        }
        for z in row.zeta {
            write!(text, ",{z:e}")?;
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, slots, random, out } => {
            let cfg = config.load()?;
            ensure_dir(&out)?;
            let measurements = simulate(&cfg, seed, slots, random)?;
            let path = out.join("trajectory.csv");
            write_trajectory(&path, &measurements)?;
            println!("wrote {} slots to {}", measurements.len(), path.display());
            Ok(())
        }
        Command::Train { config, method, seed, epochs, zeta, out } => {
            let cfg = config.load()?;
            ensure_dir(&out)?;
            let method = Method::parse(&method)?;
            let mut tcfg = TrainConfig { seed, ..Default::default() };
            if let Some(e) = epochs {
                tcfg.epochs = e;
            }
            let zeta = match zeta {
                Some(v) => [v[0], v[1], v[2]],
                None => [1.0 / 3.0; 3],
            };
            let model = cfg.build_model()?;
            let outcome = train(&model, &method, zeta, &tcfg)?;
            let curve_path = out.join(format!("curves_{}_{}.csv", method.name(), seed));
            write_curves(&curve_path, &outcome)?;
            let policy_path = out.join(format!("policy_{}_{}.txt", method.name(), seed));
            save_policy(&outcome.policy, &policy_path)?;
            for note in &outcome.notes {
                eprintln!("note: {note}");
            }
            println!(
                "trained {} for {} epochs; curves at {}",
                method.name(),
                outcome.curves.len(),
                curve_path.display()
            );
            Ok(())
        }
        Command::Sweep { config, mode, methods, seeds, epochs, out } => {
            let cfg = config.load()?;
            ensure_dir(&out)?;
            let mode = SweepMode::parse(&mode)?;
            let methods = methods
                .iter()
                .map(|m| Method::parse(m))
                .collect::<sustainet_core::Result<Vec<_>>>()?;
            let mut exp = Experiment::new(cfg, mode, methods, seeds);
            if let Some(e) = epochs {
                exp.train.epochs = e;
            }
            let table = run_sweep(&exp)?;
            for failure in &table.failures {
                eprintln!("failed: {failure}");
            }
            let path = out.join("results.csv");
            table.write_csv(&path)?;
            println!(
                "wrote {} rows (+{} aggregates) to {}",
                table.rows.len(),
                table.aggregates.len(),
                path.display()
            );
            Ok(())
        }
        Command::Report { input, out } => {
            ensure_dir(&out)?;
            let table = ResultsTable::read_csv(&input)?;
            let report = summarize(&table);
            let text = report.text();
            std::fs::write(out.join("report.txt"), &text)?;
            std::fs::write(out.join("report.json"), report.to_json())?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
