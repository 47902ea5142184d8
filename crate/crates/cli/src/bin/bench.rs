use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pdik::harness::{
    escape_mc, run_ablation, run_trial, AblationConfig, EscapeMcConfig, TargetGenerator, Variant,
};
use pdik_cli::{exit_code, read_model, trial_template, write_csv};

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Closed-loop ablation and escape-law experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run paired-seed trials for each variant and write CSV and markdown reports.
    Ablation {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Comma-separated variants, e.g. `global_sqp,dist_qp,par_dist:64:0.0005`.
        /// Empty runs nothing.
        #[arg(long, default_value = "")]
        variants: String,
        #[arg(long)]
        out: PathBuf,
        /// Trial setup TOML; defaults to the dual-arm desk setup.
        #[arg(long)]
        setup: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Run trials concurrently (timings are then measured under contention).
        #[arg(long)]
        parallel: bool,
    },
    /// Run one trial and print its metrics as CSV.
    Trial {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        method: String,
        /// `t,frame,x,y,z` target file; defaults to the near-boundary generator.
        #[arg(long)]
        replay: Option<PathBuf>,
        #[arg(long, default_value = "models/desk_dual_arm.model")]
        model: PathBuf,
        #[arg(long)]
        setup: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Monte Carlo of the escape probability 1 − (1 − p)^K.
    EscapeMc {
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,16,64")]
        k_list: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_variants(list: &str) -> anyhow::Result<Vec<Variant>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| Ok(s.parse::<Variant>()?))
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ablation {
            model,
            trials,
            variants,
            out,
            setup,
            first_seed,
            parallel,
        } => {
            let variants = parse_variants(&variants)?;
            let model = read_model(&model)?;
            let template = trial_template(&model, setup.as_deref())?;
            let config = AblationConfig {
                trials,
                first_seed,
                variants,
                template,
                parallel,
            };
            let report = run_ablation(&model, &config)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            report.write_metrics_csv(File::create(out.join("metrics.csv"))?)?;
            report.write_rows_csv(File::create(out.join("summary.csv"))?)?;
            let table = report.markdown();
            std::fs::write(out.join("table.md"), &table)?;
            print!("{table}");
        }
        Command::Trial {
            seed,
            method,
            replay,
            model,
            setup,
            horizon,
        } => {
            let variant: Variant = method.parse()?;
            let model = read_model(&model)?;
            let mut cfg = trial_template(&model, setup.as_deref())?;
            cfg.variant = variant;
            cfg.seed = seed;
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if let Some(path) = replay {
                cfg.generator = TargetGenerator::ReplayFile(path);
            }
            let metrics = run_trial(&model, &cfg)?;
            write_csv(io::stdout().lock(), &[metrics])?;
        }
        Command::EscapeMc {
            p,
            k_list,
            trials,
            seed,
        } => {
            let rows = escape_mc(&EscapeMcConfig {
                p,
                k_values: k_list,
                trials,
                seed,
            })?;
            let mut out = io::stdout().lock();
            writeln!(out, "| K | empirical | predicted | tolerance |")?;
            writeln!(out, "|---|---|---|---|")?;
            for r in rows {
                writeln!(
                    out,
                    "| {} | {:.4} | {:.4} | {:.4} |",
                    r.k, r.empirical, r.predicted, r.tolerance
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
