use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdik::Error;
use pdik_cli::{exit_code, read_model, run_retarget, write_csv, RunConfig};

#[derive(Parser)]
#[command(
    name = "retarget",
    about = "Retarget a keypoint trajectory onto a robot model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter, scale and track a keypoint CSV; writes one metrics row per frame.
    Run {
        #[arg(long)]
        model: PathBuf,
        /// `t,body_id,point_id,x,y,z,confidence` keypoint file.
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            model,
            traj,
            config,
            out,
        } => {
            let model = read_model(&model)?;
            let cfg = RunConfig::load(&config)?;
            let traj = File::open(&traj)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", traj.display())))?;
            let rows = run_retarget(&model, &cfg, traj)?;
            write_csv(File::create(&out)?, &rows)?;
            let last = rows.last();
            println!(
                "{} frames, final max error {:.4} m",
                rows.len(),
                last.map_or(f64::NAN, |r| r.max_error)
            );
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
