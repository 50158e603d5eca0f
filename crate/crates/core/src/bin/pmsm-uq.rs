use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pmsm_uq::run::{run, ExecOptions, Mode, Overrides, RunConfig};

/// Torque harmonics and eccentricity UQ of a PM synchronous machine.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// nominal | sweep | uq-mc | uq-gpc | sensitivity | compare
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism). Results do not
    /// depend on this value.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse cached sample results of an earlier run with the same config.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    refinement: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        mode: cli.mode,
        seed: cli.seed,
        refinement: cli.refinement,
        output_dir: cli.out,
    };
    let exec = ExecOptions {
        jobs: cli.jobs,
        resume: cli.resume,
    };
    let result = RunConfig::from_file(&cli.config)
        .and_then(|c| c.resolve(&overrides))
        .and_then(|(config, out)| run(&config, &out, &exec).map(|r| (r, out)));
    match result {
        Ok((report, out)) => {
            println!("config_hash {}", report.config_hash);
            for f in &report.files {
                println!("wrote {}", out.join(f).display());
            }
            for r in &report.results {
                println!(
                    "{} {}: mean {:.6e} std {:.3e}",
                    r.method,
                    r.quantity,
                    r.mean,
                    r.std_dev()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
