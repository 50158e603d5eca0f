//! Library equivalent of the command-line front end: resolves a run config
//! and writes the CSV artifacts of one mode.
//!
//! cargo run --release --example batch_run -- configs/nominal.toml [out_dir]

use pmsm_uq::run::{run, ExecOptions, Overrides, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| "configs/nominal.toml".into());
    let overrides = Overrides {
        output_dir: args.next().map(Into::into),
        ..Default::default()
    };
    let (resolved, out) = RunConfig::from_file(&config)?.resolve(&overrides)?;
    println!("{}", resolved.canonical_toml());
    let report = run(&resolved, &out, &ExecOptions::default())?;
    println!("config hash {}", report.config_hash);
    for f in &report.files {
        println!("  {}", out.join(f).display());
    }
    Ok(())
}
