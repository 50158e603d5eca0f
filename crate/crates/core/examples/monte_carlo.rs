//! Monte Carlo statistics of mean torque and THD under a random dynamic
//! eccentricity `R0 ~ N(0, sigma^2)`, `theta0 ~ U(0, pi)`.
//!
//! cargo run --release --example monte_carlo -- [samples] [seed]

use pmsm_uq::machine::MachineSpec;
use pmsm_uq::simulation::PreparedMachine;
use pmsm_uq::uq::{mc_estimate, MachineModel, RandomInputModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(40);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2024);
    let spec = MachineSpec::default();
    let inputs = RandomInputModel::with_default_sigma(spec.airgap())?;
    let model = MachineModel::new(PreparedMachine::new(&spec, 0)?, inputs, None);
    let run = mc_estimate(&inputs, &model, n, seed)?;
    println!(
        "sigma_R0 = {:.4e} m, N = {n}, seed = {seed}",
        inputs.sigma_r0
    );
    for r in &run.results {
        println!(
            "{:>5}: mean {:.8e}  std {:.3e}  eps_MC {:.3e}",
            r.quantity,
            r.mean,
            r.std_dev(),
            r.mc_error.unwrap()
        );
    }
    let rejected: usize = run.results.first().map_or(0, |r| r.rejected);
    println!("{} draws rejected by the displacement bound", rejected);
    Ok(())
}
