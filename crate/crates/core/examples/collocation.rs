//! Mean and variance by collocation on a Gauss-Hermite x Gauss-Legendre
//! tensor grid, compared with a small Monte Carlo run.
//!
//! cargo run --release --example collocation -- [nodes_per_dim] [mc_samples]

use pmsm_uq::machine::MachineSpec;
use pmsm_uq::simulation::PreparedMachine;
use pmsm_uq::uq::{
    collocation_grid, compare_methods, gpc_estimate, mc_estimate, MachineModel, RandomInputModel,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let nodes: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let samples: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let spec = MachineSpec::default();
    let inputs = RandomInputModel::with_default_sigma(spec.airgap())?;
    let model = MachineModel::new(PreparedMachine::new(&spec, 0)?, inputs, None);

    println!("grid nodes (R0 / sigma, theta0, weight):");
    for (s, w) in collocation_grid(&inputs, nodes)? {
        println!(
            "  {:+.4}  {:.4}  {:.5}",
            s.r0 / inputs.sigma_r0,
            s.theta0,
            w
        );
    }
    let gpc = gpc_estimate(&inputs, &model, nodes)?;
    let mc = mc_estimate(&inputs, &model, samples, 7)?;
    for (g, m) in gpc.results.iter().zip(&mc.results) {
        let c = compare_methods(m, g, 3.0)?;
        println!(
            "{:>5}: gPC {:.8e} ({:.3e})  MC {:.8e} ({:.3e})  |diff| {:.2e} vs eps_MC {:.2e} -> {}",
            g.quantity,
            g.mean,
            g.std_dev(),
            m.mean,
            m.std_dev(),
            c.mean_difference.abs(),
            c.mc_error,
            if c.means_agree { "agree" } else { "disagree" }
        );
    }
    Ok(())
}
