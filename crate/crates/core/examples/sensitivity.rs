//! First-order and total Sobol indices of mean torque and THD from a
//! pick-freeze design, next to an additive test function with known
//! indices.
//!
//! cargo run --release --example sensitivity -- [n_base]

use std::f64::consts::PI;

use pmsm_uq::machine::MachineSpec;
use pmsm_uq::simulation::PreparedMachine;
use pmsm_uq::uq::{scalar_simulator, sobol_sensitivity, MachineModel, RandomInputModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(16);
    let spec = MachineSpec::default();
    let inputs = RandomInputModel::with_default_sigma(spec.airgap())?;

    let sigma = inputs.sigma_r0;
    let additive = scalar_simulator("R0/sigma + theta0", move |s| s.r0 / sigma + s.theta0);
    let exact = 1.0 / (1.0 + PI * PI / 12.0);
    let s = sobol_sensitivity(&inputs, &additive, 4096, 1)?.results[0]
        .sensitivity
        .unwrap();
    println!(
        "additive: S_R0 {:.4} (exact {exact:.4}), S_theta0 {:.4} (exact {:.4})",
        s.first_order[0],
        s.first_order[1],
        1.0 - exact
    );

    let model = MachineModel::new(PreparedMachine::new(&spec, 0)?, inputs, None);
    let run = sobol_sensitivity(&inputs, &model, n, 2024)?;
    println!("machine, N_base = {n} ({} evaluations):", run.values.len());
    for r in &run.results {
        let s = r.sensitivity.unwrap();
        println!(
            "{:>5}: S_R0 {:.4}  S_theta0 {:.2e}  S_T,R0 {:.4}  S_T,theta0 {:.2e}",
            r.quantity, s.first_order[0], s.first_order[1], s.total[0], s.total[1]
        );
    }
    Ok(())
}
