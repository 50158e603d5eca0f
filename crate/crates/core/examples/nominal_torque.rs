//! Torque of the default machine over one revolution: energy-balance trace,
//! harmonic spectrum, THD and the Maxwell band torque for comparison.
//!
//! cargo run --release --example nominal_torque -- [refinement]

use pmsm_uq::analysis::analyze_period;
use pmsm_uq::machine::MachineSpec;
use pmsm_uq::simulation::{PreparedMachine, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let refinement = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(0);
    let spec = MachineSpec::default();
    let machine = PreparedMachine::new(&spec, refinement)?;
    println!(
        "{} poles, {} slots, {} mesh nodes, {} contour nodes, {} steps per revolution",
        spec.pole_count(),
        spec.slot_count(),
        machine.mesh().node_count(),
        machine.mesh().interface_count,
        machine.steps_per_revolution()
    );
    let options = RunOptions {
        keep_solutions: true,
        ..Default::default()
    };
    let a = analyze_period(&machine, &options, None)?;
    let trace = &a.trace;
    println!("mean torque (energy balance) {:.5} Nm", a.mean_torque);
    println!(
        "mean instantaneous torque    {:.5} Nm",
        trace.mean_instantaneous_torque()
    );
    println!(
        "Maxwell band torque          {:.5} Nm",
        a.maxwell_band_torque(&machine)?.unwrap()
    );
    println!(
        "mean P_e {:.3} W, mean dW/dt {:.2e} W",
        trace.mean_electrical_power(),
        trace.mean_energy_rate()
    );
    println!("THD {:.4} %", 100.0 * a.thd());
    let mut top: Vec<(usize, f64)> = a
        .spectrum
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, v)| (i + 1, *v))
        .collect();
    top.sort_by(|x, y| y.1.total_cmp(&x.1));
    println!("largest harmonics (order per revolution, Nm):");
    for (h, v) in top.iter().take(6) {
        println!("  {h:>4}  {v:.4e}");
    }
    Ok(())
}
