//! THD and slot harmonic of the loaded machine, plus the cogging slot
//! harmonic, for growing dynamic eccentricity.
//!
//! cargo run --release --example eccentricity_sweep

use pmsm_uq::analysis::eccentricity_sweep;
use pmsm_uq::eccentricity::{measured_airgap, EccentricityState};
use pmsm_uq::machine::{Drive, MachineSpec};
use pmsm_uq::simulation::{PreparedMachine, RunOptions};
use pmsm_uq::spectrum::harmonics;
use pmsm_uq::torque::{Differencing, TorqueTrace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = MachineSpec::default();
    let machine = PreparedMachine::new(&spec, 0)?;
    let order = spec.cogging_order();
    let eps = [0.0, 0.1, 0.25, 0.5];
    let points = eccentricity_sweep(&machine, &eps, 0.0, None)?;
    println!("eps     min_gap_mm  tau0_Nm   THD_%    load_h{order}  cogging_h{order}");
    for p in &points {
        let ecc = EccentricityState::from_eccentricity(p.eccentricity, 0.0, spec.airgap())?;
        let m = machine.with_eccentricity(&ecc)?;
        let gap = (0..360)
            .map(|d| measured_airgap(m.mesh(), (d as f64).to_radians()))
            .fold(f64::INFINITY, f64::min);
        let cog = m.run_period(&Drive::zero(), &RunOptions::default())?;
        let trace = TorqueTrace::from_run(
            &cog,
            spec.winding.dc_phase_resistance,
            Differencing::Periodic,
        )?;
        let cogging = harmonics(&trace.torque)?.1[order - 1];
        println!(
            "{:<6.2}  {:>10.4}  {:>7.4}  {:>6.4}  {:>9.3e}  {:>11.3e}",
            p.eccentricity,
            1e3 * gap,
            p.mean_torque,
            100.0 * p.thd,
            p.slot_harmonic,
            cogging
        );
    }
    Ok(())
}
