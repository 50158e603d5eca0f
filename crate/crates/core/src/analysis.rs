//! Steady-state period analysis and eccentricity sweeps.

use rayon::prelude::*;

use crate::eccentricity::EccentricityState;
use crate::error::Result;
use crate::simulation::{PeriodRun, PreparedMachine, RunOptions};
use crate::spectrum::{spectrum_and_thd, Spectrum};
use crate::torque::{band_torque, Differencing, TorqueTrace};

/// Torque trace and spectrum of one period.
#[derive(Debug, Clone)]
pub struct PeriodAnalysis {
    pub run: PeriodRun,
    pub trace: TorqueTrace,
    pub spectrum: Spectrum,
    /// Energy-balance mean torque.
    pub mean_torque: f64,
}

impl PeriodAnalysis {
    pub fn thd(&self) -> f64 {
        self.spectrum.thd
    }

    /// Period mean of the band-averaged Maxwell stress torque; needs a run
    /// with kept solutions.
    pub fn maxwell_band_torque(&self, machine: &PreparedMachine) -> Result<Option<f64>> {
        if self.run.solutions.is_empty() {
            return Ok(None);
        }
        let l = machine.spec().geometry.axial_length;
        let sum = self
            .run
            .solutions
            .iter()
            .map(|s| band_torque(machine.mesh(), s, l))
            .sum::<Result<f64>>()?;
        Ok(Some(sum / self.run.solutions.len() as f64))
    }
}

/// Runs the rated drive over one period and analyses the torque.
pub fn analyze_period(
    machine: &PreparedMachine,
    options: &RunOptions,
    harmonic_count: Option<usize>,
) -> Result<PeriodAnalysis> {
    let run = machine.run_period(&machine.drive(), options)?;
    let trace = TorqueTrace::from_run(
        &run,
        machine.spec().winding.dc_phase_resistance,
        Differencing::Periodic,
    )?;
    let spectrum = spectrum_and_thd(&trace.torque, harmonic_count)?;
    let mean_torque = trace.mean_torque()?;
    Ok(PeriodAnalysis {
        run,
        trace,
        spectrum,
        mean_torque,
    })
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub eccentricity: f64,
    pub mean_torque: f64,
    pub thd: f64,
    /// Amplitude of the slot harmonic (order = slot count).
    pub slot_harmonic: f64,
    pub spectrum: Spectrum,
}

/// THD and slot harmonic for each relative eccentricity, rotor displaced in
/// direction `direction`. Points run in parallel on the current rayon pool.
pub fn eccentricity_sweep(
    machine: &PreparedMachine,
    eccentricities: &[f64],
    direction: f64,
    harmonic_count: Option<usize>,
) -> Result<Vec<SweepPoint>> {
    let gap = machine.spec().airgap();
    let slots = machine.spec().slot_count();
    eccentricities
        .par_iter()
        .map(|&eps| {
            let analysis = if eps == 0.0 {
                analyze_period(machine, &RunOptions::default(), harmonic_count)?
            } else {
                let ecc = EccentricityState::from_eccentricity(eps, direction, gap)?;
                analyze_period(
                    &machine.with_eccentricity(&ecc)?,
                    &RunOptions::default(),
                    harmonic_count,
                )?
            };
            Ok(SweepPoint {
                eccentricity: eps,
                mean_torque: analysis.mean_torque,
                thd: analysis.thd(),
                slot_harmonic: analysis.spectrum.amplitude(slots),
                spectrum: analysis.spectrum,
            })
        })
        .collect()
}
