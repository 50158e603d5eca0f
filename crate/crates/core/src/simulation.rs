//! Time stepping of the coupled machine model.
//!
//! The rotor turns by three contour segments per step, so the time step is
//! `dt = 3 (2 pi / M) / w_m`. Every step is an independent magnetostatic
//! solve; there is no start-up transient, and a run over exactly one period
//! is already in steady state.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::assembly::{assemble_rotor, assemble_stator, DomainSystem, WindingMatrix};
use crate::coupling::{build_projectors, CoupledSolver, FieldSolution, NODES_PER_STEP};
use crate::eccentricity::{apply_eccentricity, EccentricityState};
use crate::error::{Error, Result};
use crate::machine::{Drive, MachineSpec, PHASES};
use crate::mesh::{build_mesh, CoupledMesh};

/// Length of the simulated window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PeriodKind {
    /// One mechanical revolution, `M / 3` steps. Required under dynamic
    /// eccentricity, which breaks the pole-pair periodicity.
    #[default]
    Mechanical,
    /// One electrical period, `M / (3 p)` steps.
    Electrical,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub period: PeriodKind,
    /// Whole periods simulated and dropped before the recorded one.
    pub discard_periods: usize,
    /// Hold the rotor at its initial position while time advances.
    pub locked_rotor: bool,
    /// Keep every [`FieldSolution`] in the result.
    pub keep_solutions: bool,
    /// Write one text file per step into this directory.
    pub dump_dir: Option<PathBuf>,
}

/// Scalar results of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub rotor_angle: f64,
    pub currents: [f64; PHASES],
    /// `X_str^T a_s` (Wb).
    pub flux_linkage: [f64; PHASES],
    /// Stored magnetic energy (J).
    pub energy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct PeriodRun {
    pub time_step: f64,
    /// Duration of the recorded window.
    pub period: f64,
    pub mechanical_angular_frequency: f64,
    pub records: Vec<StepRecord>,
    pub solutions: Vec<FieldSolution>,
}

/// Electrical angle at which phase-A current is in phase with its no-load
/// back-EMF (pure q-axis current, maximum torque per ampere).
pub fn max_torque_current_angle(mesh: &CoupledMesh, spec: &MachineSpec) -> Result<f64> {
    let gamma_a = spec.winding_layout()?.phase_axis_angles()[0];
    let d_axis = mesh
        .magnets
        .first()
        .ok_or_else(|| Error::Mesh("mesh has no magnets".into()))?
        .center_angle;
    Ok((spec.pole_pairs as f64 * d_axis - gamma_a + PI).rem_euclid(2.0 * PI))
}

/// Meshed, assembled and condensed machine ready for time stepping.
#[derive(Debug, Clone)]
pub struct PreparedMachine {
    spec: MachineSpec,
    mesh: CoupledMesh,
    solver: CoupledSolver,
    winding: WindingMatrix,
    current_angle: f64,
}

impl PreparedMachine {
    /// Concentric machine.
    pub fn new(spec: &MachineSpec, refinement: u32) -> Result<Self> {
        let mesh = build_mesh(spec, refinement)?;
        let stator = assemble_stator(&mesh.stator, spec)?;
        let rotor = assemble_rotor(&mesh.rotor, &mesh.magnets, spec)?;
        let winding = stator.winding.clone().expect("stator carries the winding");
        let current_angle = match spec.drive.current_angle {
            Some(a) => a,
            None => max_torque_current_angle(&mesh, spec)?,
        };
        Ok(PreparedMachine {
            spec: spec.clone(),
            solver: CoupledSolver::from_systems(stator, rotor)?,
            mesh,
            winding,
            current_angle,
        })
    }

    /// Same machine with a displaced rotor. The stator factorization is
    /// shared with `self`; `self` must be concentric.
    pub fn with_eccentricity(&self, ecc: &EccentricityState) -> Result<Self> {
        let mesh = apply_eccentricity(&self.mesh, ecc)?;
        let rotor = assemble_rotor(&mesh.rotor, &mesh.magnets, &self.spec)?;
        let solver = self.solver.with_rotor(rotor)?;
        Ok(PreparedMachine {
            spec: self.spec.clone(),
            mesh,
            solver,
            winding: self.winding.clone(),
            current_angle: self.current_angle,
        })
    }

    pub fn spec(&self) -> &MachineSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &CoupledMesh {
        &self.mesh
    }

    pub fn stator_system(&self) -> &DomainSystem {
        self.solver.stator_system()
    }

    pub fn rotor_system(&self) -> &DomainSystem {
        self.solver.rotor_system()
    }

    pub fn winding(&self) -> &WindingMatrix {
        &self.winding
    }

    pub fn current_angle(&self) -> f64 {
        self.current_angle
    }

    /// Rated sinusoidal drive from the machine data.
    pub fn drive(&self) -> Drive {
        Drive::Sinusoidal {
            amplitude: self.spec.drive.phase_current_amplitude,
            electrical_angular_frequency: self.spec.drive.electrical_angular_frequency,
            angle: self.current_angle,
        }
    }

    pub fn steps_per_revolution(&self) -> usize {
        self.mesh.interface_count / NODES_PER_STEP
    }

    pub fn steps_per_period(&self, kind: PeriodKind) -> usize {
        match kind {
            PeriodKind::Mechanical => self.steps_per_revolution(),
            PeriodKind::Electrical => self.steps_per_revolution() / self.spec.pole_pairs,
        }
    }

    pub fn time_step(&self) -> f64 {
        let angle = NODES_PER_STEP as f64 * 2.0 * PI / self.mesh.interface_count as f64;
        angle / self.spec.mechanical_angular_frequency()
    }

    /// Stored magnetic energy `1/2 a^T K a - j_pm^T a_r`, the quantity whose
    /// rate equals the electrical input at standstill.
    pub fn magnetic_energy(&self, sol: &FieldSolution) -> f64 {
        let s = self.stator_system();
        let r = self.rotor_system();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        0.5 * (s.stiffness.quadratic_form(&sol.stator) + r.stiffness.quadratic_form(&sol.rotor))
            - dot(&s.fixed_source, &sol.stator)
            - dot(&r.fixed_source, &sol.rotor)
    }

    /// Solves one step with explicit phase currents.
    pub fn solve(&self, step: usize, currents: [f64; PHASES]) -> Result<FieldSolution> {
        let coupling = build_projectors(&self.mesh, step)?;
        let f_s = self.stator_system().source(currents);
        let f_r = self.rotor_system().source(currents);
        self.solver.solve_step(&coupling, &f_s, &f_r)
    }

    /// Scalar step results without expanding the field.
    fn condensed_record(
        &self,
        k: usize,
        step: usize,
        time: f64,
        currents: [f64; PHASES],
    ) -> Result<StepRecord> {
        let coupling = build_projectors(&self.mesh, step)?;
        let alpha_s = self.stator_system().load_coefficients(currents);
        let alpha_r = self.rotor_system().load_coefficients(currents);
        let out = self.solver.solve_condensed(&coupling, &alpha_s, &alpha_r)?;
        Ok(StepRecord {
            step: k,
            time,
            rotor_angle: coupling.rotor_angle(),
            currents,
            flux_linkage: std::array::from_fn(|i| out.stator_functionals[i + 1]),
            energy: out.quadratic_energy - out.stator_functionals[0] - out.rotor_functionals[0],
            residual: out.residual,
        })
    }

    pub fn run_period(&self, drive: &Drive, options: &RunOptions) -> Result<PeriodRun> {
        let n = self.steps_per_period(options.period);
        if n == 0
            || (options.period == PeriodKind::Electrical
                && !self
                    .steps_per_revolution()
                    .is_multiple_of(self.spec.pole_pairs))
        {
            return Err(Error::PeriodCoverage(format!(
                "{} steps per revolution do not split into {} electrical periods",
                self.steps_per_revolution(),
                self.spec.pole_pairs
            )));
        }
        if let Some(dir) = &options.dump_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let dt = self.time_step();
        let first = options.discard_periods * n;
        let mut records = Vec::with_capacity(n);
        let mut solutions = Vec::new();
        for k in first..first + n {
            let time = k as f64 * dt;
            let step = if options.locked_rotor { 0 } else { k };
            let currents = drive.currents(time);
            if !options.keep_solutions && options.dump_dir.is_none() {
                records.push(
                    self.condensed_record(k, step, time, currents)
                        .map_err(|e| e.at_step(k))?,
                );
                continue;
            }
            let mut sol = self.solve(step, currents).map_err(|e| e.at_step(k))?;
            sol.time = time;
            sol.step = k;
            if let Some(dir) = &options.dump_dir {
                write_solution(dir, &sol)?;
            }
            records.push(StepRecord {
                step: k,
                time,
                rotor_angle: sol.rotor_angle,
                currents,
                flux_linkage: self.winding.flux_linkage(&sol.stator),
                energy: self.magnetic_energy(&sol),
                residual: sol.residual,
            });
            if options.keep_solutions {
                solutions.push(sol);
            }
        }
        Ok(PeriodRun {
            time_step: dt,
            period: n as f64 * dt,
            mechanical_angular_frequency: self.spec.mechanical_angular_frequency(),
            records,
            solutions,
        })
    }
}

/// Prepares the machine from scratch and runs one period.
pub fn run_period(
    spec: &MachineSpec,
    refinement: u32,
    ecc: Option<&EccentricityState>,
    drive: &Drive,
    options: &RunOptions,
) -> Result<PeriodRun> {
    let machine = PreparedMachine::new(spec, refinement)?;
    match ecc {
        Some(e) => machine.with_eccentricity(e)?.run_period(drive, options),
        None => machine.run_period(drive, options),
    }
}

fn write_solution(dir: &Path, sol: &FieldSolution) -> Result<()> {
    let path = dir.join(format!("step_{:05}.txt", sol.step));
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# pmsm-uq solution v1")?;
        writeln!(w, "step {}", sol.step)?;
        writeln!(w, "time {:.17e}", sol.time)?;
        writeln!(w, "rotor_angle {:.17e}", sol.rotor_angle)?;
        for (name, v) in [
            ("stator", &sol.stator),
            ("rotor", &sol.rotor),
            ("multipliers", &sol.multipliers),
        ] {
            writeln!(w, "{name} {}", v.len())?;
            for x in v.iter() {
                writeln!(w, "{x:.17e}")?;
            }
        }
        w.flush()
    };
    body().map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condensed_record_matches_expanded_field() {
        let m = PreparedMachine::new(&MachineSpec::default(), 0).unwrap();
        let drive = m.drive();
        for k in [0, 7, 50] {
            let time = k as f64 * m.time_step();
            let currents = drive.currents(time);
            let fast = m.condensed_record(k, k, time, currents).unwrap();
            let sol = m.solve(k, currents).unwrap();
            let energy = m.magnetic_energy(&sol);
            assert!(
                (fast.energy - energy).abs() < 1e-10 * energy.abs(),
                "{} vs {energy}",
                fast.energy
            );
            let psi = m.winding().flux_linkage(&sol.stator);
            let scale = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (x, y) in fast.flux_linkage.iter().zip(&psi) {
                assert!((x - y).abs() < 1e-10 * scale, "{x} vs {y}");
            }
            assert_eq!(fast.rotor_angle, sol.rotor_angle);
            assert!(fast.residual < 1e-10);
        }
    }
}
