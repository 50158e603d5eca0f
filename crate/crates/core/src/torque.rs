//! Torque from the energy balance `P_e - P_l = dW/dt + w_m tau`, and a
//! Maxwell stress cross-check.

use std::f64::consts::PI;
use std::io::Write;

use crate::assembly::gradient_coefficients;
use crate::coupling::FieldSolution;
use crate::error::{Error, Result};
use crate::machine::{MU0, PHASES};
use crate::mesh::{signed_area, CoupledMesh, DomainMesh, Region};
use crate::simulation::PeriodRun;

/// Finite difference scheme for time derivatives on the uniform step grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Differencing {
    /// Central differences with wrap-around; the series covers one period.
    #[default]
    Periodic,
    /// Central differences inside, first-order one-sided at both ends.
    OneSided,
}

pub fn time_derivative(x: &[f64], dt: f64, scheme: Differencing) -> Result<Vec<f64>> {
    let n = x.len();
    let min = match scheme {
        Differencing::Periodic => 3,
        Differencing::OneSided => 2,
    };
    if n < min {
        return Err(Error::Shape(format!(
            "{n} samples are too few to differentiate"
        )));
    }
    Ok((0..n)
        .map(|i| match scheme {
            Differencing::Periodic => (x[(i + 1) % n] - x[(i + n - 1) % n]) / (2.0 * dt),
            Differencing::OneSided if i == 0 => (x[1] - x[0]) / dt,
            Differencing::OneSided if i == n - 1 => (x[n - 1] - x[n - 2]) / dt,
            Differencing::OneSided => (x[i + 1] - x[i - 1]) / (2.0 * dt),
        })
        .collect())
}

fn same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: lengths {a} and {b} differ")));
    }
    Ok(())
}

/// `u = R i + d(psi)/dt` per phase.
pub fn stranded_voltage(
    flux_linkage: &[[f64; PHASES]],
    currents: &[[f64; PHASES]],
    resistance: f64,
    dt: f64,
    scheme: Differencing,
) -> Result<Vec<[f64; PHASES]>> {
    same_len(
        "flux linkage vs currents",
        flux_linkage.len(),
        currents.len(),
    )?;
    let mut u = vec![[0.0; PHASES]; currents.len()];
    for k in 0..PHASES {
        let psi: Vec<f64> = flux_linkage.iter().map(|p| p[k]).collect();
        let dpsi = time_derivative(&psi, dt, scheme)?;
        for (t, d) in dpsi.into_iter().enumerate() {
            u[t][k] = resistance * currents[t][k] + d;
        }
    }
    Ok(u)
}

/// Electrical input `u^T i` and ohmic losses `R i^T i`.
pub fn powers(
    voltages: &[[f64; PHASES]],
    currents: &[[f64; PHASES]],
    resistance: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    same_len("voltages vs currents", voltages.len(), currents.len())?;
    let dot = |a: &[f64; PHASES], b: &[f64; PHASES]| (0..PHASES).map(|k| a[k] * b[k]).sum::<f64>();
    let p_e = voltages
        .iter()
        .zip(currents)
        .map(|(u, i)| dot(u, i))
        .collect();
    let p_l = currents.iter().map(|i| resistance * dot(i, i)).collect();
    Ok((p_e, p_l))
}

/// `(1 / (T w_m)) int (P_e - P_l) dt` over a series sampled at `t_k = t_0 + k dt`
/// that covers exactly `period`.
pub fn mean_torque(
    p_e: &[f64],
    p_l: &[f64],
    dt: f64,
    period: f64,
    mechanical_speed: f64,
) -> Result<f64> {
    same_len("P_e vs P_l", p_e.len(), p_l.len())?;
    let covered = p_e.len() as f64 * dt;
    if p_e.is_empty() || (covered - period).abs() > 1e-9 * period {
        return Err(Error::PeriodCoverage(format!(
            "{} samples of {dt:e} s cover {covered:e} s, period is {period:e} s",
            p_e.len()
        )));
    }
    let mean = p_e.iter().zip(p_l).map(|(e, l)| e - l).sum::<f64>() / p_e.len() as f64;
    Ok(mean / mechanical_speed)
}

/// `tau_m = (P_e - P_l - dW/dt) / w_m`.
pub fn instantaneous_torque(
    p_e: &[f64],
    p_l: &[f64],
    energy: &[f64],
    dt: f64,
    mechanical_speed: f64,
    scheme: Differencing,
) -> Result<Vec<f64>> {
    same_len("P_e vs P_l", p_e.len(), p_l.len())?;
    same_len("P_e vs W_mag", p_e.len(), energy.len())?;
    let dw = time_derivative(energy, dt, scheme)?;
    Ok((0..p_e.len())
        .map(|k| (p_e[k] - p_l[k] - dw[k]) / mechanical_speed)
        .collect())
}

/// Time series of one simulated period.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueTrace {
    pub times: Vec<f64>,
    pub currents: Vec<[f64; PHASES]>,
    pub flux_linkage: Vec<[f64; PHASES]>,
    pub voltages: Vec<[f64; PHASES]>,
    pub electrical_power: Vec<f64>,
    pub losses: Vec<f64>,
    pub energy: Vec<f64>,
    pub energy_rate: Vec<f64>,
    pub torque: Vec<f64>,
    pub time_step: f64,
    pub period: f64,
    pub mechanical_angular_frequency: f64,
}

impl TorqueTrace {
    pub fn from_run(run: &PeriodRun, resistance: f64, scheme: Differencing) -> Result<Self> {
        let r = &run.records;
        let dt = run.time_step;
        let currents: Vec<_> = r.iter().map(|s| s.currents).collect();
        let flux_linkage: Vec<_> = r.iter().map(|s| s.flux_linkage).collect();
        let energy: Vec<f64> = r.iter().map(|s| s.energy).collect();
        let voltages = stranded_voltage(&flux_linkage, &currents, resistance, dt, scheme)?;
        let (electrical_power, losses) = powers(&voltages, &currents, resistance)?;
        let w_m = run.mechanical_angular_frequency;
        let torque = instantaneous_torque(&electrical_power, &losses, &energy, dt, w_m, scheme)?;
        let energy_rate = time_derivative(&energy, dt, scheme)?;
        Ok(TorqueTrace {
            times: r.iter().map(|s| s.time).collect(),
            currents,
            flux_linkage,
            voltages,
            electrical_power,
            losses,
            energy,
            energy_rate,
            torque,
            time_step: dt,
            period: run.period,
            mechanical_angular_frequency: w_m,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time-averaged torque from the power balance.
    pub fn mean_torque(&self) -> Result<f64> {
        mean_torque(
            &self.electrical_power,
            &self.losses,
            self.time_step,
            self.period,
            self.mechanical_angular_frequency,
        )
    }

    pub fn mean_instantaneous_torque(&self) -> f64 {
        mean(&self.torque)
    }

    pub fn mean_electrical_power(&self) -> f64 {
        mean(&self.electrical_power)
    }

    pub fn mean_energy_rate(&self) -> f64 {
        mean(&self.energy_rate)
    }

    /// CSV with columns `time,torque,electrical_power,losses,magnetic_energy`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,torque,electrical_power,losses,magnetic_energy")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e}",
                self.times[k],
                self.torque[k],
                self.electrical_power[k],
                self.losses[k],
                self.energy[k]
            )?;
        }
        Ok(())
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Flux density (T) in triangle `t` of a domain for DoFs `a` (Wb).
pub fn flux_density(mesh: &DomainMesh, a: &[f64], t: usize, axial_length: f64) -> [f64; 2] {
    let tri = mesh.triangles[t];
    let (b, c, area) = gradient_coefficients(&tri.map(|n| mesh.nodes[n]));
    let f = 1.0 / (2.0 * area * axial_length);
    let (mut bx, mut by) = (0.0, 0.0);
    for i in 0..3 {
        bx += a[tri[i]] * c[i] * f;
        by -= a[tri[i]] * b[i] * f;
    }
    [bx, by]
}

/// Triangles of a domain bucketed by polar angle for point location.
struct AngularIndex {
    buckets: Vec<Vec<usize>>,
}

impl AngularIndex {
    fn new(mesh: &DomainMesh, count: usize) -> Self {
        let mut buckets = vec![Vec::new(); count];
        let width = 2.0 * PI / count as f64;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let angles: Vec<f64> = tri
                .iter()
                .map(|&n| mesh.nodes[n][1].atan2(mesh.nodes[n][0]))
                .collect();
            // smallest arc containing the vertex angles (triangles are small)
            let base = angles[0];
            let rel: Vec<f64> = angles
                .iter()
                .map(|a| (a - base + PI).rem_euclid(2.0 * PI) - PI)
                .collect();
            let lo = base + rel.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = base + rel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let first = (lo / width).floor() as i64 - 1;
            let last = (hi / width).floor() as i64 + 1;
            for b in first..=last {
                buckets[b.rem_euclid(count as i64) as usize].push(t);
            }
        }
        AngularIndex { buckets }
    }

    fn locate(&self, mesh: &DomainMesh, p: [f64; 2]) -> Option<usize> {
        let count = self.buckets.len();
        let angle = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
        let b = ((angle / (2.0 * PI) * count as f64) as usize).min(count - 1);
        let tol = -1e-12;
        self.buckets[b].iter().copied().find(|&t| {
            let [a, bb, c] = mesh.triangles[t].map(|n| mesh.nodes[n]);
            let area = signed_area(a, bb, c);
            let l0 = signed_area(p, bb, c) / area;
            let l1 = signed_area(a, p, c) / area;
            let l2 = signed_area(a, bb, p) / area;
            l0 >= tol && l1 >= tol && l2 >= tol
        })
    }
}

/// Maxwell stress torque on a circle of fixed radius in the airgap.
pub struct MaxwellContour {
    pub radius: f64,
    pub samples: usize,
    axial_length: f64,
    on_stator: bool,
    index: AngularIndex,
}

impl MaxwellContour {
    /// Default radius: inside the stator-side airgap band, off the node rings
    /// of every refinement level.
    pub fn default_radius(mesh: &CoupledMesh) -> f64 {
        mesh.contour_radius + 0.45 * (mesh.stator_bore_radius - mesh.contour_radius)
    }

    pub fn new(mesh: &CoupledMesh, radius: f64, samples: usize, axial_length: f64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Contour("needs at least one sample point".into()));
        }
        let on_stator = radius >= mesh.contour_radius;
        let domain = if on_stator { &mesh.stator } else { &mesh.rotor };
        Ok(MaxwellContour {
            radius,
            samples,
            axial_length,
            on_stator,
            index: AngularIndex::new(domain, mesh.interface_count),
        })
    }

    /// `l_z r^2 / mu0 * int B_r B_phi dphi`, midpoint rule in the angle.
    pub fn torque(&self, mesh: &CoupledMesh, sol: &FieldSolution) -> Result<f64> {
        let (domain, a) = if self.on_stator {
            (&mesh.stator, &sol.stator)
        } else {
            (&mesh.rotor, &sol.rotor)
        };
        let (turn_c, turn_s) = if self.on_stator {
            (1.0, 0.0)
        } else {
            (sol.rotor_angle.cos(), sol.rotor_angle.sin())
        };
        let mut sum = 0.0;
        for k in 0..self.samples {
            let phi = 2.0 * PI * (k as f64 + 0.5) / self.samples as f64;
            let (c, s) = (phi.cos(), phi.sin());
            let p = [self.radius * c, self.radius * s];
            // into the domain's own frame
            let q = [
                turn_c * p[0] + turn_s * p[1],
                -turn_s * p[0] + turn_c * p[1],
            ];
            let t = self.index.locate(domain, q).ok_or_else(|| {
                Error::Contour(format!(
                    "point at radius {} angle {phi} lies outside the {} mesh",
                    self.radius, domain.domain
                ))
            })?;
            let region = domain.regions[t];
            if !region.is_airgap() {
                return Err(Error::Contour(format!(
                    "radius {} crosses region {region} at angle {phi}",
                    self.radius
                )));
            }
            let bl = flux_density(domain, a, t, self.axial_length);
            let b = [
                turn_c * bl[0] - turn_s * bl[1],
                turn_s * bl[0] + turn_c * bl[1],
            ];
            let b_r = b[0] * c + b[1] * s;
            let b_phi = -b[0] * s + b[1] * c;
            sum += b_r * b_phi;
        }
        Ok(
            self.axial_length * self.radius * self.radius / MU0 * sum * 2.0 * PI
                / self.samples as f64,
        )
    }
}

/// Maxwell stress torque of one solution on a circle of radius `radius`.
pub fn maxwell_stress_torque(
    mesh: &CoupledMesh,
    sol: &FieldSolution,
    radius: f64,
    axial_length: f64,
) -> Result<f64> {
    MaxwellContour::new(mesh, radius, 4 * mesh.interface_count, axial_length)?.torque(mesh, sol)
}

/// Maxwell stress torque averaged over the radius of the stator-side airgap
/// band, `l_z / (mu0 (r_bore - r_c)) int r B_r B_phi dS`. Each triangle uses
/// the three-point edge-midpoint rule. Much less sensitive to the mesh than
/// a single contour.
pub fn band_torque(mesh: &CoupledMesh, sol: &FieldSolution, axial_length: f64) -> Result<f64> {
    let width = mesh.stator_bore_radius - mesh.contour_radius;
    if !(width > 0.0) {
        return Err(Error::Contour("stator airgap band has no width".into()));
    }
    let d = &mesh.stator;
    let mut sum = 0.0;
    let mut covered = 0.0;
    for (t, tri) in d.triangles.iter().enumerate() {
        if d.regions[t] != Region::AirgapStator {
            continue;
        }
        let [bx, by] = flux_density(d, &sol.stator, t, axial_length);
        let p = tri.map(|n| d.nodes[n]);
        let area = d.triangle_area(t);
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let (x, y) = (0.5 * (p[i][0] + p[j][0]), 0.5 * (p[i][1] + p[j][1]));
            sum += area / 3.0 * (bx * x + by * y) * (by * x - bx * y) / x.hypot(y);
        }
        covered += area;
    }
    if covered == 0.0 {
        return Err(Error::Contour("mesh has no stator airgap band".into()));
    }
    Ok(axial_length / (MU0 * width) * sum)
}
