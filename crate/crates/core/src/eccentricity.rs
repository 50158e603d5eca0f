//! Dynamic rotor eccentricity as a displacement map on the concentric mesh.
//!
//! The rotor body is translated rigidly by `R0 (cos theta0, sin theta0)` in
//! the rotor frame. Nodes of the rotor-side airgap band are blended linearly
//! in their radius between the displaced rotor surface and the fixed sliding
//! contour, so the contour keeps its equidistant nodes on the stator-centred
//! circle. Because the whole rotor domain turns about the stator centre, the
//! displaced rotor centre orbits with the rotor: dynamic eccentricity.

use serde::{Deserialize, Serialize};

use crate::error::{Domain, Error, Result};
use crate::mesh::{signed_area, CoupledMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EccentricityState {
    /// Signed displacement magnitude R0 (m).
    pub displacement: f64,
    /// Displacement direction theta0 in the rotor frame (rad).
    pub direction: f64,
    /// Mean mechanical airgap delta_m (m).
    pub mean_airgap: f64,
}

impl EccentricityState {
    pub fn new(displacement: f64, direction: f64, mean_airgap: f64) -> Result<Self> {
        if !(mean_airgap > 0.0) {
            return Err(Error::Geometry("mean airgap must be positive".into()));
        }
        let ecc = displacement / mean_airgap;
        if !(ecc.abs() < 1.0) {
            return Err(Error::Eccentricity { eccentricity: ecc });
        }
        Ok(EccentricityState {
            displacement,
            direction,
            mean_airgap,
        })
    }

    pub fn from_eccentricity(eccentricity: f64, direction: f64, mean_airgap: f64) -> Result<Self> {
        Self::new(eccentricity * mean_airgap, direction, mean_airgap)
    }

    pub fn eccentricity(&self) -> f64 {
        self.displacement / self.mean_airgap
    }

    pub fn offset(&self) -> [f64; 2] {
        [
            self.displacement * self.direction.cos(),
            self.displacement * self.direction.sin(),
        ]
    }

    /// delta(x, t) = delta_m [1 - eps cos(x - w_m t - theta0)].
    pub fn airgap(&self, arc_angle: f64, rotor_angle: f64) -> f64 {
        self.mean_airgap
            * (1.0 - self.eccentricity() * (arc_angle - rotor_angle - self.direction).cos())
    }
}

/// Maps a concentric mesh onto the displaced-rotor geometry.
///
/// Returns an exact copy when the displacement is zero.
pub fn apply_eccentricity(mesh: &CoupledMesh, ecc: &EccentricityState) -> Result<CoupledMesh> {
    if mesh.eccentricity.is_some_and(|e| e.displacement != 0.0) {
        return Err(Error::Geometry(
            "mesh already carries a rotor displacement".into(),
        ));
    }
    let gap = mesh.stator_bore_radius - mesh.rotor_surface_radius;
    if (gap - ecc.mean_airgap).abs() > 1e-9 * gap {
        return Err(Error::Geometry(format!(
            "eccentricity defined for airgap {} but mesh airgap is {gap}",
            ecc.mean_airgap
        )));
    }
    let mut out = mesh.clone();
    out.eccentricity = Some(*ecc);
    if ecc.displacement == 0.0 {
        return Ok(out);
    }
    let [dx, dy] = ecc.offset();
    let r_surface = mesh.rotor_surface_radius;
    let r_contour = mesh.contour_radius;
    let tol = 1e-9 * r_contour;
    for p in out.rotor.nodes.iter_mut() {
        let r = p[0].hypot(p[1]);
        let w = if r <= r_surface + tol {
            1.0
        } else if r < r_contour - tol {
            (r_contour - r) / (r_contour - r_surface)
        } else {
            0.0
        };
        if w > 0.0 {
            p[0] += w * dx;
            p[1] += w * dy;
        }
    }
    for (t, tri) in out.rotor.triangles.iter().enumerate() {
        let area = signed_area(
            out.rotor.nodes[tri[0]],
            out.rotor.nodes[tri[1]],
            out.rotor.nodes[tri[2]],
        );
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle {
                domain: Domain::Rotor,
                triangle: t,
                area,
            });
        }
    }
    Ok(out)
}

/// Distance from the origin to a closed star-shaped polygon along the ray at
/// `angle`.
fn ray_distance(nodes: &[[f64; 2]], ring: &[usize], angle: f64) -> f64 {
    let dir = [angle.cos(), angle.sin()];
    let n = ring.len();
    for k in 0..n {
        let a = nodes[ring[k]];
        let b = nodes[ring[(k + 1) % n]];
        let e = [b[0] - a[0], b[1] - a[1]];
        // a + s e = rho dir
        let det = e[0] * dir[1] - e[1] * dir[0];
        if det.abs() < f64::EPSILON {
            continue;
        }
        let s = (a[1] * dir[0] - a[0] * dir[1]) / det;
        if (-1e-12..=1.0 + 1e-12).contains(&s) {
            let rho = (a[0] + s * e[0]) * dir[0] + (a[1] + s * e[1]) * dir[1];
            if rho > 0.0 {
                return rho;
            }
        }
    }
    f64::NAN
}

/// Airgap width measured on the mesh along the ray at `angle` (rotor frame at
/// t = 0).
pub fn measured_airgap(mesh: &CoupledMesh, angle: f64) -> f64 {
    ray_distance(&mesh.stator.nodes, &mesh.stator_bore, angle)
        - ray_distance(&mesh.rotor.nodes, &mesh.rotor_surface, angle)
}
