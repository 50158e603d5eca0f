//! Finite element operators on one domain.
//!
//! Degrees of freedom are `a_i = A_z(x_i) * l_z` (Weber), i.e. the vector
//! potential is expanded as `A = sum a_i N_i / l_z e_z`. With this scaling the
//! stiffness carries a factor `1 / l_z`, current and magnet loads are plain
//! area integrals, and the winding matrix maps DoFs straight to flux linkage.

use crate::error::{Domain, Error, Result};
use crate::machine::{MachineSpec, WindingLayout, MU0, PHASES};
use crate::mesh::{DomainMesh, MagnetPlacement, Region};
use crate::sparse::CsrMatrix;

/// Reluctivity per region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reluctivity {
    pub iron: f64,
    pub magnet: f64,
    pub air: f64,
}

impl Reluctivity {
    pub fn from_spec(spec: &MachineSpec) -> Self {
        let nu0 = 1.0 / MU0;
        Reluctivity {
            iron: nu0 / spec.relative_permeability,
            magnet: nu0 / spec.magnets.recoil_permeability,
            air: nu0,
        }
    }

    pub fn vacuum() -> Self {
        let nu0 = 1.0 / MU0;
        Reluctivity {
            iron: nu0,
            magnet: nu0,
            air: nu0,
        }
    }

    pub fn of(&self, region: Region) -> f64 {
        match region {
            Region::StatorIron | Region::RotorIron => self.iron,
            Region::Magnet(_) => self.magnet,
            Region::Coil { .. } | Region::AirgapStator | Region::AirgapRotor | Region::Air => {
                self.air
            }
        }
    }
}

/// Linear-triangle shape function gradients times `2 * area`: `(b_i, c_i)`
/// with `grad N_i = (b_i, c_i) / (2 area)`.
pub(crate) fn gradient_coefficients(p: &[[f64; 2]; 3]) -> ([f64; 3], [f64; 3], f64) {
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let area = 0.5 * (b[1] * c[2] - b[2] * c[1]);
    (b, c, area)
}

/// Local stiffness `nu / l_z * int grad N_i . grad N_j`.
pub fn element_stiffness(p: [[f64; 2]; 3], nu: f64, axial_length: f64) -> Option<[[f64; 3]; 3]> {
    let (b, c, area) = gradient_coefficients(&p);
    if !(area > 0.0) {
        return None;
    }
    let f = nu / (4.0 * area * axial_length);
    Some(std::array::from_fn(|i| {
        std::array::from_fn(|j| f * (b[i] * b[j] + c[i] * c[j]))
    }))
}

fn corners(mesh: &DomainMesh, t: usize) -> [[f64; 2]; 3] {
    mesh.triangles[t].map(|n| mesh.nodes[n])
}

pub fn assemble_stiffness(
    mesh: &DomainMesh,
    reluctivity: impl Fn(Region) -> f64,
    axial_length: f64,
) -> Result<CsrMatrix> {
    let n = mesh.nodes.len();
    let mut trip = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let nu = reluctivity(mesh.regions[t]);
        let ke = element_stiffness(corners(mesh, t), nu, axial_length).ok_or(
            Error::DegenerateTriangle {
                domain: mesh.domain,
                triangle: t,
                area: mesh.triangle_area(t),
            },
        )?;
        for i in 0..3 {
            for j in 0..3 {
                trip.push((tri[i], tri[j], ke[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, &trip))
}

/// Winding matrix `X_str`: one column per phase over the domain nodes, such
/// that `j_src = X_str i_str` and the phase flux linkages are `X_str^T a`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingMatrix {
    pub columns: [Vec<f64>; PHASES],
}

impl WindingMatrix {
    pub fn current_source(&self, currents: [f64; PHASES]) -> Vec<f64> {
        let n = self.columns[0].len();
        (0..n)
            .map(|i| (0..PHASES).map(|k| self.columns[k][i] * currents[k]).sum())
            .collect()
    }

    pub fn flux_linkage(&self, a: &[f64]) -> [f64; PHASES] {
        std::array::from_fn(|k| self.columns[k].iter().zip(a).map(|(x, a)| x * a).sum())
    }

    pub fn negated(&self) -> Self {
        WindingMatrix {
            columns: self
                .columns
                .clone()
                .map(|c| c.into_iter().map(|x| -x).collect()),
        }
    }
}

/// Builds `X_str` by distributing each coil side's `sign * turns / area` over
/// the nodes of its region with the consistent weights `int N_i = area_t / 3`.
pub fn assemble_winding_matrix(mesh: &DomainMesh, layout: &WindingLayout) -> Result<WindingMatrix> {
    let slots = layout.slot_count();
    let mut areas = vec![[0.0; 2]; slots];
    for (t, region) in mesh.regions.iter().enumerate() {
        if let Region::Coil { slot, layer } = *region {
            if slot >= slots {
                return Err(Error::Winding(format!(
                    "mesh slot {slot} not in a {slots}-slot layout"
                )));
            }
            areas[slot][layer as usize] += mesh.triangle_area(t);
        }
    }
    for (slot, a) in areas.iter().enumerate() {
        if a[0] <= 0.0 || a[1] <= 0.0 {
            return Err(Error::Winding(format!(
                "slot {slot} has no meshed coil region"
            )));
        }
    }
    let n = mesh.nodes.len();
    let mut columns: [Vec<f64>; PHASES] = std::array::from_fn(|_| vec![0.0; n]);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if let Region::Coil { slot, layer } = mesh.regions[t] {
            let side = layout.side(slot, layer);
            let density = side.sign * side.turns / areas[slot][layer as usize];
            let w = density * mesh.triangle_area(t) / 3.0;
            for &node in tri {
                columns[side.phase][node] += w;
            }
        }
    }
    Ok(WindingMatrix { columns })
}

/// Current source vector for given phase currents, together with `X_str`.
pub fn assemble_current_source(
    mesh: &DomainMesh,
    layout: &WindingLayout,
    currents: [f64; PHASES],
) -> Result<(Vec<f64>, WindingMatrix)> {
    let x = assemble_winding_matrix(mesh, layout)?;
    Ok((x.current_source(currents), x))
}

/// Magnet load `int nu B_rem . curl(N_i e_z)` for parallel-magnetized magnets.
pub fn assemble_magnet_source(
    mesh: &DomainMesh,
    magnets: &[MagnetPlacement],
    remanence: f64,
    magnet_reluctivity: f64,
) -> Result<Vec<f64>> {
    let mut f = vec![0.0; mesh.nodes.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if let Region::Magnet(k) = mesh.regions[t] {
            let mag = magnets.get(k).ok_or(Error::MagnetOrientation(k))?;
            let [ox, oy] = mag.orientation();
            let (bx, by) = (remanence * ox, remanence * oy);
            let (b, c, _) = gradient_coefficients(&corners(mesh, t));
            for i in 0..3 {
                f[tri[i]] += 0.5 * magnet_reluctivity * (bx * c[i] - by * b[i]);
            }
        }
    }
    Ok(f)
}

/// Natural-boundary load of a line current `current` at the origin, spread
/// evenly over the nodes of the inner boundary (sums to `current`).
pub fn line_current_load(mesh: &DomainMesh, current: f64) -> Vec<f64> {
    let mut f = vec![0.0; mesh.nodes.len()];
    let share = current / mesh.natural_boundary.len() as f64;
    for &n in &mesh.natural_boundary {
        f[n] += share;
    }
    f
}

/// Assembled operators of one domain before coupling.
#[derive(Debug, Clone)]
pub struct DomainSystem {
    pub domain: Domain,
    /// Stiffness over all domain nodes (Dirichlet rows included).
    pub stiffness: CsrMatrix,
    /// Time-invariant load (magnets, or a test load).
    pub fixed_source: Vec<f64>,
    /// Present on the stator.
    pub winding: Option<WindingMatrix>,
    pub dirichlet: Vec<usize>,
    pub interface: Vec<usize>,
}

impl DomainSystem {
    pub fn node_count(&self) -> usize {
        self.stiffness.nrows()
    }

    /// Nodes that are not Dirichlet-constrained, ascending.
    pub fn free_nodes(&self) -> Vec<usize> {
        let mut fixed = vec![false; self.node_count()];
        for &d in &self.dirichlet {
            fixed[d] = true;
        }
        (0..self.node_count()).filter(|&i| !fixed[i]).collect()
    }

    /// Stiffness with Dirichlet rows and columns eliminated.
    pub fn reduced_stiffness(&self) -> CsrMatrix {
        let free = self.free_nodes();
        self.stiffness.submatrix(&free, &free)
    }

    /// Load components `f_p`: the fixed source, then one winding column per
    /// phase (stator only). The load for currents `i` is
    /// `f_0 + sum_k i_k f_(k+1)`.
    pub fn load_components(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.fixed_source.clone()];
        if let Some(x) = &self.winding {
            out.extend(x.columns.iter().cloned());
        }
        out
    }

    /// Coefficients of [`Self::load_components`] for phase currents `currents`.
    pub fn load_coefficients(&self, currents: [f64; PHASES]) -> Vec<f64> {
        let mut out = vec![1.0];
        if self.winding.is_some() {
            out.extend(currents);
        }
        out
    }

    /// Total load for phase currents `currents`.
    pub fn source(&self, currents: [f64; PHASES]) -> Vec<f64> {
        let mut f = self.fixed_source.clone();
        if let Some(x) = &self.winding {
            for (fi, si) in f.iter_mut().zip(x.current_source(currents)) {
                *fi += si;
            }
        }
        f
    }
}

pub fn assemble_stator(mesh: &DomainMesh, spec: &MachineSpec) -> Result<DomainSystem> {
    let nu = Reluctivity::from_spec(spec);
    let stiffness = assemble_stiffness(mesh, |r| nu.of(r), spec.geometry.axial_length)?;
    let winding = assemble_winding_matrix(mesh, &spec.winding_layout()?)?;
    Ok(DomainSystem {
        domain: Domain::Stator,
        stiffness,
        fixed_source: vec![0.0; mesh.nodes.len()],
        winding: Some(winding),
        dirichlet: mesh.dirichlet.clone(),
        interface: mesh.interface.clone(),
    })
}

pub fn assemble_rotor(
    mesh: &DomainMesh,
    magnets: &[MagnetPlacement],
    spec: &MachineSpec,
) -> Result<DomainSystem> {
    let nu = Reluctivity::from_spec(spec);
    let stiffness = assemble_stiffness(mesh, |r| nu.of(r), spec.geometry.axial_length)?;
    let fixed_source =
        assemble_magnet_source(mesh, magnets, spec.magnets.remanent_flux_density, nu.magnet)?;
    Ok(DomainSystem {
        domain: Domain::Rotor,
        stiffness,
        fixed_source,
        winding: None,
        dirichlet: mesh.dirichlet.clone(),
        interface: mesh.interface.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    #[test]
    fn unit_right_triangle() {
        let k = element_stiffness([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 1.0, 1.0).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        assert_eq!(k, expected);
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        assert!(element_stiffness([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], 1.0, 1.0).is_none());
    }

    #[test]
    fn stiffness_is_symmetric_with_zero_row_sums() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec, 0).unwrap();
        let sys = assemble_stator(&mesh.stator, &spec).unwrap();
        let k = &sys.stiffness;
        assert_eq!(k.asymmetry(), 0.0);
        for i in 0..k.nrows() {
            let (sum, abs) = k
                .row(i)
                .fold((0.0, 0.0), |(s, a), (_, v)| (s + v, a + v.abs()));
            assert!(sum.abs() <= 1e-12 * abs, "row {i}: {sum} vs {abs}");
        }
    }

    #[test]
    fn stiffness_is_linear_in_reluctivity() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec, 0).unwrap();
        let nu = Reluctivity::from_spec(&spec);
        let k1 = assemble_stiffness(&mesh.rotor, |r| nu.of(r), 0.01).unwrap();
        let k2 = assemble_stiffness(&mesh.rotor, |r| 2.0 * nu.of(r), 0.01).unwrap();
        assert_eq!(k1.scale(2.0), k2);
    }

    #[test]
    fn slot_ampere_turns_are_conserved() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec, 0).unwrap();
        let layout = spec.winding_layout().unwrap();
        let x = assemble_winding_matrix(&mesh.stator, &layout).unwrap();
        // each phase column sums to its net turns (zero) and the positive part
        // to 24 coil sides of 10 turns
        for col in &x.columns {
            let net: f64 = col.iter().sum();
            let pos: f64 = col.iter().filter(|v| **v > 0.0).sum();
            assert!(net.abs() < 1e-9);
            assert!(pos > 0.0);
        }
        // single slot carrying current I: restrict to the nodes of slot 0
        let i = 7.5;
        let (f, _) = assemble_current_source(&mesh.stator, &layout, [i, 0.0, 0.0]).unwrap();
        let mut slot_sum = 0.0;
        let mut slot_nodes = std::collections::BTreeSet::new();
        for (t, tri) in mesh.stator.triangles.iter().enumerate() {
            if matches!(
                mesh.stator.regions[t],
                Region::Coil {
                    slot: 0,
                    layer: crate::machine::CoilLayer::Top
                }
            ) {
                let area = mesh.stator.triangle_area(t);
                let side = layout.side(0, crate::machine::CoilLayer::Top);
                let area_total = mesh.stator.region_area(mesh.stator.regions[t]);
                slot_sum += side.sign * side.turns * i * area / area_total;
                slot_nodes.extend(tri.iter().copied());
            }
        }
        assert!((slot_sum - 10.0 * i).abs() < 1e-12 * 10.0 * i);
        assert!(f.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn zero_and_reversed_currents() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec, 0).unwrap();
        let layout = spec.winding_layout().unwrap();
        let (f0, x) = assemble_current_source(&mesh.stator, &layout, [0.0; 3]).unwrap();
        assert!(f0.iter().all(|v| *v == 0.0));
        let i = [3.0, -1.0, -2.0];
        let f = x.current_source(i);
        let g = x.negated().current_source(i);
        assert!(f.iter().zip(&g).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn magnet_source_lives_on_magnet_boundaries() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec, 0).unwrap();
        let nu = Reluctivity::from_spec(&spec);
        let f = assemble_magnet_source(&mesh.rotor, &mesh.magnets, 1.2, nu.magnet).unwrap();
        // nodes interior to a magnet: every adjacent triangle is that magnet
        let mut touching: Vec<Vec<Region>> = vec![Vec::new(); mesh.rotor.nodes.len()];
        for (t, tri) in mesh.rotor.triangles.iter().enumerate() {
            for &n in tri {
                touching[n].push(mesh.rotor.regions[t]);
            }
        }
        let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut interior = 0;
        for (n, regions) in touching.iter().enumerate() {
            let all_same_magnet =
                matches!(regions[0], Region::Magnet(_)) && regions.iter().all(|r| *r == regions[0]);
            if all_same_magnet {
                interior += 1;
                assert!(f[n].abs() < 1e-12 * scale, "node {n}: {}", f[n]);
            }
        }
        assert!(interior > 0);
        // flipping every magnet negates the load
        let flipped: Vec<_> = mesh
            .magnets
            .iter()
            .map(|m| MagnetPlacement {
                polarity: -m.polarity,
                ..*m
            })
            .collect();
        let g = assemble_magnet_source(&mesh.rotor, &flipped, 1.2, nu.magnet).unwrap();
        assert!(f.iter().zip(&g).all(|(a, b)| *a == -*b));
        let zero = assemble_magnet_source(&mesh.rotor, &mesh.magnets, 0.0, nu.magnet).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn missing_magnet_orientation_is_an_error() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec, 0).unwrap();
        let r = assemble_magnet_source(&mesh.rotor, &mesh.magnets[..3], 1.2, 1.0);
        assert!(matches!(r, Err(Error::MagnetOrientation(3))));
    }
}
