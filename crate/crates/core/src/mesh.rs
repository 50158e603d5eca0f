//! Structured polar triangulation of the machine cross-section.
//!
//! Both domains are stacks of concentric node rings with the same number of
//! nodes `M` per ring, all rings sharing the node angles `2 pi j / M`. Each
//! annular cell between two rings is split into two triangles along the same
//! diagonal, so the triangulation is invariant under rotation by whole cells.
//! Airgap cells instead get a centre node and four triangles: a one-sided
//! diagonal makes the mesh chiral, which biases the airgap field and shows up
//! as spurious torque at symmetric rotor positions.
//! Region boundaries (slot sides, magnet edges, layer radii) coincide with
//! ring radii and node angles, so no triangle straddles two regions.
//!
//! The stator owns the rings from the sliding contour outwards, the rotor the
//! rings from the shaft out to the contour. The two contour rings coincide
//! geometrically but carry separate degrees of freedom.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use crate::eccentricity::EccentricityState;
use crate::error::{Domain, Error, Result};
use crate::machine::{CoilLayer, MachineSpec};

/// Material / source region of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    StatorIron,
    RotorIron,
    Magnet(usize),
    Coil {
        slot: usize,
        layer: CoilLayer,
    },
    /// Airgap band between the sliding contour and the stator bore.
    AirgapStator,
    /// Airgap band between the rotor surface and the sliding contour.
    AirgapRotor,
    /// Interpolar space between surface magnets.
    Air,
}

impl Region {
    pub fn is_airgap(&self) -> bool {
        matches!(self, Region::AirgapStator | Region::AirgapRotor)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::StatorIron => f.write_str("stator_iron"),
            Region::RotorIron => f.write_str("rotor_iron"),
            Region::Magnet(m) => write!(f, "magnet:{m}"),
            Region::Coil { slot, layer } => {
                let l = match layer {
                    CoilLayer::Top => "top",
                    CoilLayer::Bottom => "bottom",
                };
                write!(f, "coil:{slot}:{l}")
            }
            Region::AirgapStator => f.write_str("airgap_stator"),
            Region::AirgapRotor => f.write_str("airgap_rotor"),
            Region::Air => f.write_str("air"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainMesh {
    pub domain: Domain,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    /// Nodes with a homogeneous Dirichlet condition.
    pub dirichlet: Vec<usize>,
    /// Contour nodes, `interface[k]` sits at angle `2 pi k / M`.
    pub interface: Vec<usize>,
    /// Nodes on a boundary left with a natural condition (annulus test only).
    pub natural_boundary: Vec<usize>,
}

impl DomainMesh {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn check_orientation(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle {
                    domain: self.domain,
                    triangle: t,
                    area,
                });
            }
        }
        Ok(())
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.regions[t] == region)
            .map(|t| self.triangle_area(t))
            .sum()
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Surface magnet as laid out on the mesh (rotor frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetPlacement {
    pub center_angle: f64,
    /// +1 for remanence pointing outward along the magnet axis.
    pub polarity: f64,
}

impl MagnetPlacement {
    /// Unit remanence direction (parallel magnetization along the axis).
    pub fn orientation(&self) -> [f64; 2] {
        [
            self.polarity * self.center_angle.cos(),
            self.polarity * self.center_angle.sin(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledMesh {
    pub stator: DomainMesh,
    pub rotor: DomainMesh,
    /// Number of nodes `M` on each side of the sliding contour.
    pub interface_count: usize,
    pub contour_radius: f64,
    pub rotor_surface_radius: f64,
    pub stator_bore_radius: f64,
    /// Rotor nodes on the rotor surface ring, ordered by angle.
    pub rotor_surface: Vec<usize>,
    /// Stator nodes on the bore ring, ordered by angle.
    pub stator_bore: Vec<usize>,
    pub magnets: Vec<MagnetPlacement>,
    pub refinement: u32,
    /// Applied rotor displacement; `None` for the concentric mesh.
    pub eccentricity: Option<EccentricityState>,
}

impl CoupledMesh {
    pub fn domain(&self, domain: Domain) -> &DomainMesh {
        match domain {
            Domain::Stator => &self.stator,
            Domain::Rotor => &self.rotor,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.stator.triangles.len() + self.rotor.triangles.len()
    }

    pub fn node_count(&self) -> usize {
        self.stator.nodes.len() + self.rotor.nodes.len()
    }

    /// Length of one contour segment.
    pub fn interface_segment(&self) -> f64 {
        2.0 * self.contour_radius * (PI / self.interface_count as f64).sin()
    }

    /// Plain-text export (see `docs/formats.md`).
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# pmsm-uq mesh v1")?;
        writeln!(w, "interface_count {}", self.interface_count)?;
        writeln!(w, "contour_radius {:.17e}", self.contour_radius)?;
        for d in [&self.stator, &self.rotor] {
            writeln!(w, "domain {}", d.domain)?;
            writeln!(w, "nodes {}", d.nodes.len())?;
            for (i, p) in d.nodes.iter().enumerate() {
                writeln!(w, "{i} {:.17e} {:.17e}", p[0], p[1])?;
            }
            writeln!(w, "triangles {}", d.triangles.len())?;
            for (i, (t, r)) in d.triangles.iter().zip(&d.regions).enumerate() {
                writeln!(w, "{i} {} {} {} {r}", t[0], t[1], t[2])?;
            }
            write_id_list(&mut w, "dirichlet", &d.dirichlet)?;
            write_id_list(&mut w, "interface", &d.interface)?;
        }
        Ok(())
    }
}

fn write_id_list<W: Write>(w: &mut W, name: &str, ids: &[usize]) -> std::io::Result<()> {
    write!(w, "{name} {}", ids.len())?;
    for id in ids {
        write!(w, " {id}")?;
    }
    writeln!(w)
}

/// Radial stack of rings with the cell-to-region map of each layer.
struct RingStack<F> {
    radii: Vec<f64>,
    /// Per radial layer (between ring `i` and `i + 1`): maps angular cell
    /// index to a region.
    layer_region: Vec<F>,
}

fn push_layers<F: Clone>(stack: &mut RingStack<F>, outer: f64, count: usize, region: F) {
    let inner = *stack.radii.last().expect("stack starts with a ring");
    for i in 1..=count {
        let r = if i == count {
            outer
        } else {
            inner + (outer - inner) * i as f64 / count as f64
        };
        stack.radii.push(r);
        stack.layer_region.push(region.clone());
    }
}

fn triangulate<F: Fn(usize) -> Region>(
    domain: Domain,
    stack: &RingStack<F>,
    m: usize,
) -> DomainMesh {
    let rings = stack.radii.len();
    let angles: Vec<(f64, f64)> = (0..m)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / m as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    let mut nodes = Vec::with_capacity(rings * m);
    for &r in &stack.radii {
        for &(c, s) in &angles {
            nodes.push([r * c, r * s]);
        }
    }
    let id = |i: usize, j: usize| i * m + j % m;
    let mut triangles = Vec::with_capacity(2 * (rings - 1) * m);
    let mut regions = Vec::with_capacity(2 * (rings - 1) * m);
    for (i, region_of) in stack.layer_region.iter().enumerate() {
        let r_mid = 0.5 * (stack.radii[i] + stack.radii[i + 1]);
        for j in 0..m {
            let (a, b, c, d) = (id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j));
            let region = region_of(j);
            if region.is_airgap() {
                let phi = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                let e = nodes.len();
                nodes.push([r_mid * phi.cos(), r_mid * phi.sin()]);
                triangles.extend([[b, a, e], [c, b, e], [d, c, e], [a, d, e]]);
                regions.extend([region; 4]);
            } else {
                triangles.push([a, d, c]);
                triangles.push([a, c, b]);
                regions.push(region);
                regions.push(region);
            }
        }
    }
    DomainMesh {
        domain,
        nodes,
        triangles,
        regions,
        dirichlet: Vec::new(),
        interface: Vec::new(),
        natural_boundary: Vec::new(),
    }
}

fn ring_nodes(ring: usize, m: usize) -> Vec<usize> {
    (ring * m..(ring + 1) * m).collect()
}

fn scaled(base: usize, refinement: u32) -> usize {
    (base * (3 + refinement as usize)).div_ceil(3)
}

/// Contour nodes per slot pitch at a refinement level.
pub fn nodes_per_slot_pitch(refinement: u32) -> usize {
    3 * (3 + refinement as usize)
}

/// Builds the two-domain mesh of the machine at the given refinement level.
///
/// The contour carries `M = Q * 3 (3 + refinement)` nodes, so `M` is a
/// multiple of both 3 and the slot count, and one 3-node time step is an
/// exact node-to-node rotation.
///
/// Magnet arcs snap to the contour grid, keeping every magnet centred on its
/// pole (see [`realized_pole_arc`]).
pub fn build_mesh(spec: &MachineSpec, refinement: u32) -> Result<CoupledMesh> {
    spec.validate()?;
    let g = &spec.geometry;
    if !(g.shaft_radius > 0.0) {
        return Err(Error::Mesh("the rotor needs a shaft radius > 0".into()));
    }
    let q_slots = spec.slot_count();
    let n_pitch = nodes_per_slot_pitch(refinement);
    let m = q_slots * n_pitch;
    let n_slot =
        ((spec.slots.opening_fraction * n_pitch as f64).round() as usize).clamp(1, n_pitch - 1);
    let slot_offset = (n_pitch - n_slot) / 2;
    let poles = spec.pole_count();
    if !m.is_multiple_of(poles) {
        return Err(Error::Mesh(format!(
            "{m} contour nodes cannot be split over {poles} poles"
        )));
    }
    let n_pole = m / poles;
    let n_mag = magnet_cells(spec.magnets.pole_arc_fraction, n_pole);
    let mag_offset = (n_pole - n_mag) / 2;
    let r_c = spec.contour_radius();
    let r_mag_in = g.rotor_radius - spec.magnets.thickness;
    let slot_mid = g.stator_inner_radius + 0.5 * spec.slots.depth;
    let slot_out = g.stator_inner_radius + spec.slots.depth;

    #[derive(Clone, Copy)]
    enum Layer {
        Band,
        Slot(CoilLayer),
        Yoke,
        Magnets,
    }

    let stator_region = move |layer: Layer| {
        move |j: usize| match layer {
            Layer::Band => Region::AirgapStator,
            Layer::Slot(cl) => {
                let local = j % n_pitch;
                if (slot_offset..slot_offset + n_slot).contains(&local) {
                    Region::Coil {
                        slot: j / n_pitch,
                        layer: cl,
                    }
                } else {
                    Region::StatorIron
                }
            }
            _ => Region::StatorIron,
        }
    };
    let rotor_region = move |layer: Layer| {
        move |j: usize| match layer {
            Layer::Band => Region::AirgapRotor,
            Layer::Magnets => {
                let local = j % n_pole;
                if (mag_offset..mag_offset + n_mag).contains(&local) {
                    Region::Magnet(j / n_pole)
                } else {
                    Region::Air
                }
            }
            _ => Region::RotorIron,
        }
    };

    let mut st = RingStack {
        radii: vec![r_c],
        layer_region: Vec::new(),
    };
    push_layers(
        &mut st,
        g.stator_inner_radius,
        scaled(2, refinement),
        stator_region(Layer::Band),
    );
    let bore_ring = st.radii.len() - 1;
    push_layers(
        &mut st,
        slot_mid,
        scaled(4, refinement),
        stator_region(Layer::Slot(CoilLayer::Top)),
    );
    push_layers(
        &mut st,
        slot_out,
        scaled(4, refinement),
        stator_region(Layer::Slot(CoilLayer::Bottom)),
    );
    push_layers(
        &mut st,
        g.stator_outer_radius,
        scaled(4, refinement),
        stator_region(Layer::Yoke),
    );

    let mut rt = RingStack {
        radii: vec![g.shaft_radius],
        layer_region: Vec::new(),
    };
    push_layers(
        &mut rt,
        r_mag_in,
        scaled(5, refinement),
        rotor_region(Layer::Yoke),
    );
    push_layers(
        &mut rt,
        g.rotor_radius,
        scaled(4, refinement),
        rotor_region(Layer::Magnets),
    );
    let surface_ring = rt.radii.len() - 1;
    push_layers(
        &mut rt,
        r_c,
        scaled(3, refinement),
        rotor_region(Layer::Band),
    );

    let mut stator = triangulate(Domain::Stator, &st, m);
    stator.interface = ring_nodes(0, m);
    stator.dirichlet = ring_nodes(st.radii.len() - 1, m);
    let mut rotor = triangulate(Domain::Rotor, &rt, m);
    rotor.interface = ring_nodes(rt.radii.len() - 1, m);
    rotor.dirichlet = ring_nodes(0, m);
    stator.check_orientation()?;
    rotor.check_orientation()?;

    let magnets = (0..poles)
        .map(|k| MagnetPlacement {
            center_angle: 2.0 * PI * ((k * n_pole + mag_offset) as f64 + 0.5 * n_mag as f64)
                / m as f64,
            polarity: if k % 2 == 0 { 1.0 } else { -1.0 },
        })
        .collect();

    Ok(CoupledMesh {
        rotor_surface: ring_nodes(surface_ring, m),
        stator_bore: ring_nodes(bore_ring, m),
        stator,
        rotor,
        interface_count: m,
        contour_radius: r_c,
        rotor_surface_radius: g.rotor_radius,
        stator_bore_radius: g.stator_inner_radius,
        magnets,
        refinement,
        eccentricity: None,
    })
}

/// Air-filled coaxial annulus split by a sliding contour, used to verify the
/// coupled solver against the field of a line current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusGeometry {
    pub inner_radius: f64,
    pub contour_radius: f64,
    pub outer_radius: f64,
}

impl Default for AnnulusGeometry {
    fn default() -> Self {
        AnnulusGeometry {
            inner_radius: 0.01,
            contour_radius: 0.03,
            outer_radius: 0.05,
        }
    }
}

/// Annulus mesh: Dirichlet on the outer circle, natural condition on the
/// inner circle, `M = 48 (refinement + 1)` contour nodes.
pub fn build_annulus_mesh(geom: AnnulusGeometry, refinement: u32) -> Result<CoupledMesh> {
    let AnnulusGeometry {
        inner_radius,
        contour_radius,
        outer_radius,
    } = geom;
    if !(0.0 < inner_radius && inner_radius < contour_radius && contour_radius < outer_radius) {
        return Err(Error::Geometry(
            "annulus radii must be increasing and positive".into(),
        ));
    }
    let m = 48 * (refinement as usize + 1);
    let layers = 4 * (refinement as usize + 1);
    let mut rt = RingStack {
        radii: vec![inner_radius],
        layer_region: Vec::new(),
    };
    push_layers(&mut rt, contour_radius, layers, |_: usize| {
        Region::AirgapRotor
    });
    let mut st = RingStack {
        radii: vec![contour_radius],
        layer_region: Vec::new(),
    };
    push_layers(&mut st, outer_radius, layers, |_: usize| {
        Region::AirgapStator
    });
    let mut stator = triangulate(Domain::Stator, &st, m);
    stator.interface = ring_nodes(0, m);
    stator.dirichlet = ring_nodes(st.radii.len() - 1, m);
    let mut rotor = triangulate(Domain::Rotor, &rt, m);
    rotor.interface = ring_nodes(rt.radii.len() - 1, m);
    rotor.natural_boundary = ring_nodes(0, m);
    Ok(CoupledMesh {
        rotor_surface: ring_nodes(0, m),
        stator_bore: ring_nodes(st.radii.len() - 1, m),
        stator,
        rotor,
        interface_count: m,
        contour_radius,
        rotor_surface_radius: inner_radius,
        stator_bore_radius: outer_radius,
        magnets: Vec::new(),
        refinement,
        eccentricity: None,
    })
}

/// Contour cells covered by one magnet: the count closest to
/// `fraction * n_pole` with the same parity as `n_pole`.
fn magnet_cells(fraction: f64, n_pole: usize) -> usize {
    let gap = ((1.0 - fraction) * n_pole as f64 / 2.0).round() as usize;
    n_pole
        .saturating_sub(2 * gap)
        .max(2 - n_pole % 2)
        .min(n_pole)
}

/// Pole arc fraction actually meshed at `refinement`.
pub fn realized_pole_arc(spec: &MachineSpec, refinement: u32) -> f64 {
    let n_pole = spec.slot_count() * nodes_per_slot_pitch(refinement) / spec.pole_count();
    magnet_cells(spec.magnets.pole_arc_fraction, n_pole) as f64 / n_pole as f64
}
