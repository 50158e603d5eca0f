#![allow(dead_code)]

use std::f64::consts::PI;

use pmsm_uq::assembly::{assemble_stiffness, DomainSystem, Reluctivity};
use pmsm_uq::machine::MU0;
use pmsm_uq::mesh::{build_annulus_mesh, AnnulusGeometry, CoupledMesh, DomainMesh};

pub fn annulus_system(d: &DomainMesh) -> DomainSystem {
    let nu = Reluctivity::vacuum();
    DomainSystem {
        domain: d.domain,
        stiffness: assemble_stiffness(d, |r| nu.of(r), 1.0).unwrap(),
        fixed_source: vec![0.0; d.nodes.len()],
        winding: None,
        dirichlet: d.dirichlet.clone(),
        interface: d.interface.clone(),
    }
}

pub fn annulus(refinement: u32) -> (CoupledMesh, DomainSystem, DomainSystem) {
    let mesh = build_annulus_mesh(AnnulusGeometry::default(), refinement).unwrap();
    let s = annulus_system(&mesh.stator);
    let r = annulus_system(&mesh.rotor);
    (mesh, s, r)
}

/// Field of a line current `current` inside a grounded cylinder of radius
/// `outer`: `A_z(r) = -(mu0 I / 2 pi) ln(r / outer)`.
pub fn coaxial_potential(current: f64, outer: f64, p: [f64; 2]) -> f64 {
    let r = p[0].hypot(p[1]);
    -MU0 * current / (2.0 * PI) * (r / outer).ln()
}

/// Largest deviation from the closed form over all nodes of both domains,
/// relative to the largest closed-form value.
pub fn annulus_error(mesh: &CoupledMesh, current: f64, a_s: &[f64], a_r: &[f64]) -> f64 {
    let outer = AnnulusGeometry::default().outer_radius;
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for (d, a) in [(&mesh.stator, a_s), (&mesh.rotor, a_r)] {
        for (p, v) in d.nodes.iter().zip(a) {
            let exact = coaxial_potential(current, outer, *p);
            err = err.max((v - exact).abs());
            scale = scale.max(exact.abs());
        }
    }
    err / scale
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
