//! Coaxial annulus through the two-domain solver, compared with the closed
//! form `A_z(r) = -(mu0 I / 2 pi) ln(r / R_out)` and with a glued
//! single-mesh solve.
//!
//! cargo run --release --example annulus_oracle

use std::f64::consts::PI;

use pmsm_uq::assembly::{assemble_stiffness, line_current_load, DomainSystem, Reluctivity};
use pmsm_uq::coupling::{build_projectors, solve_monolithic, CoupledSolver};
use pmsm_uq::machine::MU0;
use pmsm_uq::mesh::{build_annulus_mesh, AnnulusGeometry, DomainMesh};

fn system(d: &DomainMesh) -> DomainSystem {
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

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geom = AnnulusGeometry::default();
    let current = 1.0;
    println!("refinement  contour_nodes  linf_rel_error  coupled_vs_glued");
    for refinement in 0..=3 {
        let mesh = build_annulus_mesh(geom, refinement)?;
        let (s, r) = (system(&mesh.stator), system(&mesh.rotor));
        let f_s = vec![0.0; s.node_count()];
        let f_r = line_current_load(&mesh.rotor, current);
        let coupling = build_projectors(&mesh, 1)?;
        let sol =
            CoupledSolver::from_systems(s.clone(), r.clone())?.solve_step(&coupling, &f_s, &f_r)?;
        let (g_s, g_r) = solve_monolithic(&s, &r, &coupling, &f_s, &f_r)?;

        let exact = |p: &[f64; 2]| {
            -MU0 * current / (2.0 * PI) * (p[0].hypot(p[1]) / geom.outer_radius).ln()
        };
        let mut err = 0.0f64;
        let mut peak = 0.0f64;
        let mut glued = 0.0f64;
        for (d, a, g) in [
            (&mesh.stator, &sol.stator, &g_s),
            (&mesh.rotor, &sol.rotor, &g_r),
        ] {
            for ((p, v), w) in d.nodes.iter().zip(a).zip(g) {
                err = err.max((v - exact(p)).abs());
                peak = peak.max(exact(p).abs());
                glued = glued.max((v - w).abs());
            }
        }
        println!(
            "{refinement:>10}  {:>13}  {:>14.3e}  {:>16.3e}",
            mesh.interface_count,
            err / peak,
            glued / peak
        );
    }
    Ok(())
}
