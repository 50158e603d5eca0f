mod common;

use std::f64::consts::PI;

use pmsm_uq::assembly::line_current_load;
use pmsm_uq::coupling::{build_projectors, solve_monolithic, solve_saddle_direct, CoupledSolver};
use pmsm_uq::machine::MachineSpec;
use pmsm_uq::simulation::{PeriodKind, PreparedMachine, RunOptions};
use pmsm_uq::torque::{Differencing, TorqueTrace};
use pmsm_uq::uq::{MachineModel, RandomInputModel, Sample};

use common::{annulus, annulus_error, max_abs};

#[test]
fn annulus_error_shrinks_with_refinement() {
    let errors: Vec<f64> = (0..3)
        .map(|r| {
            let (mesh, s, rot) = annulus(r);
            let f_r = line_current_load(&mesh.rotor, 1.0);
            let f_s = vec![0.0; s.node_count()];
            let solver = CoupledSolver::from_systems(s, rot).unwrap();
            let sol = solver
                .solve_step(&build_projectors(&mesh, 1).unwrap(), &f_s, &f_r)
                .unwrap();
            annulus_error(&mesh, 1.0, &sol.stator, &sol.rotor)
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[2] < 0.01, "{errors:?}");
}

#[test]
fn three_annulus_solvers_agree() {
    let (mesh, s, r) = annulus(1);
    let f_r = line_current_load(&mesh.rotor, 2.0);
    let f_s = vec![0.0; s.node_count()];
    let solver = CoupledSolver::from_systems(s.clone(), r.clone()).unwrap();
    let c = build_projectors(&mesh, 11).unwrap();
    let condensed = solver.solve_step(&c, &f_s, &f_r).unwrap();
    let direct = solve_saddle_direct(&s, &r, &c, &f_s, &f_r).unwrap();
    let (g_s, g_r) = solve_monolithic(&s, &r, &c, &f_s, &f_r).unwrap();
    let scale = max_abs(&g_s).max(max_abs(&g_r));
    let all = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<_>>();
    let glued = all(&g_s, &g_r);
    for x in [
        all(&condensed.stator, &condensed.rotor),
        all(&direct.stator, &direct.rotor),
    ] {
        for (a, b) in x.iter().zip(&glued) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
    }
    assert!(c.constraint_residual(&condensed.stator, &condensed.rotor) <= 1e-12 * scale);
}

#[test]
fn annulus_rotor_field_is_invariant_under_node_rotation() {
    let (mesh, s, r) = annulus(0);
    let f_r = line_current_load(&mesh.rotor, 1.0);
    let f_s = vec![0.0; s.node_count()];
    let solver = CoupledSolver::from_systems(s, r).unwrap();
    let a = solver
        .solve_step(&build_projectors(&mesh, 0).unwrap(), &f_s, &f_r)
        .unwrap();
    let b = solver
        .solve_step(&build_projectors(&mesh, 5).unwrap(), &f_s, &f_r)
        .unwrap();
    let scale = max_abs(&a.rotor);
    for (x, y) in a.rotor.iter().zip(&b.rotor) {
        assert!((x - y).abs() <= 1e-10 * scale);
    }
}

fn nominal() -> PreparedMachine {
    PreparedMachine::new(&MachineSpec::default(), 0).unwrap()
}

#[test]
fn magnet_field_energy_repeats_every_slot_pitch() {
    let m = nominal();
    let pitch = m.steps_per_revolution() / m.spec().slot_count();
    assert!(pitch >= 1);
    for k in [0, 1, 2] {
        let w0 = m.magnetic_energy(&m.solve(k, [0.0; 3]).unwrap());
        let w1 = m.magnetic_energy(&m.solve(k + pitch, [0.0; 3]).unwrap());
        let w2 = m.magnetic_energy(&m.solve(k + 7 * pitch, [0.0; 3]).unwrap());
        assert!((w0 - w1).abs() <= 1e-10 * w0.abs(), "{w0} {w1}");
        assert!((w0 - w2).abs() <= 1e-10 * w0.abs(), "{w0} {w2}");
    }
}

#[test]
fn concentric_torque_repeats_every_electrical_period() {
    let m = nominal();
    let run = m.run_period(&m.drive(), &RunOptions::default()).unwrap();
    let trace = TorqueTrace::from_run(
        &run,
        m.spec().winding.dc_phase_resistance,
        Differencing::Periodic,
    )
    .unwrap();
    let p = m.steps_per_period(PeriodKind::Electrical);
    assert_eq!(trace.len(), p * m.spec().pole_pairs);
    let peak = max_abs(&trace.torque);
    for k in 0..trace.len() - p {
        assert!(
            (trace.torque[k] - trace.torque[k + p]).abs() <= 1e-8 * peak,
            "step {k}"
        );
    }
    let electrical = m
        .run_period(
            &m.drive(),
            &RunOptions {
                period: PeriodKind::Electrical,
                ..Default::default()
            },
        )
        .unwrap();
    let e_trace = TorqueTrace::from_run(
        &electrical,
        m.spec().winding.dc_phase_resistance,
        Differencing::Periodic,
    )
    .unwrap();
    let (a, b) = (trace.mean_torque().unwrap(), e_trace.mean_torque().unwrap());
    assert!((a - b).abs() <= 1e-8 * a.abs(), "{a} {b}");
}

#[test]
fn locked_rotor_produces_no_mean_torque() {
    let m = nominal();
    let options = RunOptions {
        locked_rotor: true,
        period: PeriodKind::Electrical,
        ..Default::default()
    };
    let locked = m.run_period(&m.drive(), &options).unwrap();
    let trace = TorqueTrace::from_run(
        &locked,
        m.spec().winding.dc_phase_resistance,
        Differencing::Periodic,
    )
    .unwrap();
    let rated = {
        let run = m.run_period(&m.drive(), &RunOptions::default()).unwrap();
        TorqueTrace::from_run(
            &run,
            m.spec().winding.dc_phase_resistance,
            Differencing::Periodic,
        )
        .unwrap()
        .mean_torque()
        .unwrap()
    };
    // all electrical input is dissipated or stored: the energy-balance
    // torque of a rotor that cannot move vanishes on average
    let mean = trace.mean_torque().unwrap();
    assert!(mean.abs() <= 1e-9 * rated, "{mean} vs {rated}");
    assert!(trace.mean_energy_rate().abs() <= 1e-9 * trace.mean_electrical_power().abs());
}

#[test]
fn opposite_displacement_directions_are_equivalent() {
    let m = nominal();
    let inputs = RandomInputModel::with_default_sigma(m.spec().airgap()).unwrap();
    let model = MachineModel::new(m, inputs, None);
    let r0 = 1.5 * inputs.sigma_r0;
    let a = model.summary(&Sample { r0, theta0: 0.4 }).unwrap();
    let b = model
        .summary(&Sample {
            r0,
            theta0: 0.4 + PI,
        })
        .unwrap();
    let c = model
        .summary(&Sample {
            r0: -r0,
            theta0: 0.4,
        })
        .unwrap();
    for other in [b, c] {
        assert!((a.mean_torque - other.mean_torque).abs() <= 1e-9 * a.mean_torque);
        assert!((a.thd - other.thd).abs() <= 1e-6 * a.thd);
    }
    let nominal = model
        .summary(&Sample {
            r0: 0.0,
            theta0: 0.0,
        })
        .unwrap();
    assert!(a.thd > nominal.thd);
}
