use std::f64::consts::PI;

use proptest::prelude::*;

use pmsm_uq::assembly::element_stiffness;
use pmsm_uq::eccentricity::EccentricityState;
use pmsm_uq::spectrum::spectrum_and_thd;
use pmsm_uq::uq::{
    draw_sample, gauss_hermite, gauss_legendre, sample_moments, sobol_indices, RandomInputModel,
};

fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    prop::array::uniform3(prop::array::uniform2(-1.0..1.0f64)).prop_filter_map(
        "degenerate or clockwise",
        |p| {
            let area = 0.5
                * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                    - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
            if area > 1e-3 {
                Some(p)
            } else if area < -1e-3 {
                Some([p[0], p[2], p[1]])
            } else {
                None
            }
        },
    )
}

fn double_factorial(n: i64) -> f64 {
    (1..=n).rev().step_by(2).map(|k| k as f64).product()
}

proptest! {
    #[test]
    fn element_matrix_is_a_symmetric_psd_laplacian(p in triangle(), nu in 0.1..1e6f64, l in 1e-3..1.0f64) {
        let k = element_stiffness(p, nu, l).unwrap();
        let scale = k.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, row) in k.iter().enumerate() {
            prop_assert!(row.iter().sum::<f64>().abs() <= 1e-12 * scale);
            prop_assert!(row[i] >= 0.0);
            for (j, v) in row.iter().enumerate() {
                prop_assert_eq!(*v, k[j][i]);
            }
        }
        // energy of any vector is non-negative
        let x = [1.0, -2.0, 0.5];
        let e: f64 = (0..3).map(|i| (0..3).map(|j| x[i] * k[i][j] * x[j]).sum::<f64>()).sum();
        prop_assert!(e >= -1e-12 * scale);
    }

    #[test]
    fn element_matrix_ignores_rigid_motion(p in triangle(), angle in 0.0..2.0 * PI, dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let (s, c) = angle.sin_cos();
        let q = p.map(|[x, y]| [c * x - s * y + dx, s * x + c * y + dy]);
        let a = element_stiffness(p, 1.0, 1.0).unwrap();
        let b = element_stiffness(q, 1.0, 1.0).unwrap();
        let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((a[i][j] - b[i][j]).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn element_matrix_scales_with_nu_over_length(p in triangle(), nu in 0.1..100.0f64, l in 1e-3..1.0f64) {
        let unit = element_stiffness(p, 1.0, 1.0).unwrap();
        let k = element_stiffness(p, nu, l).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((k[i][j] - nu / l * unit[i][j]).abs() <= 1e-12 * (nu / l) * unit[i][i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn spectrum_recovers_harmonic_amplitudes(
        mean in 0.5..10.0f64,
        amps in prop::collection::vec(0.0..1.0f64, 1..6),
        phases in prop::collection::vec(0.0..2.0 * PI, 6),
    ) {
        let n = 64;
        let signal: Vec<f64> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                mean + amps.iter().enumerate().map(|(h, a)| a * ((h + 1) as f64 * t + phases[h]).cos()).sum::<f64>()
            })
            .collect();
        let s = spectrum_and_thd(&signal, None).unwrap();
        prop_assert!((s.mean - mean).abs() <= 1e-12 * mean);
        for (h, a) in amps.iter().enumerate() {
            prop_assert!((s.amplitude(h + 1) - a).abs() <= 1e-12 * mean);
        }
        let thd = amps.iter().sum::<f64>() / mean;
        prop_assert!((s.thd - thd).abs() <= 1e-11 * thd.max(1e-3));
        let power = signal.iter().map(|x| x * x).sum::<f64>() / n as f64;
        prop_assert!((s.power() - power).abs() <= 1e-12 * power);
    }

    #[test]
    fn hermite_rule_integrates_normal_moments(n in 1usize..12) {
        let rule = gauss_hermite(n).unwrap();
        for degree in 0..2 * n {
            let exact = if degree % 2 == 1 { 0.0 } else { double_factorial(degree as i64 - 1) };
            let got = rule.integrate(|x| x.powi(degree as i32));
            // odd moments cancel terms of size E|x|^degree
            let scale = rule.integrate(|x| x.abs().powi(degree as i32));
            prop_assert!((got - exact).abs() <= 1e-12 * scale, "n {} degree {}: {} vs {}", n, degree, got, exact);
        }
    }

    #[test]
    fn legendre_rule_integrates_uniform_moments(n in 1usize..12) {
        // probability weight on [-1, 1]
        let rule = gauss_legendre(n).unwrap();
        for degree in 0..2 * n {
            let exact = if degree % 2 == 1 { 0.0 } else { 1.0 / (degree as f64 + 1.0) };
            let got = rule.integrate(|x| x.powi(degree as i32));
            prop_assert!((got - exact).abs() <= 1e-13, "n {} degree {}: {} vs {}", n, degree, got, exact);
        }
    }

    #[test]
    fn sobol_indices_ignore_affine_output_maps(
        data in prop::collection::vec(-1.0..1.0f64, 64),
        a in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64],
        b in -1e3..1e3f64,
    ) {
        let (f_a, rest) = data.split_at(16);
        let (f_b, rest) = rest.split_at(16);
        let (ab0, ab1) = rest.split_at(16);
        let map = |x: &[f64]| x.iter().map(|v| a * v + b).collect::<Vec<_>>();
        let s = sobol_indices(f_a, f_b, [ab0, ab1]).unwrap();
        let t = sobol_indices(&map(f_a), &map(f_b), [&map(ab0), &map(ab1)]).unwrap();
        for i in 0..2 {
            prop_assert!((s.first_order[i] - t.first_order[i]).abs() <= 1e-8);
            prop_assert!((s.total[i] - t.total[i]).abs() <= 1e-8);
        }
    }

    #[test]
    fn draws_are_admissible_and_reproducible(seed in any::<u64>(), id in 0usize..100_000) {
        let model = RandomInputModel::with_default_sigma(1e-3).unwrap();
        let (s, _) = draw_sample(&model, seed, id);
        prop_assert!(model.admissible(&s));
        prop_assert!((0.0..PI).contains(&s.theta0));
        prop_assert!(s.r0.abs() < model.bound());
        prop_assert_eq!(draw_sample(&model, seed, id).0, s);
    }

    #[test]
    fn airgap_profile_follows_the_cosine_law(
        eps in -0.9..0.9f64,
        theta0 in 0.0..PI,
        rotor in 0.0..2.0 * PI,
        x in 0.0..2.0 * PI,
    ) {
        let gap = 1e-3;
        let e = EccentricityState::from_eccentricity(eps, theta0, gap).unwrap();
        let d = e.airgap(x, rotor);
        prop_assert!(d > 0.0);
        prop_assert!((d + e.airgap(x + PI, rotor) - 2.0 * gap).abs() <= 1e-15);
        prop_assert!((e.airgap(rotor + theta0, rotor) - gap * (1.0 - eps)).abs() <= 1e-15);
        prop_assert!((e.airgap(x + 2.0 * PI, rotor + 2.0 * PI) - d).abs() <= 1e-15);
    }

    #[test]
    fn sample_variance_is_shift_invariant(x in prop::collection::vec(-1.0..1.0f64, 2..50), c in -1e3..1e3f64) {
        let (m, v) = sample_moments(&x);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let (ms, vs) = sample_moments(&shifted);
        prop_assert!((ms - m - c).abs() <= 1e-12 * c.abs().max(1.0));
        prop_assert!((vs - v).abs() <= 1e-9 * v.max(1e-6));
    }
}
