//! Variance-based sensitivity indices by the pick-freeze (Saltelli) design.
//!
//! Base matrices `A` and `B` come from the Monte Carlo sample streams
//! `0..N` and `N..2N`, so a preceding Monte Carlo run with at least `2N`
//! samples and the same seed has already evaluated both. `AB_i` is `A` with
//! column `i` taken from `B`.
//!
//! With two inputs the first-order index of one input also equals one minus
//! the total index of the other. Both estimates are formed from the same
//! evaluations and combined with inverse-variance weights; the raw Saltelli
//! values are kept alongside.

use rayon::prelude::*;
use serde::Serialize;

use super::estimate::{draw_sample, sample_moments, Method, Simulator, UqResult};
use super::input::{RandomInputModel, Sample};
use crate::error::{Error, Result};

/// Inputs in index order.
pub const INPUTS: [&str; 2] = ["r0", "theta0"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolIndices {
    /// Best first-order estimate for `[R0, theta0]`.
    pub first_order: [f64; 2],
    pub total: [f64; 2],
    /// `mean(f_B (f_AB_i - f_A)) / V`.
    pub saltelli_first_order: [f64; 2],
    /// `1 - S_T` of the other input.
    pub complement_first_order: [f64; 2],
}

impl SobolIndices {
    /// Exact indices from a variance decomposition `V = V_r0 + V_theta0 +
    /// V_interaction`.
    pub fn from_variances(total_variance: f64, main_effects: [f64; 2]) -> Self {
        let s = main_effects.map(|v| v / total_variance);
        let interaction = 1.0 - s[0] - s[1];
        let total = [s[0] + interaction, s[1] + interaction];
        SobolIndices {
            first_order: s,
            total,
            saltelli_first_order: s,
            complement_first_order: [1.0 - total[1], 1.0 - total[0]],
        }
    }

    /// Indices clipped to `[-tol, 1 + tol]` for reporting.
    pub fn clipped(&self, tol: f64) -> Self {
        let c = |x: [f64; 2]| x.map(|v| v.clamp(-tol, 1.0 + tol));
        SobolIndices {
            first_order: c(self.first_order),
            total: c(self.total),
            saltelli_first_order: c(self.saltelli_first_order),
            complement_first_order: c(self.complement_first_order),
        }
    }
}

/// Evaluations of the pick-freeze design.
#[derive(Debug, Clone)]
pub struct SobolDesign {
    pub a: Vec<Sample>,
    pub b: Vec<Sample>,
    /// `ab[i][j]`: row `j` of `AB_i`.
    pub ab: [Vec<Sample>; 2],
}

impl SobolDesign {
    pub fn new(model: &RandomInputModel, n_base: usize, seed: u64) -> Result<Self> {
        if n_base < 2 {
            return Err(Error::Uq(format!(
                "Sobol design needs at least 2 base samples, got {n_base}"
            )));
        }
        model.validate()?;
        let a: Vec<Sample> = (0..n_base).map(|j| draw_sample(model, seed, j).0).collect();
        let b: Vec<Sample> = (0..n_base)
            .map(|j| draw_sample(model, seed, n_base + j).0)
            .collect();
        let ab = [
            a.iter()
                .zip(&b)
                .map(|(a, b)| Sample {
                    r0: b.r0,
                    theta0: a.theta0,
                })
                .collect(),
            a.iter()
                .zip(&b)
                .map(|(a, b)| Sample {
                    r0: a.r0,
                    theta0: b.theta0,
                })
                .collect(),
        ];
        Ok(SobolDesign { a, b, ab })
    }

    /// All design points in evaluation order: `A`, `B`, `AB_0`, `AB_1`.
    pub fn points(&self) -> Vec<Sample> {
        [&self.a, &self.b, &self.ab[0], &self.ab[1]]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }
}

/// Indices from the design outputs of one quantity.
pub fn sobol_indices(f_a: &[f64], f_b: &[f64], f_ab: [&[f64]; 2]) -> Result<SobolIndices> {
    let n = f_a.len();
    if f_b.len() != n || f_ab.iter().any(|f| f.len() != n) || n < 2 {
        return Err(Error::Shape("Sobol design outputs differ in length".into()));
    }
    let all: Vec<f64> = f_a.iter().chain(f_b).copied().collect();
    let (f0, v) = sample_moments(&all);
    if !(v > 0.0) {
        return Err(Error::ZeroVariance);
    }
    // Centring leaves the estimators' expectations unchanged and removes the
    // `f0^2` term from their variance.
    let center = |f: &[f64]| -> Vec<f64> { f.iter().map(|x| x - f0).collect() };
    let (f_a, f_b) = (center(f_a), center(f_b));
    let f_ab = [center(f_ab[0]), center(f_ab[1])];
    let mean_var = |terms: &[f64]| {
        let (m, var) = sample_moments(terms);
        (m / v, var / (n as f64 * v * v))
    };
    let mut saltelli = [(0.0, 0.0); 2];
    let mut total = [(0.0, 0.0); 2];
    for i in 0..2 {
        let first: Vec<f64> = (0..n).map(|j| f_b[j] * (f_ab[i][j] - f_a[j])).collect();
        let jansen: Vec<f64> = (0..n)
            .map(|j| 0.5 * (f_a[j] - f_ab[i][j]).powi(2))
            .collect();
        saltelli[i] = mean_var(&first);
        total[i] = mean_var(&jansen);
    }
    let combined = |i: usize| {
        let (s1, v1) = saltelli[i];
        let (s2, v2) = total[1 - i];
        let s2 = 1.0 - s2;
        match (v1 > 0.0, v2 > 0.0) {
            (_, false) => s2,
            (false, true) => s1,
            (true, true) => (s1 / v1 + s2 / v2) / (1.0 / v1 + 1.0 / v2),
        }
    };
    Ok(SobolIndices {
        first_order: [combined(0), combined(1)],
        total: [total[0].0, total[1].0],
        saltelli_first_order: [saltelli[0].0, saltelli[1].0],
        complement_first_order: [1.0 - total[1].0, 1.0 - total[0].0],
    })
}

#[derive(Debug, Clone)]
pub struct SobolRun {
    pub design: SobolDesign,
    /// Outputs at [`SobolDesign::points`], in the same order.
    pub values: Vec<Vec<f64>>,
    pub results: Vec<UqResult>,
}

impl SobolRun {
    pub fn result(&self, quantity: &str) -> Option<&UqResult> {
        self.results.iter().find(|r| r.quantity == quantity)
    }
}

/// Sensitivity indices of every simulator output with `n_base` rows per
/// base matrix (`4 n_base` evaluations, fewer with a caching simulator).
pub fn sobol_sensitivity(
    model: &RandomInputModel,
    sim: &dyn Simulator,
    n_base: usize,
    seed: u64,
) -> Result<SobolRun> {
    let design = SobolDesign::new(model, n_base, seed)?;
    let points = design.points();
    let values: Vec<Result<Vec<f64>>> = points.par_iter().map(|s| sim.evaluate(s)).collect();
    let values: Vec<Vec<f64>> = values
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            v.map_err(|e| {
                Error::Uq(format!(
                    "Sobol design point {k} ({:?}) failed: {e}",
                    points[k]
                ))
            })
        })
        .collect::<Result<_>>()?;
    let names = sim.quantities();
    let n = n_base;
    let mut results = Vec::with_capacity(names.len());
    for (q, name) in names.iter().enumerate() {
        let col: Vec<f64> = values.iter().map(|v| v[q]).collect();
        let indices = sobol_indices(
            &col[..n],
            &col[n..2 * n],
            [&col[2 * n..3 * n], &col[3 * n..]],
        )?;
        let (mean, variance) = sample_moments(&col[..2 * n]);
        results.push(UqResult {
            quantity: name.clone(),
            method: Method::Saltelli,
            mean,
            variance,
            mc_error: Some((variance / (2 * n) as f64).sqrt()),
            sensitivity: Some(indices),
            evaluations: values.len(),
            rejected: 0,
            failures: 0,
        });
    }
    Ok(SobolRun {
        design,
        values,
        results,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::uq::estimate::scalar_simulator;

    fn model() -> RandomInputModel {
        RandomInputModel::with_default_sigma(1e-3).unwrap()
    }

    #[test]
    fn single_input_dependence() {
        let sim = scalar_simulator("f", |s| s.r0);
        let s = sobol_sensitivity(&model(), &sim, 256, 4).unwrap().results[0]
            .sensitivity
            .unwrap();
        assert!((s.first_order[0] - 1.0).abs() < 1e-12, "{:?}", s);
        assert!(s.first_order[1].abs() < 1e-12);
        assert!(s.total[1].abs() < 1e-12);
    }

    #[test]
    fn additive_function_matches_closed_form() {
        let m = model();
        let sigma = m.sigma_r0;
        let sim = scalar_simulator("f", move |s| 1e3 + s.r0 / sigma + s.theta0);
        let exact = 1.0 / (1.0 + PI * PI / 12.0);
        let s = sobol_sensitivity(&m, &sim, 4096, 11).unwrap().results[0]
            .sensitivity
            .unwrap();
        assert!((s.first_order[0] - exact).abs() < 0.05, "{s:?}");
        assert!((s.first_order[1] - (1.0 - exact)).abs() < 0.05);
        assert!((s.saltelli_first_order[0] - exact).abs() < 0.05);
    }

    #[test]
    fn design_reuses_monte_carlo_streams() {
        let m = model();
        let d = SobolDesign::new(&m, 8, 21).unwrap();
        for j in 0..8 {
            assert_eq!(d.a[j], draw_sample(&m, 21, j).0);
            assert_eq!(d.b[j], draw_sample(&m, 21, 8 + j).0);
            assert_eq!(d.ab[0][j].r0, d.b[j].r0);
            assert_eq!(d.ab[0][j].theta0, d.a[j].theta0);
        }
    }

    #[test]
    fn zero_variance_is_an_error() {
        let sim = scalar_simulator("c", |_| 1.0);
        assert!(matches!(
            sobol_sensitivity(&model(), &sim, 16, 0),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn exact_decomposition() {
        let s = SobolIndices::from_variances(2.0, [1.0, 0.5]);
        assert_eq!(s.first_order, [0.5, 0.25]);
        assert_eq!(s.total, [0.75, 0.5]);
        assert_eq!(s.clipped(0.0).first_order, [0.5, 0.25]);
    }
}
