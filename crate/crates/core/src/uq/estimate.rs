//! Monte Carlo and tensor-grid collocation estimates of mean and variance.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::input::{RandomInputModel, Sample};
use super::quadrature::{gauss_hermite, gauss_legendre_on};
use super::sobol::SobolIndices;
use crate::error::{Error, Result};

/// Maps one input sample to one or more named output quantities.
pub trait Simulator: Sync {
    fn quantities(&self) -> Vec<String>;
    fn evaluate(&self, sample: &Sample) -> Result<Vec<f64>>;
}

/// Simulator backed by a closure, for analytic test functions.
pub struct FnSimulator<F> {
    names: Vec<String>,
    f: F,
}

impl<F: Fn(&Sample) -> Result<Vec<f64>> + Sync> FnSimulator<F> {
    pub fn new(names: &[&str], f: F) -> Self {
        FnSimulator {
            names: names.iter().map(|s| s.to_string()).collect(),
            f,
        }
    }
}

/// Single-output simulator from an infallible closure.
pub fn scalar_simulator(name: &str, f: impl Fn(&Sample) -> f64 + Sync) -> impl Simulator {
    FnSimulator::new(&[name], move |s: &Sample| Ok(vec![f(s)]))
}

impl<F: Fn(&Sample) -> Result<Vec<f64>> + Sync> Simulator for FnSimulator<F> {
    fn quantities(&self) -> Vec<String> {
        self.names.clone()
    }

    fn evaluate(&self, sample: &Sample) -> Result<Vec<f64>> {
        (self.f)(sample)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MonteCarlo,
    Collocation,
    Saltelli,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MonteCarlo => "mc",
            Method::Collocation => "gpc",
            Method::Saltelli => "saltelli",
        })
    }
}

/// Statistics of one output quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UqResult {
    pub quantity: String,
    pub method: Method,
    pub mean: f64,
    pub variance: f64,
    /// `sigma / sqrt(N)`; Monte Carlo only.
    pub mc_error: Option<f64>,
    pub sensitivity: Option<SobolIndices>,
    /// Simulator evaluations that entered the estimate.
    pub evaluations: usize,
    /// Draws rejected by the displacement truncation.
    pub rejected: usize,
    /// Failed simulator evaluations that were redrawn.
    pub failures: usize,
}

impl UqResult {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// One Monte Carlo sample with its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSample {
    pub id: usize,
    pub sample: Sample,
    pub weight: f64,
    pub values: Vec<f64>,
}

/// A simulator failure that was absorbed by redrawing.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub id: usize,
    pub sample: Sample,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct UqRun {
    pub samples: Vec<EvaluatedSample>,
    pub failures: Vec<SampleFailure>,
    pub results: Vec<UqResult>,
}

impl UqRun {
    pub fn result(&self, quantity: &str) -> Option<&UqResult> {
        self.results.iter().find(|r| r.quantity == quantity)
    }
}

/// Largest tolerated fraction of failed evaluations.
pub const MAX_FAILURE_RATE: f64 = 0.05;
/// Redraws of a single sample before the campaign is aborted.
const MAX_ATTEMPTS: usize = 16;

/// Random stream of sample `id`: independent of evaluation order, so the
/// sample set does not depend on the number of worker threads.
pub fn sample_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

/// First admissible draw of stream `id` (no simulator involved).
pub fn draw_sample(model: &RandomInputModel, seed: u64, id: usize) -> (Sample, usize) {
    model.draw(&mut sample_rng(seed, id))
}

struct Drawn {
    sample: Sample,
    values: Vec<f64>,
    rejected: usize,
    failures: Vec<SampleFailure>,
}

fn evaluate_stream(
    model: &RandomInputModel,
    sim: &dyn Simulator,
    seed: u64,
    id: usize,
) -> Result<Drawn> {
    let mut rng = sample_rng(seed, id);
    let mut rejected = 0;
    let mut failures = Vec::new();
    loop {
        let (sample, r) = model.draw(&mut rng);
        rejected += r;
        match sim.evaluate(&sample) {
            Ok(values) => {
                return Ok(Drawn {
                    sample,
                    values,
                    rejected,
                    failures,
                })
            }
            Err(e) => {
                failures.push(SampleFailure {
                    id,
                    sample,
                    message: e.to_string(),
                });
                if failures.len() >= MAX_ATTEMPTS {
                    return Err(Error::Uq(format!(
                        "sample {id} failed {MAX_ATTEMPTS} times in a row, last: {e}"
                    )));
                }
            }
        }
    }
}

fn check_width(names: &[String], values: &[f64]) -> Result<()> {
    if names.len() != values.len() {
        return Err(Error::Shape(format!(
            "simulator declared {} quantities but returned {}",
            names.len(),
            values.len()
        )));
    }
    Ok(())
}

/// Equal-weight Monte Carlo estimate over `n` samples. Evaluations run on
/// the current rayon pool; results are collected in sample order.
pub fn mc_estimate(
    model: &RandomInputModel,
    sim: &dyn Simulator,
    n: usize,
    seed: u64,
) -> Result<UqRun> {
    if n < 2 {
        return Err(Error::Uq(format!(
            "Monte Carlo needs at least 2 samples, got {n}"
        )));
    }
    model.validate()?;
    let drawn: Vec<Result<Drawn>> = (0..n)
        .into_par_iter()
        .map(|id| evaluate_stream(model, sim, seed, id))
        .collect();
    let drawn: Vec<Drawn> = drawn.into_iter().collect::<Result<_>>()?;
    let names = sim.quantities();
    let failures: Vec<SampleFailure> = drawn
        .iter()
        .flat_map(|d| d.failures.iter().cloned())
        .collect();
    let rate = failures.len() as f64 / (n + failures.len()) as f64;
    if rate > MAX_FAILURE_RATE {
        return Err(Error::Uq(format!(
            "{} of {} evaluations failed ({:.1}% > {:.0}%)",
            failures.len(),
            n + failures.len(),
            100.0 * rate,
            100.0 * MAX_FAILURE_RATE
        )));
    }
    let rejected = drawn.iter().map(|d| d.rejected).sum();
    let weight = 1.0 / n as f64;
    let samples: Vec<EvaluatedSample> = drawn
        .into_iter()
        .enumerate()
        .map(|(id, d)| EvaluatedSample {
            id,
            sample: d.sample,
            weight,
            values: d.values,
        })
        .collect();
    for s in &samples {
        check_width(&names, &s.values)?;
    }
    let results = names
        .iter()
        .enumerate()
        .map(|(q, name)| {
            let x: Vec<f64> = samples.iter().map(|s| s.values[q]).collect();
            let (mean, variance) = sample_moments(&x);
            UqResult {
                quantity: name.clone(),
                method: Method::MonteCarlo,
                mean,
                variance,
                mc_error: Some((variance / n as f64).sqrt()),
                sensitivity: None,
                evaluations: n,
                rejected,
                failures: failures.len(),
            }
        })
        .collect();
    Ok(UqRun {
        samples,
        failures,
        results,
    })
}

/// Mean and unbiased (1 / (N - 1)) variance.
pub fn sample_moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let variance = if x.len() > 1 {
        x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, variance)
}

/// Tensor grid of Gauss-Hermite (R0) and Gauss-Legendre (theta0) nodes.
/// Sample `i * n + j` pairs the `i`-th R0 node with the `j`-th theta0 node.
pub fn collocation_grid(
    model: &RandomInputModel,
    nodes_per_dim: usize,
) -> Result<Vec<(Sample, f64)>> {
    model.validate()?;
    let h = gauss_hermite(nodes_per_dim)?.mapped(0.0, model.sigma_r0);
    let l = gauss_legendre_on(nodes_per_dim, 0.0, model.theta_max)?;
    if let Some(r) = h.nodes.iter().find(|r| r.abs() >= model.bound()) {
        return Err(Error::Uq(format!(
            "quadrature node R0 = {r:e} m reaches eccentricity {:.3}; lower sigma_r0 or the node count",
            r / model.mean_airgap
        )));
    }
    let mut grid = Vec::with_capacity(nodes_per_dim * nodes_per_dim);
    for (&r0, &wr) in h.nodes.iter().zip(&h.weights) {
        for (&theta0, &wt) in l.nodes.iter().zip(&l.weights) {
            grid.push((Sample { r0, theta0 }, wr * wt));
        }
    }
    Ok(grid)
}

/// Collocation estimate on the `nodes_per_dim^2` tensor grid. First-order
/// and total indices follow from the conditional means on the grid.
pub fn gpc_estimate(
    model: &RandomInputModel,
    sim: &dyn Simulator,
    nodes_per_dim: usize,
) -> Result<UqRun> {
    let grid = collocation_grid(model, nodes_per_dim)?;
    let values: Vec<Result<Vec<f64>>> = grid.par_iter().map(|(s, _)| sim.evaluate(s)).collect();
    let names = sim.quantities();
    let mut samples = Vec::with_capacity(grid.len());
    for (id, ((sample, weight), v)) in grid.iter().zip(values).enumerate() {
        let values =
            v.map_err(|e| Error::Uq(format!("collocation node {id} ({sample:?}) failed: {e}")))?;
        check_width(&names, &values)?;
        samples.push(EvaluatedSample {
            id,
            sample: *sample,
            weight: *weight,
            values,
        });
    }
    let n = nodes_per_dim;
    let results = names
        .iter()
        .enumerate()
        .map(|(q, name)| {
            let f = |i: usize, j: usize| samples[i * n + j].values[q];
            let w = |i: usize, j: usize| samples[i * n + j].weight;
            let mean: f64 = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| w(i, j) * f(i, j))
                .sum();
            let variance: f64 = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| w(i, j) * (f(i, j) - mean).powi(2))
                .sum();
            // marginal weights of the separate rules
            let wr: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w(i, j)).sum()).collect();
            let wt: Vec<f64> = (0..n).map(|j| (0..n).map(|i| w(i, j)).sum()).collect();
            let cond_r: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| wt[j] * f(i, j)).sum())
                .collect();
            let cond_t: Vec<f64> = (0..n)
                .map(|j| (0..n).map(|i| wr[i] * f(i, j)).sum())
                .collect();
            let v_r: f64 = (0..n).map(|i| wr[i] * (cond_r[i] - mean).powi(2)).sum();
            let v_t: f64 = (0..n).map(|j| wt[j] * (cond_t[j] - mean).powi(2)).sum();
            let sensitivity =
                (variance > 0.0).then(|| SobolIndices::from_variances(variance, [v_r, v_t]));
            UqResult {
                quantity: name.clone(),
                method: Method::Collocation,
                mean,
                variance: variance.max(0.0),
                mc_error: None,
                sensitivity,
                evaluations: samples.len(),
                rejected: 0,
                failures: 0,
            }
        })
        .collect();
    Ok(UqRun {
        samples,
        failures: Vec::new(),
        results,
    })
}

/// Agreement of a Monte Carlo and a collocation estimate of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodComparison {
    pub quantity: String,
    pub mean_difference: f64,
    pub mc_error: f64,
    /// Tolerance factor `k` in `|mu_MC - mu_gPC| <= k eps_MC`.
    pub k: f64,
    pub means_agree: bool,
    /// `sigma^2_MC / sigma^2_gPC`.
    pub variance_ratio: f64,
}

pub fn compare_methods(mc: &UqResult, gpc: &UqResult, k: f64) -> Result<MethodComparison> {
    if mc.quantity != gpc.quantity {
        return Err(Error::Uq(format!(
            "cannot compare {} with {}",
            mc.quantity, gpc.quantity
        )));
    }
    let mc_error = mc.mc_error.ok_or_else(|| {
        Error::Uq(format!(
            "{} result of {} has no Monte Carlo error",
            mc.method, mc.quantity
        ))
    })?;
    let mean_difference = (mc.mean - gpc.mean).abs();
    Ok(MethodComparison {
        quantity: mc.quantity.clone(),
        mean_difference,
        mc_error,
        k,
        means_agree: mean_difference <= k * mc_error,
        variance_ratio: if gpc.variance > 0.0 {
            mc.variance / gpc.variance
        } else if mc.variance == 0.0 {
            1.0
        } else {
            f64::INFINITY
        },
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    fn model() -> RandomInputModel {
        RandomInputModel::with_default_sigma(1e-3).unwrap()
    }

    #[test]
    fn constant_simulator_has_no_spread() {
        let sim = scalar_simulator("c", |_| 2.5);
        let r = mc_estimate(&model(), &sim, 50, 1).unwrap();
        let q = &r.results[0];
        assert_eq!((q.mean, q.variance, q.mc_error), (2.5, 0.0, Some(0.0)));
        let g = gpc_estimate(&model(), &sim, 5).unwrap();
        assert!((g.results[0].mean - 2.5).abs() < 1e-14);
        let c = compare_methods(q, &g.results[0], 3.0).unwrap();
        assert!(c.mean_difference < 1e-14);
    }

    #[test]
    fn weights_sum_to_one() {
        let g = collocation_grid(&model(), 5).unwrap();
        assert!((g.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        let sim = scalar_simulator("c", |_| 1.0);
        let r = mc_estimate(&model(), &sim, 37, 2).unwrap();
        assert!((r.samples.iter().map(|s| s.weight).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_node_grid() {
        let sim = scalar_simulator("f", |s| s.r0 + s.theta0.sin());
        let g = gpc_estimate(&model(), &sim, 1).unwrap();
        assert_eq!(g.samples.len(), 1);
        assert_eq!(g.samples[0].sample.r0, 0.0);
        assert!((g.samples[0].sample.theta0 - PI / 2.0).abs() < 1e-15);
        assert!((g.results[0].mean - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_moments_by_monte_carlo() {
        let sim = scalar_simulator("theta", |s| s.theta0);
        let r = mc_estimate(&model(), &sim, 3200, 5).unwrap();
        let q = &r.results[0];
        assert!((q.mean - PI / 2.0).abs() < 4.0 * q.mc_error.unwrap());
        assert!((q.variance / (PI * PI / 12.0) - 1.0).abs() < 0.1);
    }

    #[test]
    fn failures_are_redrawn_and_counted() {
        let calls = AtomicUsize::new(0);
        let sim = FnSimulator::new(&["f"], |s: &Sample| {
            calls.fetch_add(1, Ordering::Relaxed);
            if s.theta0 < 0.05 {
                Err(Error::Solver("synthetic".into()))
            } else {
                Ok(vec![s.theta0])
            }
        });
        let r = mc_estimate(&model(), &sim, 400, 9).unwrap();
        assert!(r.samples.iter().all(|s| s.sample.theta0 >= 0.05));
        assert_eq!(r.results[0].failures, r.failures.len());
        assert_eq!(calls.load(Ordering::Relaxed), 400 + r.failures.len());
        let bad = scalar_simulator("f", |_| 0.0);
        let always = FnSimulator::new(&["f"], |s: &Sample| {
            if s.theta0 < 0.5 {
                Err(Error::Solver("synthetic".into()))
            } else {
                bad.evaluate(s)
            }
        });
        assert!(matches!(
            mc_estimate(&model(), &always, 400, 9),
            Err(Error::Uq(_))
        ));
    }

    #[test]
    fn mismatched_quantities_cannot_be_compared() {
        let a = scalar_simulator("a", |s| s.r0);
        let b = scalar_simulator("b", |s| s.r0);
        let ra = mc_estimate(&model(), &a, 10, 0).unwrap();
        let rb = gpc_estimate(&model(), &b, 3).unwrap();
        assert!(compare_methods(&ra.results[0], &rb.results[0], 3.0).is_err());
        assert!(compare_methods(&rb.results[0], &rb.results[0], 3.0).is_err());
    }

    #[test]
    fn grid_rejects_nodes_beyond_the_truncation() {
        let wide = RandomInputModel::new(0.5e-3, 1e-3).unwrap();
        assert!(collocation_grid(&wide, 5).is_err());
    }
}
