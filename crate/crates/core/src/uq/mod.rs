//! Uncertainty quantification of the rotor displacement.
//!
//! Inputs are `R0 ~ N(0, sigma^2)` and `theta0 ~ U(0, pi)`. Means and
//! variances come from equal-weight Monte Carlo or from collocation on a
//! Gauss-Hermite x Gauss-Legendre tensor grid; sensitivities from a
//! pick-freeze design. Samples are evaluated on the current rayon pool and
//! aggregated in a fixed order, so results do not depend on thread count.

pub mod estimate;
pub mod input;
pub mod model;
pub mod quadrature;
pub mod sobol;

pub use estimate::{
    collocation_grid, compare_methods, draw_sample, gpc_estimate, mc_estimate, sample_moments,
    scalar_simulator, EvaluatedSample, FnSimulator, Method, MethodComparison, SampleFailure,
    Simulator, UqResult, UqRun,
};
pub use input::{RandomInputModel, Sample, DEFAULT_SIGMA_R0};
pub use model::{evaluate_machine, MachineModel, SampleCache, TorqueSummary, MEAN_TORQUE, THD};
pub use quadrature::{gauss_hermite, gauss_legendre, gauss_legendre_on, QuadratureRule};
pub use sobol::{sobol_indices, sobol_sensitivity, SobolDesign, SobolIndices, SobolRun};
