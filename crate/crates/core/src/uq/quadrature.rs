//! Gauss rules for the standard normal and the uniform distribution, built
//! with the Golub-Welsch algorithm from the three-term recurrences of the
//! probabilists' Hermite and the Legendre polynomials.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Quadrature rule normalized as a probability measure (weights sum to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_j w_j f(x_j)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine image `x -> shift + scale x`; weights are unchanged.
    pub fn mapped(&self, shift: f64, scale: f64) -> Self {
        QuadratureRule {
            nodes: self.nodes.iter().map(|x| shift + scale * x).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Nodes and weights of the symmetric Jacobi matrix with zero diagonal and
/// off-diagonal `beta(k)`, `k = 1..n-1`.
fn golub_welsch(n: usize, beta: impl Fn(usize) -> f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::Uq(
            "a quadrature rule needs at least one node".into(),
        ));
    }
    let jacobi = Mat::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            beta(i.max(j))
        } else {
            0.0
        }
    });
    let evd = jacobi
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Uq(format!("Jacobi eigenproblem failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut nodes: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let mut weights: Vec<f64> = (0..n).map(|i| u[(0, i)] * u[(0, i)]).collect();
    // Both weight functions are even: enforce the exact mirror symmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        (nodes[i], nodes[j]) = (-x, x);
        (weights[i], weights[j]) = (w, w);
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss-Hermite rule for the standard normal N(0, 1).
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    golub_welsch(n, |k| (k as f64).sqrt())
}

/// Gauss-Legendre rule for the uniform distribution on (-1, 1).
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    golub_welsch(n, |k| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    })
}

/// Gauss-Legendre rule for the uniform distribution on (a, b).
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    Ok(gauss_legendre(n)?.mapped(0.5 * (a + b), 0.5 * (b - a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    // reference values as tabulated
    #[test]
    #[allow(clippy::excessive_precision)]
    fn hermite_five_point_reference() {
        let r = gauss_hermite(5).unwrap();
        let nodes = [
            -2.856970013872805635,
            -1.355626179974265966,
            0.0,
            1.355626179974265966,
            2.856970013872805635,
        ];
        let weights = [
            0.011257411327720688933,
            0.22207592200561264440,
            0.53333333333333333333,
            0.22207592200561264440,
            0.011257411327720688933,
        ];
        for i in 0..5 {
            assert!(
                close(r.nodes[i], nodes[i], 1e-14),
                "{} vs {}",
                r.nodes[i],
                nodes[i]
            );
            assert!(
                close(r.weights[i], weights[i], 1e-14),
                "{} vs {}",
                r.weights[i],
                weights[i]
            );
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn legendre_five_point_reference() {
        let r = gauss_legendre(5).unwrap();
        let nodes = [
            -0.906179845938663993,
            -0.538469310105683091,
            0.0,
            0.538469310105683091,
            0.906179845938663993,
        ];
        let weights = [
            0.236926885056189088,
            0.478628670499366468,
            0.568888888888888889,
            0.478628670499366468,
            0.236926885056189088,
        ];
        for i in 0..5 {
            assert!(close(r.nodes[i], nodes[i], 1e-14));
            assert!(close(r.weights[i], 0.5 * weights[i], 1e-14));
        }
    }

    #[test]
    fn single_node_rules_sit_at_the_mean() {
        assert_eq!(
            gauss_hermite(1).unwrap(),
            QuadratureRule {
                nodes: vec![0.0],
                weights: vec![1.0]
            }
        );
        let l = gauss_legendre_on(1, 0.0, std::f64::consts::PI).unwrap();
        assert_eq!(l.weights, vec![1.0]);
        assert!((l.nodes[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(gauss_hermite(0).is_err());
    }

    #[test]
    fn normal_moments_are_exact_to_degree_2n_minus_1() {
        // E[Z^(2k)] = (2k - 1)!!
        let r = gauss_hermite(5).unwrap();
        let mut double_factorial = 1.0;
        for k in 0..5 {
            if k > 0 {
                double_factorial *= (2 * k - 1) as f64;
            }
            let even = r.integrate(|x| x.powi(2 * k));
            assert!(close(even, double_factorial, 1e-13), "k {k}: {even}");
            assert!(r.integrate(|x| x.powi(2 * k + 1)).abs() < 1e-13);
        }
    }
}
