//! Gauss-Hermite quadrature in the probabilists' normalization and the
//! adaptive one-dimensional integration used by score and threshold
//! integrals.
//!
//! All Gaussian expectations in this crate are taken against the standard
//! normal density, so nodes and weights satisfy
//! `E[f(G)] ≈ Σ_k w_k f(x_k)` with `Σ w_k = 1`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Error;
use crate::Result;

/// Default number of nodes for one-dimensional expectations.
pub const DEFAULT_ORDER: usize = 61;

/// A Gauss-Hermite rule against the standard normal weight.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Build an `order`-point rule with the Golub-Welsch algorithm on the
    /// Jacobi matrix of the probabilists' Hermite recurrence
    /// `He_{n+1}(x) = x He_n(x) - n He_{n-1}(x)` (off-diagonal `sqrt(k)`).
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("quadrature order must be positive".into()));
        }
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let node = eig.eigenvalues[i];
                let w = eig.eigenvectors[(0, i)].powi(2);
                (node, w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let nodes = pairs.iter().map(|p| p.0).collect();
        let weights = pairs.iter().map(|p| p.1 / total).collect();
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(G)]` for `G ~ N(0,1)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Iterate over `(node, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Tensor-product rule for expectations over `G ~ N(0, I_r)`, `r <= 4`.
///
/// The per-axis order shrinks with the dimension to keep the node count at
/// desk scale.
#[derive(Debug, Clone)]
pub struct GaussHermiteTensor {
    dim: usize,
    base: GaussHermite,
}

impl GaussHermiteTensor {
    pub fn new(dim: usize) -> Result<Self> {
        let order = match dim {
            1 => DEFAULT_ORDER,
            2 => 31,
            3 => 17,
            4 => 11,
            _ => {
                return Err(Error::Domain(format!(
                    "tensor quadrature supports r <= 4, got r = {dim}"
                )))
            }
        };
        Self::with_order(dim, order)
    }

    pub fn with_order(dim: usize, order: usize) -> Result<Self> {
        if dim == 0 || dim > 4 {
            return Err(Error::Domain(format!(
                "tensor quadrature supports 1 <= r <= 4, got r = {dim}"
            )));
        }
        Ok(GaussHermiteTensor {
            dim,
            base: GaussHermite::new(order)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `E[f(G)]` where `f` receives an `r`-dimensional node.
    pub fn expect(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.expect_weighted(|point, w| acc += w * f(point));
        acc
    }

    /// Visit every tensor node with its weight.
    pub fn expect_weighted(&self, mut f: impl FnMut(&[f64], f64)) {
        let n = self.base.order();
        let mut idx = vec![0usize; self.dim];
        let mut point = vec![0.0f64; self.dim];
        loop {
            let mut w = 1.0;
            for (d, &i) in idx.iter().enumerate() {
                point[d] = self.base.nodes[i];
                w *= self.base.weights[i];
            }
            f(&point, w);
            // odometer increment
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == self.dim {
                    return;
                }
            }
        }
    }
}

/// Outcome of the adaptive trapezoid integration.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveIntegral {
    pub value: f64,
    pub evaluations: usize,
}

/// Integrate `f` over `[lo, hi]` with the trapezoid rule, doubling the grid
/// until the change drops below `rel_tol` relative to the value, with an
/// absolute floor of `1e-12` for integrals that are essentially zero.
///
/// Returns a numerical diagnostic when the budget of refinements is
/// exhausted without convergence.
pub fn adaptive_trapezoid(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    label: &str,
) -> Result<AdaptiveIntegral> {
    if !(hi > lo) {
        return Err(Error::Domain(format!(
            "bad integration interval [{lo}, {hi}]"
        )));
    }
    let mut n = 1024usize;
    let mut evals = 0usize;
    let mut trap = {
        let h = (hi - lo) / n as f64;
        let mut s = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            s += f(lo + i as f64 * h);
        }
        evals += n + 1;
        s * h
    };
    let mut simpson_prev: Option<f64> = None;
    for _ in 0..8 {
        // refine by adding the midpoints of the current grid
        let h = (hi - lo) / n as f64;
        let mut mid = 0.0;
        for i in 0..n {
            mid += f(lo + (i as f64 + 0.5) * h);
        }
        evals += n;
        let trap_next = 0.5 * trap + 0.5 * h * mid;
        let simpson = (4.0 * trap_next - trap) / 3.0;
        n *= 2;
        trap = trap_next;
        if let Some(prev) = simpson_prev {
            if (simpson - prev).abs() <= (rel_tol * simpson.abs()).max(1e-12) {
                return Ok(AdaptiveIntegral {
                    value: simpson,
                    evaluations: evals,
                });
            }
        }
        simpson_prev = Some(simpson);
    }
    Err(Error::Numerical(format!("{label} nonconvergent")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_one() {
        for order in [3, 7, 21, 61, 101] {
            let q = GaussHermite::new(order).unwrap();
            let sum: f64 = q.weights().iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_moments() {
        let q = GaussHermite::new(61).unwrap();
        assert_abs_diff_eq!(q.expect(|x| x), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(q.expect(|x| x * x), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(q.expect(|x| x * x * x), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(q.expect(|x| x.powi(4)), 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(q.expect(|x| x.powi(6)), 15.0, epsilon = 1e-7);
    }

    #[test]
    fn nonpolynomial_expectation() {
        // E[exp(G)] = e^{1/2}
        let q = GaussHermite::new(61).unwrap();
        assert_abs_diff_eq!(q.expect(f64::exp), (0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn tensor_second_moments() {
        let q = GaussHermiteTensor::new(2).unwrap();
        assert_abs_diff_eq!(q.expect(|g| g[0] * g[0]), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(q.expect(|g| g[0] * g[1]), 0.0, epsilon = 1e-10);
        let q3 = GaussHermiteTensor::new(3).unwrap();
        assert_abs_diff_eq!(
            q3.expect(|g| g[0] * g[0] + g[1] * g[1] + g[2] * g[2]),
            3.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn trapezoid_converges_on_gaussian() {
        let v = adaptive_trapezoid(
            |y| (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -10.0,
            10.0,
            1e-9,
            "test integral",
        )
        .unwrap();
        assert_abs_diff_eq!(v.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_order_rejected() {
        assert!(GaussHermite::new(0).is_err());
    }
}
