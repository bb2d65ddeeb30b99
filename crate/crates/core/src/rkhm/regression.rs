//! Kernel ridge regression in an RKHM.
//!
//! The fitted function is `v = Σ_i φ(x_i) c_i` where the coefficients solve
//! `Σ_j G_ij c_j + λ c_i = y_i`. This is the stationary point of the convex
//! objective `Σ_i ‖R(v(x_i) - y_i)‖_F² + λ tr R(⟨v, v⟩)` and reduces to
//! ordinary kernel ridge regression when `A = C`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AKernel, GramBlock};
use crate::algebra::{AlgebraKind, Element};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkhmRegressor {
    pub kernel: AKernel,
    pub points: Vec<Vec<f64>>,
    pub coefficients: Vec<Element>,
    /// Ridge parameter; zero only for interpolating fits.
    pub lambda: f64,
}

/// Fits `(G + λ I) c = y` with `λ > 0`.
pub fn fit_krr(kernel: &AKernel, points: &[Vec<f64>], targets: &[Element], lambda: f64) -> Result<RkhmRegressor> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("ridge parameter must be > 0, got {lambda}")));
    }
    fit(kernel, points, targets, lambda, false)
}

/// Interpolating fit (`λ = 0`); singular Gram matrices fall back to the
/// minimum-norm pseudo-inverse solution.
pub fn fit_krr_interpolating(kernel: &AKernel, points: &[Vec<f64>], targets: &[Element]) -> Result<RkhmRegressor> {
    fit(kernel, points, targets, 0.0, true)
}

fn fit(
    kernel: &AKernel,
    points: &[Vec<f64>],
    targets: &[Element],
    lambda: f64,
    pseudo_inverse: bool,
) -> Result<RkhmRegressor> {
    if points.len() != targets.len() {
        return Err(Error::shape(format!("{} targets", points.len()), targets.len()));
    }
    let algebra = kernel.algebra().clone();
    if let Some(bad) = targets.iter().find(|t| t.algebra() != &algebra) {
        return Err(Error::DescriptorMismatch {
            left: algebra.to_string(),
            right: bad.algebra().to_string(),
        });
    }
    let gram = kernel.gram(points)?;
    let n = points.len();
    let solve = |a: &CMatrix, b: &CMatrix| {
        if pseudo_inverse {
            linalg::pinv_solve(a, b)
        } else {
            linalg::solve(a, b)
        }
    };

    let coefficients = match algebra.kind() {
        AlgebraKind::GridFunction { weights } => {
            // Independent n x n solve at every grid point.
            let m = weights.len();
            let columns: Vec<Vec<Complex64>> = (0..m)
                .into_par_iter()
                .map(|z| {
                    let a = CMatrix::from_fn(n, n, |i, j| {
                        let g = gram.get(i, j).coords()[z];
                        if i == j {
                            g + lambda
                        } else {
                            g
                        }
                    });
                    let b = CMatrix::from_fn(n, 1, |i, _| targets[i].coords()[z]);
                    solve(&a, &b).map(|x| x.iter().copied().collect())
                })
                .collect::<Result<_>>()?;
            (0..n)
                .map(|i| algebra.element((0..m).map(|z| columns[z][i]).collect()))
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            let d = algebra.rep_dim();
            let mut a = gram.flattened();
            for k in 0..n * d {
                a[(k, k)] += lambda;
            }
            let mut b = CMatrix::zeros(n * d, d);
            for (i, t) in targets.iter().enumerate() {
                b.rows_mut(i * d, d).copy_from(&t.regular_representation());
            }
            let x = solve(&a, &b)?;
            (0..n)
                .map(|i| algebra.from_regular_representation(&x.rows(i * d, d).into_owned()))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(RkhmRegressor {
        kernel: kernel.clone(),
        points: points.to_vec(),
        coefficients,
        lambda,
    })
}

impl RkhmRegressor {
    /// `v(x) = Σ_i k(x, x_i) c_i`, the reproducing-property evaluation `⟨φ(x), v⟩`.
    pub fn predict(&self, x: &[f64]) -> Result<Element> {
        let mut acc = self.kernel.algebra().zero();
        for (p, c) in self.points.iter().zip(&self.coefficients) {
            acc = acc.add(&self.kernel.eval(x, p)?.mul(c)?)?;
        }
        Ok(acc)
    }

    pub fn gram(&self) -> Result<GramBlock> {
        self.kernel.gram(&self.points)
    }

    /// Regularized objective `Σ_i ‖R(v(x_i) - y_i)‖_F² + λ tr R(Σ c_i* G_ij c_j)`
    /// evaluated at arbitrary coefficients over the training points.
    pub fn objective(&self, coefficients: &[Element], targets: &[Element]) -> Result<f64> {
        let gram = self.gram()?;
        let n = self.points.len();
        if coefficients.len() != n || targets.len() != n {
            return Err(Error::shape(
                format!("{n} coefficients and targets"),
                coefficients.len(),
            ));
        }
        let mut loss = 0.0;
        for i in 0..n {
            let mut pred = self.kernel.algebra().zero();
            for (j, c) in coefficients.iter().enumerate() {
                pred = pred.add(&gram.get(i, j).mul(c)?)?;
            }
            loss += linalg::frobenius_norm(&pred.sub(&targets[i])?.regular_representation()).powi(2);
        }
        let q = gram.quadratic_form(coefficients)?.regular_representation();
        Ok(loss + self.lambda * q.trace().re)
    }

    /// Frobenius norm of the residual of `(G + λ I) c - y` in the flattened system.
    pub fn normal_equation_residual(&self, targets: &[Element]) -> Result<f64> {
        let gram = self.gram()?;
        let mut total = 0.0;
        for (i, t) in targets.iter().enumerate() {
            let mut lhs = self.coefficients[i].scale(Complex64::new(self.lambda, 0.0));
            for (j, c) in self.coefficients.iter().enumerate() {
                lhs = lhs.add(&gram.get(i, j).mul(c)?)?;
            }
            total += linalg::frobenius_norm(&lhs.sub(t)?.regular_representation()).powi(2);
        }
        Ok(total.sqrt())
    }
}
