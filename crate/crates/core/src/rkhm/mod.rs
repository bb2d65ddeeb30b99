//! Reproducing kernel Hilbert C*-modules.
//!
//! An [`AKernel`] is a finite sum `k(x, y) = Σ_r a_r κ_r(x, y)` of real scalar
//! positive definite kernels `κ_r` weighted by positive algebra elements
//! `a_r`. Such a kernel is A-valued positive definite, and the module it
//! generates carries the inner product `⟨Σ φ(x_i) c_i, Σ φ(y_j) d_j⟩ =
//! Σ c_i* k(x_i, y_j) d_j` with the reproducing property `⟨φ(x), v⟩ = v(x)`.
//!
//! Circulant coefficients give convolution-type kernels for structured
//! outputs. They are a representative family, not a reproduction of any
//! particular published circulant kernel.

mod embedding;
mod regression;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, Element, DEFAULT_POSITIVITY_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub use embedding::{embed, mmd, DiscreteAMeasure, MmdResult, RkhmExpansion};
pub use regression::{fit_krr, fit_krr_interpolating, RkhmRegressor};

/// Real-valued positive definite kernel on `R^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKernel {
    /// `exp(-γ ‖x - y‖²)`
    Gaussian { gamma: f64 },
    /// `⟨x, y⟩`
    Linear,
}

impl BaseKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            BaseKernel::Gaussian { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            BaseKernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub base: BaseKernel,
    pub coeff: Element,
}

/// A-valued kernel `k(x, y) = Σ_r a_r κ_r(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AKernelJson")]
pub struct AKernel {
    input_dim: usize,
    terms: Vec<KernelTerm>,
}

#[derive(Deserialize)]
struct AKernelJson {
    input_dim: usize,
    terms: Vec<KernelTerm>,
}

impl TryFrom<AKernelJson> for AKernel {
    type Error = Error;

    fn try_from(j: AKernelJson) -> Result<Self> {
        AKernel::new(j.input_dim, j.terms)
    }
}

impl AKernel {
    /// Builds a kernel, rejecting coefficients that are not positive at
    /// [`DEFAULT_POSITIVITY_TOL`]. Coefficients are replaced by their
    /// Hermitian part so that `k(x, y) = k(y, x)*` holds exactly.
    pub fn new(input_dim: usize, terms: Vec<KernelTerm>) -> Result<Self> {
        let kernel = Self::new_unchecked(input_dim, terms)?;
        for (r, t) in kernel.terms.iter().enumerate() {
            if !t.coeff.is_positive(DEFAULT_POSITIVITY_TOL) {
                return Err(Error::invalid(format!("kernel coefficient {r} is not positive")));
            }
        }
        Ok(kernel)
    }

    /// Builds a kernel without the positivity check, for probing kernels
    /// that are deliberately not positive definite.
    pub fn new_unchecked(input_dim: usize, terms: Vec<KernelTerm>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("kernel input dimension must be >= 1"));
        }
        let first = terms
            .first()
            .ok_or_else(|| Error::invalid("kernel needs at least one term"))?;
        let algebra = first.coeff.algebra().clone();
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            if t.coeff.algebra() != &algebra {
                return Err(Error::DescriptorMismatch {
                    left: algebra.to_string(),
                    right: t.coeff.algebra().to_string(),
                });
            }
            if let BaseKernel::Gaussian { gamma } = t.base {
                if !(gamma > 0.0) || !gamma.is_finite() {
                    return Err(Error::invalid(format!("gaussian gamma must be > 0, got {gamma}")));
                }
            }
            let herm = t
                .coeff
                .add(&t.coeff.star())?
                .scale(num_complex::Complex64::new(0.5, 0.0));
            out.push(KernelTerm {
                base: t.base,
                coeff: herm,
            });
        }
        Ok(Self { input_dim, terms: out })
    }

    /// Single Gaussian term `a · exp(-γ ‖x - y‖²)`.
    pub fn gaussian(input_dim: usize, gamma: f64, coeff: Element) -> Result<Self> {
        Self::new(
            input_dim,
            vec![KernelTerm {
                base: BaseKernel::Gaussian { gamma },
                coeff,
            }],
        )
    }

    pub fn algebra(&self) -> &Algebra {
        self.terms[0].coeff.algebra()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!("input of dimension {}", self.input_dim), x.len()));
        }
        Ok(())
    }

    /// `k(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Element> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> Element {
        let mut acc = self.algebra().zero();
        for t in &self.terms {
            acc.axpy(num_complex::Complex64::new(t.base.eval(x, y), 0.0), &t.coeff);
        }
        acc
    }

    /// Block Gram matrix `G_ij = k(x_i, x_j)`, assembled in parallel.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<GramBlock> {
        if points.is_empty() {
            return Err(Error::invalid("Gram matrix needs at least one point"));
        }
        for p in points {
            self.check_point(p)?;
        }
        let n = points.len();
        let blocks = (0..n * n)
            .into_par_iter()
            .map(|idx| self.eval_unchecked(&points[idx / n], &points[idx % n]))
            .collect();
        Ok(GramBlock {
            points: points.to_vec(),
            blocks,
        })
    }
}

/// `n x n` grid of algebra elements `G_ij = k(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlock {
    points: Vec<Vec<f64>>,
    blocks: Vec<Element>,
}

impl GramBlock {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn get(&self, i: usize, j: usize) -> &Element {
        &self.blocks[i * self.len() + j]
    }

    pub fn algebra(&self) -> &Algebra {
        self.blocks[0].algebra()
    }

    /// The `nD x nD` matrix with block `(i, j)` equal to `R(G_ij)`.
    pub fn flattened(&self) -> CMatrix {
        let n = self.len();
        let d = self.algebra().rep_dim();
        let mut m = CMatrix::zeros(n * d, n * d);
        for i in 0..n {
            for j in 0..n {
                m.view_mut((i * d, j * d), (d, d))
                    .copy_from(&self.get(i, j).regular_representation());
            }
        }
        m
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        linalg::min_eigenvalue(&self.flattened())
    }

    /// Whether `Σ c_i* G_ij c_j ≥ 0` for all `c`, certified through the
    /// smallest eigenvalue of the flattened Hermitian matrix.
    pub fn check_pd(&self, tol: f64) -> Result<bool> {
        let f = self.flattened();
        if linalg::hermitian_defect(&f) > tol {
            return Ok(false);
        }
        Ok(linalg::min_eigenvalue(&f)? >= -tol)
    }

    /// `Σ_ij c_i* G_ij c_j`.
    pub fn quadratic_form(&self, c: &[Element]) -> Result<Element> {
        if c.len() != self.len() {
            return Err(Error::shape(format!("{} coefficients", self.len()), c.len()));
        }
        let mut acc = self.algebra().zero();
        for (i, ci) in c.iter().enumerate() {
            let left = ci.star();
            for (j, cj) in c.iter().enumerate() {
                acc = acc.add(&left.mul(&self.get(i, j).mul(cj)?)?)?;
            }
        }
        Ok(acc)
    }
}
