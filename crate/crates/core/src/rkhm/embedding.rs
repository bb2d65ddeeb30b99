//! Finite kernel expansions, mean embeddings of discrete A-valued measures,
//! and the A-valued maximum mean discrepancy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::AKernel;
use crate::algebra::{Algebra, Element};
use crate::error::{Error, Result};

/// `v = Σ_i φ(x_i) c_i`, an element of the pre-completion module `M_{k,0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RkhmExpansion {
    algebra: Algebra,
    points: Vec<Vec<f64>>,
    coeffs: Vec<Element>,
}

impl RkhmExpansion {
    pub fn new(algebra: &Algebra, points: Vec<Vec<f64>>, coeffs: Vec<Element>) -> Result<Self> {
        if points.len() != coeffs.len() {
            return Err(Error::shape(format!("{} coefficients", points.len()), coeffs.len()));
        }
        if let Some(bad) = coeffs.iter().find(|c| c.algebra() != algebra) {
            return Err(Error::DescriptorMismatch {
                left: algebra.to_string(),
                right: bad.algebra().to_string(),
            });
        }
        Ok(Self {
            algebra: algebra.clone(),
            points,
            coeffs,
        })
    }

    /// Feature vector `φ(x) = k(·, x)`, i.e. the expansion `φ(x) 1_A`.
    pub fn feature(algebra: &Algebra, x: &[f64]) -> Self {
        Self {
            algebra: algebra.clone(),
            points: vec![x.to_vec()],
            coeffs: vec![algebra.identity()],
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn coeffs(&self) -> &[Element] {
        &self.coeffs
    }

    pub fn add(&self, other: &RkhmExpansion) -> Result<RkhmExpansion> {
        if self.algebra != other.algebra {
            return Err(Error::DescriptorMismatch {
                left: self.algebra.to_string(),
                right: other.algebra.to_string(),
            });
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        let mut coeffs = self.coeffs.clone();
        coeffs.extend(other.coeffs.iter().cloned());
        Ok(Self {
            algebra: self.algebra.clone(),
            points,
            coeffs,
        }
        .simplified())
    }

    pub fn neg(&self) -> RkhmExpansion {
        Self {
            algebra: self.algebra.clone(),
            points: self.points.clone(),
            coeffs: self.coeffs.iter().map(Element::neg).collect(),
        }
    }

    pub fn sub(&self, other: &RkhmExpansion) -> Result<RkhmExpansion> {
        self.add(&other.neg())
    }

    /// Right module action `v · c`.
    pub fn right_mul(&self, c: &Element) -> Result<RkhmExpansion> {
        Ok(Self {
            algebra: self.algebra.clone(),
            points: self.points.clone(),
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect::<Result<_>>()?,
        })
    }

    /// Merges coefficients of identical support points and drops zero terms.
    pub fn simplified(&self) -> RkhmExpansion {
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mut coeffs: Vec<Element> = Vec::new();
        for (p, c) in self.points.iter().zip(&self.coeffs) {
            match points.iter().position(|q| q == p) {
                Some(i) => coeffs[i] = coeffs[i].add(c).expect("same algebra"),
                None => {
                    points.push(p.clone());
                    coeffs.push(c.clone());
                }
            }
        }
        let (points, coeffs) = points
            .into_iter()
            .zip(coeffs)
            .filter(|(_, c)| c.max_abs() != 0.0)
            .unzip();
        Self {
            algebra: self.algebra.clone(),
            points,
            coeffs,
        }
    }

    /// `⟨u, v⟩ = Σ_ij c_i* k(x_i, y_j) d_j`.
    pub fn inner(&self, other: &RkhmExpansion, kernel: &AKernel) -> Result<Element> {
        let mut acc = kernel.algebra().zero();
        for (x, c) in self.points.iter().zip(&self.coeffs) {
            let cs = c.star();
            for (y, d) in other.points.iter().zip(&other.coeffs) {
                acc = acc.add(&cs.mul(&kernel.eval(x, y)?.mul(d)?)?)?;
            }
        }
        Ok(acc)
    }

    /// Pointwise evaluation `v(x) = Σ_i k(x, x_i) c_i`.
    pub fn eval(&self, x: &[f64], kernel: &AKernel) -> Result<Element> {
        let mut acc = kernel.algebra().zero();
        for (p, c) in self.points.iter().zip(&self.coeffs) {
            acc = acc.add(&kernel.eval(x, p)?.mul(c)?)?;
        }
        Ok(acc)
    }

    /// RKHM norm `‖⟨v, v⟩‖^{1/2}`.
    pub fn norm(&self, kernel: &AKernel) -> Result<f64> {
        Ok(self.inner(self, kernel)?.norm().sqrt())
    }
}

/// Finitely supported A-valued measure `Σ_i μ_i δ_{x_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteAMeasure {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<Element>,
}

impl DiscreteAMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<Element>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::shape(
                format!("non-empty support with {} weights", points.len()),
                weights.len(),
            ));
        }
        Ok(Self { points, weights })
    }

    /// Dirac measure `w δ_x`.
    pub fn dirac(x: Vec<f64>, weight: Element) -> Self {
        Self {
            points: vec![x],
            weights: vec![weight],
        }
    }

    /// Sum of two measures (support concatenation).
    pub fn add(&self, other: &DiscreteAMeasure) -> DiscreteAMeasure {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        let mut weights = self.weights.clone();
        weights.extend(other.weights.iter().cloned());
        Self { points, weights }
    }
}

/// Kernel mean embedding `Φμ = Σ_i φ(x_i) μ_i`.
pub fn embed(measure: &DiscreteAMeasure, kernel: &AKernel) -> Result<RkhmExpansion> {
    for p in &measure.points {
        if p.len() != kernel.input_dim() {
            return Err(Error::shape(
                format!("input of dimension {}", kernel.input_dim()),
                p.len(),
            ));
        }
    }
    RkhmExpansion::new(kernel.algebra(), measure.points.clone(), measure.weights.clone()).map(|e| e.simplified())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmdResult {
    /// A-valued `⟨Φμ - Φν, Φμ - Φν⟩`.
    pub squared: Element,
    /// `‖Φμ - Φν‖`.
    pub norm: f64,
}

pub fn mmd(kernel: &AKernel, mu: &DiscreteAMeasure, nu: &DiscreteAMeasure) -> Result<MmdResult> {
    let diff = embed(mu, kernel)?.sub(&embed(nu, kernel)?)?;
    let raw = diff.inner(&diff, kernel)?;
    // Symmetrize away round-off so the A-valued part is exactly self-adjoint.
    let squared = raw.add(&raw.star())?.scale(Complex64::new(0.5, 0.0));
    let norm = squared.norm().sqrt();
    Ok(MmdResult { squared, norm })
}
