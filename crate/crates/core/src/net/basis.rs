//! Networks over a grid algebra whose weights are expanded in a finite basis
//! `w_ik(z) = Σ_l c_lik v_l(z)` with constant biases, and the polynomial
//! structure of such networks under linear activations.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::backprop::{loss, loss_and_gradient, Sample, TrainConfig, TrainOutcome};
use super::{check_architecture, Activation, CStarLayer, CStarNet};
use crate::algebra::Algebra;
use crate::error::{Error, Result};
use crate::hilbert::ModuleVector;

/// Relative residual at or below which a polynomial fit is accepted.
pub const DEGREE_ACCEPT: f64 = 1e-8;
/// Relative residual above which a lower degree counts as clearly rejected.
pub const DEGREE_REJECT: f64 = 1e-3;

/// Basis functions `v_1..v_m` tabulated on the grid points of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    points: Vec<Vec<f64>>,
    /// `values[(z, l)] = v_l(z_z)`.
    values: DMatrix<f64>,
    algebra: Algebra,
}

impl Basis {
    pub fn new(points: Vec<Vec<f64>>, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() != points.len() {
            return Err(Error::shape(
                format!("{} x m basis table with m ≥ 1", points.len()),
                format!("{} x {}", values.nrows(), values.ncols()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("basis values must be finite"));
        }
        if full_column_rank(&values) < values.ncols() {
            return Err(Error::invalid("basis evaluation matrix is rank deficient on the grid"));
        }
        let algebra = Algebra::grid(points.len())?;
        Ok(Basis {
            points,
            values,
            algebra,
        })
    }

    /// Product grid of `per_dim` equispaced points on `[-1, 1]^m` with the
    /// coordinate functions `v_l(z) = z_l`.
    pub fn coordinate_grid(m: usize, per_dim: usize) -> Result<Self> {
        if m == 0 || per_dim < 2 {
            return Err(Error::invalid(format!(
                "coordinate grid needs m ≥ 1 and ≥ 2 points per axis, got m = {m}, {per_dim}"
            )));
        }
        let axis: Vec<f64> = (0..per_dim)
            .map(|i| -1.0 + 2.0 * i as f64 / (per_dim - 1) as f64)
            .collect();
        let total = per_dim.pow(m as u32);
        let points: Vec<Vec<f64>> = (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; m];
                for slot in p.iter_mut().rev() {
                    *slot = axis[idx % per_dim];
                    idx /= per_dim;
                }
                p
            })
            .collect();
        let values = DMatrix::from_fn(total, m, |z, l| points[z][l]);
        Basis::new(points, values)
    }

    /// Coordinate grid fine enough to separate polynomials of degree ≤ `depth`:
    /// `4 (depth + 1)` points per axis.
    pub fn for_degree_check(m: usize, depth: usize) -> Result<Self> {
        Basis::coordinate_grid(m, 4 * (depth + 1))
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of basis functions `m`.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn full_column_rank(a: &DMatrix<f64>) -> usize {
    let s = a.clone().svd(false, false).singular_values;
    let smax = s.max();
    let tol = smax * 1e-12 * a.nrows().max(a.ncols()) as f64;
    s.iter().filter(|&&v| v > tol).count()
}

/// One layer in basis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisLayer {
    /// `coeffs[i][k][l] = c_lik`.
    pub coeffs: Vec<Vec<Vec<Complex64>>>,
    /// Constant bias `b̂`.
    pub bias: Vec<Complex64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisNet {
    basis: Basis,
    layers: Vec<BasisLayer>,
}

impl BasisNet {
    pub fn new(basis: Basis, layers: Vec<BasisLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        let m = basis.dim();
        let mut prev: Option<usize> = None;
        for l in &layers {
            let out = l.bias.len();
            if out == 0 || l.coeffs.len() != out {
                return Err(Error::shape(format!("{out} coefficient rows"), l.coeffs.len()));
            }
            let input = l.coeffs[0].len();
            if input == 0 || prev.is_some_and(|p| p != input) {
                return Err(Error::shape(format!("layer input of width {prev:?}"), input));
            }
            for row in &l.coeffs {
                if row.len() != input || row.iter().any(|c| c.len() != m) {
                    return Err(Error::shape(format!("{input} x {m} coefficients per row"), row.len()));
                }
            }
            prev = Some(out);
        }
        Ok(BasisNet { basis, layers })
    }

    /// Coefficients uniform on `[-s, s]` with `s = 1/√(d_{j-1} m)`; biases on
    /// `[-1/√d_{j-1}, 1/√d_{j-1}]`.
    pub fn random<R: Rng + ?Sized>(
        basis: Basis,
        widths: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        check_architecture(widths, activations)?;
        let m = basis.dim();
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let s = 1.0 / ((w[0] * m) as f64).sqrt();
                let sb = 1.0 / (w[0] as f64).sqrt();
                BasisLayer {
                    coeffs: (0..w[1])
                        .map(|_| {
                            (0..w[0])
                                .map(|_| (0..m).map(|_| Complex64::new(rng.gen_range(-s..=s), 0.0)).collect())
                                .collect()
                        })
                        .collect(),
                    bias: (0..w[1])
                        .map(|_| Complex64::new(rng.gen_range(-sb..=sb), 0.0))
                        .collect(),
                    activation,
                }
            })
            .collect();
        BasisNet::new(basis, layers)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn layers(&self) -> &[BasisLayer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].coeffs[0].len())
            .chain(self.layers.iter().map(|l| l.bias.len()))
            .collect()
    }

    /// The grid-algebra network with `W_ik(z) = Σ_l c_lik v_l(z)` and
    /// `b_i(z) = b̂_i`.
    pub fn to_net(&self) -> Result<CStarNet> {
        let alg = self.basis.algebra();
        let v = &self.basis.values;
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let weights = l
                    .coeffs
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|c| {
                                alg.element(
                                    (0..v.nrows())
                                        .map(|z| c.iter().enumerate().map(|(li, &cl)| cl * v[(z, li)]).sum())
                                        .collect(),
                                )
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let bias = l.bias.iter().map(|&b| alg.constant(b)).collect();
                CStarLayer::new(weights, bias, l.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        CStarNet::new(layers)
    }

    /// Outputs `f_z(x̂)` at every grid point for the constant input `x̂`,
    /// indexed `[z][output]`.
    pub fn slice_outputs(&self, x_hat: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
        let net = self.to_net()?;
        let x = ModuleVector::constant(self.basis.algebra(), x_hat)?;
        let out = net.forward(&x)?;
        Ok((0..self.basis.len())
            .map(|z| out.entries().iter().map(|e| e.coords()[z]).collect())
            .collect())
    }

    /// Expansion of `f_z(x̂)` into products of basis functions for linear
    /// activations and constant input and biases:
    /// for every starting layer `j` and index sequence `(l_j, ..., l_L)` the
    /// term `v_{l_L}(z)⋯v_{l_j}(z) σ_L(C^L_{l_L} σ_{L-1}(⋯ σ_j(C^j_{l_j} u^{j-1})))`
    /// with `u^0 = x̂` and `u^{j-1} = σ_{j-1}(b̂^{j-1})`, plus `σ_L(b̂^L)`.
    pub fn linear_expansion(&self, x_hat: &[Complex64]) -> Result<PolyExpansion> {
        self.require_linear()?;
        if x_hat.len() != self.widths()[0] {
            return Err(Error::shape(
                format!("input of length {}", self.widths()[0]),
                x_hat.len(),
            ));
        }
        let m = self.basis.dim();
        let depth = self.layers.len();
        let mut terms = Vec::new();
        for start in 0..depth {
            let seed: Vec<Complex64> = if start == 0 {
                x_hat.to_vec()
            } else {
                let prev = &self.layers[start - 1];
                prev.bias.iter().map(|&b| prev.activation.apply(b)).collect()
            };
            let len = depth - start;
            for flat in 0..m.pow(len as u32) {
                // indices[r] is l_{start + r}.
                let mut indices = vec![0; len];
                let mut rest = flat;
                for slot in indices.iter_mut().rev() {
                    *slot = rest % m;
                    rest /= m;
                }
                let mut u = seed.clone();
                for (r, &l) in indices.iter().enumerate() {
                    let layer = &self.layers[start + r];
                    u = layer
                        .coeffs
                        .iter()
                        .map(|row| {
                            let s: Complex64 = row.iter().zip(&u).map(|(c, &uk)| c[l] * uk).sum();
                            layer.activation.apply(s)
                        })
                        .collect();
                }
                terms.push(ExpansionTerm {
                    start_layer: start + 1,
                    indices,
                    value: u,
                });
            }
        }
        let last = &self.layers[depth - 1];
        Ok(PolyExpansion {
            terms,
            constant: last.bias.iter().map(|&b| last.activation.apply(b)).collect(),
        })
    }

    fn require_linear(&self) -> Result<()> {
        if let Some(l) = self.layers.iter().find(|l| !l.activation.is_linear()) {
            return Err(Error::Unsupported(format!(
                "polynomial structure needs linear activations, found {}",
                l.activation
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct BasisJson {
    points: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct BasisNetJson {
    basis: BasisJson,
    layers: Vec<BasisLayer>,
}

impl Serialize for BasisNet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = &self.basis.values;
        BasisNetJson {
            basis: BasisJson {
                points: self.basis.points.clone(),
                values: (0..v.nrows()).map(|z| v.row(z).iter().copied().collect()).collect(),
            },
            layers: self.layers.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasisNet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = BasisNetJson::deserialize(d)?;
        let rows = j.basis.values.len();
        let cols = j.basis.values.first().map_or(0, Vec::len);
        if j.basis.values.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged basis table"));
        }
        let values = DMatrix::from_fn(rows, cols, |z, l| j.basis.values[z][l]);
        Basis::new(j.basis.points, values)
            .and_then(|b| BasisNet::new(b, j.layers))
            .map_err(serde::de::Error::custom)
    }
}

/// Full-batch gradient descent on the coefficients `c_lik` and the constant
/// biases. The grid-level gradient is projected through the basis:
/// `∂L/∂c_lik = Σ_z v_l(z) ∂L/∂W_ik(z)` and `∂L/∂b̂_i = Σ_z ∂L/∂b_i(z)`.
pub fn train_basis(net: &BasisNet, samples: &[Sample], cfg: TrainConfig) -> Result<TrainOutcome<BasisNet>> {
    if !(cfg.step_size > 0.0) || !cfg.step_size.is_finite() {
        return Err(Error::invalid(format!("step size must be > 0, got {}", cfg.step_size)));
    }
    let v = net.basis.values.clone();
    let mut current = net.clone();
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    for step in 0..cfg.steps {
        let (value, grad) = loss_and_gradient(&current.to_net()?, samples)?;
        if !value.is_finite() {
            log::warn!("training diverged at step {step}");
            return Ok(TrainOutcome {
                model: current,
                trace,
                diverged: true,
            });
        }
        trace.push(value);
        for (j, layer) in current.layers.iter_mut().enumerate() {
            for (i, row) in layer.coeffs.iter_mut().enumerate() {
                for (k, c) in row.iter_mut().enumerate() {
                    let g = grad.weights[j][i][k].coords();
                    for (l, cl) in c.iter_mut().enumerate() {
                        let gl: Complex64 = g.iter().enumerate().map(|(z, &gz)| gz * v[(z, l)]).sum();
                        *cl -= cfg.step_size * gl;
                    }
                }
                let gb: Complex64 = grad.biases[j][i].coords().iter().sum();
                layer.bias[i] -= cfg.step_size * gb;
            }
        }
    }
    let last = loss(&current.to_net()?, samples)?;
    let diverged = !last.is_finite();
    if !diverged {
        trace.push(last);
    }
    Ok(TrainOutcome {
        model: current,
        trace,
        diverged,
    })
}

/// Exponent vectors of all monomials in `m` variables of total degree
/// `≤ degree`, ordered by degree and then lexicographically (descending).
pub fn monomial_exponents(m: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == m - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(m, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        rec(m, d, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

/// Least-squares fit of grid data by polynomials in `v_1..v_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub exponents: Vec<Vec<usize>>,
    /// `coefficients[output][monomial]`.
    pub coefficients: Vec<Vec<Complex64>>,
    /// `‖r‖ / ‖y‖` over all outputs (zero when `y = 0`).
    pub residual: f64,
}

/// Fits `values[z][output]` by polynomials of total degree `≤ degree` in the
/// basis values. Fails if the monomials are not linearly independent on the
/// grid.
///
/// Coordinate bases on a full product grid are fitted by projection onto
/// tensor products of discrete orthonormal polynomials, which is exact and
/// avoids a dense factorization of the (possibly very tall) design matrix.
pub fn fit_polynomial(basis: &Basis, values: &[Vec<Complex64>], degree: usize) -> Result<PolyFit> {
    if values.len() != basis.len() {
        return Err(Error::shape(format!("{} grid values", basis.len()), values.len()));
    }
    let outputs = values.first().map_or(0, Vec::len);
    if values.iter().any(|v| v.len() != outputs) {
        return Err(Error::invalid("grid values must have the same length at every point"));
    }
    match product_axis(basis) {
        Some(axis) => fit_on_product_grid(basis.dim(), &axis, values, degree),
        None => fit_by_svd(basis, values, degree),
    }
}

fn not_separated(degree: usize, points: usize) -> Error {
    Error::Numerical(format!(
        "degree-{degree} monomials are not separated by the {points}-point grid"
    ))
}

fn fit_by_svd(basis: &Basis, values: &[Vec<Complex64>], degree: usize) -> Result<PolyFit> {
    let outputs = values.first().map_or(0, Vec::len);
    let exponents = monomial_exponents(basis.dim(), degree);
    let v = &basis.values;
    let design = DMatrix::from_fn(basis.len(), exponents.len(), |z, c| {
        exponents[c]
            .iter()
            .enumerate()
            .map(|(l, &e)| v[(z, l)].powi(e as i32))
            .product()
    });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-12 * design.nrows() as f64;
    if svd.singular_values.iter().any(|&s| s <= tol) || basis.len() < exponents.len() {
        return Err(not_separated(degree, basis.len()));
    }
    // Real and imaginary parts of every output as right-hand sides.
    let rhs = DMatrix::from_fn(basis.len(), 2 * outputs, |z, c| {
        let y = values[z][c / 2];
        if c % 2 == 0 {
            y.re
        } else {
            y.im
        }
    });
    let sol = svd.solve(&rhs, tol).map_err(|e| Error::Numerical(e.to_string()))?;
    let resid = &design * &sol - &rhs;
    let ynorm = rhs.norm();
    let residual = if ynorm == 0.0 {
        resid.norm()
    } else {
        resid.norm() / ynorm
    };
    let coefficients = (0..outputs)
        .map(|o| {
            (0..exponents.len())
                .map(|c| Complex64::new(sol[(c, 2 * o)], sol[(c, 2 * o + 1)]))
                .collect()
        })
        .collect();
    Ok(PolyFit {
        exponents,
        coefficients,
        residual,
    })
}

/// The axis `a` when the basis is the coordinate functions on the product
/// grid `a^m` in the row-major order of [`Basis::coordinate_grid`].
fn product_axis(basis: &Basis) -> Option<Vec<f64>> {
    let (n, m) = (basis.len(), basis.dim());
    let p = (n as f64).powf(1.0 / m as f64).round() as usize;
    if p < 2 || p.checked_pow(m as u32)? != n || basis.points.iter().any(|pt| pt.len() != m) {
        return None;
    }
    let axis: Vec<f64> = (0..p).map(|i| basis.points[i][m - 1]).collect();
    let mut sorted = axis.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    for (z, pt) in basis.points.iter().enumerate() {
        let mut idx = z;
        for l in (0..m).rev() {
            let a = axis[idx % p];
            if pt[l] != a || basis.values[(z, l)] != a {
                return None;
            }
            idx /= p;
        }
    }
    Some(axis)
}

/// Polynomials `φ_0..φ_degree` orthonormal on the points `axis`, as
/// `(q, t)` with `q[j][i] = φ_j(axis_i)` and `φ_j(s) = Σ_k t[j][k] s^k`.
fn discrete_orthonormal(axis: &[f64], degree: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    for j in 0..=degree {
        let (mut v, mut c) = if j == 0 {
            let mut c = vec![0.0; degree + 1];
            c[0] = 1.0;
            (vec![1.0; axis.len()], c)
        } else {
            let v: Vec<f64> = axis.iter().zip(&q[j - 1]).map(|(a, f)| a * f).collect();
            let mut c = vec![0.0; degree + 1];
            c[1..].copy_from_slice(&t[j - 1][..degree]);
            (v, c)
        };
        // Two Gram-Schmidt passes keep the columns orthonormal to rounding.
        for _ in 0..2 {
            for i in 0..j {
                let d = dot(&v, &q[i]);
                v.iter_mut().zip(&q[i]).for_each(|(x, y)| *x -= d * y);
                c.iter_mut().zip(&t[i]).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        c.iter_mut().for_each(|x| *x /= norm);
        q.push(v);
        t.push(c);
    }
    (q, t)
}

fn fit_on_product_grid(m: usize, axis: &[f64], values: &[Vec<Complex64>], degree: usize) -> Result<PolyFit> {
    use rayon::prelude::*;

    let p = axis.len();
    if degree >= p {
        return Err(not_separated(degree, values.len()));
    }
    let outputs = values.first().map_or(0, Vec::len);
    let exponents = monomial_exponents(m, degree);
    let k = exponents.len();
    let (q, t) = discrete_orthonormal(axis, degree);
    // φ_α(z) = Π_l φ_{α_l}(a_{i_l(z)}) for every multi-index α.
    let row = |z: usize, out: &mut [f64]| {
        let mut digits = vec![0; m];
        let mut idx = z;
        for l in (0..m).rev() {
            digits[l] = idx % p;
            idx /= p;
        }
        for (slot, alpha) in out.iter_mut().zip(&exponents) {
            *slot = alpha.iter().zip(&digits).map(|(&a, &i)| q[a][i]).product();
        }
    };
    // Fixed-size chunks summed in order keep the reduction deterministic.
    const CHUNK: usize = 4096;
    let partial: Vec<Vec<Complex64>> = values
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut acc = vec![Complex64::new(0.0, 0.0); k * outputs];
            let mut phi = vec![0.0; k];
            for (off, y) in chunk.iter().enumerate() {
                row(ci * CHUNK + off, &mut phi);
                for (a, &f) in phi.iter().enumerate() {
                    for (o, &yo) in y.iter().enumerate() {
                        acc[a * outputs + o] += f * yo;
                    }
                }
            }
            acc
        })
        .collect();
    let mut proj = vec![Complex64::new(0.0, 0.0); k * outputs];
    for acc in &partial {
        proj.iter_mut().zip(acc).for_each(|(x, y)| *x += y);
    }
    let sums: Vec<(f64, f64)> = values
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut phi = vec![0.0; k];
            let (mut rr, mut yy) = (0.0, 0.0);
            for (off, y) in chunk.iter().enumerate() {
                row(ci * CHUNK + off, &mut phi);
                for (o, &yo) in y.iter().enumerate() {
                    let fit: Complex64 = phi.iter().enumerate().map(|(a, &f)| f * proj[a * outputs + o]).sum();
                    rr += (yo - fit).norm_sqr();
                    yy += yo.norm_sqr();
                }
            }
            (rr, yy)
        })
        .collect();
    let (rr, yy) = sums.iter().fold((0.0, 0.0), |(a, b), &(r, y)| (a + r, b + y));
    let residual = if yy == 0.0 { rr.sqrt() } else { (rr / yy).sqrt() };
    // Monomial coefficient of s^e: Σ_α c_α Π_l t[α_l][e_l].
    let coefficients = (0..outputs)
        .map(|o| {
            exponents
                .iter()
                .map(|e| {
                    exponents
                        .iter()
                        .enumerate()
                        .map(|(a, alpha)| {
                            let w: f64 = alpha.iter().zip(e).map(|(&al, &el)| t[al][el]).product();
                            w * proj[a * outputs + o]
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(PolyFit {
        exponents,
        coefficients,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyDegreeReport {
    /// Smallest degree whose fit residual is `≤ DEGREE_ACCEPT`.
    pub degree: usize,
    /// Relative fit residual for degrees `0..=L`.
    pub residuals: Vec<f64>,
}

/// Detects the polynomial degree of `z ↦ f_z(x̂)` in `v_1(z)..v_m(z)` for a
/// basis network with linear activations. Fails when no degree `≤ L` fits.
pub fn poly_degree_check(net: &BasisNet, x_hat: &[Complex64]) -> Result<PolyDegreeReport> {
    net.require_linear()?;
    let values = net.slice_outputs(x_hat)?;
    let depth = net.depth();
    let mut residuals = Vec::with_capacity(depth + 1);
    let mut degree = None;
    for d in 0..=depth {
        let r = fit_polynomial(&net.basis, &values, d)?.residual;
        log::debug!("degree {d}: relative residual {r:e}");
        residuals.push(r);
        if degree.is_none() && r <= DEGREE_ACCEPT {
            degree = Some(d);
        }
    }
    let degree = degree.ok_or_else(|| {
        Error::Numerical(format!(
            "no polynomial of degree ≤ {depth} fits (residuals {residuals:?})"
        ))
    })?;
    Ok(PolyDegreeReport { degree, residuals })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerm {
    /// 1-based layer `j` at which the product of basis functions starts.
    pub start_layer: usize,
    /// `(l_j, ..., l_L)`, 0-based basis indices.
    pub indices: Vec<usize>,
    pub value: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyExpansion {
    pub terms: Vec<ExpansionTerm>,
    /// `σ_L(b̂^L)`.
    pub constant: Vec<Complex64>,
}

impl PolyExpansion {
    /// Value of the expansion at basis values `v = (v_1(z), ..., v_m(z))`.
    pub fn eval(&self, v: &[f64]) -> Vec<Complex64> {
        let mut out = self.constant.clone();
        for t in &self.terms {
            let w: f64 = t.indices.iter().map(|&l| v[l]).product();
            for (o, &val) in out.iter_mut().zip(&t.value) {
                *o += w * val;
            }
        }
        out
    }

    /// Collects terms into monomials, keyed by exponent vector.
    pub fn monomial_coefficients(&self, m: usize) -> BTreeMap<Vec<usize>, Vec<Complex64>> {
        let mut out: BTreeMap<Vec<usize>, Vec<Complex64>> = BTreeMap::new();
        out.insert(vec![0; m], self.constant.clone());
        for t in &self.terms {
            let mut e = vec![0; m];
            for &l in &t.indices {
                e[l] += 1;
            }
            let slot = out
                .entry(e)
                .or_insert_with(|| vec![Complex64::new(0.0, 0.0); t.value.len()]);
            for (s, &v) in slot.iter_mut().zip(&t.value) {
                *s += v;
            }
        }
        out
    }
}
