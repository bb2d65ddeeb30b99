//! Averaged networks `A_P f = Σ_i p_i f_{z_i}` and convex optimization of
//! the mixing weights `P` over the simplex.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CStarNet;
use crate::error::{Error, Result};
use crate::hilbert::ModuleVector;

/// Tolerance of the simplex constraint `Σ p_i = 1`.
const SIMPLEX_TOL: f64 = 1e-12;

/// Discrete probability measure on grid indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightsJson")]
pub struct ProbabilityWeights {
    support: Vec<usize>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct WeightsJson {
    support: Vec<usize>,
    weights: Vec<f64>,
}

impl TryFrom<WeightsJson> for ProbabilityWeights {
    type Error = Error;

    fn try_from(j: WeightsJson) -> Result<Self> {
        ProbabilityWeights::new(j.support, j.weights)
    }
}

impl ProbabilityWeights {
    pub fn new(support: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::shape(
                format!("non-empty support with {} weights", support.len()),
                weights.len(),
            ));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("support points must be distinct"));
        }
        if weights.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("probability weights must be finite and ≥ 0"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("probability weights sum to {total}, not 1")));
        }
        Ok(ProbabilityWeights { support, weights })
    }

    pub fn dirac(z: usize) -> Self {
        ProbabilityWeights {
            support: vec![z],
            weights: vec![1.0],
        }
    }

    pub fn uniform(support: Vec<usize>) -> Result<Self> {
        let n = support.len();
        ProbabilityWeights::new(support, normalized(vec![1.0; n]))
    }

    /// Normalizes nonnegative masses onto the simplex.
    pub fn from_masses(support: Vec<usize>, masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) || masses.iter().all(|&m| m == 0.0) {
            return Err(Error::invalid("masses must be finite, ≥ 0 and not all zero"));
        }
        ProbabilityWeights::new(support, normalized(masses))
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `t P + (1 - t) Q` over the union of supports.
    pub fn mix(t: f64, p: &ProbabilityWeights, q: &ProbabilityWeights) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("mixing parameter {t} outside [0, 1]")));
        }
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (&z, &w) in p.support.iter().zip(&p.weights) {
            *acc.entry(z).or_default() += t * w;
        }
        for (&z, &w) in q.support.iter().zip(&q.weights) {
            *acc.entry(z).or_default() += (1.0 - t) * w;
        }
        let (support, masses): (Vec<usize>, Vec<f64>) = acc.into_iter().unzip();
        ProbabilityWeights::new(support, normalized(masses))
    }

    /// Distance of `Σ p_i` from 1 and the most negative weight (0 if none).
    pub fn simplex_defect(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let neg = self.weights.iter().fold(0.0_f64, |m, &p| m.max(-p));
        (total - 1.0).abs().max(neg)
    }
}

fn normalized(masses: Vec<f64>) -> Vec<f64> {
    let total: f64 = masses.iter().sum();
    let mut w: Vec<f64> = masses.iter().map(|m| m / total).collect();
    // Put the rounding error of the sum on the largest weight.
    let err: f64 = 1.0 - w.iter().sum::<f64>();
    if let Some(i) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
        w[i] += err;
    }
    w
}

/// Input in `A^{d_0}` with a target in `C^{d_L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSample {
    pub input: ModuleVector,
    pub target: Vec<Complex64>,
}

/// Slice outputs `F[s][i] = f_{z_i}(x_s)` for every sample and support point.
/// Largest multiple of the global step taken along well-conditioned stretches.
const MAX_STEP_GROWTH: f64 = 1e3;

fn slice_table(net: &CStarNet, samples: &[MeasureSample], support: &[usize]) -> Result<Vec<Vec<Vec<Complex64>>>> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    samples
        .par_iter()
        .map(|s| {
            if s.target.len() != net.output_dim() {
                return Err(Error::shape(
                    format!("target of length {}", net.output_dim()),
                    s.target.len(),
                ));
            }
            support.iter().map(|&z| net.forward_at(&s.input, z)).collect()
        })
        .collect()
}

fn objective_from_table(table: &[Vec<Vec<Complex64>>], samples: &[MeasureSample], p: &[f64]) -> f64 {
    let mut total = 0.0;
    for (row, s) in table.iter().zip(samples) {
        for (o, y) in s.target.iter().enumerate() {
            let avg: Complex64 = row.iter().zip(p).map(|(f, &w)| w * f[o]).sum();
            total += (avg - y).norm_sqr();
        }
    }
    total / samples.len() as f64
}

/// `(1/n) Σ_s ‖A_P f(x_s) - y_s‖²`.
pub fn measure_objective(net: &CStarNet, samples: &[MeasureSample], p: &ProbabilityWeights) -> Result<f64> {
    // Validates support against the grid.
    net.average(&samples.first().ok_or_else(|| Error::invalid("no samples"))?.input, p)?;
    let table = slice_table(net, samples, p.support())?;
    Ok(objective_from_table(&table, samples, p.weights()))
}

/// `L(A_{tP+(1-t)Q} f) - t L(A_P f) - (1 - t) L(A_Q f)`; positive values
/// violate convexity.
pub fn chord_violation(
    net: &CStarNet,
    samples: &[MeasureSample],
    p: &ProbabilityWeights,
    q: &ProbabilityWeights,
    t: f64,
) -> Result<f64> {
    let mid = ProbabilityWeights::mix(t, p, q)?;
    let lp = measure_objective(net, samples, p)?;
    let lq = measure_objective(net, samples, q)?;
    let lm = measure_objective(net, samples, &mid)?;
    Ok(lm - (t * lp + (1.0 - t) * lq))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureOutcome {
    /// Best iterate found.
    pub weights: ProbabilityWeights,
    pub objective: f64,
    pub initial_objective: f64,
    /// Objective at every iterate, starting with `P0`.
    pub trace: Vec<f64>,
    pub step_size: f64,
}

/// Exponentiated-gradient (mirror descent) on the support of `p0`.
///
/// The step is `0.5 / L` with `L` a Lipschitz estimate of the gradient in the
/// l1 geometry. The first step uses the global bound `max_ij |H_ij|`, `H` the
/// Hessian of the quadratic objective; later steps use the curvature
/// `Δgᵀ Δp / ‖Δp‖₁²` along the previous step, which never exceeds the global
/// bound. A step that raises the objective is redone with the global bound.
/// Returns the best iterate, so the objective never exceeds that of `p0`.
pub fn optimize_measure(
    net: &CStarNet,
    samples: &[MeasureSample],
    p0: &ProbabilityWeights,
    steps: usize,
) -> Result<MeasureOutcome> {
    net.average(&samples.first().ok_or_else(|| Error::invalid("no samples"))?.input, p0)?;
    let support = p0.support().to_vec();
    let table = slice_table(net, samples, &support)?;
    let n = samples.len() as f64;
    let k = support.len();
    let mut hess = vec![vec![0.0; k]; k];
    for row in &table {
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = row[i].iter().zip(&row[j]).map(|(a, b)| (a.conj() * b).re).sum();
                hess[i][j] += 2.0 * dot / n;
            }
        }
    }
    let lip = hess.iter().flatten().fold(0.0_f64, |m, &h| m.max(h.abs()));
    let step_size = if lip > 0.0 { 0.5 / lip } else { 0.0 };
    let max_step = step_size * MAX_STEP_GROWTH;

    let gradient = |p: &[f64]| {
        let mut grad = vec![0.0; k];
        for (row, s) in table.iter().zip(samples) {
            for (o, y) in s.target.iter().enumerate() {
                let r: Complex64 = row.iter().zip(p).map(|(f, &w)| w * f[o]).sum::<Complex64>() - y;
                for (g, f) in grad.iter_mut().zip(row) {
                    *g += 2.0 * (f[o].conj() * r).re / n;
                }
            }
        }
        grad
    };
    let update = |p: &[f64], grad: &[f64], eta: f64| {
        let gmin = grad.iter().copied().fold(f64::INFINITY, f64::min);
        normalized(
            p.iter()
                .zip(grad)
                .map(|(&w, &g)| w * (-eta * (g - gmin)).exp())
                .collect(),
        )
    };

    let mut p = p0.weights().to_vec();
    let mut grad = gradient(&p);
    let mut value = objective_from_table(&table, samples, &p);
    let initial = value;
    let mut trace = vec![initial];
    let (mut best_p, mut best) = (p.clone(), initial);
    let mut eta = step_size;
    for _ in 0..steps {
        if step_size == 0.0 {
            break;
        }
        let mut next = update(&p, &grad, eta);
        let mut next_value = objective_from_table(&table, samples, &next);
        if next_value > value && eta > step_size {
            next = update(&p, &grad, step_size);
            next_value = objective_from_table(&table, samples, &next);
        }
        let next_grad = gradient(&next);
        let dp: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        let curvature: f64 = next_grad
            .iter()
            .zip(&grad)
            .zip(next.iter().zip(&p))
            .map(|((g1, g0), (p1, p0))| (g1 - g0) * (p1 - p0))
            .sum::<f64>();
        eta = if dp > 0.0 && curvature > 0.0 {
            (0.5 * dp * dp / curvature).clamp(step_size, max_step)
        } else {
            step_size
        };
        p = next;
        grad = next_grad;
        value = next_value;
        trace.push(value);
        if value < best {
            best = value;
            best_p = p.clone();
        }
    }
    Ok(MeasureOutcome {
        weights: ProbabilityWeights::new(support, best_p)?,
        objective: best,
        initial_objective: initial,
        trace,
        step_size,
    })
}
