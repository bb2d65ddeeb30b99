//! Squared loss, reverse-mode gradients and full-batch gradient descent.
//!
//! Gradients are stored as `∂L/∂Re + i ∂L/∂Im` per coordinate. With that
//! convention a product `c = a b` in any of the supported algebras pulls back
//! as `g_a = g_c b*` and `g_b = a* g_c`, so the whole backward pass is written
//! with algebra operations.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{CStarNet, WeightSide};
use crate::algebra::Element;
use crate::error::{Error, Result};
use crate::hilbert::ModuleVector;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: ModuleVector,
    pub target: ModuleVector,
}

/// Gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradient {
    pub weights: Vec<Vec<Vec<Element>>>,
    pub biases: Vec<Vec<Element>>,
}

impl NetGradient {
    fn zeros(net: &CStarNet) -> Self {
        let zero = net.algebra().zero();
        NetGradient {
            weights: net
                .layers()
                .iter()
                .map(|l| vec![vec![zero.clone(); l.in_dim()]; l.out_dim()])
                .collect(),
            biases: net.layers().iter().map(|l| vec![zero.clone(); l.out_dim()]).collect(),
        }
    }

    fn accumulate(&mut self, other: &NetGradient) {
        for (a, b) in self
            .weights
            .iter_mut()
            .flatten()
            .flatten()
            .zip(other.weights.iter().flatten().flatten())
        {
            a.axpy(ONE, b);
        }
        for (a, b) in self.biases.iter_mut().flatten().zip(other.biases.iter().flatten()) {
            a.axpy(ONE, b);
        }
    }

    /// All coordinates, ordered by layer, then row, then column with the
    /// bias as the last column.
    pub fn coordinates(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for (gw, gb) in self.weights.iter().zip(&self.biases) {
            for (row, b) in gw.iter().zip(gb) {
                for e in row.iter().chain(std::iter::once(b)) {
                    out.extend_from_slice(e.coords());
                }
            }
        }
        out
    }
}

fn check_sample(net: &CStarNet, s: &Sample) -> Result<()> {
    if s.target.len() != net.output_dim() {
        return Err(Error::shape(
            format!("target of length {}", net.output_dim()),
            s.target.len(),
        ));
    }
    if s.target.algebra() != net.algebra() {
        return Err(Error::DescriptorMismatch {
            left: net.algebra().to_string(),
            right: s.target.algebra().to_string(),
        });
    }
    Ok(())
}

fn squared_error(out: &[Element], target: &ModuleVector) -> f64 {
    out.iter()
        .zip(target.entries())
        .flat_map(|(o, t)| o.coords().iter().zip(t.coords()).map(|(a, b)| (a - b).norm_sqr()))
        .sum()
}

/// `(1/n) Σ_s Σ_i Σ_coords |f(x_s)_i - y_{s,i}|²`.
pub fn loss(net: &CStarNet, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let errs = samples
        .par_iter()
        .map(|s| {
            check_sample(net, s)?;
            Ok(squared_error(net.forward(&s.input)?.entries(), &s.target))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / samples.len() as f64)
}

fn sample_gradient(net: &CStarNet, s: &Sample, scale: f64) -> Result<(f64, NetGradient)> {
    check_sample(net, s)?;
    let trace = net.trace(&s.input)?;
    let out = trace.activations.last().expect("non-empty");
    let err = squared_error(out, &s.target);
    let mut grad = NetGradient::zeros(net);
    let mut g: Vec<Element> = out
        .iter()
        .zip(s.target.entries())
        .map(|(o, t)| o.sub(t).map(|d| d.scale(Complex64::new(2.0 * scale, 0.0))))
        .collect::<Result<_>>()?;
    for (j, layer) in net.layers().iter().enumerate().rev() {
        let g_pre: Vec<Element> = g
            .iter()
            .zip(&trace.pre[j])
            .map(|(ga, p)| {
                let coords = ga
                    .coords()
                    .iter()
                    .zip(p.coords())
                    .map(|(&gc, &t)| layer.activation.backward(t, gc))
                    .collect();
                net.algebra().element(coords)
            })
            .collect::<Result<_>>()?;
        let input = &trace.activations[j];
        let mut g_in = vec![net.algebra().zero(); layer.in_dim()];
        for (i, gp) in g_pre.iter().enumerate() {
            for (k, xk) in input.iter().enumerate() {
                let w = &layer.weights[i][k];
                let (gw, gx) = match layer.side {
                    WeightSide::Left => (gp.mul(&xk.star())?, w.star().mul(gp)?),
                    WeightSide::Right => (xk.star().mul(gp)?, gp.mul(&w.star())?),
                };
                grad.weights[j][i][k] = gw;
                g_in[k].axpy(ONE, &gx);
            }
            grad.biases[j][i] = gp.clone();
        }
        g = g_in;
    }
    Ok((err * scale, grad))
}

/// Loss and its gradient. Per-sample work runs in parallel; the reduction is
/// in sample order so results do not depend on the thread count.
pub fn loss_and_gradient(net: &CStarNet, samples: &[Sample]) -> Result<(f64, NetGradient)> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let scale = 1.0 / samples.len() as f64;
    let parts = samples
        .par_iter()
        .map(|s| sample_gradient(net, s, scale))
        .collect::<Result<Vec<_>>>()?;
    let mut total = NetGradient::zeros(net);
    let mut value = 0.0;
    for (v, g) in &parts {
        value += v;
        total.accumulate(g);
    }
    Ok((value, total))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub model: T,
    /// Loss before each step followed by the final loss (`steps + 1` entries
    /// unless training diverged).
    pub trace: Vec<f64>,
    pub diverged: bool,
}

/// Full-batch gradient descent on every coordinate of every weight and bias.
/// A non-finite loss stops training with `diverged` set; the model returned is
/// the one whose loss was first non-finite.
pub fn train(net: &CStarNet, samples: &[Sample], cfg: TrainConfig) -> Result<TrainOutcome<CStarNet>> {
    if !(cfg.step_size > 0.0) || !cfg.step_size.is_finite() {
        return Err(Error::invalid(format!("step size must be > 0, got {}", cfg.step_size)));
    }
    let mut current = net.clone();
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    for step in 0..cfg.steps {
        let (value, grad) = loss_and_gradient(&current, samples)?;
        if !value.is_finite() {
            log::warn!("training diverged at step {step}");
            return Ok(TrainOutcome {
                model: current,
                trace,
                diverged: true,
            });
        }
        trace.push(value);
        let mut next = current.clone();
        apply_gradient(&mut next, &grad, cfg.step_size);
        current = next;
    }
    let last = loss(&current, samples)?;
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

pub(crate) fn apply_gradient(net: &mut CStarNet, grad: &NetGradient, step: f64) {
    let minus = Complex64::new(-step, 0.0);
    for (layer, (gw, gb)) in net.layers_mut().iter_mut().zip(grad.weights.iter().zip(&grad.biases)) {
        for (w, g) in layer.weights.iter_mut().flatten().zip(gw.iter().flatten()) {
            w.axpy(minus, g);
        }
        for (b, g) in layer.bias.iter_mut().zip(gb) {
            b.axpy(minus, g);
        }
    }
}

fn perturbed(net: &CStarNet, index: usize, delta: Complex64) -> Result<CStarNet> {
    let mut out = net.clone();
    let per = net.algebra().coord_len();
    let (mut elem, coord) = (index / per, index % per);
    for layer in out.layers_mut() {
        let nw = layer.out_dim() * (layer.in_dim() + 1);
        if elem < nw {
            let (i, k) = (elem / (layer.in_dim() + 1), elem % (layer.in_dim() + 1));
            let target = if k < layer.in_dim() {
                &mut layer.weights[i][k]
            } else {
                &mut layer.bias[i]
            };
            let mut coords = target.coords().to_vec();
            coords[coord] += delta;
            *target = target.algebra().element(coords)?;
            return Ok(out);
        }
        elem -= nw;
    }
    Err(Error::invalid(format!("parameter index {index} out of range")))
}

/// Compares backprop with central differences (`h = 1e-5`) on the real and
/// imaginary part of every coordinate. The error is
/// `max_p |g_p - ĝ_p| / max(max_p |g_p|, max_p |ĝ_p|)`, i.e. relative to the
/// scale of the gradient.
pub fn grad_check(net: &CStarNet, x: &ModuleVector, y: &ModuleVector) -> Result<f64> {
    const H: f64 = 1e-5;
    let samples = [Sample {
        input: x.clone(),
        target: y.clone(),
    }];
    let (_, grad) = loss_and_gradient(net, &samples)?;
    let analytic = grad.coordinates();
    debug_assert_eq!(analytic.len(), net.coordinate_count());
    let numeric = (0..analytic.len())
        .into_par_iter()
        .map(|p| {
            let mut g = [0.0; 2];
            for (slot, dir) in g.iter_mut().zip([Complex64::new(H, 0.0), Complex64::new(0.0, H)]) {
                let plus = loss(&perturbed(net, p, dir)?, &samples)?;
                let minus = loss(&perturbed(net, p, -dir)?, &samples)?;
                *slot = (plus - minus) / (2.0 * H);
            }
            Ok(Complex64::new(g[0], g[1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scale = 0.0_f64;
    let mut worst = 0.0_f64;
    for (a, n) in analytic.iter().zip(&numeric) {
        scale = scale.max(a.re.abs()).max(a.im.abs()).max(n.re.abs()).max(n.im.abs());
        worst = worst.max((a.re - n.re).abs()).max((a.im - n.im).abs());
    }
    Ok(if scale == 0.0 { worst } else { worst / scale })
}
