//! Feed-forward networks whose weights, biases and signals live in a
//! C*-algebra.
//!
//! A layer maps `x ↦ σ(W x + b)` with `W ∈ A^{d_j × d_{j-1}}`, `b ∈ A^{d_j}`
//! and `σ` applied to every concrete coordinate. Over a grid algebra `C(Z)`
//! each grid point `z` carries an ordinary network `f_z`, recovered by
//! [`CStarNet::forward_at`] and [`CStarNet::instantiate`].

mod backprop;
mod basis;
mod equivariance;
mod measure;
mod tied;


use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, AlgebraKind, CoordsJson, Element};
use crate::error::{Error, Result};
use crate::hilbert::ModuleVector;
use crate::linalg::{CMatrix, CVector};

pub use backprop::{grad_check, loss, loss_and_gradient, train, NetGradient, Sample, TrainConfig, TrainOutcome};
pub use basis::{
    fit_polynomial, monomial_exponents, poly_degree_check, train_basis, Basis, BasisLayer, BasisNet, ExpansionTerm,
    PolyDegreeReport, PolyExpansion, PolyFit, DEGREE_ACCEPT, DEGREE_REJECT,
};
pub use equivariance::{equivariance_check, random_group_net, right_translate, translate_vector};
pub use measure::{
    chord_violation, measure_objective, optimize_measure, MeasureOutcome, MeasureSample, ProbabilityWeights,
};
pub use tied::{build_tied_net, parameter_count, parameter_indices, AlphaMap, ParamIndex, ParameterMap, TiedNet};

/// Coordinatewise activation. `relu` and `tanh` act on real and imaginary
/// parts separately; `linear` multiplies by a fixed complex slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Linear { slope: Complex64 },
    Relu,
    Tanh,
}

impl Activation {
    pub fn linear(slope: f64) -> Self {
        Activation::Linear {
            slope: Complex64::new(slope, 0.0),
        }
    }

    pub fn apply(&self, t: Complex64) -> Complex64 {
        match self {
            Activation::Identity => t,
            Activation::Linear { slope } => slope * t,
            Activation::Relu => Complex64::new(t.re.max(0.0), t.im.max(0.0)),
            Activation::Tanh => Complex64::new(t.re.tanh(), t.im.tanh()),
        }
    }

    /// Pulls the gradient `g = ∂L/∂Re + i ∂L/∂Im` of an output coordinate back
    /// to its pre-activation `t`.
    pub(crate) fn backward(&self, t: Complex64, g: Complex64) -> Complex64 {
        match self {
            Activation::Identity => g,
            Activation::Linear { slope } => slope.conj() * g,
            Activation::Relu => {
                Complex64::new(if t.re > 0.0 { g.re } else { 0.0 }, if t.im > 0.0 { g.im } else { 0.0 })
            }
            Activation::Tanh => {
                let (a, b) = (t.re.tanh(), t.im.tanh());
                Complex64::new((1.0 - a * a) * g.re, (1.0 - b * b) * g.im)
            }
        }
    }

    /// Satisfies `σ(Σ c_i u_i + b) = Σ σ(c_i) u_i + σ(b)`.
    pub fn is_linear(&self) -> bool {
        matches!(self, Activation::Identity | Activation::Linear { .. })
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, Activation::Relu)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Identity => write!(f, "identity"),
            Activation::Linear { slope } if slope.im == 0.0 => write!(f, "linear:{}", slope.re),
            Activation::Linear { slope } => write!(f, "linear:{}+{}i", slope.re, slope.im),
            Activation::Relu => write!(f, "relu"),
            Activation::Tanh => write!(f, "tanh"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `identity`, `relu`, `tanh`, `linear` and `linear:<slope>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::linear(1.0)),
            other => {
                let slope = other
                    .strip_prefix("linear:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown activation `{other}`")))?;
                Ok(Activation::linear(slope))
            }
        }
    }
}

/// Which side the weights multiply the signal from. Only `Left` gives
/// right-translation equivariant layers over a noncommutative group algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSide {
    #[default]
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CStarLayer {
    /// `weights[i][k]` is the `(i, k)` entry of `W`.
    pub weights: Vec<Vec<Element>>,
    pub bias: Vec<Element>,
    pub activation: Activation,
    pub side: WeightSide,
}

impl CStarLayer {
    pub fn new(weights: Vec<Vec<Element>>, bias: Vec<Element>, activation: Activation) -> Result<Self> {
        let layer = CStarLayer {
            weights,
            bias,
            activation,
            side: WeightSide::Left,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn with_side(mut self, side: WeightSide) -> Self {
        self.side = side;
        self
    }

    fn validate(&self) -> Result<()> {
        let out = self.bias.len();
        if out == 0 || self.weights.len() != out {
            return Err(Error::shape(
                format!("{out} weight rows (non-empty)"),
                self.weights.len(),
            ));
        }
        let input = self.weights[0].len();
        if input == 0 {
            return Err(Error::shape("non-empty weight rows", 0));
        }
        let algebra = self.bias[0].algebra();
        for row in &self.weights {
            if row.len() != input {
                return Err(Error::shape(format!("rows of length {input}"), row.len()));
            }
        }
        for e in self.weights.iter().flatten().chain(&self.bias) {
            if e.algebra() != algebra {
                return Err(Error::DescriptorMismatch {
                    left: algebra.to_string(),
                    right: e.algebra().to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn algebra(&self) -> &Algebra {
        self.bias[0].algebra()
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    /// `W x + b` (or `x W + b` for right-acting weights).
    pub fn pre_activation(&self, x: &[Element]) -> Result<Vec<Element>> {
        if x.len() != self.in_dim() {
            return Err(Error::shape(format!("input of length {}", self.in_dim()), x.len()));
        }
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let mut acc = b.clone();
                for (w, xk) in row.iter().zip(x) {
                    let t = match self.side {
                        WeightSide::Left => w.mul(xk)?,
                        WeightSide::Right => xk.mul(w)?,
                    };
                    acc.axpy(Complex64::new(1.0, 0.0), &t);
                }
                Ok(acc)
            })
            .collect()
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    /// `activations[0]` is the input, `activations[j]` the output of layer `j`.
    pub activations: Vec<Vec<Element>>,
    /// Pre-activations of every layer.
    pub pre: Vec<Vec<Element>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CStarNet {
    algebra: Algebra,
    layers: Vec<CStarLayer>,
}

impl CStarNet {
    pub fn new(layers: Vec<CStarLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::invalid("a network needs at least one layer"))?;
        let algebra = first.algebra().clone();
        for layer in &layers {
            layer.validate()?;
            if layer.algebra() != &algebra {
                return Err(Error::DescriptorMismatch {
                    left: algebra.to_string(),
                    right: layer.algebra().to_string(),
                });
            }
        }
        for pair in layers.windows(2) {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(Error::shape(
                    format!("layer input of width {}", pair[0].out_dim()),
                    pair[1].in_dim(),
                ));
            }
        }
        Ok(CStarNet { algebra, layers })
    }

    /// Random initialization: every coordinate uniform on `[-s, s]` with
    /// `s = 1/√(d_{j-1} m)`, `m` the coordinate count of the algebra.
    pub fn random<R: Rng + ?Sized>(
        algebra: &Algebra,
        widths: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        check_architecture(widths, activations)?;
        let m = algebra.coord_len() as f64;
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let scale = Complex64::new(1.0 / ((w[0] as f64) * m).sqrt(), 0.0);
                let mut draw = || algebra.random_real_element(&mut *rng).scale(scale);
                let weights = (0..w[1]).map(|_| (0..w[0]).map(|_| draw()).collect()).collect();
                let bias = (0..w[1]).map(|_| draw()).collect();
                CStarLayer::new(weights, bias, act)
            })
            .collect::<Result<Vec<_>>>()?;
        CStarNet::new(layers)
    }

    /// Net over `algebra` whose every parameter is the constant function
    /// (scalar multiple of the unit) given by `net`.
    pub fn from_scalar_net(algebra: &Algebra, net: &ScalarNet) -> Result<Self> {
        let layers = net
            .layers
            .iter()
            .map(|l| {
                let weights = (0..l.weights.nrows())
                    .map(|i| {
                        (0..l.weights.ncols())
                            .map(|k| algebra.constant(l.weights[(i, k)]))
                            .collect()
                    })
                    .collect();
                let bias = l.bias.iter().map(|&b| algebra.constant(b)).collect();
                CStarLayer::new(weights, bias, l.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        CStarNet::new(layers)
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn layers(&self) -> &[CStarLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [CStarLayer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `d_0, d_1, ..., d_L`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim())
            .chain(self.layers.iter().map(CStarLayer::out_dim))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Number of complex coordinates over all weights and biases.
    pub fn coordinate_count(&self) -> usize {
        let per = self.algebra.coord_len();
        self.layers.iter().map(|l| l.out_dim() * (l.in_dim() + 1) * per).sum()
    }

    fn check_input(&self, x: &ModuleVector) -> Result<()> {
        if x.algebra() != &self.algebra {
            return Err(Error::DescriptorMismatch {
                left: self.algebra.to_string(),
                right: x.algebra().to_string(),
            });
        }
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!("input of length {}", self.input_dim()), x.len()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &ModuleVector) -> Result<ModuleVector> {
        let trace = self.trace(x)?;
        ModuleVector::new(trace.activations.into_iter().last().expect("non-empty"))
    }

    pub(crate) fn trace(&self, x: &ModuleVector) -> Result<Trace> {
        self.check_input(x)?;
        let mut activations = vec![x.entries().to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let p = layer.pre_activation(activations.last().expect("non-empty"))?;
            let a = p.iter().map(|e| e.map(|t| layer.activation.apply(t))).collect();
            pre.push(p);
            activations.push(a);
        }
        Ok(Trace { activations, pre })
    }

    fn grid_len(&self) -> Result<usize> {
        match self.algebra.kind() {
            AlgebraKind::GridFunction { weights } => Ok(weights.len()),
            _ => Err(Error::Unsupported(format!(
                "grid slices need a grid-function algebra, got {}",
                self.algebra
            ))),
        }
    }

    /// The scalar network `f_z` at grid index `z`, evaluated on slice `z` of
    /// the input. Computed with scalar arithmetic only.
    pub fn forward_at(&self, x: &ModuleVector, z: usize) -> Result<Vec<Complex64>> {
        let m = self.grid_len()?;
        self.check_input(x)?;
        if z >= m {
            return Err(Error::invalid(format!("grid index {z} out of range for {m} points")));
        }
        let mut u: Vec<Complex64> = x.entries().iter().map(|e| e.coords()[z]).collect();
        for layer in &self.layers {
            u = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, b)| {
                    // Same summation order as `pre_activation`, so slices agree exactly.
                    let mut s = b.coords()[z];
                    for (w, &uk) in row.iter().zip(&u) {
                        s += w.coords()[z] * uk;
                    }
                    layer.activation.apply(s)
                })
                .collect();
        }
        Ok(u)
    }

    /// Scalar network with `Ŵ^j = W^j(z)`, `b̂^j = b^j(z)`.
    pub fn instantiate(&self, z: usize) -> Result<ScalarNet> {
        let m = self.grid_len()?;
        if z >= m {
            return Err(Error::invalid(format!("grid index {z} out of range for {m} points")));
        }
        let layers = self
            .layers
            .iter()
            .map(|l| ScalarLayer {
                weights: CMatrix::from_fn(l.out_dim(), l.in_dim(), |i, k| l.weights[i][k].coords()[z]),
                bias: CVector::from_iterator(l.out_dim(), l.bias.iter().map(|b| b.coords()[z])),
                activation: l.activation,
            })
            .collect();
        ScalarNet::new(layers)
    }

    /// `Σ_i p_i f_{z_i}(x)`.
    pub fn average(&self, x: &ModuleVector, p: &ProbabilityWeights) -> Result<Vec<Complex64>> {
        let m = self.grid_len()?;
        if let Some(&z) = p.support().iter().find(|&&z| z >= m) {
            return Err(Error::invalid(format!("support point {z} is off the {m}-point grid")));
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); self.output_dim()];
        for (&z, &w) in p.support().iter().zip(p.weights()) {
            for (a, v) in acc.iter_mut().zip(self.forward_at(x, z)?) {
                *a += w * v;
            }
        }
        Ok(acc)
    }
}

pub(crate) fn check_architecture(widths: &[usize], activations: &[Activation]) -> Result<()> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::invalid(format!(
            "widths must list d_0..d_L with every d_j ≥ 1, got {widths:?}"
        )));
    }
    if activations.len() != widths.len() - 1 {
        return Err(Error::shape(
            format!("{} activations", widths.len() - 1),
            activations.len(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarLayer {
    pub weights: CMatrix,
    pub bias: CVector,
    pub activation: Activation,
}

/// Ordinary complex-valued feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarNet {
    pub layers: Vec<ScalarLayer>,
}

impl ScalarNet {
    pub fn new(layers: Vec<ScalarLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        for l in &layers {
            if l.weights.nrows() != l.bias.len() || l.weights.is_empty() {
                return Err(Error::shape(format!("{} weight rows", l.bias.len()), l.weights.nrows()));
            }
        }
        for pair in layers.windows(2) {
            if pair[1].weights.ncols() != pair[0].weights.nrows() {
                return Err(Error::shape(
                    format!("layer input of width {}", pair[0].weights.nrows()),
                    pair[1].weights.ncols(),
                ));
            }
        }
        Ok(ScalarNet { layers })
    }

    /// Real parameters drawn uniformly from `[-bound, bound]`.
    pub fn random_real<R: Rng + ?Sized>(
        widths: &[usize],
        activations: &[Activation],
        bound: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_architecture(widths, activations)?;
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| ScalarLayer {
                weights: CMatrix::from_fn(w[1], w[0], |_, _| Complex64::new(rng.gen_range(-bound..=bound), 0.0)),
                bias: CVector::from_fn(w[1], |_, _| Complex64::new(rng.gen_range(-bound..=bound), 0.0)),
                activation,
            })
            .collect();
        ScalarNet::new(layers)
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].weights.ncols())
            .chain(self.layers.iter().map(|l| l.weights.nrows()))
            .collect()
    }

    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.layers[0].weights.ncols() {
            return Err(Error::shape(
                format!("input of length {}", self.layers[0].weights.ncols()),
                x.len(),
            ));
        }
        let mut u = CVector::from_column_slice(x);
        for l in &self.layers {
            u = (&l.weights * u + &l.bias).map(|t| l.activation.apply(t));
        }
        Ok(u.iter().copied().collect())
    }

    /// Parameter value at index `(j, i, k)`; `k = d_{j-1}` addresses the bias.
    pub fn parameter(&self, idx: ParamIndex) -> Option<Complex64> {
        let l = self.layers.get(idx.layer)?;
        if idx.row >= l.weights.nrows() {
            return None;
        }
        match idx.col.cmp(&l.weights.ncols()) {
            std::cmp::Ordering::Less => Some(l.weights[(idx.row, idx.col)]),
            std::cmp::Ordering::Equal => Some(l.bias[idx.row]),
            std::cmp::Ordering::Greater => None,
        }
    }

    /// Every parameter is real and lies in `[-bound, bound]`.
    pub fn in_omega(&self, bound: f64) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .all(|w| w.im == 0.0 && w.re.abs() <= bound)
    }

    pub fn max_abs_diff(&self, other: &ScalarNet) -> f64 {
        if self.widths() != other.widths() {
            return f64::INFINITY;
        }
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| {
                a.weights
                    .iter()
                    .zip(b.weights.iter())
                    .chain(a.bias.iter().zip(b.bias.iter()))
                    .map(|(x, y)| (x - y).norm())
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    activation: Activation,
    #[serde(default)]
    side: WeightSide,
    weights: Vec<Vec<CoordsJson>>,
    bias: Vec<CoordsJson>,
}

#[derive(Serialize, Deserialize)]
struct NetJson {
    algebra: Algebra,
    layers: Vec<LayerJson>,
}

impl Serialize for CStarNet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetJson {
            algebra: self.algebra.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    activation: l.activation,
                    side: l.side,
                    weights: l
                        .weights
                        .iter()
                        .map(|row| row.iter().map(CoordsJson::from_element).collect())
                        .collect(),
                    bias: l.bias.iter().map(CoordsJson::from_element).collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CStarNet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = NetJson::deserialize(d)?;
        let build = || -> Result<CStarNet> {
            let layers = j
                .layers
                .iter()
                .map(|l| {
                    let weights = l
                        .weights
                        .iter()
                        .map(|row| row.iter().map(|c| c.to_element(&j.algebra)).collect())
                        .collect::<Result<_>>()?;
                    let bias = l.bias.iter().map(|c| c.to_element(&j.algebra)).collect::<Result<_>>()?;
                    Ok(CStarLayer::new(weights, bias, l.activation)?.with_side(l.side))
                })
                .collect::<Result<Vec<_>>>()?;
            CStarNet::new(layers)
        };
        build().map_err(serde::de::Error::custom)
    }
}
