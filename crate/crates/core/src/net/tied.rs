//! Weight tying: networks over `Z = W^K` whose parameters in block `M_l`
//! all follow the single coordinate `z_l` through a surjection `α: W → Ω`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CStarLayer, CStarNet, ScalarNet};
use crate::algebra::Algebra;
use crate::error::{Error, Result};

/// Position of a parameter: layer `j` (0-based), row `i`, column `k`;
/// `k = d_{j-1}` addresses the bias of row `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamIndex {
    pub layer: usize,
    pub row: usize,
    pub col: usize,
}

/// `N = Σ_j d_j (d_{j-1} + 1)`.
pub fn parameter_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

/// All parameter positions in layer/row/column order.
pub fn parameter_indices(widths: &[usize]) -> Vec<ParamIndex> {
    let mut out = Vec::with_capacity(parameter_count(widths));
    for (layer, w) in widths.windows(2).enumerate() {
        for row in 0..w[1] {
            for col in 0..=w[0] {
                out.push(ParamIndex { layer, row, col });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMap {
    /// `W = Ω = [-B, B]`, `α(z) = z`.
    Identity,
    /// `W = R`, `α(z) = B tanh(z)`; onto the open interval `(-B, B)`.
    ScaledTanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    pub alpha: AlphaMap,
    /// Half-width `B` of `Ω = [-B, B]`.
    pub bound: f64,
    /// Tying blocks `M_1..M_K`. Parameters outside every block keep the
    /// template value.
    pub blocks: Vec<Vec<ParamIndex>>,
}

impl ParameterMap {
    pub const DEFAULT_BOUND: f64 = 10.0;

    pub fn new(alpha: AlphaMap, bound: f64, blocks: Vec<Vec<ParamIndex>>) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::invalid(format!("Ω bound must be > 0, got {bound}")));
        }
        let mut seen: Vec<ParamIndex> = blocks.iter().flatten().copied().collect();
        seen.sort();
        if seen.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::invalid("tying blocks must be disjoint"));
        }
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::invalid("tying blocks must be non-empty"));
        }
        Ok(ParameterMap { alpha, bound, blocks })
    }

    /// `K = N`: every parameter on its own coordinate.
    pub fn untied(widths: &[usize], alpha: AlphaMap, bound: f64) -> Result<Self> {
        ParameterMap::new(
            alpha,
            bound,
            parameter_indices(widths).into_iter().map(|p| vec![p]).collect(),
        )
    }

    /// `K = 1`: every parameter tied to one coordinate.
    pub fn fully_tied(widths: &[usize], alpha: AlphaMap, bound: f64) -> Result<Self> {
        ParameterMap::new(alpha, bound, vec![parameter_indices(widths)])
    }

    /// `K = 0`: `Z` is a single point and the net is the template itself.
    pub fn frozen(bound: f64) -> Result<Self> {
        ParameterMap::new(AlphaMap::Identity, bound, Vec::new())
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    fn validate_for(&self, widths: &[usize]) -> Result<()> {
        for p in self.blocks.iter().flatten() {
            let ok = p.layer + 1 < widths.len() && p.row < widths[p.layer + 1] && p.col <= widths[p.layer];
            if !ok {
                return Err(Error::invalid(format!(
                    "parameter index {p:?} outside widths {widths:?}"
                )));
            }
        }
        Ok(())
    }

    /// `α(z)`. Identity maps reject points outside `[-B, B]`.
    pub fn alpha_value(&self, z: f64) -> Result<f64> {
        match self.alpha {
            AlphaMap::Identity if z.abs() <= self.bound => Ok(z),
            AlphaMap::Identity => Err(Error::invalid(format!("{z} lies outside W = [-{0}, {0}]", self.bound))),
            AlphaMap::ScaledTanh if z.is_finite() => Ok(self.bound * z.tanh()),
            AlphaMap::ScaledTanh => Err(Error::invalid(format!("{z} is not a point of W"))),
        }
    }

    /// Some `z` with `α(z) = w`.
    pub fn preimage(&self, w: f64) -> Result<f64> {
        match self.alpha {
            AlphaMap::Identity if w.abs() <= self.bound => Ok(w),
            AlphaMap::ScaledTanh if w.abs() < self.bound => Ok((w / self.bound).atanh()),
            _ => Err(Error::invalid(format!(
                "{w} is not in the range of α over Ω bound {}",
                self.bound
            ))),
        }
    }

    /// The point of `W^K` at which the tied net instantiates to `target`.
    /// Fails if `target` is outside `Ω`, disagrees with the template on
    /// untied parameters, or differs within a tied block.
    pub fn encode(&self, template: &ScalarNet, target: &ScalarNet) -> Result<Vec<f64>> {
        let widths = target.widths();
        if template.widths() != widths {
            return Err(Error::shape(
                format!("widths {:?}", template.widths()),
                format!("{widths:?}"),
            ));
        }
        self.validate_for(&widths)?;
        let mut tied = vec![false; parameter_count(&widths)];
        let mut point = Vec::with_capacity(self.k());
        let all = parameter_indices(&widths);
        for block in &self.blocks {
            let first = target.parameter(block[0]).expect("validated");
            if first.im != 0.0 || block.iter().any(|&p| target.parameter(p) != Some(first)) {
                return Err(Error::invalid("target is not constant and real on a tied block"));
            }
            for p in block {
                tied[all.iter().position(|q| q == p).expect("validated")] = true;
            }
            point.push(self.preimage(first.re)?);
        }
        for (p, _) in all.iter().zip(&tied).filter(|(_, &t)| !t) {
            if template.parameter(*p) != target.parameter(*p) {
                return Err(Error::invalid(format!(
                    "untied parameter {p:?} differs from the template"
                )));
            }
        }
        Ok(point)
    }
}

/// Tied network over the grid `points ⊂ W^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiedNet {
    pub net: CStarNet,
    pub points: Vec<Vec<f64>>,
    pub map: ParameterMap,
}

impl TiedNet {
    /// Grid index of `z`, if it is one of the sample points.
    pub fn index_of(&self, z: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p == z)
    }
}

/// Builds the grid-algebra net over `points ⊂ W^K`: parameter `(j, i, k)` in
/// block `M_l` equals `α(z_l)` at every point `z`; all other parameters are
/// the constant template value. With `K = 0` the only point is the empty one.
pub fn build_tied_net(pm: &ParameterMap, template: &ScalarNet, points: Vec<Vec<f64>>) -> Result<TiedNet> {
    let widths = template.widths();
    pm.validate_for(&widths)?;
    if points.is_empty() {
        return Err(Error::invalid("a tied net needs at least one point of W^K"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != pm.k()) {
        return Err(Error::shape(format!("points of W^{}", pm.k()), p.len()));
    }
    let algebra = Algebra::grid(points.len())?;
    let mut owner = std::collections::HashMap::new();
    for (l, block) in pm.blocks.iter().enumerate() {
        for p in block {
            owner.insert(*p, l);
        }
    }
    let alphas: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().map(|&z| pm.alpha_value(z)).collect())
        .collect::<Result<_>>()?;
    let param = |idx: ParamIndex| -> Result<crate::algebra::Element> {
        match owner.get(&idx) {
            Some(&l) => algebra.element(alphas.iter().map(|a| Complex64::new(a[l], 0.0)).collect()),
            None => Ok(algebra.constant(template.parameter(idx).expect("validated"))),
        }
    };
    let layers = template
        .layers
        .iter()
        .enumerate()
        .map(|(layer, l)| {
            let (out, input) = (l.weights.nrows(), l.weights.ncols());
            let weights = (0..out)
                .map(|row| (0..input).map(|col| param(ParamIndex { layer, row, col })).collect())
                .collect::<Result<Vec<Vec<_>>>>()?;
            let bias = (0..out)
                .map(|row| param(ParamIndex { layer, row, col: input }))
                .collect::<Result<Vec<_>>>()?;
            CStarLayer::new(weights, bias, l.activation)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TiedNet {
        net: CStarNet::new(layers)?,
        points,
        map: pm.clone(),
    })
}
