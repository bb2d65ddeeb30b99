//! JSON encoding of descriptors and elements.
//!
//! An element is `{ "kind", "shape", "re": [...], "im": [...] }`; grid
//! descriptors add `"weights"`, group descriptors add their multiplication
//! table as a row-major integer array under `"table"`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Algebra, AlgebraKind, Element, GroupTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorJson {
    pub kind: String,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementJson {
    #[serde(flatten)]
    pub descriptor: DescriptorJson,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&Algebra> for DescriptorJson {
    fn from(a: &Algebra) -> Self {
        let (kind, shape, weights, table) = match a.kind() {
            AlgebraKind::Scalar => ("scalar", vec![], None, None),
            AlgebraKind::DenseMatrix { dim } => ("dense-matrix", vec![*dim, *dim], None, None),
            AlgebraKind::Circulant { dim } => ("circulant", vec![*dim], None, None),
            AlgebraKind::BlockDiagonal { blocks } => ("block-diagonal", blocks.clone(), None, None),
            AlgebraKind::GridFunction { weights } => {
                ("grid-function", vec![weights.len()], Some(weights.clone()), None)
            }
            AlgebraKind::Group(g) => ("group-algebra", vec![g.order()], None, Some(g.table().to_vec())),
        };
        DescriptorJson {
            kind: kind.to_string(),
            shape,
            weights,
            table,
        }
    }
}

impl TryFrom<DescriptorJson> for Algebra {
    type Error = Error;

    fn try_from(d: DescriptorJson) -> Result<Self> {
        let one = |shape: &[usize]| -> Result<usize> {
            match shape {
                [n] => Ok(*n),
                _ => Err(Error::InvalidDescriptor(format!(
                    "{} expects a one-entry shape, got {shape:?}",
                    d.kind
                ))),
            }
        };
        match d.kind.as_str() {
            "scalar" => Ok(Algebra::scalar()),
            "dense-matrix" => match d.shape.as_slice() {
                [r, c] if r == c => Algebra::dense(*r),
                s => Err(Error::InvalidDescriptor(format!("dense-matrix shape {s:?}"))),
            },
            "circulant" => Algebra::circulant(one(&d.shape)?),
            "block-diagonal" => Algebra::block_diagonal(d.shape),
            "grid-function" => {
                let m = one(&d.shape)?;
                match d.weights {
                    Some(w) if w.len() == m => Algebra::grid_with_weights(w),
                    Some(w) => Err(Error::InvalidDescriptor(format!(
                        "grid of {m} points with {} weights",
                        w.len()
                    ))),
                    None => Algebra::grid(m),
                }
            }
            "group-algebra" => {
                let n = one(&d.shape)?;
                let table = d
                    .table
                    .ok_or_else(|| Error::InvalidDescriptor("group-algebra needs a table".into()))?;
                Ok(Algebra::group(GroupTable::new(n, table)?))
            }
            other => Err(Error::InvalidDescriptor(format!("unknown kind '{other}'"))),
        }
    }
}

impl From<&Element> for ElementJson {
    fn from(e: &Element) -> Self {
        ElementJson {
            descriptor: e.algebra().into(),
            re: e.coords().iter().map(|z| z.re).collect(),
            im: e.coords().iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<ElementJson> for Element {
    type Error = Error;

    fn try_from(j: ElementJson) -> Result<Self> {
        let algebra = Algebra::try_from(j.descriptor)?;
        if j.re.len() != j.im.len() {
            return Err(Error::shape(format!("{} imaginary parts", j.re.len()), j.im.len()));
        }
        let coords =
            j.re.iter()
                .zip(&j.im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect();
        algebra.element(coords)
    }
}

impl Serialize for Algebra {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DescriptorJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Algebra {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = DescriptorJson::deserialize(d)?;
        Algebra::try_from(j).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Element {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ElementJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ElementJson::deserialize(d)?;
        Element::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// Coordinates of an element without its descriptor, for containers that
/// carry the descriptor once in a header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CoordsJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl CoordsJson {
    pub fn from_element(e: &Element) -> Self {
        CoordsJson {
            re: e.coords().iter().map(|z| z.re).collect(),
            im: e.coords().iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_element(&self, algebra: &Algebra) -> Result<Element> {
        if self.re.len() != self.im.len() {
            return Err(Error::shape(
                format!("{} imaginary parts", self.re.len()),
                self.im.len(),
            ));
        }
        algebra.element(
            self.re
                .iter()
                .zip(&self.im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
        )
    }
}
