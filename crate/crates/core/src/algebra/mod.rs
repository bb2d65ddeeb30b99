//! Finite-dimensional C*-algebras and their elements.
//!
//! Six concrete algebras share one element type: complex scalars, dense
//! `d x d` matrices, circulant matrices (stored as their generator), block
//! diagonal matrices, functions on a finite grid (a discretized `C(Z)`), and
//! the group algebra of a finite group. Every kind carries a faithful
//! *-representation into dense matrices ([`Element::regular_representation`]),
//! which backs the operator norm, positivity, and functional calculus.

mod group;
mod json;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub use group::{GroupTable, ASSOCIATIVITY_CHECK_LIMIT};
pub(crate) use json::CoordsJson;
pub use json::{DescriptorJson, ElementJson};

/// Default absolute tolerance used by positivity checks.
pub const DEFAULT_POSITIVITY_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraKind {
    Scalar,
    DenseMatrix {
        dim: usize,
    },
    /// Circulant `d x d` matrices; an element is its first column.
    Circulant {
        dim: usize,
    },
    BlockDiagonal {
        blocks: Vec<usize>,
    },
    /// Functions on `weights.len()` grid points with positive quadrature weights.
    GridFunction {
        weights: Vec<f64>,
    },
    Group(GroupTable),
}

/// Shared handle to an algebra descriptor.
#[derive(Debug, Clone)]
pub struct Algebra(Arc<AlgebraKind>);

impl PartialEq for Algebra {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Algebra {
    pub fn new(kind: AlgebraKind) -> Result<Self> {
        match &kind {
            AlgebraKind::Scalar => {}
            AlgebraKind::DenseMatrix { dim } | AlgebraKind::Circulant { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidDescriptor("matrix dimension must be >= 1".into()));
                }
            }
            AlgebraKind::BlockDiagonal { blocks } => {
                if blocks.is_empty() || blocks.contains(&0) {
                    return Err(Error::InvalidDescriptor(
                        "block sizes must be a non-empty list of positive integers".into(),
                    ));
                }
            }
            AlgebraKind::GridFunction { weights } => {
                if weights.is_empty() {
                    return Err(Error::InvalidDescriptor("grid must have >= 1 point".into()));
                }
                if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                    return Err(Error::InvalidDescriptor("quadrature weights must be positive".into()));
                }
                let total = crate::linalg::compensated_sum(weights);
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDescriptor(format!(
                        "quadrature weights sum to {total}, expected 1"
                    )));
                }
            }
            AlgebraKind::Group(_) => {}
        }
        Ok(Self(Arc::new(kind)))
    }

    pub fn scalar() -> Self {
        Self(Arc::new(AlgebraKind::Scalar))
    }

    pub fn dense(dim: usize) -> Result<Self> {
        Self::new(AlgebraKind::DenseMatrix { dim })
    }

    pub fn circulant(dim: usize) -> Result<Self> {
        Self::new(AlgebraKind::Circulant { dim })
    }

    pub fn block_diagonal(blocks: Vec<usize>) -> Result<Self> {
        Self::new(AlgebraKind::BlockDiagonal { blocks })
    }

    /// Grid of `m` points with uniform quadrature weights.
    pub fn grid(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidDescriptor("grid must have >= 1 point".into()));
        }
        Self::new(AlgebraKind::GridFunction {
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn grid_with_weights(weights: Vec<f64>) -> Result<Self> {
        Self::new(AlgebraKind::GridFunction { weights })
    }

    pub fn group(table: GroupTable) -> Self {
        Self(Arc::new(AlgebraKind::Group(table)))
    }

    pub fn cyclic_group(n: usize) -> Result<Self> {
        Ok(Self::group(GroupTable::cyclic(n)?))
    }

    pub fn symmetric_group(n: usize) -> Result<Self> {
        Ok(Self::group(GroupTable::symmetric(n)?))
    }

    pub fn kind(&self) -> &AlgebraKind {
        &self.0
    }

    /// Number of complex coordinates of one element.
    pub fn coord_len(&self) -> usize {
        match self.kind() {
            AlgebraKind::Scalar => 1,
            AlgebraKind::DenseMatrix { dim } => dim * dim,
            AlgebraKind::Circulant { dim } => *dim,
            AlgebraKind::BlockDiagonal { blocks } => blocks.iter().map(|b| b * b).sum(),
            AlgebraKind::GridFunction { weights } => weights.len(),
            AlgebraKind::Group(g) => g.order(),
        }
    }

    /// Size of the faithful matrix representation.
    pub fn rep_dim(&self) -> usize {
        match self.kind() {
            AlgebraKind::Scalar => 1,
            AlgebraKind::DenseMatrix { dim } | AlgebraKind::Circulant { dim } => *dim,
            AlgebraKind::BlockDiagonal { blocks } => blocks.iter().sum(),
            AlgebraKind::GridFunction { weights } => weights.len(),
            AlgebraKind::Group(g) => g.order(),
        }
    }

    pub fn is_commutative(&self) -> bool {
        match self.kind() {
            AlgebraKind::Scalar | AlgebraKind::Circulant { .. } | AlgebraKind::GridFunction { .. } => true,
            AlgebraKind::DenseMatrix { dim } => *dim == 1,
            AlgebraKind::BlockDiagonal { blocks } => blocks.iter().all(|&b| b == 1),
            AlgebraKind::Group(g) => g.is_abelian(),
        }
    }

    pub fn grid_weights(&self) -> Option<&[f64]> {
        match self.kind() {
            AlgebraKind::GridFunction { weights } => Some(weights),
            _ => None,
        }
    }

    pub fn group_table(&self) -> Option<&GroupTable> {
        match self.kind() {
            AlgebraKind::Group(g) => Some(g),
            _ => None,
        }
    }

    pub fn element(&self, coords: Vec<Complex64>) -> Result<Element> {
        if coords.len() != self.coord_len() {
            return Err(Error::shape(
                format!("{} coordinates for {self}", self.coord_len()),
                coords.len(),
            ));
        }
        Ok(Element {
            algebra: self.clone(),
            coords,
        })
    }

    pub fn element_real(&self, coords: &[f64]) -> Result<Element> {
        self.element(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zero(&self) -> Element {
        Element {
            algebra: self.clone(),
            coords: vec![ZERO; self.coord_len()],
        }
    }

    /// Multiplicative unit `1_A`.
    pub fn identity(&self) -> Element {
        self.constant(ONE)
    }

    /// `c · 1_A`.
    pub fn constant(&self, c: Complex64) -> Element {
        let mut coords = vec![ZERO; self.coord_len()];
        match self.kind() {
            AlgebraKind::Scalar | AlgebraKind::Circulant { .. } => coords[0] = c,
            AlgebraKind::DenseMatrix { dim } => {
                for i in 0..*dim {
                    coords[i * dim + i] = c;
                }
            }
            AlgebraKind::BlockDiagonal { blocks } => {
                let mut off = 0;
                for &b in blocks {
                    for i in 0..b {
                        coords[off + i * b + i] = c;
                    }
                    off += b * b;
                }
            }
            AlgebraKind::GridFunction { .. } => coords.fill(c),
            AlgebraKind::Group(g) => coords[g.identity()] = c,
        }
        Element {
            algebra: self.clone(),
            coords,
        }
    }

    /// Element with a single unit coordinate (a basis vector of the coordinate space).
    pub fn basis_element(&self, index: usize) -> Result<Element> {
        let mut e = self.zero();
        let n = e.coords.len();
        *e.coords
            .get_mut(index)
            .ok_or_else(|| Error::shape(format!("index < {n}"), index))? = ONE;
        Ok(e)
    }

    /// Random element with real and imaginary coordinates uniform in `[-1, 1]`.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Element {
        let coords = (0..self.coord_len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
            .collect();
        Element {
            algebra: self.clone(),
            coords,
        }
    }

    /// Random element with real coordinates uniform in `[-1, 1]`.
    pub fn random_real_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Element {
        let coords = (0..self.coord_len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), 0.0))
            .collect();
        Element {
            algebra: self.clone(),
            coords,
        }
    }

    /// Pulls a matrix in the image of the regular representation back to an element.
    ///
    /// Only the entries that determine the element are read: the generator
    /// column for circulant and group kinds, the diagonal blocks for
    /// block-diagonal, the diagonal for grid functions.
    pub fn from_regular_representation(&self, m: &CMatrix) -> Result<Element> {
        let n = self.rep_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::shape(format!("{n}x{n}"), format!("{}x{}", m.nrows(), m.ncols())));
        }
        let coords = match self.kind() {
            AlgebraKind::Scalar => vec![m[(0, 0)]],
            AlgebraKind::DenseMatrix { dim } => {
                let mut c = Vec::with_capacity(dim * dim);
                for i in 0..*dim {
                    for j in 0..*dim {
                        c.push(m[(i, j)]);
                    }
                }
                c
            }
            AlgebraKind::Circulant { dim } => (0..*dim).map(|i| m[(i, 0)]).collect(),
            AlgebraKind::BlockDiagonal { blocks } => {
                let mut c = Vec::with_capacity(self.coord_len());
                let mut off = 0;
                for &b in blocks {
                    for i in 0..b {
                        for j in 0..b {
                            c.push(m[(off + i, off + j)]);
                        }
                    }
                    off += b;
                }
                c
            }
            AlgebraKind::GridFunction { weights } => (0..weights.len()).map(|i| m[(i, i)]).collect(),
            AlgebraKind::Group(g) => (0..g.order()).map(|h| m[(h, g.identity())]).collect(),
        };
        self.element(coords)
    }

    fn check(&self, other: &Algebra) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DescriptorMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            AlgebraKind::Scalar => write!(f, "scalar"),
            AlgebraKind::DenseMatrix { dim } => write!(f, "dense:{dim}"),
            AlgebraKind::Circulant { dim } => write!(f, "circulant:{dim}"),
            AlgebraKind::BlockDiagonal { blocks } => {
                let s: Vec<String> = blocks.iter().map(|b| b.to_string()).collect();
                write!(f, "block:{}", s.join(","))
            }
            AlgebraKind::GridFunction { weights } => write!(f, "grid:{}", weights.len()),
            AlgebraKind::Group(g) => write!(f, "group:{}", g.order()),
        }
    }
}

/// Parses `scalar`, `dense:D`, `circulant:D`, `block:B1,B2,..`, `grid:M`,
/// `cyclic:N` and `symmetric:N` (alias `s3`), or a JSON descriptor.
impl FromStr for Algebra {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::InvalidDescriptor(e.to_string()));
        }
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |arg: &str| -> Result<usize> {
            arg.trim()
                .parse()
                .map_err(|_| Error::InvalidDescriptor(format!("bad size in '{s}'")))
        };
        match name {
            "scalar" => Ok(Algebra::scalar()),
            "dense" => Algebra::dense(num(arg)?),
            "circulant" => Algebra::circulant(num(arg)?),
            "block" => {
                let blocks = arg.split(',').map(num).collect::<Result<Vec<_>>>()?;
                Algebra::block_diagonal(blocks)
            }
            "grid" => Algebra::grid(num(arg)?),
            "cyclic" => Algebra::cyclic_group(num(arg)?),
            "symmetric" => Algebra::symmetric_group(num(arg)?),
            "s3" => Algebra::symmetric_group(3),
            _ => Err(Error::InvalidDescriptor(format!("unknown algebra '{s}'"))),
        }
    }
}

/// One representative of every algebra kind, used by property suites.
pub fn sample_algebras() -> Vec<Algebra> {
    vec![
        Algebra::scalar(),
        Algebra::dense(3).expect("valid"),
        Algebra::circulant(4).expect("valid"),
        Algebra::block_diagonal(vec![1, 2, 3]).expect("valid"),
        Algebra::grid(6).expect("valid"),
        Algebra::cyclic_group(4).expect("valid"),
        Algebra::symmetric_group(3).expect("valid"),
    ]
}

/// One element of an [`Algebra`], stored as complex coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    algebra: Algebra,
    coords: Vec<Complex64>,
}

impl Element {
    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Complex64> {
        self.coords
    }

    pub fn add(&self, other: &Element) -> Result<Element> {
        self.algebra.check(&other.algebra)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Element) -> Result<Element> {
        self.algebra.check(&other.algebra)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scale(&self, alpha: Complex64) -> Element {
        self.map(|z| alpha * z)
    }

    pub fn neg(&self) -> Element {
        self.map(|z| -z)
    }

    /// Applies `f` to every coordinate.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Element {
        Element {
            algebra: self.algebra.clone(),
            coords: self.coords.iter().map(|&z| f(z)).collect(),
        }
    }

    fn zip_with(&self, other: &Element, f: impl Fn(Complex64, Complex64) -> Complex64) -> Element {
        Element {
            algebra: self.algebra.clone(),
            coords: self.coords.iter().zip(&other.coords).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// In-place `self += alpha * other`; descriptors are assumed equal.
    pub(crate) fn axpy(&mut self, alpha: Complex64, other: &Element) {
        debug_assert_eq!(self.algebra, other.algebra);
        for (a, &b) in self.coords.iter_mut().zip(&other.coords) {
            *a += alpha * b;
        }
    }

    /// Algebra product.
    pub fn mul(&self, other: &Element) -> Result<Element> {
        self.algebra.check(&other.algebra)?;
        let a = &self.coords;
        let b = &other.coords;
        let coords = match self.algebra.kind() {
            AlgebraKind::Scalar => vec![a[0] * b[0]],
            AlgebraKind::DenseMatrix { dim } => matmul(a, b, *dim),
            AlgebraKind::Circulant { dim } => {
                let d = *dim;
                let mut out = vec![ZERO; d];
                for (j, &aj) in a.iter().enumerate() {
                    for (k, &bk) in b.iter().enumerate() {
                        out[(j + k) % d] += aj * bk;
                    }
                }
                out
            }
            AlgebraKind::BlockDiagonal { blocks } => {
                let mut out = Vec::with_capacity(a.len());
                let mut off = 0;
                for &s in blocks {
                    let len = s * s;
                    out.extend(matmul(&a[off..off + len], &b[off..off + len], s));
                    off += len;
                }
                out
            }
            AlgebraKind::GridFunction { .. } => a.iter().zip(b).map(|(&x, &y)| x * y).collect(),
            AlgebraKind::Group(g) => {
                let mut out = vec![ZERO; g.order()];
                for (h, &ah) in a.iter().enumerate() {
                    if ah == ZERO {
                        continue;
                    }
                    for (k, &bk) in b.iter().enumerate() {
                        out[g.mul(h, k)] += ah * bk;
                    }
                }
                out
            }
        };
        Ok(Element {
            algebra: self.algebra.clone(),
            coords,
        })
    }

    /// Involution `a ↦ a*`.
    pub fn star(&self) -> Element {
        let a = &self.coords;
        let coords = match self.algebra.kind() {
            AlgebraKind::Scalar | AlgebraKind::GridFunction { .. } => a.iter().map(|z| z.conj()).collect(),
            AlgebraKind::DenseMatrix { dim } => adjoint(a, *dim),
            AlgebraKind::Circulant { dim } => (0..*dim).map(|k| a[(dim - k) % dim].conj()).collect(),
            AlgebraKind::BlockDiagonal { blocks } => {
                let mut out = Vec::with_capacity(a.len());
                let mut off = 0;
                for &s in blocks {
                    out.extend(adjoint(&a[off..off + s * s], s));
                    off += s * s;
                }
                out
            }
            AlgebraKind::Group(g) => (0..g.order()).map(|h| a[g.inv(h)].conj()).collect(),
        };
        Element {
            algebra: self.algebra.clone(),
            coords,
        }
    }

    /// Faithful *-representation as a dense matrix: matrices map to
    /// themselves, grid functions to diagonal matrices, group elements to
    /// left-translation matrices on `C^G`.
    pub fn regular_representation(&self) -> CMatrix {
        let a = &self.coords;
        let n = self.algebra.rep_dim();
        match self.algebra.kind() {
            AlgebraKind::Scalar => CMatrix::from_element(1, 1, a[0]),
            AlgebraKind::DenseMatrix { dim } => CMatrix::from_row_slice(*dim, *dim, a),
            AlgebraKind::Circulant { dim } => {
                let d = *dim;
                CMatrix::from_fn(d, d, |i, j| a[(i + d - j) % d])
            }
            AlgebraKind::BlockDiagonal { blocks } => {
                let mut m = CMatrix::zeros(n, n);
                let (mut off, mut coff) = (0, 0);
                for &s in blocks {
                    for i in 0..s {
                        for j in 0..s {
                            m[(off + i, off + j)] = a[coff + i * s + j];
                        }
                    }
                    off += s;
                    coff += s * s;
                }
                m
            }
            AlgebraKind::GridFunction { .. } => CMatrix::from_diagonal(&linalg::CVector::from_column_slice(a)),
            AlgebraKind::Group(g) => {
                // R(a) e_k = a · δ_k, i.e. R(a)[hk, k] = a(h).
                let mut m = CMatrix::zeros(n, n);
                for (h, &ah) in a.iter().enumerate() {
                    for k in 0..n {
                        m[(g.mul(h, k), k)] = ah;
                    }
                }
                m
            }
        }
    }

    /// C*-norm: sup-norm for grid functions, largest singular value for the
    /// matrix kinds, operator norm of the regular representation for groups.
    pub fn norm(&self) -> f64 {
        match self.algebra.kind() {
            AlgebraKind::Scalar | AlgebraKind::GridFunction { .. } => {
                self.coords.iter().map(|z| z.norm()).fold(0.0, f64::max)
            }
            AlgebraKind::BlockDiagonal { blocks } => {
                let mut off = 0;
                let mut best = 0.0_f64;
                for &s in blocks {
                    let m = CMatrix::from_row_slice(s, s, &self.coords[off..off + s * s]);
                    best = best.max(linalg::operator_norm(&m));
                    off += s * s;
                }
                best
            }
            _ => linalg::operator_norm(&self.regular_representation()),
        }
    }

    /// Frobenius norm of the regular representation (the Hilbert–Schmidt
    /// norm for the matrix kinds).
    pub fn hilbert_schmidt_norm(&self) -> f64 {
        linalg::frobenius_norm(&self.regular_representation())
    }

    /// Whether the element is of the form `d* d`, up to `tol`.
    pub fn is_positive(&self, tol: f64) -> bool {
        match self.algebra.kind() {
            AlgebraKind::Scalar | AlgebraKind::GridFunction { .. } => {
                self.coords.iter().all(|z| z.im.abs() <= tol && z.re >= -tol)
            }
            _ => {
                let r = self.regular_representation();
                if linalg::hermitian_defect(&r) > tol {
                    return false;
                }
                match linalg::min_eigenvalue(&r) {
                    Ok(l) => l >= -tol,
                    Err(e) => {
                        log::warn!("positivity check failed: {e}");
                        false
                    }
                }
            }
        }
    }

    /// `self ≤_A other`, i.e. `other - self` is positive.
    pub fn leq(&self, other: &Element, tol: f64) -> Result<bool> {
        Ok(other.sub(self)?.is_positive(tol))
    }

    /// Absolute value `|a| = (a* a)^{1/2}`.
    pub fn abs(&self) -> Result<Element> {
        match self.algebra.kind() {
            AlgebraKind::Scalar | AlgebraKind::GridFunction { .. } => Ok(self.map(|z| Complex64::new(z.norm(), 0.0))),
            _ => {
                let r = self.regular_representation();
                self.algebra
                    .from_regular_representation(&linalg::psd_sqrt(&(r.adjoint() * &r))?)
            }
        }
    }

    /// Positive square root of an element that is positive up to round-off.
    pub fn sqrt_positive(&self) -> Result<Element> {
        match self.algebra.kind() {
            AlgebraKind::Scalar | AlgebraKind::GridFunction { .. } => {
                Ok(self.map(|z| Complex64::new(z.re.max(0.0).sqrt(), 0.0)))
            }
            _ => self
                .algebra
                .from_regular_representation(&linalg::psd_sqrt(&self.regular_representation())?),
        }
    }

    /// Largest coordinate-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Element) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coords.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn matmul(a: &[Complex64], b: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == ZERO {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

fn adjoint(a: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j].conj();
        }
    }
    out
}
