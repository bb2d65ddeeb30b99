//! The Hilbert C*-module `A^d` with its A-valued inner product.

use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, DescriptorJson, Element, ElementJson};
use crate::error::{Error, Result};

/// A length-`d` tuple of elements of one algebra, acted on from the right by `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleVector {
    algebra: Algebra,
    entries: Vec<Element>,
}

impl ModuleVector {
    pub fn new(entries: Vec<Element>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::invalid("module vectors need at least one entry"))?;
        let algebra = first.algebra().clone();
        if let Some(bad) = entries.iter().find(|e| e.algebra() != &algebra) {
            return Err(Error::DescriptorMismatch {
                left: algebra.to_string(),
                right: bad.algebra().to_string(),
            });
        }
        Ok(Self { algebra, entries })
    }

    pub fn zeros(algebra: &Algebra, d: usize) -> Result<Self> {
        Self::new(vec![algebra.zero(); d])
    }

    /// `(0, .., 1_A, .., 0)` with the unit in slot `i`.
    pub fn unit(algebra: &Algebra, d: usize, i: usize) -> Result<Self> {
        let mut v = Self::zeros(algebra, d)?;
        *v.entries
            .get_mut(i)
            .ok_or_else(|| Error::shape(format!("index < {d}"), i))? = algebra.identity();
        Ok(v)
    }

    /// Lifts a complex vector to constant entries `x_k · 1_A`.
    pub fn constant(algebra: &Algebra, values: &[num_complex::Complex64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| algebra.constant(x)).collect())
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Element] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Element> {
        self.entries
    }

    fn check(&self, other: &ModuleVector) -> Result<()> {
        if self.algebra != other.algebra {
            return Err(Error::DescriptorMismatch {
                left: self.algebra.to_string(),
                right: other.algebra.to_string(),
            });
        }
        if self.len() != other.len() {
            return Err(Error::shape(
                format!("module vector of length {}", self.len()),
                other.len(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &ModuleVector) -> Result<ModuleVector> {
        self.check(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            algebra: self.algebra.clone(),
            entries,
        })
    }

    pub fn sub(&self, other: &ModuleVector) -> Result<ModuleVector> {
        self.check(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            algebra: self.algebra.clone(),
            entries,
        })
    }

    /// Right module action `u · c`, entrywise `u_i c`.
    pub fn right_mul(&self, c: &Element) -> Result<ModuleVector> {
        let entries = self.entries.iter().map(|u| u.mul(c)).collect::<Result<_>>()?;
        Ok(Self {
            algebra: self.algebra.clone(),
            entries,
        })
    }

    /// `⟨u, v⟩ = Σ_i u_i* v_i`, conjugate-linear in `u` and A-linear in `v`.
    pub fn inner(&self, other: &ModuleVector) -> Result<Element> {
        self.check(other)?;
        let mut acc = self.algebra.zero();
        for (u, v) in self.entries.iter().zip(&other.entries) {
            acc = acc.add(&u.star().mul(v)?)?;
        }
        Ok(acc)
    }

    /// A-valued absolute value `|u| = ⟨u, u⟩^{1/2}`.
    pub fn abs_vec(&self) -> Result<Element> {
        self.inner(self)?.sqrt_positive()
    }

    /// Real norm `‖ |u| ‖_A`.
    pub fn norm_vec(&self) -> Result<f64> {
        Ok(self.abs_vec()?.norm())
    }

    pub fn max_abs_diff(&self, other: &ModuleVector) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// `{ "descriptor": {..}, "entries": [element, ..] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModuleVectorJson {
    descriptor: DescriptorJson,
    entries: Vec<ElementJson>,
}

impl Serialize for ModuleVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModuleVectorJson {
            descriptor: (&self.algebra).into(),
            entries: self.entries.iter().map(ElementJson::from).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModuleVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = ModuleVectorJson::deserialize(d)?;
        let algebra = Algebra::try_from(j.descriptor).map_err(D::Error::custom)?;
        let entries = j
            .entries
            .into_iter()
            .map(Element::try_from)
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let v = ModuleVector::new(entries).map_err(D::Error::custom)?;
        if v.algebra != algebra {
            return Err(D::Error::custom("entries do not match the descriptor header"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{sample_algebras, DEFAULT_POSITIVITY_TOL};
    use crate::linalg::{self, CMatrix};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(alg: &Algebra, d: usize, rng: &mut ChaCha8Rng) -> ModuleVector {
        ModuleVector::new((0..d).map(|_| alg.random_element(rng)).collect()).unwrap()
    }

    #[test]
    fn right_mul_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for alg in sample_algebras() {
            let u = random_vec(&alg, 3, &mut rng);
            assert_eq!(u.right_mul(&alg.identity()).unwrap(), u);
            let z = ModuleVector::zeros(&alg, 3).unwrap();
            let c = alg.random_element(&mut rng);
            assert_eq!(z.right_mul(&c).unwrap(), z);
            let d = alg.random_element(&mut rng);
            let lhs = u.right_mul(&c).unwrap().right_mul(&d).unwrap();
            let rhs = u.right_mul(&c.mul(&d).unwrap()).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn inner_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for alg in sample_algebras() {
            let e = ModuleVector::unit(&alg, 2, 0).unwrap();
            assert_eq!(e.inner(&e).unwrap(), alg.identity());
            let u = random_vec(&alg, 2, &mut rng);
            let v = random_vec(&alg, 2, &mut rng);
            let c = alg.random_element(&mut rng);
            let lhs = u.inner(&v.right_mul(&c).unwrap()).unwrap();
            let rhs = u.inner(&v).unwrap().mul(&c).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            let vu = v.inner(&u).unwrap();
            assert!(vu.max_abs_diff(&u.inner(&v).unwrap().star()) < 1e-12);
        }
    }

    #[test]
    fn inner_product_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for alg in sample_algebras() {
            for _ in 0..20 {
                let u = random_vec(&alg, 3, &mut rng);
                let v = random_vec(&alg, 3, &mut rng);
                let w = random_vec(&alg, 3, &mut rng);
                let c = alg.random_element(&mut rng);
                let d = alg.random_element(&mut rng);
                let lhs = u
                    .inner(&v.right_mul(&c).unwrap().add(&w.right_mul(&d).unwrap()).unwrap())
                    .unwrap();
                let rhs = u
                    .inner(&v)
                    .unwrap()
                    .mul(&c)
                    .unwrap()
                    .add(&u.inner(&w).unwrap().mul(&d).unwrap())
                    .unwrap();
                assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
                assert!(u.inner(&u).unwrap().is_positive(DEFAULT_POSITIVITY_TOL));
            }
            let z = ModuleVector::zeros(&alg, 3).unwrap();
            assert_eq!(z.inner(&z).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn definiteness_on_sparse_vectors() {
        // ⟨u, u⟩ = 0 forces u = 0: any single nonzero coordinate yields a
        // nonzero inner product.
        for alg in sample_algebras() {
            for slot in 0..2 {
                for k in 0..alg.coord_len() {
                    let mut u = ModuleVector::zeros(&alg, 2).unwrap();
                    u.entries[slot] = alg.basis_element(k).unwrap();
                    assert!(u.inner(&u).unwrap().norm() > 1e-10);
                }
            }
        }
    }

    #[test]
    fn scalar_inner_is_standard() {
        let alg = Algebra::scalar();
        let xs = [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)];
        let ys = [Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.5)];
        let u = ModuleVector::constant(&alg, &xs).unwrap();
        let v = ModuleVector::constant(&alg, &ys).unwrap();
        let expected: Complex64 = xs.iter().zip(&ys).map(|(x, y)| x.conj() * y).sum();
        assert!((u.inner(&v).unwrap().coords()[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn abs_vec_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for alg in sample_algebras() {
            let z = ModuleVector::zeros(&alg, 3).unwrap();
            assert!(z.abs_vec().unwrap().max_abs() < 1e-12);
            assert_eq!(z.norm_vec().unwrap(), 0.0);
            let e = ModuleVector::unit(&alg, 3, 0).unwrap();
            assert!(e.abs_vec().unwrap().max_abs_diff(&alg.identity()) < 1e-12);
            let e1 = ModuleVector::unit(&alg, 1, 0).unwrap();
            assert!((e1.norm_vec().unwrap() - 1.0).abs() < 1e-12);
            for _ in 0..10 {
                let u = random_vec(&alg, 3, &mut rng);
                let a = u.abs_vec().unwrap();
                let diff = a.mul(&a).unwrap().sub(&u.inner(&u).unwrap()).unwrap();
                assert!(diff.norm() <= 1e-10, "{alg}");
            }
        }
    }

    #[test]
    fn norm_vec_matches_stacked_representation() {
        // Oracle: ‖u‖ is the largest singular value of [R(u_1); R(u_2); R(u_3)].
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for alg in sample_algebras() {
            let u = random_vec(&alg, 3, &mut rng);
            let n = alg.rep_dim();
            let mut stacked = CMatrix::zeros(3 * n, n);
            for (i, e) in u.entries().iter().enumerate() {
                stacked.rows_mut(i * n, n).copy_from(&e.regular_representation());
            }
            let oracle = linalg::operator_norm(&stacked);
            assert!((u.norm_vec().unwrap() - oracle).abs() < 1e-10, "{alg}");
        }
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let alg = Algebra::scalar();
        let u = ModuleVector::zeros(&alg, 2).unwrap();
        let v = ModuleVector::zeros(&alg, 3).unwrap();
        assert!(u.inner(&v).is_err());
        assert!(ModuleVector::new(vec![]).is_err());
        let g = Algebra::grid(2).unwrap();
        assert!(ModuleVector::new(vec![alg.zero(), g.zero()]).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip(seed in any::<u64>(), which in 0usize..7, d in 1usize..4) {
            let alg = &sample_algebras()[which];
            let u = random_vec(alg, d, &mut ChaCha8Rng::seed_from_u64(seed));
            let back: ModuleVector = serde_json::from_str(&serde_json::to_string(&u).unwrap()).unwrap();
            prop_assert_eq!(back, u);
        }
    }
}
