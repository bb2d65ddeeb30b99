//! Right-translation equivariance of networks over a group algebra.

use num_complex::Complex64;
use rand::Rng;

use super::{check_architecture, Activation, CStarLayer, CStarNet, WeightSide};
use crate::algebra::{Algebra, Element};
use crate::error::{Error, Result};
use crate::hilbert::ModuleVector;

/// `(ρ_g x)(h) = x(h g)`, i.e. right multiplication by `δ_{g⁻¹}`.
pub fn right_translate(x: &Element, g: usize) -> Result<Element> {
    let table = x
        .algebra()
        .group_table()
        .ok_or_else(|| Error::Unsupported(format!("translation needs a group algebra, got {}", x.algebra())))?;
    if g >= table.order() {
        return Err(Error::invalid(format!("group element {g} out of range")));
    }
    x.algebra()
        .element((0..table.order()).map(|h| x.coords()[table.mul(h, g)]).collect())
}

/// Entrywise [`right_translate`].
pub fn translate_vector(v: &ModuleVector, g: usize) -> Result<ModuleVector> {
    ModuleVector::new(
        v.entries()
            .iter()
            .map(|e| right_translate(e, g))
            .collect::<Result<_>>()?,
    )
}

/// Random group-algebra net. Biases are constant functions on the group,
/// the translation-invariant elements, so left-acting layers commute with
/// right translation.
pub fn random_group_net<R: Rng + ?Sized>(
    algebra: &Algebra,
    widths: &[usize],
    activations: &[Activation],
    side: WeightSide,
    rng: &mut R,
) -> Result<CStarNet> {
    let order = algebra
        .group_table()
        .ok_or_else(|| Error::Unsupported(format!("group net over non-group algebra {algebra}")))?
        .order();
    check_architecture(widths, activations)?;
    let layers = widths
        .windows(2)
        .zip(activations)
        .map(|(w, &act)| {
            let s = 1.0 / ((w[0] * order) as f64).sqrt();
            let weights = (0..w[1])
                .map(|_| {
                    (0..w[0])
                        .map(|_| algebra.random_real_element(&mut *rng).scale(Complex64::new(s, 0.0)))
                        .collect()
                })
                .collect();
            let bias = (0..w[1])
                .map(|_| algebra.element(vec![Complex64::new(rng.gen_range(-s..=s), 0.0); order]))
                .collect::<Result<_>>()?;
            Ok(CStarLayer::new(weights, bias, act)?.with_side(side))
        })
        .collect::<Result<Vec<_>>>()?;
    CStarNet::new(layers)
}

/// `max ‖f(ρ_g x) - ρ_g f(x)‖` over `trials` random inputs and every `g ∈ G`.
pub fn equivariance_check<R: Rng + ?Sized>(net: &CStarNet, trials: usize, rng: &mut R) -> Result<f64> {
    let order = net
        .algebra()
        .group_table()
        .ok_or_else(|| Error::Unsupported(format!("equivariance needs a group algebra, got {}", net.algebra())))?
        .order();
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let x = ModuleVector::new(
            (0..net.input_dim())
                .map(|_| net.algebra().random_element(&mut *rng))
                .collect(),
        )?;
        let fx = net.forward(&x)?;
        for g in 0..order {
            let lhs = net.forward(&translate_vector(&x, g)?)?;
            let rhs = translate_vector(&fx, g)?;
            worst = worst.max(lhs.sub(&rhs)?.norm_vec()?);
        }
    }
    Ok(worst)
}
