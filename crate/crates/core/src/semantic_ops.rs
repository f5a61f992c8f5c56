//! Linear arithmetic on latents: `z1 + alpha * z2`, followed by rescaling to
//! the norm the downstream generator expects.

use crate::embedding_store::{check_dim, dot, norm, LatentVector};
use crate::{Error, Result};

/// Norms below this are treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Rescales `v` to L2 norm `target_norm`.
pub fn renormalize(v: &LatentVector, target_norm: f64) -> Result<LatentVector> {
    rescaled(v.values(), target_norm).map(|values| LatentVector::new(values).expect("finite"))
}

pub(crate) fn rescaled(values: &[f64], target_norm: f64) -> Result<Vec<f64>> {
    if !(target_norm.is_finite() && target_norm > 0.0) {
        return Err(Error::InvalidParameter(format!("target norm {target_norm} must be positive")));
    }
    let n = norm(values);
    if n.is_nan() || n <= DEGENERATE_NORM {
        return Err(Error::ZeroVector);
    }
    let s = target_norm / n;
    Ok(values.iter().map(|x| x * s).collect())
}

/// `renormalize(z1 + alpha * z2, target_norm)`. Positive `alpha` adds the
/// content of `z2`, negative `alpha` removes it.
pub fn combine(z1: &LatentVector, z2: &LatentVector, alpha: f64, target_norm: f64) -> Result<LatentVector> {
    check_dim(z1.dim(), z2.dim())?;
    if !alpha.is_finite() {
        return Err(Error::NonFinite("combination weight"));
    }
    let sum: Vec<f64> = z1
        .values()
        .iter()
        .zip(z2.values())
        .map(|(a, b)| a + alpha * b)
        .collect();
    let out = rescaled(&sum, target_norm)?;
    Ok(LatentVector::new(out).expect("finite"))
}

/// Cosine of the angle between two latents.
pub fn cosine(z1: &LatentVector, z2: &LatentVector) -> Result<f64> {
    check_dim(z1.dim(), z2.dim())?;
    cosine_slices(z1.values(), z2.values())
}

pub(crate) fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if !(na > DEGENERATE_NORM && nb > DEGENERATE_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
