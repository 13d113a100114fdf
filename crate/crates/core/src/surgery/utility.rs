use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-weight importance score.
///
/// `Gradient` scores `|w * dL/dw|` and needs a gradient checkpoint. A single
/// gradient taken before fine-tuning is a noisy saliency signal, so
/// `Magnitude` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    #[default]
    Magnitude,
    Gradient,
}

pub fn utility_magnitude(w: f64) -> Result<f64> {
    if !w.is_finite() {
        return Err(Error::Invalid(format!("non-finite weight {w}")));
    }
    Ok(w.abs())
}

pub fn utility_gradient(w: f64, g: f64) -> Result<f64> {
    if !w.is_finite() || !g.is_finite() {
        return Err(Error::Invalid(format!("non-finite weight/gradient ({w}, {g})")));
    }
    Ok((w * g).abs())
}

/// Scores a whole tensor. `grads` must be present (and equally long) for
/// [`UtilityKind::Gradient`].
pub fn utilities(kind: UtilityKind, weights: &[f64], grads: Option<&[f64]>) -> Result<Vec<f64>> {
    match kind {
        UtilityKind::Magnitude => weights.iter().map(|&w| utility_magnitude(w)).collect(),
        UtilityKind::Gradient => {
            let grads = grads.ok_or_else(|| Error::Config("gradient utility needs gradients".into()))?;
            if grads.len() != weights.len() {
                return Err(Error::Invalid(format!(
                    "{} gradients for {} weights",
                    grads.len(),
                    weights.len()
                )));
            }
            weights
                .iter()
                .zip(grads)
                .map(|(&w, &g)| utility_gradient(w, g))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magnitude() {
        assert_eq!(utility_magnitude(-0.5).unwrap(), 0.5);
        assert_eq!(utility_magnitude(0.0).unwrap(), 0.0);
        assert_eq!(utility_magnitude(0.3).unwrap(), 0.3);
        assert!(utility_magnitude(f64::NAN).is_err());
    }

    #[test]
    fn gradient() {
        assert_eq!(utility_gradient(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(utility_gradient(-7.25, 0.0).unwrap(), 0.0);
        assert_eq!(utility_gradient(-3.0, -2.0).unwrap(), 6.0);
        assert!(utility_gradient(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn gradient_requires_matching_grads() {
        assert!(utilities(UtilityKind::Gradient, &[1.0], None).is_err());
        assert!(utilities(UtilityKind::Gradient, &[1.0], Some(&[1.0, 2.0])).is_err());
    }
}
