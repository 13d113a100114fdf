use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// `floor(n*k)` entries.
    #[default]
    Floor,
    /// `floor(n*k) + b` with `b ~ Bernoulli(frac(n*k))`.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PruneSpec {
    Proportional {
        k: f64,
        #[serde(default)]
        rounding: Rounding,
    },
    Threshold {
        t: f64,
    },
}

impl PruneSpec {
    pub fn proportional(k: f64) -> Self {
        PruneSpec::Proportional {
            k,
            rounding: Rounding::Floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PruneSpec::Proportional { k, .. } if !(k > 0.0 && k <= 1.0) => {
                Err(Error::Config(format!("proportion k={k} outside (0, 1]")))
            }
            PruneSpec::Threshold { t } if !(t >= 0.0 && t.is_finite()) => {
                Err(Error::Config(format!("threshold t={t} must be finite and >= 0")))
            }
            _ => Ok(()),
        }
    }
}

/// `floor(n*k)`, tolerant of binary representation error in `k`
/// (e.g. `0.29 * 100` evaluates to `28.999999999999996`).
pub fn floor_count(n: usize, k: f64) -> usize {
    let x = n as f64 * k;
    let nearest = x.round();
    let count = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        x.floor()
    };
    (count.max(0.0) as usize).min(n)
}

/// Number of entries to prune under proportional pruning.
pub fn prune_count<R: Rng + ?Sized>(n: usize, k: f64, rounding: Rounding, rng: &mut R) -> usize {
    let base = floor_count(n, k);
    match rounding {
        Rounding::Floor => base,
        Rounding::Bernoulli => {
            let frac = (n as f64 * k - base as f64).clamp(0.0, 1.0);
            if frac > 1e-9 * (base as f64).max(1.0) && base < n && rng.random_bool(frac) {
                base + 1
            } else {
                base
            }
        }
    }
}

/// Marks the `count` lowest utilities; ties go to the lower index.
pub fn lowest_utility_mask(utilities: &[f64], count: usize) -> Vec<bool> {
    let n = utilities.len();
    let mut mask = vec![false; n];
    if count == 0 {
        return mask;
    }
    if count >= n {
        return vec![true; n];
    }
    let order = |a: &usize, b: &usize| -> Ordering { utilities[*a].total_cmp(&utilities[*b]).then_with(|| a.cmp(b)) };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.select_nth_unstable_by(count - 1, order);
    for &i in &idx[..count] {
        mask[i] = true;
    }
    mask
}

pub fn select_prune_mask<R: Rng + ?Sized>(utilities: &[f64], spec: &PruneSpec, rng: &mut R) -> Result<Vec<bool>> {
    spec.validate()?;
    if utilities.is_empty() {
        return Err(Error::Invalid("no utilities to prune".into()));
    }
    if let Some(u) = utilities.iter().find(|u| !u.is_finite() || **u < 0.0) {
        return Err(Error::Invalid(format!(
            "utility {u} is not a finite non-negative value"
        )));
    }
    Ok(match *spec {
        PruneSpec::Proportional { k, rounding } => {
            let count = prune_count(utilities.len(), k, rounding, rng);
            lowest_utility_mask(utilities, count)
        }
        PruneSpec::Threshold { t } => utilities.iter().map(|&u| u < t).collect(),
    })
}
