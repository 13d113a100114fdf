use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_store::Tensor;

/// Standard deviation of the `NS` resampling distribution.
pub const NS_STD: f64 = 0.2;
/// Standard deviation of the `N` resampling distribution.
pub const N_STD: f64 = 1.0;
/// `MN` noise is `N(0,1) * mean|remaining w| / NOISE_DIVISOR`.
pub const NOISE_DIVISOR: f64 = 10.0;

/// How pruned entries are refilled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReinitKind {
    /// Layer mean of the pretrained values.
    M,
    /// Layer mean plus Gaussian noise an order of magnitude below the
    /// remaining weights.
    MN,
    /// Fresh draws from `Normal(0, 0.2)`.
    NS,
    /// Fresh draws from `Normal(0, 1)`.
    N,
}

impl ReinitKind {
    pub const ALL: [ReinitKind; 4] = [ReinitKind::M, ReinitKind::MN, ReinitKind::NS, ReinitKind::N];

    pub fn as_str(self) -> &'static str {
        match self {
            ReinitKind::M => "M",
            ReinitKind::MN => "MN",
            ReinitKind::NS => "NS",
            ReinitKind::N => "N",
        }
    }
}

impl fmt::Display for ReinitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReinitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(ReinitKind::M),
            "MN" => Ok(ReinitKind::MN),
            "NS" => Ok(ReinitKind::NS),
            "N" => Ok(ReinitKind::N),
            other => Err(Error::UnknownReinit(other.to_string())),
        }
    }
}

/// Arithmetic mean of all entries, accumulated in f64.
///
/// Uses the running-mean update, which returns `c` exactly for a constant
/// tensor.
pub fn layer_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Invalid("mean of an empty tensor".into()));
    }
    Ok(values
        .iter()
        .enumerate()
        .fold(0.0, |m, (i, &v)| m + (v - m) / (i + 1) as f64))
}

/// `mean(|w|) / 10` over the entries *not* marked in `mask`.
pub fn noise_scale(values: &[f64], mask: &[bool]) -> Result<f64> {
    if values.len() != mask.len() {
        return Err(Error::Invalid(format!(
            "mask length {} != tensor length {}",
            mask.len(),
            values.len()
        )));
    }
    let (sum, count) = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .fold((0.0f64, 0usize), |(s, c), (w, _)| (s + w.abs(), c + 1));
    if count == 0 {
        return Err(Error::Invalid(
            "every entry is masked; no remaining weights define the noise scale".into(),
        ));
    }
    Ok(sum / count as f64 / NOISE_DIVISOR)
}

/// Statistics computed while reinitializing one tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReinitStats {
    pub n_reinitialized: usize,
    pub layer_mean: Option<f64>,
    pub noise_scale: Option<f64>,
}

/// Replaces the masked entries of `t`; every other entry keeps its bits.
///
/// Means and scales come from the values as passed in, i.e. before any
/// entry is overwritten.
pub fn reinit_apply<R: Rng + ?Sized>(
    t: &Tensor,
    mask: &[bool],
    kind: ReinitKind,
    rng: &mut R,
) -> Result<(Tensor, ReinitStats)> {
    if mask.len() != t.len() {
        return Err(Error::tensor(
            t.name(),
            format!("mask length {} != tensor length {}", mask.len(), t.len()),
        ));
    }
    let n_masked = mask.iter().filter(|&&m| m).count();
    let mut stats = ReinitStats {
        n_reinitialized: n_masked,
        layer_mean: None,
        noise_scale: None,
    };
    if t.is_empty() {
        return Ok((t.clone(), stats));
    }
    let values = t.values();
    let mean = layer_mean(&values).map_err(|e| Error::tensor(t.name(), e.to_string()))?;
    stats.layer_mean = Some(mean);
    if n_masked == 0 {
        return Ok((t.clone(), stats));
    }

    let mut out = t.clone();
    let data = out.data_mut();
    let masked = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i);
    match kind {
        ReinitKind::M => masked.for_each(|i| data.set(i, mean)),
        ReinitKind::MN => {
            let scale = noise_scale(&values, mask).map_err(|e| Error::tensor(t.name(), e.to_string()))?;
            stats.noise_scale = Some(scale);
            for i in masked {
                let z: f64 = StandardNormal.sample(rng);
                data.set(i, mean + z * scale);
            }
        }
        ReinitKind::NS | ReinitKind::N => {
            let std = if kind == ReinitKind::NS { NS_STD } else { N_STD };
            let dist = Normal::new(0.0, std).expect("positive std");
            for i in masked {
                data.set(i, dist.sample(rng));
            }
        }
    }
    Ok((out, stats))
}
