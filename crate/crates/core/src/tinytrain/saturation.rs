use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::surgery::{floor_count, lowest_utility_mask};

use super::mlp::{weight_name, Mlp};

/// Standard deviation of the near-zero values written by [`induce_saturation`].
pub const SATURATION_STD: f64 = 1e-6;

/// Pushes the smallest-magnitude `floor(fraction * n)` weights of every
/// hidden layer to draws from `Normal(0, 1e-6)`, simulating weights that no
/// longer contribute. The output layer is left alone.
pub fn induce_saturation(model: &Mlp, fraction: f64, seed: u64) -> Result<Mlp> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("saturation fraction {fraction} outside [0, 1)")));
    }
    let mut out = model.clone();
    if fraction == 0.0 {
        return Ok(out);
    }
    let dist = Normal::new(0.0, SATURATION_STD).expect("positive std");
    let hidden = out.layers().len() - 1;
    for (i, layer) in out.layers_mut().iter_mut().take(hidden).enumerate() {
        let mags: Vec<f64> = layer.weight.iter().map(|w| w.abs()).collect();
        let mask = lowest_utility_mask(&mags, floor_count(mags.len(), fraction));
        let mut rng = substream(seed, &format!("saturate:{}", weight_name(i)));
        for (w, _) in layer.weight.iter_mut().zip(&mask).filter(|(_, &m)| m) {
            *w = dist.sample(&mut rng);
        }
    }
    Ok(out)
}
