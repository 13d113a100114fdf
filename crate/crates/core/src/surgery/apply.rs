use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::substream;
use crate::tensor_store::{Checkpoint, ClassificationRules, ParamClass, Tensor};

use super::config::{Scope, SurgeryConfig};
use super::prune::select_prune_mask;
use super::reinit::reinit_apply;
use super::utility::{utilities, UtilityKind};

const GLOBAL_STREAM: &str = "prune:__global__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub class: ParamClass,
    pub n_total: usize,
    /// Entries overwritten by surgery (reinitialized weights or zeroed biases).
    pub n_reinitialized: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeryReport {
    pub config: SurgeryConfig,
    pub records: Vec<TensorRecord>,
    pub weight_elements: usize,
    pub weights_reinitialized: usize,
    pub biases_reset: usize,
    pub total_reinitialized: usize,
}

impl SurgeryReport {
    pub fn weight_fraction_changed(&self) -> f64 {
        if self.weight_elements == 0 {
            0.0
        } else {
            self.weights_reinitialized as f64 / self.weight_elements as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Applies one round of selective reinitialization to `cp`.
///
/// Randomness is drawn from per-tensor streams keyed by tensor name, so the
/// result does not depend on the order tensors are processed in.
pub fn apply_surgery(
    cp: &Checkpoint,
    grads: Option<&Checkpoint>,
    config: &SurgeryConfig,
    rules: &ClassificationRules,
) -> Result<(Checkpoint, SurgeryReport)> {
    config.validate()?;
    let classifier = rules.compile()?;
    let classes: Vec<ParamClass> = cp.names().map(|n| classifier.classify(n)).collect();
    let weight_idx: Vec<usize> = (0..cp.len())
        .filter(|&i| classes[i] == ParamClass::Weight && !cp.tensors()[i].is_empty())
        .collect();

    let grad_values = |t: &Tensor| -> Result<Option<Vec<f64>>> {
        if config.utility != UtilityKind::Gradient {
            return Ok(None);
        }
        let grads = grads.ok_or_else(|| Error::Config("gradient utility needs a gradient checkpoint".into()))?;
        let g = grads
            .get(t.name())
            .ok_or_else(|| Error::tensor(t.name(), "missing from gradient checkpoint"))?;
        if g.shape() != t.shape() {
            return Err(Error::tensor(
                t.name(),
                format!("gradient shape {:?} != weight shape {:?}", g.shape(), t.shape()),
            ));
        }
        Ok(Some(g.values()))
    };

    let scores: Vec<Vec<f64>> = exec::map(&weight_idx, |&i| {
        let t = &cp.tensors()[i];
        let g = grad_values(t)?;
        utilities(config.utility, &t.values(), g.as_deref()).map_err(|e| Error::tensor(t.name(), e.to_string()))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let masks: Vec<Vec<bool>> = match config.scope {
        Scope::PerTensor => exec::map_range(weight_idx.len(), |j| {
            let t = &cp.tensors()[weight_idx[j]];
            let mut rng = substream(config.seed, &format!("prune:{}", t.name()));
            select_prune_mask(&scores[j], &config.prune, &mut rng)
        })
        .into_iter()
        .collect::<Result<_>>()?,
        Scope::Global => {
            if scores.is_empty() {
                Vec::new()
            } else {
                let all: Vec<f64> = scores.iter().flatten().copied().collect();
                let mut rng = substream(config.seed, GLOBAL_STREAM);
                let flat = select_prune_mask(&all, &config.prune, &mut rng)?;
                let mut rest = flat.as_slice();
                scores
                    .iter()
                    .map(|s| {
                        let (head, tail) = rest.split_at(s.len());
                        rest = tail;
                        head.to_vec()
                    })
                    .collect()
            }
        }
    };

    let reinitialized: Vec<(Tensor, super::reinit::ReinitStats)> = exec::map_range(weight_idx.len(), |j| {
        let t = &cp.tensors()[weight_idx[j]];
        let mut rng = substream(config.seed, &format!("reinit:{}", t.name()));
        reinit_apply(t, &masks[j], config.reinit, &mut rng)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut out = cp.clone();
    let mut records: Vec<TensorRecord> = cp
        .tensors()
        .iter()
        .zip(&classes)
        .map(|(t, &class)| TensorRecord {
            name: t.name().to_string(),
            class,
            n_total: t.len(),
            n_reinitialized: 0,
            layer_mean: None,
            noise_scale: None,
        })
        .collect();

    for (j, (tensor, stats)) in reinitialized.into_iter().enumerate() {
        let i = weight_idx[j];
        records[i].n_reinitialized = stats.n_reinitialized;
        records[i].layer_mean = stats.layer_mean;
        records[i].noise_scale = stats.noise_scale;
        out.tensors_mut()[i] = tensor;
    }

    if config.bias_reset {
        for (i, class) in classes.iter().enumerate() {
            if *class == ParamClass::Bias {
                out.tensors_mut()[i].data_mut().fill_zero();
                records[i].n_reinitialized = records[i].n_total;
            }
        }
    }

    let sum_class = |c: ParamClass, f: fn(&TensorRecord) -> usize| -> usize {
        records.iter().filter(|r| r.class == c).map(f).sum()
    };
    let report = SurgeryReport {
        config: config.clone(),
        weight_elements: sum_class(ParamClass::Weight, |r| r.n_total),
        weights_reinitialized: sum_class(ParamClass::Weight, |r| r.n_reinitialized),
        biases_reset: sum_class(ParamClass::Bias, |r| r.n_reinitialized),
        total_reinitialized: records.iter().map(|r| r.n_reinitialized).sum(),
        records,
    };
    Ok((out, report))
}
