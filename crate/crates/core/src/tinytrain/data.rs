//! Synthetic source/target classification tasks with a controllable
//! domain shift.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Row-major `[n, dims]`.
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub dims: usize,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.dims);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            dims: self.dims,
            n_classes: self.n_classes,
        }
    }
}

/// Disjoint train/validation/test partitions of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl SplitDataset {
    /// Shuffles `all` and splits it 70/15/15.
    pub fn split(all: &Dataset, seed: u64) -> Result<Self> {
        let n = all.len();
        let n_train = n * 70 / 100;
        let n_val = n * 15 / 100;
        if n_train == 0 || n_val == 0 || n - n_train - n_val == 0 {
            return Err(Error::Invalid(format!("{n} samples are too few for a 70/15/15 split")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut substream(seed, "split"));
        Ok(SplitDataset {
            train: all.subset(&idx[..n_train]),
            val: all.subset(&idx[n_train..n_train + n_val]),
            test: all.subset(&idx[n_train + n_val..]),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub dims: usize,
    pub classes: usize,
    pub per_class: usize,
    /// Standard deviation of the class means; samples have unit noise.
    pub separation: f64,
    /// Rotation intensity; 0 leaves the input space unchanged.
    pub shift: f64,
    /// Relabel target classes through a random permutation.
    pub permute_labels: bool,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            dims: 16,
            classes: 4,
            per_class: 500,
            separation: 0.8,
            shift: 1.0,
            permute_labels: true,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims < 2 || self.classes < 2 || self.per_class == 0 {
            return Err(Error::Config(format!(
                "degenerate task: dims={} classes={} per_class={}",
                self.dims, self.classes, self.per_class
            )));
        }
        if self.separation.is_nan() || self.separation <= 0.0 || !self.shift.is_finite() || self.shift < 0.0 {
            return Err(Error::Config("separation must be > 0 and shift >= 0".into()));
        }
        Ok(())
    }
}

/// A source task and its shifted target counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferTasks {
    pub source: SplitDataset,
    pub target: SplitDataset,
    /// Row-major `[dims, dims]` orthogonal map applied to target inputs.
    pub rotation: Vec<f64>,
    /// Source class `c` is labelled `label_map[c]` in the target task.
    pub label_map: Vec<usize>,
    pub class_means: Vec<Vec<f64>>,
}

/// Planar rotations over a random pairing of the axes. Each pair turns by
/// `shift` times an angle in `[pi/4, pi/2)`.
fn pairwise_rotation<R: Rng>(rng: &mut R, d: usize, shift: f64) -> Vec<f64> {
    let mut r = vec![0.0; d * d];
    for i in 0..d {
        r[i * d + i] = 1.0;
    }
    let mut axes: Vec<usize> = (0..d).collect();
    axes.shuffle(rng);
    for pair in axes.chunks_exact(2) {
        let (p, q) = (pair[0], pair[1]);
        let theta: f64 = shift * rng.random_range(std::f64::consts::FRAC_PI_4..std::f64::consts::FRAC_PI_2);
        let (s, c) = theta.sin_cos();
        r[p * d + p] = c;
        r[p * d + q] = -s;
        r[q * d + p] = s;
        r[q * d + q] = c;
    }
    r
}

fn sample_blobs<R: Rng>(rng: &mut R, means: &[Vec<f64>], per_class: usize) -> Dataset {
    let d = means[0].len();
    let mut features = Vec::with_capacity(means.len() * per_class * d);
    let mut labels = Vec::with_capacity(means.len() * per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            for m in mean {
                let z: f64 = StandardNormal.sample(rng);
                features.push(m + z);
            }
            labels.push(c);
        }
    }
    Dataset {
        features,
        labels,
        dims: d,
        n_classes: means.len(),
    }
}

/// Gaussian class blobs for the source task; the target draws fresh samples
/// from the same blobs, rotates the inputs, and relabels the classes.
pub fn synth_transfer_tasks(seed: u64, cfg: &TaskConfig) -> Result<TransferTasks> {
    cfg.validate()?;
    let d = cfg.dims;
    let mut mean_rng = substream(seed, "class_means");
    let class_means: Vec<Vec<f64>> = (0..cfg.classes)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut mean_rng);
                    z * cfg.separation
                })
                .collect()
        })
        .collect();

    let mut shift_rng = substream(seed, "shift");
    let rotation = pairwise_rotation(&mut shift_rng, d, cfg.shift);
    let mut label_map: Vec<usize> = (0..cfg.classes).collect();
    if cfg.permute_labels {
        label_map.shuffle(&mut shift_rng);
    }

    let source = sample_blobs(&mut substream(seed, "source"), &class_means, cfg.per_class);
    let mut target = sample_blobs(&mut substream(seed, "target"), &class_means, cfg.per_class);
    let mut rotated = vec![0.0; target.features.len()];
    for i in 0..target.len() {
        let x = &target.features[i * d..(i + 1) * d];
        for r in 0..d {
            rotated[i * d + r] = (0..d).map(|k| rotation[r * d + k] * x[k]).sum();
        }
    }
    target.features = rotated;
    target.labels.iter_mut().for_each(|y| *y = label_map[*y]);

    Ok(TransferTasks {
        source: SplitDataset::split(&source, crate::rng::derive_seed(seed, "source_split"))?,
        target: SplitDataset::split(&target, crate::rng::derive_seed(seed, "target_split"))?,
        rotation,
        label_map,
        class_means,
    })
}
