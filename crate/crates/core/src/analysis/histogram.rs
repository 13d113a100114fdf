use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::tensor_store::{Checkpoint, ClassificationRules, ParamClass};

pub const DEFAULT_BINS: usize = 100;

const CHUNK: usize = 1 << 16;

/// Uniform bins `[e_i, e_{i+1})`, the last one closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    fn empty(edges: Vec<f64>) -> Self {
        let bins = edges.len() - 1;
        Histogram {
            bin_edges: edges,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }
}

fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * (i as f64 / bins as f64)).collect();
    edges[bins] = hi;
    edges
}

fn bin_of(v: f64, edges: &[f64]) -> std::result::Result<usize, bool> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    if v < lo {
        return Err(false);
    }
    if v > hi {
        return Err(true);
    }
    let guess = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
    let mut i = guess.min(bins - 1);
    // Edge arithmetic can put the guess one off either way.
    while i > 0 && v < edges[i] {
        i -= 1;
    }
    while i + 1 < bins && v >= edges[i + 1] {
        i += 1;
    }
    Ok(i)
}

fn accumulate(values: &[f64], edges: &[f64]) -> Histogram {
    let partials = exec::map_chunks(values, CHUNK, |chunk| {
        let mut h = Histogram::empty(edges.to_vec());
        for &v in chunk {
            match bin_of(v, edges) {
                Ok(i) => h.counts[i] += 1,
                Err(false) => h.underflow += 1,
                Err(true) => h.overflow += 1,
            }
        }
        h
    });
    let mut h = Histogram::empty(edges.to_vec());
    for p in &partials {
        h.merge(p);
    }
    h
}

fn default_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo < hi {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Bins `values` uniformly over `range`, or over their min/max when absent.
/// A constant input with no range gets the unit interval centred on it.
pub fn histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::Invalid("histogram of an empty sample".into()));
    }
    if bins == 0 {
        return Err(Error::Invalid("histogram needs at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("histogram values must be finite".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) if lo < hi && lo.is_finite() && hi.is_finite() => (lo, hi),
        Some((lo, hi)) => return Err(Error::Invalid(format!("invalid histogram range ({lo}, {hi})"))),
        None => default_range(values.iter().copied()),
    };
    Ok(accumulate(values, &uniform_edges(lo, hi, bins)))
}

/// Base, experimental, and absolute-difference histograms on shared edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSet {
    pub base: Histogram,
    pub experimental: Histogram,
    pub diff: Histogram,
}

impl HistogramSet {
    pub fn new(base: Histogram, experimental: Histogram) -> Result<Self> {
        if base.bin_edges != experimental.bin_edges {
            return Err(Error::Invalid(
                "base and experimental histograms use different edges".into(),
            ));
        }
        let absdiff = |a: u64, b: u64| a.abs_diff(b);
        let diff = Histogram {
            bin_edges: base.bin_edges.clone(),
            counts: base
                .counts
                .iter()
                .zip(&experimental.counts)
                .map(|(&a, &b)| absdiff(a, b))
                .collect(),
            underflow: absdiff(base.underflow, experimental.underflow),
            overflow: absdiff(base.overflow, experimental.overflow),
        };
        Ok(HistogramSet {
            base,
            experimental,
            diff,
        })
    }

    /// Builds the set from raw values over their joint min/max.
    pub fn from_values(base: &[f64], experimental: &[f64], bins: usize) -> Result<Self> {
        if base.is_empty() || experimental.is_empty() {
            return Err(Error::Invalid("histogram set needs non-empty inputs".into()));
        }
        let range = default_range(base.iter().chain(experimental).copied());
        HistogramSet::new(
            histogram(base, bins, Some(range))?,
            histogram(experimental, bins, Some(range))?,
        )
    }
}

/// Tensor name with its base and experimental values.
type PairedValues = (String, Vec<f64>, Vec<f64>);

fn weight_values(base: &Checkpoint, exp: &Checkpoint, rules: &ClassificationRules) -> Result<Vec<PairedValues>> {
    let classifier = rules.compile()?;
    let mut out = Vec::new();
    for t in base.tensors() {
        if classifier.classify(t.name()) != ParamClass::Weight {
            continue;
        }
        let other = exp
            .get(t.name())
            .ok_or_else(|| Error::tensor(t.name(), "missing from experimental checkpoint"))?;
        if other.shape() != t.shape() {
            return Err(Error::tensor(
                t.name(),
                format!("shape {:?} in base vs {:?} in experimental", t.shape(), other.shape()),
            ));
        }
        out.push((t.name().to_string(), t.values(), other.values()));
    }
    for t in exp.tensors() {
        if classifier.classify(t.name()) == ParamClass::Weight && base.get(t.name()).is_none() {
            return Err(Error::tensor(t.name(), "missing from base checkpoint"));
        }
    }
    Ok(out)
}

/// Histograms over all weight-classified entries of both checkpoints.
pub fn build_histogram_set(
    base: &Checkpoint,
    exp: &Checkpoint,
    bins: usize,
    rules: &ClassificationRules,
) -> Result<HistogramSet> {
    let tensors = weight_values(base, exp, rules)?;
    let b: Vec<f64> = tensors.iter().flat_map(|(_, b, _)| b.iter().copied()).collect();
    let e: Vec<f64> = tensors.iter().flat_map(|(_, _, e)| e.iter().copied()).collect();
    HistogramSet::from_values(&b, &e, bins)
}

/// One histogram set per weight tensor (empty tensors skipped).
pub fn build_layer_histogram_sets(
    base: &Checkpoint,
    exp: &Checkpoint,
    bins: usize,
    rules: &ClassificationRules,
) -> Result<Vec<(String, HistogramSet)>> {
    weight_values(base, exp, rules)?
        .into_iter()
        .filter(|(_, b, _)| !b.is_empty())
        .map(|(name, b, e)| Ok((name, HistogramSet::from_values(&b, &e, bins)?)))
        .collect()
}
