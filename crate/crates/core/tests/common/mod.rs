//! Reference implementations used as oracles by the integration and
//! acceptance tests. Each one is written independently of the library code
//! it checks, favouring the most direct formulation over speed.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replast::tensor_store::{Checkpoint, DType, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Finite values with awkward bit patterns mixed in.
pub fn random_value<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..20) {
        0 => -0.0,
        1 => f64::MIN_POSITIVE / 4.0,
        2 => f32::MAX as f64,
        3 => -(f32::MIN_POSITIVE as f64) / 8.0,
        _ => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-6..6)),
    }
}

/// A shape with the given element count: rank 0 for a single element
/// sometimes, otherwise rank 1 to 3.
pub fn random_shape<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    if n == 1 && rng.random_bool(0.3) {
        return Vec::new();
    }
    match rng.random_range(0..3) {
        0 => vec![n],
        1 if n == 0 => vec![0, rng.random_range(1..4)],
        1 => {
            let divisors: Vec<usize> = (1..)
                .take_while(|d| d * d <= n)
                .filter(|&d| n.is_multiple_of(d))
                .collect();
            let d = divisors[rng.random_range(0..divisors.len())];
            if rng.random_bool(0.5) {
                vec![d, n / d]
            } else {
                vec![n / d, d]
            }
        }
        _ => vec![1, n, 1],
    }
}

pub fn random_tensor<R: Rng>(rng: &mut R, name: String, n: usize, dtype: DType) -> Tensor {
    let shape = random_shape(rng, n);
    match dtype {
        DType::F32 => Tensor::from_f32(name, shape, (0..n).map(|_| random_value(rng) as f32).collect()),
        DType::F64 => Tensor::from_f64(name, shape, (0..n).map(|_| random_value(rng)).collect()),
    }
    .expect("shape matches element count")
}

/// `n_tensors` tensors with mixed dtypes, sizes up to `max_len`, and random
/// metadata.
pub fn random_checkpoint<R: Rng>(rng: &mut R, n_tensors: usize, max_len: usize) -> Checkpoint {
    let mut cp = Checkpoint::new();
    for i in 0..n_tensors {
        let n = if rng.random_bool(0.5) {
            rng.random_range(0..=max_len)
        } else {
            rng.random_range(0..=max_len.min(64))
        };
        let dtype = if rng.random_bool(0.5) { DType::F32 } else { DType::F64 };
        let name = format!("block{}.{}.weight", rng.random_range(0..1000), i);
        cp.push(random_tensor(rng, name, n, dtype)).expect("unique names");
    }
    if rng.random_bool(0.5) {
        cp.metadata_mut().insert("format".into(), "pt".into());
        cp.metadata_mut()
            .insert(format!("k{}", rng.random_range(0..100)), "v\"q".into());
    }
    cp
}

/// Positions whose stored bits differ.
pub fn changed_positions(a: &Tensor, b: &Tensor) -> Vec<bool> {
    assert_eq!(a.len(), b.len());
    (0..a.len()).map(|i| !a.data().bits_eq_at(b.data(), i)).collect()
}

/// The `count` smallest magnitudes by full sort on (|w|, index).
pub fn lowest_by_sort(weights: &[f64], count: usize) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&i, &j| weights[i].abs().partial_cmp(&weights[j].abs()).unwrap().then(i.cmp(&j)));
    let mut mask = vec![false; weights.len()];
    for &i in &idx[..count] {
        mask[i] = true;
    }
    mask
}

/// `floor(n * k)` for the fractions used in tests, computed in integer
/// arithmetic from a whole-percent `k`.
pub fn floor_percent(n: usize, percent: usize) -> usize {
    n * percent / 100
}

/// U for the first sample by direct pair counting.
pub fn u_by_pairs(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// One-sided exact p-value for tie-free samples: enumerates every subset of
/// the pooled ranks `1..=N` as a bitmask and counts the labelings at least
/// as extreme as the observed one.
pub fn exact_p_by_subsets(a: &[f64], b: &[f64], greater: bool) -> f64 {
    let (n, m) = (a.len(), b.len());
    let total = n + m;
    assert!(total <= 20);
    // With distinct values, U depends only on the rank-sum of the first sample.
    let observed = u_by_pairs(a, b).round() as i64;
    let offset = (n * (n + 1) / 2) as i64;
    let (mut hits, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let rank_sum: i64 = (0..total).filter(|r| mask >> r & 1 == 1).map(|r| r as i64 + 1).sum();
        let u = rank_sum - offset;
        all += 1;
        if (greater && u >= observed) || (!greater && u <= observed) {
            hits += 1;
        }
    }
    hits as f64 / all as f64
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Counts per bin by linear scan over the edges: `[e_i, e_{i+1})`, last bin
/// closed.
pub fn counts_by_scan(values: &[f64], edges: &[f64]) -> Vec<u64> {
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for &v in values {
        for i in 0..bins {
            let last = i == bins - 1;
            if v >= edges[i] && (v < edges[i + 1] || (last && v <= edges[i + 1])) {
                counts[i] += 1;
                break;
            }
        }
    }
    counts
}
