//! One-sided Mann-Whitney U test.
//!
//! `U` is the statistic of the first sample computed from midranks. The exact
//! p-value enumerates every assignment of the pooled observations to the two
//! groups (conditioning on the observed tie pattern) whenever there are at
//! most [`EXACT_LIMIT`] assignments. The normal approximation uses the
//! tie-corrected variance and a 0.5 continuity correction and is always
//! reported alongside.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec;

/// Largest `C(n+m, n)` for which the exact distribution is enumerated.
pub const EXACT_LIMIT: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    /// The first sample is stochastically larger.
    Greater,
    /// The first sample is stochastically smaller.
    Less,
}

impl Alternative {
    pub fn flip(self) -> Self {
        match self {
            Alternative::Greater => Alternative::Less,
            Alternative::Less => Alternative::Greater,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// Every observation is equal; the test carries no information.
    AllIdentical,
    /// `U` sits exactly at its null mean `n*m/2`.
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    pub u_statistic: f64,
    pub p_exact: Option<f64>,
    pub p_approx: f64,
    pub alternative: Alternative,
    pub method_used: Method,
    pub degenerate: Option<Degeneracy>,
}

impl MwuResult {
    /// The p-value of the method actually used.
    pub fn p_value(&self) -> f64 {
        match self.method_used {
            Method::Exact => self.p_exact.expect("exact method implies exact p"),
            Method::Approx => self.p_approx,
        }
    }
}

/// 1-based midranks of `values`: tied values share the average of the ranks
/// they span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Sizes of the tie groups in the pooled sample.
fn tie_groups(sorted: &[f64]) -> Vec<usize> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    groups
}

/// Counts group assignments whose doubled U of the first sample is at least
/// (`Greater`) or at most (`Less`) `u2_obs`.
///
/// Assignments are enumerated as subsets of size `r = min(n, m)` of the
/// pooled doubled ranks; work is split on the subset's smallest element.
fn exact_tail_count(ranks2: &[u64], n: usize, m: usize, u2_obs: u64, alt: Alternative) -> u64 {
    let total = ranks2.len();
    let pick_first = n <= m;
    let r = n.min(m);
    let to_u2_first = |sum2: u64| -> u64 {
        if pick_first {
            sum2 - (n * (n + 1)) as u64
        } else {
            2 * (n * m) as u64 - (sum2 - (m * (m + 1)) as u64)
        }
    };
    let hit = |u2: u64| match alt {
        Alternative::Greater => u2 >= u2_obs,
        Alternative::Less => u2 <= u2_obs,
    };
    if r == 0 {
        return 1;
    }

    let counts = exec::map_range(total - r + 1, |first| {
        let rest = r - 1;
        let base = ranks2[first];
        if rest == 0 {
            return hit(to_u2_first(base)) as u64;
        }
        let pool = &ranks2[first + 1..];
        if pool.len() < rest {
            return 0;
        }
        let mut idx: Vec<usize> = (0..rest).collect();
        let mut sum: u64 = base + idx.iter().map(|&i| pool[i]).sum::<u64>();
        let mut count = 0u64;
        loop {
            count += hit(to_u2_first(sum)) as u64;
            // Advance to the next combination in lexicographic order.
            let mut pos = rest;
            loop {
                if pos == 0 {
                    return count;
                }
                pos -= 1;
                if idx[pos] < pool.len() - rest + pos {
                    break;
                }
            }
            sum -= pool[idx[pos]];
            idx[pos] += 1;
            sum += pool[idx[pos]];
            for q in pos + 1..rest {
                sum -= pool[idx[q]];
                idx[q] = idx[q - 1] + 1;
                sum += pool[idx[q]];
            }
        }
    });
    counts.into_iter().sum()
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<MwuResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid("Mann-Whitney U needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("Mann-Whitney U samples must be finite".into()));
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    // Doubled midranks are integers.
    let ranks2: Vec<u64> = ranks.iter().map(|r| (r * 2.0).round() as u64).collect();
    let r2_first: u64 = ranks2[..n].iter().sum();
    let u2 = r2_first - (n * (n + 1)) as u64;
    let u = u2 as f64 / 2.0;
    let nm = (n * m) as f64;

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let ties = tie_groups(&sorted);

    if ties.len() == 1 {
        return Ok(MwuResult {
            u_statistic: u,
            p_exact: Some(1.0),
            p_approx: 1.0,
            alternative,
            method_used: Method::Exact,
            degenerate: Some(Degeneracy::AllIdentical),
        });
    }

    let big_n = (n + m) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (big_n * (big_n - 1.0));
    let var = nm / 12.0 * ((big_n + 1.0) - tie_term);
    let mean = nm / 2.0;
    let std_normal = Normal::standard();
    let p_approx = if var > 0.0 {
        let sd = var.sqrt();
        match alternative {
            Alternative::Greater => std_normal.sf((u - mean - 0.5) / sd),
            Alternative::Less => std_normal.cdf((u - mean + 0.5) / sd),
        }
    } else {
        1.0
    }
    .clamp(0.0, 1.0);

    let p_exact = match binomial((n + m) as u64, n as u64) {
        Some(total) if total <= EXACT_LIMIT => {
            let hits = exact_tail_count(&ranks2, n, m, u2, alternative);
            Some(hits as f64 / total as f64)
        }
        _ => None,
    };

    Ok(MwuResult {
        u_statistic: u,
        p_exact,
        p_approx,
        alternative,
        method_used: if p_exact.is_some() {
            Method::Exact
        } else {
            Method::Approx
        },
        degenerate: (u2 == (n * m) as u64).then_some(Degeneracy::Centered),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    // Enumeration oracle over C(6,3) = 20 labelings: only the observed one
    // reaches U = 9, so P(U >= 9) = 1/20.
    #[test]
    fn exact_examples() {
        let r = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Alternative::Greater).unwrap();
        assert_eq!(r.u_statistic, 9.0);
        assert_eq!(r.p_exact, Some(0.05));
        assert_eq!(r.method_used, Method::Exact);

        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Greater).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.p_exact, Some(1.0));
    }

    #[test]
    fn identical_samples_are_centered() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = mann_whitney_u(&a, &a, Alternative::Greater).unwrap();
        assert_eq!(r.u_statistic, 12.5);
        assert_eq!(r.degenerate, Some(Degeneracy::Centered));
        let p = r.p_exact.unwrap();
        assert!(p > 0.5 && p < 0.65, "{p}");
        assert!(r.p_approx > 0.5 && r.p_approx < 0.65, "{}", r.p_approx);
    }

    #[test]
    fn all_identical_is_degenerate() {
        let r = mann_whitney_u(&[2.0; 3], &[2.0; 4], Alternative::Less).unwrap();
        assert_eq!(r.degenerate, Some(Degeneracy::AllIdentical));
        assert_eq!(r.p_value(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(mann_whitney_u(&[], &[1.0], Alternative::Greater).is_err());
        assert!(mann_whitney_u(&[f64::NAN], &[1.0], Alternative::Greater).is_err());
    }

    #[test]
    fn large_samples_fall_back_to_approximation() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 + 0.5).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let r = mann_whitney_u(&a, &b, Alternative::Greater).unwrap();
        assert_eq!(r.method_used, Method::Approx);
        assert!(r.p_exact.is_none());
        assert!(r.p_approx > 0.3 && r.p_approx < 0.5);
    }

    #[test]
    fn unbalanced_groups_use_smaller_side() {
        // C(7,1) = 7 labelings; the single a-value is the largest.
        let r = mann_whitney_u(&[9.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], Alternative::Greater).unwrap();
        assert_eq!(r.u_statistic, 6.0);
        assert!((r.p_exact.unwrap() - 1.0 / 7.0).abs() < 1e-15);
        let r = mann_whitney_u(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[9.0], Alternative::Less).unwrap();
        assert!((r.p_exact.unwrap() - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 3), Some(20));
        assert_eq!(binomial(20, 10), Some(184_756));
        assert_eq!(binomial(5, 0), Some(1));
    }
}
