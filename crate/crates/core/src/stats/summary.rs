use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); absent for n = 1.
    pub std: Option<f64>,
}

pub fn summarize(samples: &[f64]) -> Result<GroupSummary> {
    if samples.is_empty() {
        return Err(Error::Invalid("cannot summarize an empty sample".into()));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| {
        let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(GroupSummary { n, mean, std })
}
