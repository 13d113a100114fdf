use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mwu::{mann_whitney_u, Alternative, MwuResult};
use super::runs::RunSample;
use super::summary::{summarize, GroupSummary};

pub const BASE_TAG: &str = "Base";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub case_tag: String,
    pub is_base: bool,
    pub accuracy: GroupSummary,
    pub epochs: GroupSummary,
    /// Case accuracy stochastically greater than base.
    pub accuracy_test: Option<MwuResult>,
    /// Case epochs stochastically less than base (faster convergence).
    pub epochs_test: Option<MwuResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Sorted by mean accuracy, descending; equal means order by tag.
    pub rows: Vec<ComparisonRow>,
}

fn check_group(name: &str, runs: &[RunSample]) -> Result<()> {
    if runs.len() < 2 {
        return Err(Error::TooFewRuns {
            group: name.to_string(),
            got: runs.len(),
        });
    }
    runs.iter().try_for_each(RunSample::validate)
}

fn columns(runs: &[RunSample]) -> (Vec<f64>, Vec<f64>) {
    runs.iter().map(|r| (r.accuracy, r.epochs as f64)).unzip()
}

/// Summarizes each case and tests it against the base runs.
///
/// `experiment_runs` must not contain the base tag; the base row is added
/// from `base_runs`.
pub fn compare_cases(
    experiment_runs: &BTreeMap<String, Vec<RunSample>>,
    base_runs: &[RunSample],
) -> Result<ComparisonReport> {
    check_group(BASE_TAG, base_runs)?;
    let (base_acc, base_ep) = columns(base_runs);
    let mut rows = vec![ComparisonRow {
        case_tag: BASE_TAG.to_string(),
        is_base: true,
        accuracy: summarize(&base_acc)?,
        epochs: summarize(&base_ep)?,
        accuracy_test: None,
        epochs_test: None,
    }];
    for (tag, runs) in experiment_runs {
        if tag == BASE_TAG {
            continue;
        }
        check_group(tag, runs)?;
        let (acc, ep) = columns(runs);
        rows.push(ComparisonRow {
            case_tag: tag.clone(),
            is_base: false,
            accuracy: summarize(&acc)?,
            epochs: summarize(&ep)?,
            accuracy_test: Some(mann_whitney_u(&acc, &base_acc, Alternative::Greater)?),
            epochs_test: Some(mann_whitney_u(&ep, &base_ep, Alternative::Less)?),
        });
    }
    rows.sort_by(|a, b| {
        b.accuracy
            .mean
            .partial_cmp(&a.accuracy.mean)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.case_tag.cmp(&b.case_tag))
    });
    Ok(ComparisonReport { rows })
}

/// Renders `10M` as `10 M`; other tags pass through.
fn display_tag(tag: &str) -> String {
    let digits = tag.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 && digits < tag.len() {
        format!("{} {}", &tag[..digits], &tag[digits..])
    } else {
        tag.to_string()
    }
}

impl ComparisonReport {
    pub fn row(&self, tag: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.case_tag == tag)
    }

    /// Aligned text table: case, accuracy ± std, epochs ± std, and the
    /// one-sided p-values. The base row is wrapped in asterisks.
    pub fn to_table(&self) -> String {
        let fmt_std = |s: &GroupSummary| s.std.map_or("-".to_string(), |v| format!("{v:.3}"));
        let fmt_p = |t: &Option<MwuResult>| t.map_or("-".to_string(), |r| format!("{:.5}", r.p_value()));
        let header = [
            "Experimental Case".to_string(),
            "Accuracy".into(),
            "Std".into(),
            "Epochs".into(),
            "Std".into(),
            "p(acc >)".into(),
            "p(epochs <)".into(),
        ];
        let mut cells: Vec<[String; 7]> = vec![header];
        for r in &self.rows {
            let tag = display_tag(&r.case_tag);
            cells.push([
                if r.is_base { format!("*{tag}*") } else { tag },
                format!("{:.3}", r.accuracy.mean),
                fmt_std(&r.accuracy),
                format!("{:.3}", r.epochs.mean),
                fmt_std(&r.epochs),
                fmt_p(&r.accuracy_test),
                fmt_p(&r.epochs_test),
            ]);
        }
        let widths: Vec<usize> = (0..7)
            .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let line = format!(
                "{:<w0$} | {:>w1$} ± {:<w2$} | {:>w3$} ± {:<w4$} | {:>w5$} | {:>w6$}",
                row[0],
                row[1],
                row[2],
                row[3],
                row[4],
                row[5],
                row[6],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3],
                w4 = widths[4],
                w5 = widths[5],
                w6 = widths[6],
            );
            let _ = writeln!(out, "{}", line.trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(line.trim_end().chars().count()));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
