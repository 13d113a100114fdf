//! Run statistics: descriptive summaries, the one-sided Mann-Whitney U test,
//! and the case-vs-base comparison table.

mod compare;
mod mwu;
mod runs;
mod summary;

pub use compare::{compare_cases, ComparisonReport, ComparisonRow, BASE_TAG};
pub use mwu::{mann_whitney_u, midranks, Alternative, Degeneracy, Method, MwuResult, EXACT_LIMIT};
pub use runs::{group_runs, read_runs, read_runs_from, write_runs, write_runs_to, RunRecord, RunSample};
pub use summary::{summarize, GroupSummary};
