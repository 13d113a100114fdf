//! The repeated-run transfer protocol: pretrain on the source task, apply
//! one surgery per case, fine-tune on the target task with early stopping,
//! and compare every case against the untouched base.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::derive_seed;
use crate::stats::{
    compare_cases, summarize, ComparisonReport, ComparisonRow, GroupSummary, RunRecord, RunSample, BASE_TAG,
};
use crate::surgery::{apply_surgery, parse_config_tag, CaseTag, PruneSpec, Scope, SurgeryConfig};
use crate::tensor_store::{Checkpoint, ClassificationRules};

use super::data::{synth_transfer_tasks, TaskConfig, TransferTasks};
use super::mlp::{Mlp, MlpSpec};
use super::saturation::induce_saturation;
use super::train::{accuracy, train, TrainConfig};

/// The bundled demo protocol.
pub const DEMO_PROTOCOL: &str = include_str!("../../protocols/demo.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    Base,
    Surgery(CaseTag),
}

impl Case {
    pub fn parse(s: &str) -> Result<Self> {
        if s == BASE_TAG {
            Ok(Case::Base)
        } else {
            parse_config_tag(s).map(Case::Surgery)
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Case::Base => f.write_str(BASE_TAG),
            Case::Surgery(t) => t.fmt(f),
        }
    }
}

fn default_seed() -> u64 {
    2024
}

fn default_repetitions() -> usize {
    10
}

fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// `"Base"` and/or case tags such as `"10M"`.
    pub cases: Vec<String>,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub pretrain: TrainConfig,
    #[serde(default)]
    pub finetune: TrainConfig,
    /// Fraction passed to `induce_saturation` after pretraining; 0 disables.
    #[serde(default)]
    pub saturation: f64,
    #[serde(default)]
    pub scope: Scope,
    /// Also zero the biases in the base case.
    #[serde(default)]
    pub bias_reset_all_cases: bool,
    #[serde(default)]
    pub rules: ClassificationRules,
}

impl Protocol {
    pub fn demo() -> Self {
        Protocol::parse(DEMO_PROTOCOL, false).expect("bundled protocol parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Protocol::parse(&text, is_json)
    }

    pub fn parse(text: &str, is_json: bool) -> Result<Self> {
        if is_json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    /// Parses the case list and checks every setting before any training.
    pub fn validate(&self) -> Result<Vec<Case>> {
        if self.cases.is_empty() {
            return Err(Error::Config("protocol lists no cases".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        let cases = self
            .cases
            .iter()
            .map(|c| {
                let case = Case::parse(c)?;
                if !seen.insert(case) {
                    return Err(Error::Config(format!("case `{c}` listed twice")));
                }
                Ok(case)
            })
            .collect::<Result<Vec<_>>>()?;
        self.task.validate()?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        self.spec().validate()?;
        self.rules.compile()?;
        if !(0.0..1.0).contains(&self.saturation) {
            return Err(Error::Config(format!("saturation {} outside [0, 1)", self.saturation)));
        }
        Ok(cases)
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec::new(self.task.dims, &self.hidden, self.task.classes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub case_tag: String,
    pub runs: Vec<RunSample>,
    pub accuracy: GroupSummary,
    pub epochs: GroupSummary,
    /// One-sided p-value, case accuracy greater than base.
    pub accuracy_p: Option<f64>,
    /// One-sided p-value, case epochs less than base.
    pub epochs_p: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// In protocol case order.
    pub results: Vec<ExperimentResult>,
    /// One row per (repetition, case), repetition-major.
    pub records: Vec<RunRecord>,
    /// Present when the protocol has a base case and at least two repetitions.
    pub comparison: Option<ComparisonReport>,
    /// Fine-tuned parameters of repetition 0, per case.
    pub first_repetition: Vec<(String, Checkpoint)>,
}

impl ExperimentOutput {
    pub fn table(&self) -> String {
        match &self.comparison {
            Some(c) => c.to_table(),
            None => {
                let mut rows: Vec<ComparisonRow> = self
                    .results
                    .iter()
                    .map(|r| ComparisonRow {
                        case_tag: r.case_tag.clone(),
                        is_base: r.case_tag == BASE_TAG,
                        accuracy: r.accuracy,
                        epochs: r.epochs,
                        accuracy_test: None,
                        epochs_test: None,
                    })
                    .collect();
                rows.sort_by(|a, b| {
                    b.accuracy
                        .mean
                        .total_cmp(&a.accuracy.mean)
                        .then_with(|| a.case_tag.cmp(&b.case_tag))
                });
                ComparisonReport { rows }.to_table()
            }
        }
    }
}

struct RepetitionRun {
    records: Vec<RunRecord>,
    checkpoints: Vec<Checkpoint>,
}

fn starting_point(p: &Protocol, case: Case, pretrained: &Checkpoint, surgery_seed: u64) -> Result<Checkpoint> {
    match case {
        Case::Base if !p.bias_reset_all_cases => Ok(pretrained.clone()),
        Case::Base => {
            // Nothing has utility below zero, so only the biases change.
            let config = SurgeryConfig {
                prune: PruneSpec::Threshold { t: 0.0 },
                ..SurgeryConfig::from_tag(
                    CaseTag {
                        percent: 1,
                        reinit: crate::surgery::ReinitKind::M,
                    },
                    surgery_seed,
                )
            };
            Ok(apply_surgery(pretrained, None, &config, &p.rules)?.0)
        }
        Case::Surgery(tag) => {
            let config = SurgeryConfig {
                scope: p.scope,
                ..SurgeryConfig::from_tag(tag, surgery_seed)
            };
            Ok(apply_surgery(pretrained, None, &config, &p.rules)?.0)
        }
    }
}

fn run_repetition(p: &Protocol, tasks: &TransferTasks, cases: &[Case], rep: usize) -> Result<RepetitionRun> {
    let spec = p.spec();
    let rep_seed = derive_seed(p.master_seed, &format!("rep{rep}"));
    let init = Mlp::init(&spec, derive_seed(rep_seed, "init"))?;
    let pre_cfg = TrainConfig {
        seed: derive_seed(rep_seed, "pretrain"),
        ..p.pretrain.clone()
    };
    let mut pretrained = train(&init, &tasks.source, &pre_cfg)?.model;
    if p.saturation > 0.0 {
        pretrained = induce_saturation(&pretrained, p.saturation, derive_seed(rep_seed, "saturate"))?;
    }
    let pretrained = pretrained.to_checkpoint();

    let fine_cfg = TrainConfig {
        seed: derive_seed(rep_seed, "finetune"),
        ..p.finetune.clone()
    };
    let surgery_seed = derive_seed(rep_seed, "surgery");
    let mut run = RepetitionRun {
        records: Vec::with_capacity(cases.len()),
        checkpoints: Vec::new(),
    };
    for &case in cases {
        let start = starting_point(p, case, &pretrained, surgery_seed)?;
        let model = Mlp::from_checkpoint(&spec, &start)?;
        let out = train(&model, &tasks.target, &fine_cfg)?;
        run.records.push(RunRecord {
            case_tag: case.to_string(),
            seed: rep_seed,
            accuracy: accuracy(&out.model, &tasks.target.test)?,
            epochs: out.best_epoch as u32,
            stop_epoch: Some(out.epochs_run as u32),
        });
        if rep == 0 {
            run.checkpoints.push(out.model.to_checkpoint());
        }
    }
    Ok(run)
}

/// Runs every repetition (concurrently when the `parallel` feature is on)
/// and aggregates the results. Each repetition is itself sequential and
/// seeded from the master seed, so output does not depend on scheduling.
pub fn run_experiment(p: &Protocol) -> Result<ExperimentOutput> {
    let cases = p.validate()?;
    let tasks = synth_transfer_tasks(derive_seed(p.master_seed, "task"), &p.task)?;
    let reps: Vec<RepetitionRun> = exec::map_range(p.repetitions, |r| run_repetition(p, &tasks, &cases, r))
        .into_iter()
        .collect::<Result<_>>()?;

    let mut by_case: BTreeMap<String, Vec<RunSample>> = BTreeMap::new();
    for rep in &reps {
        for rec in &rep.records {
            by_case.entry(rec.case_tag.clone()).or_default().push(rec.sample());
        }
    }

    let comparison = match by_case.get(BASE_TAG) {
        Some(base) if p.repetitions >= 2 => Some(compare_cases(&by_case, base)?),
        _ => None,
    };

    let results = cases
        .iter()
        .map(|case| {
            let tag = case.to_string();
            let runs = by_case[&tag].clone();
            let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
            let ep: Vec<f64> = runs.iter().map(|r| r.epochs as f64).collect();
            let row = comparison.as_ref().and_then(|c| c.row(&tag));
            Ok(ExperimentResult {
                accuracy: summarize(&acc)?,
                epochs: summarize(&ep)?,
                accuracy_p: row.and_then(|r| r.accuracy_test).map(|t| t.p_value()),
                epochs_p: row.and_then(|r| r.epochs_test).map(|t| t.p_value()),
                case_tag: tag,
                runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reps = reps.into_iter();
    let first = reps.next().expect("at least one repetition");
    let records = first
        .records
        .iter()
        .cloned()
        .chain(reps.flat_map(|r| r.records))
        .collect();
    let first_repetition = cases.iter().map(|c| c.to_string()).zip(first.checkpoints).collect();

    Ok(ExperimentOutput {
        results,
        records,
        comparison,
        first_repetition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(cases: &[&str], reps: usize) -> Protocol {
        Protocol {
            master_seed: 5,
            repetitions: reps,
            cases: cases.iter().map(|s| s.to_string()).collect(),
            task: TaskConfig {
                per_class: 40,
                ..Default::default()
            },
            hidden: vec![8],
            pretrain: TrainConfig {
                max_epochs: 15,
                patience: 3,
                ..Default::default()
            },
            finetune: TrainConfig {
                max_epochs: 15,
                patience: 3,
                ..Default::default()
            },
            saturation: 0.0,
            scope: Scope::PerTensor,
            bias_reset_all_cases: false,
            rules: ClassificationRules::default(),
        }
    }

    #[test]
    fn base_only_has_one_row_and_no_p_values() {
        let out = run_experiment(&small(&["Base"], 2)).unwrap();
        assert_eq!(out.results.len(), 1);
        assert!(out.results[0].accuracy_p.is_none());
        assert_eq!(out.comparison.as_ref().unwrap().rows.len(), 1);
        assert_eq!(out.records.len(), 2);
    }

    #[test]
    fn unknown_or_duplicate_cases_fail_validation() {
        assert!(matches!(
            small(&["Base", "10X"], 2).validate(),
            Err(Error::UnknownReinit(_))
        ));
        assert!(small(&["10M", "10M"], 2).validate().is_err());
        assert!(small(&[], 2).validate().is_err());
    }

    #[test]
    fn deterministic_and_zero_count_surgery_matches_base() {
        // 1% of the smallest tensor (8 biases excluded; 32 weights in the
        // output layer) floors to zero only for tensors with < 100 entries,
        // so use a model where every weight tensor is that small.
        let mut p = small(&["Base", "1M"], 2);
        p.hidden = vec![4];
        p.task.dims = 16; // 64 and 16 weights per layer
        let a = run_experiment(&p).unwrap();
        let b = run_experiment(&p).unwrap();
        assert_eq!(a.records, b.records);

        // With bias reset off, a zero-count surgery is the base case.
        let tasks = synth_transfer_tasks(derive_seed(p.master_seed, "task"), &p.task).unwrap();
        let rep = run_repetition(&p, &tasks, &[Case::Base], 0).unwrap();
        let mut pz = p.clone();
        pz.bias_reset_all_cases = false;
        let pre = {
            let spec = p.spec();
            let rep_seed = derive_seed(p.master_seed, "rep0");
            let init = Mlp::init(&spec, derive_seed(rep_seed, "init")).unwrap();
            let cfg = TrainConfig {
                seed: derive_seed(rep_seed, "pretrain"),
                ..p.pretrain.clone()
            };
            train(&init, &tasks.source, &cfg).unwrap().model.to_checkpoint()
        };
        let mut cfg = SurgeryConfig::from_tag(parse_config_tag("1M").unwrap(), 0);
        cfg.bias_reset = false;
        let (same, report) = apply_surgery(&pre, None, &cfg, &pz.rules).unwrap();
        assert_eq!(report.total_reinitialized, 0);
        assert_eq!(same, pre);
        assert_eq!(rep.records[0].case_tag, "Base");
    }

    #[test]
    fn demo_protocol_parses() {
        let p = Protocol::demo();
        let cases = p.validate().unwrap();
        assert_eq!(cases.len(), 5);
        assert_eq!(p.repetitions, 10);
        assert_eq!(p.finetune.patience, 10);
    }
}
