//! Columnar run files: one CSV row per run, `case_tag,seed,accuracy,epochs`
//! with an optional trailing `stop_epoch` column.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of one fine-tuning run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    /// Test accuracy in percent.
    pub accuracy: f64,
    /// Epochs to convergence.
    pub epochs: u32,
}

impl RunSample {
    pub fn new(accuracy: f64, epochs: u32) -> Result<Self> {
        let s = RunSample { accuracy, epochs };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.accuracy) {
            return Err(Error::Invalid(format!("accuracy {} outside [0, 100]", self.accuracy)));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub case_tag: String,
    pub seed: u64,
    pub accuracy: f64,
    pub epochs: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_epoch: Option<u32>,
}

impl RunRecord {
    pub fn sample(&self) -> RunSample {
        RunSample {
            accuracy: self.accuracy,
            epochs: self.epochs,
        }
    }
}

pub fn read_runs(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_runs_from(file)
}

pub fn read_runs_from(reader: impl Read) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<RunRecord>().enumerate() {
        let rec = row.map_err(|e| Error::Format(format!("runs file row {}: {e}", line + 1)))?;
        rec.sample()
            .validate()
            .map_err(|e| Error::Format(format!("runs file row {}: {e}", line + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_runs(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_runs_to(file, records).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes a header row plus one row per record. `stop_epoch` is written for
/// every row when any record carries it, so the column count is uniform.
pub fn write_runs_to(writer: impl Write, records: &[RunRecord]) -> Result<()> {
    let with_stop = records.iter().any(|r| r.stop_epoch.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Format(e.to_string());
    if with_stop {
        w.write_record(["case_tag", "seed", "accuracy", "epochs", "stop_epoch"])
            .map_err(err)?;
    } else {
        w.write_record(["case_tag", "seed", "accuracy", "epochs"])
            .map_err(err)?;
    }
    for r in records {
        let mut row = vec![
            r.case_tag.clone(),
            r.seed.to_string(),
            format!("{}", r.accuracy),
            r.epochs.to_string(),
        ];
        if with_stop {
            row.push(r.stop_epoch.map(|s| s.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Groups records by case tag, keeping file order within each group.
pub fn group_runs(records: &[RunRecord]) -> BTreeMap<String, Vec<RunSample>> {
    let mut groups: BTreeMap<String, Vec<RunSample>> = BTreeMap::new();
    for r in records {
        groups.entry(r.case_tag.clone()).or_default().push(r.sample());
    }
    groups
}
