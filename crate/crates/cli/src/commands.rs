use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use replast::analysis::{
    build_histogram_set, build_layer_histogram_sets, export_histograms, ExportFormat, HistogramSet, Panel,
};
use replast::stats::{compare_cases, group_runs, read_runs, write_runs, BASE_TAG};
use replast::surgery::{apply_surgery, SurgeryFile};
use replast::tensor_store::{classify_params, load_checkpoint, save_checkpoint, ClassificationRules};
use replast::tinytrain::{run_experiment, Protocol};
use replast::{Error, Result};

use crate::{ExperimentArgs, HistArgs, InspectArgs, MwuArgs, OnOff, SurgeryArgs};

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Inputs are never overwritten.
fn refuse_overwrite(input: &Path, outputs: &[&Path]) -> Result<()> {
    match outputs.iter().find(|o| same_file(input, o)) {
        Some(o) => Err(Error::Config(format!(
            "output {} would overwrite the input",
            o.display()
        ))),
        None => Ok(()),
    }
}

fn rules_or_default(path: Option<&Path>) -> Result<ClassificationRules> {
    path.map_or_else(|| Ok(ClassificationRules::default()), ClassificationRules::load)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn surgery(a: SurgeryArgs) -> Result<()> {
    let mut file = match (&a.tag, &a.config) {
        (Some(tag), None) => SurgeryFile {
            tag: Some(tag.clone()),
            ..SurgeryFile::default()
        },
        (None, Some(path)) => SurgeryFile::load(path)?,
        _ => unreachable!("clap enforces exactly one of --tag and --config"),
    };
    if a.seed.is_some() {
        file.seed = a.seed;
    }
    if a.scope.is_some() {
        file.scope = a.scope;
    }
    if let Some(b) = a.bias_reset {
        file.bias_reset = Some(b == OnOff::On);
    }
    if let Some(path) = &a.rules {
        file.rules = ClassificationRules::load(path)?;
    }
    let (config, _) = file.resolve()?;

    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| with_suffix(&a.output, ".report.json"));
    refuse_overwrite(&a.input, &[&a.output, &report_path])?;
    if let Some(g) = &a.grads {
        refuse_overwrite(g, &[&a.output, &report_path])?;
    }

    let cp = load_checkpoint(&a.input)?;
    let grads = a.grads.as_ref().map(load_checkpoint).transpose()?;
    let (out, report) = apply_surgery(&cp, grads.as_ref(), &config, &file.rules)?;
    create_parent(&a.output)?;
    save_checkpoint(&out, &a.output)?;
    create_parent(&report_path)?;
    write_file(&report_path, report.to_json() + "\n")?;
    println!(
        "reinitialized {} of {} weights ({:.2}%), reset {} bias entries",
        report.weights_reinitialized,
        report.weight_elements,
        100.0 * report.weight_fraction_changed(),
        report.biases_reset,
    );
    Ok(())
}

struct Moments {
    mean: f64,
    std: f64,
    abs_mean: f64,
}

/// Population moments, accumulated with running updates.
fn moments(values: &[f64]) -> Option<Moments> {
    if values.is_empty() {
        return None;
    }
    let (mut mean, mut m2, mut abs_mean) = (0.0, 0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let k = (i + 1) as f64;
        let delta = v - mean;
        mean += delta / k;
        m2 += delta * (v - mean);
        abs_mean += (v.abs() - abs_mean) / k;
    }
    Some(Moments {
        mean,
        std: (m2 / values.len() as f64).sqrt(),
        abs_mean,
    })
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let rules = rules_or_default(a.rules.as_deref())?;
    let cp = load_checkpoint(&a.checkpoint)?;
    let classes = classify_params(&cp, &rules)?;
    let mut rows = vec![["name", "shape", "dtype", "class", "numel", "mean", "std", "abs_mean"].map(String::from)];
    for t in cp.tensors() {
        let shape = format!("{:?}", t.shape());
        let m = moments(&t.values());
        let num = |f: fn(&Moments) -> f64| m.as_ref().map_or("-".to_string(), |m| format!("{:.6e}", f(m)));
        rows.push([
            t.name().to_string(),
            shape,
            t.dtype().tag().to_string(),
            classes[t.name()].to_string(),
            t.len().to_string(),
            num(|m| m.mean),
            num(|m| m.std),
            num(|m| m.abs_mean),
        ]);
    }
    let widths: Vec<usize> = (0..8)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    print!("{out}");
    Ok(())
}

fn write_set(set: &HistogramSet, prefix: &Path, panels: &[Panel]) -> Result<Vec<PathBuf>> {
    let mut files = export_histograms(set, &with_suffix(prefix, ".csv"), ExportFormat::Csv, panels)?;
    if !panels.is_empty() {
        files.extend(export_histograms(set, prefix, ExportFormat::Svg, panels)?);
    }
    Ok(files)
}

pub fn hist(a: HistArgs) -> Result<()> {
    let panels = Panel::parse_list(&a.panels)?;
    let rules = rules_or_default(a.rules.as_deref())?;
    let prefix = a.out_prefix.clone().unwrap_or_else(|| a.out_dir.join("hist"));
    let base = load_checkpoint(&a.base)?;
    let exp = load_checkpoint(&a.experimental)?;
    let set = build_histogram_set(&base, &exp, a.bins, &rules)?;
    let layers = if a.per_layer {
        build_layer_histogram_sets(&base, &exp, a.bins, &rules)?
    } else {
        Vec::new()
    };
    create_parent(&prefix)?;
    let mut files = write_set(&set, &prefix, &panels)?;
    for (name, set) in &layers {
        files.extend(write_set(set, &with_suffix(&prefix, &format!(".{name}")), &panels)?);
    }
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

pub fn mwu(a: MwuArgs) -> Result<()> {
    let mut groups = group_runs(&read_runs(&a.runs)?);
    let base = groups
        .remove(&a.base)
        .ok_or_else(|| Error::UnknownCase(a.base.clone()))?;
    let cases = match &a.case {
        Some(case) => {
            let runs = groups.remove(case).ok_or_else(|| Error::UnknownCase(case.clone()))?;
            BTreeMap::from([(case.clone(), runs)])
        }
        None => groups,
    };
    if cases.is_empty() {
        return Err(Error::Config(format!("no cases besides `{}` in the runs file", a.base)));
    }
    let report = compare_cases(&cases, &base)?;
    if a.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

pub fn experiment(a: ExperimentArgs) -> Result<()> {
    let protocol = match &a.protocol {
        Some(path) => Protocol::load(path)?,
        None => Protocol::demo(),
    };
    protocol.validate()?;
    create_dir(&a.out_dir)?;
    eprintln!(
        "running {} repetitions of {} cases",
        protocol.repetitions,
        protocol.cases.len()
    );
    let out = run_experiment(&protocol)?;

    let protocol_json = serde_json::to_string_pretty(&protocol).expect("protocol serializes");
    write_file(&a.out_dir.join("protocol.json"), protocol_json + "\n")?;
    write_runs(a.out_dir.join("runs.csv"), &out.records)?;
    let table = out.table();
    write_file(&a.out_dir.join("comparison.txt"), &table)?;
    if let Some(c) = &out.comparison {
        write_file(&a.out_dir.join("comparison.json"), c.to_json() + "\n")?;
    }
    let results_json = serde_json::to_string_pretty(&out.results).expect("results serialize");
    write_file(&a.out_dir.join("results.json"), results_json + "\n")?;

    let ckpt_dir = a.out_dir.join("checkpoints");
    create_dir(&ckpt_dir)?;
    for (tag, cp) in &out.first_repetition {
        save_checkpoint(cp, ckpt_dir.join(format!("rep0.{tag}.ckpt")))?;
    }

    // Base against the case with the highest mean accuracy.
    let best = out.results.iter().filter(|r| r.case_tag != BASE_TAG).fold(
        None,
        |best: Option<&replast::tinytrain::ExperimentResult>, r| match best {
            Some(b) if b.accuracy.mean >= r.accuracy.mean => Some(b),
            _ => Some(r),
        },
    );
    let base_cp = out.first_repetition.iter().find(|(t, _)| t == BASE_TAG);
    match (base_cp, best) {
        (Some((_, base_cp)), Some(best)) => {
            let (_, best_cp) = out
                .first_repetition
                .iter()
                .find(|(t, _)| *t == best.case_tag)
                .expect("every case has a repetition-0 checkpoint");
            let hist_dir = a.out_dir.join("hist");
            create_dir(&hist_dir)?;
            let set = build_histogram_set(base_cp, best_cp, replast::analysis::DEFAULT_BINS, &protocol.rules)?;
            let prefix = hist_dir.join(format!("Base_vs_{}", best.case_tag));
            write_set(
                &set,
                &prefix,
                &[Panel::Base, Panel::Experimental, Panel::Diff, Panel::Overlay],
            )?;
        }
        _ => eprintln!("no base and experimental case pair; skipping histograms"),
    }

    print!("{table}");
    eprintln!("outputs written to {}", a.out_dir.display());
    Ok(())
}
