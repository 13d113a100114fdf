use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

use super::histogram::{Histogram, HistogramSet};

pub const PANEL_WIDTH: f64 = 800.0;
pub const PANEL_HEIGHT: f64 = 600.0;

const BASE_COLOR: &str = "#1f77b4";
const EXP_COLOR: &str = "#2ca02c";
const DIFF_COLOR: &str = "#d62728";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Panel {
    Base,
    Experimental,
    Diff,
    Overlay,
}

impl Panel {
    pub const ALL: [Panel; 4] = [Panel::Base, Panel::Experimental, Panel::Diff, Panel::Overlay];

    pub fn as_str(self) -> &'static str {
        match self {
            Panel::Base => "base",
            Panel::Experimental => "experimental",
            Panel::Diff => "diff",
            Panel::Overlay => "overlay",
        }
    }

    /// Parses a comma-separated list such as `base,overlay`.
    pub fn parse_list(s: &str) -> Result<Vec<Panel>> {
        let mut out: Vec<Panel> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let p: Panel = part.parse()?;
            if !out.contains(&p) {
                out.push(p);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no panels selected".into()));
        }
        Ok(out)
    }
}

impl FromStr for Panel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Panel::Base),
            "experimental" | "exp" => Ok(Panel::Experimental),
            "diff" => Ok(Panel::Diff),
            "overlay" => Ok(Panel::Overlay),
            other => Err(Error::Config(format!("unknown panel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

/// `bin_lo,bin_hi,base,experimental,diff`, one row per bin.
pub fn write_csv(set: &HistogramSet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["bin_lo", "bin_hi", "base", "experimental", "diff"])
        .map_err(err)?;
    let edges = &set.base.bin_edges;
    for i in 0..set.base.bins() {
        w.write_record([
            format!("{:e}", edges[i]),
            format!("{:e}", edges[i + 1]),
            set.base.counts[i].to_string(),
            set.experimental.counts[i].to_string(),
            set.diff.counts[i].to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn bars(out: &mut String, h: &Histogram, max: u64, color: &str, opacity: f64, plot: (f64, f64, f64, f64)) {
    let (x0, y0, w, ht) = plot;
    let bw = w / h.bins() as f64;
    for (i, &c) in h.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let bh = ht * c as f64 / max as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="{opacity}"/>"#,
            x0 + bw * i as f64,
            y0 + ht - bh,
            bw,
            bh,
        );
    }
}

/// One 800x600 SVG document for `panel`. Output depends only on `set`.
pub fn render_svg(set: &HistogramSet, panel: Panel) -> String {
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 60.0);
    let plot = (ml, mt, PANEL_WIDTH - ml - mr, PANEL_HEIGHT - mt - mb);
    let (x0, y0, w, ht) = plot;
    let hists: Vec<(&Histogram, &str, f64)> = match panel {
        Panel::Base => vec![(&set.base, BASE_COLOR, 1.0)],
        Panel::Experimental => vec![(&set.experimental, EXP_COLOR, 1.0)],
        Panel::Diff => vec![(&set.diff, DIFF_COLOR, 1.0)],
        Panel::Overlay => vec![(&set.base, BASE_COLOR, 0.5), (&set.experimental, EXP_COLOR, 0.5)],
    };
    let max = hists
        .iter()
        .flat_map(|(h, _, _)| h.counts.iter().copied())
        .max()
        .unwrap_or(0)
        .max(1);
    let edges = &set.base.bin_edges;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_WIDTH}" height="{PANEL_HEIGHT}" viewBox="0 0 {PANEL_WIDTH} {PANEL_HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        PANEL_WIDTH / 2.0,
        panel.as_str()
    );
    for (h, color, opacity) in &hists {
        bars(&mut out, h, max, color, *opacity, plot);
    }
    if panel == Panel::Diff && set.diff.counts.iter().all(|&c| c == 0) {
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{DIFF_COLOR}" stroke-width="2"/>"#,
            y0 + ht,
            x0 + w,
            y0 + ht
        );
    }
    // Axes and extreme tick labels.
    let _ = writeln!(
        out,
        r#"<polyline points="{x0:.2},{y0:.2} {x0:.2},{:.2} {:.2},{:.2}" fill="none" stroke="black"/>"#,
        y0 + ht,
        x0 + w,
        y0 + ht
    );
    let label = |out: &mut String, x: f64, y: f64, anchor: &str, text: String| {
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{text}</text>"#
        );
    };
    label(&mut out, x0, y0 + ht + 20.0, "start", format!("{:.4}", edges[0]));
    label(
        &mut out,
        x0 + w,
        y0 + ht + 20.0,
        "end",
        format!("{:.4}", edges[edges.len() - 1]),
    );
    label(&mut out, x0 + w / 2.0, y0 + ht + 45.0, "middle", "weight value".into());
    label(&mut out, x0 - 8.0, y0 + 4.0, "end", max.to_string());
    label(&mut out, x0 - 8.0, y0 + ht, "end", "0".into());
    out.push_str("</svg>\n");
    out
}

/// Writes the set to disk.
///
/// CSV goes to `path` itself. SVG treats `path` as a prefix (a trailing
/// `.svg` is dropped) and writes one `<prefix>.<panel>.svg` per panel.
/// Returns the files written.
pub fn export_histograms(
    set: &HistogramSet,
    path: &Path,
    format: ExportFormat,
    panels: &[Panel],
) -> Result<Vec<PathBuf>> {
    match format {
        ExportFormat::Csv => {
            write_csv(set, path)?;
            Ok(vec![path.to_path_buf()])
        }
        ExportFormat::Svg => {
            let prefix = path.to_string_lossy();
            let prefix = prefix.strip_suffix(".svg").unwrap_or(&prefix);
            panels
                .iter()
                .map(|&p| {
                    let file = PathBuf::from(format!("{prefix}.{}.svg", p.as_str()));
                    std::fs::write(&file, render_svg(set, p)).map_err(|e| Error::io(&file, e))?;
                    Ok(file)
                })
                .collect()
        }
    }
}
