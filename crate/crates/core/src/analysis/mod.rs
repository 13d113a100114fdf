//! Weight-distribution comparison between a base and an experimental
//! checkpoint: shared-edge histograms, their absolute difference, and
//! CSV/SVG export.

mod export;
mod histogram;

pub use export::{export_histograms, render_svg, write_csv, ExportFormat, Panel};
pub use histogram::{
    build_histogram_set, build_layer_histogram_sets, histogram, Histogram, HistogramSet, DEFAULT_BINS,
};
