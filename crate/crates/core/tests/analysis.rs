mod common;

use proptest::prelude::*;
use replast::analysis::{export_histograms, histogram, ExportFormat, HistogramSet, Panel};

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![-1e3f64..1e3, (-3i32..3).prop_map(f64::from)], 0..400)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn counts_are_conserved_and_match_a_scan(v in values(), bins in 1usize..64, lo in -10.0f64..0.0, width in 0.1f64..20.0) {
        let h = histogram(&v, bins, Some((lo, lo + width))).unwrap();
        prop_assert_eq!(h.total(), v.len() as u64);
        prop_assert_eq!(h.counts.clone(), common::counts_by_scan(&v, &h.bin_edges));
        prop_assert_eq!(h.underflow, v.iter().filter(|&&x| x < lo).count() as u64);
    }

    #[test]
    fn joint_range_set_is_symmetric(a in values(), b in values(), bins in 1usize..100) {
        prop_assume!(!a.is_empty() && !b.is_empty());
        let ab = HistogramSet::from_values(&a, &b, bins).unwrap();
        let ba = HistogramSet::from_values(&b, &a, bins).unwrap();
        prop_assert_eq!(&ab.diff.counts, &ba.diff.counts);
        prop_assert_eq!(&ab.base.bin_edges, &ab.experimental.bin_edges);
        prop_assert_eq!(&ab.base.bin_edges, &ab.diff.bin_edges);
        prop_assert_eq!(ab.base.total(), a.len() as u64);
        prop_assert_eq!(ab.base.underflow + ab.base.overflow, 0);
        for i in 0..bins {
            prop_assert_eq!(ab.diff.counts[i], ab.base.counts[i].abs_diff(ab.experimental.counts[i]));
        }
    }
}

#[test]
fn mismatched_edges_are_a_construction_error() {
    let a = histogram(&[0.0, 1.0], 4, Some((0.0, 1.0))).unwrap();
    let b = histogram(&[0.0, 1.0], 4, Some((0.0, 2.0))).unwrap();
    assert!(HistogramSet::new(a, b).is_err());
}

#[test]
fn svg_files_per_panel_and_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let set = HistogramSet::from_values(&[0.0, 0.2, 0.4, 1.0], &[0.1, 0.1, 0.9, 1.0], 50).unwrap();
    let csv = export_histograms(&set, &dir.path().join("h.csv"), ExportFormat::Csv, &[]).unwrap();
    assert_eq!(std::fs::read_to_string(&csv[0]).unwrap().lines().count(), 51);
    let panels = Panel::parse_list("base,experimental,diff,overlay").unwrap();
    let svgs = export_histograms(&set, &dir.path().join("h"), ExportFormat::Svg, &panels).unwrap();
    let names: Vec<String> = svgs
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        ["h.base.svg", "h.experimental.svg", "h.diff.svg", "h.overlay.svg"]
    );
    for p in &svgs {
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    }
}
