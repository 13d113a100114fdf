mod common;

use proptest::prelude::*;
use replast::tensor_store::{classify_params, decode, encode, ClassificationRules, LoadOptions, ParamClass};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_is_lossless_and_canonical(seed in any::<u64>(), n_tensors in 0usize..12, max_len in 0usize..300) {
        let mut rng = common::rng(seed);
        let cp = common::random_checkpoint(&mut rng, n_tensors, max_len);
        let bytes = encode(&cp).unwrap();
        prop_assert_eq!(&bytes, &encode(&cp).unwrap());
        let back = decode(&bytes, LoadOptions::default()).unwrap();
        prop_assert_eq!(back.len(), cp.len());
        prop_assert_eq!(back.metadata(), cp.metadata());
        for t in cp.tensors() {
            let b = back.get(t.name()).unwrap();
            prop_assert_eq!(b.shape(), t.shape());
            prop_assert_eq!(b.dtype(), t.dtype());
            prop_assert!(common::changed_positions(t, b).iter().all(|c| !c));
        }
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn truncation_is_always_an_error(seed in any::<u64>(), cut in 1usize..64) {
        let mut rng = common::rng(seed);
        let cp = common::random_checkpoint(&mut rng, 3, 16);
        let bytes = encode(&cp).unwrap();
        let keep = bytes.len().saturating_sub(cut);
        if cp.total_elements() > 0 || keep < bytes.len() {
            prop_assert!(decode(&bytes[..keep], LoadOptions::default()).is_err());
        }
    }

    #[test]
    fn classification_partitions_every_tensor(
        names in proptest::collection::btree_set("[a-z]{1,3}(\\.[a-z0-9_]{1,6}){0,3}\\.(weight|bias|running_mean|scale)", 0..30),
        use_include in any::<bool>(),
    ) {
        let mut cp = replast::tensor_store::Checkpoint::new();
        for n in &names {
            cp.push(replast::tensor_store::Tensor::from_f32(n.as_str(), vec![1], vec![0.0]).unwrap()).unwrap();
        }
        let rules = ClassificationRules {
            include_patterns: use_include.then(|| vec!["^a".to_string()]),
            ..ClassificationRules::default()
        };
        let classes = classify_params(&cp, &rules).unwrap();
        prop_assert_eq!(classes.len(), names.len());
        for (name, class) in &classes {
            // Exactly one class per tensor, consistent with the precedence order.
            let excluded_by_rule = name.ends_with(".running_mean")
                || regex::Regex::new(&rules.exclude_patterns[0]).unwrap().is_match(name)
                || (use_include && !name.starts_with('a'));
            let expected = if excluded_by_rule {
                ParamClass::Excluded
            } else if name.ends_with(".bias") {
                ParamClass::Bias
            } else {
                ParamClass::Weight
            };
            prop_assert_eq!(*class, expected, "{}", name);
        }
    }
}

#[test]
fn file_round_trip_preserves_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(11);
    let cp = common::random_checkpoint(&mut rng, 6, 500);
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    replast::save_checkpoint(&cp, &a).unwrap();
    let back = replast::load_checkpoint(&a).unwrap();
    replast::save_checkpoint(&back, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = replast::load_checkpoint("/nonexistent/x.ckpt").unwrap_err();
    assert!(matches!(err, replast::Error::Io { .. }));
    assert!(!err.is_usage());
}
