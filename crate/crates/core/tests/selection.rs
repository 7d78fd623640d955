use proptest::prelude::*;
use styleprobe::stats::{select_features, ApccTable, DEFAULT_APCC_THRESHOLD};

fn table(rows: &[(&str, &[f64])]) -> ApccTable {
    let tasks = (0..rows[0].1.len()).map(|t| format!("task{t}")).collect();
    ApccTable::from_values(
        rows.iter().map(|r| r.0.to_string()).collect(),
        tasks,
        rows.iter().map(|r| r.1.to_vec()).collect(),
    )
}

#[test]
fn one_weak_space_excludes_the_feature() {
    let t = table(&[
        ("weak_in_one", &[0.6, 0.7, 0.4]),
        ("strong_everywhere", &[0.6, 0.7, 0.55]),
        ("weak_everywhere", &[0.1, 0.2, 0.3]),
    ]);
    assert_eq!(
        select_features(&t, DEFAULT_APCC_THRESHOLD),
        vec!["strong_everywhere"]
    );
}

#[test]
fn threshold_is_strict() {
    let t = table(&[("edge", &[0.5, 0.9, 0.9]), ("above", &[0.500001, 0.9, 0.9])]);
    assert_eq!(select_features(&t, 0.5), vec!["above"]);
}

#[test]
fn table_order_is_kept() {
    let t = table(&[("b", &[0.9, 0.9]), ("a", &[0.8, 0.8]), ("c", &[0.7, 0.7])]);
    assert_eq!(select_features(&t, 0.5), vec!["b", "a", "c"]);
}

#[test]
fn nothing_selected_is_an_empty_list() {
    let t = table(&[("x", &[0.2, 0.9, 0.9])]);
    assert!(select_features(&t, 0.5).is_empty());
}

proptest! {
    #[test]
    fn selected_iff_every_space_exceeds(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..12),
        threshold in 0.0f64..0.99,
    ) {
        let named: Vec<(String, Vec<f64>)> = rows.iter().enumerate().map(|(i, r)| (format!("f{i}"), r.clone())).collect();
        let t = ApccTable::from_values(
            named.iter().map(|r| r.0.clone()).collect(),
            vec!["a".into(), "b".into(), "c".into()],
            named.iter().map(|r| r.1.clone()).collect(),
        );
        let got = select_features(&t, threshold);
        let want: Vec<String> = named
            .iter()
            .filter(|(_, r)| r.iter().all(|&v| v > threshold))
            .map(|(n, _)| n.clone())
            .collect();
        prop_assert_eq!(&got, &want);
        // raising the bar never adds a feature
        let stricter = select_features(&t, (threshold + 0.1).min(0.999));
        prop_assert!(stricter.iter().all(|f| got.contains(f)));
    }
}
