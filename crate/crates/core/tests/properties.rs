//! Property tests for label conversion, filtering, scoring and the response format.

use itemseg_core::eval::{cohen_kappa, line_prf};
use itemseg_core::labels::order_filter;
use itemseg_core::line::{filter_lines, number_lines};
use itemseg_core::llm::{parse_response, render_response, LibResponse, DEFAULT_ITEMS};
use itemseg_core::{
    labels_to_spans, repair_labels, spans_to_labels, validate_label_sequence, ItemId, ItemSpan, LineLabel,
};
use proptest::prelude::*;

/// Valid label sequences: distinct items in arbitrary order, separated by O gaps.
fn valid_labels() -> impl Strategy<Value = Vec<LineLabel>> {
    (
        Just(ItemId::ALL.to_vec()).prop_shuffle(),
        prop::collection::vec((0usize..4, 1usize..6), 0..22),
        0usize..4,
    )
        .prop_map(|(items, runs, tail)| {
            let mut out = Vec::new();
            for (item, (gap, len)) in items.into_iter().zip(runs) {
                out.extend(std::iter::repeat_n(LineLabel::O, gap));
                out.push(LineLabel::B(item));
                out.extend(std::iter::repeat_n(LineLabel::I(item), len - 1));
            }
            out.extend(std::iter::repeat_n(LineLabel::O, tail));
            out
        })
}

fn any_label() -> impl Strategy<Value = LineLabel> {
    (0usize..45).prop_map(|i| LineLabel::alphabet().nth(i).unwrap())
}

fn line_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof!["[A-Za-z]{1,8}", "[0-9$%.,()-]{1,6}", "[A-Za-z]{1,4}[0-9]{1,3}"],
        0..8,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn labels_spans_roundtrip(labels in valid_labels()) {
        prop_assert!(validate_label_sequence(&labels).is_ok());
        let spans = labels_to_spans(&labels).unwrap();
        prop_assert_eq!(spans_to_labels(&spans, labels.len()).unwrap(), labels);
    }

    #[test]
    fn filter_is_idempotent(texts in prop::collection::vec(line_text(), 0..20)) {
        let once = filter_lines(number_lines(texts));
        let twice = filter_lines(once.clone());
        prop_assert_eq!(&twice, &once);
        for (i, l) in once.iter().enumerate() {
            prop_assert_eq!(l.line_id, i);
        }
    }
}

proptest! {
    #[test]
    fn repair_always_valid_and_fixes_nothing_valid(labels in prop::collection::vec(any_label(), 0..40)) {
        let repaired = repair_labels(&labels);
        prop_assert_eq!(repaired.len(), labels.len());
        prop_assert!(validate_label_sequence(&repaired).is_ok());
        if validate_label_sequence(&labels).is_ok() {
            prop_assert_eq!(repaired, labels);
        }
    }

    #[test]
    fn spans_are_disjoint_and_ordered(labels in valid_labels()) {
        let spans: Vec<ItemSpan> = labels_to_spans(&labels).unwrap();
        for w in spans.windows(2) {
            prop_assert!(w[0].end_line < w[1].start_line);
        }
    }

    #[test]
    fn order_filter_output_strictly_increases(mut starts in prop::collection::vec((0usize..100, 0usize..22), 0..15)) {
        starts.sort();
        starts.dedup_by_key(|s| s.0);
        let starts: Vec<(usize, ItemId)> = starts.into_iter().map(|(l, k)| (l, ItemId::from_ordinal(k).unwrap())).collect();
        let kept = order_filter(&starts);
        for w in kept.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        prop_assert!(kept.iter().all(|s| starts.contains(s)));
    }

    #[test]
    fn merge_invariance(gold in valid_labels(), flips in prop::collection::vec(any::<bool>(), 0..200)) {
        let swapped: Vec<LineLabel> = gold
            .iter()
            .zip(flips.iter().chain(std::iter::repeat(&false)))
            .map(|(l, &f)| match (*l, f) {
                (LineLabel::B(i), true) => LineLabel::I(i),
                (LineLabel::I(i), true) => LineLabel::B(i),
                (l, _) => l,
            })
            .collect();
        for item in ItemId::ALL {
            prop_assert_eq!(line_prf(&gold, &swapped, item).unwrap(), line_prf(&gold, &gold, item).unwrap());
        }
    }

    #[test]
    fn scores_bounded(gold in valid_labels(), pred_seed in prop::collection::vec(any_label(), 0..60)) {
        let pred: Vec<LineLabel> = (0..gold.len()).map(|i| pred_seed.get(i).copied().unwrap_or(LineLabel::O)).collect();
        for item in ItemId::ALL {
            let s = line_prf(&gold, &pred, item).unwrap();
            for v in [s.precision, s.recall, s.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if s.precision > 0.0 && s.recall > 0.0 {
                prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-12);
                prop_assert!(s.f1 >= s.precision.min(s.recall) - 1e-12);
            }
        }
    }

    #[test]
    fn kappa_symmetric_and_self_one(a in prop::collection::vec(any_label(), 1..40), b_seed in prop::collection::vec(any_label(), 1..40)) {
        let b: Vec<LineLabel> = (0..a.len()).map(|i| b_seed[i % b_seed.len()]).collect();
        let ab = cohen_kappa(&a, &b).unwrap();
        let ba = cohen_kappa(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        if a.iter().any(|l| *l != a[0]) {
            prop_assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        }
    }

    #[test]
    fn response_roundtrip(ids in prop::collection::vec(prop::option::of(0usize..5000), 18)) {
        let response = LibResponse { assignments: DEFAULT_ITEMS.iter().copied().zip(ids).collect() };
        let text = render_response(&response, &DEFAULT_ITEMS);
        prop_assert_eq!(parse_response(&text, 0..5000, &DEFAULT_ITEMS).unwrap(), response);
    }
}
