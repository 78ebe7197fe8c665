//! CRF training behaviour on small synthetic corpora.

use itemseg_core::crf::{train_crf, CrfConfig};
use itemseg_core::labels_to_spans;
use itemseg_core::synth::{generate, GeneratorSpec};

fn corpus(seed: u64, n: usize) -> Vec<itemseg_core::AnnotatedDocument> {
    generate(&GeneratorSpec::reference(seed, n)).unwrap()
}

#[test]
fn loss_decreases_and_training_is_deterministic() {
    let docs = corpus(5, 12);
    let config = CrfConfig {
        max_iter: 40,
        ..CrfConfig::default()
    };
    let (model, report) = train_crf(&docs, &config).unwrap();
    assert!(report.losses.windows(2).all(|w| w[1] < w[0]), "{:?}", report.losses);
    let (again, report2) = train_crf(&docs, &config).unwrap();
    assert_eq!(model, again);
    assert_eq!(report.losses, report2.losses);
}

#[test]
fn fits_training_documents() {
    let docs = corpus(9, 20);
    let (model, _) = train_crf(
        &docs,
        &CrfConfig {
            max_iter: 150,
            ..CrfConfig::default()
        },
    )
    .unwrap();
    let test = corpus(10, 5);
    let mut correct = 0;
    let mut total = 0;
    for doc in &test {
        let pred = model
            .viterbi_decode(&itemseg_core::crf::extract_all(&doc.lines))
            .unwrap();
        correct += pred.iter().zip(&doc.labels).filter(|(a, b)| a == b).count();
        total += pred.len();
        assert_eq!(
            model.segment(&doc.lines).len(),
            labels_to_spans(&itemseg_core::repair_labels(&pred)).unwrap().len()
        );
    }
    let acc = correct as f64 / total as f64;
    assert!(acc > 0.9, "line accuracy {acc}");
}

#[test]
fn strong_regularization_shrinks_weights() {
    let docs = corpus(3, 6);
    let norm = |lambda: f64| {
        let (m, _) = train_crf(
            &docs,
            &CrfConfig {
                l2_lambda: lambda,
                max_iter: 60,
                ..CrfConfig::default()
            },
        )
        .unwrap();
        m.state_weights()
            .iter()
            .chain(m.transition_weights())
            .map(|w| w * w)
            .sum::<f64>()
    };
    let weak = norm(0.1);
    let strong = norm(1e4);
    assert!(strong < weak * 1e-3, "{strong} vs {weak}");
}

#[test]
fn rejects_empty_corpus() {
    assert!(train_crf(&[], &CrfConfig::default()).is_err());
}
