//! Bi-LSTM forward pass and gradients checked against independent oracles.

use itemseg_core::lstm::{softmax_rows, spans_from_scores, BiLstmModel, EmbeddingMatrix};
use itemseg_core::{ItemId, ItemSpan, LineLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labels() -> Vec<LineLabel> {
    vec![
        LineLabel::O,
        LineLabel::B(ItemId::I1),
        LineLabel::I(ItemId::I1),
        LineLabel::B(ItemId::I7),
    ]
}

fn random_model(rng: &mut ChaCha8Rng, d: usize, h: usize) -> BiLstmModel {
    let mut m = BiLstmModel::zeros(d, h, labels());
    for p in m.params_mut() {
        *p = rng.random_range(-0.8..0.8);
    }
    m
}

fn random_emb(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingMatrix {
    EmbeddingMatrix::new("doc", d, (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

#[test]
fn gradient_matches_central_differences_for_every_tensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let step = 1e-4;
    for _ in 0..5 {
        let model = random_model(&mut rng, 4, 3);
        let emb = random_emb(&mut rng, 3, 4);
        let gold: Vec<LineLabel> = (0..3).map(|_| labels()[rng.random_range(0..4)]).collect();
        let (_, grad) = model.loss_and_gradients(&[(&emb, &gold)]).unwrap();

        let mut offset = 0;
        for (name, tensor) in model.tensors() {
            let mut worst: f64 = 0.0;
            for i in 0..tensor.len() {
                let mut plus = model.clone();
                plus.params_mut()[offset + i] += step;
                let mut minus = model.clone();
                minus.params_mut()[offset + i] -= step;
                let numeric = (plus.loss(&emb, &gold).unwrap() - minus.loss(&emb, &gold).unwrap()) / (2.0 * step);
                worst = worst.max(relative_error(grad[offset + i], numeric));
            }
            assert!(worst < 1e-3, "{name}: relative error {worst}");
            offset += tensor.len();
        }
        assert_eq!(offset, grad.len());
    }
}

#[test]
fn reversed_input_with_swapped_directions_reverses_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let (d, h, n) = (rng.random_range(1..6), rng.random_range(1..5), rng.random_range(1..8));
        let model = random_model(&mut rng, d, h);
        let emb = random_emb(&mut rng, n, d);
        let scores = model.forward(&emb).unwrap();

        let mut swapped = model.clone();
        for (a, b) in [("fwd.w_ih", "bwd.w_ih"), ("fwd.w_hh", "bwd.w_hh"), ("fwd.b", "bwd.b")] {
            let ta = model.tensor(a).to_vec();
            let tb = model.tensor(b).to_vec();
            swapped.tensor_mut(a).copy_from_slice(&tb);
            swapped.tensor_mut(b).copy_from_slice(&ta);
        }
        let w = model.tensor("out.w").to_vec();
        for (row_new, row) in swapped.tensor_mut("out.w").chunks_mut(2 * h).zip(w.chunks(2 * h)) {
            row_new[..h].copy_from_slice(&row[h..]);
            row_new[h..].copy_from_slice(&row[..h]);
        }
        let rev_rows: Vec<f32> = (0..n).rev().flat_map(|t| emb.row(t).to_vec()).collect();
        let rev = EmbeddingMatrix::new("rev", d, rev_rows).unwrap();
        let rev_scores = swapped.forward(&rev).unwrap();
        let l = labels().len();
        for t in 0..n {
            for k in 0..l {
                let a = rev_scores[t * l + k];
                let b = scores[(n - 1 - t) * l + k];
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn zero_model_bias_gradient_is_mean_residual() {
    let model = BiLstmModel::<f64>::zeros(4, 3, labels());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let emb = random_emb(&mut rng, 4, 4);
    let gold = [
        LineLabel::O,
        LineLabel::B(ItemId::I1),
        LineLabel::I(ItemId::I1),
        LineLabel::O,
    ];
    let (loss, grad) = model.loss_and_gradients(&[(&emb, &gold)]).unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-12);
    let b = &grad[grad.len() - 4..];
    // softmax is uniform: mean(1/4 - onehot)
    let expected = [0.25 - 0.5, 0.25 - 0.25, 0.25 - 0.25, 0.25];
    for (g, e) in b.iter().zip(expected) {
        assert!((g - e).abs() < 1e-15, "{g} vs {e}");
    }
    // hidden states and output weights are zero, so nothing else moves
    assert!(grad[..grad.len() - 4].iter().all(|&g| g == 0.0));
}

#[test]
fn duplicated_document_doubles_its_contribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let model = random_model(&mut rng, 3, 2);
    let a = random_emb(&mut rng, 4, 3);
    let b = random_emb(&mut rng, 2, 3);
    let ga = [
        LineLabel::B(ItemId::I1),
        LineLabel::I(ItemId::I1),
        LineLabel::O,
        LineLabel::B(ItemId::I7),
    ];
    let gb = [LineLabel::O, LineLabel::O];
    let (_, g_a) = model.loss_and_gradients(&[(&a, &ga)]).unwrap();
    let (_, g_b) = model.loss_and_gradients(&[(&b, &gb)]).unwrap();
    let (_, g_aab) = model.loss_and_gradients(&[(&a, &ga), (&a, &ga), (&b, &gb)]).unwrap();
    for i in 0..g_a.len() {
        let expected = (2.0 * g_a[i] + g_b[i]) / 3.0;
        assert!((g_aab[i] - expected).abs() < 1e-12);
    }
}

#[test]
fn softmax_rows_sum_to_one_and_long_inputs_work() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = random_model(&mut rng, 6, 4);
    let emb = random_emb(&mut rng, 5000, 6);
    let scores = model.forward(&emb).unwrap();
    assert_eq!(scores.len(), 5000 * labels().len());
    for row in softmax_rows(&scores, labels().len()).chunks(labels().len()) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert_eq!(model.predict(&emb).unwrap().len(), 5000);
}

#[test]
fn forced_scores_segment_to_expected_spans() {
    let l = labels();
    // rows favour B1, I1, O
    let scores = [0.0, 3.0, 1.0, 0.0, 0.0, 1.0, 4.0, 0.0, 2.0, 0.0, 1.0, 0.5];
    assert_eq!(spans_from_scores(&scores, &l), vec![ItemSpan::new(ItemId::I1, 0, 1)]);
    let all_o = [1.0, 0.0, 0.0, 0.0, 2.0, 1.0, 1.0, 1.0];
    assert!(spans_from_scores(&all_o, &l).is_empty());

    let mut model = BiLstmModel::<f64>::zeros(2, 1, l);
    model.tensor_mut("out.b").copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
    let emb = EmbeddingMatrix::new("d", 2, vec![0.0; 6]).unwrap();
    assert!(model.segment(&emb, 3).unwrap().is_empty());
    assert!(model.segment(&emb, 4).is_err());
}
