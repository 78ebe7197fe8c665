//! Bidirectional LSTM line tagger over precomputed per-line embeddings.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::crf::label_set;
use crate::item::LineLabel;
use crate::labels::{labels_to_spans, repair_labels, validate_label_sequence, AnnotatedDocument, ItemSpan};
use crate::optim::Adam;
use crate::synth::fnv1a;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LstmError {
    #[error("embedding width {found} does not match the model input width {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("{lines} lines but {rows} embedding rows")]
    LengthMismatch { lines: usize, rows: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty batch")]
    EmptyBatch,
    #[error("no embeddings for document {0}")]
    MissingEmbedding(String),
    #[error("label {0} is not in the model's label set")]
    UnknownLabel(LineLabel),
    #[error("parameter vector does not match the model dimensions")]
    Shape,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("gold labels of {0} are invalid")]
    InvalidGold(String),
}

/// Per-line embedding vectors of one document, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub doc_id: String,
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(doc_id: impl Into<String>, dim: usize, values: Vec<f32>) -> Result<Self, LstmError> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(LstmError::Shape);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LstmError::NonFinite("embedding"));
        }
        Ok(EmbeddingMatrix {
            doc_id: doc_id.into(),
            dim,
            values,
        })
    }

    pub fn from_rows(doc_id: impl Into<String>, dim: usize, rows: &[Vec<f32>]) -> Result<Self, LstmError> {
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LstmError::Shape);
        }
        Self::new(doc_id, dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_lines(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Names of the parameter tensors in storage (and file) order.
pub const TENSOR_NAMES: [&str; 8] = [
    "fwd.w_ih", "fwd.w_hh", "fwd.b", "bwd.w_ih", "bwd.w_hh", "bwd.b", "out.w", "out.b",
];

/// Sizes of the tensors in [`TENSOR_NAMES`] order. Gate blocks are stacked
/// input, forget, cell, output; matrices are row-major with one row per unit.
pub fn tensor_sizes(input_dim: usize, hidden_dim: usize, n_labels: usize) -> [usize; 8] {
    let (d, h, l) = (input_dim, hidden_dim, n_labels);
    [4 * h * d, 4 * h * h, 4 * h, 4 * h * d, 4 * h * h, 4 * h, l * 2 * h, l]
}

fn c<F: Float>(x: f64) -> F {
    F::from(x).expect("representable constant")
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Bidirectional LSTM with a linear output layer; all parameters in one flat
/// vector laid out per [`TENSOR_NAMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel<F = f64> {
    input_dim: usize,
    hidden_dim: usize,
    labels: Vec<LineLabel>,
    seed: u64,
    params: Vec<F>,
}

impl<F: Float> BiLstmModel<F> {
    pub fn zeros(input_dim: usize, hidden_dim: usize, labels: Vec<LineLabel>) -> Self {
        let n = tensor_sizes(input_dim, hidden_dim, labels.len()).iter().sum();
        BiLstmModel {
            input_dim,
            hidden_dim,
            labels,
            seed: 0,
            params: vec![F::zero(); n],
        }
    }

    /// Uniform(±1/√hidden_dim) weights with forget-gate biases set to 1.
    pub fn init(input_dim: usize, hidden_dim: usize, labels: Vec<LineLabel>, seed: u64) -> Self {
        let mut model = Self::zeros(input_dim, hidden_dim, labels);
        model.seed = seed;
        let k = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in model.params.iter_mut() {
            *p = c(rng.random_range(-k..=k));
        }
        let h = hidden_dim;
        for name in ["fwd.b", "bwd.b"] {
            model.tensor_mut(name)[h..2 * h].fill(F::one());
        }
        model
    }

    pub fn from_parts(
        input_dim: usize,
        hidden_dim: usize,
        labels: Vec<LineLabel>,
        seed: u64,
        params: Vec<F>,
    ) -> Result<Self, LstmError> {
        let expected: usize = tensor_sizes(input_dim, hidden_dim, labels.len()).iter().sum();
        if labels.is_empty() || input_dim == 0 || hidden_dim == 0 || params.len() != expected {
            return Err(LstmError::Shape);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(LstmError::NonFinite("parameters"));
        }
        Ok(BiLstmModel {
            input_dim,
            hidden_dim,
            labels,
            seed,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn labels(&self) -> &[LineLabel] {
        &self.labels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    fn offsets(&self) -> [(usize, usize); 8] {
        let sizes = tensor_sizes(self.input_dim, self.hidden_dim, self.labels.len());
        let mut out = [(0, 0); 8];
        let mut at = 0;
        for (o, s) in out.iter_mut().zip(sizes) {
            *o = (at, at + s);
            at += s;
        }
        out
    }

    fn range(&self, name: &str) -> (usize, usize) {
        let i = TENSOR_NAMES.iter().position(|n| *n == name).expect("known tensor name");
        self.offsets()[i]
    }

    pub fn tensor(&self, name: &str) -> &[F] {
        let (a, b) = self.range(name);
        &self.params[a..b]
    }

    pub fn tensor_mut(&mut self, name: &str) -> &mut [F] {
        let (a, b) = self.range(name);
        &mut self.params[a..b]
    }

    /// `(name, values)` for every tensor in storage order.
    pub fn tensors(&self) -> Vec<(&'static str, &[F])> {
        TENSOR_NAMES
            .iter()
            .zip(self.offsets())
            .map(|(n, (a, b))| (*n, &self.params[a..b]))
            .collect()
    }

    pub fn label_index(&self, label: LineLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    fn check_input(&self, emb: &EmbeddingMatrix) -> Result<(), LstmError> {
        if emb.dim() != self.input_dim {
            return Err(LstmError::DimMismatch {
                expected: self.input_dim,
                found: emb.dim(),
            });
        }
        if emb.n_lines() == 0 {
            return Err(LstmError::EmptySequence);
        }
        Ok(())
    }

    fn run(&self, emb: &EmbeddingMatrix) -> Pass<F> {
        let x: Vec<F> = emb.values().iter().map(|&v| F::from(v).expect("finite f32")).collect();
        let n = emb.n_lines();
        let (d, h, l) = (self.input_dim, self.hidden_dim, self.labels.len());
        let fwd = run_direction(
            self.tensor("fwd.w_ih"),
            self.tensor("fwd.w_hh"),
            self.tensor("fwd.b"),
            &x,
            n,
            d,
            h,
            false,
        );
        let bwd = run_direction(
            self.tensor("bwd.w_ih"),
            self.tensor("bwd.w_hh"),
            self.tensor("bwd.b"),
            &x,
            n,
            d,
            h,
            true,
        );
        let (w, b) = (self.tensor("out.w"), self.tensor("out.b"));
        let mut scores = vec![F::zero(); n * l];
        for t in 0..n {
            let hf = &fwd.h[t * h..(t + 1) * h];
            let hb = &bwd.h[t * h..(t + 1) * h];
            for k in 0..l {
                let row = &w[k * 2 * h..(k + 1) * 2 * h];
                scores[t * l + k] = b[k] + dot(&row[..h], hf) + dot(&row[h..], hb);
            }
        }
        Pass { x, fwd, bwd, scores }
    }

    /// Per-line label scores, row-major `n_lines × n_labels`.
    pub fn forward(&self, emb: &EmbeddingMatrix) -> Result<Vec<F>, LstmError> {
        self.check_input(emb)?;
        Ok(self.run(emb).scores)
    }

    fn gold_indices(&self, emb: &EmbeddingMatrix, gold: &[LineLabel]) -> Result<Vec<usize>, LstmError> {
        self.check_input(emb)?;
        if gold.len() != emb.n_lines() {
            return Err(LstmError::LengthMismatch {
                lines: gold.len(),
                rows: emb.n_lines(),
            });
        }
        gold.iter()
            .map(|&g| self.label_index(g).ok_or(LstmError::UnknownLabel(g)))
            .collect()
    }

    /// Mean per-line cross-entropy of one document.
    pub fn loss(&self, emb: &EmbeddingMatrix, gold: &[LineLabel]) -> Result<F, LstmError> {
        let gold = self.gold_indices(emb, gold)?;
        let scores = self.run(emb).scores;
        let l = self.labels.len();
        let mut total = F::zero();
        for (t, &y) in gold.iter().enumerate() {
            let row = &scores[t * l..(t + 1) * l];
            total = total + log_sum_exp(row) - row[y];
        }
        Ok(total / c(gold.len() as f64))
    }

    /// Mean over documents of the per-document mean cross-entropy, and its
    /// gradient laid out like [`BiLstmModel::params`].
    pub fn loss_and_gradients(&self, batch: &[(&EmbeddingMatrix, &[LineLabel])]) -> Result<(F, Vec<F>), LstmError> {
        if batch.is_empty() {
            return Err(LstmError::EmptyBatch);
        }
        let mut grad = vec![F::zero(); self.params.len()];
        let mut loss = F::zero();
        for (emb, gold) in batch {
            let gold = self.gold_indices(emb, gold)?;
            loss = loss + self.accumulate(emb, &gold, &mut grad);
        }
        let scale = F::one() / c(batch.len() as f64);
        for g in grad.iter_mut() {
            *g = *g * scale;
        }
        Ok((loss * scale, grad))
    }

    /// Adds the gradient of one document's mean loss into `grad`; returns that loss.
    fn accumulate(&self, emb: &EmbeddingMatrix, gold: &[usize], grad: &mut [F]) -> F {
        let pass = self.run(emb);
        let n = gold.len();
        let (d, h, l) = (self.input_dim, self.hidden_dim, self.labels.len());
        let inv_n = F::one() / c(n as f64);
        let off = self.offsets();
        let w_out = self.tensor("out.w");

        let mut loss = F::zero();
        let mut dh_f = vec![F::zero(); n * h];
        let mut dh_b = vec![F::zero(); n * h];
        let mut ds = vec![F::zero(); l];
        for t in 0..n {
            let row = &pass.scores[t * l..(t + 1) * l];
            let lse = log_sum_exp(row);
            loss = loss + lse - row[gold[t]];
            for k in 0..l {
                ds[k] = (row[k] - lse).exp() * inv_n;
            }
            ds[gold[t]] = ds[gold[t]] - inv_n;
            let hf = &pass.fwd.h[t * h..(t + 1) * h];
            let hb = &pass.bwd.h[t * h..(t + 1) * h];
            for k in 0..l {
                let g = ds[k];
                grad[off[7].0 + k] = grad[off[7].0 + k] + g;
                let gw = &mut grad[off[6].0 + k * 2 * h..off[6].0 + (k + 1) * 2 * h];
                let wr = &w_out[k * 2 * h..(k + 1) * 2 * h];
                for j in 0..h {
                    gw[j] = gw[j] + g * hf[j];
                    gw[h + j] = gw[h + j] + g * hb[j];
                    dh_f[t * h + j] = dh_f[t * h + j] + g * wr[j];
                    dh_b[t * h + j] = dh_b[t * h + j] + g * wr[h + j];
                }
            }
        }

        let (lo, hi) = grad.split_at_mut(off[3].0);
        backprop_direction(self.tensor("fwd.w_hh"), &pass.fwd, &pass.x, &dh_f, n, d, h, false, lo);
        backprop_direction(
            self.tensor("bwd.w_hh"),
            &pass.bwd,
            &pass.x,
            &dh_b,
            n,
            d,
            h,
            true,
            &mut hi[..off[6].0 - off[3].0],
        );
        loss * inv_n
    }

    /// Argmax per line, ties to the lower label index.
    pub fn predict(&self, emb: &EmbeddingMatrix) -> Result<Vec<LineLabel>, LstmError> {
        Ok(argmax_labels(&self.forward(emb)?, &self.labels))
    }

    pub fn segment(&self, emb: &EmbeddingMatrix, n_lines: usize) -> Result<Vec<ItemSpan>, LstmError> {
        if emb.n_lines() != n_lines {
            return Err(LstmError::LengthMismatch {
                lines: n_lines,
                rows: emb.n_lines(),
            });
        }
        Ok(spans_from_scores(&self.forward(emb)?, &self.labels))
    }
}

/// Row-wise argmax of an `n × labels.len()` score matrix, ties to the lower index.
pub fn argmax_labels<F: Float>(scores: &[F], labels: &[LineLabel]) -> Vec<LineLabel> {
    scores
        .chunks(labels.len())
        .map(|row| {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            labels[best]
        })
        .collect()
}

/// Argmax labels, orphan-`I` repair, then spans.
pub fn spans_from_scores<F: Float>(scores: &[F], labels: &[LineLabel]) -> Vec<ItemSpan> {
    labels_to_spans(&repair_labels(&argmax_labels(scores, labels))).expect("repaired labels are valid")
}

/// Segments a document's lines with a trained Bi-LSTM.
pub fn segment_lstm<F: Float>(
    model: &BiLstmModel<F>,
    emb: &EmbeddingMatrix,
    lines: &[crate::line::TextLine],
) -> Result<Vec<ItemSpan>, LstmError> {
    model.segment(emb, lines.len())
}

/// Row-wise softmax of a score matrix.
pub fn softmax_rows<F: Float>(scores: &[F], n_labels: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(scores.len());
    for row in scores.chunks(n_labels) {
        let lse = log_sum_exp(row);
        out.extend(row.iter().map(|&s| (s - lse).exp()));
    }
    out
}

fn log_sum_exp<F: Float>(row: &[F]) -> F {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    max + row.iter().map(|&s| (s - max).exp()).fold(F::zero(), |a, b| a + b).ln()
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

struct Pass<F> {
    x: Vec<F>,
    fwd: DirCache<F>,
    bwd: DirCache<F>,
    scores: Vec<F>,
}

/// Activations indexed by sequence position, not by processing step.
struct DirCache<F> {
    /// Activated gates `[i, f, g, o]`, `n × 4H`.
    gates: Vec<F>,
    c: Vec<F>,
    tanh_c: Vec<F>,
    h: Vec<F>,
}

#[inline]
fn position(k: usize, n: usize, reverse: bool) -> usize {
    if reverse {
        n - 1 - k
    } else {
        k
    }
}

#[allow(clippy::too_many_arguments)]
fn run_direction<F: Float>(
    w_ih: &[F],
    w_hh: &[F],
    b: &[F],
    x: &[F],
    n: usize,
    d: usize,
    h: usize,
    reverse: bool,
) -> DirCache<F> {
    let mut cache = DirCache {
        gates: vec![F::zero(); n * 4 * h],
        c: vec![F::zero(); n * h],
        tanh_c: vec![F::zero(); n * h],
        h: vec![F::zero(); n * h],
    };
    let mut a = vec![F::zero(); 4 * h];
    let mut h_prev = vec![F::zero(); h];
    let mut c_prev = vec![F::zero(); h];
    for k in 0..n {
        let t = position(k, n, reverse);
        let xt = &x[t * d..(t + 1) * d];
        for r in 0..4 * h {
            a[r] = b[r] + dot(&w_ih[r * d..(r + 1) * d], xt) + dot(&w_hh[r * h..(r + 1) * h], &h_prev);
        }
        let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let i = sigmoid(a[j]);
            let f = sigmoid(a[h + j]);
            let g = a[2 * h + j].tanh();
            let o = sigmoid(a[3 * h + j]);
            gates[j] = i;
            gates[h + j] = f;
            gates[2 * h + j] = g;
            gates[3 * h + j] = o;
            let cj = f * c_prev[j] + i * g;
            let tc = cj.tanh();
            cache.c[t * h + j] = cj;
            cache.tanh_c[t * h + j] = tc;
            cache.h[t * h + j] = o * tc;
        }
        h_prev.copy_from_slice(&cache.h[t * h..(t + 1) * h]);
        c_prev.copy_from_slice(&cache.c[t * h..(t + 1) * h]);
    }
    cache
}

/// Backpropagation through time for one direction; `grad` holds that
/// direction's `[w_ih, w_hh, b]` block.
#[allow(clippy::too_many_arguments)]
fn backprop_direction<F: Float>(
    w_hh: &[F],
    cache: &DirCache<F>,
    x: &[F],
    dh_out: &[F],
    n: usize,
    d: usize,
    h: usize,
    reverse: bool,
    grad: &mut [F],
) {
    let (g_ih, rest) = grad.split_at_mut(4 * h * d);
    let (g_hh, g_b) = rest.split_at_mut(4 * h * h);
    let one = F::one();
    let mut dh_next = vec![F::zero(); h];
    let mut dc_next = vec![F::zero(); h];
    let mut da = vec![F::zero(); 4 * h];
    for k in (0..n).rev() {
        let t = position(k, n, reverse);
        let prev = (k > 0).then(|| position(k - 1, n, reverse));
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = cache.tanh_c[t * h + j];
            let dh = dh_out[t * h + j] + dh_next[j];
            let dc = dc_next[j] + dh * o * (one - tc * tc);
            let c_prev = prev.map_or(F::zero(), |p| cache.c[p * h + j]);
            da[j] = dc * g * i * (one - i);
            da[h + j] = dc * c_prev * f * (one - f);
            da[2 * h + j] = dc * i * (one - g * g);
            da[3 * h + j] = dh * tc * o * (one - o);
            dc_next[j] = dc * f;
        }
        let xt = &x[t * d..(t + 1) * d];
        for r in 0..4 * h {
            let ar = da[r];
            g_b[r] = g_b[r] + ar;
            for (g, &xv) in g_ih[r * d..(r + 1) * d].iter_mut().zip(xt) {
                *g = *g + ar * xv;
            }
        }
        dh_next.fill(F::zero());
        if let Some(p) = prev {
            let hp = &cache.h[p * h..(p + 1) * h];
            for r in 0..4 * h {
                let ar = da[r];
                let wr = &w_hh[r * h..(r + 1) * h];
                for j in 0..h {
                    g_hh[r * h + j] = g_hh[r * h + j] + ar * hp[j];
                    dh_next[j] = dh_next[j] + ar * wr[j];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmConfig {
    /// Per-direction hidden width.
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden_dim: 256,
            learning_rate: 1e-4,
            max_epochs: 100,
            patience: 10,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Optimizer and early-stopping state carried across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<F> {
    pub adam: Adam<F>,
    pub epoch: usize,
    pub best_val_loss: f64,
    pub epochs_since_improvement: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch (1-based) whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub train_docs: usize,
    pub val_docs: usize,
}

/// Splits document indices into (train, validation) by a hash of the doc id.
/// At least one document is held out whenever there are two or more.
pub fn validation_split(doc_ids: &[&str], fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let hashes: Vec<u64> = doc_ids.iter().map(|id| fnv1a(id.as_bytes())).collect();
    let cut = (fraction.clamp(0.0, 1.0) * 10_000.0) as u64;
    let mut is_val: Vec<bool> = hashes.iter().map(|h| h % 10_000 < cut).collect();
    if doc_ids.len() >= 2 {
        if !is_val.contains(&true) && fraction > 0.0 {
            let pick = (0..hashes.len())
                .min_by_key(|&i| (hashes[i] % 10_000, i))
                .expect("non-empty");
            is_val[pick] = true;
        }
        if !is_val.contains(&false) {
            let keep = (0..hashes.len())
                .max_by_key(|&i| (hashes[i] % 10_000, usize::MAX - i))
                .expect("non-empty");
            is_val[keep] = false;
        }
    } else {
        is_val.fill(false);
    }
    let train = (0..doc_ids.len()).filter(|&i| !is_val[i]).collect();
    let val = (0..doc_ids.len()).filter(|&i| is_val[i]).collect();
    (train, val)
}

/// Trains with Adam, one document per step, until validation loss fails to
/// improve for `patience` epochs; returns the best-validation parameters.
/// With a single document, its training loss stands in for validation loss.
pub fn train_bilstm<F: Float>(
    docs: &[AnnotatedDocument],
    embeddings: &BTreeMap<String, EmbeddingMatrix>,
    config: &LstmConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(BiLstmModel<F>, LstmTrainReport), LstmError> {
    if docs.is_empty() {
        return Err(LstmError::EmptyCorpus);
    }
    let mut input_dim = None;
    let mut pairs = Vec::with_capacity(docs.len());
    for doc in docs {
        validate_label_sequence(&doc.labels).map_err(|_| LstmError::InvalidGold(doc.doc_id.clone()))?;
        let emb = embeddings
            .get(&doc.doc_id)
            .ok_or_else(|| LstmError::MissingEmbedding(doc.doc_id.clone()))?;
        if emb.n_lines() != doc.labels.len() {
            return Err(LstmError::LengthMismatch {
                lines: doc.labels.len(),
                rows: emb.n_lines(),
            });
        }
        match input_dim {
            None => input_dim = Some(emb.dim()),
            Some(d) if d != emb.dim() => {
                return Err(LstmError::DimMismatch {
                    expected: d,
                    found: emb.dim(),
                })
            }
            _ => {}
        }
        pairs.push((emb, doc.labels.as_slice()));
    }
    let pairs: Vec<_> = pairs.into_iter().filter(|(_, labels)| !labels.is_empty()).collect();
    if pairs.is_empty() {
        return Err(LstmError::EmptyCorpus);
    }
    let ids: Vec<&str> = pairs.iter().map(|(e, _)| e.doc_id.as_str()).collect();
    let (train, mut val) = validation_split(&ids, config.val_fraction);
    if val.is_empty() {
        val = train.clone();
    }

    let mut model: BiLstmModel<F> = BiLstmModel::init(
        input_dim.expect("non-empty"),
        config.hidden_dim,
        label_set(docs),
        config.seed,
    );
    let mut state = TrainState {
        adam: Adam::new(model.params.len(), c(config.learning_rate)),
        epoch: 0,
        best_val_loss: f64::INFINITY,
        epochs_since_improvement: 0,
    };
    let mut best = model.params.clone();
    let mut report = LstmTrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
        train_docs: train.len(),
        val_docs: val.len(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order = train.clone();
    while state.epoch < config.max_epochs {
        state.epoch += 1;
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for &i in &order {
            let (loss, grad) = model.loss_and_gradients(&[pairs[i]])?;
            let loss = loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(LstmError::NonFinite("training loss"));
            }
            train_loss += loss;
            state.adam.step(&mut model.params, &grad);
        }
        let mut val_loss = 0.0;
        for &i in &val {
            val_loss += model.loss(pairs[i].0, pairs[i].1)?.to_f64().unwrap_or(f64::NAN);
        }
        let stats = EpochStats {
            epoch: state.epoch,
            train_loss: train_loss / order.len().max(1) as f64,
            val_loss: val_loss / val.len() as f64,
        };
        on_epoch(&stats);
        report.epochs.push(stats);
        if stats.val_loss < state.best_val_loss {
            state.best_val_loss = stats.val_loss;
            state.epochs_since_improvement = 0;
            best.copy_from_slice(&model.params);
            report.best_epoch = state.epoch;
        } else {
            state.epochs_since_improvement += 1;
            if state.epochs_since_improvement >= config.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    model.params = best;
    Ok((model, report))
}
