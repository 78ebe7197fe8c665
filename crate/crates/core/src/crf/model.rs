use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::features::{extract_all, LineFeatures};
use super::inference::{self, Messages};
use super::CrfError;
use crate::item::LineLabel;
use crate::labels::{labels_to_spans, repair_labels, ItemSpan};
use crate::line::TextLine;

/// A document's features mapped onto the model vocabulary: per position,
/// `(feature index, value)` pairs. Features outside the vocabulary are dropped.
pub type EncodedSeq = Vec<Vec<(u32, f64)>>;

/// Linear-chain CRF parameters.
///
/// `state` is row-major by feature (`n_features × n_labels`), `transitions`
/// row-major by previous label (`n_labels × n_labels`).
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    labels: Vec<LineLabel>,
    features: Vec<String>,
    feature_index: BTreeMap<String, u32>,
    state: Vec<f64>,
    transitions: Vec<f64>,
    l2_lambda: f64,
}

/// Output of forward–backward on one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBackward {
    pub log_partition: f64,
    /// `marginals[t][k]` = P(label k at position t).
    pub marginals: Vec<Vec<f64>>,
    /// `pairwise[t-1][prev * L + next]` for each adjacent pair.
    pub pairwise: Vec<Vec<f64>>,
}

impl CrfModel {
    /// Zero-weight model over the given label set and feature vocabulary.
    pub fn new(labels: Vec<LineLabel>, features: Vec<String>, l2_lambda: f64) -> Self {
        let l = labels.len();
        let state = vec![0.0; features.len() * l];
        Self::from_parts(labels, features, state, vec![0.0; l * l], l2_lambda).expect("zero weights are consistent")
    }

    pub fn from_parts(
        labels: Vec<LineLabel>,
        features: Vec<String>,
        state: Vec<f64>,
        transitions: Vec<f64>,
        l2_lambda: f64,
    ) -> Result<Self, CrfError> {
        let l = labels.len();
        if l == 0 || state.len() != features.len() * l || transitions.len() != l * l {
            return Err(CrfError::Shape);
        }
        if !(l2_lambda >= 0.0) || state.iter().chain(&transitions).any(|w| !w.is_finite()) {
            return Err(CrfError::NonFiniteWeights);
        }
        let feature_index: BTreeMap<String, u32> = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect();
        if feature_index.len() != features.len() {
            return Err(CrfError::DuplicateFeature);
        }
        Ok(CrfModel {
            labels,
            features,
            feature_index,
            state,
            transitions,
            l2_lambda,
        })
    }

    pub fn labels(&self) -> &[LineLabel] {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn l2_lambda(&self) -> f64 {
        self.l2_lambda
    }

    pub fn state_weights(&self) -> &[f64] {
        &self.state
    }

    pub fn transition_weights(&self) -> &[f64] {
        &self.transitions
    }

    pub fn transition(&self, prev: LineLabel, next: LineLabel) -> Option<f64> {
        let (a, b) = (self.label_index(prev)?, self.label_index(next)?);
        Some(self.transitions[a * self.n_labels() + b])
    }

    pub fn state_weight(&self, feature: &str, label: LineLabel) -> f64 {
        match (self.feature_index.get(feature), self.label_index(label)) {
            (Some(&f), Some(k)) => self.state[f as usize * self.n_labels() + k],
            _ => 0.0,
        }
    }

    /// Non-zero state weights as `(feature, label, weight)`.
    pub fn nonzero_state_weights(&self) -> impl Iterator<Item = (&str, LineLabel, f64)> {
        let l = self.n_labels();
        self.state
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(move |(i, &w)| (self.features[i / l].as_str(), self.labels[i % l], w))
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.state, &mut self.transitions)
    }

    pub fn label_index(&self, label: LineLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn encode(&self, features: &[LineFeatures]) -> EncodedSeq {
        features
            .iter()
            .map(|f| {
                f.iter()
                    .filter_map(|(name, v)| self.feature_index.get(name).map(|&i| (i, v)))
                    .filter(|&(_, v)| v != 0.0)
                    .collect()
            })
            .collect()
    }

    /// Row-major `n × L` emission potentials.
    pub fn emissions(&self, seq: &EncodedSeq) -> Vec<f64> {
        emissions_from(&self.state, self.n_labels(), seq)
    }

    fn checked_emissions(&self, features: &[LineFeatures]) -> Result<Vec<f64>, CrfError> {
        if features.is_empty() {
            return Err(CrfError::EmptySequence);
        }
        Ok(self.emissions(&self.encode(features)))
    }

    /// Unnormalized log-score of a labeling. Unseen features contribute 0.
    pub fn score(&self, features: &[LineFeatures], labels: &[LineLabel]) -> Result<f64, CrfError> {
        if features.len() != labels.len() {
            return Err(CrfError::LengthMismatch {
                features: features.len(),
                labels: labels.len(),
            });
        }
        if features.is_empty() {
            return Ok(0.0);
        }
        let path = labels
            .iter()
            .map(|&l| self.label_index(l).ok_or(CrfError::UnknownLabel(l)))
            .collect::<Result<Vec<_>, _>>()?;
        let emissions = self.emissions(&self.encode(features));
        Ok(inference::path_score(
            &emissions,
            &self.transitions,
            self.n_labels(),
            &path,
        ))
    }

    pub fn forward_backward(&self, features: &[LineFeatures]) -> Result<ForwardBackward, CrfError> {
        let emissions = self.checked_emissions(features)?;
        let l = self.n_labels();
        let msg: Messages = inference::messages(&emissions, &self.transitions, l);
        let marginals = msg.marginals().chunks(l).map(<[f64]>::to_vec).collect();
        let pairwise = msg.pairwise(&emissions, &self.transitions);
        Ok(ForwardBackward {
            log_partition: msg.log_partition,
            marginals,
            pairwise,
        })
    }

    pub fn viterbi_decode(&self, features: &[LineFeatures]) -> Result<Vec<LineLabel>, CrfError> {
        let emissions = self.checked_emissions(features)?;
        let path = inference::viterbi(&emissions, &self.transitions, self.n_labels());
        Ok(path.into_iter().map(|k| self.labels[k]).collect())
    }

    /// Features, Viterbi decoding, BIO repair, then spans.
    pub fn segment(&self, lines: &[TextLine]) -> Vec<ItemSpan> {
        if lines.is_empty() {
            return Vec::new();
        }
        let decoded = self.viterbi_decode(&extract_all(lines)).expect("non-empty");
        labels_to_spans(&repair_labels(&decoded)).expect("repaired labels are valid")
    }
}

pub(crate) fn emissions_from(state: &[f64], n_labels: usize, seq: &EncodedSeq) -> Vec<f64> {
    let l = n_labels;
    let mut out = vec![0.0; seq.len() * l];
    for (t, active) in seq.iter().enumerate() {
        let row = &mut out[t * l..(t + 1) * l];
        for &(f, v) in active {
            let w = &state[f as usize * l..(f as usize + 1) * l];
            for (r, wk) in row.iter_mut().zip(w) {
                *r += wk * v;
            }
        }
    }
    out
}

/// Segments `lines` with a trained CRF.
pub fn segment_crf(model: &CrfModel, lines: &[TextLine]) -> Vec<ItemSpan> {
    model.segment(lines)
}
