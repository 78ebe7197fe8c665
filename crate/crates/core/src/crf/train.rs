use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::features::{extract_all, LineFeatures};
use super::inference;
use super::model::{emissions_from, CrfModel, EncodedSeq};
use super::CrfError;
use crate::item::LineLabel;
use crate::labels::{validate_label_sequence, AnnotatedDocument};
use crate::optim::{self, LbfgsConfig, Termination};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrfConfig {
    pub l2_lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for CrfConfig {
    fn default() -> Self {
        CrfConfig {
            l2_lambda: 1.0,
            tol: 1e-5,
            max_iter: 300,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfTrainReport {
    /// Regularized loss after every accepted optimizer step, initial value first.
    pub losses: Vec<f64>,
    pub termination: Termination,
    pub evaluations: usize,
}

/// Dense gradient laid out like the model's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradient {
    pub state: Vec<f64>,
    pub transitions: Vec<f64>,
}

struct Prepared {
    seq: EncodedSeq,
    gold: Vec<usize>,
}

/// Regularized negative log-likelihood over `data`, writing its gradient
/// into `grad` (state block first, then transitions).
fn objective(params: &[f64], n_labels: usize, data: &[Prepared], l2: f64, grad: &mut [f64]) -> f64 {
    let l = n_labels;
    let n_state = params.len() - l * l;
    let (state, transitions) = params.split_at(n_state);
    grad.fill(0.0);
    let mut loss = 0.0;
    for doc in data {
        let emissions = emissions_from(state, l, &doc.seq);
        let msg = inference::messages(&emissions, transitions, l);
        loss += msg.log_partition - inference::path_score(&emissions, transitions, l, &doc.gold);

        let (g_state, g_trans) = grad.split_at_mut(n_state);
        let marginals = msg.marginals();
        for (t, active) in doc.seq.iter().enumerate() {
            let p = &marginals[t * l..(t + 1) * l];
            let y = doc.gold[t];
            for &(f, v) in active {
                let row = &mut g_state[f as usize * l..(f as usize + 1) * l];
                for (g, pk) in row.iter_mut().zip(p) {
                    *g += pk * v;
                }
                row[y] -= v;
            }
        }
        msg.for_each_pairwise(&emissions, transitions, |_, yp, y, p| g_trans[yp * l + y] += p);
        for pair in doc.gold.windows(2) {
            g_trans[pair[0] * l + pair[1]] -= 1.0;
        }
    }
    if l2 > 0.0 {
        let mut sq = 0.0;
        for (g, w) in grad.iter_mut().zip(params) {
            *g += l2 * w;
            sq += w * w;
        }
        loss += 0.5 * l2 * sq;
    }
    loss
}

fn prepare(model: &CrfModel, batch: &[(Vec<LineFeatures>, Vec<LineLabel>)]) -> Result<Vec<Prepared>, CrfError> {
    batch
        .iter()
        .map(|(features, labels)| {
            if features.is_empty() {
                return Err(CrfError::EmptySequence);
            }
            if features.len() != labels.len() {
                return Err(CrfError::LengthMismatch {
                    features: features.len(),
                    labels: labels.len(),
                });
            }
            let gold = labels
                .iter()
                .map(|&l| model.label_index(l).ok_or(CrfError::UnknownLabel(l)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Prepared {
                seq: model.encode(features),
                gold,
            })
        })
        .collect()
}

/// Loss `Σ (log Z − score(gold)) + λ/2·‖w‖²` and its gradient
/// (expected − empirical counts + λ·w).
pub fn nll_and_gradient(
    model: &CrfModel,
    batch: &[(Vec<LineFeatures>, Vec<LineLabel>)],
) -> Result<(f64, CrfGradient), CrfError> {
    let data = prepare(model, batch)?;
    let l = model.n_labels();
    let mut params = model.state_weights().to_vec();
    params.extend_from_slice(model.transition_weights());
    let mut grad = vec![0.0; params.len()];
    let loss = objective(&params, l, &data, model.l2_lambda(), &mut grad);
    let transitions = grad.split_off(model.state_weights().len());
    Ok((
        loss,
        CrfGradient {
            state: grad,
            transitions,
        },
    ))
}

/// Label set used for training: `O` plus every label seen in the corpus,
/// in alphabet order.
pub fn label_set(corpus: &[AnnotatedDocument]) -> Vec<LineLabel> {
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    seen.insert(LineLabel::O.index());
    for doc in corpus {
        seen.extend(doc.labels.iter().map(|l| l.index()));
    }
    LineLabel::alphabet().filter(|l| seen.contains(&l.index())).collect()
}

/// Fits a CRF by L-BFGS on the regularized negative log-likelihood.
pub fn train_crf(corpus: &[AnnotatedDocument], config: &CrfConfig) -> Result<(CrfModel, CrfTrainReport), CrfError> {
    if corpus.is_empty() {
        return Err(CrfError::EmptyCorpus);
    }
    let mut batch = Vec::with_capacity(corpus.len());
    let mut vocab: BTreeMap<String, ()> = BTreeMap::new();
    for doc in corpus {
        validate_label_sequence(&doc.labels).map_err(|e| CrfError::InvalidGold {
            doc_id: doc.doc_id.clone(),
            error: e,
        })?;
        if doc.lines.is_empty() {
            continue;
        }
        let features = extract_all(&doc.lines);
        for f in &features {
            for (name, _) in f.iter() {
                if !vocab.contains_key(name) {
                    vocab.insert(name.into(), ());
                }
            }
        }
        batch.push((features, doc.labels.clone()));
    }
    if batch.is_empty() {
        return Err(CrfError::EmptyCorpus);
    }
    let mut model = CrfModel::new(label_set(corpus), vocab.into_keys().collect(), config.l2_lambda);
    let data = prepare(&model, &batch)?;
    let l = model.n_labels();

    let mut params = vec![0.0; model.state_weights().len() + l * l];
    let report = optim::minimize(
        |p, g| objective(p, l, &data, config.l2_lambda, g),
        &mut params,
        &LbfgsConfig {
            tol: config.tol,
            max_iter: config.max_iter,
            memory: config.memory,
            ..LbfgsConfig::default()
        },
    )
    .map_err(|e| CrfError::NonFiniteLoss {
        iteration: e.iteration,
        loss: e.value,
    })?;

    let (state, transitions) = model.params_mut();
    let n_state = state.len();
    state.copy_from_slice(&params[..n_state]);
    transitions.copy_from_slice(&params[n_state..]);
    Ok((
        model,
        CrfTrainReport {
            losses: report.losses,
            termination: report.termination,
            evaluations: report.evaluations,
        },
    ))
}
