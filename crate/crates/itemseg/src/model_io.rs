//! CRF (JSON) and Bi-LSTM (BLSM binary) model files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use itemseg_core::crf::{CrfError, CrfModel};
use itemseg_core::lstm::{tensor_sizes, BiLstmModel, LstmError};
use itemseg_core::LineLabel;
use num_traits::Float;
use serde::Deserialize;
use thiserror::Error;

use crate::jsonl::atomic_write;

pub const CRF_VERSION: u32 = 1;
pub const BLSM_MAGIC: &[u8; 4] = b"BLSM";
pub const BLSM_VERSION: u32 = 1;
const KEY_SEP: char = '\u{1f}';

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Crf(#[from] CrfError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
}

fn format_err(msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Format(msg.into())
}

fn num17(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Serializes a CRF model. Zero state weights are omitted.
pub fn crf_to_json(model: &CrfModel) -> String {
    let mut out = String::new();
    let labels: Vec<String> = model.labels().iter().map(|l| json_str(&l.to_string())).collect();
    let _ = write!(
        out,
        "{{\"version\":{CRF_VERSION},\"labels\":[{}],\"l2\":{},\"state_weights\":{{",
        labels.join(","),
        num17(model.l2_lambda())
    );
    let mut weights: Vec<(String, f64)> = model
        .nonzero_state_weights()
        .map(|(f, l, w)| (format!("{f}{KEY_SEP}{l}"), w))
        .collect();
    weights.sort_by(|a, b| a.0.cmp(&b.0));
    for (i, (key, w)) in weights.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "\n{}:{}", json_str(key), num17(*w));
    }
    out.push_str("},\"transitions\":[");
    let n = model.n_labels();
    for (r, row) in model.transition_weights().chunks(n).enumerate() {
        if r > 0 {
            out.push(',');
        }
        let cells: Vec<String> = row.iter().map(|w| num17(*w)).collect();
        let _ = write!(out, "\n[{}]", cells.join(","));
    }
    out.push_str("]}\n");
    out
}

#[derive(Deserialize)]
struct CrfFile {
    version: u32,
    labels: Vec<String>,
    l2: f64,
    state_weights: BTreeMap<String, f64>,
    transitions: Vec<Vec<f64>>,
}

pub fn crf_from_json(text: &str) -> Result<CrfModel, ModelFileError> {
    let file: CrfFile = serde_json::from_str(text)?;
    if file.version != CRF_VERSION {
        return Err(ModelFileError::Version(file.version));
    }
    let labels = file
        .labels
        .iter()
        .map(|s| {
            s.parse::<LineLabel>()
                .map_err(|e| format_err(format!("label {:?}", e.0)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let label_pos: BTreeMap<LineLabel, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut entries = Vec::with_capacity(file.state_weights.len());
    let mut features = BTreeSet::new();
    for (key, w) in &file.state_weights {
        let (feat, label) = key
            .rsplit_once(KEY_SEP)
            .ok_or_else(|| format_err(format!("state weight key {key:?} has no separator")))?;
        let label: LineLabel = label
            .parse()
            .map_err(|_| format_err(format!("state weight key {key:?}")))?;
        let k = *label_pos
            .get(&label)
            .ok_or_else(|| format_err(format!("label {label} not in the label list")))?;
        features.insert(feat.to_string());
        entries.push((feat.to_string(), k, *w));
    }
    let features: Vec<String> = features.into_iter().collect();
    let index: BTreeMap<&str, usize> = features.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let l = labels.len();
    let mut state = vec![0.0; features.len() * l];
    for (feat, k, w) in entries {
        state[index[feat.as_str()] * l + k] = w;
    }
    if file.transitions.len() != l || file.transitions.iter().any(|r| r.len() != l) {
        return Err(format_err("transition matrix does not match the label list"));
    }
    let transitions = file.transitions.concat();
    Ok(CrfModel::from_parts(labels, features, state, transitions, file.l2)?)
}

pub fn save_crf(model: &CrfModel, path: &Path) -> Result<(), ModelFileError> {
    Ok(atomic_write(path, crf_to_json(model).as_bytes())?)
}

pub fn load_crf(path: &Path) -> Result<CrfModel, ModelFileError> {
    crf_from_json(&std::fs::read_to_string(path)?)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

/// Encodes a model as BLSM; parameters are always stored as f64.
pub fn blsm_to_bytes<F: Float>(model: &BiLstmModel<F>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BLSM_MAGIC);
    put_u32(&mut out, BLSM_VERSION as usize);
    put_u32(&mut out, model.input_dim());
    put_u32(&mut out, model.hidden_dim());
    put_u32(&mut out, model.labels().len());
    out.extend_from_slice(&model.seed().to_le_bytes());
    for label in model.labels() {
        let s = label.to_string();
        put_u32(&mut out, s.len());
        out.extend_from_slice(s.as_bytes());
    }
    for p in model.params() {
        out.extend_from_slice(&p.to_f64().expect("finite parameter").to_le_bytes());
    }
    out
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    pub(crate) fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn string(&mut self) -> Result<String, String> {
        let n = self.u32()?;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| format!("invalid UTF-8 at byte {at}"))
    }

    pub(crate) fn finished(&self) -> bool {
        self.pos == self.buf.len()
    }
}

pub fn blsm_from_bytes<F: Float>(bytes: &[u8]) -> Result<BiLstmModel<F>, ModelFileError> {
    let mut r = Reader::new(bytes);
    if r.take(4).map_err(format_err)? != BLSM_MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = r.u32().map_err(format_err)?;
    if version != BLSM_VERSION as usize {
        return Err(ModelFileError::Version(version as u32));
    }
    let input_dim = r.u32().map_err(format_err)?;
    let hidden_dim = r.u32().map_err(format_err)?;
    let n_labels = r.u32().map_err(format_err)?;
    let seed = r.u64().map_err(format_err)?;
    let mut labels = Vec::with_capacity(n_labels.min(64));
    for _ in 0..n_labels {
        let s = r.string().map_err(format_err)?;
        labels.push(s.parse::<LineLabel>().map_err(|_| format_err(format!("label {s:?}")))?);
    }
    let n_params: usize = tensor_sizes(input_dim, hidden_dim, n_labels).iter().sum();
    let raw = r.take(
        n_params
            .checked_mul(8)
            .ok_or_else(|| format_err("dimensions overflow"))?,
    );
    let raw = raw.map_err(format_err)?;
    if !r.finished() {
        return Err(format_err("trailing bytes"));
    }
    let params = raw
        .chunks_exact(8)
        .map(|c| F::from(f64::from_le_bytes(c.try_into().expect("8 bytes"))).expect("representable"))
        .collect();
    Ok(BiLstmModel::from_parts(input_dim, hidden_dim, labels, seed, params)?)
}

pub fn save_blsm<F: Float>(model: &BiLstmModel<F>, path: &Path) -> Result<(), ModelFileError> {
    Ok(atomic_write(path, &blsm_to_bytes(model))?)
}

pub fn load_blsm<F: Float>(path: &Path) -> Result<BiLstmModel<F>, ModelFileError> {
    blsm_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use itemseg_core::ItemId;

    #[test]
    fn crf_json_round_trip_is_exact() {
        let labels = vec![LineLabel::O, LineLabel::B(ItemId::I1), LineLabel::I(ItemId::I1)];
        let features = vec![
            "bias".to_string(),
            "w[0]=item".to_string(),
            "weird\u{1f}name".to_string(),
        ];
        let state = vec![0.1, -0.0, 0.0, 1.0 / 3.0, 2e-300, -7.5, 0.0, 0.0, f64::MIN_POSITIVE];
        let transitions = (0..9).map(|i| (i as f64).sqrt() - 1.5).collect();
        let model = CrfModel::from_parts(labels, features, state, transitions, 0.25).unwrap();
        let text = crf_to_json(&model);
        let back = crf_from_json(&text).unwrap();
        assert_eq!(back.transition_weights(), model.transition_weights());
        for (f, l, w) in model.nonzero_state_weights() {
            assert_eq!(back.state_weight(f, l).to_bits(), w.to_bits());
        }
        assert_eq!(
            back.nonzero_state_weights().count(),
            model.nonzero_state_weights().count()
        );
        assert_eq!(back.l2_lambda(), 0.25);
    }

    #[test]
    fn crf_rejects_other_versions() {
        let text = r#"{"version":2,"labels":["O"],"l2":1.0,"state_weights":{},"transitions":[[0.0]]}"#;
        assert!(matches!(crf_from_json(text), Err(ModelFileError::Version(2))));
    }

    #[test]
    fn blsm_round_trip_and_truncation() {
        let labels = vec![LineLabel::O, LineLabel::B(ItemId::I7), LineLabel::I(ItemId::I7)];
        let model = BiLstmModel::<f64>::init(4, 3, labels, 9);
        let bytes = blsm_to_bytes(&model);
        let back: BiLstmModel<f64> = blsm_from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert!(blsm_from_bytes::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(blsm_from_bytes::<f64>(&bad).is_err());
    }

    #[test]
    fn blsm_single_precision_is_exact() {
        let model = BiLstmModel::<f32>::init(5, 2, vec![LineLabel::O, LineLabel::B(ItemId::I1)], 3);
        let back: BiLstmModel<f32> = blsm_from_bytes(&blsm_to_bytes(&model)).unwrap();
        assert_eq!(back.params(), model.params());
    }
}
