//! `itemseg` subcommands.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use itemseg_core::crf::{train_crf, CrfConfig, CrfModel};
use itemseg_core::eval::{cohen_kappa, corpus_stats, evaluate, Aggregation, ItemGroup, KappaGate};
use itemseg_core::ingest::{
    html_to_lines, parse_master_index, primary_session, unwrap_document_sessions, BodyFormat, DocumentSession,
    FilingRef, SgmlError,
};
use itemseg_core::llm::{segment_llm, ChatBackend, Demonstration, LlmConfig, NoAudit, PromptBudget, DEFAULT_ITEMS};
use itemseg_core::lstm::{train_bilstm, BiLstmModel, EmbeddingMatrix, LstmConfig};
use itemseg_core::rules::segment_rule_based;
use itemseg_core::synth::{generate, GeneratorSpec};
use itemseg_core::{AnnotatedDocument, ItemId, ItemSpan, LineLabel, TextLine};
use num_traits::Float;
use rayon::prelude::*;
use serde::Serialize;

use crate::audit::AuditLog;
use crate::backend::{HttpChatBackend, HttpSettings, MockScript};
use crate::config::{pick, FileConfig, Precision};
use crate::demos::{builtin_demos, load_demos};
use crate::edgar::{decode_text, EdgarClient, EdgarConfig, HttpTransport, DEFAULT_BASE_URL, DEFAULT_RATE_LIMIT};
use crate::embeddings::{pseudo_embedding_file, EmbeddingFile};
use crate::jsonl::{atomic_write, read_jsonl, write_jsonl, ConvertedDoc, LabeledDoc};
use crate::model_io::{load_blsm, load_crf, save_blsm, save_crf};
use crate::report::{eval_csv, eval_json, stats_csv, stats_json, ReportFormat};

pub const DEFAULT_FORM_TYPES: [&str; 2] = ["10-K", "10-K405"];
pub const DEFAULT_LLM_URL: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_LLM_MODEL: &str = "gpt-4-turbo";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Parser)]
#[command(name = "itemseg", version, about = "Segment 10-K filings into their items")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "ITEMSEG_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads for per-document work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Skip documents that fail instead of aborting the run.
    #[arg(long, global = true)]
    pub keep_going: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download a quarterly index and the filings it lists into the cache.
    Fetch(FetchArgs),
    /// Turn raw submission files into line-numbered JSONL documents.
    Convert(ConvertArgs),
    /// Train a CRF on gold documents that carry their lines.
    TrainCrf(TrainCrfArgs),
    /// Train a Bi-LSTM on gold documents and per-line embeddings.
    TrainLstm(TrainLstmArgs),
    /// Predict item spans.
    Segment(SegmentArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Per-item corpus statistics of a gold file.
    Stats(StatsArgs),
    /// Generate a synthetic labelled corpus.
    Synth(SynthArgs),
    /// Write hashed pseudo-embeddings for converted documents.
    PseudoEmbed(PseudoEmbedArgs),
    /// Inter-annotator agreement between two label files.
    Kappa(KappaArgs),
}

#[derive(Debug, Args)]
pub struct EdgarArgs {
    #[arg(long, env = "ITEMSEG_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, env = "ITEMSEG_USER_AGENT")]
    pub user_agent: Option<String>,
    /// Maximum requests per second.
    #[arg(long)]
    pub rate_limit: Option<f64>,
    #[arg(long)]
    pub base_url: Option<String>,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[arg(long, required_unless_present = "index")]
    pub year: Option<u16>,
    #[arg(long, required_unless_present = "index")]
    pub quarter: Option<u8>,
    /// Use a local master.idx instead of downloading one.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long = "form-type", value_delimiter = ',')]
    pub form_types: Vec<String>,
    /// Fetch at most this many filings.
    #[arg(long)]
    pub limit: Option<usize>,
    /// JSONL listing of the fetched filings.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub edgar: EdgarArgs,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Raw submission files or directories of them.
    #[arg(long = "input", required_unless_present = "manifest")]
    pub inputs: Vec<PathBuf>,
    /// Manifest written by `fetch`; filings are read from the cache.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long = "form-type", value_delimiter = ',')]
    pub form_types: Vec<String>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, env = "ITEMSEG_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainCrfArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainLstmArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Rule,
    Crf,
    Lstm,
    Llm,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Converted documents (gold files with lines also work).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Model file for crf and lstm.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Embedding file for lstm.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// `http` or `mock:<script.jsonl>`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long, env = "ITEMSEG_LLM_URL")]
    pub llm_url: Option<String>,
    #[arg(long, env = "ITEMSEG_LLM_MODEL")]
    pub llm_model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Demonstration file; the built-in inventory is used otherwise.
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long, conflicts_with = "demos")]
    pub no_demos: bool,
    /// Append prompt/response records here.
    #[arg(long)]
    pub audit: Option<PathBuf>,
    #[arg(long)]
    pub max_retries: Option<usize>,
    #[arg(long)]
    pub word_limit: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    /// Items to request, e.g. `1,1A,7`.
    #[arg(long, value_delimiter = ',')]
    pub items: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
    /// Written to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Average per-document scores instead of pooling counts.
    #[arg(long)]
    pub per_document: bool,
    /// `name=1,1A,3`; replaces the default core/other groups.
    #[arg(long = "group")]
    pub groups: Vec<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub n_docs: usize,
    /// Gold JSONL with line text.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write pseudo-embeddings here.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
}

#[derive(Debug, Args)]
pub struct PseudoEmbedArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    /// Report kappa without flagging documents for review.
    #[arg(long)]
    pub no_gate: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status: 0 ok, 1 runtime failure, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

struct Ctx {
    file: FileConfig,
    jobs: usize,
    keep_going: bool,
}

impl Ctx {
    fn pool(&self) -> Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build()?)
    }

    /// Maps `f` over `items` in parallel, keeping input order. Failures are
    /// logged and dropped with `--keep-going`, otherwise the first aborts.
    fn map_docs<T, R, F>(&self, items: &[T], id: impl Fn(&T) -> String + Sync, f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync,
    {
        let results: Vec<Result<R>> = self.pool()?.install(|| items.par_iter().map(&f).collect());
        let mut out = Vec::with_capacity(results.len());
        let mut failed = 0;
        for (item, r) in items.iter().zip(results) {
            match r {
                Ok(v) => out.push(v),
                Err(e) if self.keep_going => {
                    failed += 1;
                    log::error!("{}: {e:#}", id(item));
                }
                Err(e) => return Err(e.context(id(item))),
            }
        }
        if failed > 0 {
            log::warn!("{failed} of {} documents failed and were skipped", items.len());
        }
        Ok(out)
    }
}

fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let jobs = pick(cli.jobs, file.jobs, 1);
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let ctx = Ctx {
        file,
        jobs,
        keep_going: cli.keep_going,
    };
    match cli.command {
        Command::Fetch(a) => fetch(&ctx, a),
        Command::Convert(a) => convert(&ctx, a),
        Command::TrainCrf(a) => train_crf_cmd(&ctx, a),
        Command::TrainLstm(a) => train_lstm_cmd(&ctx, a),
        Command::Segment(a) => segment(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::Stats(a) => stats_cmd(a),
        Command::Synth(a) => synth_cmd(&ctx, a),
        Command::PseudoEmbed(a) => pseudo_embed_cmd(a),
        Command::Kappa(a) => kappa_cmd(&ctx, a),
    }
}

fn form_types(flags: &[String]) -> Vec<String> {
    if flags.is_empty() {
        DEFAULT_FORM_TYPES.iter().map(|s| s.to_string()).collect()
    } else {
        flags.to_vec()
    }
}

fn write_or_print(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => atomic_write(p, text.as_bytes()).with_context(|| p.display().to_string()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cache_dir(flag: Option<PathBuf>, file: &FileConfig) -> PathBuf {
    pick(flag, file.edgar.cache_dir.clone(), PathBuf::from("edgar-cache"))
}

/// Accession-style id: the last path component without its extension.
fn doc_id_of(path: &str) -> String {
    let name = path.rsplit(['/', '\\']).next().unwrap_or(path);
    match name.rsplit_once('.') {
        Some((stem, _)) if !stem.is_empty() => stem.to_string(),
        _ => name.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub cik: String,
    pub company_name: String,
    pub form_type: String,
    pub date_filed: String,
    pub path: String,
}

impl ManifestEntry {
    fn new(r: &FilingRef) -> Self {
        ManifestEntry {
            doc_id: doc_id_of(&r.path),
            cik: r.cik.clone(),
            company_name: r.company_name.clone(),
            form_type: r.form_type.clone(),
            date_filed: r.date_filed.to_string(),
            path: r.path.clone(),
        }
    }
}

fn fetch(ctx: &Ctx, a: FetchArgs) -> Result<()> {
    let e = &ctx.file.edgar;
    let config = EdgarConfig {
        base_url: pick(a.edgar.base_url, e.base_url.clone(), DEFAULT_BASE_URL.to_string()),
        cache_dir: cache_dir(a.edgar.cache_dir, &ctx.file),
        rate_limit: pick(a.edgar.rate_limit, e.rate_limit, DEFAULT_RATE_LIMIT),
        user_agent: a
            .edgar
            .user_agent
            .or(e.user_agent.clone())
            .ok_or_else(|| anyhow!("a User-Agent is required: pass --user-agent or set ITEMSEG_USER_AGENT"))?,
    };
    let timeout = Duration::from_secs(e.timeout_secs.unwrap_or(60));
    let client = EdgarClient::new(config, HttpTransport::new(timeout)?)?;
    let index = match &a.index {
        Some(p) => decode_text(std::fs::read(p).with_context(|| p.display().to_string())?),
        None => client.fetch_master_index(a.year.expect("clap"), a.quarter.expect("clap"))?,
    };
    let forms = form_types(&a.form_types);
    let form_refs: Vec<&str> = forms.iter().map(String::as_str).collect();
    let mut refs = parse_master_index(&index, &form_refs)?;
    if let Some(n) = a.limit {
        refs.truncate(n);
    }
    log::info!("{} filings to fetch", refs.len());
    let mut fetched = ctx.map_docs(
        &refs,
        |r| r.path.clone(),
        |r| {
            client.fetch_filing(r)?;
            Ok(ManifestEntry::new(r))
        },
    )?;
    fetched.sort_by(|x, y| x.doc_id.cmp(&y.doc_id));
    write_jsonl(&a.manifest, &fetched)?;
    Ok(())
}

fn is_html_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.ends_with(".htm") || lower.ends_with(".html")
}

/// Converts one raw file: an EDGAR submission, or a bare HTML/text body.
pub fn convert_bytes(doc_id: &str, name: &str, bytes: Vec<u8>, forms: &[&str]) -> Result<ConvertedDoc> {
    let text = decode_text(bytes);
    let lines: Vec<TextLine> = match unwrap_document_sessions(&text) {
        Ok(sessions) => {
            let primary = primary_session(&sessions, forms)
                .ok_or_else(|| anyhow!("no document session of type {}", forms.join("/")))?;
            html_to_lines(primary)
        }
        Err(SgmlError::NoDocuments) => {
            let trimmed = text.trim_start().to_ascii_lowercase();
            let html = is_html_name(name) || trimmed.starts_with("<!doctype html") || trimmed.starts_with("<html");
            let session = DocumentSession {
                doc_type: String::new(),
                filename: name.to_string(),
                body: text,
                body_format: if html { BodyFormat::Html } else { BodyFormat::PlainText },
            };
            html_to_lines(&session)
        }
        Err(e) => return Err(e.into()),
    };
    Ok(ConvertedDoc {
        doc_id: doc_id.to_string(),
        lines: lines.into_iter().map(|l| l.text).collect(),
    })
}

fn list_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| p.display().to_string())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("{}: no such file or directory", p.display());
        }
    }
    Ok(out)
}

fn convert(ctx: &Ctx, a: ConvertArgs) -> Result<()> {
    let forms = form_types(&a.form_types);
    let form_refs: Vec<&str> = forms.iter().map(String::as_str).collect();
    // (doc_id, display name, path on disk)
    let mut jobs: Vec<(String, String, PathBuf)> = Vec::new();
    if let Some(m) = &a.manifest {
        let dir = cache_dir(a.cache_dir.clone(), &ctx.file);
        let entries: Vec<ManifestEntry> = read_jsonl(m)?;
        for e in entries {
            let path = dir.join(crate::edgar::cache_file_name(&e.path));
            jobs.push((e.doc_id, e.path, path));
        }
    }
    for p in list_inputs(&a.inputs)? {
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        jobs.push((doc_id_of(&name), name, p));
    }
    jobs.sort_by(|x, y| x.0.cmp(&y.0));
    if let Some(w) = jobs.windows(2).find(|w| w[0].0 == w[1].0) {
        bail!("two inputs map to doc id {}", w[0].0);
    }
    let docs = ctx.map_docs(
        &jobs,
        |j| j.2.display().to_string(),
        |(doc_id, name, path)| {
            let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
            convert_bytes(doc_id, name, bytes, &form_refs)
        },
    )?;
    write_jsonl(&a.output, &docs)?;
    Ok(())
}

fn read_gold(path: &Path) -> Result<Vec<AnnotatedDocument>> {
    let records: Vec<LabeledDoc> = read_jsonl(path)?;
    records.iter().map(|r| r.to_annotated().map_err(Into::into)).collect()
}

fn train_crf_cmd(ctx: &Ctx, a: TrainCrfArgs) -> Result<()> {
    let docs = read_gold(&a.gold)?;
    let f = &ctx.file.crf;
    let d = CrfConfig::default();
    let config = CrfConfig {
        l2_lambda: pick(a.l2, f.l2, d.l2_lambda),
        tol: pick(a.tol, f.tol, d.tol),
        max_iter: pick(a.max_iter, f.max_iter, d.max_iter),
        memory: f.memory.unwrap_or(d.memory),
    };
    let start = Instant::now();
    let (model, report) = train_crf(&docs, &config)?;
    log::info!(
        "CRF: {} docs, {} features, {:?} after {} evaluations, final loss {:.6} ({:.1}s)",
        docs.len(),
        model.features().len(),
        report.termination,
        report.evaluations,
        report.losses.last().copied().unwrap_or(f64::NAN),
        start.elapsed().as_secs_f64()
    );
    save_crf(&model, &a.model)?;
    Ok(())
}

fn load_embeddings(path: &Path) -> Result<BTreeMap<String, EmbeddingMatrix>> {
    Ok(EmbeddingFile::load(path)
        .with_context(|| path.display().to_string())?
        .by_doc_id())
}

fn train_lstm_cmd(ctx: &Ctx, a: TrainLstmArgs) -> Result<()> {
    let docs = read_gold(&a.gold)?;
    let emb = load_embeddings(&a.embeddings)?;
    let f = &ctx.file.lstm;
    let d = LstmConfig::default();
    let config = LstmConfig {
        hidden_dim: pick(a.hidden_dim, f.hidden_dim, d.hidden_dim),
        learning_rate: pick(a.learning_rate, f.learning_rate, d.learning_rate),
        max_epochs: pick(a.max_epochs, f.max_epochs, d.max_epochs),
        patience: pick(a.patience, f.patience, d.patience),
        val_fraction: pick(a.val_fraction, f.val_fraction, d.val_fraction),
        seed: pick(a.seed, ctx.file.seed, d.seed),
    };
    match pick(a.precision, f.precision, Precision::F64) {
        Precision::F64 => train_and_save::<f64>(&docs, &emb, &config, &a.model),
        Precision::F32 => train_and_save::<f32>(&docs, &emb, &config, &a.model),
    }
}

fn train_and_save<F: Float>(
    docs: &[AnnotatedDocument],
    emb: &BTreeMap<String, EmbeddingMatrix>,
    config: &LstmConfig,
    out: &Path,
) -> Result<()> {
    let (model, report) = train_bilstm::<F>(docs, emb, config, |s| {
        log::info!(
            "epoch {}: train loss {:.6}, validation loss {:.6}",
            s.epoch,
            s.train_loss,
            s.val_loss
        )
    })?;
    log::info!(
        "Bi-LSTM: best epoch {} of {}, {} train / {} validation docs",
        report.best_epoch,
        report.epochs.len(),
        report.train_docs,
        report.val_docs
    );
    save_blsm(&model, out)?;
    Ok(())
}

fn parse_items(flags: &[String], file: Option<&Vec<String>>) -> Result<Vec<ItemId>> {
    let raw: Vec<String> = if !flags.is_empty() {
        flags.to_vec()
    } else if let Some(f) = file {
        f.clone()
    } else {
        return Ok(DEFAULT_ITEMS.to_vec());
    };
    let mut items: Vec<ItemId> = raw
        .iter()
        .map(|s| s.trim().parse().map_err(|_| anyhow!("unknown item {s:?}")))
        .collect::<Result<_>>()?;
    items.sort();
    items.dedup();
    Ok(items)
}

enum Segmenter {
    Rule,
    Crf(CrfModel),
    Lstm64(BiLstmModel<f64>, BTreeMap<String, EmbeddingMatrix>),
    Lstm32(BiLstmModel<f32>, BTreeMap<String, EmbeddingMatrix>),
    Llm(LlmRunner),
}

enum LlmBackendKind {
    Mock(MockScript),
    Http(HttpSettings),
}

struct LlmRunner {
    backend: LlmBackendKind,
    demos: Vec<Demonstration>,
    config: LlmConfig,
    audit: Option<AuditLog>,
}

impl LlmRunner {
    fn segment(&self, doc_id: &str, lines: &[TextLine]) -> Result<Vec<ItemSpan>> {
        let mut backend: Box<dyn ChatBackend> = match &self.backend {
            LlmBackendKind::Mock(script) => Box::new(script.session(doc_id)),
            LlmBackendKind::Http(settings) => Box::new(HttpChatBackend::new(settings.clone())?),
        };
        let outcome = match &self.audit {
            Some(log) => segment_llm(doc_id, lines, &mut backend, &self.demos, &self.config, &mut log.clone()),
            None => segment_llm(doc_id, lines, &mut backend, &self.demos, &self.config, &mut NoAudit),
        }?;
        log::info!(
            "{doc_id}: accepted on attempt {} (word limit {})",
            outcome.attempts,
            outcome.word_limit
        );
        Ok(outcome.spans)
    }
}

fn lstm_spans<F: Float>(
    model: &BiLstmModel<F>,
    emb: &BTreeMap<String, EmbeddingMatrix>,
    doc: &ConvertedDoc,
) -> Result<Vec<ItemSpan>> {
    let m = emb
        .get(&doc.doc_id)
        .ok_or_else(|| anyhow!("no embeddings for this document"))?;
    Ok(model.segment(m, doc.lines.len())?)
}

impl Segmenter {
    fn segment(&self, doc: &ConvertedDoc) -> Result<Vec<ItemSpan>> {
        let lines = doc.text_lines();
        match self {
            Segmenter::Rule => Ok(segment_rule_based(&lines)),
            Segmenter::Crf(m) => Ok(itemseg_core::crf::segment_crf(m, &lines)),
            Segmenter::Lstm64(m, emb) => lstm_spans(m, emb, doc),
            Segmenter::Lstm32(m, emb) => lstm_spans(m, emb, doc),
            Segmenter::Llm(r) => r.segment(&doc.doc_id, &lines),
        }
    }
}

fn build_llm(ctx: &Ctx, a: &SegmentArgs) -> Result<LlmRunner> {
    let f = &ctx.file.llm;
    let spec = a
        .backend
        .as_deref()
        .ok_or_else(|| anyhow!("--method llm requires --backend (http or mock:<script.jsonl>)"))?;
    let backend = if let Some(path) = spec.strip_prefix("mock:") {
        LlmBackendKind::Mock(MockScript::load(Path::new(path))?)
    } else if spec == "http" {
        LlmBackendKind::Http(HttpSettings {
            url: pick(a.llm_url.clone(), f.url.clone(), DEFAULT_LLM_URL.to_string()),
            model: pick(a.llm_model.clone(), f.model.clone(), DEFAULT_LLM_MODEL.to_string()),
            temperature: pick(a.temperature, f.temperature, 0.0),
            timeout: Duration::from_secs(pick(a.timeout_secs, f.timeout_secs, 120)),
            api_key_env: pick(
                a.api_key_env.clone(),
                f.api_key_env.clone(),
                DEFAULT_API_KEY_ENV.to_string(),
            ),
        })
    } else {
        bail!("unknown backend {spec:?}; expected http or mock:<script.jsonl>");
    };
    let d = LlmConfig::default();
    let config = LlmConfig {
        items: parse_items(&a.items, f.items.as_ref())?,
        max_retries: pick(a.max_retries, f.max_retries, d.max_retries),
        word_limit: pick(a.word_limit, f.word_limit, d.word_limit),
        min_word_limit: f.min_word_limit.unwrap_or(d.min_word_limit),
        budget: PromptBudget {
            max_tokens: pick(a.max_tokens, f.max_tokens, d.budget.max_tokens),
            chars_per_token: f.chars_per_token.unwrap_or(d.budget.chars_per_token),
        },
    };
    let demos = if a.no_demos {
        Vec::new()
    } else {
        match a.demos.clone().or(f.demos.clone()) {
            Some(p) => load_demos(&p, &config.items, config.word_limit)?,
            None => builtin_demos(&config.items, config.word_limit),
        }
    };
    let audit = match &a.audit {
        Some(p) => Some(AuditLog::append(p).with_context(|| p.display().to_string())?),
        None => None,
    };
    Ok(LlmRunner {
        backend,
        demos,
        config,
        audit,
    })
}

fn segment(ctx: &Ctx, a: SegmentArgs) -> Result<()> {
    let mut docs: Vec<ConvertedDoc> = read_jsonl(&a.input)?;
    docs.sort_by(|x, y| x.doc_id.cmp(&y.doc_id));
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone()
            .ok_or_else(|| anyhow!("--method {:?} requires --{what}", a.method).context("missing argument"))
    };
    let segmenter = match a.method {
        Method::Rule => Segmenter::Rule,
        Method::Crf => Segmenter::Crf(load_crf(&need(&a.model, "model")?)?),
        Method::Lstm => {
            let model = need(&a.model, "model")?;
            let emb = load_embeddings(&need(&a.embeddings, "embeddings")?)?;
            match pick(a.precision, ctx.file.lstm.precision, Precision::F64) {
                Precision::F64 => Segmenter::Lstm64(load_blsm(&model)?, emb),
                Precision::F32 => Segmenter::Lstm32(load_blsm(&model)?, emb),
            }
        }
        Method::Llm => Segmenter::Llm(build_llm(ctx, &a)?),
    };
    let preds = ctx.map_docs(
        &docs,
        |d| d.doc_id.clone(),
        |doc| {
            let spans = segmenter.segment(doc)?;
            Ok(LabeledDoc::from_spans(&doc.doc_id, &spans, doc.lines.len())?)
        },
    )?;
    write_jsonl(&a.output, &preds)?;
    Ok(())
}

fn parse_group(spec: &str) -> Result<ItemGroup> {
    let (name, items) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("group {spec:?} must look like name=1,1A,3"))?;
    let items = items
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| anyhow!("unknown item {s:?} in group {name}"))
        })
        .collect::<Result<Vec<ItemId>>>()?;
    Ok(ItemGroup::new(name, items))
}

/// Gold and prediction label pairs matched by doc id.
fn paired_labels(ctx: &Ctx, gold: &Path, pred: &Path) -> Result<Vec<(String, Vec<LineLabel>, Vec<LineLabel>)>> {
    let gold: Vec<LabeledDoc> = read_jsonl(gold)?;
    let pred: Vec<LabeledDoc> = read_jsonl(pred)?;
    let mut by_id: BTreeMap<&str, &LabeledDoc> = BTreeMap::new();
    for p in &pred {
        if by_id.insert(&p.doc_id, p).is_some() {
            bail!("duplicate doc id {} in predictions", p.doc_id);
        }
    }
    let mut pairs = Vec::new();
    for g in &gold {
        let row = (|| -> Result<_> {
            let p = by_id
                .remove(g.doc_id.as_str())
                .ok_or_else(|| anyhow!("no prediction"))?;
            let (gl, pl) = (g.parsed_labels()?, p.parsed_labels()?);
            if gl.len() != pl.len() {
                bail!("{} gold labels but {} predicted", gl.len(), pl.len());
            }
            Ok((g.doc_id.clone(), gl, pl))
        })();
        match row {
            Ok(r) => pairs.push(r),
            Err(e) if ctx.keep_going => log::error!("{}: {e:#}", g.doc_id),
            Err(e) => return Err(e.context(g.doc_id.clone())),
        }
    }
    for id in by_id.keys() {
        log::warn!("{id}: prediction has no gold document; ignored");
    }
    pairs.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(pairs)
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let pairs = paired_labels(ctx, &a.gold, &a.pred)?;
    let groups = if a.groups.is_empty() {
        ItemGroup::defaults()
    } else {
        a.groups.iter().map(|g| parse_group(g)).collect::<Result<_>>()?
    };
    let aggregation = if a.per_document {
        Aggregation::PerDocument
    } else {
        Aggregation::Pooled
    };
    let views: Vec<(&[LineLabel], &[LineLabel])> = pairs.iter().map(|(_, g, p)| (&g[..], &p[..])).collect();
    let report = evaluate(&views, &groups, aggregation)?;
    let text = match a.format {
        ReportFormat::Csv => eval_csv(&report),
        ReportFormat::Json => eval_json(&report),
    };
    write_or_print(a.output.as_deref(), &text)
}

fn stats_cmd(a: StatsArgs) -> Result<()> {
    let docs = read_gold(&a.gold)?;
    let stats = corpus_stats(&docs)?;
    let text = match a.format {
        ReportFormat::Csv => stats_csv(&stats),
        ReportFormat::Json => stats_json(&stats),
    };
    write_or_print(a.output.as_deref(), &text)
}

fn synth_cmd(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let spec = GeneratorSpec::reference(pick(a.seed, ctx.file.seed, 0), a.n_docs);
    let docs = generate(&spec)?;
    let records: Vec<LabeledDoc> = docs.iter().map(|d| LabeledDoc::from_annotated(d, true)).collect();
    write_jsonl(&a.output, &records)?;
    if let Some(path) = &a.embeddings {
        let converted: Vec<ConvertedDoc> = docs
            .iter()
            .map(|d| ConvertedDoc {
                doc_id: d.doc_id.clone(),
                lines: d.lines.iter().map(|l| l.text.clone()).collect(),
            })
            .collect();
        pseudo_embedding_file(&converted, a.dim).save(path)?;
    }
    Ok(())
}

fn pseudo_embed_cmd(a: PseudoEmbedArgs) -> Result<()> {
    let docs: Vec<ConvertedDoc> = read_jsonl(&a.input)?;
    pseudo_embedding_file(&docs, a.dim).save(&a.output)?;
    Ok(())
}

fn kappa_cmd(ctx: &Ctx, a: KappaArgs) -> Result<()> {
    let pairs = paired_labels(ctx, &a.a, &a.b)?;
    let gate = KappaGate {
        threshold: a.threshold,
        enabled: !a.no_gate,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["doc_id", "kappa", "needs_review"])?;
    for (id, x, y) in &pairs {
        let k = cohen_kappa(x, y)?;
        w.write_record([id.clone(), format!("{k:.6}"), gate.needs_review(k).to_string()])?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    write_or_print(a.output.as_deref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_ids_from_paths() {
        assert_eq!(
            doc_id_of("edgar/data/320193/0000320193-20-000096.txt"),
            "0000320193-20-000096"
        );
        assert_eq!(doc_id_of("filing.htm"), "filing");
        assert_eq!(doc_id_of("noext"), "noext");
    }

    #[test]
    fn item_lists_are_canonical() {
        let items = parse_items(&["7".into(), "1A".into(), "1".into(), "7".into()], None).unwrap();
        assert_eq!(items, vec![ItemId::I1, ItemId::I1A, ItemId::I7]);
        assert_eq!(parse_items(&[], None).unwrap(), DEFAULT_ITEMS.to_vec());
        assert!(parse_items(&["99".into()], None).is_err());
    }

    #[test]
    fn group_specs() {
        let g = parse_group("mine=1, 7").unwrap();
        assert_eq!(g.name, "mine");
        assert_eq!(g.items, vec![ItemId::I1, ItemId::I7]);
        assert!(parse_group("nogroup").is_err());
    }

    #[test]
    fn bare_html_converts() {
        let doc = convert_bytes(
            "x",
            "x.htm",
            b"<p>Item 1. Business</p><p>We make widgets.</p>".to_vec(),
            &["10-K"],
        )
        .unwrap();
        assert_eq!(doc.lines, vec!["Item 1. Business", "We make widgets."]);
    }
}
