use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};
use plc_core::bundle::{pack, SectionTag};
use plc_core::edgemap::CannyParams;
use plc_core::encoder::{encode_image, fetch_prompt, EncodeConfig, FilePromptProvider, Strategy};
use plc_core::metrics::{
    cosine_similarity, ssim, BuiltinEmbedder, EmbeddingProvider, EmbeddingVector, ExternalEmbedder, MetricsError,
    SsimParams,
};
use plc_core::preview::{preview_reconstruct, PreviewParams};
use plc_core::raster::RasterImage;

use crate::corpus::{load_image, CorpusEntry};
use crate::report::{aggregate, Aggregate, RunRow};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedderSpec {
    Builtin,
    /// Shell command speaking the `EMBED <path>` line protocol.
    Command(String),
}

impl EmbedderSpec {
    /// Accepts `builtin` or `cmd:<command>`.
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        match s {
            "builtin" => Ok(Self::Builtin),
            _ => match s.strip_prefix("cmd:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Self::Command(cmd.to_owned())),
                _ => Err(BenchError::BadEmbedder(s.to_owned())),
            },
        }
    }

    pub fn instantiate(&self) -> Result<Box<dyn EmbeddingProvider>, MetricsError> {
        Ok(match self {
            Self::Builtin => Box::new(BuiltinEmbedder),
            Self::Command(cmd) => Box::new(ExternalEmbedder::spawn(cmd)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub strategies: Vec<Strategy>,
    pub jobs: usize,
    pub canny: CannyParams,
    pub grid_w: u32,
    pub grid_h: u32,
    pub embedder: EmbedderSpec,
    /// Skip preview reconstruction, SSIM and embeddings.
    pub sizes_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            jobs: 1,
            canny: CannyParams::default(),
            grid_w: 32,
            grid_h: 32,
            embedder: EmbedderSpec::Builtin,
            sizes_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<Aggregate>,
}

fn error_rows(entry: &CorpusEntry, strategies: &[Strategy], msg: &str) -> Vec<RunRow> {
    strategies.iter().map(|&s| RunRow::failed(entry, s, msg)).collect()
}

fn run_strategy(
    entry: &CorpusEntry,
    image: &RasterImage,
    prompt: &str,
    strategy: Strategy,
    config: &RunConfig,
    embedder: Option<&mut (dyn EmbeddingProvider + '_)>,
    original_embedding: Option<&EmbeddingVector>,
) -> RunRow {
    let mut encode = EncodeConfig::new(strategy);
    encode.canny = config.canny;
    encode.grid_w = config.grid_w;
    encode.grid_h = config.grid_h;
    if strategy == Strategy::SalientFeatures {
        encode.salient_regions = entry.regions.clone().unwrap_or_default();
    }
    let (bundle, report) = match encode_image(image, entry.original_bytes, prompt, &encode) {
        Ok(r) => r,
        Err(e) => return RunRow::failed(entry, strategy, &e.to_string()),
    };
    debug_assert_eq!(pack(&bundle).map(|b| b.len() as u64).ok(), Some(report.bundle_bytes));

    let mut row = RunRow::failed(entry, strategy, "");
    row.bundle_bytes = Some(report.bundle_bytes);
    row.savings = Some(report.savings);
    row.below_break_even = report.below_break_even;
    row.canny_bytes = bundle.section(SectionTag::Canny).map(|p| p.len() as u64);
    if config.sizes_only {
        return row;
    }

    let preview = match preview_reconstruct(&bundle, &PreviewParams::default()) {
        Ok(p) => p,
        Err(e) => {
            row.error = format!("preview: {e}");
            return row;
        }
    };
    match ssim(image, &preview, &SsimParams::default()) {
        Ok(s) => row.ssim_preview = Some(s),
        Err(e) => row.error = format!("ssim: {e}"),
    }
    if let (Some(embedder), Some(orig)) = (embedder, original_embedding) {
        match embedder.embed(&preview).and_then(|p| cosine_similarity(orig, &p)) {
            Ok(c) => row.embed_sim_preview = Some(c),
            Err(e) => row.error = format!("embedding: {e}"),
        }
    }
    row
}

fn run_entry(entry: &CorpusEntry, config: &RunConfig, embedder: Option<&mut (dyn EmbeddingProvider + '_)>) -> Vec<RunRow> {
    let image = match load_image(&entry.path) {
        Ok(i) => i,
        Err(e) => return error_rows(entry, &config.strategies, &e.to_string()),
    };
    let provider = FilePromptProvider::new(entry.prompt_path());
    let prompt = match fetch_prompt(&provider, &[], "", false) {
        Ok(p) => p,
        Err(e) => return error_rows(entry, &config.strategies, &e.to_string()),
    };
    let mut embedder = embedder;
    let original_embedding = match (&mut embedder, config.sizes_only) {
        (Some(e), false) => match e.embed(&image) {
            Ok(v) => Some(v),
            Err(err) => {
                warn!("{}: embedding the original failed: {err}", entry.id);
                None
            }
        },
        _ => None,
    };
    config
        .strategies
        .iter()
        .map(|&s| {
            let emb = embedder.as_mut().map(|e| &mut **e as &mut dyn EmbeddingProvider);
            run_strategy(entry, &image, &prompt, s, config, emb, original_embedding.as_ref())
        })
        .collect()
}

/// Runs every strategy on every entry with `config.jobs` workers, each
/// owning its own embedding provider. Rows come back ordered by entry, then
/// by the order of `config.strategies`, regardless of scheduling.
pub fn run_corpus(entries: &[CorpusEntry], config: &RunConfig) -> Result<RunOutput, BenchError> {
    if entries.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let jobs = config.jobs.clamp(1, entries.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Vec<RunRow>)>> = Mutex::new(Vec::with_capacity(entries.len()));

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| {
                let mut embedder = if config.sizes_only {
                    None
                } else {
                    match config.embedder.instantiate() {
                        Ok(e) => Some(e),
                        Err(e) => {
                            warn!("embedding provider unavailable: {e}");
                            None
                        }
                    }
                };
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(entry) = entries.get(i) else { break };
                    info!("[{}/{}] {}", i + 1, entries.len(), entry.id);
                    let rows = run_entry(entry, config, embedder.as_deref_mut());
                    results.lock().expect("result lock").push((i, rows));
                }
            });
        }
    });

    let mut results = results.into_inner().expect("result lock");
    results.sort_by_key(|(i, _)| *i);
    let rows: Vec<RunRow> = results.into_iter().flat_map(|(_, r)| r).collect();
    let aggregates = aggregate(&rows, &config.strategies);
    Ok(RunOutput { rows, aggregates })
}
