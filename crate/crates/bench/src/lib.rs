//! Corpus benchmark for the codec: per-image savings and similarity for
//! each strategy, aggregates, CSV output and a trade-off plot.

pub mod corpus;
pub mod plot;
pub mod report;
pub mod run;
pub mod similarity;

use std::path::PathBuf;

pub use corpus::{discover, load_image, CorpusEntry};
pub use plot::{tradeoff_svg, PlotError};
pub use report::{aggregate, read_csv, write_csv, Aggregate, RunRow};
pub use run::{run_corpus, EmbedderSpec, RunConfig, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("corpus has no eligible images")]
    EmptyCorpus,
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Adapter(PathBuf, #[source] corpus::AdapterError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv schema: {0}")]
    Schema(String),
    #[error("unknown embedder {0:?}; expected builtin or cmd:<command>")]
    BadEmbedder(String),
}
