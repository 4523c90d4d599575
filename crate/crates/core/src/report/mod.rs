//! Configured end-to-end runs: every (corpus, target, index) cell produces a
//! series CSV, trend fits, and a plot; a manifest records what happened.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! manifest.json
//! regression.csv
//! series/<corpus>/<target>/<index>.csv
//! plots/<corpus>/<target>/<index>.svg
//! tables/<corpus>/<target>/top_modifiers.csv   (rank x period)
//! tables/<corpus>/<target>/top_collocates.csv
//! counts/<corpus>/<target>_collocates.csv
//! ```

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod data;
pub mod pipeline;
pub mod plot;
pub mod regression;

pub use config::{all_indices, AnalysisConfig, ConfigError, CorpusSpec, Overrides, ProviderKind};
pub use data::{compute_series, top_table, Aggregation, CorpusData, Resources, SeriesContext, TopKind};
pub use pipeline::{
    cell_seed, load_corpora, make_provider, read_manifest, run_pipeline, run_with_data, CellRecord, CellStatus,
    Manifest, ReportBundle, TargetCounts, MANIFEST_FILE, REGRESSION_FILE,
};
pub use plot::{emit_plot, render_overlay, render_plot};
pub use regression::{read_regression_csv, regression_rows, write_regression_csv, RegressionRow, REGRESSION_HEADER};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] crate::corpus::IngestError),
    #[error(transparent)]
    Embed(#[from] crate::breadth::EmbedError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Fatal(String),
}

impl ReportError {
    /// 1 for configuration problems, 3 for anything else that stops a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) => 1,
            _ => 3,
        }
    }
}
