//! Cell orchestration, artifact emission, and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{AnalysisConfig, ProviderKind};
use super::data::{compute_series, top_table, Aggregation, CorpusData, Resources, SeriesContext, TopKind, ViewStats};
use super::plot::{render_overlay, render_plot};
use super::regression::{regression_rows, write_regression_csv, RegressionRow};
use super::ReportError;
use crate::breadth::{Embedder, EmbeddingCache, EmbeddingProvider, FileProvider, HttpProvider, StubProvider};
use crate::collocates::{write_top_long, write_top_table};
use crate::indices::{IndexKind, IndexSeries, SalienceTally};
use crate::lexicon::coverage;
use crate::stats::{fit_trend, StatsError, TrendFit};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REGRESSION_FILE: &str = "regression.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Skipped,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitSummary {
    pub model: String,
    pub estimator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub corpus: String,
    pub target: String,
    pub index: String,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    pub points: usize,
    pub masked: usize,
    pub out_of_scale: usize,
    pub fits: Vec<FitSummary>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub name: String,
    #[serde(flatten)]
    pub stats: ViewStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetCounts {
    pub raw: u64,
    pub parsed: u64,
    /// Years present in both views whose counts differ.
    pub mismatched_years: Vec<i32>,
}

impl TargetCounts {
    fn of(data: &CorpusData, target: &str) -> Self {
        let mut raw = SalienceTally::default();
        for d in &data.docs {
            raw.observe(d.year, &d.text, target);
        }
        let parsed = data.intensifiers.get(target).map(|t| t.per_year.clone()).unwrap_or_default();
        let mismatched_years = raw
            .per_year
            .iter()
            .filter_map(|(y, (hits, _))| parsed.get(y).filter(|(_, n)| n != hits).map(|_| *y))
            .collect();
        Self {
            raw: raw.per_year.values().map(|v| v.0).sum(),
            parsed: parsed.values().map(|v| v.1).sum(),
            mismatched_years,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub provider_id: Option<String>,
    pub corpora: Vec<CorpusRecord>,
    /// Share of collocate tokens covered by the norms, per corpus and target.
    pub coverage: BTreeMap<String, BTreeMap<String, Option<f64>>>,
    /// Target occurrences seen by the raw and parsed views, per corpus and
    /// target. Disagreement usually comes from differing sentence splits.
    pub target_counts: BTreeMap<String, BTreeMap<String, TargetCounts>>,
    pub cells: Vec<CellRecord>,
    /// CSV outputs keyed by path relative to the output directory.
    pub files: BTreeMap<String, FileEntry>,
    pub plots: Vec<String>,
    pub manifest_hash: String,
}

impl Manifest {
    /// SHA-256 of the manifest serialized with an empty `manifest_hash`.
    pub fn compute_hash(&self) -> String {
        let mut m = self.clone();
        m.manifest_hash.clear();
        hex::encode(Sha256::digest(serde_json::to_vec(&m).expect("manifest serializes")))
    }

    pub fn cell(&self, corpus: &str, target: &str, index: &str) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.corpus == corpus && c.target == target && c.index == index)
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub regression: Vec<RegressionRow>,
}

impl ReportBundle {
    /// 0 when every cell is ok or skipped, 2 when any cell failed.
    pub fn exit_code(&self) -> i32 {
        if self.manifest.count(CellStatus::Error) > 0 {
            2
        } else {
            0
        }
    }
}

/// Per-cell seed: first 8 bytes (LE) of SHA-256 over a domain tag, the
/// master seed, and NUL-separated labels.
pub fn cell_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"semshift/cell/v1");
    h.update(master.to_le_bytes());
    for p in parts {
        h.update([0u8]);
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn rel(parts: &[&str]) -> String {
    parts.join("/")
}

struct Output {
    dir: PathBuf,
    files: BTreeMap<String, FileEntry>,
    plots: Vec<String>,
}

impl Output {
    fn write(&mut self, rel_path: &str, bytes: &[u8]) -> Result<(), ReportError> {
        let path = self.dir.join(rel_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| ReportError::Io { path: parent.to_path_buf(), source })?;
        }
        std::fs::write(&path, bytes).map_err(|source| ReportError::Io { path, source })
    }

    fn csv(&mut self, rel_path: &str, bytes: Vec<u8>) -> Result<(), ReportError> {
        self.write(rel_path, &bytes)?;
        let rows = bytes.iter().filter(|&&b| b == b'\n').count().saturating_sub(1);
        self.files.insert(rel_path.to_string(), FileEntry { sha256: hex::encode(Sha256::digest(&bytes)), rows });
        Ok(())
    }

    fn svg(&mut self, rel_path: &str, text: &str) -> Result<(), ReportError> {
        self.write(rel_path, text.as_bytes())?;
        self.plots.push(rel_path.to_string());
        Ok(())
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, ReportError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Build the embedding provider the config asks for.
pub fn make_provider(cfg: &AnalysisConfig) -> Result<Box<dyn EmbeddingProvider>, ReportError> {
    let e = &cfg.embedding;
    Ok(match cfg.provider {
        ProviderKind::Stub => Box::new(StubProvider::new(e.stub_dim)),
        ProviderKind::File => {
            let p = e.file.as_ref().ok_or_else(|| ReportError::Fatal("provider `file` needs embedding.file".into()))?;
            Box::new(FileProvider::open(p)?)
        }
        ProviderKind::Http => Box::new(HttpProvider::connect(&e.url, Duration::from_secs(e.timeout_secs))?),
    })
}

fn make_embedder<'p>(cfg: &AnalysisConfig, provider: &'p dyn EmbeddingProvider) -> Result<Embedder<'p>, ReportError> {
    let e = &cfg.embedding;
    let mut emb = match &e.cache_dir {
        Some(dir) => Embedder::with_cache(provider, EmbeddingCache::open(dir, provider.provider_id(), provider.dim())?),
        None => Embedder::new(provider),
    };
    emb.batch_size = e.batch_size.max(1);
    emb.max_in_flight = e.max_in_flight.max(1);
    emb.retries = e.retries;
    Ok(emb)
}

/// Load every configured corpus, in config order.
pub fn load_corpora(cfg: &AnalysisConfig, res: &Resources) -> Result<Vec<CorpusData>, ReportError> {
    let window = cfg.study_window()?;
    let agg = Aggregation::from_config(cfg);
    cfg.corpora.iter().map(|spec| CorpusData::load(spec, window, &agg, res)).collect()
}

/// Validate, load, and run every cell; write all artifacts under the
/// configured output directory.
pub fn run_pipeline(cfg: &AnalysisConfig) -> Result<ReportBundle, ReportError> {
    cfg.validate()?;
    let res = Resources::load(cfg)?;
    let data = load_corpora(cfg, &res)?;
    run_with_data(cfg, &res, &data)
}

struct CellOutcome {
    record: CellRecord,
    series: Option<IndexSeries>,
    fits: Vec<TrendFit>,
    plot: Option<String>,
}

fn skip_reason(e: &StatsError) -> bool {
    matches!(e, StatsError::TooFewPoints { .. } | StatsError::PerfectFit)
}

fn run_cell(
    cfg: &AnalysisConfig,
    data: &CorpusData,
    target: &str,
    index: &IndexKind,
    ctx: &SeriesContext<'_>,
    embed_error: Option<&str>,
) -> CellOutcome {
    let mut record = CellRecord {
        corpus: data.name.clone(),
        target: target.to_string(),
        index: index.to_string(),
        status: CellStatus::Ok,
        message: None,
        points: 0,
        masked: 0,
        out_of_scale: 0,
        fits: Vec::new(),
        files: Vec::new(),
    };
    let fail = |mut record: CellRecord, status, msg: String| {
        record.status = status;
        record.message = Some(msg);
        CellOutcome { record, series: None, fits: Vec::new(), plot: None }
    };
    if let (IndexKind::Breadth, Some(msg)) = (index, embed_error) {
        return fail(record, CellStatus::Error, format!("embedding provider unavailable: {msg}"));
    }
    let seed = cfg.seed;
    let ctx = SeriesContext {
        breadth: crate::breadth::BreadthParams {
            seed: cell_seed(seed, &["breadth", &data.name, target]),
            ..ctx.breadth
        },
        ..*ctx
    };
    let mut series = match compute_series(data, target, index, &ctx) {
        Ok(s) => s,
        Err(msg) => return fail(record, CellStatus::Error, msg),
    };
    let before = series.len();
    series.mask(&cfg.mask_for(&data.name, target, index));
    record.masked = before - series.len();
    record.points = series.len();
    record.out_of_scale = series.out_of_scale().count();
    if series.is_empty() {
        record.status = CellStatus::Skipped;
        record.message = Some("no data points".into());
        return CellOutcome { record, series: Some(series), fits: Vec::new(), plot: None };
    }

    let mut fits = Vec::new();
    for model in cfg.models_for(index) {
        let mut opts = cfg.trend_options();
        opts.seed = cell_seed(seed, &["dw", &data.name, target, &index.to_string(), &model.to_string()]);
        match fit_trend(&series, model, &opts) {
            Ok(fit) => {
                record.fits.push(FitSummary { model: fit.model.to_string(), estimator: fit.estimator.to_string() });
                fits.push(fit);
            }
            Err(e) if skip_reason(&e) => {
                if record.status == CellStatus::Ok {
                    record.status = CellStatus::Skipped;
                    record.message = Some(format!("{model} fit: {e}"));
                }
            }
            Err(e) => {
                record.status = CellStatus::Error;
                record.message = Some(format!("{model} fit: {e}"));
            }
        }
    }
    let plot = cfg.plots.enabled.then(|| {
        let shown = fits.iter().rev().find(|f| f.model == crate::stats::TrendModel::Quadratic).or(fits.first());
        render_plot(&series, shown, &format!("{} / {} / {}", data.name, target, index))
    });
    CellOutcome { record, series: Some(series), fits, plot }
}

/// Same as [`run_pipeline`] but with corpora already in memory.
pub fn run_with_data(cfg: &AnalysisConfig, res: &Resources, data: &[CorpusData]) -> Result<ReportBundle, ReportError> {
    cfg.validate_settings()?;
    let targets = cfg.all_targets();
    let wants_breadth = cfg.indices.contains(&IndexKind::Breadth);

    let (provider, embed_error) = if wants_breadth {
        match make_provider(cfg) {
            Ok(p) => (Some(p), None),
            Err(e) => {
                log::error!("embedding provider: {e}");
                (None, Some(e.to_string()))
            }
        }
    } else {
        (None, None)
    };
    let embedder = provider.as_deref().map(|p| make_embedder(cfg, p)).transpose()?;
    let ctx = SeriesContext {
        res,
        min_matched: cfg.min_matched,
        scheme: cfg.interval_scheme()?,
        breadth: cfg.breadth_params(),
        embedder: embedder.as_ref(),
    };

    let cells: Vec<(&CorpusData, &str, &IndexKind)> = data
        .iter()
        .flat_map(|d| targets.iter().flat_map(move |t| cfg.indices.iter().map(move |i| (d, t.as_str(), i))))
        .collect();
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(d, t, i)| run_cell(cfg, d, t, i, &ctx, embed_error.as_deref()))
        .collect();
    if let Some(e) = &embedder {
        if let Err(err) = e.cache().flush() {
            log::warn!("embedding cache flush failed: {err}");
        }
    }

    let mut out = Output { dir: cfg.output.clone(), files: BTreeMap::new(), plots: Vec::new() };
    std::fs::create_dir_all(&out.dir).map_err(|source| ReportError::Io { path: out.dir.clone(), source })?;
    let mut records = Vec::with_capacity(outcomes.len());
    let mut regression = Vec::new();
    for o in &outcomes {
        let mut record = o.record.clone();
        let idx = o.record.index.as_str();
        let slug = idx.replace(':', "-");
        if let Some(s) = &o.series {
            let path = rel(&["series", &record.corpus, &record.target, &format!("{slug}.csv")]);
            out.csv(&path, csv_bytes(|b| s.write_csv(b))?)?;
            record.files.push(path);
        }
        if let Some(svg) = &o.plot {
            let path = rel(&["plots", &record.corpus, &record.target, &format!("{slug}.svg")]);
            out.svg(&path, svg)?;
            record.files.push(path);
        }
        for f in &o.fits {
            regression.extend(regression_rows(idx, &record.target, &record.corpus, f));
        }
        records.push(record);
    }
    out.csv(REGRESSION_FILE, csv_bytes(|b| write_regression_csv(&regression, b))?)?;

    for d in data {
        for t in &targets {
            for what in [TopKind::Modifiers, TopKind::Collocates] {
                let table = top_table(d, t, what, cfg.top_k, cfg.top_period);
                let stem = what.file_stem();
                let wide = rel(&["tables", &d.name, t, &format!("{stem}.csv")]);
                out.csv(&wide, csv_bytes(|b| write_top_table(&table, cfg.top_k, b))?)?;
                let long = rel(&["tables", &d.name, t, &format!("{stem}_long.csv")]);
                out.csv(&long, csv_bytes(|b| write_top_long(&table, b))?)?;
            }
            let counts = rel(&["counts", &d.name, &format!("{t}_collocates.csv")]);
            out.csv(&counts, csv_bytes(|b| d.counts(t).write_csv(b))?)?;
        }
    }

    if cfg.plots.enabled && cfg.plots.overlay && data.len() > 1 {
        for t in &targets {
            for i in &cfg.indices {
                let members: Vec<(&str, &IndexSeries)> = outcomes
                    .iter()
                    .filter(|o| o.record.target == *t && o.record.index == i.to_string())
                    .filter_map(|o| o.series.as_ref().map(|s| (o.record.corpus.as_str(), s)))
                    .collect();
                if members.iter().any(|(_, s)| !s.is_empty()) {
                    let path = rel(&["plots", "overlay", t, &format!("{}.svg", i.slug())]);
                    out.svg(&path, &render_overlay(&members, &format!("{t} / {i}")))?;
                }
            }
        }
    }

    let mut cov = BTreeMap::new();
    if let Some(norms) = &res.norms {
        for d in data {
            let per: BTreeMap<String, Option<f64>> =
                targets.iter().map(|t| (t.clone(), d.counts.get(t).and_then(|c| coverage(norms, c)))).collect();
            cov.insert(d.name.clone(), per);
        }
    }
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        provider_id: embedder.as_ref().map(|e| e.provider_id().to_string()),
        corpora: data.iter().map(|d| CorpusRecord { name: d.name.clone(), stats: d.stats }).collect(),
        coverage: cov,
        target_counts: data
            .iter()
            .map(|d| (d.name.clone(), targets.iter().map(|t| (t.clone(), TargetCounts::of(d, t))).collect()))
            .collect(),
        cells: records,
        files: out.files,
        plots: out.plots,
        manifest_hash: String::new(),
    };
    manifest.manifest_hash = manifest.compute_hash();
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let path = cfg.output.join(MANIFEST_FILE);
    std::fs::write(&path, json).map_err(|source| ReportError::Io { path, source })?;

    for c in manifest.cells.iter().filter(|c| c.status != CellStatus::Ok) {
        log::warn!("{}/{}/{}: {:?} {}", c.corpus, c.target, c.index, c.status, c.message.as_deref().unwrap_or(""));
    }
    Ok(ReportBundle { out_dir: cfg.output.clone(), manifest, regression })
}

pub fn read_manifest(path: &Path) -> Result<Manifest, ReportError> {
    let bytes = std::fs::read(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_slice(&bytes).map_err(|e| ReportError::Fatal(format!("{}: {e}", path.display())))
}
