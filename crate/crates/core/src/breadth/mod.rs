//! Breadth: semantic diversity of a target's usage contexts.
//!
//! Target sentences are pooled per interval, sampled `R` times (up to `S`
//! sentences each, without replacement), embedded, and scored by the mean
//! pairwise cosine distance. The interval value is the mean over repeats.

mod provider;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{split_sentences, Document};
use crate::indices::{token_is_target, IndexKind, IndexSeries, SeriesPoint};

pub use provider::{
    hash_hex, read_embedding_file, sentence_hash, write_embedding_binary, write_embedding_csv, EmbedError, EmbedRequest,
    EmbedResponse, Embedder, EmbeddingCache, EmbeddingFile, EmbeddingProvider, EmbeddingVector, FileProvider, Health,
    HttpProvider, StubProvider, BINARY_MAGIC,
};

pub const DEFAULT_SAMPLE_SIZE: usize = 50;
pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Error)]
pub enum BreadthError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("zero-norm embedding for sentence: {sentence:?}")]
    ZeroNorm { sentence: String },
    #[error("embedding {index} has dimension {got}, expected {expected}")]
    Dimension { index: usize, expected: usize, got: usize },
    #[error("need at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("invalid sampling parameters: S = {sample_size}, R = {repeats} (need S >= 2, R >= 1)")]
    InvalidSampling { sample_size: usize, repeats: usize },
    #[error("invalid interval scheme {start}..={end} step {len}")]
    InvalidIntervals { start: i32, end: i32, len: i32 },
}

/// Consecutive fixed-length intervals covering `start..=end`, labelled by
/// their first year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalScheme {
    pub start: i32,
    pub end: i32,
    pub len: i32,
}

impl Default for IntervalScheme {
    fn default() -> Self {
        Self { start: 1970, end: 2014, len: 5 }
    }
}

impl IntervalScheme {
    pub fn new(start: i32, end: i32, len: i32) -> Result<Self, BreadthError> {
        if len < 1 || end < start {
            return Err(BreadthError::InvalidIntervals { start, end, len });
        }
        Ok(Self { start, end, len })
    }

    pub fn starts(&self) -> Vec<i32> {
        (self.start..=self.end).step_by(self.len as usize).collect()
    }

    /// Interval start for a year, or `None` outside the scheme.
    pub fn interval_of(&self, year: i32) -> Option<i32> {
        (self.start..=self.end)
            .contains(&year)
            .then(|| self.start + (year - self.start).div_euclid(self.len) * self.len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSentence {
    pub doc_id: String,
    pub year: i32,
    pub text: String,
}

pub fn sentence_has_target(sentence: &str, target: &str) -> bool {
    sentence.split_whitespace().any(|t| token_is_target(t, target))
}

/// Every interval of the scheme is a key; intervals without target
/// sentences map to an empty pool. Pools keep corpus order.
pub fn collect_target_sentences<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    target: &str,
    scheme: &IntervalScheme,
) -> BTreeMap<i32, Vec<TargetSentence>> {
    let mut pools: BTreeMap<i32, Vec<TargetSentence>> = scheme.starts().into_iter().map(|s| (s, Vec::new())).collect();
    for doc in docs {
        let Some(interval) = scheme.interval_of(doc.year) else { continue };
        for s in split_sentences(&doc.text) {
            if sentence_has_target(s, target) {
                pools.entry(interval).or_default().push(TargetSentence {
                    doc_id: doc.doc_id.clone(),
                    year: doc.year,
                    text: s.to_string(),
                });
            }
        }
    }
    pools
}

/// ChaCha8 seed for one (interval, repeat): the first 8 bytes, read
/// little-endian, of SHA-256 over `b"semshift/breadth/v1"`, then
/// `master_seed` (u64 LE), `interval_start` (i32 LE), `repeat_id` (u32 LE).
pub fn derive_subseed(master_seed: u64, interval_start: i32, repeat_id: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(b"semshift/breadth/v1");
    h.update(master_seed.to_le_bytes());
    h.update(interval_start.to_le_bytes());
    h.update(repeat_id.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentenceSample {
    pub interval_start: i32,
    /// 1-based.
    pub repeat_id: u32,
    /// Sampled pool positions, ascending.
    pub indices: Vec<usize>,
    pub sentences: Vec<TargetSentence>,
}

impl SentenceSample {
    /// A sample needs at least one pair.
    pub fn usable(&self) -> bool {
        self.sentences.len() >= 2
    }
}

/// `repeats` samples of `min(sample_size, pool.len())` sentences drawn
/// uniformly without replacement. A pool no larger than `sample_size` is
/// taken whole.
pub fn sample_sentences(
    pool: &[TargetSentence],
    interval_start: i32,
    sample_size: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<SentenceSample>, BreadthError> {
    if sample_size < 2 || repeats < 1 {
        return Err(BreadthError::InvalidSampling { sample_size, repeats });
    }
    Ok((1..=repeats as u32)
        .map(|repeat_id| {
            let indices: Vec<usize> = if pool.len() <= sample_size {
                (0..pool.len()).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_subseed(seed, interval_start, repeat_id));
                let mut idx = rand::seq::index::sample(&mut rng, pool.len(), sample_size).into_vec();
                idx.sort_unstable();
                idx
            };
            let sentences = indices.iter().map(|&i| pool[i].clone()).collect();
            SentenceSample { interval_start, repeat_id, indices, sentences }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseDistance {
    pub mean: f64,
    pub pairs: usize,
}

/// Mean of `1 − cos(u, v)` over the n(n−1)/2 unordered pairs. The cosine
/// is `u·v / √(‖u‖²‖v‖²)`, so identical vectors give exactly 0. Errors
/// carry the offending position so callers can name the sentence.
pub fn mean_pairwise_distance(vectors: &[&[f64]]) -> Result<PairwiseDistance, PairwiseError> {
    let n = vectors.len();
    if n < 2 {
        return Err(PairwiseError::TooFew(n));
    }
    let d = vectors[0].len();
    let mut sq = Vec::with_capacity(n);
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != d {
            return Err(PairwiseError::Dimension { index: i, expected: d, got: v.len() });
        }
        let s: f64 = v.iter().map(|x| x * x).sum();
        if s == 0.0 {
            return Err(PairwiseError::ZeroNorm(i));
        }
        sq.push(s);
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = vectors[i].iter().zip(vectors[j]).map(|(a, b)| a * b).sum();
            total += 1.0 - dot / (sq[i] * sq[j]).sqrt();
            pairs += 1;
        }
    }
    Ok(PairwiseDistance { mean: total / pairs as f64, pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PairwiseError {
    #[error("need at least 2 vectors, got {0}")]
    TooFew(usize),
    #[error("vector {0} has zero norm")]
    ZeroNorm(usize),
    #[error("vector {index} has dimension {got}, expected {expected}")]
    Dimension { index: usize, expected: usize, got: usize },
}

fn sample_distance(sample: &SentenceSample, vectors: &[&[f64]]) -> Result<PairwiseDistance, BreadthError> {
    mean_pairwise_distance(vectors).map_err(|e| match e {
        PairwiseError::TooFew(n) => BreadthError::TooFewVectors(n),
        PairwiseError::ZeroNorm(i) => BreadthError::ZeroNorm { sentence: sample.sentences[i].text.clone() },
        PairwiseError::Dimension { index, expected, got } => BreadthError::Dimension { index, expected, got },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreadthParams {
    pub sample_size: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BreadthParams {
    fn default() -> Self {
        Self { sample_size: DEFAULT_SAMPLE_SIZE, repeats: DEFAULT_REPEATS, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalBreadth {
    pub interval_start: i32,
    pub pool_size: usize,
    pub repeat_means: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct BreadthResult {
    pub series: IndexSeries,
    pub intervals: Vec<IntervalBreadth>,
    /// Interval starts whose value exceeds 1 (kept, not clamped).
    pub above_one: Vec<i32>,
}

/// Intervals with fewer than two sentences are absent from the series.
/// Point `n` is the pool size.
pub fn breadth_series(
    pools: &BTreeMap<i32, Vec<TargetSentence>>,
    target: &str,
    embedder: &Embedder<'_>,
    params: &BreadthParams,
) -> Result<BreadthResult, BreadthError> {
    let mut intervals = Vec::new();
    for (&start, pool) in pools {
        if pool.len() < 2 {
            continue;
        }
        let samples = sample_sentences(pool, start, params.sample_size, params.repeats, params.seed)?;
        // every repeat draws from the same pool, so embed the pool entries in use once
        let mut used: Vec<usize> = samples.iter().flat_map(|s| s.indices.iter().copied()).collect();
        used.sort_unstable();
        used.dedup();
        let texts: Vec<&str> = used.iter().map(|&i| pool[i].text.as_str()).collect();
        let embedded = embedder.embed(&texts)?;
        let by_index: BTreeMap<usize, &[f64]> = used.iter().copied().zip(embedded.iter().map(|v| v.values())).collect();

        let repeat_means: Vec<f64> = samples
            .par_iter()
            .map(|s| {
                let vs: Vec<&[f64]> = s.indices.iter().map(|i| by_index[i]).collect();
                sample_distance(s, &vs).map(|d| d.mean)
            })
            .collect::<Result<_, _>>()?;
        let value = repeat_means.iter().sum::<f64>() / repeat_means.len() as f64;
        intervals.push(IntervalBreadth { interval_start: start, pool_size: pool.len(), repeat_means, value });
    }

    let above_one: Vec<i32> = intervals.iter().filter(|i| i.value > 1.0).map(|i| i.interval_start).collect();
    for start in &above_one {
        log::warn!("breadth for `{target}` in interval {start} exceeds 1 (reported unclamped)");
    }
    let series = IndexSeries::from_points(
        target,
        IndexKind::Breadth,
        intervals.iter().map(|i| SeriesPoint { time_unit: i.interval_start, value: i.value, n: i.pool_size as u64 }),
    );
    Ok(BreadthResult { series, intervals, above_one })
}
