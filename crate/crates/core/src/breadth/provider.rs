//! Embedding providers and the per-provider vector cache.
//!
//! Three providers ship:
//!
//! * [`StubProvider`]: deterministic Gaussian vectors for tests. The vector
//!   for a sentence is `dim` draws from a standard normal using a
//!   `ChaCha8Rng` seeded with [`sentence_hash`] of the sentence (after XOR
//!   with the stub's seed, 0 by default).
//! * [`FileProvider`]: precomputed vectors keyed by sentence hash, in the
//!   CSV or binary layout described on [`read_embedding_file`].
//! * [`HttpProvider`]: the sidecar's `POST /embed` endpoint.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider request failed: {0}")]
    Transport(String),
    #[error("embedding provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("no precomputed vector for sentence hash {hash}")]
    Missing { hash: String },
    #[error("provider `{provider}` returned dimension {got}, expected {expected}")]
    Dimension { provider: String, expected: usize, got: usize },
    #[error("provider returned {got} vectors for {expected} sentences")]
    Count { expected: usize, got: usize },
    #[error("response came from provider `{got}`, expected `{expected}`")]
    ProviderMismatch { expected: String, got: String },
    #[error("non-finite value in embedding")]
    NonFinite,
    #[error("embedding file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("embedding I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EmbedError {
    /// Failures worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            EmbedError::Transport(_) => true,
            EmbedError::Status { status, .. } => *status >= 500 || *status == 429,
            _ => false,
        }
    }
}

/// First 8 bytes of SHA-256 over the UTF-8 sentence, big-endian. Its
/// 16-digit hex form equals the digest's hex prefix.
pub fn sentence_hash(sentence: &str) -> u64 {
    let digest = Sha256::digest(sentence.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn hash_hex(hash: u64) -> String {
    format!("{hash:016x}")
}

fn parse_hash(s: &str) -> Option<u64> {
    (s.len() == 16).then(|| u64::from_str_radix(s, 16).ok()).flatten()
}

/// Finite, fixed-length embedding with its Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self { values, norm })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// Model identifier plus version; keys the cache.
    fn provider_id(&self) -> &str;
    fn dim(&self) -> usize;
    /// One vector per sentence, in input order.
    fn embed_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

#[derive(Debug, Clone)]
pub struct StubProvider {
    dim: usize,
    seed: u64,
    id: String,
}

impl StubProvider {
    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, 0)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Self {
        Self { dim, seed, id: format!("stub-gaussian-v1/d{dim}/s{seed}") }
    }

    pub fn vector(&self, sentence: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(sentence_hash(sentence) ^ self.seed);
        (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

impl EmbeddingProvider for StubProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(sentences.iter().map(|s| self.vector(s)).collect())
    }
}

/// Contents of a precomputed-embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub provider_id: String,
    pub dim: usize,
    pub vectors: HashMap<u64, Vec<f64>>,
}

pub const BINARY_MAGIC: &[u8; 8] = b"SSEMB001";

/// Reads either layout, sniffing the binary magic.
///
/// CSV layout:
///
/// ```text
/// # provider_id=all-mpnet-base-v2
/// # dim=768
/// 0123456789abcdef,0.01,-0.2,...
/// ```
///
/// Binary layout (little-endian): the 8-byte magic `SSEMB001`, `u32` id
/// length, id bytes (UTF-8), `u32` dim, `u64` row count, then per row a
/// `u64` sentence hash followed by `dim` `f32` values.
pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingFile, EmbedError> {
    let path = path.as_ref();
    let io = |source| EmbedError::Io { path: path.into(), source };
    let fmt = |msg: String| EmbedError::Format { path: path.into(), msg };
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io)?;

    if bytes.starts_with(BINARY_MAGIC) {
        let mut cur = &bytes[8..];
        let mut take = |n: usize| -> Result<&[u8], EmbedError> {
            if cur.len() < n {
                return Err(fmt("truncated binary file".into()));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        let id_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let provider_id = String::from_utf8(take(id_len)?.to_vec()).map_err(|e| fmt(e.to_string()))?;
        let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut vectors = HashMap::new();
        for _ in 0..count {
            let hash = u64::from_le_bytes(take(8)?.try_into().unwrap());
            let raw = take(4 * dim)?;
            let v = raw.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect();
            vectors.insert(hash, v);
        }
        return Ok(EmbeddingFile { provider_id, dim, vectors });
    }

    let text = String::from_utf8(bytes).map_err(|e| fmt(e.to_string()))?;
    let (mut provider_id, mut dim) = (None, None);
    let mut vectors = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                match k.trim() {
                    "provider_id" => provider_id = Some(v.trim().to_string()),
                    "dim" => dim = Some(v.trim().parse::<usize>().map_err(|e| fmt(format!("bad dim: {e}")))?),
                    _ => {}
                }
            }
            continue;
        }
        let d = dim.ok_or_else(|| fmt("rows before `# dim=` header".into()))?;
        let mut fields = line.split(',');
        let hash = fields
            .next()
            .and_then(parse_hash)
            .ok_or_else(|| fmt(format!("line {}: bad sentence hash", i + 1)))?;
        let v: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| fmt(format!("line {}: {e}", i + 1)))?;
        if v.len() != d {
            return Err(fmt(format!("line {}: {} values, expected {d}", i + 1, v.len())));
        }
        vectors.insert(hash, v);
    }
    Ok(EmbeddingFile {
        provider_id: provider_id.ok_or_else(|| fmt("missing `# provider_id=` header".into()))?,
        dim: dim.ok_or_else(|| fmt("missing `# dim=` header".into()))?,
        vectors,
    })
}

/// Rows are written sorted by hash.
pub fn write_embedding_csv(path: impl AsRef<Path>, file: &EmbeddingFile) -> Result<(), EmbedError> {
    let path = path.as_ref();
    let io = |source| EmbedError::Io { path: path.into(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "# provider_id={}", file.provider_id).map_err(io)?;
    writeln!(w, "# dim={}", file.dim).map_err(io)?;
    let mut keys: Vec<_> = file.vectors.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        let row: Vec<String> = file.vectors[&k].iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", hash_hex(k), row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_embedding_binary(path: impl AsRef<Path>, file: &EmbeddingFile) -> Result<(), EmbedError> {
    let path = path.as_ref();
    let io = |source| EmbedError::Io { path: path.into(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut keys: Vec<_> = file.vectors.keys().copied().collect();
    keys.sort_unstable();
    let mut buf = Vec::with_capacity(32 + keys.len() * (8 + 4 * file.dim));
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(file.provider_id.len() as u32).to_le_bytes());
    buf.extend_from_slice(file.provider_id.as_bytes());
    buf.extend_from_slice(&(file.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(keys.len() as u64).to_le_bytes());
    for k in keys {
        buf.extend_from_slice(&k.to_le_bytes());
        for v in &file.vectors[&k] {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io)?;
    w.flush().map_err(io)
}

#[derive(Debug, Clone)]
pub struct FileProvider {
    file: EmbeddingFile,
}

impl FileProvider {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        Ok(Self { file: read_embedding_file(path)? })
    }

    pub fn from_file(file: EmbeddingFile) -> Self {
        Self { file }
    }
}

impl EmbeddingProvider for FileProvider {
    fn provider_id(&self) -> &str {
        &self.file.provider_id
    }

    fn dim(&self) -> usize {
        self.file.dim
    }

    fn embed_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        sentences
            .iter()
            .map(|s| {
                let h = sentence_hash(s);
                self.file.vectors.get(&h).cloned().ok_or_else(|| EmbedError::Missing { hash: hash_hex(h) })
            })
            .collect()
    }
}

#[derive(Debug, Serialize)]
pub struct EmbedRequest<'a> {
    pub sentences: &'a [&'a str],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub provider_id: String,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub provider_id: String,
    pub dim: usize,
}

/// Client for the sidecar's `POST /embed`. Identity and dimension are
/// taken from `GET /healthz` at connect time and checked on every response.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    base: String,
    client: reqwest::blocking::Client,
    provider_id: String,
    dim: usize,
}

impl HttpProvider {
    pub fn connect(base_url: &str, timeout: Duration) -> Result<Self, EmbedError> {
        let base = base_url.trim_end_matches('/').to_string();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let resp = client.get(format!("{base}/healthz")).send().map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EmbedError::Status { status: status.as_u16(), body: resp.text().unwrap_or_default() });
        }
        let health: Health = resp.json().map_err(|e| EmbedError::Transport(e.to_string()))?;
        Ok(Self { base, client, provider_id: health.provider_id, dim: health.dim })
    }
}

impl EmbeddingProvider for HttpProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let resp = self
            .client
            .post(format!("{}/embed", self.base))
            .json(&EmbedRequest { sentences })
            .send()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EmbedError::Status { status: status.as_u16(), body: resp.text().unwrap_or_default() });
        }
        let body: EmbedResponse = resp.json().map_err(|e| EmbedError::Transport(e.to_string()))?;
        if body.provider_id != self.provider_id {
            return Err(EmbedError::ProviderMismatch { expected: self.provider_id.clone(), got: body.provider_id });
        }
        if body.vectors.len() != sentences.len() {
            return Err(EmbedError::Count { expected: sentences.len(), got: body.vectors.len() });
        }
        if let Some(v) = body.vectors.iter().find(|v| v.len() != self.dim) {
            return Err(EmbedError::Dimension { provider: self.provider_id.clone(), expected: self.dim, got: v.len() });
        }
        Ok(body.vectors)
    }
}

/// Vectors keyed by sentence hash for a single provider.
///
/// Reads take a shared lock; inserts take the write lock. With a directory
/// the cache persists as `<dir>/<provider>.vectors.csv` in the CSV embedding
/// layout, and a file written for another provider or dimension is refused.
pub struct EmbeddingCache {
    provider_id: String,
    dim: usize,
    map: RwLock<HashMap<u64, Arc<EmbeddingVector>>>,
    path: Option<PathBuf>,
    unsaved: Mutex<Vec<u64>>,
}

fn cache_file_name(provider_id: &str) -> String {
    let safe: String =
        provider_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect();
    format!("{safe}.vectors.csv")
}

impl EmbeddingCache {
    pub fn in_memory(provider_id: &str, dim: usize) -> Self {
        Self {
            provider_id: provider_id.to_string(),
            dim,
            map: RwLock::new(HashMap::new()),
            path: None,
            unsaved: Mutex::new(Vec::new()),
        }
    }

    pub fn open(dir: impl AsRef<Path>, provider_id: &str, dim: usize) -> Result<Self, EmbedError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| EmbedError::Io { path: dir.into(), source })?;
        let path = dir.join(cache_file_name(provider_id));
        let mut cache = Self::in_memory(provider_id, dim);
        if path.exists() {
            let f = read_embedding_file(&path)?;
            if f.provider_id != provider_id || f.dim != dim {
                return Err(EmbedError::Format {
                    path,
                    msg: format!("cache belongs to `{}` (dim {}), not `{provider_id}` (dim {dim})", f.provider_id, f.dim),
                });
            }
            let map = cache.map.get_mut().expect("fresh lock");
            for (h, v) in f.vectors {
                map.insert(h, Arc::new(EmbeddingVector::new(v)?));
            }
        }
        cache.path = Some(path);
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, hash: u64) -> Option<Arc<EmbeddingVector>> {
        self.map.read().expect("cache lock").get(&hash).cloned()
    }

    fn insert(&self, hash: u64, v: EmbeddingVector) {
        let mut map = self.map.write().expect("cache lock");
        if map.insert(hash, Arc::new(v)).is_none() {
            self.unsaved.lock().expect("cache lock").push(hash);
        }
    }

    /// Append entries added since the last flush. No-op for in-memory caches.
    pub fn flush(&self) -> Result<(), EmbedError> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut pending = self.unsaved.lock().expect("cache lock");
        if pending.is_empty() {
            return Ok(());
        }
        let io = |source| EmbedError::Io { path: path.clone(), source };
        let fresh = !path.exists();
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        if fresh {
            writeln!(w, "# provider_id={}", self.provider_id).map_err(io)?;
            writeln!(w, "# dim={}", self.dim).map_err(io)?;
        }
        let map = self.map.read().expect("cache lock");
        pending.sort_unstable();
        for h in pending.drain(..) {
            if let Some(v) = map.get(&h) {
                let row: Vec<String> = v.values().iter().map(|x| x.to_string()).collect();
                writeln!(w, "{},{}", hash_hex(h), row.join(",")).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// Provider plus cache, batching, bounded concurrency, and retries.
pub struct Embedder<'p> {
    provider: &'p dyn EmbeddingProvider,
    cache: EmbeddingCache,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub retries: usize,
    pub retry_backoff: Duration,
}

impl<'p> Embedder<'p> {
    pub fn new(provider: &'p dyn EmbeddingProvider) -> Self {
        let cache = EmbeddingCache::in_memory(provider.provider_id(), provider.dim());
        Self::with_cache(provider, cache)
    }

    pub fn with_cache(provider: &'p dyn EmbeddingProvider, cache: EmbeddingCache) -> Self {
        Self { provider, cache, batch_size: 64, max_in_flight: 4, retries: 3, retry_backoff: Duration::from_millis(200) }
    }

    pub fn provider_id(&self) -> &str {
        self.provider.provider_id()
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    fn embed_with_retry(&self, batch: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut attempt = 0;
        loop {
            match self.provider.embed_batch(batch) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < self.retries => {
                    attempt += 1;
                    log::warn!("embedding batch failed ({e}); retry {attempt}/{}", self.retries);
                    std::thread::sleep(self.retry_backoff * attempt as u32);
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn fetch(&self, batch: &[(u64, &str)]) -> Result<(), EmbedError> {
        let texts: Vec<&str> = batch.iter().map(|(_, s)| *s).collect();
        let vectors = match self.embed_with_retry(&texts) {
            // provider batch limit is lower than ours: halve and resend
            Err(EmbedError::Status { status: 413, .. }) if batch.len() > 1 => {
                let (a, b) = batch.split_at(batch.len() / 2);
                self.fetch(a)?;
                return self.fetch(b);
            }
            other => other?,
        };
        if vectors.len() != texts.len() {
            return Err(EmbedError::Count { expected: texts.len(), got: vectors.len() });
        }
        for ((h, _), v) in batch.iter().zip(vectors) {
            if v.len() != self.provider.dim() {
                return Err(EmbedError::Dimension {
                    provider: self.provider.provider_id().to_string(),
                    expected: self.provider.dim(),
                    got: v.len(),
                });
            }
            self.cache.insert(*h, EmbeddingVector::new(v)?);
        }
        Ok(())
    }

    /// One vector per sentence, order-preserving. Each distinct sentence is
    /// sent to the provider at most once per cache lifetime. On failure the
    /// vectors gathered so far are still flushed to a persistent cache.
    pub fn embed(&self, sentences: &[&str]) -> Result<Vec<Arc<EmbeddingVector>>, EmbedError> {
        let hashes: Vec<u64> = sentences.iter().map(|s| sentence_hash(s)).collect();
        let mut missing: Vec<(u64, &str)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (h, s) in hashes.iter().zip(sentences) {
            if self.cache.get(*h).is_none() && seen.insert(*h) {
                missing.push((*h, s));
            }
        }

        let batches: Vec<&[(u64, &str)]> = missing.chunks(self.batch_size.max(1)).collect();
        let mut result = Ok(());
        for wave in batches.chunks(self.max_in_flight.max(1)) {
            let outcomes: Vec<Result<(), EmbedError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave.iter().map(|b| scope.spawn(move || self.fetch(b))).collect();
                handles.into_iter().map(|h| h.join().expect("embedding worker panicked")).collect()
            });
            if let Some(err) = outcomes.into_iter().find_map(Result::err) {
                result = Err(err);
                break;
            }
        }
        let flushed = self.cache.flush();
        result?;
        flushed?;

        hashes
            .iter()
            .map(|h| self.cache.get(*h).ok_or_else(|| EmbedError::Missing { hash: hash_hex(*h) }))
            .collect()
    }
}
