//! Analysis configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! seed = 42
//! output = "out"
//! targets = ["mental health", "mental illness"]
//! indices = ["valence", "arousal", "breadth", "intensifier", "theme:pathology", "salience"]
//! provider = "stub"
//!
//! [lexicon]
//! norms = "norms.csv"
//!
//! [[corpora]]
//! name = "toy"
//! raw = "raw.jsonl"
//! lemmas = "lemmas.jsonl"
//! conllu = "parsed.conllu"
//!
//! [[year_mask]]
//! corpus = "toy"
//! index = "valence"
//! ranges = [[1970, 1989]]
//! ```
//!
//! Relative paths resolve against the config file's directory. Targets may
//! be given as phrases or fused tokens; both fuse to `mental_health`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::breadth::{BreadthParams, IntervalScheme};
use crate::collocates::{WindowSpace, DEFAULT_WINDOW};
use crate::corpus::{fused_token, StudyWindow};
use crate::indices::{IndexKind, DEFAULT_MODIFIER_RELATION};
use crate::lexicon::LexiconError;
use crate::stats::{TrendModel, TrendOptions, DEFAULT_PERMUTATIONS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("{what} not found: {path}")]
    MissingPath { what: String, path: PathBuf },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Stub,
    File,
    Http,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Stub => "stub",
            ProviderKind::File => "file",
            ProviderKind::Http => "http",
        })
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub" => Ok(Self::Stub),
            "file" => Ok(Self::File),
            "http" => Ok(Self::Http),
            other => Err(format!("unknown provider `{other}` (expected file|http|stub)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub name: String,
    pub raw: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub conllu: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreadthConfig {
    pub interval_len: i32,
    pub sample_size: usize,
    pub repeats: usize,
    pub window: (i32, i32),
}

impl Default for BreadthConfig {
    fn default() -> Self {
        let s = IntervalScheme::default();
        let p = BreadthParams::default();
        Self { interval_len: s.len, sample_size: p.sample_size, repeats: p.repeats, window: (s.start, s.end) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Dimension of the stub provider's vectors.
    pub stub_dim: usize,
    /// Precomputed vectors for the file provider.
    pub file: Option<PathBuf>,
    /// Sidecar base URL for the HTTP provider.
    pub url: String,
    /// Persistent cache directory; in-memory when absent.
    pub cache_dir: Option<PathBuf>,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub retries: usize,
    pub timeout_secs: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            stub_dim: 384,
            file: None,
            url: "http://127.0.0.1:8765".into(),
            cache_dir: None,
            batch_size: 64,
            max_in_flight: 4,
            retries: 3,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconConfig {
    pub norms: Option<PathBuf>,
    /// Extra theme dictionaries by name; `pathology` is bundled.
    pub themes: BTreeMap<String, PathBuf>,
    pub intensifiers: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub dw_alpha: f64,
    pub dw_permutations: usize,
    pub allow_gls: bool,
    /// Indices that also get a quadratic fit.
    pub quadratic: Vec<IndexKind>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { dw_alpha: 0.05, dw_permutations: DEFAULT_PERMUTATIONS, allow_gls: true, quadratic: vec![IndexKind::Intensifier] }
    }
}

/// Points to drop before writing and fitting. Missing selectors match all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearMask {
    pub corpus: Option<String>,
    pub index: Option<IndexKind>,
    pub target: Option<String>,
    pub ranges: Vec<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    pub enabled: bool,
    /// Also draw one plot per (target, index) overlaying every corpus.
    pub overlay: bool,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self { enabled: true, overlay: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub corpora: Vec<CorpusSpec>,
    pub targets: Vec<String>,
    /// Concepts analysed alongside the targets for comparison.
    pub control_targets: Vec<String>,
    pub indices: Vec<IndexKind>,
    pub window: usize,
    pub window_space: WindowSpace,
    pub study_window: (i32, i32),
    pub min_matched: u64,
    pub modifier_relation: String,
    pub top_k: usize,
    pub top_period: u32,
    pub provider: ProviderKind,
    pub breadth: BreadthConfig,
    pub embedding: EmbeddingConfig,
    pub lexicon: LexiconConfig,
    pub stats: StatsConfig,
    pub year_mask: Vec<YearMask>,
    pub plots: PlotConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let w = StudyWindow::default();
        Self {
            seed: 0,
            output: PathBuf::from("semshift-out"),
            corpora: Vec::new(),
            targets: Vec::new(),
            control_targets: Vec::new(),
            indices: all_indices(),
            window: DEFAULT_WINDOW,
            window_space: WindowSpace::Lemma,
            study_window: (w.start, w.end),
            min_matched: 1,
            modifier_relation: DEFAULT_MODIFIER_RELATION.into(),
            top_k: 10,
            top_period: 10,
            provider: ProviderKind::Stub,
            breadth: BreadthConfig::default(),
            embedding: EmbeddingConfig::default(),
            lexicon: LexiconConfig::default(),
            stats: StatsConfig::default(),
            year_mask: Vec::new(),
            plots: PlotConfig::default(),
        }
    }
}

pub fn all_indices() -> Vec<IndexKind> {
    vec![
        IndexKind::Valence,
        IndexKind::Arousal,
        IndexKind::Breadth,
        IndexKind::Intensifier,
        IndexKind::Theme("pathology".into()),
        IndexKind::Salience,
    ]
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub targets: Vec<String>,
    pub indices: Vec<IndexKind>,
    pub seed: Option<u64>,
    pub provider: Option<ProviderKind>,
    pub output: Option<PathBuf>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl AnalysisConfig {
    pub fn from_toml(src: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self =
            toml::from_str(src).map_err(|e| ConfigError::Parse { path: path.into(), source: Box::new(e) })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&src, path)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output);
        for c in &mut self.corpora {
            for p in [&mut c.raw, &mut c.lemmas, &mut c.conllu].into_iter().flatten() {
                resolve(base, p);
            }
        }
        let lex = &mut self.lexicon;
        for p in [&mut lex.norms, &mut lex.intensifiers, &mut lex.stopwords].into_iter().flatten() {
            resolve(base, p);
        }
        for p in lex.themes.values_mut() {
            resolve(base, p);
        }
        for p in [&mut self.embedding.file, &mut self.embedding.cache_dir].into_iter().flatten() {
            resolve(base, p);
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        if !o.targets.is_empty() {
            self.targets = o.targets;
            self.control_targets.clear();
        }
        if !o.indices.is_empty() {
            self.indices = o.indices;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = o.provider {
            self.provider = p;
        }
        if let Some(out) = o.output {
            self.output = out;
        }
    }

    /// Targets then control targets, as fused tokens, without duplicates.
    pub fn all_targets(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in self.targets.iter().chain(&self.control_targets) {
            let tok = fused_token(&t.replace('_', " "));
            if !out.contains(&tok) {
                out.push(tok);
            }
        }
        out
    }

    /// Multiword phrases to fuse in the raw view.
    pub fn target_phrases(&self) -> Vec<String> {
        self.all_targets().iter().map(|t| t.replace('_', " ")).collect()
    }

    pub fn study_window(&self) -> Result<StudyWindow, ConfigError> {
        StudyWindow::new(self.study_window.0, self.study_window.1).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn interval_scheme(&self) -> Result<IntervalScheme, ConfigError> {
        let b = &self.breadth;
        IntervalScheme::new(b.window.0, b.window.1, b.interval_len).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn breadth_params(&self) -> BreadthParams {
        BreadthParams { sample_size: self.breadth.sample_size, repeats: self.breadth.repeats, seed: self.seed }
    }

    pub fn trend_options(&self) -> TrendOptions {
        TrendOptions {
            dw_alpha: self.stats.dw_alpha,
            dw_permutations: self.stats.dw_permutations,
            seed: self.seed,
            allow_gls: self.stats.allow_gls,
        }
    }

    pub fn models_for(&self, index: &IndexKind) -> Vec<TrendModel> {
        let mut m = vec![TrendModel::Linear];
        if self.stats.quadratic.contains(index) {
            m.push(TrendModel::Quadratic);
        }
        m
    }

    /// Inclusive year ranges masked for one cell.
    pub fn mask_for(&self, corpus: &str, target: &str, index: &IndexKind) -> Vec<(i32, i32)> {
        self.year_mask
            .iter()
            .filter(|m| m.corpus.as_deref().is_none_or(|c| c == corpus))
            .filter(|m| m.index.as_ref().is_none_or(|i| i == index))
            .filter(|m| m.target.as_deref().is_none_or(|t| fused_token(&t.replace('_', " ")) == target))
            .flat_map(|m| m.ranges.iter().copied())
            .collect()
    }

    fn needs(&self, pred: impl Fn(&IndexKind) -> bool) -> bool {
        self.indices.iter().any(pred)
    }

    pub fn needs_raw(&self) -> bool {
        self.needs(|i| matches!(i, IndexKind::Salience | IndexKind::Breadth))
    }

    pub fn needs_lemmas(&self) -> bool {
        // top collocate tables come from the lemma view as well
        true
    }

    pub fn needs_conllu(&self) -> bool {
        true
    }

    /// Everything is checked before any corpus is read.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.corpora.is_empty() {
            return invalid("no corpora configured".into());
        }
        self.validate_settings()?;
        let mut names = std::collections::BTreeSet::new();
        for c in &self.corpora {
            if c.name.is_empty() || c.name.contains(['/', '\\']) || !names.insert(&c.name) {
                return invalid(format!("corpus name `{}` is empty, duplicated, or contains a path separator", c.name));
            }
        }
        self.validate_paths()
    }

    /// Checks that need no file system access.
    pub fn validate_settings(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.all_targets().is_empty() {
            return invalid("no targets configured".into());
        }
        if self.indices.is_empty() {
            return invalid("no indices selected".into());
        }
        if self.window < 1 {
            return invalid("window must be at least 1".into());
        }
        if self.top_k < 1 || self.top_period < 1 {
            return invalid("top_k and top_period must be positive".into());
        }
        self.study_window()?;
        self.interval_scheme()?;
        if self.breadth.sample_size < 2 || self.breadth.repeats < 1 {
            return invalid(format!(
                "breadth needs sample_size >= 2 and repeats >= 1 (got {} and {})",
                self.breadth.sample_size, self.breadth.repeats
            ));
        }
        if !(0.0..=1.0).contains(&self.stats.dw_alpha) || self.stats.dw_permutations == 0 {
            return invalid("stats.dw_alpha must lie in [0, 1] and dw_permutations be positive".into());
        }
        Ok(())
    }

    fn validate_paths(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let exists = |what: String, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath { what, path: p.to_path_buf() })
            }
        };
        for c in &self.corpora {
            let views = [
                ("raw corpus", &c.raw, self.needs_raw()),
                ("lemma corpus", &c.lemmas, self.needs_lemmas()),
                ("parsed corpus", &c.conllu, self.needs_conllu()),
            ];
            for (what, path, needed) in views {
                match path {
                    Some(p) => exists(format!("{what} for `{}`", c.name), p)?,
                    None if needed => {
                        return invalid(format!("corpus `{}` has no {what} but the selected outputs need it", c.name))
                    }
                    None => {}
                }
            }
        }
        if self.needs(|i| matches!(i, IndexKind::Valence | IndexKind::Arousal)) {
            match &self.lexicon.norms {
                Some(p) => exists("norms file".into(), p)?,
                None => return invalid("valence/arousal selected but lexicon.norms is not set".into()),
            }
        }
        for i in &self.indices {
            if let IndexKind::Theme(name) = i {
                if name != "pathology" && !self.lexicon.themes.contains_key(name) {
                    return invalid(format!("theme `{name}` has no dictionary in lexicon.themes"));
                }
            }
        }
        for (name, p) in &self.lexicon.themes {
            exists(format!("theme dictionary `{name}`"), p)?;
        }
        if let Some(p) = &self.lexicon.intensifiers {
            exists("intensifier list".into(), p)?;
        }
        if let Some(p) = &self.lexicon.stopwords {
            exists("stop-word list".into(), p)?;
        }
        if self.needs(|i| *i == IndexKind::Breadth) {
            match self.provider {
                ProviderKind::File => match &self.embedding.file {
                    Some(p) => exists("embedding file".into(), p)?,
                    None => return invalid("provider `file` needs embedding.file".into()),
                },
                ProviderKind::Stub if self.embedding.stub_dim == 0 => {
                    return invalid("embedding.stub_dim must be positive".into())
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let src = r#"
            seed = 7
            targets = ["mental health", "trauma"]
            indices = ["valence", "theme"]
            [lexicon]
            norms = "n.csv"
            [[corpora]]
            name = "c"
            raw = "r.jsonl"
            [[year_mask]]
            index = "valence"
            ranges = [[1970, 1989]]
        "#;
        let cfg = AnalysisConfig::from_toml(src, Path::new("/data/run.toml")).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.corpora[0].raw.as_deref(), Some(Path::new("/data/r.jsonl")));
        assert_eq!(cfg.all_targets(), ["mental_health", "trauma"]);
        assert_eq!(cfg.indices[1], IndexKind::Theme("pathology".into()));
        assert_eq!(cfg.mask_for("c", "mental_health", &IndexKind::Valence), [(1970, 1989)]);
        assert!(cfg.mask_for("c", "mental_health", &IndexKind::Arousal).is_empty());
        assert_eq!(cfg.window, 5);
        assert_eq!(cfg.breadth.sample_size, 50);
        assert_eq!(cfg.models_for(&IndexKind::Intensifier).len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(AnalysisConfig::from_toml("sede = 1", Path::new("x.toml")), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn missing_norms_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.jsonl");
        std::fs::write(&f, "").unwrap();
        let mut cfg = AnalysisConfig {
            targets: vec!["x".into()],
            corpora: vec![CorpusSpec { name: "c".into(), raw: Some(f.clone()), lemmas: Some(f.clone()), conllu: Some(f) }],
            ..Default::default()
        };
        cfg.lexicon.norms = Some(dir.path().join("missing.csv"));
        assert!(matches!(cfg.validate(), Err(ConfigError::MissingPath { .. })));
        cfg.lexicon.norms = None;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
        cfg.indices = vec![IndexKind::Salience];
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_win_and_hash_ignores_output() {
        let mut cfg = AnalysisConfig { targets: vec!["a".into()], ..Default::default() };
        let h = cfg.hash();
        cfg.apply(Overrides { output: Some("elsewhere".into()), ..Default::default() });
        assert_eq!(cfg.hash(), h);
        cfg.apply(Overrides { seed: Some(9), targets: vec!["b".into()], ..Default::default() });
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.all_targets(), ["b"]);
        assert_ne!(cfg.hash(), h);
    }
}
