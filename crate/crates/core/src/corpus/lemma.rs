use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::{Path, PathBuf};

use log::warn;
use serde::Deserialize;

use super::{IngestError, LoadStats, StudyWindow};

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Token filter that establishes the lemma-view invariants: lowercase, no
/// stop words, no tokens without a single alphabetic character.
#[derive(Debug, Clone)]
pub struct LemmaFilter {
    stopwords: HashSet<String>,
}

impl Default for LemmaFilter {
    fn default() -> Self {
        Self::from_list(BUNDLED_STOPWORDS)
    }
}

impl LemmaFilter {
    /// Parse a one-entry-per-line list; `#` starts a comment line.
    pub fn from_list(list: &str) -> Self {
        let stopwords = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { stopwords }
    }

    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let s = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.into(), source })?;
        Ok(Self::from_list(&s))
    }

    pub fn len(&self) -> usize {
        self.stopwords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stopwords.is_empty()
    }

    pub fn is_stopword(&self, lemma: &str) -> bool {
        self.stopwords.contains(lemma)
    }

    /// `lemma` is expected lowercase.
    pub fn keeps(&self, lemma: &str) -> bool {
        lemma.chars().any(char::is_alphabetic) && !self.stopwords.contains(lemma)
    }

    pub fn normalize(&self, lemma: &str) -> Option<String> {
        let l = lemma.trim().to_lowercase();
        self.keeps(&l).then_some(l)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaSentence {
    pub doc_id: String,
    pub year: i32,
    pub lemmas: Vec<String>,
}

#[derive(Deserialize)]
struct LemmaRecord {
    doc_id: serde_json::Value,
    year: i64,
    #[serde(default)]
    sentences: Vec<Vec<String>>,
}

/// Streaming reader over the lemma-corpus JSONL, yielding one
/// [`LemmaSentence`] per stored sentence.
///
/// With a filter, lemmas are normalized and filtered on the way in. Without
/// one they are only lowercased, which is what surface-space windowing
/// needs.
pub struct LemmaReader<R> {
    lines: Lines<R>,
    filter: Option<LemmaFilter>,
    window: Option<StudyWindow>,
    path: PathBuf,
    line_no: usize,
    pending: std::vec::IntoIter<LemmaSentence>,
    stats: LoadStats,
}

pub fn read_lemma_corpus(
    path: impl AsRef<Path>,
    filter: Option<LemmaFilter>,
    window: Option<StudyWindow>,
) -> Result<LemmaReader<BufReader<File>>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    Ok(LemmaReader::new(BufReader::new(file), filter, window, path))
}

impl<R: BufRead> LemmaReader<R> {
    pub fn new(reader: R, filter: Option<LemmaFilter>, window: Option<StudyWindow>, path: impl Into<PathBuf>) -> Self {
        Self {
            lines: reader.lines(),
            filter,
            window,
            path: path.into(),
            line_no: 0,
            pending: Vec::new().into_iter(),
            stats: LoadStats::default(),
        }
    }

    /// Document-level accounting (records are documents, not sentences).
    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    fn expand(&self, rec: LemmaRecord, doc_id: String, year: i32) -> Vec<LemmaSentence> {
        rec.sentences
            .into_iter()
            .map(|s| {
                let lemmas = match &self.filter {
                    Some(f) => s.iter().filter_map(|l| f.normalize(l)).collect(),
                    None => s.iter().map(|l| l.trim().to_lowercase()).filter(|l| !l.is_empty()).collect(),
                };
                LemmaSentence { doc_id: doc_id.clone(), year, lemmas }
            })
            .collect()
    }
}

impl<R: BufRead> Iterator for LemmaReader<R> {
    type Item = Result<LemmaSentence, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(s) = self.pending.next() {
                return Some(Ok(s));
            }
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(source) => return Some(Err(IngestError::Io { path: self.path.clone(), source })),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            self.stats.records += 1;
            let rec: LemmaRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    self.stats.malformed += 1;
                    warn!("{}:{}: skipping lemma record: {e}", self.path.display(), self.line_no);
                    continue;
                }
            };
            let Ok(year) = i32::try_from(rec.year) else {
                self.stats.malformed += 1;
                warn!("{}:{}: year out of range", self.path.display(), self.line_no);
                continue;
            };
            if self.window.is_some_and(|w| !w.contains(year)) {
                self.stats.out_of_window += 1;
                continue;
            }
            let doc_id = match &rec.doc_id {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            self.stats.loaded += 1;
            self.pending = self.expand(rec, doc_id, year).into_iter();
        }
    }
}
