//! Corpus ingestion: cleaning, target fusion, and loaders for the three
//! corpus views (raw, lemmatized, dependency-parsed).

mod clean;
mod conllu;
mod lemma;
mod raw;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{clean_text, fuse_targets, fused_token, CleaningRuleSet, TargetFuser};
pub use conllu::{load_conllu, ConlluReader, ConlluStats, ParsedDocument, ParsedSentence, ParsedToken};
pub use lemma::{read_lemma_corpus, LemmaFilter, LemmaReader, LemmaSentence};
pub use raw::{load_raw_corpus, split_sentences, Document, Genre, LoadStats, RawFormat, RawReader};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid study window {start}..={end}")]
    EmptyWindow { start: i32, end: i32 },
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StudyWindow {
    pub start: i32,
    pub end: i32,
}

impl StudyWindow {
    pub fn new(start: i32, end: i32) -> Result<Self, IngestError> {
        if start > end {
            return Err(IngestError::EmptyWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        self.start <= year && year <= self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

impl Default for StudyWindow {
    fn default() -> Self {
        Self { start: 1970, end: 2016 }
    }
}
