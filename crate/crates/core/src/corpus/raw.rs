use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{CleaningRuleSet, IngestError, StudyWindow, TargetFuser};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Fiction,
    Magazine,
    News,
    Nonfiction,
    Spoken,
    Tv,
    Abstract,
    Other,
}

impl Genre {
    /// Unrecognized tags map to [`Genre::Other`].
    pub fn parse_lenient(tag: &str) -> Self {
        match tag.trim().to_ascii_lowercase().as_str() {
            "fiction" | "fic" => Genre::Fiction,
            "magazine" | "mag" => Genre::Magazine,
            "news" | "newspaper" => Genre::News,
            "nonfiction" | "non-fiction" | "nf" => Genre::Nonfiction,
            "spoken" | "spok" => Genre::Spoken,
            "tv" | "tv/movies" => Genre::Tv,
            "abstract" | "academic" => Genre::Abstract,
            _ => Genre::Other,
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Genre::Fiction => "fiction",
            Genre::Magazine => "magazine",
            Genre::News => "news",
            Genre::Nonfiction => "nonfiction",
            Genre::Spoken => "spoken",
            Genre::Tv => "tv",
            Genre::Abstract => "abstract",
            Genre::Other => "other",
        };
        f.write_str(s)
    }
}

/// One year-tagged text unit of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub year: i32,
    pub genre: Genre,
    pub text: String,
}

impl Document {
    /// Clean and fuse the text. Returns `None` when nothing survives cleaning.
    pub fn prepare(mut self, rules: &CleaningRuleSet, fuser: &TargetFuser) -> Option<Self> {
        let cleaned = super::clean_text(&self.text, rules);
        if cleaned.is_empty() {
            return None;
        }
        self.text = fuser.fuse(&cleaned);
        Some(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawFormat {
    Jsonl,
    Tsv,
}

impl RawFormat {
    /// `.tsv`/`.tab` are TSV, everything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(ext) if ext == "tsv" || ext == "tab" => RawFormat::Tsv,
            _ => RawFormat::Jsonl,
        }
    }
}

impl FromStr for RawFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(RawFormat::Jsonl),
            "tsv" => Ok(RawFormat::Tsv),
            other => Err(format!("unknown raw corpus format `{other}`")),
        }
    }
}

/// Record accounting for a loader pass.
///
/// `loaded + malformed + out_of_window == records`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub records: u64,
    pub loaded: u64,
    pub malformed: u64,
    pub out_of_window: u64,
}

#[derive(Deserialize)]
struct JsonRecord {
    doc_id: serde_json::Value,
    year: serde_json::Value,
    #[serde(default)]
    genre: Option<String>,
    text: String,
}

/// Streaming reader over a raw corpus file.
///
/// Malformed records are logged, counted in [`RawReader::stats`], and
/// skipped. Only I/O failures surface as errors.
pub struct RawReader<R> {
    lines: Lines<R>,
    format: RawFormat,
    window: Option<StudyWindow>,
    path: PathBuf,
    line_no: usize,
    stats: LoadStats,
}

pub fn load_raw_corpus(
    path: impl AsRef<Path>,
    format: RawFormat,
    window: Option<StudyWindow>,
) -> Result<RawReader<BufReader<File>>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    Ok(RawReader::new(BufReader::new(file), format, window, path))
}

impl<R: BufRead> RawReader<R> {
    pub fn new(reader: R, format: RawFormat, window: Option<StudyWindow>, path: impl Into<PathBuf>) -> Self {
        Self { lines: reader.lines(), format, window, path: path.into(), line_no: 0, stats: LoadStats::default() }
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    fn parse(&self, line: &str) -> Result<Document, String> {
        match self.format {
            RawFormat::Jsonl => {
                let rec: JsonRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
                let doc_id = match rec.doc_id {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => n.to_string(),
                    other => return Err(format!("doc_id must be a string, got {other}")),
                };
                let year = match rec.year {
                    serde_json::Value::Number(n) => n
                        .as_i64()
                        .and_then(|y| i32::try_from(y).ok())
                        .ok_or_else(|| format!("year `{n}` is not an integer"))?,
                    serde_json::Value::String(s) => {
                        s.trim().parse::<i32>().map_err(|_| format!("unparseable year `{s}`"))?
                    }
                    other => return Err(format!("unparseable year `{other}`")),
                };
                let genre = rec.genre.as_deref().map(Genre::parse_lenient).unwrap_or(Genre::Other);
                Ok(Document { doc_id, year, genre, text: rec.text })
            }
            RawFormat::Tsv => {
                let mut cols = line.splitn(4, '\t');
                let (Some(id), Some(year), Some(genre), Some(text)) =
                    (cols.next(), cols.next(), cols.next(), cols.next())
                else {
                    return Err("expected 4 tab-separated columns".into());
                };
                let year = year.trim().parse::<i32>().map_err(|_| format!("unparseable year `{year}`"))?;
                Ok(Document {
                    doc_id: id.to_string(),
                    year,
                    genre: Genre::parse_lenient(genre),
                    text: text.to_string(),
                })
            }
        }
    }
}

impl<R: BufRead> Iterator for RawReader<R> {
    type Item = Result<Document, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => return Some(Err(IngestError::Io { path: self.path.clone(), source })),
            };
            self.line_no += 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if self.format == RawFormat::Tsv && self.line_no == 1 && line.starts_with("doc_id\tyear") {
                continue;
            }
            self.stats.records += 1;
            match self.parse(line) {
                Ok(doc) => {
                    if let Some(w) = self.window {
                        if !w.contains(doc.year) {
                            self.stats.out_of_window += 1;
                            continue;
                        }
                    }
                    self.stats.loaded += 1;
                    return Some(Ok(doc));
                }
                Err(msg) => {
                    self.stats.malformed += 1;
                    warn!("{}:{}: skipping record: {msg}", self.path.display(), self.line_no);
                }
            }
        }
    }
}

/// Rule-based sentence splitter for the raw view: breaks after `.`, `!` or
/// `?` (optionally followed by closing quotes/brackets) when whitespace
/// follows.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '”' | '’') {
                j += 1;
            }
            if j == chars.len() || chars[j].1.is_whitespace() {
                let end = if j == chars.len() { text.len() } else { chars[j].0 };
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}
