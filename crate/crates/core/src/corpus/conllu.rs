//! Reader for the dependency-parsed corpus view.
//!
//! Documents are delimited by `# doc_id = <id>` (or the standard
//! `# newdoc id = <id>`) and carry a `# year = <int>` comment. Token lines
//! have ten tab-separated columns. Multiword ranges (`3-4`) and empty nodes
//! (`5.1`) are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{IngestError, StudyWindow};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedToken {
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// 1-based index of the syntactic head, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl ParsedToken {
    /// Universal relation without its subtype (`amod:poss` -> `amod`).
    pub fn base_deprel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or(&self.deprel)
    }
}

pub type ParsedSentence = Vec<ParsedToken>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDocument {
    pub doc_id: String,
    pub year: i32,
    pub sentences: Vec<ParsedSentence>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConlluStats {
    pub documents: u64,
    pub sentences: u64,
    pub skipped_documents: u64,
    pub skipped_sentences: u64,
    pub out_of_window: u64,
}

#[derive(Default)]
struct DocBuilder {
    doc_id: Option<String>,
    year: Option<i32>,
    bad_year: bool,
    sentences: Vec<ParsedSentence>,
    current: Vec<ParsedToken>,
    current_bad: bool,
    started: bool,
}

pub struct ConlluReader<R> {
    lines: Lines<R>,
    path: PathBuf,
    line_no: usize,
    window: Option<StudyWindow>,
    doc: DocBuilder,
    done: bool,
    stats: ConlluStats,
}

pub fn load_conllu(path: impl AsRef<Path>, window: Option<StudyWindow>) -> Result<ConlluReader<BufReader<File>>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    Ok(ConlluReader::new(BufReader::new(file), window, path))
}

fn meta_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let rest = comment.strip_prefix(key)?.trim_start();
    let rest = rest.strip_prefix('=')?;
    Some(rest.trim())
}

fn parse_token(line: &str) -> Result<Option<ParsedToken>, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(format!("expected 10 columns, found {}", cols.len()));
    }
    let id = cols[0];
    if id.contains('-') || id.contains('.') {
        return Ok(None);
    }
    id.parse::<usize>().map_err(|_| format!("bad token id `{id}`"))?;
    let head = cols[6].parse::<usize>().map_err(|_| format!("bad head `{}`", cols[6]))?;
    let deprel = cols[7].trim();
    if deprel.is_empty() {
        return Err("empty deprel".into());
    }
    Ok(Some(ParsedToken {
        form: cols[1].to_string(),
        lemma: cols[2].to_string(),
        upos: cols[3].to_string(),
        head,
        deprel: deprel.to_string(),
    }))
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(reader: R, window: Option<StudyWindow>, path: impl Into<PathBuf>) -> Self {
        Self {
            lines: reader.lines(),
            path: path.into(),
            line_no: 0,
            window,
            doc: DocBuilder::default(),
            done: false,
            stats: ConlluStats::default(),
        }
    }

    pub fn stats(&self) -> ConlluStats {
        self.stats
    }

    fn end_sentence(&mut self) {
        let tokens = std::mem::take(&mut self.doc.current);
        let bad = std::mem::take(&mut self.doc.current_bad);
        if tokens.is_empty() && !bad {
            return;
        }
        let n = tokens.len();
        if bad || tokens.iter().any(|t| t.head > n) {
            self.stats.skipped_sentences += 1;
            warn!("{}:{}: skipping malformed sentence", self.path.display(), self.line_no);
            return;
        }
        self.doc.sentences.push(tokens);
    }

    /// Close the current document; returns it when it is usable.
    fn finish_doc(&mut self) -> Option<ParsedDocument> {
        self.end_sentence();
        let doc = std::mem::take(&mut self.doc);
        if !doc.started {
            return None;
        }
        let label = doc.doc_id.clone().unwrap_or_else(|| "<unnamed>".into());
        let Some(year) = doc.year.filter(|_| !doc.bad_year) else {
            self.stats.skipped_documents += 1;
            warn!("{}: document {label} has no usable `# year` metadata, skipped", self.path.display());
            return None;
        };
        let Some(doc_id) = doc.doc_id else {
            self.stats.skipped_documents += 1;
            warn!("{}: sentences without `# doc_id` metadata, skipped", self.path.display());
            return None;
        };
        if self.window.is_some_and(|w| !w.contains(year)) {
            self.stats.out_of_window += 1;
            return None;
        }
        self.stats.documents += 1;
        self.stats.sentences += doc.sentences.len() as u64;
        Some(ParsedDocument { doc_id, year, sentences: doc.sentences })
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<ParsedDocument, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let line = match self.lines.next() {
                None => {
                    self.done = true;
                    return self.finish_doc().map(Ok);
                }
                Some(Err(source)) => {
                    self.done = true;
                    return Some(Err(IngestError::Io { path: self.path.clone(), source }));
                }
                Some(Ok(l)) => l,
            };
            self.line_no += 1;
            let line = line.trim_end_matches(['\r', '\n']);

            if line.trim().is_empty() {
                self.end_sentence();
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                let new_id = meta_value(comment, "doc_id").or_else(|| meta_value(comment, "newdoc id"));
                if let Some(id) = new_id {
                    let finished = if self.doc.started { self.finish_doc() } else { None };
                    self.doc.started = true;
                    self.doc.doc_id = Some(id.to_string());
                    if let Some(doc) = finished {
                        return Some(Ok(doc));
                    }
                } else if let Some(y) = meta_value(comment, "year") {
                    self.doc.started = true;
                    match y.parse::<i32>() {
                        Ok(y) => {
                            self.doc.year = Some(y);
                            self.doc.bad_year = false;
                        }
                        Err(_) => self.doc.bad_year = true,
                    }
                }
                continue;
            }
            self.doc.started = true;
            if self.doc.current_bad {
                continue;
            }
            match parse_token(line) {
                Ok(Some(tok)) => self.doc.current.push(tok),
                Ok(None) => {}
                Err(msg) => {
                    warn!("{}:{}: {msg}", self.path.display(), self.line_no);
                    self.doc.current_bad = true;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn tok(id: usize, form: &str, head: usize, rel: &str) -> String {
        format!("{id}\t{form}\t{}\tX\t_\t_\t{head}\t{rel}\t_\t_", form.to_lowercase())
    }

    fn read(src: &str) -> (Vec<ParsedDocument>, ConlluStats) {
        let mut r = ConlluReader::new(Cursor::new(src.to_string()), None, "mem");
        let docs: Vec<_> = r.by_ref().map(Result::unwrap).collect();
        (docs, r.stats())
    }

    #[test]
    fn two_token_sentence() {
        let src = format!(
            "# doc_id = d1\n# year = 1999\n{}\n{}\n\n",
            tok(1, "severe", 2, "amod"),
            tok(2, "mental_illness", 0, "root")
        );
        let (docs, _) = read(&src);
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].sentences.len(), 1);
        let s = &docs[0].sentences[0];
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].head, 2);
        assert_eq!(s[0].deprel, "amod");
        assert_eq!(s[1].lemma, "mental_illness");
    }

    #[test]
    fn missing_year_skips_document() {
        let src = format!("# doc_id = d1\n{}\n\n", tok(1, "x", 0, "root"));
        let (docs, stats) = read(&src);
        assert!(docs.is_empty());
        assert_eq!(stats.skipped_documents, 1);
    }

    #[test]
    fn groups_sentences_by_document() {
        let mut src = String::from("# doc_id = a\n# year = 1990\n");
        for _ in 0..3 {
            src += &format!("# text = x\n{}\n\n", tok(1, "x", 0, "root"));
        }
        src += "# newdoc id = b\n# year = 1991\n";
        for _ in 0..2 {
            src += &format!("{}\n\n", tok(1, "y", 0, "root"));
        }
        let (docs, stats) = read(&src);
        let sizes: Vec<_> = docs.iter().map(|d| (d.doc_id.as_str(), d.sentences.len())).collect();
        assert_eq!(sizes, vec![("a", 3), ("b", 2)]);
        assert_eq!(stats.sentences, 5);
    }

    #[test]
    fn wrong_column_count_skips_sentence() {
        let src = format!(
            "# doc_id = a\n# year = 1990\n1\tbroken\tline\n{}\n\n{}\n\n",
            tok(2, "x", 0, "root"),
            tok(1, "ok", 0, "root")
        );
        let (docs, stats) = read(&src);
        assert_eq!(docs[0].sentences.len(), 1);
        assert_eq!(docs[0].sentences[0][0].form, "ok");
        assert_eq!(stats.skipped_sentences, 1);
    }

    #[test]
    fn multiword_ranges_ignored_and_heads_checked() {
        let src = format!(
            "# doc_id = a\n# year = 1990\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n{}\n{}\n\n{}\n\n",
            tok(1, "do", 0, "root"),
            tok(2, "n't", 1, "advmod"),
            tok(1, "bad", 7, "root")
        );
        let (docs, stats) = read(&src);
        assert_eq!(docs[0].sentences.len(), 1);
        assert_eq!(docs[0].sentences[0].len(), 2);
        assert_eq!(stats.skipped_sentences, 1);
    }

    #[test]
    fn subtype_is_stripped() {
        let t = ParsedToken { form: "a".into(), lemma: "a".into(), upos: "ADJ".into(), head: 1, deprel: "amod:x".into() };
        assert_eq!(t.base_deprel(), "amod");
    }
}
