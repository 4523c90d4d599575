//! Affect norms, theme dictionaries, and the intensifier set.
//!
//! Norms are read from CSV, either in the canonical layout
//! (`word,valence_mean,arousal_mean`) or with the column names of the
//! published Warriner et al. release (`Word,V.Mean.Sum,A.Mean.Sum`).
//! Arousal is taken as oriented 1 = calm to 9 = aroused; the file is never
//! reverse-coded on load.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collocates::AnnualCollocateCounts;

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 9.0;

const BUNDLED_PATHOLOGY: &str = include_str!("../data/pathology.txt");
const BUNDLED_INTENSIFIERS: &str = include_str!("../data/intensifiers.txt");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("norms CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("norms CSV is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("duplicate lemma `{lemma}` on rows {first} and {second}")]
    Duplicate { lemma: String, first: usize, second: usize },
    #[error("row {row}: {column} = {value} is outside [1, 9]")]
    OutOfRange { row: usize, column: &'static str, value: f64 },
    #[error("row {row}: cannot parse {column} value `{raw}`")]
    BadNumber { row: usize, column: &'static str, raw: String },
    #[error("word list `{0}` is empty")]
    EmptyList(String),
    #[error("word list `{name}` contains multiword term `{term}`")]
    MultiwordTerm { name: String, term: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffectDimension {
    Valence,
    Arousal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affect {
    pub valence: f64,
    pub arousal: f64,
}

impl Affect {
    pub fn get(&self, dim: AffectDimension) -> f64 {
        match dim {
            AffectDimension::Valence => self.valence,
            AffectDimension::Arousal => self.arousal,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffectNorms {
    entries: HashMap<String, Affect>,
}

const CANONICAL: [&str; 3] = ["word", "valence_mean", "arousal_mean"];
const PUBLISHED: [&str; 3] = ["Word", "V.Mean.Sum", "A.Mean.Sum"];

impl AffectNorms {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| LexiconError::Io { path: path.into(), source })?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, LexiconError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |names: [&'static str; 3], i: usize| headers.iter().position(|h| h == names[i]);
        let col = |i: usize| find(CANONICAL, i).or_else(|| find(PUBLISHED, i)).ok_or(LexiconError::MissingColumn(CANONICAL[i]));
        let (wi, vi, ai) = (col(0)?, col(1)?, col(2)?);

        let mut entries = HashMap::new();
        let mut first_row: HashMap<String, usize> = HashMap::new();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            // 1-based, header is row 1
            let row = idx + 2;
            let lemma = rec.get(wi).unwrap_or("").to_lowercase();
            if lemma.is_empty() {
                continue;
            }
            let num = |i: usize, column: &'static str| -> Result<f64, LexiconError> {
                let raw = rec.get(i).unwrap_or("");
                let v: f64 = raw.parse().map_err(|_| LexiconError::BadNumber { row, column, raw: raw.to_string() })?;
                if !(RATING_MIN..=RATING_MAX).contains(&v) {
                    return Err(LexiconError::OutOfRange { row, column, value: v });
                }
                Ok(v)
            };
            let affect = Affect { valence: num(vi, "valence_mean")?, arousal: num(ai, "arousal_mean")? };
            if let Some(&first) = first_row.get(&lemma) {
                return Err(LexiconError::Duplicate { lemma, first, second: row });
            }
            first_row.insert(lemma.clone(), row);
            entries.insert(lemma, affect);
        }
        Ok(Self { entries })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, Affect)>) -> Self {
        Self { entries: entries.into_iter().collect() }
    }

    /// Canonical CSV, rows sorted by lemma.
    pub fn write_csv(&self, writer: impl Write) -> Result<(), LexiconError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CANONICAL)?;
        let sorted: BTreeMap<_, _> = self.entries.iter().collect();
        for (lemma, a) in sorted {
            w.write_record([lemma.as_str(), &a.valence.to_string(), &a.arousal.to_string()])?;
        }
        w.flush().map_err(|e| LexiconError::Csv(e.into()))?;
        Ok(())
    }

    pub fn get(&self, lemma: &str) -> Option<Affect> {
        self.entries.get(lemma).copied()
    }

    pub fn rating(&self, lemma: &str, dim: AffectDimension) -> Option<f64> {
        self.entries.get(lemma).map(|a| a.get(dim))
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.entries.contains_key(lemma)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Share of collocate tokens (pooled over all years) whose lemma is normed.
/// `None` when there are no collocates at all.
pub fn coverage(norms: &AffectNorms, counts: &AnnualCollocateCounts) -> Option<f64> {
    let (mut matched, mut total) = (0u64, 0u64);
    for lemmas in counts.per_year.values() {
        for (lemma, &c) in lemmas {
            total += c;
            if norms.contains(lemma) {
                matched += c;
            }
        }
    }
    (total > 0).then(|| matched as f64 / total as f64)
}

fn parse_word_list(name: &str, src: &str) -> Result<BTreeSet<String>, LexiconError> {
    let mut terms = BTreeSet::new();
    for line in src.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.split_whitespace().count() > 1 {
            return Err(LexiconError::MultiwordTerm { name: name.into(), term: line.into() });
        }
        terms.insert(line.to_lowercase());
    }
    if terms.is_empty() {
        return Err(LexiconError::EmptyList(name.into()));
    }
    Ok(terms)
}

fn read_list(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Io { path: path.into(), source })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThemeDictionary {
    pub name: String,
    terms: BTreeSet<String>,
}

impl ThemeDictionary {
    pub fn parse(name: &str, src: &str) -> Result<Self, LexiconError> {
        Ok(Self { name: name.to_string(), terms: parse_word_list(name, src)? })
    }

    /// Dictionary name defaults to the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("theme");
        Self::parse(name, &read_list(path)?)
    }

    /// The bundled 17-term pathologization dictionary.
    pub fn pathology() -> Self {
        Self::parse("pathology", BUNDLED_PATHOLOGY).expect("bundled dictionary is valid")
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.terms.contains(lemma)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensifierSet {
    adjectives: BTreeSet<String>,
}

impl Default for IntensifierSet {
    fn default() -> Self {
        Self { adjectives: parse_word_list("intensifiers", BUNDLED_INTENSIFIERS).expect("bundled list is valid") }
    }
}

impl IntensifierSet {
    pub fn parse(src: &str) -> Result<Self, LexiconError> {
        Ok(Self { adjectives: parse_word_list("intensifiers", src)? })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::parse(&read_list(path.as_ref())?)
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.adjectives.contains(lemma)
    }

    pub fn len(&self) -> usize {
        self.adjectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjectives.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(year: i32, pairs: &[(&str, u64)]) -> AnnualCollocateCounts {
        let mut c = AnnualCollocateCounts::new("t");
        for (l, n) in pairs {
            c.add(year, l, *n);
        }
        c
    }

    #[test]
    fn loads_canonical_row() {
        let n = AffectNorms::from_reader("word,valence_mean,arousal_mean\nhappy,8.47,6.05\n".as_bytes()).unwrap();
        assert_eq!(n.get("happy"), Some(Affect { valence: 8.47, arousal: 6.05 }));
    }

    #[test]
    fn loads_published_columns() {
        let src = ",Word,V.Mean.Sum,V.SD.Sum,A.Mean.Sum\n1,Aardvark,6.26,2.21,2.41\n";
        let n = AffectNorms::from_reader(src.as_bytes()).unwrap();
        assert_eq!(n.get("aardvark"), Some(Affect { valence: 6.26, arousal: 2.41 }));
    }

    #[test]
    fn empty_file_gives_empty_norms() {
        let n = AffectNorms::from_reader("word,valence_mean,arousal_mean\n".as_bytes()).unwrap();
        assert!(n.is_empty());
        assert_eq!(coverage(&n, &counts(1990, &[("a", 1)])), Some(0.0));
    }

    #[test]
    fn out_of_range_is_fatal() {
        let err = AffectNorms::from_reader("word,valence_mean,arousal_mean\nbad,0.5,3.0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LexiconError::OutOfRange { row: 2, column: "valence_mean", .. }));
    }

    #[test]
    fn duplicate_reports_rows() {
        let src = "word,valence_mean,arousal_mean\nx,5,5\ny,5,5\nX,4,4\n";
        let err = AffectNorms::from_reader(src.as_bytes()).unwrap_err();
        assert!(matches!(err, LexiconError::Duplicate { first: 2, second: 4, .. }), "{err}");
    }

    #[test]
    fn missing_column_is_fatal() {
        let err = AffectNorms::from_reader("word,valence_mean\nx,5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LexiconError::MissingColumn("arousal_mean")));
    }

    #[test]
    fn coverage_examples() {
        let n = AffectNorms::from_entries([("good".to_string(), Affect { valence: 7.0, arousal: 4.0 })]);
        assert_eq!(coverage(&n, &counts(1990, &[("good", 2), ("zzz", 2)])), Some(0.5));
        assert_eq!(coverage(&n, &counts(1990, &[("good", 3)])), Some(1.0));
        assert_eq!(coverage(&n, &AnnualCollocateCounts::new("t")), None);
    }

    #[test]
    fn bundled_lists() {
        let d = ThemeDictionary::pathology();
        assert_eq!(d.len(), 17);
        for t in ["ailment", "clinic", "prognosis", "treatment", "ill"] {
            assert!(d.contains(t));
        }
        let i = IntensifierSet::default();
        assert_eq!(i.len(), 11);
        assert!(i.contains("debilitating") && i.contains("severe"));
    }

    #[test]
    fn word_list_rules() {
        assert!(matches!(ThemeDictionary::parse("x", "# only comment\n"), Err(LexiconError::EmptyList(_))));
        assert!(matches!(ThemeDictionary::parse("x", "two words\n"), Err(LexiconError::MultiwordTerm { .. })));
        let d = ThemeDictionary::parse("x", "# c\nFoo\n\nbar\n").unwrap();
        assert_eq!(d.terms().collect::<Vec<_>>(), vec!["bar", "foo"]);
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in proptest::collection::btree_map("[a-z]{1,8}", (1.0f64..=9.0, 1.0f64..=9.0), 0..30)) {
            let norms = AffectNorms::from_entries(rows.iter().map(|(k, (v, a))| (k.clone(), Affect { valence: *v, arousal: *a })));
            let mut buf = Vec::new();
            norms.write_csv(&mut buf).unwrap();
            let back = AffectNorms::from_reader(buf.as_slice()).unwrap();
            prop_assert_eq!(back, norms);
        }

        #[test]
        fn coverage_is_scale_invariant(
            pairs in proptest::collection::vec(("[a-d]", 1u64..50), 1..10),
            k in 1u64..20,
        ) {
            let n = AffectNorms::from_entries([("a".to_string(), Affect { valence: 5.0, arousal: 5.0 }),
                                               ("b".to_string(), Affect { valence: 5.0, arousal: 5.0 })]);
            let mut c1 = AnnualCollocateCounts::new("t");
            let mut ck = AnnualCollocateCounts::new("t");
            for (l, n) in &pairs {
                c1.add(2000, l, *n);
                ck.add(2000, l, *n * k);
            }
            let a = coverage(&n, &c1).unwrap();
            let b = coverage(&n, &ck).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
