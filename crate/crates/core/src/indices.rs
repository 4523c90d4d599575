//! Annual index series: norm-weighted valence and arousal, theme share,
//! intensifier proportion, and salience.
//!
//! A period with no support is left out of the series rather than recorded
//! as zero. A zero point always means a measured zero.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::collocates::{is_target_token, AnnualCollocateCounts};
use crate::corpus::{Document, ParsedDocument};
use crate::lexicon::{AffectDimension, AffectNorms, IntensifierSet, ThemeDictionary};

pub const DEFAULT_MODIFIER_RELATION: &str = "amod";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexKind {
    Valence,
    Arousal,
    Breadth,
    Intensifier,
    Theme(String),
    Salience,
}

impl IndexKind {
    pub fn scale(&self) -> Scale {
        match self {
            IndexKind::Valence | IndexKind::Arousal => Scale { lo: 1.0, hi: 9.0 },
            _ => Scale { lo: 0.0, hi: 1.0 },
        }
    }

    /// File-name friendly label (`theme:pathology` -> `theme-pathology`).
    pub fn slug(&self) -> String {
        self.to_string().replace(':', "-")
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexKind::Valence => f.write_str("valence"),
            IndexKind::Arousal => f.write_str("arousal"),
            IndexKind::Breadth => f.write_str("breadth"),
            IndexKind::Intensifier => f.write_str("intensifier"),
            IndexKind::Theme(name) => write!(f, "theme:{name}"),
            IndexKind::Salience => f.write_str("salience"),
        }
    }
}

impl FromStr for IndexKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "valence" => Ok(IndexKind::Valence),
            "arousal" => Ok(IndexKind::Arousal),
            "breadth" => Ok(IndexKind::Breadth),
            "intensifier" => Ok(IndexKind::Intensifier),
            "salience" => Ok(IndexKind::Salience),
            "theme" => Ok(IndexKind::Theme("pathology".into())),
            other => match other.strip_prefix("theme:") {
                Some(name) if !name.is_empty() => Ok(IndexKind::Theme(name.to_string())),
                _ => Err(format!("unknown index `{other}`")),
            },
        }
    }
}

impl Serialize for IndexKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IndexKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Declared (nominal) value range of an index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub lo: f64,
    pub hi: f64,
}

impl Scale {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Calendar year, or the first year of an interval.
    pub time_unit: i32,
    pub value: f64,
    /// Support count behind the value.
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub target: String,
    pub index: IndexKind,
    pub points: Vec<SeriesPoint>,
    pub scale: Scale,
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("series CSV row {row}: {msg}")]
    Row { row: usize, msg: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    target: String,
    index: String,
    time_unit: i32,
    value: f64,
    n: u64,
}

impl IndexSeries {
    pub fn new(target: impl Into<String>, index: IndexKind) -> Self {
        let scale = index.scale();
        Self { target: target.into(), index, points: Vec::new(), scale }
    }

    /// Points arrive in any order; the series keeps them sorted by time.
    pub fn from_points(target: impl Into<String>, index: IndexKind, points: impl IntoIterator<Item = SeriesPoint>) -> Self {
        let mut s = Self::new(target, index);
        s.points = points.into_iter().collect();
        s.points.sort_by_key(|p| p.time_unit);
        s
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn value_at(&self, time_unit: i32) -> Option<f64> {
        self.points.iter().find(|p| p.time_unit == time_unit).map(|p| p.value)
    }

    /// Points whose value falls outside the declared scale. Values are never
    /// clamped; this is how they get flagged.
    pub fn out_of_scale(&self) -> impl Iterator<Item = &SeriesPoint> {
        self.points.iter().filter(|p| !self.scale.contains(p.value))
    }

    /// Drop points whose time unit falls in any of the inclusive ranges.
    pub fn mask(&mut self, ranges: &[(i32, i32)]) {
        self.points.retain(|p| !ranges.iter().any(|&(a, b)| a <= p.time_unit && p.time_unit <= b));
    }

    pub fn write_csv_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        let index = self.index.to_string();
        for p in &self.points {
            w.write_record([
                self.target.as_str(),
                index.as_str(),
                &p.time_unit.to_string(),
                &p.value.to_string(),
                &p.n.to_string(),
            ])?;
        }
        Ok(())
    }

    /// `target,index,time_unit,value,n`; absent periods have no row.
    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SERIES_HEADER)?;
        self.write_csv_rows(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub const SERIES_HEADER: [&str; 5] = ["target", "index", "time_unit", "value", "n"];

/// Read every series in a CSV, grouped by (target, index) in first-seen order.
pub fn read_series_csv(reader: impl Read) -> Result<Vec<IndexSeries>, SeriesError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut order: Vec<(String, IndexKind)> = Vec::new();
    let mut groups: BTreeMap<(String, IndexKind), Vec<SeriesPoint>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<SeriesRow>().enumerate() {
        let row = row?;
        let index: IndexKind = row.index.parse().map_err(|msg| SeriesError::Row { row: i + 2, msg })?;
        let key = (row.target, index);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(SeriesPoint { time_unit: row.time_unit, value: row.value, n: row.n });
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let pts = groups.remove(&key).unwrap_or_default();
            IndexSeries::from_points(key.0, key.1, pts)
        })
        .collect())
}

/// Per year: Σ rating(w)·count(w) ÷ Σ count(w) over normed collocates.
///
/// Years whose matched total is below `min_matched` are absent.
pub fn weighted_norm_index(
    counts: &AnnualCollocateCounts,
    norms: &AffectNorms,
    dimension: AffectDimension,
    min_matched: u64,
) -> IndexSeries {
    let kind = match dimension {
        AffectDimension::Valence => IndexKind::Valence,
        AffectDimension::Arousal => IndexKind::Arousal,
    };
    let min_matched = min_matched.max(1);
    let points = counts.per_year.iter().filter_map(|(&year, lemmas)| {
        let (mut weighted, mut matched) = (0.0f64, 0u64);
        for (lemma, &c) in lemmas {
            if let Some(r) = norms.rating(lemma, dimension) {
                weighted += r * c as f64;
                matched += c;
            }
        }
        (matched >= min_matched).then(|| SeriesPoint { time_unit: year, value: weighted / matched as f64, n: matched })
    });
    IndexSeries::from_points(counts.target.clone(), kind, points)
}

/// Per year: dictionary-term collocates ÷ all collocates.
pub fn theme_index(counts: &AnnualCollocateCounts, dict: &ThemeDictionary) -> IndexSeries {
    let points = counts.per_year.iter().filter_map(|(&year, lemmas)| {
        let total = counts.totals.get(&year).copied().unwrap_or(0);
        if total == 0 {
            return None;
        }
        let hits: u64 = lemmas.iter().filter(|(l, _)| dict.contains(l)).map(|(_, &c)| c).sum();
        Some(SeriesPoint { time_unit: year, value: hits as f64 / total as f64, n: total })
    });
    IndexSeries::from_points(counts.target.clone(), IndexKind::Theme(dict.name.clone()), points)
}

/// Running tallies for the intensifier index: year -> (intensified, total).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntensifierTally {
    pub per_year: BTreeMap<i32, (u64, u64)>,
}

impl IntensifierTally {
    pub fn observe(&mut self, doc: &ParsedDocument, target: &str, intensifiers: &IntensifierSet, relation: &str) {
        for sent in &doc.sentences {
            for (i, tok) in sent.iter().enumerate() {
                if !is_target_token(tok, target) {
                    continue;
                }
                let pos = i + 1;
                let intensified = sent.iter().any(|d| {
                    d.head == pos && d.base_deprel() == relation && intensifiers.contains(&d.lemma.to_lowercase())
                });
                let slot = self.per_year.entry(doc.year).or_insert((0, 0));
                slot.1 += 1;
                if intensified {
                    slot.0 += 1;
                }
            }
        }
    }

    pub fn series(&self, target: &str) -> IndexSeries {
        let points = self
            .per_year
            .iter()
            .filter(|(_, &(_, total))| total > 0)
            .map(|(&year, &(hit, total))| SeriesPoint { time_unit: year, value: hit as f64 / total as f64, n: total });
        IndexSeries::from_points(target, IndexKind::Intensifier, points)
    }
}

/// Per year: share of target occurrences carrying at least one intensifying
/// dependent under `relation`. Several intensifiers on one occurrence count
/// once.
pub fn intensifier_index<'a>(
    parsed: impl IntoIterator<Item = &'a ParsedDocument>,
    target: &str,
    intensifiers: &IntensifierSet,
    relation: &str,
) -> IndexSeries {
    let mut tally = IntensifierTally::default();
    for doc in parsed {
        tally.observe(doc, target, intensifiers, relation);
    }
    tally.series(target)
}

/// Matches a whitespace token against a fused target, ignoring attached
/// punctuation (`mental_health,` counts).
pub fn token_is_target(token: &str, target: &str) -> bool {
    token.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_')) == target
}

/// Running tallies for salience: year -> (target tokens, all tokens).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SalienceTally {
    pub per_year: BTreeMap<i32, (u64, u64)>,
}

impl SalienceTally {
    pub fn observe(&mut self, year: i32, text: &str, target: &str) {
        let slot = self.per_year.entry(year).or_insert((0, 0));
        for tok in text.split_whitespace() {
            slot.1 += 1;
            if token_is_target(tok, target) {
                slot.0 += 1;
            }
        }
    }

    pub fn series(&self, target: &str) -> IndexSeries {
        let points = self
            .per_year
            .iter()
            .filter(|(_, &(_, total))| total > 0)
            .map(|(&year, &(hit, total))| SeriesPoint { time_unit: year, value: hit as f64 / total as f64, n: total });
        IndexSeries::from_points(target, IndexKind::Salience, points)
    }
}

/// Per year: target tokens ÷ all whitespace tokens of the cleaned, fused
/// raw view.
pub fn salience<'a>(raw_docs: impl IntoIterator<Item = &'a Document>, target: &str) -> IndexSeries {
    let mut tally = SalienceTally::default();
    for d in raw_docs {
        tally.observe(d.year, &d.text, target);
    }
    tally.series(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Genre, ParsedToken};
    use crate::lexicon::Affect;
    use proptest::prelude::*;

    fn counts(pairs: &[(&str, u64)]) -> AnnualCollocateCounts {
        let mut c = AnnualCollocateCounts::new("T");
        for (l, n) in pairs {
            c.add(2000, l, *n);
        }
        c
    }

    fn norms(pairs: &[(&str, f64)]) -> AffectNorms {
        AffectNorms::from_entries(pairs.iter().map(|(l, v)| (l.to_string(), Affect { valence: *v, arousal: 10.0 - *v })))
    }

    #[test]
    fn single_term_identity() {
        let s = weighted_norm_index(&counts(&[("happy", 3)]), &norms(&[("happy", 8.0)]), AffectDimension::Valence, 1);
        assert_eq!(s.points, vec![SeriesPoint { time_unit: 2000, value: 8.0, n: 3 }]);
    }

    #[test]
    fn weighted_mean() {
        let n = norms(&[("good", 7.0), ("bad", 3.0)]);
        let s = weighted_norm_index(&counts(&[("good", 2), ("bad", 1), ("zzz", 9)]), &n, AffectDimension::Valence, 1);
        assert!((s.points[0].value - 17.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.points[0].n, 3);
        let a = weighted_norm_index(&counts(&[("good", 2), ("bad", 1)]), &n, AffectDimension::Arousal, 1);
        assert!((a.points[0].value - (2.0 * 3.0 + 7.0) / 3.0).abs() < 1e-12);
        assert_eq!(a.index, IndexKind::Arousal);
    }

    #[test]
    fn unmatched_year_is_absent() {
        let s = weighted_norm_index(&counts(&[("zzz", 5)]), &norms(&[("good", 7.0)]), AffectDimension::Valence, 1);
        assert!(s.is_empty());
        let s = weighted_norm_index(&counts(&[("good", 5)]), &AffectNorms::default(), AffectDimension::Valence, 1);
        assert!(s.is_empty());
        let s = weighted_norm_index(&counts(&[("good", 2)]), &norms(&[("good", 7.0)]), AffectDimension::Valence, 3);
        assert!(s.is_empty());
    }

    #[test]
    fn theme_share() {
        let d = ThemeDictionary::pathology();
        assert_eq!(theme_index(&counts(&[("illness", 2), ("tree", 8)]), &d).points[0].value, 0.2);
        assert_eq!(theme_index(&counts(&[("tree", 8)]), &d).points[0].value, 0.0);
        assert_eq!(theme_index(&counts(&[("disorder", 4)]), &d).points[0].value, 1.0);
        assert_eq!(theme_index(&counts(&[("tree", 1)]), &d).index.to_string(), "theme:pathology");
    }

    fn t(form: &str, head: usize, rel: &str) -> ParsedToken {
        ParsedToken { form: form.into(), lemma: form.to_lowercase(), upos: "X".into(), head, deprel: rel.into() }
    }

    fn doc(year: i32, sentences: Vec<Vec<ParsedToken>>) -> ParsedDocument {
        ParsedDocument { doc_id: "d".into(), year, sentences }
    }

    #[test]
    fn intensifier_share() {
        let docs = vec![doc(
            1999,
            vec![
                vec![t("severe", 2, "amod"), t("mental_illness", 0, "root")],
                vec![t("mental_illness", 0, "root")],
                vec![t("poor", 2, "amod"), t("mental_illness", 0, "root")],
                // "severe" modifies another word, not the target
                vec![t("mental_illness", 0, "root"), t("severe", 3, "amod"), t("case", 1, "nmod")],
            ],
        )];
        let s = intensifier_index(&docs, "mental_illness", &IntensifierSet::default(), "amod");
        assert_eq!(s.points, vec![SeriesPoint { time_unit: 1999, value: 0.25, n: 4 }]);
    }

    #[test]
    fn intensifier_caps_per_occurrence() {
        let docs = vec![doc(
            2001,
            vec![vec![t("serious", 3, "amod"), t("severe", 3, "amod"), t("mental_illness", 0, "root")]; 3],
        )];
        let s = intensifier_index(&docs, "mental_illness", &IntensifierSet::default(), "amod");
        assert_eq!(s.points[0].value, 1.0);
        let none = vec![doc(2001, vec![vec![t("mental_illness", 0, "root")]])];
        assert_eq!(intensifier_index(&none, "mental_illness", &IntensifierSet::default(), "amod").points[0].value, 0.0);
    }

    #[test]
    fn salience_examples() {
        let mut words = vec!["w"; 995];
        words.extend(["mental_health"; 5]);
        let d = Document { doc_id: "a".into(), year: 1990, genre: Genre::News, text: words.join(" ") };
        let empty = Document { doc_id: "b".into(), year: 1991, genre: Genre::News, text: String::new() };
        let other = Document { doc_id: "c".into(), year: 1992, genre: Genre::News, text: "a b c".into() };
        let s = salience(&[d, empty, other], "mental_health");
        assert_eq!(s.points.len(), 2);
        assert_eq!(s.value_at(1990), Some(0.005));
        assert_eq!(s.value_at(1991), None);
        assert_eq!(s.value_at(1992), Some(0.0));
    }

    #[test]
    fn punctuation_attached_target_counts() {
        assert!(token_is_target("(mental_health),", "mental_health"));
        assert!(!token_is_target("mental_healthy", "mental_health"));
    }

    #[test]
    fn series_csv_round_trip_and_mask() {
        let mut s = IndexSeries::from_points(
            "mental_health",
            IndexKind::Theme("pathology".into()),
            [SeriesPoint { time_unit: 1991, value: 0.1, n: 3 }, SeriesPoint { time_unit: 1990, value: 0.25, n: 4 }],
        );
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "target,index,time_unit,value,n\nmental_health,theme:pathology,1990,0.25,4\nmental_health,theme:pathology,1991,0.1,3\n"
        );
        assert_eq!(read_series_csv(buf.as_slice()).unwrap(), vec![s.clone()]);
        s.mask(&[(1985, 1990)]);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn index_kind_parsing() {
        for k in ["valence", "arousal", "breadth", "intensifier", "salience", "theme:pathology"] {
            assert_eq!(k.parse::<IndexKind>().unwrap().to_string(), k);
        }
        assert!("bogus".parse::<IndexKind>().is_err());
    }

    proptest! {
        #[test]
        fn weighted_index_is_convex_and_scale_free(
            pairs in proptest::collection::vec((0usize..6, 1u64..40), 1..12),
            k in 1u64..9,
        ) {
            let vocab = ["a", "b", "c", "d", "e", "f"];
            let ratings = [1.0, 2.5, 4.0, 6.1, 8.2, 9.0];
            let n = AffectNorms::from_entries(vocab.iter().zip(ratings).map(|(l, r)| (l.to_string(), Affect { valence: r, arousal: r })));
            let mut c = AnnualCollocateCounts::new("T");
            let mut ck = AnnualCollocateCounts::new("T");
            for &(i, m) in &pairs {
                c.add(2000, vocab[i], m);
                ck.add(2000, vocab[i], m * k);
            }
            let v = weighted_norm_index(&c, &n, AffectDimension::Valence, 1).points[0].value;
            let vk = weighted_norm_index(&ck, &n, AffectDimension::Valence, 1).points[0].value;
            let lo = pairs.iter().map(|&(i, _)| ratings[i]).fold(f64::INFINITY, f64::min);
            let hi = pairs.iter().map(|&(i, _)| ratings[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
            prop_assert!((v - vk).abs() < 1e-12);

            let d = ThemeDictionary::parse("x", "a\nc\n").unwrap();
            let th = theme_index(&c, &d).points[0].value;
            let thk = theme_index(&ck, &d).points[0].value;
            prop_assert!((0.0..=1.0).contains(&th));
            prop_assert!((th - thk).abs() < 1e-12);
        }
    }
}
