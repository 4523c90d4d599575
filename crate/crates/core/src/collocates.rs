//! Windowed collocate extraction and per-period rankings.
//!
//! Windows never cross sentence boundaries. Every occurrence of the target
//! contributes its own window, so a lemma sitting between two occurrences is
//! counted once per window it falls in. Target tokens are never emitted.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{LemmaFilter, LemmaSentence, ParsedDocument};

pub const DEFAULT_WINDOW: usize = 5;

/// Which token stream the window positions are counted in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSpace {
    /// Positions in the stop-word-filtered lemma stream.
    #[default]
    Lemma,
    /// Positions in the unfiltered stream; filtered lemmas are dropped from
    /// the window afterwards.
    Surface,
}

impl FromStr for WindowSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lemma" => Ok(Self::Lemma),
            "surface" => Ok(Self::Surface),
            other => Err(format!("unknown window space `{other}` (expected lemma|surface)")),
        }
    }
}

/// Collocates of `target` within `window` positions on either side.
pub fn extract_collocates<'a, S: AsRef<str>>(lemmas: &'a [S], target: &str, window: usize) -> Vec<&'a str> {
    let mut out = Vec::new();
    for (i, tok) in lemmas.iter().enumerate() {
        if tok.as_ref() != target {
            continue;
        }
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(lemmas.len());
        out.extend(
            lemmas[lo..hi]
                .iter()
                .enumerate()
                .filter(|&(j, t)| lo + j != i && t.as_ref() != target)
                .map(|(_, t)| t.as_ref()),
        );
    }
    out
}

/// Target -> year -> lemma -> count, with per-year totals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnualCollocateCounts {
    pub target: String,
    pub per_year: BTreeMap<i32, BTreeMap<String, u64>>,
    pub totals: BTreeMap<i32, u64>,
}

impl AnnualCollocateCounts {
    pub fn new(target: impl Into<String>) -> Self {
        Self { target: target.into(), ..Default::default() }
    }

    /// Adding the target itself or a zero count is a no-op.
    pub fn add(&mut self, year: i32, lemma: &str, count: u64) {
        if count == 0 || lemma == self.target {
            return;
        }
        *self.per_year.entry(year).or_default().entry(lemma.to_string()).or_insert(0) += count;
        *self.totals.entry(year).or_insert(0) += count;
    }

    pub fn add_sentence(&mut self, sentence: &LemmaSentence, window: usize) {
        for c in extract_collocates(&sentence.lemmas, &self.target, window) {
            self.add(sentence.year, c, 1);
        }
    }

    /// Associative, commutative merge of partial aggregates.
    pub fn merge(&mut self, other: &Self) {
        for (&year, lemmas) in &other.per_year {
            for (l, &c) in lemmas {
                self.add(year, l, c);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.totals.values().all(|&t| t == 0)
    }

    pub fn grand_total(&self) -> u64 {
        self.totals.values().sum()
    }

    /// Audit CSV: `target,year,lemma,count`.
    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["target", "year", "lemma", "count"])?;
        for (year, lemmas) in &self.per_year {
            for (l, c) in lemmas {
                w.write_record([self.target.as_str(), &year.to_string(), l, &c.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts collocates for several targets in one pass over a lemma stream.
#[derive(Debug, Clone)]
pub struct CollocateExtractor {
    pub window: usize,
    pub space: WindowSpace,
    filter: LemmaFilter,
}

impl CollocateExtractor {
    pub fn new(window: usize, space: WindowSpace, filter: LemmaFilter) -> Self {
        Self { window: window.max(1), space, filter }
    }

    /// Adds the sentence's contribution to each target's counts.
    ///
    /// In [`WindowSpace::Lemma`] mode the sentence must already be filtered
    /// (the lemma reader does this when given a filter); it is filtered here
    /// again, which is a no-op on filtered input.
    pub fn observe(&self, sentence: &LemmaSentence, counts: &mut [AnnualCollocateCounts]) {
        match self.space {
            WindowSpace::Lemma => {
                let kept: Vec<&str> =
                    sentence.lemmas.iter().map(String::as_str).filter(|l| self.filter.keeps(l)).collect();
                for acc in counts.iter_mut() {
                    for c in extract_collocates(&kept, &acc.target, self.window) {
                        acc.add(sentence.year, c, 1);
                    }
                }
            }
            WindowSpace::Surface => {
                for acc in counts.iter_mut() {
                    let hits: Vec<&str> = extract_collocates(&sentence.lemmas, &acc.target, self.window)
                        .into_iter()
                        .filter(|l| self.filter.keeps(l))
                        .collect();
                    for c in hits {
                        acc.add(sentence.year, c, 1);
                    }
                }
            }
        }
    }
}

/// Build counts for one target from an in-memory or streamed corpus.
pub fn annual_collocate_counts<'a>(
    corpus: impl IntoIterator<Item = &'a LemmaSentence>,
    target: &str,
    window: usize,
) -> AnnualCollocateCounts {
    let mut acc = AnnualCollocateCounts::new(target);
    for s in corpus {
        acc.add_sentence(s, window);
    }
    acc
}

/// Lemmas of tokens attached to a target occurrence by `relation`, counted
/// per year. This feeds the per-decade modifier rankings.
pub fn modifier_counts<'a>(
    docs: impl IntoIterator<Item = &'a ParsedDocument>,
    target: &str,
    relation: &str,
) -> BTreeMap<i32, BTreeMap<String, u64>> {
    let mut out: BTreeMap<i32, BTreeMap<String, u64>> = BTreeMap::new();
    for doc in docs {
        for sent in &doc.sentences {
            for (i, tok) in sent.iter().enumerate() {
                if !is_target_token(tok, target) {
                    continue;
                }
                let pos = i + 1;
                for dep in sent.iter().filter(|d| d.head == pos && d.base_deprel() == relation) {
                    *out.entry(doc.year).or_default().entry(dep.lemma.to_lowercase()).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

/// A parsed token is a target occurrence when its form or lowercase lemma is
/// the fused target.
pub fn is_target_token(tok: &crate::corpus::ParsedToken, target: &str) -> bool {
    tok.form == target || tok.lemma.to_lowercase() == target
}

/// Sum per-year tables into periods of `period_length` years, keyed by the
/// period's first year (1990 for 1990..=1999 when the length is 10).
pub fn group_by_period(
    per_year: &BTreeMap<i32, BTreeMap<String, u64>>,
    period_length: u32,
) -> BTreeMap<i32, BTreeMap<String, u64>> {
    let len = period_length.max(1) as i32;
    let mut out: BTreeMap<i32, BTreeMap<String, u64>> = BTreeMap::new();
    for (&year, terms) in per_year {
        let period = year.div_euclid(len) * len;
        let slot = out.entry(period).or_default();
        for (t, &c) in terms {
            *slot.entry(t.clone()).or_insert(0) += c;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedTerm {
    pub term: String,
    pub relative_count: f64,
}

/// Per period, the `k` terms with the highest count ÷ period total,
/// ties broken by term ascending.
pub fn top_k(
    per_year: &BTreeMap<i32, BTreeMap<String, u64>>,
    k: usize,
    period_length: u32,
) -> BTreeMap<i32, Vec<RankedTerm>> {
    group_by_period(per_year, period_length)
        .into_iter()
        .map(|(period, terms)| {
            let total: u64 = terms.values().sum();
            let mut ranked: Vec<(&String, u64)> = terms.iter().map(|(t, &c)| (t, c)).filter(|&(_, c)| c > 0).collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let list = ranked
                .into_iter()
                .take(k)
                .map(|(t, c)| RankedTerm { term: t.clone(), relative_count: c as f64 / total as f64 })
                .collect();
            (period, list)
        })
        .collect()
}

/// Rank-by-period layout: one row per rank, one column per period.
pub fn write_top_table(table: &BTreeMap<i32, Vec<RankedTerm>>, k: usize, writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["rank".to_string()];
    header.extend(table.keys().map(|p| p.to_string()));
    w.write_record(&header)?;
    for rank in 0..k {
        let mut row = vec![(rank + 1).to_string()];
        row.extend(table.values().map(|list| list.get(rank).map(|r| r.term.clone()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long layout with relative counts: `period,rank,term,relative_count`.
pub fn write_top_long(table: &BTreeMap<i32, Vec<RankedTerm>>, writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["period", "rank", "term", "relative_count"])?;
    for (period, list) in table {
        for (i, r) in list.iter().enumerate() {
            w.write_record([period.to_string(), (i + 1).to_string(), r.term.clone(), r.relative_count.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
