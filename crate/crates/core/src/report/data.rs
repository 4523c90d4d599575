//! Loaded lexicons and per-corpus aggregates that the index cells read.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{AnalysisConfig, ConfigError, CorpusSpec};
use super::ReportError;
use crate::breadth::{breadth_series, collect_target_sentences, BreadthParams, Embedder, IntervalScheme};
use crate::collocates::{modifier_counts, top_k, AnnualCollocateCounts, CollocateExtractor, RankedTerm, WindowSpace};
use crate::corpus::{
    load_conllu, load_raw_corpus, read_lemma_corpus, CleaningRuleSet, ConlluStats, Document, LemmaFilter,
    LemmaSentence, LoadStats, ParsedDocument, RawFormat, StudyWindow, TargetFuser,
};
use crate::indices::{
    salience, theme_index, weighted_norm_index, IndexKind, IndexSeries, IntensifierTally,
};
use crate::lexicon::{AffectDimension, AffectNorms, IntensifierSet, ThemeDictionary};

/// Immutable lexical resources shared by every cell.
#[derive(Debug, Clone)]
pub struct Resources {
    pub norms: Option<AffectNorms>,
    pub themes: BTreeMap<String, ThemeDictionary>,
    pub intensifiers: IntensifierSet,
    pub filter: LemmaFilter,
    pub rules: CleaningRuleSet,
}

impl Default for Resources {
    fn default() -> Self {
        let mut themes = BTreeMap::new();
        themes.insert("pathology".to_string(), ThemeDictionary::pathology());
        Self {
            norms: None,
            themes,
            intensifiers: IntensifierSet::default(),
            filter: LemmaFilter::default(),
            rules: CleaningRuleSet::default(),
        }
    }
}

impl Resources {
    pub fn load(cfg: &AnalysisConfig) -> Result<Self, ConfigError> {
        let mut r = Self::default();
        if let Some(p) = &cfg.lexicon.norms {
            r.norms = Some(AffectNorms::load(p)?);
        }
        for (name, p) in &cfg.lexicon.themes {
            let mut d = ThemeDictionary::load(p)?;
            d.name = name.clone();
            r.themes.insert(name.clone(), d);
        }
        if let Some(p) = &cfg.lexicon.intensifiers {
            r.intensifiers = IntensifierSet::load(p)?;
        }
        if let Some(p) = &cfg.lexicon.stopwords {
            r.filter = LemmaFilter::from_file(p).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(r)
    }
}

/// Per-view load accounting for the manifest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewStats {
    pub raw: Option<LoadStats>,
    pub lemmas: Option<LoadStats>,
    pub conllu: Option<ConlluStats>,
}

/// Aggregation settings taken from the config.
#[derive(Debug, Clone)]
pub struct Aggregation {
    pub targets: Vec<String>,
    pub window: usize,
    pub space: WindowSpace,
    pub relation: String,
}

impl Aggregation {
    pub fn from_config(cfg: &AnalysisConfig) -> Self {
        Self {
            targets: cfg.all_targets(),
            window: cfg.window,
            space: cfg.window_space,
            relation: cfg.modifier_relation.clone(),
        }
    }
}

/// Everything the cells need from one corpus, built in a single pass per
/// view.
#[derive(Debug, Clone, Default)]
pub struct CorpusData {
    pub name: String,
    /// Cleaned, fused raw documents.
    pub docs: Vec<Document>,
    pub counts: BTreeMap<String, AnnualCollocateCounts>,
    pub intensifiers: BTreeMap<String, IntensifierTally>,
    pub modifiers: BTreeMap<String, BTreeMap<i32, BTreeMap<String, u64>>>,
    pub stats: ViewStats,
}

struct LemmaAcc {
    extractor: CollocateExtractor,
    counts: Vec<AnnualCollocateCounts>,
}

impl LemmaAcc {
    fn new(agg: &Aggregation, filter: &LemmaFilter) -> Self {
        Self {
            extractor: CollocateExtractor::new(agg.window, agg.space, filter.clone()),
            counts: agg.targets.iter().map(AnnualCollocateCounts::new).collect(),
        }
    }

    fn add(&mut self, s: &LemmaSentence) {
        self.extractor.observe(s, &mut self.counts);
    }

    fn finish(self) -> BTreeMap<String, AnnualCollocateCounts> {
        self.counts.into_iter().map(|c| (c.target.clone(), c)).collect()
    }
}

type ParsedAgg = (BTreeMap<String, IntensifierTally>, BTreeMap<String, BTreeMap<i32, BTreeMap<String, u64>>>);

struct ParsedAcc<'a> {
    agg: &'a Aggregation,
    intens: &'a IntensifierSet,
    tallies: BTreeMap<String, IntensifierTally>,
    modifiers: BTreeMap<String, BTreeMap<i32, BTreeMap<String, u64>>>,
}

impl<'a> ParsedAcc<'a> {
    fn new(agg: &'a Aggregation, intens: &'a IntensifierSet) -> Self {
        Self {
            agg,
            intens,
            tallies: agg.targets.iter().map(|t| (t.clone(), IntensifierTally::default())).collect(),
            modifiers: agg.targets.iter().map(|t| (t.clone(), BTreeMap::new())).collect(),
        }
    }

    fn add(&mut self, doc: &ParsedDocument) {
        for t in &self.agg.targets {
            self.tallies.get_mut(t).expect("target").observe(doc, t, self.intens, &self.agg.relation);
            let slot = self.modifiers.get_mut(t).expect("target");
            for (year, terms) in modifier_counts(std::iter::once(doc), t, &self.agg.relation) {
                let y = slot.entry(year).or_default();
                for (term, c) in terms {
                    *y.entry(term).or_insert(0) += c;
                }
            }
        }
    }

    fn finish(self) -> ParsedAgg {
        (self.tallies, self.modifiers)
    }
}

fn prepare_docs(raw: impl IntoIterator<Item = Document>, res: &Resources, fuser: &TargetFuser) -> Vec<Document> {
    raw.into_iter().filter_map(|d| d.prepare(&res.rules, fuser)).collect()
}

fn fuser_for(agg: &Aggregation) -> TargetFuser {
    let phrases: Vec<String> = agg.targets.iter().map(|t| t.replace('_', " ")).collect();
    TargetFuser::new(&phrases)
}

impl CorpusData {
    /// Build from in-memory views. Raw documents are cleaned and fused
    /// here; lemma and parsed views must already carry fused targets.
    pub fn from_views<'a>(
        name: &str,
        raw: impl IntoIterator<Item = Document>,
        lemmas: impl IntoIterator<Item = &'a LemmaSentence>,
        parsed: impl IntoIterator<Item = &'a ParsedDocument>,
        agg: &Aggregation,
        res: &Resources,
    ) -> Self {
        let docs = prepare_docs(raw, res, &fuser_for(agg));
        let mut la = LemmaAcc::new(agg, &res.filter);
        lemmas.into_iter().for_each(|s| la.add(s));
        let mut pa = ParsedAcc::new(agg, &res.intensifiers);
        parsed.into_iter().for_each(|d| pa.add(d));
        let (intensifiers, modifiers) = pa.finish();
        Self { name: name.to_string(), docs, counts: la.finish(), intensifiers, modifiers, stats: ViewStats::default() }
    }

    /// Streams the configured files. The three views load in parallel.
    pub fn load(spec: &CorpusSpec, window: StudyWindow, agg: &Aggregation, res: &Resources) -> Result<Self, ReportError> {
        let load_raw = || -> Result<(Vec<Document>, Option<LoadStats>), ReportError> {
            let Some(p) = &spec.raw else { return Ok((Vec::new(), None)) };
            let mut reader = load_raw_corpus(p, RawFormat::from_path(p), Some(window))?;
            let fuser = fuser_for(agg);
            let mut docs = Vec::new();
            for d in reader.by_ref() {
                if let Some(d) = d?.prepare(&res.rules, &fuser) {
                    docs.push(d);
                }
            }
            Ok((docs, Some(reader.stats())))
        };
        let load_lemmas = || -> Result<(BTreeMap<String, AnnualCollocateCounts>, Option<LoadStats>), ReportError> {
            let mut acc = LemmaAcc::new(agg, &res.filter);
            let Some(p) = &spec.lemmas else { return Ok((acc.finish(), None)) };
            // unfiltered: the extractor applies the filter in the configured window space
            let mut reader = read_lemma_corpus(p, None, Some(window))?;
            for s in reader.by_ref() {
                acc.add(&s?);
            }
            Ok((acc.finish(), Some(reader.stats())))
        };
        let load_parsed = || -> Result<(ParsedAgg, Option<ConlluStats>), ReportError> {
            let mut acc = ParsedAcc::new(agg, &res.intensifiers);
            let Some(p) = &spec.conllu else { return Ok((acc.finish(), None)) };
            let mut reader = load_conllu(p, Some(window))?;
            for d in reader.by_ref() {
                acc.add(&d?);
            }
            Ok((acc.finish(), Some(reader.stats())))
        };
        let (raw, (lemmas, parsed)) = rayon::join(load_raw, || rayon::join(load_lemmas, load_parsed));
        let (docs, raw_stats) = raw?;
        let (counts, lemma_stats) = lemmas?;
        let ((intensifiers, modifiers), conllu_stats) = parsed?;
        Ok(Self {
            name: spec.name.clone(),
            docs,
            counts,
            intensifiers,
            modifiers,
            stats: ViewStats { raw: raw_stats, lemmas: lemma_stats, conllu: conllu_stats },
        })
    }

    pub fn counts(&self, target: &str) -> AnnualCollocateCounts {
        self.counts.get(target).cloned().unwrap_or_else(|| AnnualCollocateCounts::new(target))
    }
}

/// Settings for computing one index series.
pub struct SeriesContext<'a> {
    pub res: &'a Resources,
    pub min_matched: u64,
    pub scheme: IntervalScheme,
    pub breadth: BreadthParams,
    pub embedder: Option<&'a Embedder<'a>>,
}

/// Unmasked series for one (corpus, target, index).
pub fn compute_series(data: &CorpusData, target: &str, index: &IndexKind, ctx: &SeriesContext<'_>) -> Result<IndexSeries, String> {
    let counts = || data.counts.get(target).ok_or_else(|| format!("no collocate counts for `{target}`"));
    match index {
        IndexKind::Valence | IndexKind::Arousal => {
            let norms = ctx.res.norms.as_ref().ok_or("no norms loaded")?;
            let dim = if *index == IndexKind::Valence { AffectDimension::Valence } else { AffectDimension::Arousal };
            Ok(weighted_norm_index(counts()?, norms, dim, ctx.min_matched))
        }
        IndexKind::Theme(name) => {
            let dict = ctx.res.themes.get(name).ok_or_else(|| format!("unknown theme `{name}`"))?;
            Ok(theme_index(counts()?, dict))
        }
        IndexKind::Intensifier => data
            .intensifiers
            .get(target)
            .map(|t| t.series(target))
            .ok_or_else(|| format!("no parsed tallies for `{target}`")),
        IndexKind::Salience => Ok(salience(&data.docs, target)),
        IndexKind::Breadth => {
            let embedder = ctx.embedder.ok_or("no embedding provider available")?;
            let pools = collect_target_sentences(&data.docs, target, &ctx.scheme);
            breadth_series(&pools, target, embedder, &ctx.breadth).map(|r| r.series).map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopKind {
    Modifiers,
    Collocates,
}

impl std::str::FromStr for TopKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modifiers" => Ok(Self::Modifiers),
            "collocates" => Ok(Self::Collocates),
            other => Err(format!("unknown table `{other}` (expected modifiers|collocates)")),
        }
    }
}

impl TopKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            TopKind::Modifiers => "top_modifiers",
            TopKind::Collocates => "top_collocates",
        }
    }
}

/// Ranked terms per period for one target.
pub fn top_table(data: &CorpusData, target: &str, what: TopKind, k: usize, period: u32) -> BTreeMap<i32, Vec<RankedTerm>> {
    let empty = BTreeMap::new();
    let per_year = match what {
        TopKind::Modifiers => data.modifiers.get(target).unwrap_or(&empty),
        TopKind::Collocates => data.counts.get(target).map(|c| &c.per_year).unwrap_or(&empty),
    };
    top_k(per_year, k, period)
}
