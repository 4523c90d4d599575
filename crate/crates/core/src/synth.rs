//! Seeded synthetic corpora with known, drifting ground truth.
//!
//! One generated corpus yields all three views (raw JSONL, lemma JSONL,
//! CoNLL-U) plus a matching norms file, so the views agree token for token.
//! Each target has linear ramps over the year span for the mean valence of
//! its normed collocates, the share of occurrences carrying an intensifier,
//! and the share of collocates drawn from the pathology dictionary.
//!
//! Raw text writes targets as their multiword phrase (fusion happens at
//! load) and sprinkles a few cleaning literals between sentences. The lemma
//! view keeps stop words; the loaders drop them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{fused_token, Document, Genre, LemmaSentence, ParsedDocument, ParsedToken};
use crate::lexicon::{Affect, AffectNorms};

/// Normed vocabulary in ascending valence order.
const NORMED: &[&str] = &[
    "torture", "murder", "grief", "agony", "misery", "pain", "fear", "anger", "loss", "failure", "stress", "worry",
    "danger", "problem", "doubt", "change", "group", "report", "number", "effect", "level", "system", "process",
    "factor", "support", "help", "growth", "hope", "success", "comfort", "friend", "kindness", "peace", "joy", "love",
    "delight", "laughter", "happiness", "vacation",
];
const VALENCE_LO: f64 = 1.5;
const VALENCE_HI: f64 = 8.5;

const FILLER: &[&str] = &[
    "time", "people", "way", "year", "work", "case", "study", "school", "family", "community", "policy", "program",
    "state", "service", "country", "area", "child", "woman", "man", "research",
];
const STOP: &[&str] = &["the", "of", "and", "in", "to", "is", "was", "for", "with", "on", "a", "it"];
const PATHOLOGY: &[&str] = &[
    "ailment", "clinical", "clinic", "cure", "diagnosis", "disease", "disorder", "ill", "illness", "medical",
    "medicine", "pathology", "prognosis", "sick", "sickness", "symptom", "treatment",
];
const INTENSIFIERS: &[&str] = &[
    "great", "intense", "severe", "harsh", "major", "extreme", "powerful", "serious", "devastating", "destructive",
    "debilitating",
];
const PLAIN_ADJ: &[&str] = &["public", "general", "personal", "national", "poor", "good"];
const NOISE: &[&str] = &["@ @ @ @ @", "<p>", "( STAR )", "PHOTO", "ILLUSTRATION", " // "];
const GENRES: &[Genre] = &[Genre::News, Genre::Magazine, Genre::Fiction, Genre::Nonfiction, Genre::Spoken];

/// Irregular plurals used as surface forms; the lemma is the singular.
fn surface_form(lemma: &str, plural: bool) -> String {
    if !plural {
        return lemma.to_string();
    }
    match lemma {
        "child" => "children".into(),
        "woman" => "women".into(),
        "man" => "men".into(),
        "people" | "research" | "anger" | "fear" | "help" | "peace" | "joy" | "love" | "grief" | "misery" | "agony"
        | "torture" | "happiness" | "kindness" | "stress" | "comfort" | "growth" | "hope" | "pain" | "laughter"
        | "delight" | "danger" | "doubt" | "change" | "support" | "success" | "loss" | "failure" | "worry" => {
            lemma.to_string()
        }
        l if l.ends_with('y') => format!("{}ies", &l[..l.len() - 1]),
        l if l.ends_with('s') || l.ends_with("ss") => format!("{l}es"),
        l => format!("{l}s"),
    }
}

/// Linear change from `start` at the first year to `end` at the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start: f64,
    pub end: f64,
}

impl Ramp {
    pub const fn flat(v: f64) -> Self {
        Self { start: v, end: v }
    }

    pub fn at(&self, year: i32, span: (i32, i32)) -> f64 {
        if span.1 == span.0 {
            return self.start;
        }
        let t = f64::from(year - span.0) / f64::from(span.1 - span.0);
        self.start + (self.end - self.start) * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTarget {
    /// Multiword surface phrase, e.g. `mental health`.
    pub phrase: String,
    pub valence: Ramp,
    pub intensifier: Ramp,
    pub theme: Ramp,
}

impl SynthTarget {
    pub fn fused(&self) -> String {
        fused_token(&self.phrase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub docs: usize,
    pub years: (i32, i32),
    pub sentences_per_doc: (usize, usize),
    /// Probability that a sentence mentions a target.
    pub target_share: f64,
    /// Probability that a document carries cleaning literals.
    pub noise_share: f64,
    /// SD of the per-collocate valence draw around the target's ramp.
    pub valence_sd: f64,
    /// Share of non-stop context words taken from the normed vocabulary.
    pub normed_share: f64,
    pub targets: Vec<SynthTarget>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            docs: 200,
            years: (1970, 2016),
            sentences_per_doc: (3, 6),
            target_share: 0.6,
            noise_share: 0.15,
            valence_sd: 1.0,
            normed_share: 0.75,
            targets: vec![
                SynthTarget {
                    phrase: "mental health".into(),
                    valence: Ramp { start: 6.5, end: 4.5 },
                    intensifier: Ramp { start: 0.05, end: 0.25 },
                    theme: Ramp { start: 0.05, end: 0.15 },
                },
                SynthTarget {
                    phrase: "mental illness".into(),
                    valence: Ramp::flat(3.5),
                    intensifier: Ramp { start: 0.2, end: 0.1 },
                    theme: Ramp::flat(0.2),
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthToken {
    pub form: String,
    pub lemma: String,
    pub upos: &'static str,
    /// 1-based head, 0 for the root.
    pub head: usize,
    pub deprel: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthDoc {
    pub doc_id: String,
    pub year: i32,
    pub genre: Genre,
    /// Token lists; the last token of each sentence is the full stop.
    pub sentences: Vec<Vec<SynthToken>>,
    pub noise: Option<&'static str>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub docs: Vec<SynthDoc>,
}

/// Ratings for the synthetic normed vocabulary. Valence rises evenly from
/// 1.5 to 8.5 along [`NORMED`]; arousal follows a fixed scatter in [2, 8].
pub fn synthetic_norms() -> AffectNorms {
    let k = NORMED.len() - 1;
    AffectNorms::from_entries(NORMED.iter().enumerate().map(|(i, w)| {
        let valence = VALENCE_LO + (VALENCE_HI - VALENCE_LO) * i as f64 / k as f64;
        let arousal = 2.0 + 6.0 * ((i * 7) % 13) as f64 / 12.0;
        let round = |v: f64| (v * 100.0).round() / 100.0;
        (w.to_string(), Affect { valence: round(valence), arousal: round(arousal) })
    }))
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    cfg: &'a SynthConfig,
    norms: Vec<(&'static str, f64)>,
}

impl Builder<'_> {
    fn word(&self, lemma: &str, upos: &'static str, head: usize, deprel: &'static str, plural: bool) -> SynthToken {
        SynthToken { form: surface_form(lemma, plural), lemma: lemma.to_string(), upos, head, deprel }
    }

    fn normed_near(&mut self, mean: f64) -> &'static str {
        let v = Normal::new(mean, self.cfg.valence_sd).expect("finite sd").sample(&mut self.rng);
        self.norms
            .iter()
            .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
            .map(|(w, _)| *w)
            .expect("non-empty vocabulary")
    }

    /// One context word; `root` is where it attaches.
    fn context(&mut self, root: usize, target: Option<(&SynthTarget, i32)>) -> SynthToken {
        if self.rng.random_bool(0.3) {
            let w = *STOP.choose(&mut self.rng).expect("stop words");
            return self.word(w, "DET", root, "det", false);
        }
        let plural = self.rng.random_bool(0.25);
        if let Some((t, year)) = target {
            if self.rng.random_bool(t.theme.at(year, self.cfg.years).clamp(0.0, 1.0)) {
                let w = *PATHOLOGY.choose(&mut self.rng).expect("pathology");
                return self.word(w, "NOUN", root, "dep", false);
            }
            if self.rng.random_bool(self.cfg.normed_share) {
                let w = self.normed_near(t.valence.at(year, self.cfg.years));
                return self.word(w, "NOUN", root, "dep", plural);
            }
        } else if self.rng.random_bool(0.5) {
            let mean = self.rng.random_range(VALENCE_LO..VALENCE_HI);
            let w = self.normed_near(mean);
            return self.word(w, "NOUN", root, "dep", plural);
        }
        let w = *FILLER.choose(&mut self.rng).expect("filler");
        self.word(w, "NOUN", root, "dep", plural)
    }

    fn target_sentence(&mut self, t: &SynthTarget, year: i32) -> Vec<SynthToken> {
        let fused = t.fused();
        let left = self.rng.random_range(2..=6);
        let right = self.rng.random_range(2..=6);
        let intens = self.rng.random_bool(t.intensifier.at(year, self.cfg.years).clamp(0.0, 1.0));
        let double_intens = intens && self.rng.random_bool(0.1);
        let plain_adj = !intens && self.rng.random_bool(0.15);
        let repeat = self.rng.random_bool(0.1);
        let n_adj = usize::from(intens) + usize::from(double_intens) + usize::from(plain_adj);
        // position of the (first) target, 1-based
        let root = left + n_adj + 1;

        let mut toks = Vec::new();
        for _ in 0..left {
            toks.push(self.context(root, Some((t, year))));
        }
        if intens {
            let mut picks: Vec<&str> = INTENSIFIERS.choose_multiple(&mut self.rng, 2).copied().collect();
            picks.truncate(1 + usize::from(double_intens));
            for w in picks {
                toks.push(self.word(w, "ADJ", root, "amod", false));
            }
        }
        if plain_adj {
            let w = *PLAIN_ADJ.choose(&mut self.rng).expect("adjectives");
            toks.push(self.word(w, "ADJ", root, "amod", false));
        }
        toks.push(SynthToken { form: fused.clone(), lemma: fused.clone(), upos: "NOUN", head: 0, deprel: "root" });
        let repeat_at = repeat.then(|| self.rng.random_range(0..right));
        for i in 0..right {
            if repeat_at == Some(i) {
                toks.push(self.word("and", "CCONJ", root, "cc", false));
                toks.push(SynthToken { form: fused.clone(), lemma: fused.clone(), upos: "NOUN", head: root, deprel: "conj" });
            } else {
                toks.push(self.context(root, Some((t, year))));
            }
        }
        toks.push(SynthToken { form: ".".into(), lemma: ".".into(), upos: "PUNCT", head: root, deprel: "punct" });
        toks
    }

    fn filler_sentence(&mut self) -> Vec<SynthToken> {
        let n = self.rng.random_range(4..=10);
        let mut toks: Vec<SynthToken> = (0..n).map(|_| self.context(1, None)).collect();
        toks[0].head = 0;
        toks[0].deprel = "root";
        toks.push(SynthToken { form: ".".into(), lemma: ".".into(), upos: "PUNCT", head: 1, deprel: "punct" });
        toks
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl SynthCorpus {
    /// Documents are spread round-robin over the year span.
    pub fn generate(config: &SynthConfig) -> Self {
        let nyears = (config.years.1 - config.years.0 + 1).max(1) as usize;
        let norms = synthetic_norms();
        let mut b = Builder {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            cfg: config,
            norms: NORMED.iter().map(|w| (*w, norms.get(w).expect("normed").valence)).collect(),
        };
        let mut docs = Vec::with_capacity(config.docs);
        for i in 0..config.docs {
            let year = config.years.0 + (i % nyears) as i32;
            let genre = *GENRES.choose(&mut b.rng).expect("genres");
            let (lo, hi) = config.sentences_per_doc;
            let n = b.rng.random_range(lo..=hi.max(lo));
            let mut sentences = Vec::with_capacity(n);
            for _ in 0..n {
                let s = if !config.targets.is_empty() && b.rng.random_bool(config.target_share) {
                    let t = config.targets.choose(&mut b.rng).expect("targets").clone();
                    b.target_sentence(&t, year)
                } else {
                    b.filler_sentence()
                };
                sentences.push(s);
            }
            for s in &mut sentences {
                // fusion is case-sensitive, so a leading target keeps its case
                if !s[0].form.contains('_') {
                    s[0].form = capitalize(&s[0].form);
                }
            }
            let noise = b.rng.random_bool(config.noise_share).then(|| *NOISE.choose(&mut b.rng).expect("noise"));
            docs.push(SynthDoc { doc_id: format!("syn-{i:04}"), year, genre, sentences, noise });
        }
        Self { config: config.clone(), docs }
    }

    pub fn target_tokens(&self) -> Vec<String> {
        self.config.targets.iter().map(SynthTarget::fused).collect()
    }

    pub fn target_phrases(&self) -> Vec<String> {
        self.config.targets.iter().map(|t| t.phrase.clone()).collect()
    }

    /// Surface text before cleaning and fusion.
    pub fn raw_text(doc: &SynthDoc) -> String {
        let mut out = String::new();
        if doc.noise == Some("<p>") {
            out.push_str("<p>");
        }
        for (si, s) in doc.sentences.iter().enumerate() {
            if si > 0 {
                match doc.noise {
                    Some(n) if n != "<p>" && si == 1 => {
                        out.push(' ');
                        out.push_str(n.trim());
                        out.push(' ');
                    }
                    _ => out.push(' '),
                }
            }
            for (ti, t) in s.iter().enumerate() {
                if t.upos == "PUNCT" {
                    out.push_str(&t.form);
                    continue;
                }
                if ti > 0 {
                    out.push(' ');
                }
                out.push_str(&t.form.replace('_', " "));
            }
        }
        out
    }

    pub fn documents(&self) -> Vec<Document> {
        self.docs
            .iter()
            .map(|d| Document { doc_id: d.doc_id.clone(), year: d.year, genre: d.genre, text: Self::raw_text(d) })
            .collect()
    }

    /// Lowercase lemmas of every non-punctuation token, stop words included.
    pub fn lemma_sentences(&self) -> Vec<LemmaSentence> {
        self.docs
            .iter()
            .flat_map(|d| {
                d.sentences.iter().map(move |s| LemmaSentence {
                    doc_id: d.doc_id.clone(),
                    year: d.year,
                    lemmas: s.iter().filter(|t| t.upos != "PUNCT").map(|t| t.lemma.to_lowercase()).collect(),
                })
            })
            .collect()
    }

    pub fn parsed_documents(&self) -> Vec<ParsedDocument> {
        self.docs
            .iter()
            .map(|d| ParsedDocument {
                doc_id: d.doc_id.clone(),
                year: d.year,
                sentences: d
                    .sentences
                    .iter()
                    .map(|s| {
                        s.iter()
                            .map(|t| ParsedToken {
                                form: t.form.clone(),
                                lemma: t.lemma.clone(),
                                upos: t.upos.to_string(),
                                head: t.head,
                                deprel: t.deprel.to_string(),
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn write_raw_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for d in &self.docs {
            let rec = serde_json::json!({
                "doc_id": d.doc_id,
                "year": d.year,
                "genre": d.genre.to_string(),
                "text": Self::raw_text(d),
            });
            writeln!(w, "{rec}")?;
        }
        w.flush()
    }

    pub fn write_lemma_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for d in &self.docs {
            let sentences: Vec<Vec<String>> = d
                .sentences
                .iter()
                .map(|s| s.iter().filter(|t| t.upos != "PUNCT").map(|t| t.lemma.to_lowercase()).collect())
                .collect();
            let rec = serde_json::json!({ "doc_id": d.doc_id, "year": d.year, "sentences": sentences });
            writeln!(w, "{rec}")?;
        }
        w.flush()
    }

    pub fn write_conllu(&self, mut w: impl Write) -> std::io::Result<()> {
        for d in &self.docs {
            writeln!(w, "# doc_id = {}", d.doc_id)?;
            writeln!(w, "# year = {}", d.year)?;
            for (si, s) in d.sentences.iter().enumerate() {
                writeln!(w, "# sent_id = {}-{}", d.doc_id, si + 1)?;
                for (i, t) in s.iter().enumerate() {
                    writeln!(w, "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_", i + 1, t.form, t.lemma, t.upos, t.head, t.deprel)?;
                }
                writeln!(w)?;
            }
        }
        w.flush()
    }

    /// Writes `raw.jsonl`, `lemmas.jsonl`, `parsed.conllu` and `norms.csv`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> std::io::Result<SynthPaths> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let paths = SynthPaths {
            raw: dir.join("raw.jsonl"),
            lemmas: dir.join("lemmas.jsonl"),
            conllu: dir.join("parsed.conllu"),
            norms: dir.join("norms.csv"),
        };
        self.write_raw_jsonl(BufWriter::new(File::create(&paths.raw)?))?;
        self.write_lemma_jsonl(BufWriter::new(File::create(&paths.lemmas)?))?;
        self.write_conllu(BufWriter::new(File::create(&paths.conllu)?))?;
        synthetic_norms()
            .write_csv(BufWriter::new(File::create(&paths.norms)?))
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(paths)
    }

    /// An analysis config for the files written by [`SynthCorpus::write_dir`],
    /// with paths relative to that directory.
    pub fn config_toml(&self, name: &str) -> String {
        let targets: Vec<String> = self.target_phrases().iter().map(|t| format!("{t:?}")).collect();
        format!(
            r#"seed = {seed}
output = "out"
targets = [{targets}]
indices = ["valence", "arousal", "breadth", "intensifier", "theme:pathology", "salience"]
study_window = [{y0}, {y1}]
provider = "stub"

[lexicon]
norms = "norms.csv"

[stats]
quadratic = ["intensifier"]

[[corpora]]
name = "{name}"
raw = "raw.jsonl"
lemmas = "lemmas.jsonl"
conllu = "parsed.conllu"
"#,
            seed = self.config.seed,
            targets = targets.join(", "),
            y0 = self.config.years.0,
            y1 = self.config.years.1,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub raw: PathBuf,
    pub lemmas: PathBuf,
    pub conllu: PathBuf,
    pub norms: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CleaningRuleSet, LemmaFilter, TargetFuser};
    use crate::lexicon::{IntensifierSet, ThemeDictionary};

    #[test]
    fn deterministic() {
        let cfg = SynthConfig { docs: 30, ..Default::default() };
        let a = SynthCorpus::generate(&cfg);
        let b = SynthCorpus::generate(&cfg);
        assert_eq!(a.docs, b.docs);
        let c = SynthCorpus::generate(&SynthConfig { seed: 7, ..cfg });
        assert_ne!(a.docs, c.docs);
    }

    #[test]
    fn vocabulary_is_consistent_with_bundled_lists() {
        let stop = LemmaFilter::default();
        for w in NORMED.iter().chain(FILLER).chain(PATHOLOGY).chain(INTENSIFIERS).chain(PLAIN_ADJ) {
            assert!(stop.keeps(w), "{w} would be dropped");
        }
        for w in STOP {
            assert!(stop.is_stopword(w), "{w} is not a stop word");
        }
        let path = ThemeDictionary::pathology();
        assert!(PATHOLOGY.iter().all(|w| path.contains(w)));
        let int = IntensifierSet::default();
        assert!(INTENSIFIERS.iter().all(|w| int.contains(w)));
        assert!(PLAIN_ADJ.iter().all(|w| !int.contains(w)));
        let norms = synthetic_norms();
        assert!(FILLER.iter().chain(PATHOLOGY).chain(INTENSIFIERS).all(|w| !norms.contains(w)));
    }

    #[test]
    fn raw_view_fuses_to_parsed_tokens() {
        let corpus = SynthCorpus::generate(&SynthConfig { docs: 60, noise_share: 0.5, ..Default::default() });
        let rules = CleaningRuleSet::default();
        let fuser = TargetFuser::new(&corpus.target_phrases());
        for (doc, raw) in corpus.docs.iter().zip(corpus.documents()) {
            let prepared = raw.prepare(&rules, &fuser).unwrap();
            let expect: Vec<String> = doc
                .sentences
                .iter()
                .flat_map(|s| {
                    let words: Vec<&SynthToken> = s.iter().filter(|t| t.upos != "PUNCT").collect();
                    let last = words.len() - 1;
                    words.into_iter().enumerate().map(move |(i, t)| if i == last { format!("{}.", t.form) } else { t.form.clone() })
                })
                .collect();
            let got: Vec<&str> = prepared.text.split_whitespace().collect();
            assert_eq!(got, expect, "{}", doc.doc_id);
        }
    }

    #[test]
    fn ramps_interpolate() {
        let r = Ramp { start: 7.0, end: 3.0 };
        assert_eq!(r.at(1970, (1970, 2016)), 7.0);
        assert_eq!(r.at(2016, (1970, 2016)), 3.0);
        assert_eq!(r.at(1993, (1970, 2016)), 5.0);
    }
}
