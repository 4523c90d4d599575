use std::borrow::Cow;

use regex::Regex;

/// Literal OCR and markup artifacts removed from the raw historical corpora.
const DEFAULT_LITERALS: &[&str] = &[
    "@",
    "&c?;",
    "q!",
    "|p130",
    "NUL",
    "( STAR )",
    "<p>",
    "<>",
    " // ",
    " | ",
    " -- ",
    "*",
    "..",
    "PHOTO",
    "( COLOR )",
    "ILLUSTRATION",
    "/",
];

/// An ordered list of literal strings to strip from raw text.
///
/// Rules are applied longest first so that compound literals such as
/// `( STAR )` or ` // ` are removed before the single characters they share
/// material with. Each removed literal is replaced by a space and whitespace
/// runs are collapsed afterwards, so removals never glue neighbouring words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleaningRuleSet {
    literals: Vec<String>,
}

impl Default for CleaningRuleSet {
    fn default() -> Self {
        Self::new(DEFAULT_LITERALS.iter().map(|s| s.to_string()))
    }
}

impl CleaningRuleSet {
    pub fn new(literals: impl IntoIterator<Item = String>) -> Self {
        let mut literals: Vec<String> = literals.into_iter().filter(|l| !l.trim().is_empty()).collect();
        // stable: equal-length literals keep their configured order
        literals.sort_by_key(|l| std::cmp::Reverse(l.chars().count()));
        Self { literals }
    }

    pub fn literals(&self) -> &[String] {
        &self.literals
    }

    fn apply_once(&self, text: &str) -> String {
        let mut out = Cow::Borrowed(text);
        for lit in &self.literals {
            if out.contains(lit.as_str()) {
                out = Cow::Owned(out.replace(lit.as_str(), " "));
            }
        }
        collapse_whitespace(&out)
    }
}

/// Strip every rule literal and collapse whitespace, preserving case.
///
/// Runs the rule list to a fixpoint: removing one literal can expose another
/// (`a |*b` becomes `a | b`), and every removal deletes at least one
/// non-space character, so the loop terminates. The fixpoint makes the
/// function idempotent.
pub fn clean_text(text: &str, rules: &CleaningRuleSet) -> String {
    let mut current = collapse_whitespace(text);
    loop {
        let next = rules.apply_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Rewrites multiword target phrases into single underscore-joined tokens.
///
/// Matching is case-sensitive against the configured surface variants, on
/// word boundaries, leftmost first, preferring the longest phrase at any
/// position. Words inside a phrase may be separated by any whitespace run.
#[derive(Debug, Clone)]
pub struct TargetFuser {
    pattern: Option<Regex>,
    // normalized surface variant -> fused token
    variants: Vec<(String, String)>,
}

impl TargetFuser {
    /// Each target matches only its own canonical spelling.
    pub fn new<S: AsRef<str>>(targets: &[S]) -> Self {
        Self::with_variants(targets.iter().map(|t| (t.as_ref().to_string(), Vec::new())))
    }

    /// `targets` yields `(canonical phrase, extra surface variants)`.
    pub fn with_variants(targets: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        let mut variants = Vec::new();
        for (canonical, extra) in targets {
            let canonical = normalize_phrase(&canonical);
            if canonical.is_empty() {
                continue;
            }
            let fused = fused_token(&canonical);
            variants.push((canonical.clone(), fused.clone()));
            for v in extra {
                let v = normalize_phrase(&v);
                if !v.is_empty() {
                    variants.push((v, fused.clone()));
                }
            }
        }
        variants.sort_by(|a, b| {
            let wa = a.0.split(' ').count();
            let wb = b.0.split(' ').count();
            wb.cmp(&wa).then(b.0.len().cmp(&a.0.len())).then(a.0.cmp(&b.0))
        });
        variants.dedup_by(|a, b| a.0 == b.0);

        let pattern = if variants.is_empty() {
            None
        } else {
            let alts: Vec<String> = variants
                .iter()
                .map(|(surface, _)| {
                    surface.split(' ').map(regex::escape).collect::<Vec<_>>().join(r"\s+")
                })
                .collect();
            let re = format!(r"\b(?:{})\b", alts.join("|"));
            Some(Regex::new(&re).expect("escaped target alternation is a valid regex"))
        };
        Self { pattern, variants }
    }

    pub fn fuse(&self, text: &str) -> String {
        let Some(re) = &self.pattern else {
            return text.to_string();
        };
        re.replace_all(text, |caps: &regex::Captures<'_>| {
            let matched = normalize_phrase(&caps[0]);
            self.variants
                .iter()
                .find(|(surface, _)| *surface == matched)
                .map(|(_, fused)| fused.clone())
                .unwrap_or_else(|| fused_token(&matched))
        })
        .into_owned()
    }
}

/// Convenience wrapper over [`TargetFuser`] for one-off calls.
pub fn fuse_targets<S: AsRef<str>>(text: &str, targets: &[S]) -> String {
    TargetFuser::new(targets).fuse(text)
}

/// `"mental health"` -> `"mental_health"`.
pub fn fused_token(phrase: &str) -> String {
    phrase.split_whitespace().collect::<Vec<_>>().join("_")
}

fn normalize_phrase(p: &str) -> String {
    p.split_whitespace().collect::<Vec<_>>().join(" ")
}
