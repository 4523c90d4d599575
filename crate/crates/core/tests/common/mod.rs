//! Shared helpers for integration tests: fixture paths and a brute-force
//! index oracle that reads the fixture files without touching the crate's
//! loaders, lexicon types, or index code.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn toy_dir() -> PathBuf {
    repo_root().join("fixtures/toy")
}

pub fn toy_config() -> PathBuf {
    toy_dir().join("config.toml")
}

fn data_file(name: &str) -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)).unwrap()
}

fn word_list(name: &str) -> HashSet<String> {
    data_file(name)
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// (index, target, year) -> (value, n)
pub type OracleTable = BTreeMap<(String, String, i32), (f64, u64)>;

pub const TARGETS: [&str; 2] = ["mental_health", "mental_illness"];
const WINDOW: usize = 5;
const YEARS: (i32, i32) = (1970, 2016);

const LITERALS: [&str; 17] = [
    "@", "&c?;", "q!", "|p130", "NUL", "( STAR )", "<p>", "<>", " // ", " | ", " -- ", "*", "..", "PHOTO",
    "( COLOR )", "ILLUSTRATION", "/",
];

fn in_years(y: i32) -> bool {
    (YEARS.0..=YEARS.1).contains(&y)
}

fn put(t: &mut OracleTable, index: &str, target: &str, year: i32, hit: f64, total: f64, n: u64) {
    if n > 0 {
        t.insert((index.to_string(), target.to_string(), year), (hit / total, n));
    }
}

/// Every window position counted explicitly, per target and year.
fn collocates(dir: &std::path::Path) -> BTreeMap<(String, i32), BTreeMap<String, u64>> {
    let stop = word_list("stopwords_en.txt");
    let mut out: BTreeMap<(String, i32), BTreeMap<String, u64>> = BTreeMap::new();
    for line in std::fs::read_to_string(dir.join("lemmas.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let year = v["year"].as_i64().unwrap() as i32;
        if !in_years(year) {
            continue;
        }
        for sent in v["sentences"].as_array().unwrap() {
            let kept: Vec<String> = sent
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_str().unwrap().to_lowercase())
                .filter(|l| l.chars().any(|c| c.is_alphabetic()) && !stop.contains(l))
                .collect();
            for target in TARGETS {
                for i in 0..kept.len() {
                    if kept[i] != target {
                        continue;
                    }
                    for j in 0..kept.len() {
                        let d = i.abs_diff(j);
                        if d == 0 || d > WINDOW || kept[j] == target {
                            continue;
                        }
                        *out.entry((target.to_string(), year)).or_default().entry(kept[j].clone()).or_default() += 1;
                    }
                }
            }
        }
    }
    out
}

fn norms(dir: &std::path::Path) -> HashMap<String, (f64, f64)> {
    let text = std::fs::read_to_string(dir.join("norms.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (w, v, a) = (col("word"), col("valence_mean"), col("arousal_mean"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[w].to_lowercase(), (f[v].parse().unwrap(), f[a].parse().unwrap()))
        })
        .collect()
}

fn clean(text: &str) -> String {
    let mut lits = LITERALS.to_vec();
    lits.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()));
    let collapse = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut cur = collapse(text);
    loop {
        let mut next = cur.clone();
        for l in &lits {
            next = collapse(&next.replace(l, " "));
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Whitespace tokens after cleaning, with `mental <x>` merged when `<x>`
/// begins with a target head word.
fn fused_tokens(text: &str) -> Vec<String> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i] == "mental" && i + 1 < toks.len() {
            let next = toks[i + 1];
            let head: String = next.chars().take_while(|c| c.is_alphanumeric()).collect();
            if (head == "health" || head == "illness") && !next[head.len()..].starts_with(|c: char| c.is_alphanumeric() || c == '_') {
                out.push(format!("mental_{next}"));
                i += 2;
                continue;
            }
        }
        out.push(toks[i].to_string());
        i += 1;
    }
    out
}

/// Valence, arousal, theme:pathology, intensifier and salience for both
/// fixture targets, computed from the files in `dir`.
pub fn oracle(dir: &std::path::Path) -> OracleTable {
    let mut t = OracleTable::new();
    let coll = collocates(dir);
    let norms = norms(dir);
    let theme = word_list("pathology.txt");
    for ((target, year), lemmas) in &coll {
        let (mut vs, mut as_, mut m, mut total, mut hits) = (0.0, 0.0, 0u64, 0u64, 0u64);
        for (l, &c) in lemmas {
            total += c;
            if let Some(&(v, a)) = norms.get(l) {
                vs += v * c as f64;
                as_ += a * c as f64;
                m += c;
            }
            if theme.contains(l) {
                hits += c;
            }
        }
        put(&mut t, "valence", target, *year, vs, m as f64, m);
        put(&mut t, "arousal", target, *year, as_, m as f64, m);
        put(&mut t, "theme:pathology", target, *year, hits as f64, total as f64, total);
    }

    let intens = word_list("intensifiers.txt");
    let mut tally: HashMap<(String, i32), (u64, u64)> = HashMap::new();
    let conllu = std::fs::read_to_string(dir.join("parsed.conllu")).unwrap();
    let mut year = 0;
    let mut sent: Vec<Vec<String>> = Vec::new();
    let mut flush = |sent: &mut Vec<Vec<String>>, year: i32| {
        if in_years(year) {
            for (i, tok) in sent.iter().enumerate() {
                for target in TARGETS {
                    if tok[1] != target && tok[2].to_lowercase() != target {
                        continue;
                    }
                    let pos = (i + 1).to_string();
                    let hit = sent.iter().any(|d| {
                        d[6] == pos && d[7].split(':').next() == Some("amod") && intens.contains(&d[2].to_lowercase())
                    });
                    let e = tally.entry((target.to_string(), year)).or_default();
                    e.1 += 1;
                    e.0 += hit as u64;
                }
            }
        }
        sent.clear();
    };
    for line in conllu.lines() {
        if let Some(y) = line.strip_prefix("# year = ") {
            year = y.trim().parse().unwrap();
        } else if line.is_empty() {
            flush(&mut sent, year);
        } else if !line.starts_with('#') {
            sent.push(line.split('\t').map(String::from).collect());
        }
    }
    flush(&mut sent, year);
    for ((target, year), (hit, total)) in tally {
        put(&mut t, "intensifier", &target, year, hit as f64, total as f64, total);
    }

    let mut sal: HashMap<(String, i32), (u64, u64)> = HashMap::new();
    for line in std::fs::read_to_string(dir.join("raw.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let year = v["year"].as_i64().unwrap() as i32;
        if !in_years(year) {
            continue;
        }
        let toks = fused_tokens(&clean(v["text"].as_str().unwrap()));
        for target in TARGETS {
            let e = sal.entry((target.to_string(), year)).or_default();
            e.1 += toks.len() as u64;
            e.0 += toks.iter().filter(|w| w.trim_end_matches(|c: char| !c.is_alphanumeric()) == target).count() as u64;
        }
    }
    for ((target, year), (hit, total)) in sal {
        put(&mut t, "salience", &target, year, hit as f64, total as f64, total);
    }
    t
}

pub fn write_table(t: &OracleTable) -> String {
    let mut s = String::from("index,target,year,value,n\n");
    for ((i, target, y), (v, n)) in t {
        s.push_str(&format!("{i},{target},{y},{v:?},{n}\n"));
    }
    s
}

pub fn read_table(src: &str) -> OracleTable {
    src.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            ((f[0].to_string(), f[1].to_string(), f[2].parse().unwrap()), (f[3].parse().unwrap(), f[4].parse().unwrap()))
        })
        .collect()
}
