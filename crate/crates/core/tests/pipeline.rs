mod common;

use std::collections::BTreeSet;
use std::path::Path;

use common::{toy_config, toy_dir};
use semshift_core::report::{
    read_manifest, read_regression_csv, run_pipeline, AnalysisConfig, CellStatus, ConfigError, CorpusSpec,
    ProviderKind, ReportError, MANIFEST_FILE, REGRESSION_FILE, REGRESSION_HEADER,
};
use semshift_core::synth::{SynthConfig, SynthCorpus};

fn toy(out: &Path) -> AnalysisConfig {
    let mut cfg = AnalysisConfig::load(toy_config()).unwrap();
    cfg.output = out.to_path_buf();
    cfg
}

#[test]
fn toy_fixture_runs_twelve_ok_cells() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&toy(dir.path())).unwrap();
    let m = &bundle.manifest;
    assert_eq!(m.cells.len(), 12);
    assert_eq!(m.count(CellStatus::Ok), 12, "{:#?}", m.cells);
    assert_eq!(bundle.exit_code(), 0);
    assert_eq!(m.provider_id.as_deref(), Some("stub-gaussian-v1/d384/s0"));

    let keys: BTreeSet<_> = m.cells.iter().map(|c| (&c.corpus, &c.target, &c.index)).collect();
    assert_eq!(keys.len(), 12);
    for c in &m.cells {
        assert!(c.fits.iter().any(|f| f.model == "linear"));
        for f in &c.files {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
    }
    for t in ["mental_health", "mental_illness"] {
        let tc = &m.target_counts["toy"][t];
        assert!(tc.raw > 0);
        assert_eq!(tc.raw, tc.parsed, "{t}");
        assert!(tc.mismatched_years.is_empty());
    }
    let intens = m.cell("toy", "mental_health", "intensifier").unwrap();
    assert_eq!(intens.fits.len(), 2);
    assert!(dir.path().join("plots/toy/mental_health/theme-pathology.svg").is_file());

    let on_disk = read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(&on_disk, m);
    assert_eq!(on_disk.compute_hash(), on_disk.manifest_hash);
    for (rel, entry) in &m.files {
        assert!(dir.path().join(rel).is_file(), "{rel}");
        assert!(entry.rows > 0 || rel.contains("top_"), "{rel} is empty");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run_pipeline(&toy(a.path())).unwrap().manifest;
    let mb = run_pipeline(&toy(b.path())).unwrap().manifest;
    assert_eq!(ma.manifest_hash, mb.manifest_hash);
    assert_eq!(std::fs::read(a.path().join(MANIFEST_FILE)).unwrap(), std::fs::read(b.path().join(MANIFEST_FILE)).unwrap());
    for rel in ma.files.keys() {
        assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn seed_changes_breadth_only() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    // pools smaller than the sample size are taken whole, so shrink it
    let mut cfg = toy(a.path());
    cfg.breadth.sample_size = 5;
    let ma = run_pipeline(&cfg).unwrap().manifest;
    cfg.output = b.path().to_path_buf();
    cfg.seed = 7;
    let mb = run_pipeline(&cfg).unwrap().manifest;
    assert_ne!(ma.config_hash, mb.config_hash);
    let same = |rel: &str| ma.files[rel] == mb.files[rel];
    assert!(same("series/toy/mental_health/valence.csv"));
    assert!(same("series/toy/mental_illness/salience.csv"));
    assert!(!same("series/toy/mental_health/breadth.csv"));
}

#[test]
fn missing_norms_fail_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = toy(&out);
    cfg.lexicon.norms = Some(dir.path().join("nope.csv"));
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, ReportError::Config(ConfigError::MissingPath { .. })), "{err}");
    assert_eq!(err.exit_code(), 1);
    assert!(!out.exists());
}

#[test]
fn failing_provider_only_fails_breadth_cells() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy(dir.path());
    cfg.provider = ProviderKind::Http;
    cfg.embedding.url = "http://127.0.0.1:9".into();
    cfg.embedding.timeout_secs = 2;
    let bundle = run_pipeline(&cfg).unwrap();
    let m = &bundle.manifest;
    assert_eq!(m.cells.len(), 12);
    for c in &m.cells {
        let want = if c.index == "breadth" { CellStatus::Error } else { CellStatus::Ok };
        assert_eq!(c.status, want, "{c:?}");
    }
    assert_eq!(bundle.exit_code(), 2);
}

#[test]
fn year_mask_drops_points_before_fitting() {
    let dir = tempfile::tempdir().unwrap();
    let src = format!(
        "{}\n[[year_mask]]\ncorpus = \"toy\"\nindex = \"valence\"\nranges = [[1970, 1989]]\n",
        std::fs::read_to_string(toy_config()).unwrap()
    );
    let mut cfg = AnalysisConfig::from_toml(&src, &toy_config()).unwrap();
    cfg.output = dir.path().to_path_buf();
    let bundle = run_pipeline(&cfg).unwrap();
    let v = bundle.manifest.cell("toy", "mental_health", "valence").unwrap();
    assert_eq!(v.masked, 20);
    assert_eq!(v.points, 27);
    assert_eq!(bundle.manifest.cell("toy", "mental_health", "arousal").unwrap().masked, 0);
    let series = std::fs::read_to_string(dir.path().join("series/toy/mental_health/valence.csv")).unwrap();
    assert!(!series.contains(",1989,") && series.contains(",1990,"));
}

#[test]
fn schema_of_regression_and_top_tables() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&toy(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join(REGRESSION_FILE)).unwrap();
    assert_eq!(text.lines().next().unwrap(), REGRESSION_HEADER.join(","));
    let rows = read_regression_csv(text.as_bytes()).unwrap();
    assert_eq!(rows, bundle.regression);
    // 12 linear fits with 2 terms plus one quadratic per target with 3
    assert_eq!(rows.len(), 12 * 2 + 2 * 3);

    for stem in ["top_modifiers", "top_collocates"] {
        let t = std::fs::read_to_string(dir.path().join(format!("tables/toy/mental_health/{stem}.csv"))).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "rank,1970,1980,1990,2000,2010");
        assert_eq!(lines.len(), 11);
        for (i, l) in lines[1..].iter().enumerate() {
            assert!(l.starts_with(&format!("{},", i + 1)));
        }
    }
}

#[test]
fn overlay_plots_for_several_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy(dir.path());
    let mut second: CorpusSpec = cfg.corpora[0].clone();
    second.name = "copy".into();
    cfg.corpora.push(second);
    cfg.plots.overlay = true;
    cfg.indices = vec!["salience".parse().unwrap()];
    let m = run_pipeline(&cfg).unwrap().manifest;
    assert_eq!(m.cells.len(), 4);
    assert!(m.plots.contains(&"plots/overlay/mental_health/salience.svg".to_string()));
    let svg = std::fs::read_to_string(dir.path().join("plots/overlay/mental_health/salience.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="legend""#).count(), 2);
}

#[test]
fn shipped_fixture_regenerates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = SynthCorpus::generate(&SynthConfig::default());
    corpus.write_dir(dir.path()).unwrap();
    for f in ["raw.jsonl", "lemmas.jsonl", "parsed.conllu", "norms.csv"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(toy_dir().join(f)).unwrap(), "{f}");
    }
    assert_eq!(corpus.config_toml("toy"), std::fs::read_to_string(toy_config()).unwrap());
}

#[test]
fn precomputed_embedding_file_matches_stub() {
    use semshift_core::breadth::{collect_target_sentences, sentence_hash, write_embedding_binary, write_embedding_csv, EmbeddingFile, EmbeddingProvider, StubProvider};
    use semshift_core::report::{load_corpora, Resources};

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy(&dir.path().join("stub"));
    cfg.indices = vec!["breadth".parse().unwrap()];
    cfg.embedding.stub_dim = 16;
    let stub_run = run_pipeline(&cfg).unwrap().manifest;

    let res = Resources::load(&cfg).unwrap();
    let data = load_corpora(&cfg, &res).unwrap();
    let stub = StubProvider::new(16);
    let mut file = EmbeddingFile { provider_id: stub.provider_id().into(), dim: 16, vectors: Default::default() };
    for t in cfg.all_targets() {
        for pool in collect_target_sentences(&data[0].docs, &t, &cfg.interval_scheme().unwrap()).values() {
            for s in pool {
                file.vectors.insert(sentence_hash(&s.text), stub.vector(&s.text));
            }
        }
    }
    let csv_path = dir.path().join("vectors.csv");
    write_embedding_csv(&csv_path, &file).unwrap();
    cfg.provider = ProviderKind::File;
    cfg.embedding.file = Some(csv_path);
    cfg.output = dir.path().join("file");
    let file_run = run_pipeline(&cfg).unwrap().manifest;
    assert_eq!(file_run.provider_id, stub_run.provider_id);
    assert_eq!(file_run.files, stub_run.files);

    // the binary layout stores f32, so values agree only to single precision
    let bin_path = dir.path().join("vectors.bin");
    write_embedding_binary(&bin_path, &file).unwrap();
    cfg.embedding.file = Some(bin_path);
    cfg.output = dir.path().join("bin");
    run_pipeline(&cfg).unwrap();
    let read = |sub: &str| {
        let f = std::fs::File::open(dir.path().join(sub).join("series/toy/mental_health/breadth.csv")).unwrap();
        semshift_core::indices::read_series_csv(f).unwrap().remove(0).points
    };
    let (exact, single) = (read("stub"), read("bin"));
    assert_eq!(exact.len(), single.len());
    for (a, b) in exact.iter().zip(&single) {
        assert!((a.value - b.value).abs() < 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn target_counts_flag_view_disagreement() {
    use semshift_core::report::{run_with_data, Aggregation, CorpusData, Resources};
    use semshift_core::synth::synthetic_norms;

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy(dir.path());
    cfg.indices = vec!["intensifier".parse().unwrap()];
    let synth = SynthCorpus::generate(&SynthConfig { docs: 60, ..SynthConfig::default() });
    let res = Resources { norms: Some(synthetic_norms()), ..Resources::default() };
    let lemmas = synth.lemma_sentences();
    let mut parsed = synth.parsed_documents();
    let dropped = parsed.remove(0).year;
    let data = CorpusData::from_views("toy", synth.documents(), &lemmas, &parsed, &Aggregation::from_config(&cfg), &res);
    let m = run_with_data(&cfg, &res, &[data]).unwrap().manifest;
    let tc = &m.target_counts["toy"]["mental_health"];
    assert!(tc.raw > tc.parsed);
    assert!(tc.mismatched_years.iter().all(|&y| y == dropped));
}

#[test]
fn example_config_parses() {
    let path = toy_dir().join("../example.toml");
    let cfg = AnalysisConfig::load(&path).unwrap();
    cfg.validate_settings().unwrap();
    assert_eq!(cfg.corpora.len(), 2);
    assert_eq!(cfg.provider, ProviderKind::Http);
    assert_eq!(cfg.all_targets(), ["mental_health", "mental_illness", "physical_health"]);
    assert_eq!(cfg.year_mask[0].ranges, [(1970, 1989)]);
    // the referenced corpora are placeholders
    assert!(matches!(cfg.validate(), Err(ConfigError::MissingPath { .. })));
}
