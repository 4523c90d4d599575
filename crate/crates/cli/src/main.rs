use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semshift_core::collocates::{write_top_table, RankedTerm};
use semshift_core::corpus::fused_token;
use semshift_core::indices::{read_series_csv, IndexKind};
use semshift_core::report::{
    regression_rows, run_pipeline, top_table, write_regression_csv, AnalysisConfig, CellStatus, Overrides,
    ProviderKind, ReportError, Resources, TopKind,
};
use semshift_core::stats::{fit_trend, TrendModel, TrendOptions};
use semshift_core::synth::{SynthConfig, SynthCorpus};

const EXIT_CONFIG: u8 = 1;
const EXIT_FATAL: u8 = 3;

#[derive(Parser)]
#[command(name = "semshift", version, about = "Diachronic semantic change indices and trend tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (corpus, target, index) cell.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "target")]
        targets: Vec<String>,
        #[arg(long = "index")]
        indices: Vec<IndexKind>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        provider: Option<ProviderKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the top-k modifier or collocate table for one corpus and target.
    Top {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        what: TopKind,
        /// Only this period, as `rank,term,relative_count` rows.
        #[arg(long)]
        decade: Option<i32>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Defaults to the first configured corpus.
        #[arg(long)]
        corpus: Option<String>,
        /// Defaults to the first configured target.
        #[arg(long)]
        target: Option<String>,
    },
    /// Fit a trend to every series in a series CSV and print regression rows.
    Fit {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value = "linear")]
        model: TrendModel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Write a synthetic drift corpus and a matching config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        docs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Corpus name in the written config.
        #[arg(long, default_value = "synth")]
        name: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Analyze { config, targets, indices, seed, provider, out } => {
            analyze(config, Overrides { targets, indices, seed, provider, output: out })
        }
        Command::Top { config, what, decade, k, corpus, target } => top(config, what, decade, k, corpus, target),
        Command::Fit { series, model, seed, corpus } => fit(series, model, seed, corpus),
        Command::Synth { out, docs, seed, name } => synth(out, docs, seed, &name),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(path: &PathBuf, overrides: Overrides) -> Result<AnalysisConfig, ReportError> {
    let mut cfg = AnalysisConfig::load(path)?;
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}

fn analyze(path: PathBuf, overrides: Overrides) -> Result<u8, ReportError> {
    let cfg = load_config(&path, overrides)?;
    let bundle = run_pipeline(&cfg)?;
    let m = &bundle.manifest;
    println!(
        "{} cells: {} ok, {} skipped, {} error -> {}",
        m.cells.len(),
        m.count(CellStatus::Ok),
        m.count(CellStatus::Skipped),
        m.count(CellStatus::Error),
        bundle.out_dir.display()
    );
    println!("manifest_hash {}", m.manifest_hash);
    Ok(bundle.exit_code() as u8)
}

fn top(
    path: PathBuf,
    what: TopKind,
    decade: Option<i32>,
    k: usize,
    corpus: Option<String>,
    target: Option<String>,
) -> Result<u8, ReportError> {
    let mut cfg = load_config(&path, Overrides::default())?;
    let name = corpus.unwrap_or_else(|| cfg.corpora[0].name.clone());
    cfg.corpora.retain(|c| c.name == name);
    if cfg.corpora.is_empty() {
        return Err(semshift_core::report::ConfigError::Invalid(format!("no corpus named `{name}`")).into());
    }
    let target = match target {
        Some(t) => fused_token(&t.replace('_', " ")),
        None => cfg.all_targets()[0].clone(),
    };
    if !cfg.all_targets().contains(&target) {
        cfg.control_targets.push(target.clone());
    }
    let res = Resources::load(&cfg)?;
    let data = semshift_core::report::load_corpora(&cfg, &res)?;
    let table = top_table(&data[0], &target, what, k, cfg.top_period);
    let mut stdout = std::io::stdout().lock();
    match decade {
        None => write_top_table(&table, k, &mut stdout)?,
        Some(d) => {
            let empty: Vec<RankedTerm> = Vec::new();
            let rows = table.get(&d).unwrap_or(&empty);
            let mut w = csv::Writer::from_writer(&mut stdout);
            w.write_record(["rank", "term", "relative_count"])?;
            for (i, r) in rows.iter().enumerate() {
                w.write_record([(i + 1).to_string(), r.term.clone(), r.relative_count.to_string()])?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
    }
    Ok(0)
}

fn fit(path: PathBuf, model: TrendModel, seed: u64, corpus: Option<String>) -> Result<u8, ReportError> {
    let file = std::fs::File::open(&path).map_err(|source| ReportError::Io { path: path.clone(), source })?;
    let all = read_series_csv(file).map_err(|e| ReportError::Fatal(format!("{}: {e}", path.display())))?;
    let corpus = corpus.unwrap_or_default();
    let opts = TrendOptions { seed, ..Default::default() };
    let mut rows = Vec::new();
    let mut failed = 0;
    for s in &all {
        match fit_trend(s, model, &opts) {
            Ok(f) => rows.extend(regression_rows(&s.index.to_string(), &s.target, &corpus, &f)),
            Err(e) => {
                eprintln!("{} / {}: {e}", s.target, s.index);
                failed += 1;
            }
        }
    }
    let mut stdout = std::io::stdout().lock();
    write_regression_csv(&rows, &mut stdout)?;
    stdout.flush().map_err(|source| ReportError::Io { path: "<stdout>".into(), source })?;
    Ok(match failed {
        0 => 0,
        n if n == all.len() => EXIT_FATAL,
        _ => 2,
    })
}

fn synth(out: PathBuf, docs: usize, seed: u64, name: &str) -> Result<u8, ReportError> {
    let corpus = SynthCorpus::generate(&SynthConfig { docs, seed, ..Default::default() });
    corpus.write_dir(&out).map_err(|source| ReportError::Io { path: out.clone(), source })?;
    let cfg_path = out.join("config.toml");
    std::fs::write(&cfg_path, corpus.config_toml(name))
        .map_err(|source| ReportError::Io { path: cfg_path.clone(), source })?;
    println!("{}", cfg_path.display());
    Ok(0)
}
