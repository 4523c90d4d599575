use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::stats::{TrendFit, INTERCEPT};

pub const REGRESSION_HEADER: [&str; 22] = [
    "index", "concept", "corpus", "model", "term", "B", "SE", "t", "p", "F", "df1", "df2", "adj_r2", "estimator",
    "dw_stat", "dw_p", "rho", "bic", "beta", "beta_se", "ci_lo", "ci_hi",
];

/// One coefficient of one trend fit. Fit-level statistics repeat on every
/// term row; standardized columns are empty for the intercept, and `rho`
/// only appears for GLS fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub index: String,
    pub concept: String,
    pub corpus: String,
    pub model: String,
    pub term: String,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "SE")]
    pub se: f64,
    pub t: f64,
    pub p: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub adj_r2: f64,
    pub estimator: String,
    pub dw_stat: Option<f64>,
    pub dw_p: Option<f64>,
    pub rho: Option<f64>,
    pub bic: f64,
    pub beta: Option<f64>,
    pub beta_se: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

pub fn regression_rows(index: &str, concept: &str, corpus: &str, fit: &TrendFit) -> Vec<RegressionRow> {
    fit.coefficients
        .iter()
        .map(|c| {
            let sb = (c.term != INTERCEPT).then(|| fit.std_beta(&c.term)).flatten();
            RegressionRow {
                index: index.to_string(),
                concept: concept.to_string(),
                corpus: corpus.to_string(),
                model: fit.model.to_string(),
                term: c.term.clone(),
                b: c.b,
                se: c.se,
                t: c.t,
                p: c.p,
                f: fit.f,
                df1: fit.df1,
                df2: fit.df2,
                adj_r2: fit.adj_r2,
                estimator: fit.estimator.to_string(),
                dw_stat: fit.dw.map(|d| d.statistic),
                dw_p: fit.dw.map(|d| d.p),
                rho: fit.rho,
                bic: fit.bic,
                beta: sb.map(|s| s.beta),
                beta_se: sb.map(|s| s.se_hc3),
                ci_lo: sb.map(|s| s.ci_lo),
                ci_hi: sb.map(|s| s.ci_hi),
            }
        })
        .collect()
}

/// The header is written even when there are no rows.
pub fn write_regression_csv(rows: &[RegressionRow], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(REGRESSION_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_regression_csv(reader: impl std::io::Read) -> csv::Result<Vec<RegressionRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}
