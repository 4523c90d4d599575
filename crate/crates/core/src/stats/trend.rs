use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dw::{durbin_watson, DwTest, DEFAULT_PERMUTATIONS};
use super::gls::gls_ar1_fit;
use super::hc3::{hc3_standardized, StdBeta};
use super::ols::{ols_fit, Coefficient, Design};
use super::StatsError;
use crate::indices::IndexSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendModel {
    Linear,
    Quadratic,
}

impl TrendModel {
    pub fn terms(self) -> usize {
        match self {
            TrendModel::Linear => 1,
            TrendModel::Quadratic => 2,
        }
    }
}

impl fmt::Display for TrendModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrendModel::Linear => "linear",
            TrendModel::Quadratic => "quadratic",
        })
    }
}

impl FromStr for TrendModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(TrendModel::Linear),
            "quadratic" => Ok(TrendModel::Quadratic),
            other => Err(format!("unknown model `{other}` (expected linear|quadratic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ols,
    GlsAr1,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Ols => "ols",
            Estimator::GlsAr1 => "gls_ar1",
        })
    }
}

pub const YEAR_TERM: &str = "year";
pub const YEAR_SQ_TERM: &str = "year^2";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendOptions {
    /// Switch to GLS-AR1 when the Durbin–Watson p-value is below this.
    pub dw_alpha: f64,
    pub dw_permutations: usize,
    pub seed: u64,
    pub allow_gls: bool,
}

impl Default for TrendOptions {
    fn default() -> Self {
        Self { dw_alpha: 0.05, dw_permutations: DEFAULT_PERMUTATIONS, seed: 0, allow_gls: true }
    }
}

/// Everything reported for one trend regression.
///
/// Coefficients, `rse` and `bic` come from the estimator actually used.
/// `f`, `r2`/`adj_r2` and the Durbin–Watson test always describe the OLS
/// fit.
#[derive(Debug, Clone, Serialize)]
pub struct TrendFit {
    pub model: TrendModel,
    pub estimator: Estimator,
    /// Year subtracted before building the polynomial terms.
    pub center: f64,
    pub n: usize,
    pub coefficients: Vec<Coefficient>,
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub f_p: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub dw: Option<DwTest>,
    pub rho: Option<f64>,
    pub rse: f64,
    pub rse_df: usize,
    pub bic: f64,
    pub std_betas: Vec<StdBeta>,
}

impl TrendFit {
    pub fn coef(&self, term: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.term == term)
    }

    pub fn std_beta(&self, term: &str) -> Option<&StdBeta> {
        self.std_betas.iter().find(|b| b.term == term)
    }

    /// Fitted value at a calendar year.
    pub fn predict(&self, year: f64) -> f64 {
        let c = year - self.center;
        self.coefficients.iter().enumerate().map(|(j, k)| k.b * c.powi(j as i32)).sum()
    }
}

/// Polynomial year design centered at `center`.
pub fn trend_design(years: &[f64], center: f64, model: TrendModel) -> Design {
    let c: Vec<f64> = years.iter().map(|y| y - center).collect();
    let mut cols = vec![(YEAR_TERM.to_string(), c.clone())];
    if model == TrendModel::Quadratic {
        cols.push((YEAR_SQ_TERM.to_string(), c.iter().map(|v| v * v).collect()));
    }
    Design::with_intercept(cols)
}

pub fn fit_trend(series: &IndexSeries, model: TrendModel, opts: &TrendOptions) -> Result<TrendFit, StatsError> {
    let years: Vec<f64> = series.points.iter().map(|p| f64::from(p.time_unit)).collect();
    let values: Vec<f64> = series.points.iter().map(|p| p.value).collect();
    fit_trend_points(&years, &values, model, opts)
}

/// Year is centered at the midpoint of the observed span. OLS first; when
/// the residuals fail the Durbin–Watson test the coefficients are refit by
/// Prais–Winsten GLS.
pub fn fit_trend_points(years: &[f64], values: &[f64], model: TrendModel, opts: &TrendOptions) -> Result<TrendFit, StatsError> {
    let needed = model.terms() + 2;
    if years.len() < needed {
        return Err(StatsError::TooFewPoints { needed, got: years.len() });
    }
    let lo = years.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = years.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = (lo + hi) / 2.0;
    let design = trend_design(years, center, model);
    let ols = ols_fit(values, &design)?;

    let dw = if ols.is_perfect() {
        None
    } else {
        match durbin_watson(&ols.residuals, opts.dw_permutations, opts.seed) {
            Ok(t) => Some(t),
            Err(StatsError::PerfectFit) => None,
            Err(e) => return Err(e),
        }
    };
    let std_betas = hc3_standardized(values, &design)?;

    let use_gls = opts.allow_gls && dw.is_some_and(|t| t.p < opts.dw_alpha);
    let (estimator, coefficients, rho, rse, rse_df, bic) = if use_gls {
        let g = gls_ar1_fit(values, &design, &ols)?;
        (Estimator::GlsAr1, g.coefficients, Some(g.rho), g.rse, g.df_resid, g.bic)
    } else {
        (Estimator::Ols, ols.coefficients.clone(), None, ols.sigma2.sqrt(), ols.df_resid, ols.bic)
    };

    Ok(TrendFit {
        model,
        estimator,
        center,
        n: ols.n,
        coefficients,
        f: ols.f,
        df1: ols.df1(),
        df2: ols.df2(),
        f_p: ols.f_p,
        r2: ols.r2,
        adj_r2: ols.adj_r2,
        dw,
        rho,
        rse,
        rse_df,
        bic,
        std_betas,
    })
}
