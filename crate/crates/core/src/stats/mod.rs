//! Trend testing for index series.

mod dw;
mod gls;
mod hc3;
mod ols;
mod trend;

use thiserror::Error;

pub use dw::{durbin_watson, dw_statistic, DwTest, DEFAULT_PERMUTATIONS};
pub use gls::{gls_ar1_fit, lag1_autocorrelation, GlsFit, MAX_ITERATIONS, RHO_TOLERANCE};
pub use hc3::{hc3_covariance, hc3_standardized, leverages, StdBeta, Z_95};
pub use ols::{ols_fit, Coefficient, Design, OlsFit, INTERCEPT, MAX_CONDITION};
pub use trend::{
    fit_trend, fit_trend_points, trend_design, Estimator, TrendFit, TrendModel, TrendOptions, YEAR_SQ_TERM, YEAR_TERM,
};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("design has {rows} rows but outcome has {values} values")]
    Shape { rows: usize, values: usize },
    #[error("outcome contains non-finite values")]
    NonFinite,
    #[error("singular design (condition number {condition:.3e})")]
    Singular { condition: f64 },
    #[error("residuals are all zero (perfect fit)")]
    PerfectFit,
    #[error("AR(1) estimate rho = {rho} is non-stationary (iteration {iteration})")]
    NonStationary { rho: f64, iteration: usize },
    #[error("observation {row} has leverage {leverage}; HC3 is undefined")]
    DegenerateLeverage { row: usize, leverage: f64 },
    #[error("`{term}` has zero variance and cannot be standardized")]
    ConstantColumn { term: String },
}
