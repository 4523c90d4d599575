use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::ols::{least_squares, Design, INTERCEPT};
use super::StatsError;

/// Normal critical value for the 95% interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StdBeta {
    pub term: String,
    pub beta: f64,
    pub se_hc3: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Hat-matrix diagonal x_iᵀ(XᵀX)⁻¹x_i.
pub fn leverages(x: &DMatrix<f64>, xtx_inv: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let row = x.row(i);
            (row * xtx_inv * row.transpose())[(0, 0)]
        })
        .collect()
}

/// (XᵀX)⁻¹ Xᵀ diag(e_i²/(1−h_ii)²) X (XᵀX)⁻¹.
pub fn hc3_covariance(x: &DMatrix<f64>, residuals: &[f64], xtx_inv: &DMatrix<f64>) -> Result<DMatrix<f64>, StatsError> {
    let h = leverages(x, xtx_inv);
    let mut omega = DVector::zeros(residuals.len());
    for (i, (&e, &hi)) in residuals.iter().zip(&h).enumerate() {
        let one_minus = 1.0 - hi;
        if one_minus.abs() < 1e-10 {
            return Err(StatsError::DegenerateLeverage { row: i, leverage: hi });
        }
        omega[i] = e * e / (one_minus * one_minus);
    }
    let meat = x.transpose() * DMatrix::from_diagonal(&omega) * x;
    Ok(xtx_inv * meat * xtx_inv)
}

fn standardize(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (sd > 0.0 && sd.is_finite()).then(|| v.iter().map(|x| (x - mean) / sd).collect())
}

/// Standardize the outcome and every non-intercept column (zero mean, unit
/// sample SD), refit, and report HC3 standard errors with 95% normal
/// intervals. This is a standardize-then-sandwich approximation, not a
/// delta-method estimator.
pub fn hc3_standardized(y: &[f64], design: &Design) -> Result<Vec<StdBeta>, StatsError> {
    let n = y.len();
    let p = design.ncols();
    if n <= p {
        return Err(StatsError::TooFewPoints { needed: p + 1, got: n });
    }
    let zy = standardize(y).ok_or_else(|| StatsError::ConstantColumn { term: "outcome".into() })?;
    let mut columns = Vec::with_capacity(p - 1);
    for (j, name) in design.names.iter().enumerate().skip(1) {
        let col: Vec<f64> = design.x.column(j).iter().copied().collect();
        let z = standardize(&col).ok_or_else(|| StatsError::ConstantColumn { term: name.clone() })?;
        columns.push((name.clone(), z));
    }
    let zd = Design::with_intercept(columns);
    let yv = DVector::from_vec(zy);
    let ls = least_squares(&yv, &zd.x)?;
    let resid: Vec<f64> = ls.residuals.iter().copied().collect();
    let cov = hc3_covariance(&zd.x, &resid, &ls.xtx_inv)?;
    Ok(zd
        .names
        .iter()
        .enumerate()
        .filter(|(_, name)| name.as_str() != INTERCEPT)
        .map(|(j, name)| {
            let beta = ls.coef[j];
            let se = cov[(j, j)].max(0.0).sqrt();
            StdBeta { term: name.clone(), beta, se_hc3: se, ci_lo: beta - Z_95 * se, ci_hi: beta + Z_95 * se }
        })
        .collect())
}
