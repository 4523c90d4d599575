//! Feasible GLS with AR(1) errors via the Prais–Winsten transformation.
//!
//! ρ is the lag-1 autocorrelation of the current residuals. The first row is
//! scaled by √(1−ρ²) and later rows are quasi-differenced. Refit, recompute
//! ρ from the untransformed residuals, and repeat until ρ moves by less than
//! [`RHO_TOLERANCE`] or [`MAX_ITERATIONS`] is reached.
//!
//! BIC uses the exact AR(1) Gaussian log-likelihood at the MLE variance:
//! `ll = −n/2·(ln 2π + ln(SSR*/n) + 1) + ½·ln(1−ρ²)`, with SSR* the
//! transformed residual sum of squares, and counts the coefficients plus
//! ρ and σ² as parameters.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::ols::{gaussian_log_lik, least_squares, t_inference, Coefficient, Design, OlsFit};
use super::StatsError;

pub const RHO_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct GlsFit {
    pub coefficients: Vec<Coefficient>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual standard error of the transformed regression.
    pub rse: f64,
    pub n: usize,
    pub df_resid: usize,
    pub log_lik: f64,
    pub bic: f64,
    /// Untransformed residuals y − Xβ.
    pub residuals: Vec<f64>,
}

/// Σ_{t≥2} e_t·e_{t−1} ÷ Σ e_t².
pub fn lag1_autocorrelation(e: &[f64]) -> f64 {
    let denom: f64 = e.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return 0.0;
    }
    e.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / denom
}

fn prais_winsten(y: &DVector<f64>, x: &DMatrix<f64>, rho: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = y.len();
    let first = (1.0 - rho * rho).sqrt();
    let mut ty = DVector::zeros(n);
    let mut tx = DMatrix::zeros(n, x.ncols());
    ty[0] = first * y[0];
    for j in 0..x.ncols() {
        tx[(0, j)] = first * x[(0, j)];
    }
    for t in 1..n {
        ty[t] = y[t] - rho * y[t - 1];
        for j in 0..x.ncols() {
            tx[(t, j)] = x[(t, j)] - rho * x[(t - 1, j)];
        }
    }
    (ty, tx)
}

/// Starts from the OLS residuals in `ols`.
pub fn gls_ar1_fit(y: &[f64], design: &Design, ols: &OlsFit) -> Result<GlsFit, StatsError> {
    let n = y.len();
    let p = design.ncols();
    let yv = DVector::from_column_slice(y);
    let mut rho = lag1_autocorrelation(&ols.residuals);
    let mut iterations = 0;
    let mut converged = false;
    let (ls, final_rho) = loop {
        if rho.abs() >= 1.0 {
            return Err(StatsError::NonStationary { rho, iteration: iterations });
        }
        iterations += 1;
        let (ty, tx) = prais_winsten(&yv, &design.x, rho);
        let ls = least_squares(&ty, &tx)?;
        let resid: Vec<f64> = (&yv - &design.x * &ls.coef).iter().copied().collect();
        let next = lag1_autocorrelation(&resid);
        if (next - rho).abs() < RHO_TOLERANCE {
            converged = true;
            break (ls, rho);
        }
        if iterations >= MAX_ITERATIONS {
            log::warn!("Prais-Winsten did not converge after {MAX_ITERATIONS} iterations (rho = {rho})");
            break (ls, rho);
        }
        rho = next;
    };

    let df_resid = n - p;
    let sigma2 = ls.ssr / df_resid as f64;
    let coefficients = design
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = (sigma2 * ls.xtx_inv[(j, j)]).max(0.0).sqrt();
            t_inference(name, ls.coef[j], se, df_resid as f64)
        })
        .collect();
    let log_lik = gaussian_log_lik(ls.ssr, n) + 0.5 * (1.0 - final_rho * final_rho).ln();
    let bic = -2.0 * log_lik + (p + 2) as f64 * (n as f64).ln();
    let residuals = (&yv - &design.x * &ls.coef).iter().copied().collect();

    Ok(GlsFit {
        coefficients,
        rho: final_rho,
        iterations,
        converged,
        rse: sigma2.sqrt(),
        n,
        df_resid,
        log_lik,
        bic,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ols::ols_fit;

    #[test]
    fn lag1_of_alternating_series() {
        assert!((lag1_autocorrelation(&[1.0, -1.0, 1.0, -1.0]) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn smooth_residuals_get_positive_rho() {
        let x: Vec<f64> = (0..40).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|t| 0.2 * t + (t / 4.0).sin()).collect();
        let d = Design::with_intercept(vec![("t".into(), x)]);
        let ols = ols_fit(&y, &d).unwrap();
        let g = gls_ar1_fit(&y, &d, &ols).unwrap();
        assert!(g.rho > 0.5);
        assert!(g.converged);
        assert!(g.rho.abs() < 1.0);
        assert_eq!(g.df_resid, 38);
    }
}
