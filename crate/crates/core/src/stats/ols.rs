use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::StatsError;

/// Largest admissible condition number of the design matrix.
pub const MAX_CONDITION: f64 = 1e10;

/// Regression design: an intercept column followed by named terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

pub const INTERCEPT: &str = "(intercept)";

impl Design {
    /// Prepends the intercept column to `columns`.
    pub fn with_intercept(columns: Vec<(String, Vec<f64>)>) -> Self {
        let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
        let mut names = vec![INTERCEPT.to_string()];
        let mut x = DMatrix::from_element(n, columns.len() + 1, 1.0);
        for (j, (name, col)) in columns.into_iter().enumerate() {
            assert_eq!(col.len(), n, "design columns must have equal length");
            names.push(name);
            for (i, v) in col.into_iter().enumerate() {
                x[(i, j + 1)] = v;
            }
        }
        Self { names, x }
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    /// Number of coefficients including the intercept.
    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }
}

/// Plain least-squares solution, shared by OLS and the GLS refits.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coef: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub ssr: f64,
}

/// Solves through the SVD of X so that near-singular designs are detected
/// instead of silently amplified.
pub(crate) fn least_squares(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<LeastSquares, StatsError> {
    let svd = x.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(StatsError::Singular { condition });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let uty = u.transpose() * y;
    let scaled = DVector::from_iterator(s.len(), uty.iter().zip(s.iter()).map(|(a, b)| a / b));
    let coef = v_t.transpose() * scaled;
    let inv_sq = DMatrix::from_diagonal(&s.map(|v| 1.0 / (v * v)));
    let xtx_inv = v_t.transpose() * inv_sq * v_t;
    let residuals = y - x * &coef;
    let ssr = residuals.norm_squared();
    Ok(LeastSquares { coef, xtx_inv, residuals, ssr })
}

/// Per-term inference row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub term: String,
    pub b: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

/// Two-sided t inference. A zero SE gives t = ±∞ (p = 0), or t = 0 (p = 1)
/// when the estimate is itself zero.
pub(crate) fn t_inference(term: &str, b: f64, se: f64, df: f64) -> Coefficient {
    let (t, p) = if se > 0.0 {
        let t = b / se;
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (t, (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
    } else if b == 0.0 {
        (0.0, 1.0)
    } else {
        (b.signum() * f64::INFINITY, 0.0)
    };
    Coefficient { term: term.to_string(), b, se, t, p }
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<Coefficient>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub n: usize,
    /// Non-intercept terms.
    pub k: usize,
    pub df_resid: usize,
    pub ssr: f64,
    pub tss: f64,
    pub sigma2: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub f: f64,
    pub f_p: f64,
    pub log_lik: f64,
    pub bic: f64,
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn coef(&self, term: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.term == term)
    }

    /// Classical covariance σ²(XᵀX)⁻¹.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.xtx_inv * self.sigma2
    }

    pub fn df1(&self) -> usize {
        self.k
    }

    pub fn df2(&self) -> usize {
        self.df_resid
    }

    /// Residual sum of squares negligible relative to the outcome scale.
    pub fn is_perfect(&self) -> bool {
        let scale = self.tss.max(self.fitted.iter().map(|v| v * v).sum::<f64>());
        self.ssr <= 1e-24 * scale.max(f64::MIN_POSITIVE)
    }
}

/// Gaussian log-likelihood at the MLE variance `ssr / n`.
pub(crate) fn gaussian_log_lik(ssr: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (ssr / n).ln() + 1.0)
}

pub fn ols_fit(y: &[f64], design: &Design) -> Result<OlsFit, StatsError> {
    let n = y.len();
    let p = design.ncols();
    if design.nrows() != n {
        return Err(StatsError::Shape { rows: design.nrows(), values: n });
    }
    if n <= p {
        return Err(StatsError::TooFewPoints { needed: p + 1, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let yv = DVector::from_column_slice(y);
    let ls = least_squares(&yv, &design.x)?;
    let k = p - 1;
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

    let mean = yv.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let max_abs = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let constant_y = tss <= (1e-12 * max_abs).powi(2) * n as f64;

    let (r2, f, f_p) = if constant_y || k == 0 {
        (0.0, 0.0, 1.0)
    } else if ls.ssr == 0.0 {
        (1.0, f64::INFINITY, 0.0)
    } else {
        let r2 = 1.0 - ls.ssr / tss;
        let f = ((tss - ls.ssr) / k as f64 / sigma2).max(0.0);
        let dist = FisherSnedecor::new(k as f64, df_resid as f64).expect("positive df");
        (r2, f, dist.sf(f).clamp(0.0, 1.0))
    };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / df_resid as f64;
    let log_lik = gaussian_log_lik(ls.ssr, n);
    let bic = -2.0 * log_lik + (p + 1) as f64 * (n as f64).ln();
    let fitted: Vec<f64> = (&design.x * &ls.coef).iter().copied().collect();

    Ok(OlsFit {
        coefficients,
        residuals: ls.residuals.iter().copied().collect(),
        fitted,
        n,
        k,
        df_resid,
        ssr: ls.ssr,
        tss,
        sigma2,
        r2,
        adj_r2,
        f,
        f_p,
        log_lik,
        bic,
        xtx_inv: ls.xtx_inv,
    })
}
