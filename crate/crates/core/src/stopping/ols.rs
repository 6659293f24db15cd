//! Ordinary least squares with standard errors and exact-t p-values.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, thiserror::Error)]
pub enum OlsError {
    #[error("need more observations than regressors: n={n}, k={k}")]
    TooFewObservations { n: usize, k: usize },
    #[error("design matrix is singular even after pruning")]
    Singular,
    #[error("design and response dimensions disagree")]
    ShapeMismatch,
}

/// One fitted coefficient, keyed by its original design column.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsTerm {
    pub column: usize,
    pub beta: f64,
    pub std_error: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

/// Fit summary: coefficients for the kept columns, dropped
/// (rank-deficient) columns, and residual degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsResult {
    pub terms: Vec<OlsTerm>,
    pub dropped_columns: Vec<usize>,
    pub dof: usize,
    pub sigma2: f64,
}

impl OlsResult {
    pub fn term(&self, column: usize) -> Option<&OlsTerm> {
        self.terms.iter().find(|t| t.column == column)
    }
}

const RANK_TOLERANCE: f64 = 1e-10;

/// QR-based least squares on a design matrix whose rows are
/// observations. Rank-deficient columns are dropped with a warning;
/// p-values are two-sided from the exact t distribution.
pub fn ols_fit(design: &[Vec<f64>], response: &[f64]) -> Result<OlsResult, OlsError> {
    let n = design.len();
    if n == 0 || n != response.len() {
        return Err(OlsError::ShapeMismatch);
    }
    let total_columns = design[0].len();
    if design.iter().any(|row| row.len() != total_columns) {
        return Err(OlsError::ShapeMismatch);
    }

    let kept = select_independent_columns(design, total_columns);
    let dropped: Vec<usize> = (0..total_columns).filter(|c| !kept.contains(c)).collect();
    if !dropped.is_empty() {
        log::warn!("ols_fit: dropped rank-deficient columns {dropped:?}");
    }
    let k = kept.len();
    if k == 0 {
        return Err(OlsError::Singular);
    }
    if n <= k {
        return Err(OlsError::TooFewObservations { n, k });
    }

    let x = DMatrix::from_fn(n, k, |row, col| design[row][kept[col]]);
    let y = DVector::from_column_slice(response);

    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &y;
    let r = qr.r();
    let beta = r
        .clone()
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .ok_or(OlsError::Singular)?;

    let residuals = &y - &x * &beta;
    let dof = n - k;
    let sigma2 = residuals.dot(&residuals) / dof as f64;

    // (X'X)^-1 = R^-1 R^-T from the thin QR factor.
    let r_inv = r
        .rows(0, k)
        .into_owned()
        .try_inverse()
        .ok_or(OlsError::Singular)?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let terms = kept
        .iter()
        .enumerate()
        .map(|(j, column)| {
            let variance = (sigma2 * xtx_inv[(j, j)]).max(0.0);
            let std_error = variance.sqrt();
            let b = beta[j];
            let (t_statistic, p_value) = if std_error == 0.0 {
                if b == 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY * b.signum(), 0.0)
                }
            } else {
                let t = b / std_error;
                (t, two_sided_p(t, dof as f64))
            };
            OlsTerm {
                column: *column,
                beta: b,
                std_error,
                t_statistic,
                p_value,
            }
        })
        .collect();

    Ok(OlsResult {
        terms,
        dropped_columns: dropped,
        dof,
        sigma2,
    })
}

/// Two-sided p-value from the exact Student-t CDF.
pub fn two_sided_p(t: f64, dof: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Keeps a maximal linearly independent set of columns, scanned left to
/// right with modified Gram-Schmidt.
fn select_independent_columns(design: &[Vec<f64>], total_columns: usize) -> Vec<usize> {
    let n = design.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for column in 0..total_columns {
        let mut v = DVector::from_fn(n, |row, _| design[row][column]);
        let original_norm = v.norm();
        for q in &basis {
            let coefficient = q.dot(&v);
            v -= q * coefficient;
        }
        if v.norm() > RANK_TOLERANCE * original_norm.max(1.0) {
            let norm = v.norm();
            basis.push(v / norm);
            kept.push(column);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovers_coefficients_with_zero_p() {
        // y = 2x + 1 exactly, n = 5.
        let design: Vec<Vec<f64>> = (1..=5).map(|x| vec![1.0, x as f64]).collect();
        let response: Vec<f64> = (1..=5).map(|x| 2.0 * x as f64 + 1.0).collect();
        let fit = ols_fit(&design, &response).unwrap();
        assert!((fit.term(0).unwrap().beta - 1.0).abs() < 1e-9);
        assert!((fit.term(1).unwrap().beta - 2.0).abs() < 1e-9);
        assert!(fit.term(1).unwrap().p_value < 1e-9);
    }

    #[test]
    fn closed_form_simple_regression_matches() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.2, 1.9, 3.2, 3.8, 5.1, 6.3];
        let design: Vec<Vec<f64>> = x.iter().map(|v| vec![1.0, *v]).collect();
        let fit = ols_fit(&design, &y).unwrap();

        // Independent closed-form route.
        let n = x.len() as f64;
        let mean_x: f64 = x.iter().sum::<f64>() / n;
        let mean_y: f64 = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - mean_x).powi(2)).sum();
        let sxy: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - mean_x) * (b - mean_y))
            .sum();
        let slope = sxy / sxx;
        let intercept = mean_y - slope * mean_x;
        let ssr: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
            .sum();
        let sigma2 = ssr / (n - 2.0);
        let se_slope = (sigma2 / sxx).sqrt();
        let se_intercept = (sigma2 * (1.0 / n + mean_x * mean_x / sxx)).sqrt();
        let t_slope = slope / se_slope;
        let p_slope = two_sided_p(t_slope, n - 2.0);

        let b0 = fit.term(0).unwrap();
        let b1 = fit.term(1).unwrap();
        assert!((b0.beta - intercept).abs() < 1e-9);
        assert!((b1.beta - slope).abs() < 1e-9);
        assert!((b0.std_error - se_intercept).abs() < 1e-9);
        assert!((b1.std_error - se_slope).abs() < 1e-9);
        assert!((b1.p_value - p_slope).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_response_gives_zero_coefficient() {
        // Columns orthogonal; y aligned with column 0 only.
        let design = vec![
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![1.0, -1.0],
        ];
        let response = vec![2.0, 2.0, 2.0, 2.0];
        let fit = ols_fit(&design, &response).unwrap();
        assert!(fit.term(1).unwrap().beta.abs() < 1e-9);
    }

    #[test]
    fn duplicated_column_is_dropped() {
        let design = vec![
            vec![1.0, 2.0, 2.0],
            vec![1.0, 3.0, 3.0],
            vec![1.0, 4.0, 4.0],
            vec![1.0, 5.0, 5.0],
            vec![1.0, 6.0, 6.0],
        ];
        let response = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let fit = ols_fit(&design, &response).unwrap();
        assert_eq!(fit.dropped_columns, vec![2]);
        assert!(fit.term(1).is_some());
        assert!(fit.term(2).is_none());
    }

    #[test]
    fn too_few_observations_error() {
        let design = vec![vec![1.0, 2.0], vec![1.0, 3.0]];
        let response = vec![1.0, 2.0];
        assert!(matches!(
            ols_fit(&design, &response),
            Err(OlsError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn t_cdf_matches_published_table() {
        // Classic table: t(0.975, dof=10) = 2.228 -> two-sided p = 0.05.
        let p = two_sided_p(2.228, 10.0);
        assert!((p - 0.05).abs() < 5e-4, "got {p}");
    }
}
