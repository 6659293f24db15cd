//! Metric exports: CSV with one row per (simulation, round) plus a JSON
//! summary with means and standard errors.

use serde::{Deserialize, Serialize};

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Mean with the standard error `s / sqrt(n)` (sample standard
/// deviation, n-1 denominator).
pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let n = values.len();
    if n == 0 {
        return MeanStderr {
            mean: f64::NAN,
            stderr: f64::NAN,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanStderr {
            mean,
            stderr: 0.0,
            n,
        };
    }
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    MeanStderr {
        mean,
        stderr: (variance / n as f64).sqrt(),
        n,
    }
}

/// Formats a float with full round-trip precision for CSV cells.
pub fn csv_float(value: f64) -> String {
    let mut buffer = ryu_format(value);
    if buffer == "-0" {
        buffer = "0".to_string();
    }
    buffer
}

fn ryu_format(value: f64) -> String {
    // serde_json's float formatting is shortest round-trip and stable.
    serde_json::to_string(&value).unwrap_or_else(|_| "null".to_string())
}
