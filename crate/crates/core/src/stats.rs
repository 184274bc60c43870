//! Paired one-sided t-tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    pub t: f64,
    /// `P(T >= t)` under the null of zero mean difference.
    pub p_value: f64,
    /// Zero sample variance; `p` is then 0 for a positive mean and 1 otherwise.
    pub degenerate: bool,
}

/// Upper-tail probability of Student's t with `df` degrees of freedom.
pub fn t_upper_tail(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    dist.sf(t).clamp(0.0, 1.0)
}

/// Tests `H_A: mean(differences) > 0`.
pub fn paired_t_test(differences: &[f64]) -> Result<PairedTestResult> {
    let n = differences.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let nf = n as f64;
    let mean = differences.iter().sum::<f64>() / nf;
    let var = differences.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let std_error = (var / nf).sqrt();
    if std_error == 0.0 || std_error <= 1e-14 * mean.abs() {
        return Ok(PairedTestResult {
            n,
            mean,
            std_error,
            t: if mean > 0.0 {
                f64::INFINITY
            } else if mean < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            },
            p_value: if mean > 0.0 { 0.0 } else { 1.0 },
            degenerate: true,
        });
    }
    let t = mean / std_error;
    Ok(PairedTestResult {
        n,
        mean,
        std_error,
        t,
        p_value: t_upper_tail(t, nf - 1.0),
        degenerate: false,
    })
}

/// Paired test of `a > b` on matched samples.
pub fn paired_greater(a: &[f64], b: &[f64]) -> Result<PairedTestResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    paired_t_test(&d)
}
