//! Split-conformal calibration with Sobolev scores and truncation-corrected
//! quantiles.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{Potential, PotentialKind, Sample};
use crate::spectral::{
    sobolev_norm_sq, sobolev_weight, truncated_norms_sq, ModeIndex, SobolevSpec, SpectralField,
};
use crate::surrogate::SpectralOperator;

const ZERO_MEAN_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-6;

/// Rank `k = ⌈(N_C + 1)(1 − α)⌉` of the conformal order statistic.
pub fn quantile_rank(n_cal: usize, alpha: f64) -> usize {
    // The small slack keeps e.g. 11·0.9 from rounding up to 10.000000000000002.
    let x = (n_cal as f64 + 1.0) * (1.0 - alpha);
    (x - 1e-9).ceil().max(1.0) as usize
}

/// The `k`-th smallest score (1-indexed) with `k` from [`quantile_rank`].
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let n = scores.len();
    let k = quantile_rank(n, alpha);
    if k > n {
        return Err(Error::InsufficientCalibration { alpha, n_cal: n, k });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[k - 1])
}

/// `q + B·N^{-2τ}`
pub fn corrected_quantile(q_raw: f64, margin: f64, trunc: usize, tau: f64) -> f64 {
    q_raw + margin * (trunc as f64).powf(-2.0 * tau)
}

/// `4‖f‖²_{s-2}` bounds `‖u‖²_s` for `Δu = f`.
pub fn margin_poisson(f: &SpectralField, s: f64) -> Result<f64> {
    let mean = f.get(ModeIndex::ZERO).norm();
    if mean > ZERO_MEAN_TOL {
        return Err(Error::NonZeroMean(mean));
    }
    Ok(4.0 * sobolev_norm_sq(f, s - 2.0))
}

/// `‖u₀‖²_s` bounds the heat solution at any later time.
pub fn margin_heat(u0: &SpectralField, s: f64) -> f64 {
    sobolev_norm_sq(u0, s)
}

/// `(√2·max{1 + 2‖V‖²_∞, 2})^s ‖ψ‖²_s` for the Schrödinger evolution.
pub fn margin_schrodinger(psi: &SpectralField, v_sup: f64, s: f64) -> Result<f64> {
    let norm = psi.l2_norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    Ok(schrodinger_factor(v_sup, s) * sobolev_norm_sq(psi, s))
}

fn schrodinger_factor(v_sup: f64, s: f64) -> f64 {
    let c = (1.0 + 2.0 * v_sup * v_sup).max(2.0);
    (std::f64::consts::SQRT_2 * c).powf(s)
}

/// Instance-dependent bound `B(a) >= ‖𝒢(a)‖²_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginBound {
    Poisson { s: f64 },
    Heat { s: f64 },
    Schrodinger { s: f64, potential_sup: f64 },
    UserConstant { value: f64 },
}

impl MarginBound {
    pub fn schrodinger(s: f64, potential: PotentialKind, grid_size: usize) -> Self {
        MarginBound::Schrodinger {
            s,
            potential_sup: Potential::new(potential, grid_size).sup_norm(),
        }
    }

    pub fn eval(&self, a: &SpectralField) -> Result<f64> {
        match *self {
            MarginBound::Poisson { s } => margin_poisson(a, s),
            MarginBound::Heat { s } => Ok(margin_heat(a, s)),
            MarginBound::Schrodinger { s, potential_sup } => {
                margin_schrodinger(a, potential_sup, s)
            }
            MarginBound::UserConstant { value } => Ok(value),
        }
    }
}

/// Calibration scores and the quantiles derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub spec: SobolevSpec,
    pub n_cal: usize,
    /// `scores_by_trunc[m][i]` is the score of calibration point `i` at
    /// truncation `m`, for `m = 0..=spec.trunc`.
    pub scores_by_trunc: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    /// Quantiles at `spec.trunc`, one per entry of `alphas`.
    pub quantiles: Vec<f64>,
}

impl QuantileTable {
    pub fn scores(&self) -> &[f64] {
        &self.scores_by_trunc[self.spec.trunc]
    }

    /// Raw quantile at truncation `trunc <= spec.trunc` and level `alpha`.
    pub fn quantile(&self, trunc: usize, alpha: f64) -> Result<f64> {
        let scores = self
            .scores_by_trunc
            .get(trunc)
            .ok_or(Error::InvalidTruncation {
                trunc,
                grid_size: 2 * self.spec.trunc,
            })?;
        conformal_quantile(scores, alpha)
    }

    /// Quantile at `spec.trunc` for one of the calibrated levels, falling back
    /// to recomputation for other levels.
    pub fn at(&self, alpha: f64) -> Result<f64> {
        match self.alphas.iter().position(|a| (a - alpha).abs() < 1e-12) {
            Some(i) => Ok(self.quantiles[i]),
            None => conformal_quantile(self.scores(), alpha),
        }
    }
}

/// `‖center − Π_m observed‖²_{s−τ}` for every `m = 0..=spec.trunc`, with the
/// center also truncated to `m`.
pub fn scores_all_truncations(
    center: &SpectralField,
    observed: &SpectralField,
    spec: &SobolevSpec,
) -> Result<Vec<f64>> {
    spec.validate_for_grid(center.grid_size())?;
    center.check_same_grid(observed)?;
    Ok(truncated_norms_sq(
        &center.sub(observed),
        spec.score_order(),
        spec.trunc,
    ))
}

pub fn calibrate(
    model: &dyn SpectralOperator,
    calib: &[Sample],
    spec: &SobolevSpec,
    alphas: &[f64],
) -> Result<QuantileTable> {
    if calib.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_sample: Vec<Vec<f64>> = calib
        .par_iter()
        .map(|s| scores_all_truncations(&model.apply(&s.input), &s.target, spec))
        .collect::<Result<_>>()?;
    let scores_by_trunc: Vec<Vec<f64>> = (0..=spec.trunc)
        .map(|m| per_sample.iter().map(|v| v[m]).collect())
        .collect();
    let quantiles = alphas
        .iter()
        .map(|&a| conformal_quantile(&scores_by_trunc[spec.trunc], a))
        .collect::<Result<_>>()?;
    Ok(QuantileTable {
        spec: *spec,
        n_cal: calib.len(),
        scores_by_trunc,
        alphas: alphas.to_vec(),
        quantiles,
    })
}

/// `‖center − u‖²_{s−τ}` split into the truncated score and the tail
/// `‖u − Π_N u‖²_{s−τ}`. Exact when `center` is band-limited to `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualParts {
    pub full: f64,
    pub truncated: f64,
    pub tail: f64,
}

pub fn residual_decomposition(
    center: &SpectralField,
    truth: &SpectralField,
    spec: &SobolevSpec,
) -> Result<ResidualParts> {
    center.check_same_grid(truth)?;
    let order = spec.score_order();
    let mut parts = ResidualParts {
        full: 0.0,
        truncated: 0.0,
        tail: 0.0,
    };
    for ((n, c), u) in center.iter().zip(truth.coeffs()) {
        let w = sobolev_weight(n, order);
        let r = w * (c - u).norm_sqr();
        parts.full += r;
        if n.sup_norm() <= spec.trunc {
            parts.truncated += r;
        } else {
            parts.tail += w * u.norm_sqr();
        }
    }
    Ok(parts)
}

/// Full-spectrum residuals `‖model(a) − u‖²_{s−τ}` over a test set.
pub fn full_residuals(
    model: &dyn SpectralOperator,
    test: &[Sample],
    spec: &SobolevSpec,
) -> Vec<f64> {
    test.par_iter()
        .map(|s| {
            let r = model.apply(&s.input).sub(&s.target);
            sobolev_norm_sq(&r, spec.score_order())
        })
        .collect()
}

/// Fraction of test points with full residual within their own radius.
pub fn coverage_eval(
    model: &dyn SpectralOperator,
    test: &[Sample],
    q_star: &[f64],
    spec: &SobolevSpec,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if q_star.len() != test.len() {
        return Err(Error::InvalidParameter(format!(
            "{} radii for {} test points",
            q_star.len(),
            test.len()
        )));
    }
    let residuals = full_residuals(model, test, spec);
    Ok(coverage_of(&residuals, q_star))
}

pub fn coverage_of(residuals: &[f64], radii: &[f64]) -> f64 {
    let hits = residuals.iter().zip(radii).filter(|(r, q)| r <= q).count();
    hits as f64 / residuals.len() as f64
}

/// Levels `0.05, 0.10, …, 0.95`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub alpha: f64,
    pub raw_coverage: f64,
    pub corrected_coverage: f64,
    /// Mean of `B(a)·N^{-2τ}` over the test set.
    pub mean_margin: f64,
}

pub fn calibration_curve(
    model: &dyn SpectralOperator,
    calib: &[Sample],
    test: &[Sample],
    spec: &SobolevSpec,
    margin: &MarginBound,
    alphas: &[f64],
) -> Result<Vec<CurveRow>> {
    let table = calibrate(model, calib, spec, alphas)?;
    let residuals = full_residuals(model, test, spec);
    let pads: Vec<f64> = test
        .iter()
        .map(|s| {
            Ok(corrected_quantile(
                0.0,
                margin.eval(&s.input)?,
                spec.trunc,
                spec.tau,
            ))
        })
        .collect::<Result<_>>()?;
    let mean_margin = pads.iter().sum::<f64>() / pads.len().max(1) as f64;
    Ok(alphas
        .iter()
        .zip(&table.quantiles)
        .map(|(&alpha, &q)| {
            let raw = vec![q; residuals.len()];
            let corrected: Vec<f64> = pads.iter().map(|p| q + p).collect();
            CurveRow {
                alpha,
                raw_coverage: coverage_of(&residuals, &raw),
                corrected_coverage: coverage_of(&residuals, &corrected),
                mean_margin,
            }
        })
        .collect())
}

pub fn write_curve<W: Write>(rows: &[CurveRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Reality;
    use num_complex::Complex64;

    #[test]
    fn quantile_examples() {
        let scores: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(conformal_quantile(&scores, 0.1).unwrap(), 10.0);
        assert_eq!(conformal_quantile(&[5.0], 0.5).unwrap(), 5.0);
        assert_eq!(quantile_rank(150, 0.1), 136);
        assert!(matches!(
            conformal_quantile(&scores, 0.05),
            Err(Error::InsufficientCalibration { k: 11, .. })
        ));
    }

    #[test]
    fn corrected_quantile_examples() {
        assert_eq!(corrected_quantile(1.0, 0.0, 4, 2.0), 1.0);
        assert_eq!(corrected_quantile(1.0, 16.0, 2, 1.0), 5.0);
        let m1 = corrected_quantile(0.0, 1.0, 3, 2.0);
        let m4 = corrected_quantile(0.0, 1.0, 12, 2.0);
        assert!((m1 / m4 - 256.0).abs() < 1e-9);
    }

    #[test]
    fn margin_examples() {
        let mut f = SpectralField::zeros(16, Reality::Real);
        f.set(ModeIndex::new(1, 0), Complex64::new(1.0, 0.0));
        f.set(ModeIndex::new(-1, 0), Complex64::new(1.0, 0.0));
        assert!((margin_poisson(&f, 2.0).unwrap() - 8.0).abs() < 1e-12);

        let mut u = SpectralField::zeros(16, Reality::Real);
        u.set(ModeIndex::new(1, 1), Complex64::new(1.0, 0.0));
        u.set(ModeIndex::new(-1, -1), Complex64::new(1.0, 0.0));
        assert!((margin_heat(&u, 2.0) - 18.0).abs() < 1e-12);

        let mut psi = SpectralField::zeros(16, Reality::Complex);
        psi.set(ModeIndex::new(1, 0), Complex64::new(1.0, 0.0));
        let h2 = sobolev_norm_sq(&psi, 2.0);
        assert!((margin_schrodinger(&psi, 0.0, 2.0).unwrap() - 8.0 * h2).abs() < 1e-9);
        assert!((margin_schrodinger(&psi, 1.0, 2.0).unwrap() - 18.0 * h2).abs() < 1e-9);
        assert!(margin_schrodinger(&psi.scale(2.0), 1.0, 2.0).is_err());
    }

    #[test]
    fn alpha_grid() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 19);
        assert!((g[0] - 0.05).abs() < 1e-15 && (g[18] - 0.95).abs() < 1e-12);
    }
}
