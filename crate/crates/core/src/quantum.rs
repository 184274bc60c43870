//! Geometric-uniform constellations, Gram spectra and mutual-information
//! measurement design.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{corrected_quantile, MarginBound};
use crate::error::{Error, Result};
use crate::pde::PdeKind;
use crate::spectral::{sobolev_norm_sq, GrfParams, SobolevSpec, SpectralField};
use crate::stats::{paired_greater, PairedTestResult};
use crate::surrogate::SpectralOperator;

/// Floor applied to eigenvalues before square roots.
pub const EIGEN_FLOOR: f64 = 1e-9;

const NORM_TOL: f64 = 1e-8;
const NEGATIVE_TOL: f64 = 1e-9;
const SUM_TOL: f64 = 1e-4;

/// `M` states `ψ_k = S^k ψ_0`, with `S` the translation by `2π/M` along the
/// first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GusConstellation {
    states: Vec<SpectralField>,
}

impl GusConstellation {
    pub fn m(&self) -> usize {
        self.states.len()
    }

    pub fn base(&self) -> &SpectralField {
        &self.states[0]
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }
}

/// Translates `psi` by `2πk/M` along the first axis.
pub fn shift_state(psi: &SpectralField, k: usize, m: usize) -> SpectralField {
    let theta = TAU * k as f64 / m as f64;
    psi.map_modes(|n, c| c * Complex64::from_polar(1.0, -(n.n1 as f64) * theta))
}

pub fn build_constellation(base: &SpectralField, m: usize) -> Result<GusConstellation> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "constellation size must be >= 1".into(),
        ));
    }
    let norm = base.l2_norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    let states = (0..m).map(|k| shift_state(base, k, m)).collect();
    Ok(GusConstellation { states })
}

/// Gram matrix of a constellation and its eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSpectrum {
    pub matrix: DMatrix<Complex64>,
    pub g: Vec<f64>,
}

pub fn gram(states: &[SpectralField]) -> Result<GramSpectrum> {
    let m = states.len();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    for s in &states[1..] {
        states[0].check_same_grid(s)?;
    }
    let mut matrix = DMatrix::<Complex64>::zeros(m, m);
    for l in 0..m {
        for k in l..m {
            let v = states[l].inner(&states[k]);
            matrix[(l, k)] = v;
            matrix[(k, l)] = v.conj();
        }
    }
    let g = sorted_eigenvalues(&matrix);
    Ok(GramSpectrum { matrix, g })
}

/// Eigenvalues of a Hermitian matrix, largest first.
pub fn sorted_eigenvalues(matrix: &DMatrix<Complex64>) -> Vec<f64> {
    let mut g: Vec<f64> = matrix
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    g.sort_by(|a, b| b.total_cmp(a));
    g
}

/// Eigenvalues of the Hermitian circulant with first row `row`, largest
/// first.
pub fn circulant_spectrum(row: &[Complex64]) -> Vec<f64> {
    let m = row.len();
    let mut g: Vec<f64> = (0..m)
        .map(|j| {
            row.iter()
                .enumerate()
                .map(|(k, c)| c * Complex64::from_polar(1.0, TAU * (j * k) as f64 / m as f64))
                .sum::<Complex64>()
                .re
        })
        .collect();
    g.sort_by(|a, b| b.total_cmp(a));
    g
}

/// Clips negative eigenvalues, rescales to sum `M` and applies the floor.
pub fn normalize_spectrum(g: &[f64]) -> Result<Vec<f64>> {
    let m = g.len() as f64;
    let clipped: Vec<f64> = g.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter(
            "spectrum has no positive mass".into(),
        ));
    }
    let scaled: Vec<f64> = clipped.iter().map(|x| x * m / total).collect();
    Ok(project_simplex(&scaled, EIGEN_FLOOR))
}

fn check_spectrum(g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::InvalidParameter("empty spectrum".into()));
    }
    if let Some(&bad) = g.iter().find(|&&x| x < -NEGATIVE_TOL) {
        return Err(Error::NegativeEigenvalue(bad));
    }
    let m = g.len() as f64;
    let total: f64 = g.iter().sum();
    if (total - m).abs() > SUM_TOL {
        return Err(Error::InvalidParameter(format!(
            "spectrum sums to {total}, expected {m}"
        )));
    }
    Ok(())
}

/// Amplitudes `z_j = (1/M) Σ_s e^{-iφ_s} g_s^{1/2} e^{-2πi sj/M}`, so that
/// `P(B = j | A = k) = |z_{(j-k) mod M}|²`.
fn amplitudes(phi: &[f64], g: &[f64]) -> Vec<Complex64> {
    let m = g.len();
    let a: Vec<Complex64> = phi
        .iter()
        .zip(g)
        .map(|(p, x)| Complex64::from_polar(x.max(EIGEN_FLOOR).sqrt(), -p))
        .collect();
    (0..m)
        .map(|j| {
            a.iter()
                .enumerate()
                .map(|(s, c)| c * Complex64::from_polar(1.0, -TAU * (s * j % m) as f64 / m as f64))
                .sum::<Complex64>()
                / m as f64
        })
        .collect()
}

fn check_phases(phi: &[f64], g: &[f64]) -> Result<()> {
    if phi.len() != g.len() {
        return Err(Error::InvalidParameter(format!(
            "{} phases for {} eigenvalues",
            phi.len(),
            g.len()
        )));
    }
    Ok(())
}

/// `P[k][j] = P(B = j | A = k)`.
pub fn channel_probs(phi: &[f64], g: &[f64]) -> Result<DMatrix<f64>> {
    check_phases(phi, g)?;
    check_spectrum(g)?;
    let m = g.len();
    let z = amplitudes(phi, g);
    Ok(DMatrix::from_fn(m, m, |k, j| z[(j + m - k) % m].norm_sqr()))
}

fn resolve_priors(priors: Option<&[f64]>, m: usize) -> Result<Vec<f64>> {
    match priors {
        None => Ok(vec![1.0 / m as f64; m]),
        Some(q) => {
            let total: f64 = q.iter().sum();
            if q.len() != m || q.iter().any(|&x| !(x > 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(
                    "priors must be strictly positive and sum to 1".into(),
                ));
            }
            Ok(q.to_vec())
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `I(A;B) = H(B) - H(B | A = 0)` in nats, with `0 log 0 = 0`.
pub fn mutual_information(phi: &[f64], g: &[f64], priors: Option<&[f64]>) -> Result<f64> {
    Ok(mi_with_gradients(phi, g, priors)?.0)
}

/// Rejects measurements with an outcome that never fires for `ψ_0`.
pub fn check_min_probability(phi: &[f64], g: &[f64]) -> Result<()> {
    check_phases(phi, g)?;
    check_spectrum(g)?;
    match amplitudes(phi, g).iter().position(|z| z.norm_sqr() < 1e-24) {
        Some(outcome) => Err(Error::ZeroConditionalProbability { outcome }),
        None => Ok(()),
    }
}

/// Mutual information with its gradients in `φ` and in `g`.
pub fn mi_with_gradients(
    phi: &[f64],
    g: &[f64],
    priors: Option<&[f64]>,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_phases(phi, g)?;
    check_spectrum(g)?;
    let m = g.len();
    let q = resolve_priors(priors, m)?;
    let z = amplitudes(phi, g);
    let c: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
    let p_b: Vec<f64> = (0..m)
        .map(|j| (0..m).map(|k| q[k] * c[(j + m - k) % m]).sum())
        .collect();
    let value =
        c.iter().map(|&x| xlogx(x)).sum::<f64>() - p_b.iter().map(|&x| xlogx(x)).sum::<f64>();

    // dI/dc_r = log c_r - Σ_j q_{(j-r) mod M} log P(B = j); the factor 2 z̄_r
    // from dc_r vanishes faster than the logarithm diverges.
    let log_pb: Vec<f64> = p_b
        .iter()
        .map(|&x| if x > 0.0 { x.ln() } else { 0.0 })
        .collect();
    let weights: Vec<Complex64> = (0..m)
        .map(|r| {
            if c[r] == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let w = c[r].ln() - (0..m).map(|j| q[(j + m - r) % m] * log_pb[j]).sum::<f64>();
            2.0 * z[r].conj() * w
        })
        .collect();

    let mf = m as f64;
    let mut d_phi = vec![0.0; m];
    let mut d_g = vec![0.0; m];
    for s in 0..m {
        let gs = g[s].max(EIGEN_FLOOR);
        let unit = Complex64::from_polar(1.0, -phi[s]);
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, w) in weights.iter().enumerate() {
            acc += w * Complex64::from_polar(1.0, -TAU * (s * r % m) as f64 / mf);
        }
        acc *= unit / mf;
        // dz_r/dφ_s = -i a_s ω^{-sr} / M and dz_r/dg_s = e^{-iφ_s} ω^{-sr} / (2M √g_s).
        d_phi[s] = (acc * Complex64::new(0.0, -gs.sqrt())).re;
        d_g[s] = if g[s] > EIGEN_FLOOR {
            acc.re / (2.0 * gs.sqrt())
        } else {
            0.0
        };
    }
    Ok((value, d_phi, d_g))
}

/// How a conformal radius on wavefunctions becomes a radius on spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    /// `‖g - ĝ‖² <= 3M²(2q + q²)`.
    #[serde(rename = "paper_bound", alias = "propagated")]
    Propagated,
    /// Uses `q` directly.
    Empirical,
}

impl std::str::FromStr for RadiusMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_bound" | "propagated" => Ok(RadiusMode::Propagated),
            "empirical" => Ok(RadiusMode::Empirical),
            other => Err(Error::Config(format!("unknown radius mode `{other}`"))),
        }
    }
}

/// Euclidean radius of the ball of sorted spectra.
pub fn propagate_radius(q_star: f64, m: usize, mode: RadiusMode) -> f64 {
    let q = q_star.max(0.0);
    match mode {
        RadiusMode::Propagated => (3.0 * (m * m) as f64 * (2.0 * q + q * q)).sqrt(),
        RadiusMode::Empirical => q,
    }
}

/// Euclidean projection onto `{g >= floor, Σg = Σ target}` where the target
/// sum is `len`.
fn project_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let m = v.len();
    let budget = m as f64 * (1.0 - floor);
    let mut u: Vec<f64> = v.iter().map(|x| x - floor).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - budget) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter()
        .map(|x| (x - floor - theta).max(0.0) + floor)
        .collect()
}

fn project_ball(v: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let d = dist(v, center);
    if d <= radius {
        return v.to_vec();
    }
    let f = if d > 0.0 { radius / d } else { 0.0 };
    center.iter().zip(v).map(|(c, x)| c + f * (x - c)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Projection onto `B(center, radius) ∩ {g >= ε, Σg = M}` by Dykstra's
/// alternating scheme. `center` must lie in the second set.
pub fn project_feasible(v: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return center.to_vec();
    }
    let m = v.len();
    let mut x = v.to_vec();
    let mut p = vec![0.0; m];
    let mut q = vec![0.0; m];
    for _ in 0..10_000 {
        let y_in: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = project_ball(&y_in, center, radius);
        p = y_in.iter().zip(&y).map(|(a, b)| a - b).collect();
        let x_in: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let x_new = project_simplex(&x_in, EIGEN_FLOOR);
        q = x_in.iter().zip(&x_new).map(|(a, b)| a - b).collect();
        let change = dist(&x_new, &x);
        x = x_new;
        if change < 1e-14 && dist(&x, center) <= radius * (1.0 + 1e-12) + 1e-14 {
            break;
        }
    }
    // Residual ball violation after convergence is at rounding level; pull
    // back along the chord to the (feasible) center.
    let d = dist(&x, center);
    if d > radius {
        let f = radius / d;
        x = center
            .iter()
            .zip(&x)
            .map(|(c, a)| c + f * (a - c))
            .collect();
    }
    x
}

/// Measurement design strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// `φ = 0`.
    Pgm,
    /// Maximizes `I(φ, ĝ)`.
    Nominal,
    /// Maximizes the worst case of `I(φ, g)` over the spectrum ball.
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptions {
    /// Phase starts, including `φ = 0`.
    pub starts: usize,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions {
            starts: 6,
            outer_iters: 200,
            inner_iters: 200,
            tol: 1e-10,
            seed: 0,
        }
    }
}

fn wrap_phases(phi: &mut [f64]) {
    for p in phi.iter_mut() {
        *p = p.rem_euclid(TAU);
    }
}

/// Minimizes `I(φ, ·)` over the feasible spectrum ball. Returns the value and
/// the minimizer.
pub fn worst_case(
    phi: &[f64],
    g_hat: &[f64],
    radius: f64,
    opts: &PhaseOptions,
) -> Result<(f64, Vec<f64>)> {
    let m = g_hat.len();
    let mut starts = vec![g_hat.to_vec()];
    if radius > 0.0 {
        for i in 0..m {
            for sign in [1.0, -1.0] {
                let dir: Vec<f64> = (0..m)
                    .map(|k| sign * (if k == i { 1.0 } else { 0.0 } - 1.0 / m as f64))
                    .collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                let v: Vec<f64> = g_hat
                    .iter()
                    .zip(&dir)
                    .map(|(c, d)| c + radius * d / norm)
                    .collect();
                starts.push(project_feasible(&v, g_hat, radius));
            }
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for g0 in starts {
        let (v, g) = descend_spectrum(phi, g_hat, radius, g0, opts)?;
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, g));
        }
    }
    Ok(best.expect("at least one start"))
}

fn descend_spectrum(
    phi: &[f64],
    g_hat: &[f64],
    radius: f64,
    mut g: Vec<f64>,
    opts: &PhaseOptions,
) -> Result<(f64, Vec<f64>)> {
    let (mut value, _, mut grad) = mi_with_gradients(phi, &g, None)?;
    if radius <= 0.0 {
        return Ok((value, g));
    }
    let mut step = radius.max(1e-3);
    for _ in 0..opts.inner_iters {
        let mut moved = false;
        while step > 1e-14 {
            let trial: Vec<f64> = g.iter().zip(&grad).map(|(x, d)| x - step * d).collect();
            let cand = project_feasible(&trial, g_hat, radius);
            let (cv, _, cg) = mi_with_gradients(phi, &cand, None)?;
            if cv < value - 1e-15 {
                let shift = dist(&cand, &g);
                g = cand;
                grad = cg;
                let gain = value - cv;
                value = cv;
                moved = shift > opts.tol && gain > opts.tol * 1e-3;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((value, g))
}

fn phase_starts(m: usize, opts: &PhaseOptions) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![0.0; m]];
    for _ in 1..opts.starts.max(1) {
        starts.push((0..m).map(|_| rng.random::<f64>() * TAU).collect());
    }
    starts
}

/// Gradient ascent with step doubling/halving on `objective`, which returns
/// the value and an ascent direction.
fn ascend<F>(mut phi: Vec<f64>, iters: usize, tol: f64, mut objective: F) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut value, mut grad) = objective(&phi)?;
    let mut step = 1.0;
    for _ in 0..iters {
        let mut moved = false;
        while step > 1e-12 {
            let mut trial: Vec<f64> = phi.iter().zip(&grad).map(|(p, d)| p + step * d).collect();
            wrap_phases(&mut trial);
            let (tv, tg) = objective(&trial)?;
            if tv > value + 1e-15 {
                moved = tv - value > tol;
                phi = trial;
                value = tv;
                grad = tg;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((value, phi))
}

/// Chosen phases and their design-time objective (`I(φ, ĝ)` for PGM and
/// nominal, the worst case for robust).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPhases {
    pub phi: Vec<f64>,
    pub objective: f64,
}

pub fn optimize_phases(
    g_hat: &[f64],
    radius: f64,
    mode: PhaseMode,
    opts: &PhaseOptions,
) -> Result<MeasurementPhases> {
    check_spectrum(g_hat)?;
    let m = g_hat.len();
    let g_hat = project_simplex(g_hat, EIGEN_FLOOR);
    match mode {
        PhaseMode::Pgm => {
            let phi = vec![0.0; m];
            let objective = mutual_information(&phi, &g_hat, None)?;
            Ok(MeasurementPhases { phi, objective })
        }
        PhaseMode::Nominal => best_of_starts(m, opts, |phi| {
            ascend(phi, opts.outer_iters, opts.tol, |p| {
                let (v, dp, _) = mi_with_gradients(p, &g_hat, None)?;
                Ok((v, dp))
            })
        }),
        PhaseMode::Robust => best_of_starts(m, opts, |phi| {
            ascend(phi, opts.outer_iters, opts.tol, |p| {
                let (_, g_star) = worst_case(p, &g_hat, radius, opts)?;
                let (v, dp, _) = mi_with_gradients(p, &g_star, None)?;
                Ok((v, dp))
            })
        }),
    }
}

fn best_of_starts<F>(m: usize, opts: &PhaseOptions, mut run: F) -> Result<MeasurementPhases>
where
    F: FnMut(Vec<f64>) -> Result<(f64, Vec<f64>)>,
{
    let mut best: Option<MeasurementPhases> = None;
    for start in phase_starts(m, opts) {
        let (objective, phi) = run(start)?;
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            best = Some(MeasurementPhases { phi, objective });
        }
    }
    Ok(best.expect("at least one start"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationConfig {
    pub m: usize,
    pub spec: SobolevSpec,
    pub alpha: f64,
    pub radius_mode: RadiusMode,
    pub n_test: usize,
    pub seed: u64,
    pub phases: PhaseOptions,
}

/// One test draw: mutual information under the true channel for each scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationRow {
    pub draw: usize,
    pub i_pgm: f64,
    pub i_nom: f64,
    pub i_rob: f64,
    pub q_star: f64,
    pub radius: f64,
    /// `‖g - ĝ‖₂` between true and predicted sorted spectra.
    pub spectrum_error: f64,
    /// Base-state full residual within `q_star`.
    pub covered: bool,
    /// `‖g - ĝ‖₂` within the propagated radius.
    pub within_propagated_radius: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationSummary {
    pub rows: Vec<DiscriminationRow>,
    pub mean_pgm: f64,
    pub mean_nom: f64,
    pub mean_rob: f64,
    pub rob_vs_pgm: PairedTestResult,
    pub rob_vs_nom: PairedTestResult,
}

fn normalized(u: &SpectralField) -> SpectralField {
    let n = u.l2_norm();
    if n > 0.0 {
        u.scale(1.0 / n)
    } else {
        u.clone()
    }
}

/// Compares PGM, nominal and robust measurements on `n_test` fresh base
/// states. `q_raw` is the calibrated score quantile at `cfg.spec.trunc`.
pub fn discrimination_experiment(
    model: &dyn SpectralOperator,
    pde: &PdeKind,
    grf: &GrfParams,
    margin: &MarginBound,
    q_raw: f64,
    cfg: &DiscriminationConfig,
) -> Result<DiscriminationSummary> {
    if !matches!(pde, PdeKind::Schrodinger { .. }) {
        return Err(Error::InvalidParameter(
            "discrimination needs a Schrödinger channel".into(),
        ));
    }
    cfg.spec.validate_for_grid(grf.grid_size)?;
    let rows = (0..cfg.n_test)
        .into_par_iter()
        .map(|draw| discrimination_draw(model, pde, grf, margin, q_raw, cfg, draw))
        .collect::<Result<Vec<_>>>()?;
    summarize(rows)
}

fn discrimination_draw(
    model: &dyn SpectralOperator,
    pde: &PdeKind,
    grf: &GrfParams,
    margin: &MarginBound,
    q_raw: f64,
    cfg: &DiscriminationConfig,
    draw: usize,
) -> Result<DiscriminationRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(draw as u64));
    let base = pde.sample_input(grf, &mut rng);
    let constellation = build_constellation(&base, cfg.m)?;

    let truth = constellation
        .states()
        .iter()
        .map(|s| pde.solve(s))
        .collect::<Result<Vec<_>>>()?;
    let predicted: Vec<SpectralField> = constellation
        .states()
        .iter()
        .map(|s| normalized(&model.apply(s)))
        .collect();
    let g = normalize_spectrum(&gram(&truth)?.g)?;
    let g_hat = normalize_spectrum(&gram(&predicted)?.g)?;

    let q_star = corrected_quantile(q_raw, margin.eval(&base)?, cfg.spec.trunc, cfg.spec.tau);
    let radius = propagate_radius(q_star, cfg.m, cfg.radius_mode);
    let residual = {
        let pred = model.apply(&base).resize(truth[0].grid_size());
        sobolev_norm_sq(&truth[0].sub(&pred), cfg.spec.score_order())
    };
    let spectrum_error = dist(&g, &g_hat);

    let mut opts = cfg.phases;
    opts.seed = opts.seed.wrapping_add(draw as u64);
    let value = |mode| -> Result<f64> {
        let phases = optimize_phases(&g_hat, radius, mode, &opts)?;
        mutual_information(&phases.phi, &g, None)
    };
    Ok(DiscriminationRow {
        draw,
        i_pgm: value(PhaseMode::Pgm)?,
        i_nom: value(PhaseMode::Nominal)?,
        i_rob: value(PhaseMode::Robust)?,
        q_star,
        radius,
        spectrum_error,
        covered: residual <= q_star,
        within_propagated_radius: spectrum_error
            <= propagate_radius(q_star, cfg.m, RadiusMode::Propagated),
    })
}

fn summarize(rows: Vec<DiscriminationRow>) -> Result<DiscriminationSummary> {
    let n = rows.len() as f64;
    let col = |f: fn(&DiscriminationRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (pgm, nom, rob) = (col(|r| r.i_pgm), col(|r| r.i_nom), col(|r| r.i_rob));
    Ok(DiscriminationSummary {
        mean_pgm: pgm.iter().sum::<f64>() / n,
        mean_nom: nom.iter().sum::<f64>() / n,
        mean_rob: rob.iter().sum::<f64>() / n,
        rob_vs_pgm: paired_greater(&rob, &pgm)?,
        rob_vs_nom: paired_greater(&rob, &nom)?,
        rows,
    })
}

pub fn write_discrimination_rows<W: Write>(rows: &[DiscriminationRow], w: W) -> Result<()> {
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
    use crate::spectral::{sample_grf, to_physical, Reality};

    fn unit_base(grid: usize, seed: u64) -> SpectralField {
        let grf = GrfParams::new(1.0, 1.0, 1.5, grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        normalized(&sample_grf(&grf, Reality::Complex, &mut rng))
    }

    #[test]
    fn shift_matches_physical_translation() {
        let g = 16;
        let base = unit_base(g, 3);
        let m = 4;
        let shifted = to_physical(&shift_state(&base, 1, m));
        let orig = to_physical(&base);
        // Translation by 2π/4 on a 16-point grid is 4 samples along axis 1.
        for i in 0..g {
            for j in 0..g {
                let a = shifted[i * g + j];
                let b = orig[((i + g - 4) % g) * g + j];
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn shift_has_period_m() {
        let base = unit_base(16, 5);
        let back = shift_state(&base, 5, 5);
        assert!(back.sub(&base).l2_norm() < 1e-12);
        let c = build_constellation(&base, 1).unwrap();
        assert_eq!(c.states()[0], base);
        assert!(build_constellation(&base.scale(2.0), 3).is_err());
    }

    #[test]
    fn gus_gram_is_circulant() {
        let base = unit_base(32, 9);
        let c = build_constellation(&base, 5).unwrap();
        let gs = gram(c.states()).unwrap();
        let row: Vec<Complex64> = (0..5).map(|k| gs.matrix[(0, k)]).collect();
        let dft = circulant_spectrum(&row);
        for (a, b) in gs.g.iter().zip(&dft) {
            assert!((a - b).abs() < 1e-8);
        }
        let trace: f64 = gs.g.iter().sum();
        assert!((trace - 5.0).abs() < 1e-8);
    }

    #[test]
    fn two_state_overlap_spectrum() {
        let g = 8;
        let mut a = SpectralField::zeros(g, Reality::Complex);
        let mut b = SpectralField::zeros(g, Reality::Complex);
        let c = 0.3f64;
        a.set(
            crate::spectral::ModeIndex::new(1, 0),
            Complex64::new(1.0, 0.0),
        );
        b.set(
            crate::spectral::ModeIndex::new(1, 0),
            Complex64::new(c, 0.0),
        );
        b.set(
            crate::spectral::ModeIndex::new(0, 2),
            Complex64::new((1.0 - c * c).sqrt(), 0.0),
        );
        let gs = gram(&[a, b]).unwrap();
        assert!((gs.g[0] - 1.3).abs() < 1e-12 && (gs.g[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn perfect_channel() {
        for m in 2..6 {
            let g = vec![1.0; m];
            let p = channel_probs(&vec![0.0; m], &g).unwrap();
            assert!((p - DMatrix::<f64>::identity(m, m)).abs().max() < 1e-12);
            let i = mutual_information(&vec![0.0; m], &g, None).unwrap();
            assert!((i - (m as f64).ln()).abs() < 1e-12);
            assert!(matches!(
                check_min_probability(&vec![0.0; m], &g),
                Err(Error::ZeroConditionalProbability { .. })
            ));
        }
    }

    #[test]
    fn uninformative_channel() {
        let g = normalize_spectrum(&[3.0, 0.0, 0.0]).unwrap();
        let i = mutual_information(&[0.0, 1.0, 2.0], &g, None).unwrap();
        assert!(i.abs() < 1e-6, "{i}");
    }

    #[test]
    fn mi_matches_joint_distribution() {
        let g = [1.5, 1.0, 0.5];
        let phi = [0.0; 3];
        let p = channel_probs(&phi, &g).unwrap();
        // Direct sum over the joint distribution with uniform priors.
        let mut i = 0.0;
        for k in 0..3 {
            for j in 0..3 {
                let joint = p[(k, j)] / 3.0;
                let marg_b: f64 = (0..3).map(|kk| p[(kk, j)] / 3.0).sum();
                if joint > 0.0 {
                    i += joint * (joint / (marg_b / 3.0)).ln();
                }
            }
        }
        let ours = mutual_information(&phi, &g, None).unwrap();
        assert!((ours - i).abs() < 1e-12, "{ours} vs {i}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = [1.4, 0.9, 0.5, 1.2];
        let phi = [0.3, 1.1, -0.4, 2.0];
        let priors = [0.1, 0.2, 0.3, 0.4];
        let (_, dp, dg) = mi_with_gradients(&phi, &g, Some(&priors)).unwrap();
        let h = 1e-6;
        for s in 0..4 {
            let mut a = phi;
            let mut b = phi;
            a[s] += h;
            b[s] -= h;
            let fd = (mutual_information(&a, &g, Some(&priors)).unwrap()
                - mutual_information(&b, &g, Some(&priors)).unwrap())
                / (2.0 * h);
            assert!((fd - dp[s]).abs() < 1e-7, "phi {s}: {fd} vs {}", dp[s]);
            // Perturb g along a sum-preserving direction to stay in the domain.
            let mut a = g;
            let mut b = g;
            a[s] += h;
            a[(s + 1) % 4] -= h;
            b[s] -= h;
            b[(s + 1) % 4] += h;
            let fd = (mutual_information(&phi, &a, Some(&priors)).unwrap()
                - mutual_information(&phi, &b, Some(&priors)).unwrap())
                / (2.0 * h);
            let an = dg[s] - dg[(s + 1) % 4];
            assert!((fd - an).abs() < 1e-7, "g {s}: {fd} vs {an}");
        }
    }

    #[test]
    fn propagated_radius() {
        assert_eq!(propagate_radius(0.0, 3, RadiusMode::Propagated), 0.0);
        let r = propagate_radius(0.1, 3, RadiusMode::Propagated);
        assert!((r * r - 5.67).abs() < 1e-12);
        assert_eq!(propagate_radius(0.1, 3, RadiusMode::Empirical), 0.1);
    }

    #[test]
    fn feasible_projection_lands_in_both_sets() {
        let center = [1.5, 1.0, 0.5];
        let p = project_feasible(&[3.0, -1.0, 0.2], &center, 0.3);
        assert!(dist(&p, &center) <= 0.3 + 1e-12);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-10);
        assert!(p.iter().all(|&x| x >= EIGEN_FLOOR - 1e-15));
    }

    #[test]
    fn zero_radius_robust_equals_nominal() {
        let g = [1.5, 1.0, 0.5];
        let opts = PhaseOptions::default();
        let nom = optimize_phases(&g, 0.0, PhaseMode::Nominal, &opts).unwrap();
        let rob = optimize_phases(&g, 0.0, PhaseMode::Robust, &opts).unwrap();
        assert!((nom.objective - rob.objective).abs() < 1e-6);
        let pgm = optimize_phases(&g, 0.0, PhaseMode::Pgm, &opts).unwrap();
        assert!(nom.objective >= pgm.objective - 1e-9);
    }

    #[test]
    fn flat_spectrum_optimum_is_log_m() {
        let nom =
            optimize_phases(&[1.0; 3], 0.0, PhaseMode::Nominal, &PhaseOptions::default()).unwrap();
        assert!((nom.objective - 3f64.ln()).abs() < 1e-9);
    }
}
