//! Fourier representation of fields on the 2-torus `[0, 2π)²`.
//!
//! A field is stored as its complex Fourier coefficients on a `G × G` grid of
//! integer modes `n = (n1, n2)` with `-G/2 <= n_i < G/2`, in centered
//! row-major order (row = `n1 + G/2`, column = `n2 + G/2`). The basis is
//! `φ_n(x) = exp(i n·x)` and the L² norm is normalized so that
//! `‖u‖²_0 = Σ |û_n|²` equals the spatial mean of `|u(x)|²`.
//!
//! Sobolev norms use the weights `(1 + ‖n‖²)^s` with integer modes.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An integer Fourier mode on the 2-torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub n1: i32,
    pub n2: i32,
}

impl ModeIndex {
    pub const ZERO: ModeIndex = ModeIndex { n1: 0, n2: 0 };

    pub const fn new(n1: i32, n2: i32) -> Self {
        Self { n1, n2 }
    }

    /// `‖n‖₂²`
    pub fn norm_sq(self) -> f64 {
        let (a, b) = (self.n1 as f64, self.n2 as f64);
        a * a + b * b
    }

    /// `|n|_∞`
    pub fn sup_norm(self) -> usize {
        self.n1.unsigned_abs().max(self.n2.unsigned_abs()) as usize
    }
}

impl std::ops::Neg for ModeIndex {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.n1, -self.n2)
    }
}

/// Whether a field represents a real-valued physical function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reality {
    Real,
    Complex,
}

/// Complex Fourier coefficients of a field on the 2-torus.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid_size: usize,
    coeffs: Vec<Complex64>,
    reality: Reality,
}

fn check_grid(grid_size: usize) -> Result<()> {
    if grid_size == 0 || !grid_size.is_multiple_of(2) {
        return Err(Error::InvalidGridSize(grid_size));
    }
    Ok(())
}

impl SpectralField {
    pub fn zeros(grid_size: usize, reality: Reality) -> Self {
        assert!(
            grid_size > 0 && grid_size.is_multiple_of(2),
            "grid size must be even and positive, got {grid_size}"
        );
        Self {
            grid_size,
            coeffs: vec![Complex64::new(0.0, 0.0); grid_size * grid_size],
            reality,
        }
    }

    /// Builds a field from coefficients in centered row-major order.
    pub fn from_coeffs(grid_size: usize, coeffs: Vec<Complex64>, reality: Reality) -> Result<Self> {
        check_grid(grid_size)?;
        if coeffs.len() != grid_size * grid_size {
            return Err(Error::Format(format!(
                "expected {} coefficients for grid size {grid_size}, got {}",
                grid_size * grid_size,
                coeffs.len()
            )));
        }
        Ok(Self {
            grid_size,
            coeffs,
            reality,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn reality(&self) -> Reality {
        self.reality
    }

    pub fn set_reality(&mut self, reality: Reality) {
        self.reality = reality;
    }

    /// Coefficients in centered row-major order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn half(&self) -> i32 {
        (self.grid_size / 2) as i32
    }

    /// Whether `n` is one of the stored modes (`-G/2 <= n_i < G/2`).
    pub fn contains(&self, n: ModeIndex) -> bool {
        let h = self.half();
        (-h..h).contains(&n.n1) && (-h..h).contains(&n.n2)
    }

    /// Storage offset of a mode; modes are taken modulo the grid period.
    pub fn offset(&self, n: ModeIndex) -> usize {
        let g = self.grid_size as i32;
        let h = self.half();
        let r = (n.n1 + h).rem_euclid(g) as usize;
        let c = (n.n2 + h).rem_euclid(g) as usize;
        r * self.grid_size + c
    }

    pub fn mode_at(&self, offset: usize) -> ModeIndex {
        let h = self.half();
        ModeIndex::new(
            (offset / self.grid_size) as i32 - h,
            (offset % self.grid_size) as i32 - h,
        )
    }

    /// Coefficient at mode `n` (taken modulo the grid period, so `+G/2`
    /// aliases to `-G/2`).
    pub fn get(&self, n: ModeIndex) -> Complex64 {
        self.coeffs[self.offset(n)]
    }

    pub fn set(&mut self, n: ModeIndex, value: Complex64) {
        let o = self.offset(n);
        self.coeffs[o] = value;
    }

    /// Iterates `(mode, coefficient)` pairs in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(o, c)| (self.mode_at(o), *c))
    }

    pub fn check_same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid_size != other.grid_size {
            return Err(Error::GridMismatch {
                left: self.grid_size,
                right: other.grid_size,
            });
        }
        Ok(())
    }

    /// Reality of a binary combination: real only if both operands are real.
    fn joint_reality(&self, other: &SpectralField) -> Reality {
        if self.reality == Reality::Real && other.reality == Reality::Real {
            Reality::Real
        } else {
            Reality::Complex
        }
    }

    /// `self - other`. Panics on mismatched grids.
    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.grid_size, other.grid_size, "grid size mismatch");
        SpectralField {
            grid_size: self.grid_size,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
            reality: self.joint_reality(other),
        }
    }

    /// `self + other`. Panics on mismatched grids.
    pub fn add(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.grid_size, other.grid_size, "grid size mismatch");
        SpectralField {
            grid_size: self.grid_size,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
            reality: self.joint_reality(other),
        }
    }

    pub fn scale(&self, factor: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= factor);
        out
    }

    /// Applies a per-mode complex multiplier.
    pub fn map_modes(&self, mut f: impl FnMut(ModeIndex, Complex64) -> Complex64) -> SpectralField {
        let mut out = self.clone();
        for o in 0..out.coeffs.len() {
            let n = out.mode_at(o);
            out.coeffs[o] = f(n, out.coeffs[o]);
        }
        out
    }

    /// L² inner product `⟨self, other⟩ = Σ conj(self_n) other_n`.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        assert_eq!(self.grid_size, other.grid_size, "grid size mismatch");
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `‖u‖_{L²}` under the normalized measure.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Storage offset of the Hermitian partner `-n` (modulo the grid period).
    pub fn partner_offset(&self, offset: usize) -> usize {
        self.offset(-self.mode_at(offset))
    }

    /// Largest violation of `û_{-n} = conj(û_n)`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|o| (self.coeffs[self.partner_offset(o)] - self.coeffs[o].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Projects onto Hermitian-symmetric coefficients and marks the field real.
    pub fn symmetrize_real(&self) -> SpectralField {
        let mut out = self.clone();
        for o in 0..self.coeffs.len() {
            let p = self.partner_offset(o);
            out.coeffs[o] = 0.5 * (self.coeffs[o] + self.coeffs[p].conj());
        }
        out.reality = Reality::Real;
        out
    }

    /// Resamples onto another grid size by zero-padding or truncating modes.
    pub fn resize(&self, grid_size: usize) -> SpectralField {
        let mut out = SpectralField::zeros(grid_size, self.reality);
        for (n, c) in self.iter() {
            if out.contains(n) {
                out.set(n, c);
            }
        }
        out
    }
}

/// Smoothness and truncation parameters for scores and margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SobolevSpec {
    /// Sobolev smoothness `s`.
    pub s: f64,
    /// Decay `τ` with `1 <= τ <= s`; scores use the `s - τ` norm.
    pub tau: f64,
    /// Spectral truncation `N`.
    pub trunc: usize,
}

impl Default for SobolevSpec {
    fn default() -> Self {
        Self {
            s: 2.0,
            tau: 2.0,
            trunc: 16,
        }
    }
}

impl SobolevSpec {
    pub fn new(s: f64, tau: f64, trunc: usize) -> Result<Self> {
        let spec = Self { s, tau, trunc };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0) || !(self.tau >= 1.0) || self.tau > self.s {
            return Err(Error::InvalidParameter(format!(
                "Sobolev spec needs 1 <= tau <= s, got s = {}, tau = {}",
                self.s, self.tau
            )));
        }
        if self.trunc == 0 {
            return Err(Error::InvalidParameter("truncation must be >= 1".into()));
        }
        Ok(())
    }

    pub fn validate_for_grid(&self, grid_size: usize) -> Result<()> {
        self.validate()?;
        if self.trunc > grid_size / 2 {
            return Err(Error::InvalidTruncation {
                trunc: self.trunc,
                grid_size,
            });
        }
        Ok(())
    }

    /// Smoothness of the score norm, `s - τ`.
    pub fn score_order(&self) -> f64 {
        self.s - self.tau
    }

    pub fn with_trunc(&self, trunc: usize) -> Self {
        Self { trunc, ..*self }
    }
}

/// Sobolev weight `(1 + ‖n‖²)^s`.
pub fn sobolev_weight(n: ModeIndex, s: f64) -> f64 {
    let base = 1.0 + n.norm_sq();
    if s == s.trunc() && s.abs() < 64.0 {
        base.powi(s as i32)
    } else {
        base.powf(s)
    }
}

/// `‖u‖²_s = Σ_n (1 + ‖n‖²)^s |û_n|²`.
pub fn sobolev_norm_sq(u: &SpectralField, s: f64) -> f64 {
    u.iter()
        .map(|(n, c)| sobolev_weight(n, s) * c.norm_sqr())
        .sum()
}

/// Zeroes every mode with `|n|_∞ > trunc`.
pub fn truncate(u: &SpectralField, trunc: usize) -> Result<SpectralField> {
    if trunc > u.grid_size() / 2 {
        return Err(Error::InvalidTruncation {
            trunc,
            grid_size: u.grid_size(),
        });
    }
    Ok(u.map_modes(|n, c| {
        if n.sup_norm() > trunc {
            Complex64::new(0.0, 0.0)
        } else {
            c
        }
    }))
}

/// Whether every mode with `|n|_∞ > trunc` is (numerically) zero.
pub fn is_band_limited(u: &SpectralField, trunc: usize, tol: f64) -> bool {
    u.iter()
        .all(|(n, c)| n.sup_norm() <= trunc || c.norm() <= tol)
}

/// Conformal score `‖center - Π_N observed‖²_{s-τ}` with both fields
/// truncated to `N = spec.trunc`.
pub fn score(center: &SpectralField, observed: &SpectralField, spec: &SobolevSpec) -> Result<f64> {
    center.check_same_grid(observed)?;
    if spec.trunc > center.grid_size() / 2 {
        return Err(Error::InvalidTruncation {
            trunc: spec.trunc,
            grid_size: center.grid_size(),
        });
    }
    let order = spec.score_order();
    Ok(center
        .iter()
        .zip(observed.coeffs())
        .filter(|((n, _), _)| n.sup_norm() <= spec.trunc)
        .map(|((n, a), b)| sobolev_weight(n, order) * (a - b).norm_sqr())
        .sum())
}

/// Cumulative truncated norms: entry `m` is `‖Π_m u‖²_s` for `m = 0..=max_trunc`.
///
/// One pass over the modes, binned by shell `|n|_∞`, then a prefix sum.
pub fn truncated_norms_sq(u: &SpectralField, s: f64, max_trunc: usize) -> Vec<f64> {
    let mut shells = vec![0.0; max_trunc + 1];
    for (n, c) in u.iter() {
        let m = n.sup_norm();
        if m <= max_trunc {
            shells[m] += sobolev_weight(n, s) * c.norm_sqr();
        }
    }
    let mut acc = 0.0;
    shells
        .into_iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Parameters of the spectral Gaussian random field
/// `a = Σ Z_n α^{1/2} (4π²‖n‖² + β)^{-ρ/2} φ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub grid_size: usize,
}

impl GrfParams {
    pub fn new(alpha: f64, beta: f64, rho: f64, grid_size: usize) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            rho,
            grid_size,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(self.grid_size)?;
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) || !(self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "GRF needs alpha >= 0, beta >= 0, rho > 0 (got {}, {}, {})",
                self.alpha, self.beta, self.rho
            )));
        }
        Ok(())
    }

    /// Standard deviation of the coefficient at mode `n`. The mean mode has
    /// zero deviation when `β = 0`.
    pub fn mode_std(&self, n: ModeIndex) -> f64 {
        let denom = 4.0 * PI * PI * n.norm_sq() + self.beta;
        if denom <= 0.0 {
            return 0.0;
        }
        self.alpha.sqrt() * denom.powf(-self.rho / 2.0)
    }
}

/// Draws a Gaussian random field.
///
/// Complex fields get independent circular Gaussians with `E|û_n|² = σ_n²`.
/// Real fields draw one circular Gaussian per conjugate pair and mirror it;
/// self-conjugate modes are drawn real with variance `σ_n²`.
pub fn sample_grf<R: Rng + ?Sized>(p: &GrfParams, reality: Reality, rng: &mut R) -> SpectralField {
    let mut out = SpectralField::zeros(p.grid_size, reality);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let total = p.grid_size * p.grid_size;
    for o in 0..total {
        let n = out.mode_at(o);
        let sigma = p.mode_std(n);
        match reality {
            Reality::Complex => {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                out.coeffs[o] = Complex64::new(re, im) * (sigma * inv_sqrt2);
            }
            Reality::Real => {
                let partner = out.partner_offset(o);
                if partner == o {
                    let re: f64 = StandardNormal.sample(rng);
                    out.coeffs[o] = Complex64::new(re * sigma, 0.0);
                } else if o < partner {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    let z = Complex64::new(re, im) * (sigma * inv_sqrt2);
                    out.coeffs[o] = z;
                    out.coeffs[partner] = z.conj();
                }
            }
        }
    }
    out
}

/// Planned forward/inverse FFTs for one grid size.
#[derive(Clone)]
pub struct Fft2 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let g = self.size;
        for row in data.chunks_exact_mut(g) {
            fft.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); g];
        for c in 0..g {
            for r in 0..g {
                column[r] = data[r * g + c];
            }
            fft.process(&mut column);
            for r in 0..g {
                data[r * g + c] = column[r];
            }
        }
    }

    /// Physical samples `u(x_j)`, `x_j = 2π j / G`, row-major with `j1` as row.
    pub fn to_physical(&self, u: &SpectralField) -> Vec<Complex64> {
        let g = self.size;
        assert_eq!(u.grid_size(), g, "grid size mismatch");
        let h = g / 2;
        // Centered layout -> FFT layout (index n mod G).
        let mut data = vec![Complex64::new(0.0, 0.0); g * g];
        for r in 0..g {
            for c in 0..g {
                data[((r + h) % g) * g + (c + h) % g] = u.coeffs[r * g + c];
            }
        }
        self.transform(&mut data, &self.inverse);
        data
    }

    pub fn from_physical(&self, samples: &[Complex64], reality: Reality) -> SpectralField {
        let g = self.size;
        assert_eq!(samples.len(), g * g, "sample count mismatch");
        let h = g / 2;
        let mut data = samples.to_vec();
        self.transform(&mut data, &self.forward);
        let scale = 1.0 / (g * g) as f64;
        let mut out = SpectralField::zeros(g, reality);
        for r in 0..g {
            for c in 0..g {
                out.coeffs[r * g + c] = data[((r + h) % g) * g + (c + h) % g] * scale;
            }
        }
        out
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Fft2>> = RefCell::new(HashMap::new());
}

/// Thread-local cached plan for a grid size.
pub fn fft_plan(size: usize) -> Fft2 {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(size)
            .or_insert_with(|| Fft2::new(size))
            .clone()
    })
}

/// Samples the field on the uniform `G × G` grid of `[0, 2π)²`.
pub fn to_physical(u: &SpectralField) -> Vec<Complex64> {
    fft_plan(u.grid_size()).to_physical(u)
}

/// Inverse of [`to_physical`].
pub fn from_physical(
    samples: &[Complex64],
    grid_size: usize,
    reality: Reality,
) -> Result<SpectralField> {
    check_grid(grid_size)?;
    if samples.len() != grid_size * grid_size {
        return Err(Error::GridMismatch {
            left: samples.len(),
            right: grid_size * grid_size,
        });
    }
    Ok(fft_plan(grid_size).from_physical(samples, reality))
}

const FIELD_MAGIC: &[u8; 4] = b"SPF1";

impl SpectralField {
    /// Binary record: magic `SPF1`, `u32` grid size, `u8` reality
    /// (0 = real, 1 = complex), then `G²` pairs of `f64` (re, im) in centered
    /// row-major order. All integers and floats little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(FIELD_MAGIC)?;
        w.write_all(&(self.grid_size as u32).to_le_bytes())?;
        w.write_all(&[match self.reality {
            Reality::Real => 0u8,
            Reality::Complex => 1u8,
        }])?;
        let mut buf = Vec::with_capacity(self.coeffs.len() * 16);
        for c in &self.coeffs {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Format("bad field magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let grid_size = u32::from_le_bytes(b4) as usize;
        check_grid(grid_size)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let reality = match flag[0] {
            0 => Reality::Real,
            1 => Reality::Complex,
            other => return Err(Error::Format(format!("bad reality flag {other}"))),
        };
        let mut buf = vec![0u8; grid_size * grid_size * 16];
        r.read_exact(&mut buf)?;
        let coeffs = buf
            .chunks_exact(16)
            .map(|ch| {
                let re = f64::from_le_bytes(ch[..8].try_into().unwrap());
                let im = f64::from_le_bytes(ch[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Self::from_coeffs(grid_size, coeffs, reality)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(g: usize, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = SpectralField::zeros(g, Reality::Complex);
        for z in u.coeffs_mut() {
            *z = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        u
    }

    #[test]
    fn norm_of_mean_mode_is_one() {
        let mut u = SpectralField::zeros(8, Reality::Real);
        u.set(ModeIndex::ZERO, c(1.0, 0.0));
        for s in [0.0, 1.0, 2.0, 3.5] {
            assert!((sobolev_norm_sq(&u, s) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn norm_of_first_cosine_pair() {
        let mut u = SpectralField::zeros(8, Reality::Real);
        u.set(ModeIndex::new(1, 0), c(1.0, 0.0));
        u.set(ModeIndex::new(-1, 0), c(1.0, 0.0));
        assert!((sobolev_norm_sq(&u, 2.0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn norm_matches_double_loop() {
        let u = random_field(8, 3);
        let s = 1.7;
        let mut expected = 0.0;
        for n1 in -4i32..4 {
            for n2 in -4i32..4 {
                let w = (1.0 + (n1 * n1 + n2 * n2) as f64).powf(s);
                expected += w * u.get(ModeIndex::new(n1, n2)).norm_sqr();
            }
        }
        let got = sobolev_norm_sq(&u, s);
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn truncation_edge_cases() {
        let u = random_field(16, 4);
        assert_eq!(truncate(&u, 8).unwrap(), u);
        let t0 = truncate(&u, 0).unwrap();
        for (n, z) in t0.iter() {
            if n != ModeIndex::ZERO {
                assert_eq!(z, c(0.0, 0.0));
            } else {
                assert_eq!(z, u.get(n));
            }
        }
        assert!(matches!(
            truncate(&u, 9),
            Err(Error::InvalidTruncation {
                trunc: 9,
                grid_size: 16
            })
        ));
    }

    #[test]
    fn truncation_nests() {
        let u = random_field(32, 5);
        let a = truncate(&truncate(&u, 8).unwrap(), 16).unwrap();
        assert_eq!(a, truncate(&u, 8).unwrap());
        let b = truncate(&truncate(&u, 16).unwrap(), 8).unwrap();
        assert_eq!(b, truncate(&u, 8).unwrap());
    }

    #[test]
    fn score_examples() {
        let spec = SobolevSpec::new(2.0, 1.0, 4).unwrap();
        let obs = random_field(16, 6);
        let center = truncate(&obs, 4).unwrap();
        assert!(score(&center, &obs, &spec).unwrap().abs() < 1e-15);

        let mut other = center.clone();
        let delta = 0.3;
        let n = ModeIndex::new(1, 1);
        other.set(n, other.get(n) + delta);
        let got = score(&other, &obs, &spec).unwrap();
        assert!((got - 3.0 * delta * delta).abs() < 1e-12);
    }

    #[test]
    fn score_matches_loop_oracle() {
        let spec = SobolevSpec::new(2.5, 1.0, 3).unwrap();
        let a = random_field(8, 7);
        let b = random_field(8, 8);
        let mut expected = 0.0;
        for n1 in -4i32..4 {
            for n2 in -4i32..4 {
                if n1.abs() > 3 || n2.abs() > 3 {
                    continue;
                }
                let n = ModeIndex::new(n1, n2);
                let w = (1.0 + (n1 * n1 + n2 * n2) as f64).powf(1.5);
                expected += w * (a.get(n) - b.get(n)).norm_sqr();
            }
        }
        let got = score(&a, &b, &spec).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn cumulative_norms_agree_with_truncation() {
        let u = random_field(16, 9);
        let cum = truncated_norms_sq(&u, 1.0, 8);
        for (m, v) in cum.iter().enumerate() {
            let direct = sobolev_norm_sq(&truncate(&u, m).unwrap(), 1.0);
            assert!((v - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn physical_round_trip_and_basis() {
        let u = random_field(16, 10);
        let x = to_physical(&u);
        let back = from_physical(&x, 16, Reality::Complex).unwrap();
        for (a, b) in u.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }

        let mut k = SpectralField::zeros(8, Reality::Complex);
        k.set(ModeIndex::ZERO, c(2.5, -1.0));
        for z in to_physical(&k) {
            assert!((z - c(2.5, -1.0)).norm() < 1e-14);
        }

        // e^{i x1} at x = (π/2, 0): row j1 = G/4, column 0.
        let mut e = SpectralField::zeros(8, Reality::Complex);
        e.set(ModeIndex::new(1, 0), c(1.0, 0.0));
        let samples = to_physical(&e);
        assert!((samples[2 * 8] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn parseval_normalization() {
        let u = random_field(16, 11);
        let x = to_physical(&u);
        let mean_sq = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
        let n0 = sobolev_norm_sq(&u, 0.0);
        assert!((mean_sq - n0).abs() <= 1e-10 * n0);
    }

    #[test]
    fn zero_alpha_grf_is_zero() {
        let p = GrfParams::new(0.0, 0.5, 2.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = sample_grf(&p, Reality::Real, &mut rng);
        assert!(u.coeffs().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn real_grf_is_hermitian_and_real_in_space() {
        let p = GrfParams::new(1.0, 0.5, 1.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = sample_grf(&p, Reality::Real, &mut rng);
        assert!(u.hermitian_defect() < 1e-15);
        let x = to_physical(&u);
        assert!(x.iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn grf_is_deterministic_given_seed() {
        let p = GrfParams::new(1.0, 0.5, 1.0, 16).unwrap();
        let a = sample_grf(&p, Reality::Complex, &mut ChaCha8Rng::seed_from_u64(7));
        let b = sample_grf(&p, Reality::Complex, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn field_record_round_trip() {
        let u = random_field(8, 12);
        let mut buf = Vec::new();
        u.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 1 + 64 * 16);
        let v = SpectralField::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(u, v);
        buf[0] = b'X';
        assert!(SpectralField::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(SobolevSpec::new(2.0, 0.5, 4).is_err());
        assert!(SobolevSpec::new(2.0, 3.0, 4).is_err());
        assert!(SobolevSpec::new(2.0, 2.0, 4)
            .unwrap()
            .validate_for_grid(8)
            .is_ok());
        assert!(SobolevSpec::new(2.0, 2.0, 5)
            .unwrap()
            .validate_for_grid(8)
            .is_err());
    }
}
