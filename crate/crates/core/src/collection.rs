//! Continuous maximal-coverage ("resource collection") over a field.
//!
//! `K` collectors at positions `w_i` gather `J[w, u] = ∫ u(x) k_w(x) dx` with
//! `k_w = Σ_i k(· − w_i)`. By Parseval, `J = (2π)² Re Σ_n û_n conj(k̂_{w,n})`
//! where `k̂_{w,n} = t(n) Σ_i e^{−i n·w_i}` and `t` is the template spectrum.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{MarginBound, QuantileTable};
use crate::error::{Error, Result};
use crate::pde::Sample;
use crate::robust::{
    inner_max, multi_stage_solve, AdversarialSet, DecisionSpace, InnerMaxOptions, RobustObjective,
    StageParams,
};
use crate::spectral::{sobolev_weight, ModeIndex, Reality, SobolevSpec, SpectralField};
use crate::stats::{paired_t_test, PairedTestResult};
use crate::surrogate::SpectralOperator;

const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// Periodized Gaussian with spectrum `e^{−σ²‖n‖²/2}`.
    GaussianBump { sigma: f64 },
    /// Indicator of a disc; evaluation only.
    Disc { radius: f64 },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::GaussianBump { sigma: 0.35 }
    }
}

impl Kernel {
    pub fn disc() -> Self {
        Kernel::Disc { radius: 0.5 }
    }

    /// Template spectrum `t(n)` of a kernel centered at the origin.
    pub fn template(&self, n: ModeIndex) -> f64 {
        match *self {
            Kernel::GaussianBump { sigma } => (-0.5 * sigma * sigma * n.norm_sq()).exp(),
            Kernel::Disc { radius } => disc_template(radius, n.norm_sq()),
        }
    }

    /// Kernel value at physical offset `y` from its center.
    pub fn physical(&self, y1: f64, y2: f64) -> f64 {
        match *self {
            Kernel::GaussianBump { sigma } => {
                let axis = |y: f64| -> f64 {
                    (-4..=4)
                        .map(|j| {
                            let d = y - TAU * j as f64;
                            (-d * d / (2.0 * sigma * sigma)).exp()
                        })
                        .sum()
                };
                TAU / (sigma * sigma) * axis(y1) * axis(y2)
            }
            Kernel::Disc { radius } => {
                let wrap = |y: f64| (y + PI).rem_euclid(TAU) - PI;
                let (a, b) = (wrap(y1), wrap(y2));
                if a * a + b * b <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Kernel::GaussianBump { sigma } => sigma > 0.0,
            Kernel::Disc { radius } => radius > 0.0 && radius < PI,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid kernel {self:?}")))
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

thread_local! {
    static DISC_CACHE: RefCell<HashMap<(u64, u64), f64>> = RefCell::new(HashMap::new());
}

/// `(2π)^{-2} ∫_{|x|<=r} e^{−i n·x} dx`, by polar quadrature.
fn disc_template(radius: f64, n_sq: f64) -> f64 {
    let key = (radius.to_bits(), n_sq.to_bits());
    if let Some(v) = DISC_CACHE.with(|c| c.borrow().get(&key).copied()) {
        return v;
    }
    let k = n_sq.sqrt();
    let nodes = gauss_legendre(48);
    let n_theta = 96;
    let mut acc = 0.0;
    for (x, wx) in nodes {
        let rho = 0.5 * radius * (x + 1.0);
        let mut ring = 0.0;
        for j in 0..n_theta {
            let theta = TAU * j as f64 / n_theta as f64;
            ring += (k * rho * theta.cos()).cos();
        }
        ring *= TAU / n_theta as f64;
        acc += 0.5 * radius * wx * rho * ring;
    }
    let v = acc / FOUR_PI_SQ;
    DISC_CACHE.with(|c| c.borrow_mut().insert(key, v));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectorConfig {
    pub k: usize,
    pub kernel: Kernel,
    pub starts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        Self {
            k: 4,
            kernel: Kernel::default(),
            starts: 8,
            max_iters: 300,
            grad_tol: 1e-9,
        }
    }
}

impl CollectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.starts == 0 {
            return Err(Error::InvalidParameter(
                "collector count and starts must be >= 1".into(),
            ));
        }
        self.kernel.validate()
    }
}

/// Collector positions on `[0, 2π)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub points: Vec<[f64; 2]>,
}

impl Placement {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        let mut p = Self { points };
        p.wrap();
        p
    }

    pub fn from_flat(w: &[f64]) -> Self {
        Self::new(w.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn wrap(&mut self) {
        for p in &mut self.points {
            p[0] = p[0].rem_euclid(TAU);
            p[1] = p[1].rem_euclid(TAU);
        }
    }

    pub fn shifted(&self, d: [f64; 2]) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|p| [p[0] + d[0], p[1] + d[1]])
                .collect(),
        )
    }

    /// Mean geodesic distance over collector pairs on the flat torus.
    pub fn mean_pairwise_distance(&self) -> f64 {
        let k = self.points.len();
        if k < 2 {
            return 0.0;
        }
        let wrap = |d: f64| {
            let d = d.rem_euclid(TAU);
            d.min(TAU - d)
        };
        let mut total = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                let a = wrap(self.points[i][0] - self.points[j][0]);
                let b = wrap(self.points[i][1] - self.points[j][1]);
                total += (a * a + b * b).sqrt();
            }
        }
        total / (k * (k - 1) / 2) as f64
    }
}

/// Nonzero modes of a field with the kernel template attached.
struct SparseField {
    modes: Vec<(f64, f64, Complex64)>,
}

impl SparseField {
    fn new(u: &SpectralField, kernel: &Kernel) -> Self {
        let modes = u
            .iter()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(n, z)| (n.n1 as f64, n.n2 as f64, z * kernel.template(n)))
            .collect();
        Self { modes }
    }

    /// `(2π)² Re Σ_n û_n t_n e^{i n·p}` for one collector.
    fn collector_value(&self, p: [f64; 2]) -> f64 {
        let s: f64 = self
            .modes
            .iter()
            .map(|&(n1, n2, z)| (z * Complex64::from_polar(1.0, n1 * p[0] + n2 * p[1])).re)
            .sum();
        FOUR_PI_SQ * s
    }

    fn collector_grad(&self, p: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &(n1, n2, z) in &self.modes {
            // Re(i·n_a·z·e^{iθ}) = −n_a·Im(z·e^{iθ})
            let im = (z * Complex64::from_polar(1.0, n1 * p[0] + n2 * p[1])).im;
            g[0] -= n1 * im;
            g[1] -= n2 * im;
        }
        [FOUR_PI_SQ * g[0], FOUR_PI_SQ * g[1]]
    }

    fn value(&self, w: &[f64]) -> f64 {
        w.chunks_exact(2)
            .map(|c| self.collector_value([c[0], c[1]]))
            .sum()
    }

    fn grad(&self, w: &[f64]) -> Vec<f64> {
        w.chunks_exact(2)
            .flat_map(|c| self.collector_grad([c[0], c[1]]))
            .collect()
    }

    /// Bound on the Hessian norm of each collector's value.
    fn curvature(&self) -> f64 {
        FOUR_PI_SQ
            * self
                .modes
                .iter()
                .map(|&(n1, n2, z)| z.norm() * (n1 * n1 + n2 * n2))
                .sum::<f64>()
    }
}

pub fn collection_value(w: &Placement, u: &SpectralField, cfg: &CollectorConfig) -> f64 {
    SparseField::new(u, &cfg.kernel).value(&w.to_flat())
}

/// `∂J/∂w` flattened as `[w_1x, w_1y, w_2x, …]`.
pub fn collection_grad_w(
    w: &Placement,
    u: &SpectralField,
    cfg: &CollectorConfig,
) -> Result<Vec<f64>> {
    if let Kernel::Disc { .. } = cfg.kernel {
        return Err(Error::NonDifferentiableKernel);
    }
    Ok(SparseField::new(u, &cfg.kernel).grad(&w.to_flat()))
}

/// Spectrum `k̂_{w,n}` of the placed kernel.
pub fn kernel_spectrum(w: &[f64], kernel: &Kernel, grid_size: usize) -> SpectralField {
    let mut k = SpectralField::zeros(grid_size, Reality::Real);
    for o in 0..grid_size * grid_size {
        let n = k.mode_at(o);
        let t = kernel.template(n);
        let phase: Complex64 = w
            .chunks_exact(2)
            .map(|c| Complex64::from_polar(1.0, -(n.n1 as f64 * c[0] + n.n2 as f64 * c[1])))
            .sum();
        k.coeffs_mut()[o] = phase * t;
    }
    k
}

/// Physical-grid quadrature of `∫ u k_w`.
pub fn collection_value_quadrature(w: &Placement, u: &SpectralField, kernel: &Kernel) -> f64 {
    let g = u.grid_size();
    let samples = crate::spectral::to_physical(u);
    let h = TAU / g as f64;
    let mut acc = 0.0;
    for j1 in 0..g {
        for j2 in 0..g {
            let x = [j1 as f64 * h, j2 as f64 * h];
            let k: f64 = w
                .points
                .iter()
                .map(|p| kernel.physical(x[0] - p[0], x[1] - p[1]))
                .sum();
            acc += samples[j1 * g + j2].re * k;
        }
    }
    acc * h * h
}

/// `i`-th point of the R2 low-discrepancy sequence on the torus.
pub fn lattice_point(i: usize) -> [f64; 2] {
    // Plastic-number increments.
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    let i = i as f64 + 1.0;
    [TAU * (0.5 + A1 * i).fract(), TAU * (0.5 + A2 * i).fract()]
}

/// Start placements: start `s` uses lattice points `s·K .. s·K + K`.
pub fn lattice_starts(k: usize, starts: usize) -> Vec<Placement> {
    (0..starts)
        .map(|s| Placement::new((0..k).map(|i| lattice_point(s * k + i)).collect()))
        .collect()
}

fn ascend(f: &SparseField, w0: &[f64], cfg: &CollectorConfig) -> (Vec<f64>, f64) {
    let mut w = w0.to_vec();
    let mut value = f.value(&w);
    let mut step = 1.0 / f.curvature().max(1e-300);
    for _ in 0..cfg.max_iters {
        let g = f.grad(&w);
        let gn2: f64 = g.iter().map(|x| x * x).sum();
        if gn2.sqrt() <= cfg.grad_tol {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            DecisionSpace::Torus.project(&mut cand);
            let cv = f.value(&cand);
            if cv >= value + 1e-4 * step * gn2 {
                w = cand;
                value = cv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 2.0;
    }
    (w, value)
}

/// Multi-start gradient ascent of `J[·, u]`.
pub fn nominal_solve_field(u: &SpectralField, cfg: &CollectorConfig) -> Result<Placement> {
    cfg.validate()?;
    if let Kernel::Disc { .. } = cfg.kernel {
        return Err(Error::NonDifferentiableKernel);
    }
    let f = SparseField::new(u, &cfg.kernel);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in lattice_starts(cfg.k, cfg.starts) {
        let (w, v) = ascend(&f, &start.to_flat(), cfg);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((w, v));
        }
    }
    Ok(Placement::from_flat(&best.expect("at least one start").0))
}

pub fn nominal_solve(
    model: &dyn SpectralOperator,
    a: &SpectralField,
    cfg: &CollectorConfig,
) -> Result<Placement> {
    nominal_solve_field(&model.apply(a), cfg)
}

/// Collection as a cost: `J_cost[w, v] = −J[w, v]`, with coefficients on a
/// grid of size `grid_size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionObjective {
    pub kernel: Kernel,
    pub grid_size: usize,
}

impl RobustObjective for CollectionObjective {
    fn eval(&self, w: &[f64], v: &SpectralField) -> f64 {
        -SparseField::new(v, &self.kernel).value(w)
    }

    fn subgrad_w(&self, w: &[f64], v: &SpectralField) -> Vec<f64> {
        SparseField::new(v, &self.kernel)
            .grad(w)
            .into_iter()
            .map(|g| -g)
            .collect()
    }

    fn grad_v(&self, w: &[f64], _v: &SpectralField) -> SpectralField {
        kernel_spectrum(w, &self.kernel, self.grid_size).scale(-FOUR_PI_SQ)
    }

    fn linear_coefficients(&self, w: &[f64]) -> Option<(f64, SpectralField)> {
        Some((
            0.0,
            kernel_spectrum(w, &self.kernel, self.grid_size).scale(-FOUR_PI_SQ),
        ))
    }
}

/// `‖c‖_{W^{-1}}` over `|n|_∞ <= trunc` with `W = (1 + ‖n‖²)^{order}`, for the
/// collection coefficients `c = (2π)² k̂_w`.
fn dual_norm(w: &[f64], kernel: &Kernel, trunc: usize, order: f64) -> f64 {
    let t = trunc as i32;
    let mut acc = 0.0;
    for n1 in -t..=t {
        for n2 in -t..=t {
            let n = ModeIndex::new(n1, n2);
            let phase: Complex64 = w
                .chunks_exact(2)
                .map(|c| Complex64::from_polar(1.0, -(n1 as f64 * c[0] + n2 as f64 * c[1])))
                .sum();
            acc += (phase * kernel.template(n)).norm_sqr() / sobolev_weight(n, order);
        }
    }
    FOUR_PI_SQ * acc.sqrt()
}

/// Worst-case collection over the score ellipsoid (cap ignored):
/// `J[w, center] − √q ‖c(w)‖_{W^{-1}}`.
pub fn robust_value_uncapped(
    w: &Placement,
    center: &SpectralField,
    q: f64,
    spec: &SobolevSpec,
    kernel: &Kernel,
) -> f64 {
    let flat = w.to_flat();
    let nominal = SparseField::new(
        &crate::spectral::truncate(center, spec.trunc).expect("trunc"),
        kernel,
    )
    .value(&flat);
    nominal - q.sqrt() * dual_norm(&flat, kernel, spec.trunc, spec.score_order())
}

/// Lipschitz constant of `v ↦ J[w, v]` in the `s−τ` norm, uniform in `w`:
/// `(2π)² K (Σ_n t(n)² / W_n)^{1/2}` over the full grid.
pub fn lipschitz_constant(cfg: &CollectorConfig, grid_size: usize, order: f64) -> f64 {
    let h = (grid_size / 2) as i32;
    let mut acc = 0.0;
    for n1 in -h..h {
        for n2 in -h..h {
            let n = ModeIndex::new(n1, n2);
            acc += cfg.kernel.template(n).powi(2) / sobolev_weight(n, order);
        }
    }
    FOUR_PI_SQ * cfg.k as f64 * acc.sqrt()
}

/// One stage of the robust schedule; `eta` defaults to a curvature bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustStage {
    pub trunc: usize,
    pub iters: usize,
    #[serde(default)]
    pub eta: Option<f64>,
}

/// Per-stage uncertainty: the quantile at that truncation and the cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRadius {
    pub q: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSolution {
    pub placement: Placement,
    /// Certified worst-case collection over the final-stage set.
    pub certificate: f64,
}

/// Step size `1/κ` from a bound `κ` on the curvature of `φ` at stage `N`:
/// the nominal curvature of the truncated center plus the curvature of the
/// dual-norm penalty.
fn stage_eta(
    center: &SpectralField,
    q: f64,
    stage: &RobustStage,
    spec: &SobolevSpec,
    cfg: &CollectorConfig,
) -> f64 {
    let trunc = crate::spectral::truncate(center, stage.trunc).expect("trunc");
    let kappa_nom = SparseField::new(&trunc, &cfg.kernel).curvature();
    let t = stage.trunc as i32;
    let mut m4 = 0.0;
    for n1 in -t..=t {
        for n2 in -t..=t {
            let n = ModeIndex::new(n1, n2);
            m4 += cfg.kernel.template(n).powi(2) * n.norm_sq().powi(2)
                / sobolev_weight(n, spec.score_order());
        }
    }
    let kappa_pen = FOUR_PI_SQ * q.sqrt() * (cfg.k as f64 * m4).sqrt();
    1.0 / (kappa_nom + kappa_pen).max(1e-300)
}

/// Multi-stage robust placement, multi-started from the nominal placement
/// and the lattice starts.
pub fn robust_solve_field(
    center: &SpectralField,
    radii: &[StageRadius],
    spec: &SobolevSpec,
    cfg: &CollectorConfig,
    schedule: &[RobustStage],
    opts: &InnerMaxOptions,
) -> Result<RobustSolution> {
    cfg.validate()?;
    if radii.len() != schedule.len() || schedule.is_empty() {
        return Err(Error::InvalidParameter(
            "one radius per robust stage is required".into(),
        ));
    }
    let n_max = schedule.iter().map(|s| s.trunc).max().unwrap_or(1);
    let g = center.grid_size().min(2 * n_max + 2);
    let small = center.resize(g);
    let sets = schedule
        .iter()
        .zip(radii)
        .map(|(st, r)| AdversarialSet::new(small.clone(), r.q, r.cap, spec.with_trunc(st.trunc)))
        .collect::<Result<Vec<_>>>()?;
    let params: Vec<StageParams> = schedule
        .iter()
        .zip(radii)
        .map(|(st, r)| StageParams {
            trunc: st.trunc,
            eta: st
                .eta
                .unwrap_or_else(|| stage_eta(&small, r.q, st, spec, cfg)),
            iters: st.iters,
        })
        .collect();

    let objective = CollectionObjective {
        kernel: cfg.kernel,
        grid_size: g,
    };
    let mut starts = vec![nominal_solve_field(&small, cfg)?];
    starts.extend(lattice_starts(cfg.k, cfg.starts));

    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let r = multi_stage_solve(
            &objective,
            &sets,
            &params,
            &s.to_flat(),
            &DecisionSpace::Torus,
            opts,
        )?;
        if best.as_ref().is_none_or(|(_, b)| r.phi < *b) {
            best = Some((r.w, r.phi));
        }
    }
    let (w, phi) = best.expect("at least one start");
    Ok(RobustSolution {
        placement: Placement::from_flat(&w),
        certificate: -phi,
    })
}

/// Worst-case collection `min_{v ∈ set} J[w, v]` (cap included).
pub fn robust_value(
    w: &Placement,
    set: &AdversarialSet,
    kernel: &Kernel,
    opts: &InnerMaxOptions,
) -> Result<f64> {
    let objective = CollectionObjective {
        kernel: *kernel,
        grid_size: set.center.grid_size(),
    };
    inner_max(&objective, &w.to_flat(), set, opts).map(|(_, phi)| -phi)
}

/// Raw quantile at each stage truncation, with cap `B(a)`.
pub fn stage_radii(
    table: &QuantileTable,
    margin: &MarginBound,
    a: &SpectralField,
    alpha: f64,
    schedule: &[RobustStage],
) -> Result<Vec<StageRadius>> {
    let cap = margin.eval(a)?;
    schedule
        .iter()
        .map(|st| {
            Ok(StageRadius {
                q: table.quantile(st.trunc, alpha)?,
                cap,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn robust_solve(
    model: &dyn SpectralOperator,
    a: &SpectralField,
    table: &QuantileTable,
    margin: &MarginBound,
    alpha: f64,
    cfg: &CollectorConfig,
    schedule: &[RobustStage],
    opts: &InnerMaxOptions,
) -> Result<RobustSolution> {
    let radii = stage_radii(table, margin, a, alpha, schedule)?;
    robust_solve_field(&model.apply(a), &radii, &table.spec, cfg, schedule, opts)
}

/// True-field collection of both designs on one test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub instance: usize,
    pub nominal: f64,
    pub robust: f64,
    pub difference: f64,
    pub certificate: f64,
    pub nominal_spread: f64,
    pub robust_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub rows: Vec<CompareRow>,
    /// Paired test of robust > nominal.
    pub test: PairedTestResult,
}

/// Evaluates nominal and robust placements on the true fields of `test`.
#[allow(clippy::too_many_arguments)]
pub fn compare_experiment(
    model: &dyn SpectralOperator,
    test: &[Sample],
    table: &QuantileTable,
    margin: &MarginBound,
    alpha: f64,
    cfg: &CollectorConfig,
    schedule: &[RobustStage],
    opts: &InnerMaxOptions,
) -> Result<CompareSummary> {
    if test.len() < 2 {
        return Err(Error::TooFewSamples(test.len()));
    }
    let rows = test
        .par_iter()
        .enumerate()
        .map(|(instance, s)| {
            let center = model.apply(&s.input);
            let nom = nominal_solve_field(&center, cfg)?;
            let radii = stage_radii(table, margin, &s.input, alpha, schedule)?;
            let rob = robust_solve_field(&center, &radii, &table.spec, cfg, schedule, opts)?;
            let nominal = collection_value(&nom, &s.target, cfg);
            let robust = collection_value(&rob.placement, &s.target, cfg);
            Ok(CompareRow {
                instance,
                nominal,
                robust,
                difference: robust - nominal,
                certificate: rob.certificate,
                nominal_spread: nom.mean_pairwise_distance(),
                robust_spread: rob.placement.mean_pairwise_distance(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let diffs: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    Ok(CompareSummary {
        test: paired_t_test(&diffs)?,
        rows,
    })
}

pub fn write_compare_rows<W: Write>(rows: &[CompareRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}
