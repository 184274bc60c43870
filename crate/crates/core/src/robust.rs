//! Finite-dimensional adversaries and the multi-stage min-max solver.
//!
//! Objectives follow the cost convention: the decision `w` minimizes
//! `φ(w) = max_{v ∈ 𝒱} J[w, v]` and the adversary maximizes over
//! band-limited fields `v` near the surrogate prediction.

use std::f64::consts::TAU;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{sobolev_norm_sq, sobolev_weight, SobolevSpec, SpectralField};

/// `𝒱 = {v : Π_N v = v, ‖center − v‖²_{s−τ} <= q, ‖v‖²_s <= cap}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialSet {
    pub center: SpectralField,
    pub q_radius: f64,
    pub sobolev_cap: f64,
    pub spec: SobolevSpec,
}

impl AdversarialSet {
    pub fn new(
        center: SpectralField,
        q_radius: f64,
        sobolev_cap: f64,
        spec: SobolevSpec,
    ) -> Result<Self> {
        spec.validate_for_grid(center.grid_size())?;
        if !(q_radius >= 0.0) || !(sobolev_cap >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "adversarial set needs q >= 0 and cap >= 0 (got {q_radius}, {sobolev_cap})"
            )));
        }
        let center = crate::spectral::truncate(&center, spec.trunc)?;
        Ok(Self {
            center,
            q_radius,
            sobolev_cap,
            spec,
        })
    }

    /// The same set viewed at a coarser or finer truncation.
    pub fn with_trunc(&self, trunc: usize, full_center: &SpectralField) -> Result<Self> {
        Self::new(
            full_center.clone(),
            self.q_radius,
            self.sobolev_cap,
            self.spec.with_trunc(trunc),
        )
    }

    pub fn score_distance(&self, v: &SpectralField) -> f64 {
        sobolev_norm_sq(&self.center.sub(v), self.spec.score_order())
    }

    /// Membership with relative slack `rel_tol` on both ellipsoids.
    pub fn contains(&self, v: &SpectralField, rel_tol: f64) -> bool {
        let band = crate::spectral::is_band_limited(v, self.spec.trunc, 1e-12);
        let d = self.score_distance(v);
        let cap = sobolev_norm_sq(v, self.spec.s);
        band && d <= self.q_radius * (1.0 + rel_tol) + rel_tol * 1e-12
            && cap <= self.sobolev_cap * (1.0 + rel_tol) + rel_tol * 1e-12
    }
}

/// A cost `J[w, v]` over decisions `w ∈ ℝ^d` and fields `v`.
pub trait RobustObjective: Sync {
    fn eval(&self, w: &[f64], v: &SpectralField) -> f64;

    fn subgrad_w(&self, w: &[f64], v: &SpectralField) -> Vec<f64>;

    /// `∂J/∂Re v_n + i ∂J/∂Im v_n` for every mode.
    fn grad_v(&self, w: &[f64], v: &SpectralField) -> SpectralField;

    /// `(J₀(w), c(w))` when `J[w, v] = J₀(w) + Re Σ conj(c_n) v_n`.
    fn linear_coefficients(&self, _w: &[f64]) -> Option<(f64, SpectralField)> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerMaxOptions {
    pub max_steps: usize,
    pub tol: f64,
    pub projection_iters: usize,
    pub projection_tol: f64,
}

impl Default for InnerMaxOptions {
    fn default() -> Self {
        Self {
            max_steps: 200,
            tol: 1e-9,
            projection_iters: 200,
            projection_tol: 1e-10,
        }
    }
}

/// Euclidean projection onto the truncated score ellipsoid intersected with
/// the Sobolev cap. Both constraints are diagonal in the Fourier basis, so the
/// projection is `x = (y + λ₁W₁c) / (1 + λ₁W₁ + λ₂W₂)` and only the two
/// multipliers are searched for.
pub fn project_onto_set(
    y: &SpectralField,
    set: &AdversarialSet,
    opts: &InnerMaxOptions,
) -> Result<SpectralField> {
    let order = set.spec.score_order();
    let trunc = set.spec.trunc;
    let band: Vec<(usize, f64, f64)> = set
        .center
        .iter()
        .enumerate()
        .filter(|(_, (n, _))| n.sup_norm() <= trunc)
        .map(|(i, (n, _))| (i, sobolev_weight(n, order), sobolev_weight(n, set.spec.s)))
        .collect();
    let c = set.center.coeffs();
    let yc = y.coeffs();
    let q = set.q_radius;
    let cap = set.sobolev_cap;
    let d1 = |l1: f64, l2: f64| -> f64 {
        band.iter()
            .map(|&(i, a, b)| {
                let den = 1.0 + l1 * a + l2 * b;
                a * (yc[i] - c[i] * (1.0 + l2 * b)).norm_sqr() / (den * den)
            })
            .sum()
    };
    let d2 = |l1: f64, l2: f64| -> f64 {
        band.iter()
            .map(|&(i, a, b)| {
                let den = 1.0 + l1 * a + l2 * b;
                b * (yc[i] + c[i] * (l1 * a)).norm_sqr() / (den * den)
            })
            .sum()
    };
    // Smallest multiplier at which the decreasing `excess` reaches zero,
    // bracketed by doubling and refined by the Illinois method.
    let root = |excess: &dyn Fn(f64) -> f64, scale: f64| -> Option<f64> {
        let mut f_lo = excess(0.0);
        if f_lo <= 0.0 {
            return Some(0.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut f_hi = excess(hi);
        while f_hi > 0.0 {
            (lo, f_lo) = (hi, f_hi);
            hi *= 2.0;
            if hi > 1e300 {
                return None;
            }
            f_hi = excess(hi);
        }
        let mut side = 0i8;
        let mut gap = -f_hi;
        for _ in 0..opts.projection_iters {
            if hi - lo <= 1e-14 * hi || gap <= 1e-13 * scale {
                break;
            }
            let mut x = if f_lo.is_finite() {
                (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            } else {
                0.5 * (lo + hi)
            };
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            let fx = excess(x);
            if fx > 0.0 {
                (lo, f_lo) = (x, fx);
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                (hi, f_hi, gap) = (x, fx, -fx);
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            }
        }
        Some(hi)
    };
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; c.len()];
    let residual = if q <= 0.0 {
        for &(i, _, _) in &band {
            x[i] = c[i];
        }
        let d: f64 = band.iter().map(|&(i, _, b)| b * c[i].norm_sqr()).sum();
        (d - cap).max(0.0) / cap.max(1e-300)
    } else {
        // For fixed λ₂, d₁ has the trust-region secular form, so Newton on
        // d₁^{-1/2} increases monotonically to the root.
        let l1_for = |l2: f64| -> Option<f64> {
            let target = q.sqrt().recip();
            let mut l1 = 0.0;
            for _ in 0..opts.projection_iters {
                let (mut f, mut df) = (0.0, 0.0);
                for &(i, a, b) in &band {
                    let den = 1.0 + l1 * a + l2 * b;
                    let e = a * (yc[i] - c[i] * (1.0 + l2 * b)).norm_sqr() / (den * den);
                    f += e;
                    df -= 2.0 * a * e / den;
                }
                if f <= q * (1.0 + 1e-13) {
                    return Some(l1);
                }
                let phi = f.sqrt().recip();
                let dphi = -0.5 * df * phi / f;
                let step = (target - phi) / dphi;
                if !step.is_finite() {
                    return None;
                }
                l1 += step;
                if step <= 1e-15 * l1 {
                    break;
                }
            }
            Some(l1)
        };
        let outer = |l2: f64| match l1_for(l2) {
            Some(l1) => d2(l1, l2) - cap,
            None => f64::INFINITY,
        };
        match root(&outer, cap).and_then(|l2| l1_for(l2).map(|l1| (l1, l2))) {
            Some((l1, l2)) => {
                for &(i, a, b) in &band {
                    x[i] = (yc[i] + c[i] * (l1 * a)) / (1.0 + l1 * a + l2 * b);
                }
                let v1 = (d1(l1, l2) - q).max(0.0) / q;
                let v2 = (d2(l1, l2) - cap).max(0.0) / cap.max(1e-300);
                v1.max(v2)
            }
            None => f64::INFINITY,
        }
    };
    if residual <= opts.projection_tol {
        return to_field(y, x);
    }
    Err(Error::ProjectionNonConvergence {
        iterations: opts.projection_iters,
        residual,
    })
}

fn to_field(like: &SpectralField, coeffs: Vec<Complex64>) -> Result<SpectralField> {
    SpectralField::from_coeffs(like.grid_size(), coeffs, like.reality())
}

/// Closed-form maximizer of a linear functional over the score ellipsoid,
/// ignoring the cap: `center + √q W^{-1}c / ‖c‖_{W^{-1}}`.
pub fn linear_ellipsoid_max(c: &SpectralField, set: &AdversarialSet) -> SpectralField {
    let order = set.spec.score_order();
    let trunc = set.spec.trunc;
    let dual_sq: f64 = c
        .iter()
        .filter(|(n, _)| n.sup_norm() <= trunc)
        .map(|(n, z)| z.norm_sqr() / sobolev_weight(n, order))
        .sum();
    if dual_sq <= 0.0 || set.q_radius == 0.0 {
        return set.center.clone();
    }
    let scale = set.q_radius.sqrt() / dual_sq.sqrt();
    let mut v = set.center.clone();
    for (o, (n, z)) in c.iter().enumerate() {
        if n.sup_norm() <= trunc {
            v.coeffs_mut()[o] += z * (scale / sobolev_weight(n, order));
        }
    }
    v
}

/// `max_{v ∈ set} J[w, v]`, returning the maximizer and its value.
pub fn inner_max(
    j: &dyn RobustObjective,
    w: &[f64],
    set: &AdversarialSet,
    opts: &InnerMaxOptions,
) -> Result<(SpectralField, f64)> {
    if let Some((_, c)) = j.linear_coefficients(w) {
        let v = linear_ellipsoid_max(&c, set);
        if sobolev_norm_sq(&v, set.spec.s) <= set.sobolev_cap * (1.0 + 1e-12) {
            let value = j.eval(w, &v);
            return Ok((v, value));
        }
    }
    projected_ascent(j, w, set, opts)
}

/// Projected gradient ascent in the score metric, started at the projection
/// of the center.
fn projected_ascent(
    j: &dyn RobustObjective,
    w: &[f64],
    set: &AdversarialSet,
    opts: &InnerMaxOptions,
) -> Result<(SpectralField, f64)> {
    let order = set.spec.score_order();
    let trunc = set.spec.trunc;
    let mut v = project_onto_set(&set.center, set, opts)?;
    let mut value = j.eval(w, &v);
    let mut radius = set.q_radius.sqrt().max(1e-12);
    for _ in 0..opts.max_steps {
        let g = j.grad_v(w, &v);
        let mut d = g.map_modes(|n, z| {
            if n.sup_norm() <= trunc {
                z / sobolev_weight(n, order)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let dn = sobolev_norm_sq(&d, order).sqrt();
        if dn == 0.0 {
            break;
        }
        d = d.scale(radius / dn);
        let candidate = project_onto_set(&v.add(&d), set, opts)?;
        let cand_value = j.eval(w, &candidate);
        if cand_value > value {
            let gain = cand_value - value;
            v = candidate;
            value = cand_value;
            if gain < opts.tol {
                break;
            }
        } else {
            radius *= 0.5;
            if radius < 1e-12 * set.q_radius.sqrt().max(1e-300) {
                break;
            }
        }
    }
    Ok((v, value))
}

/// Feasible region for the decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionSpace {
    /// Every coordinate wraps into `[0, 2π)`.
    Torus,
    Box {
        lo: f64,
        hi: f64,
    },
    Unconstrained,
}

impl DecisionSpace {
    pub fn project(&self, w: &mut [f64]) {
        match *self {
            DecisionSpace::Torus => w.iter_mut().for_each(|x| *x = x.rem_euclid(TAU)),
            DecisionSpace::Box { lo, hi } => w.iter_mut().for_each(|x| *x = x.clamp(lo, hi)),
            DecisionSpace::Unconstrained => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    pub trunc: usize,
    pub eta: f64,
    pub iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: usize,
    pub iter: usize,
    pub phi: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub w: Vec<f64>,
    pub phi: f64,
    pub phis: Vec<f64>,
}

/// `iters` projected subgradient steps on `φ`; returns the best iterate.
pub fn solve_stage(
    j: &dyn RobustObjective,
    set: &AdversarialSet,
    w_init: &[f64],
    eta: f64,
    iters: usize,
    space: &DecisionSpace,
    opts: &InnerMaxOptions,
) -> Result<StageResult> {
    let mut w = w_init.to_vec();
    space.project(&mut w);
    let mut best_w = w.clone();
    let mut best = f64::INFINITY;
    let mut phis = Vec::with_capacity(iters + 1);
    for k in 0..=iters {
        let (v, phi) = inner_max(j, &w, set, opts)?;
        phis.push(phi);
        if phi < best {
            best = phi;
            best_w.clone_from(&w);
        }
        if k == iters || eta == 0.0 {
            break;
        }
        let g = j.subgrad_w(&w, &v);
        w.iter_mut().zip(&g).for_each(|(x, gi)| *x -= eta * gi);
        space.project(&mut w);
    }
    Ok(StageResult {
        w: best_w,
        phi: best,
        phis,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStageResult {
    pub w: Vec<f64>,
    pub phi: f64,
    /// Best `φ_t` reached in each stage.
    pub stage_phis: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

pub fn check_nesting(schedule: &[StageParams]) -> Result<()> {
    for t in 1..schedule.len() {
        if schedule[t].trunc < schedule[t - 1].trunc {
            return Err(Error::NestingViolation {
                stage: t,
                previous: schedule[t - 1].trunc,
                current: schedule[t].trunc,
            });
        }
    }
    Ok(())
}

/// Warm-started stage sequence over nested adversarial sets.
pub fn multi_stage_solve(
    j: &dyn RobustObjective,
    sets: &[AdversarialSet],
    schedule: &[StageParams],
    w0: &[f64],
    space: &DecisionSpace,
    opts: &InnerMaxOptions,
) -> Result<MultiStageResult> {
    if sets.len() != schedule.len() || schedule.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} adversarial sets for {} stages",
            sets.len(),
            schedule.len()
        )));
    }
    check_nesting(schedule)?;
    let start = Instant::now();
    let mut w = w0.to_vec();
    let mut trace = Vec::new();
    let mut stage_phis = Vec::with_capacity(schedule.len());
    let mut phi = f64::INFINITY;
    for (t, (set, st)) in sets.iter().zip(schedule).enumerate() {
        if set.spec.trunc != st.trunc {
            return Err(Error::InvalidParameter(format!(
                "stage {t} schedules N = {} but its set has N = {}",
                st.trunc, set.spec.trunc
            )));
        }
        let r = solve_stage(j, set, &w, st.eta, st.iters, space, opts)?;
        let elapsed = start.elapsed().as_secs_f64();
        trace.extend(r.phis.iter().enumerate().map(|(iter, &phi)| TraceRow {
            stage: t,
            iter,
            phi,
            wall_time: elapsed,
        }));
        stage_phis.push(r.phi);
        w = r.w;
        phi = r.phi;
    }
    Ok(MultiStageResult {
        w,
        phi,
        stage_phis,
        trace,
    })
}

pub fn write_trace<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Suboptimality {
    /// `max_v J[w_robust, v] − J[w_oracle, u_true]`
    pub delta: f64,
    /// `L √(4q + B N^{-2τ})` when a Lipschitz constant is supplied.
    pub bound: Option<f64>,
}

pub fn suboptimality_eval(
    j: &dyn RobustObjective,
    set: &AdversarialSet,
    w_robust: &[f64],
    u_true: &SpectralField,
    w_oracle: &[f64],
    lipschitz: Option<f64>,
    opts: &InnerMaxOptions,
) -> Result<Suboptimality> {
    let (_, robust) = inner_max(j, w_robust, set, opts)?;
    let delta = robust - j.eval(w_oracle, u_true);
    let n = set.spec.trunc as f64;
    let bound = lipschitz
        .map(|l| l * (4.0 * set.q_radius + set.sobolev_cap * n.powf(-2.0 * set.spec.tau)).sqrt());
    Ok(Suboptimality { delta, bound })
}
