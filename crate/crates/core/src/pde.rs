//! Exact spectral reference solvers and dataset generation.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    from_physical, sample_grf, to_physical, GrfParams, ModeIndex, Reality, SpectralField,
};

const ZERO_MEAN_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-8;

/// Potential shapes used by the Schrödinger solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `0` inside `‖x̃‖ <= radius_frac·π`, `depth` outside.
    StepIndex {
        radius_frac: f64,
        depth: f64,
    },
    /// `-strength·‖x̃‖²`
    Grin {
        strength: f64,
    },
    Zero,
}

impl PotentialKind {
    pub fn step_index() -> Self {
        PotentialKind::StepIndex {
            radius_frac: 0.2,
            depth: 1.0,
        }
    }

    pub fn grin() -> Self {
        PotentialKind::Grin { strength: 0.1 }
    }

    /// Value at a centered coordinate `x̃ = x - π`.
    pub fn value_centered(&self, xt1: f64, xt2: f64) -> f64 {
        let r2 = xt1 * xt1 + xt2 * xt2;
        match *self {
            PotentialKind::StepIndex { radius_frac, depth } => {
                let a = radius_frac * PI;
                if r2 <= a * a {
                    0.0
                } else {
                    depth
                }
            }
            PotentialKind::Grin { strength } => -strength * r2,
            PotentialKind::Zero => 0.0,
        }
    }
}

/// A potential sampled on the physical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    grid_size: usize,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(kind: PotentialKind, grid_size: usize) -> Self {
        let h = 2.0 * PI / grid_size as f64;
        let mut values = Vec::with_capacity(grid_size * grid_size);
        for j1 in 0..grid_size {
            for j2 in 0..grid_size {
                values.push(kind.value_centered(j1 as f64 * h - PI, j2 as f64 * h - PI));
            }
        }
        Self {
            kind,
            grid_size,
            values,
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Grid values, row-major with `j1` as row.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// `max |V|` over the sampling grid.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn potential_sup_norm(v: &Potential) -> f64 {
    v.sup_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub total_time: f64,
    pub steps: usize,
    pub viscosity: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            total_time: 0.1,
            steps: 50,
            viscosity: 0.01,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_time >= 0.0) || self.steps == 0 || !(self.viscosity >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "evolution needs T >= 0, steps >= 1, viscosity >= 0 (got {:?})",
                self
            )));
        }
        Ok(())
    }
}

/// `Δu = f` on the torus for zero-mean `f`; the solution has zero mean.
pub fn solve_poisson(f: &SpectralField) -> Result<SpectralField> {
    let mean = f.get(ModeIndex::ZERO).norm();
    if mean > ZERO_MEAN_TOL {
        return Err(Error::NonZeroMean(mean));
    }
    Ok(f.map_modes(|n, c| {
        if n == ModeIndex::ZERO {
            Complex64::new(0.0, 0.0)
        } else {
            -c / n.norm_sq()
        }
    }))
}

/// Spectral Laplacian `-‖n‖² û_n`.
pub fn laplacian(u: &SpectralField) -> SpectralField {
    u.map_modes(|n, c| -c * n.norm_sq())
}

/// `∂_t u = ν Δu` up to time `T`.
pub fn solve_heat(u0: &SpectralField, p: &EvolutionParams) -> SpectralField {
    let k = p.viscosity * p.total_time;
    u0.map_modes(|n, c| c * (-k * n.norm_sq()).exp())
}

/// `i ∂_t ψ = (-Δ + V) ψ` by Strang splitting.
pub fn evolve_schrodinger(
    psi0: &SpectralField,
    v: &Potential,
    p: &EvolutionParams,
) -> Result<SpectralField> {
    let norm = psi0.l2_norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    if v.grid_size() != psi0.grid_size() {
        return Err(Error::GridMismatch {
            left: v.grid_size(),
            right: psi0.grid_size(),
        });
    }
    p.validate()?;
    let dt = p.total_time / p.steps as f64;
    if v.is_zero() {
        let t = p.total_time;
        return Ok(psi0.map_modes(|n, c| c * Complex64::from_polar(1.0, -n.norm_sq() * t)));
    }

    let g = psi0.grid_size();
    let half_kick: Vec<Complex64> = (0..g * g)
        .map(|o| Complex64::from_polar(1.0, -psi0.mode_at(o).norm_sq() * dt / 2.0))
        .collect();
    let potential_phase: Vec<Complex64> = v
        .values()
        .iter()
        .map(|vx| Complex64::from_polar(1.0, -vx * dt))
        .collect();

    let mut psi = psi0.clone();
    psi.set_reality(Reality::Complex);
    for _ in 0..p.steps {
        psi.coeffs_mut()
            .iter_mut()
            .zip(&half_kick)
            .for_each(|(c, k)| *c *= k);
        let mut x = to_physical(&psi);
        x.iter_mut()
            .zip(&potential_phase)
            .for_each(|(z, ph)| *z *= ph);
        psi = from_physical(&x, g, Reality::Complex)?;
        psi.coeffs_mut()
            .iter_mut()
            .zip(&half_kick)
            .for_each(|(c, k)| *c *= k);
    }
    Ok(psi)
}

/// Which forward problem a dataset samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pde", rename_all = "snake_case")]
pub enum PdeKind {
    Poisson,
    Heat {
        params: EvolutionParams,
    },
    Schrodinger {
        potential: PotentialKind,
        params: EvolutionParams,
    },
}

impl PdeKind {
    pub fn name(&self) -> &'static str {
        match self {
            PdeKind::Poisson => "poisson",
            PdeKind::Heat { .. } => "heat",
            PdeKind::Schrodinger { .. } => "schrodinger",
        }
    }

    pub fn input_reality(&self) -> Reality {
        match self {
            PdeKind::Schrodinger { .. } => Reality::Complex,
            _ => Reality::Real,
        }
    }

    /// Draws an admissible input: zero-mean for Poisson, unit-norm for
    /// Schrödinger.
    pub fn sample_input(&self, grf: &GrfParams, rng: &mut ChaCha8Rng) -> SpectralField {
        let mut a = sample_grf(grf, self.input_reality(), rng);
        match self {
            PdeKind::Poisson => a.set(ModeIndex::ZERO, Complex64::new(0.0, 0.0)),
            PdeKind::Schrodinger { .. } => {
                let norm = a.l2_norm();
                if norm > 0.0 {
                    a = a.scale(1.0 / norm);
                }
            }
            PdeKind::Heat { .. } => {}
        }
        a
    }

    /// Exact reference solution at full resolution.
    pub fn solve(&self, a: &SpectralField) -> Result<SpectralField> {
        match self {
            PdeKind::Poisson => solve_poisson(a),
            PdeKind::Heat { params } => Ok(solve_heat(a, params)),
            PdeKind::Schrodinger { potential, params } => {
                let v = Potential::new(*potential, a.grid_size());
                evolve_schrodinger(a, &v, params)
            }
        }
    }
}

/// One input/output pair at full resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: SpectralField,
    pub target: SpectralField,
}

/// Generates `count` samples with per-sample seeds `base_seed + index`.
pub fn generate_samples(
    pde: &PdeKind,
    grf: &GrfParams,
    base_seed: u64,
    range: std::ops::Range<usize>,
) -> Result<Vec<Sample>> {
    grf.validate()?;
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(i as u64));
            let input = pde.sample_input(grf, &mut rng);
            let target = pde.solve(&input)?;
            Ok(Sample { input, target })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub pde: PdeKind,
    pub grf: GrfParams,
    pub grid_size: usize,
    pub count: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

const DATASET_MAGIC: &[u8] = b"SCDS1\n";

impl Dataset {
    pub fn generate(pde: PdeKind, grf: GrfParams, count: usize, base_seed: u64) -> Result<Self> {
        let samples = generate_samples(&pde, &grf, base_seed, 0..count)?;
        Ok(Self {
            header: DatasetHeader {
                pde,
                grf,
                grid_size: grf.grid_size,
                count,
                base_seed,
            },
            samples,
        })
    }

    /// File layout: `SCDS1\n`, one JSON header line, then `count` pairs of
    /// field records (input, target).
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        serde_json::to_writer(&mut *w, &self.header)?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            s.input.write_to(w)?;
            s.target.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if magic != DATASET_MAGIC {
            return Err(Error::Format("bad dataset magic".into()));
        }
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: DatasetHeader = serde_json::from_str(line.trim_end())?;
        let mut samples = Vec::with_capacity(header.count);
        for _ in 0..header.count {
            let input = SpectralField::read_from(&mut r)?;
            let target = SpectralField::read_from(&mut r)?;
            samples.push(Sample { input, target });
        }
        Ok(Self { header, samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::sobolev_norm_sq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn poisson_single_mode() {
        let mut f = SpectralField::zeros(16, Reality::Real);
        f.set(ModeIndex::new(1, 0), c(1.0, 0.0));
        f.set(ModeIndex::new(-1, 0), c(1.0, 0.0));
        let u = solve_poisson(&f).unwrap();
        assert_eq!(u.get(ModeIndex::new(1, 0)), c(-1.0, 0.0));
        assert_eq!(u.get(ModeIndex::new(-1, 0)), c(-1.0, 0.0));
    }

    #[test]
    fn poisson_rejects_mean() {
        let mut f = SpectralField::zeros(8, Reality::Real);
        f.set(ModeIndex::ZERO, c(1e-3, 0.0));
        assert!(matches!(solve_poisson(&f), Err(Error::NonZeroMean(_))));
    }

    #[test]
    fn heat_single_mode_and_identity() {
        let mut u = SpectralField::zeros(16, Reality::Real);
        u.set(ModeIndex::new(2, 0), c(1.0, 0.0));
        let p = EvolutionParams::default();
        let out = solve_heat(&u, &p);
        let expected = (-0.004f64).exp();
        assert!((out.get(ModeIndex::new(2, 0)).re - expected).abs() < 1e-15);
        let id = solve_heat(
            &u,
            &EvolutionParams {
                total_time: 0.0,
                ..p
            },
        );
        assert_eq!(id, u);
    }

    #[test]
    fn free_schrodinger_phase() {
        let mut psi = SpectralField::zeros(16, Reality::Complex);
        psi.set(ModeIndex::new(2, 1), c(1.0, 0.0));
        let v = Potential::new(PotentialKind::Zero, 16);
        let out = evolve_schrodinger(&psi, &v, &EvolutionParams::default()).unwrap();
        let expected = Complex64::from_polar(1.0, -5.0 * 0.1);
        assert!((out.get(ModeIndex::new(2, 1)) - expected).norm() < 1e-14);
    }

    #[test]
    fn sup_norms() {
        let step = Potential::new(PotentialKind::step_index(), 64);
        assert_eq!(step.sup_norm(), 1.0);
        assert_eq!(Potential::new(PotentialKind::Zero, 64).sup_norm(), 0.0);
        let grin = Potential::new(PotentialKind::grin(), 64);
        assert!((grin.sup_norm() - 0.1 * 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn step_index_core_is_centered() {
        let v = Potential::new(PotentialKind::step_index(), 64);
        assert_eq!(v.values()[32 * 64 + 32], 0.0);
        assert_eq!(v.values()[0], 1.0);
    }

    #[test]
    fn dataset_round_trip() {
        let grf = GrfParams::new(1.0, 0.5, 1.5, 16).unwrap();
        let ds = Dataset::generate(PdeKind::Poisson, grf, 3, 11).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let back = Dataset::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn samples_depend_only_on_index() {
        let grf = GrfParams::new(1.0, 0.5, 1.5, 16).unwrap();
        let all = generate_samples(&PdeKind::Poisson, &grf, 5, 0..4).unwrap();
        let tail = generate_samples(&PdeKind::Poisson, &grf, 5, 2..4).unwrap();
        assert_eq!(all[2..], tail[..]);
        let u = &all[0];
        assert!(sobolev_norm_sq(&u.target, 2.0) <= 4.0 * sobolev_norm_sq(&u.input, 0.0));
    }
}
