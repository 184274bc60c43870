#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sobolev_conformal::spectral::{ModeIndex, Reality, SpectralField};

/// Complex field with coefficients decaying like `(1 + |n|²)^{-decay/2}`.
pub fn random_field(seed: u64, grid: usize, decay: f64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid, Reality::Complex);
    let h = (grid / 2) as i32;
    for n1 in -h..h {
        for n2 in -h..h {
            let n = ModeIndex::new(n1, n2);
            let amp = (1.0 + n.norm_sq()).powf(-decay / 2.0);
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            f.set(n, z * amp);
        }
    }
    f
}

/// Real zero-mean field with coefficients supported in `|n|_∞ <= band`.
pub fn random_real_band(seed: u64, grid: usize, band: i32) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid, Reality::Real);
    for n1 in -band..=band {
        for n2 in -band..=band {
            // one representative per conjugate pair
            if n1 < 0 || (n1 == 0 && n2 <= 0) {
                continue;
            }
            let n = ModeIndex::new(n1, n2);
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            f.set(n, z);
            f.set(-n, z.conj());
        }
    }
    f
}

/// Translation by `d`: `û_n ↦ û_n e^{-i n·d}`.
pub fn translate(u: &SpectralField, d: [f64; 2]) -> SpectralField {
    u.map_modes(|n, c| c * Complex64::from_polar(1.0, -(n.n1 as f64 * d[0] + n.n2 as f64 * d[1])))
}
