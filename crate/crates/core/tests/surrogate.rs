mod common;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::random_real_band;
use sobolev_conformal::pde::{generate_samples, PdeKind};
use sobolev_conformal::spectral::{GrfParams, ModeIndex, Reality, SpectralField};
use sobolev_conformal::surrogate::{train, SurrogateConfig, SurrogateModel};

fn cfg(trunc: usize) -> SurrogateConfig {
    SurrogateConfig {
        trunc_in: trunc,
        trunc_out: trunc,
        hidden_channels: 4,
        hidden_layers: 1,
        learning_rate: 1e-3,
        epochs: 1,
        batch_size: 4,
        seed: 2,
    }
}

#[test]
fn forward_pass_is_translation_equivariant_in_the_interior() {
    let trunc = 8;
    let mut model = SurrogateModel::new(cfg(trunc), 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params: Vec<f64> = (0..model.num_params())
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    model.set_params(&params);

    let mut a = SpectralField::zeros(32, Reality::Complex);
    let mut shifted = a.clone();
    for n1 in -1..=1 {
        for n2 in -1..=1 {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            a.set(ModeIndex::new(n1, n2), z);
            shifted.set(ModeIndex::new(n1 + 1, n2), z);
        }
    }
    let out = model.predict(&a);
    let out_shifted = model.predict(&shifted);
    // three conv layers see at most three modes away; stay clear of the padding
    let interior = trunc as i32 - 4;
    for n1 in -interior..interior {
        for n2 in -interior..=interior {
            let d = out_shifted.get(ModeIndex::new(n1 + 1, n2)) - out.get(ModeIndex::new(n1, n2));
            assert!(d.norm() < 1e-12, "({n1}, {n2}): {d}");
        }
    }
}

#[test]
fn weight_change_scales_with_learning_rate() {
    let grf = GrfParams::new(1.0, 0.5, 1.0, 16).unwrap();
    let data = generate_samples(&PdeKind::Poisson, &grf, 3, 0..8).unwrap();
    let delta = |lr: f64| {
        let c = SurrogateConfig {
            learning_rate: lr,
            trunc_in: 4,
            trunc_out: 4,
            ..cfg(4)
        };
        let init = SurrogateModel::new(c, 16).unwrap();
        let trained = train(&data, &c).unwrap();
        init.params()
            .iter()
            .zip(trained.params())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let small = delta(1e-7);
    let large = delta(1e-6);
    assert!(small > 0.0);
    let ratio = large / small;
    assert!((5.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn real_targets_give_real_predictions() {
    let grf = GrfParams::new(1.0, 0.5, 1.0, 16).unwrap();
    let data = generate_samples(&PdeKind::Poisson, &grf, 9, 0..8).unwrap();
    let model = train(&data, &cfg(4)).unwrap();
    let pred = model.predict(&random_real_band(1, 16, 3));
    assert!(pred.hermitian_defect() < 1e-12);
}
