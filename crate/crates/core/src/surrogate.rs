//! Learned spectral operators.
//!
//! [`SurrogateModel`] is a stack of 3×3 convolutions over the centered
//! `(2N+1)×(2N+1)` grid of Fourier modes. Channel 0 carries real parts and
//! channel 1 imaginary parts. [`DiagonalModel`] is a per-mode least-squares
//! multiplier, and [`ExactOperator`] wraps a reference solver.

use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{PdeKind, Sample};
use crate::spectral::{ModeIndex, Reality, SpectralField};

/// Anything that maps an input field to a predicted output field.
pub trait SpectralOperator: Sync {
    fn apply(&self, a: &SpectralField) -> SpectralField;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub trunc_in: usize,
    pub trunc_out: usize,
    pub hidden_channels: usize,
    pub hidden_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            trunc_in: 16,
            trunc_out: 16,
            hidden_channels: 32,
            hidden_layers: 3,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self, grid_size: usize) -> Result<()> {
        if self.trunc_in == 0
            || self.trunc_out == 0
            || self.hidden_channels == 0
            || self.batch_size == 0
            || !(self.learning_rate > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "surrogate config fields must be positive: {self:?}"
            )));
        }
        let max = self.trunc_in.max(self.trunc_out);
        if max > grid_size / 2 {
            return Err(Error::InvalidTruncation {
                trunc: max,
                grid_size,
            });
        }
        Ok(())
    }

    /// Side length `D = 2·max(N_in, N_out) + 1` of the mode grid.
    pub fn mode_grid(&self) -> usize {
        2 * self.trunc_in.max(self.trunc_out) + 1
    }
}

/// Shape and location of one convolution in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// Offset of the `[out][in][ky][kx]` weight block.
    pub weight_offset: usize,
    /// Offset of the `[out]` bias block, directly after the weights.
    pub bias_offset: usize,
    pub relu: bool,
}

impl LayerSpec {
    fn end(&self) -> usize {
        self.bias_offset + self.out_channels
    }
}

fn layer_stack(cfg: &SurrogateConfig) -> Vec<LayerSpec> {
    let h = cfg.hidden_channels;
    let mut shapes = vec![("lift".to_string(), 2, h, true)];
    for i in 0..cfg.hidden_layers {
        shapes.push((format!("hidden{i}"), h, h, true));
    }
    shapes.push(("project".to_string(), h, 2, false));

    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(name, cin, cout, relu)| {
            let weight_offset = offset;
            let bias_offset = weight_offset + cout * cin * 9;
            offset = bias_offset + cout;
            LayerSpec {
                name,
                in_channels: cin,
                out_channels: cout,
                kernel: 3,
                weight_offset,
                bias_offset,
                relu,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub initial_loss: f64,
    /// Mean of the pre-update minibatch losses for each epoch.
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

/// Convolutional surrogate acting on the centered mode grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub config: SurrogateConfig,
    pub grid_size: usize,
    pub layers: Vec<LayerSpec>,
    pub params: Vec<f64>,
    /// Inputs are divided by this before the first layer.
    pub input_scale: f64,
    /// Network outputs are multiplied by this.
    pub output_scale: f64,
    pub output_reality: Reality,
    pub training: TrainingLog,
}

/// Padded geometry: planes of `P × P` with `P = D + 2`; the interior starts
/// at `(1, 1)`.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    d: usize,
    p: usize,
}

impl Geometry {
    fn new(d: usize) -> Self {
        Self { d, p: d + 2 }
    }

    fn plane(&self) -> usize {
        self.p * self.p
    }

    /// Flat span that covers every interior cell (and the padding columns
    /// between interior rows).
    fn span(&self) -> std::ops::Range<usize> {
        let start = self.p + 1;
        start..start + (self.d - 1) * self.p + self.d
    }

    fn tap_offset(&self, t: usize) -> isize {
        let dy = (t / 3) as isize - 1;
        let dx = (t % 3) as isize - 1;
        dy * self.p as isize + dx
    }

    fn clear_padding(&self, plane: &mut [f64]) {
        let p = self.p;
        for r in 0..p {
            if r == 0 || r == p - 1 {
                plane[r * p..(r + 1) * p].fill(0.0);
            } else {
                plane[r * p] = 0.0;
                plane[r * p + p - 1] = 0.0;
            }
        }
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let n = x.len() / 4 * 4;
    for (cx, cy) in x[..n].chunks_exact(4).zip(y[..n].chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += cx[k] * cy[k];
        }
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for k in n..x.len() {
        s += x[k] * y[k];
    }
    s
}

fn shifted(range: &std::ops::Range<usize>, off: isize) -> std::ops::Range<usize> {
    let s = (range.start as isize + off) as usize;
    s..s + range.len()
}

fn conv_forward(geo: Geometry, layer: &LayerSpec, params: &[f64], input: &[f64]) -> Vec<f64> {
    let plane = geo.plane();
    let span = geo.span();
    let w = &params[layer.weight_offset..layer.bias_offset];
    let b = &params[layer.bias_offset..layer.end()];
    let mut out = vec![0.0; layer.out_channels * plane];
    for o in 0..layer.out_channels {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst[span.clone()].fill(b[o]);
        for i in 0..layer.in_channels {
            let src = &input[i * plane..(i + 1) * plane];
            for t in 0..9 {
                let wt = w[(o * layer.in_channels + i) * 9 + t];
                axpy(
                    wt,
                    &src[shifted(&span, geo.tap_offset(t))],
                    &mut dst[span.clone()],
                );
            }
        }
        geo.clear_padding(dst);
    }
    out
}

/// Accumulates parameter gradients and returns the gradient with respect to
/// the layer input.
fn conv_backward(
    geo: Geometry,
    layer: &LayerSpec,
    params: &[f64],
    input: &[f64],
    d_out: &[f64],
    grad: &mut [f64],
    need_input_grad: bool,
) -> Vec<f64> {
    let plane = geo.plane();
    let span = geo.span();
    let w = &params[layer.weight_offset..layer.bias_offset];
    let mut d_in = if need_input_grad {
        vec![0.0; layer.in_channels * plane]
    } else {
        Vec::new()
    };
    for o in 0..layer.out_channels {
        let g = &d_out[o * plane..(o + 1) * plane];
        grad[layer.bias_offset + o] += g[span.clone()].iter().sum::<f64>();
        for i in 0..layer.in_channels {
            let src = &input[i * plane..(i + 1) * plane];
            for t in 0..9 {
                let idx = (o * layer.in_channels + i) * 9 + t;
                let r = shifted(&span, geo.tap_offset(t));
                grad[layer.weight_offset + idx] += dot(&g[span.clone()], &src[r.clone()]);
                if need_input_grad {
                    axpy(
                        w[idx],
                        &g[span.clone()],
                        &mut d_in[i * plane..(i + 1) * plane][r],
                    );
                }
            }
        }
    }
    d_in
}

/// Per-sample training example packed into padded planes.
#[derive(Debug, Clone)]
struct Packed {
    input: Vec<f64>,
    target: Vec<f64>,
}

impl SurrogateModel {
    /// Randomly initialized model: weights uniform in `±fan_in^{-1/2}`, zero
    /// biases.
    pub fn new(cfg: SurrogateConfig, grid_size: usize) -> Result<Self> {
        cfg.validate(grid_size)?;
        let layers = layer_stack(&cfg);
        let total = layers.last().map_or(0, LayerSpec::end);
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for l in &layers {
            let bound = 1.0 / ((l.in_channels * 9) as f64).sqrt();
            for w in &mut params[l.weight_offset..l.bias_offset] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            config: cfg,
            grid_size,
            layers,
            params,
            input_scale: 1.0,
            output_scale: 1.0,
            output_reality: Reality::Complex,
            training: TrainingLog::default(),
        })
    }

    fn geometry(&self) -> Geometry {
        Geometry::new(self.config.mode_grid())
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.params.len(), "parameter count mismatch");
        self.params.copy_from_slice(params);
    }

    /// Packs the modes `|n|_∞ <= trunc` of `u`, divided by `scale`.
    fn pack(&self, u: &SpectralField, trunc: usize, scale: f64) -> Vec<f64> {
        let geo = self.geometry();
        let half = (geo.d / 2) as i32;
        let plane = geo.plane();
        let mut out = vec![0.0; 2 * plane];
        let t = trunc as i32;
        for n1 in -t..=t {
            for n2 in -t..=t {
                let z = u.get(ModeIndex::new(n1, n2)) / scale;
                let k = (n1 + half + 1) as usize * geo.p + (n2 + half + 1) as usize;
                out[k] = z.re;
                out[plane + k] = z.im;
            }
        }
        out
    }

    fn unpack(&self, planes: &[f64]) -> SpectralField {
        let geo = self.geometry();
        let half = (geo.d / 2) as i32;
        let plane = geo.plane();
        let t = self.config.trunc_out as i32;
        let mut u = SpectralField::zeros(self.grid_size, self.output_reality);
        for n1 in -t..=t {
            for n2 in -t..=t {
                let k = (n1 + half + 1) as usize * geo.p + (n2 + half + 1) as usize;
                let z = Complex64::new(planes[k], planes[plane + k]) * self.output_scale;
                u.set(ModeIndex::new(n1, n2), z);
            }
        }
        if self.output_reality == Reality::Real {
            u.symmetrize_real()
        } else {
            u
        }
    }

    fn forward_all(&self, params: &[f64], input: &[f64]) -> Vec<Vec<f64>> {
        let geo = self.geometry();
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for l in &self.layers {
            let mut y = conv_forward(geo, l, params, acts.last().unwrap());
            if l.relu {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
        }
        acts
    }

    /// Squared error over the output band and its parameter gradient, for
    /// one packed sample. `weight` scales both.
    fn sample_loss_grad(
        &self,
        params: &[f64],
        s: &Packed,
        weight: f64,
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let geo = self.geometry();
        let acts = self.forward_all(params, &s.input);
        let out = acts.last().unwrap();
        let plane = geo.plane();
        let count = self.output_count() as f64;
        let mask = self.output_mask();
        let mut loss = 0.0;
        let mut d = vec![0.0; 2 * plane];
        for k in 0..plane {
            if !mask[k] {
                continue;
            }
            for ch in 0..2 {
                let e = out[ch * plane + k] - s.target[ch * plane + k];
                loss += e * e;
                d[ch * plane + k] = 2.0 * e * weight / count;
            }
        }
        if let Some(grad) = grad {
            let mut d_out = d;
            for (li, l) in self.layers.iter().enumerate().rev() {
                let input = &acts[li];
                let d_in = conv_backward(geo, l, params, input, &d_out, grad, li > 0);
                if li > 0 {
                    // acts[li] is the post-ReLU output of layer li - 1.
                    d_out = d_in
                        .into_iter()
                        .zip(input)
                        .map(|(g, a)| if *a > 0.0 { g } else { 0.0 })
                        .collect();
                }
            }
        }
        loss * weight / count
    }

    fn output_count(&self) -> usize {
        let m = 2 * self.config.trunc_out + 1;
        m * m
    }

    fn output_mask(&self) -> Vec<bool> {
        let geo = self.geometry();
        let half = (geo.d / 2) as i32;
        let t = self.config.trunc_out as i32;
        let mut mask = vec![false; geo.plane()];
        for n1 in -t..=t {
            for n2 in -t..=t {
                mask[(n1 + half + 1) as usize * geo.p + (n2 + half + 1) as usize] = true;
            }
        }
        mask
    }

    fn pack_sample(&self, s: &Sample) -> Packed {
        Packed {
            input: self.pack(&s.input, self.config.trunc_in, self.input_scale),
            target: self.pack(&s.target, self.config.trunc_out, self.output_scale),
        }
    }

    /// Mean loss over `batch` and its gradient, reduced in sample order.
    fn batch_loss_grad(&self, params: &[f64], batch: &[&Packed]) -> (f64, Vec<f64>) {
        let w = 1.0 / batch.len() as f64;
        let parts: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .map(|s| {
                let mut g = vec![0.0; params.len()];
                let l = self.sample_loss_grad(params, s, w, Some(&mut g));
                (l, g)
            })
            .collect();
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            axpy(1.0, &g, &mut grad);
        }
        (loss, grad)
    }

    /// Mean training loss (normalized units) on `samples` at `params`.
    pub fn loss_at(&self, params: &[f64], samples: &[Sample]) -> f64 {
        let packed: Vec<Packed> = samples.iter().map(|s| self.pack_sample(s)).collect();
        let w = 1.0 / packed.len() as f64;
        packed
            .par_iter()
            .map(|s| self.sample_loss_grad(params, s, w, None))
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    /// Loss and gradient on `samples` at `params`.
    pub fn loss_and_grad(&self, params: &[f64], samples: &[Sample]) -> (f64, Vec<f64>) {
        let packed: Vec<Packed> = samples.iter().map(|s| self.pack_sample(s)).collect();
        let refs: Vec<&Packed> = packed.iter().collect();
        self.batch_loss_grad(params, &refs)
    }

    /// Fits scalar input/output scales to the root-mean-square coefficient
    /// magnitude over the truncated band.
    fn fit_scales(&mut self, data: &[Sample]) {
        let rms = |fields: &mut dyn Iterator<Item = &SpectralField>, trunc: usize| {
            let mut acc = 0.0;
            let mut count = 0usize;
            for u in fields {
                for (n, z) in u.iter() {
                    if n.sup_norm() <= trunc {
                        acc += z.norm_sqr();
                        count += 1;
                    }
                }
            }
            let r = (acc / count.max(1) as f64).sqrt();
            if r > 0.0 && r.is_finite() {
                r
            } else {
                1.0
            }
        };
        self.input_scale = rms(&mut data.iter().map(|s| &s.input), self.config.trunc_in);
        self.output_scale = rms(&mut data.iter().map(|s| &s.target), self.config.trunc_out);
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn predict(&self, a: &SpectralField) -> SpectralField {
        assert_eq!(a.grid_size(), self.grid_size, "grid size mismatch");
        let input = self.pack(a, self.config.trunc_in, self.input_scale);
        let acts = self.forward_all(&self.params, &input);
        self.unpack(acts.last().unwrap())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let m: SurrogateModel = serde_json::from_reader(f)?;
        let expected = layer_stack(&m.config);
        if m.layers != expected || m.params.len() != expected.last().map_or(0, LayerSpec::end) {
            return Err(Error::Format(
                "checkpoint layer manifest does not match its config".into(),
            ));
        }
        Ok(m)
    }
}

impl SpectralOperator for SurrogateModel {
    fn apply(&self, a: &SpectralField) -> SpectralField {
        self.predict(a)
    }

    fn name(&self) -> &str {
        "surrogate"
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

fn check_dataset(data: &[Sample]) -> Result<usize> {
    let first = data.first().ok_or(Error::EmptyDataset)?;
    let g = first.input.grid_size();
    for s in data {
        s.input.check_same_grid(&first.input)?;
        s.target.check_same_grid(&first.input)?;
    }
    Ok(g)
}

/// Trains a fresh model with minibatch Adam on mean squared coefficient error.
pub fn train(data: &[Sample], cfg: &SurrogateConfig) -> Result<SurrogateModel> {
    let g = check_dataset(data)?;
    let mut model = SurrogateModel::new(*cfg, g)?;
    model.output_reality = if data.iter().all(|s| s.target.reality() == Reality::Real) {
        Reality::Real
    } else {
        Reality::Complex
    };
    model.fit_scales(data);

    let packed: Vec<Packed> = data.iter().map(|s| model.pack_sample(s)).collect();
    let all: Vec<&Packed> = packed.iter().collect();
    let full_loss = |m: &SurrogateModel| {
        let w = 1.0 / all.len() as f64;
        all.par_iter()
            .map(|s| m.sample_loss_grad(&m.params, s, w, None))
            .collect::<Vec<_>>()
            .into_iter()
            .sum::<f64>()
    };
    model.training.initial_loss = full_loss(&model);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e_ed0f_7a1e);
    let mut order: Vec<usize> = (0..packed.len()).collect();
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate);
    let mut params = model.params.clone();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Packed> = chunk.iter().map(|&i| &packed[i]).collect();
            let (loss, grad) = model.batch_loss_grad(&params, &batch);
            adam.step(&mut params, &grad);
            epoch_loss += loss;
            batches += 1;
        }
        model
            .training
            .epoch_losses
            .push(epoch_loss / batches as f64);
    }
    model.params = params;
    model.training.final_loss = full_loss(&model);
    Ok(model)
}

/// Per-mode complex multiplier `û_n ≈ m_n â_n` fit by least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalModel {
    trunc: usize,
    grid_size: usize,
    multipliers: SpectralField,
    output_reality: Reality,
}

impl DiagonalModel {
    pub fn fit(data: &[Sample], trunc: usize) -> Result<Self> {
        let g = check_dataset(data)?;
        if trunc > g / 2 {
            return Err(Error::InvalidTruncation {
                trunc,
                grid_size: g,
            });
        }
        let mut multipliers = SpectralField::zeros(g, Reality::Complex);
        for o in 0..g * g {
            let n = multipliers.mode_at(o);
            if n.sup_norm() > trunc {
                continue;
            }
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for s in data {
                let a = s.input.get(n);
                num += a.conj() * s.target.get(n);
                den += a.norm_sqr();
            }
            if den > 0.0 {
                multipliers.coeffs_mut()[o] = num / den;
            }
        }
        let output_reality = if data.iter().all(|s| s.target.reality() == Reality::Real) {
            Reality::Real
        } else {
            Reality::Complex
        };
        Ok(Self {
            trunc,
            grid_size: g,
            multipliers,
            output_reality,
        })
    }

    pub fn multiplier(&self, n: ModeIndex) -> Complex64 {
        self.multipliers.get(n)
    }
}

impl SpectralOperator for DiagonalModel {
    fn apply(&self, a: &SpectralField) -> SpectralField {
        assert_eq!(a.grid_size(), self.grid_size, "grid size mismatch");
        let mut out = a.map_modes(|n, z| {
            if n.sup_norm() <= self.trunc {
                z * self.multipliers.get(n)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        out.set_reality(self.output_reality);
        out
    }

    fn name(&self) -> &str {
        "diagonal"
    }
}

/// The reference solver truncated to `trunc`: a perfect surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOperator {
    pub pde: PdeKind,
    pub trunc: usize,
}

impl SpectralOperator for ExactOperator {
    fn apply(&self, a: &SpectralField) -> SpectralField {
        let u = self
            .pde
            .solve(a)
            .expect("exact operator input must be admissible");
        crate::spectral::truncate(&u, self.trunc).expect("truncation within grid")
    }

    fn name(&self) -> &str {
        "exact"
    }
}
