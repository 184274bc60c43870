//! Configuration, seeding and end-to-end experiment drivers.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collection::{
    compare_experiment, write_compare_rows, CollectorConfig, Kernel, RobustStage,
};
use crate::conformal::{
    calibrate, calibration_curve, default_alpha_grid, quantile_rank, write_curve, MarginBound,
    QuantileTable,
};
use crate::error::{Error, Result};
use crate::pde::{generate_samples, Dataset, EvolutionParams, PdeKind, PotentialKind, Sample};
use crate::quantum::{
    discrimination_experiment, write_discrimination_rows, DiscriminationConfig, PhaseOptions,
    RadiusMode,
};
use crate::robust::InnerMaxOptions;
use crate::spectral::{truncate, GrfParams, SobolevSpec};
use crate::surrogate::{train, SurrogateConfig, SurrogateModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeName {
    Poisson,
    Heat,
    Schrodinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub kind: PdeName,
    #[serde(default = "PotentialKind::step_index")]
    pub potential: PotentialKind,
}

impl Default for PdeSection {
    fn default() -> Self {
        PdeSection {
            kind: PdeName::Poisson,
            potential: PotentialKind::step_index(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrfSection {
    /// Amplitude, also accepted as `tau` (the GRF "correlation").
    #[serde(alias = "tau")]
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub grid_size: usize,
}

impl Default for GrfSection {
    fn default() -> Self {
        GrfSection {
            alpha: 1.0,
            beta: 0.5,
            rho: 1.5,
            grid_size: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatSection {
    pub viscosity: f64,
}

impl Default for HeatSection {
    fn default() -> Self {
        HeatSection { viscosity: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub total_time: f64,
    pub steps: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let p = EvolutionParams::default();
        EvolutionSection {
            total_time: p.total_time,
            steps: p.steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub train: usize,
    pub calib: usize,
    pub test: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            train: 300,
            calib: 150,
            test: 150,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSection {
    pub hidden_channels: usize,
    pub hidden_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let c = SurrogateConfig::default();
        SurrogateSection {
            hidden_channels: c.hidden_channels,
            hidden_layers: c.hidden_layers,
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            batch_size: c.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    /// Level used by the design experiments.
    pub alpha: f64,
    /// Levels reported in the calibration curve.
    pub alphas: Vec<f64>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            alpha: 0.1,
            alphas: default_alpha_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectionSection {
    pub k: usize,
    pub kernel: Kernel,
    pub starts: usize,
    pub n_test: usize,
    /// Empty means three stages at `N/3`, `2N/3` and `N`.
    pub stages: Vec<RobustStage>,
}

impl Default for CollectionSection {
    fn default() -> Self {
        let c = CollectorConfig::default();
        CollectionSection {
            k: c.k,
            kernel: c.kernel,
            starts: c.starts,
            n_test: 200,
            stages: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumSection {
    pub m: usize,
    pub n_test: usize,
    pub radius_mode: RadiusMode,
    pub starts: usize,
}

impl Default for QuantumSection {
    fn default() -> Self {
        QuantumSection {
            m: 3,
            n_test: 30,
            radius_mode: RadiusMode::Empirical,
            starts: PhaseOptions::default().starts,
        }
    }
}

/// Everything a run needs. Loaded from TOML and checked against the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub pde: PdeSection,
    #[serde(default)]
    pub grf: GrfSection,
    #[serde(default)]
    pub heat: HeatSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub sobolev: SobolevSpec,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub surrogate: SurrogateSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub collection: CollectionSection,
    #[serde(default)]
    pub quantum: QuantumSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: default_out_dir(),
            pde: PdeSection::default(),
            grf: GrfSection::default(),
            heat: HeatSection::default(),
            evolution: EvolutionSection::default(),
            sobolev: SobolevSpec::default(),
            data: DataSection::default(),
            surrogate: SurrogateSection::default(),
            calibration: CalibrationSection::default(),
            collection: CollectionSection::default(),
            quantum: QuantumSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering, excluding the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        Ok(hex(&Sha256::digest(c.to_toml()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.train == 0 || d.calib == 0 || d.test == 0 {
            return Err(Error::Config("dataset sizes must be >= 1".into()));
        }
        self.grf_params()?;
        self.sobolev.validate_for_grid(self.grf.grid_size)?;
        match self.pde_kind() {
            PdeKind::Poisson => {}
            PdeKind::Heat { params } | PdeKind::Schrodinger { params, .. } => params.validate()?,
        }
        self.surrogate_config().validate(self.grf.grid_size)?;
        for &a in &self.calibration.alphas {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("alpha {a} outside (0, 1)")));
            }
        }
        if !(self.calibration.alpha > 0.0 && self.calibration.alpha < 1.0) {
            return Err(Error::Config("calibration.alpha outside (0, 1)".into()));
        }
        self.collector_config().validate()?;
        for st in self.robust_stages() {
            if st.trunc == 0 || st.trunc > self.sobolev.trunc {
                return Err(Error::Config(format!(
                    "robust stage truncation {} outside 1..={}",
                    st.trunc, self.sobolev.trunc
                )));
            }
        }
        if self.quantum.m == 0 {
            return Err(Error::Config("quantum.m must be >= 1".into()));
        }
        Ok(())
    }

    pub fn grf_params(&self) -> Result<GrfParams> {
        GrfParams::new(
            self.grf.alpha,
            self.grf.beta,
            self.grf.rho,
            self.grf.grid_size,
        )
    }

    pub fn pde_kind(&self) -> PdeKind {
        let evo = EvolutionParams {
            total_time: self.evolution.total_time,
            steps: self.evolution.steps,
            viscosity: self.heat.viscosity,
        };
        match self.pde.kind {
            PdeName::Poisson => PdeKind::Poisson,
            PdeName::Heat => PdeKind::Heat { params: evo },
            PdeName::Schrodinger => PdeKind::Schrodinger {
                potential: self.pde.potential,
                params: evo,
            },
        }
    }

    pub fn margin(&self) -> MarginBound {
        let s = self.sobolev.s;
        match self.pde.kind {
            PdeName::Poisson => MarginBound::Poisson { s },
            PdeName::Heat => MarginBound::Heat { s },
            PdeName::Schrodinger => {
                MarginBound::schrodinger(s, self.pde.potential, self.grf.grid_size)
            }
        }
    }

    pub fn surrogate_config(&self) -> SurrogateConfig {
        let s = &self.surrogate;
        SurrogateConfig {
            trunc_in: self.sobolev.trunc,
            trunc_out: self.sobolev.trunc,
            hidden_channels: s.hidden_channels,
            hidden_layers: s.hidden_layers,
            learning_rate: s.learning_rate,
            epochs: s.epochs,
            batch_size: s.batch_size,
            seed: self.seeds().model,
        }
    }

    pub fn collector_config(&self) -> CollectorConfig {
        CollectorConfig {
            k: self.collection.k,
            kernel: self.collection.kernel,
            starts: self.collection.starts,
            ..CollectorConfig::default()
        }
    }

    pub fn robust_stages(&self) -> Vec<RobustStage> {
        if !self.collection.stages.is_empty() {
            return self.collection.stages.clone();
        }
        let n = self.sobolev.trunc;
        let mut truncs: Vec<usize> = [n / 3, (2 * n) / 3, n]
            .into_iter()
            .filter(|&t| t > 0)
            .collect();
        truncs.dedup();
        truncs
            .into_iter()
            .map(|trunc| RobustStage {
                trunc,
                iters: 100,
                eta: None,
            })
            .collect()
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            data: substream(self.seed, "data"),
            model: substream(self.seed, "model"),
            experiment: substream(self.seed, "experiment"),
        }
    }
}

/// Independent seeds derived from the base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: u64,
    pub model: u64,
    pub experiment: u64,
}

/// First eight bytes of `SHA-256(seed_le || name)`.
pub fn substream(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// Record of one run: what was configured and what was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seeds: Seeds,
    pub stages: Vec<String>,
    pub files: Vec<FileEntry>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Pipeline steps; later steps pull in the ones they depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    GenerateData,
    Train,
    Calibrate,
    Curve,
    Collect,
    Quantum,
    All,
}

impl Step {
    fn name(self) -> &'static str {
        match self {
            Step::GenerateData => "generate-data",
            Step::Train => "train",
            Step::Calibrate => "calibrate",
            Step::Curve => "curve",
            Step::Collect => "collect-experiment",
            Step::Quantum => "quantum-experiment",
            Step::All => "all",
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.toml";
const DATASET_FILE: &str = "dataset.scds";
const MODEL_FILE: &str = "model.json";
const QUANTILES_FILE: &str = "quantiles.json";

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    hash: String,
    reuse: bool,
    files: Vec<String>,
    stages: Vec<String>,
    dataset: Option<Dataset>,
    model: Option<SurrogateModel>,
    table: Option<QuantileTable>,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    fn cached(&self, name: &str) -> bool {
        self.reuse && self.path(name).exists()
    }

    fn splits(&mut self) -> Result<(Vec<Sample>, Vec<Sample>, Vec<Sample>)> {
        let d = self.cfg.data;
        let trunc = self.cfg.sobolev.trunc;
        let ds = self.dataset()?;
        let observe = |s: &Sample| -> Result<Sample> {
            Ok(Sample {
                input: s.input.clone(),
                target: truncate(&s.target, trunc)?,
            })
        };
        let train = ds.samples[..d.train]
            .iter()
            .map(observe)
            .collect::<Result<_>>()?;
        let calib = ds.samples[d.train..d.train + d.calib]
            .iter()
            .map(observe)
            .collect::<Result<_>>()?;
        let test = ds.samples[d.train + d.calib..].to_vec();
        Ok((train, calib, test))
    }

    fn dataset(&mut self) -> Result<&Dataset> {
        if self.dataset.is_none() {
            let ds = if self.cached(DATASET_FILE) {
                Dataset::load(&self.path(DATASET_FILE)).map_err(|e| e.in_stage("generate-data"))?
            } else {
                let d = self.cfg.data;
                let ds = Dataset::generate(
                    self.cfg.pde_kind(),
                    self.cfg.grf_params()?,
                    d.train + d.calib + d.test,
                    self.cfg.seeds().data,
                )
                .map_err(|e| e.in_stage("generate-data"))?;
                ds.save(&self.path(DATASET_FILE))
                    .map_err(|e| e.in_stage("generate-data"))?;
                ds
            };
            self.dataset = Some(ds);
            self.stages.push("generate-data".into());
        }
        self.record(DATASET_FILE);
        Ok(self.dataset.as_ref().expect("dataset set above"))
    }

    fn model(&mut self) -> Result<SurrogateModel> {
        if self.model.is_none() {
            let model = if self.cached(MODEL_FILE) {
                SurrogateModel::load(&self.path(MODEL_FILE)).map_err(|e| e.in_stage("train"))?
            } else {
                let (train_set, _, _) = self.splits()?;
                let m = train(&train_set, &self.cfg.surrogate_config())
                    .map_err(|e| e.in_stage("train"))?;
                m.save(&self.path(MODEL_FILE))
                    .map_err(|e| e.in_stage("train"))?;
                m
            };
            self.model = Some(model);
            self.stages.push("train".into());
        }
        self.record(MODEL_FILE);
        Ok(self.model.clone().expect("model set above"))
    }

    fn table(&mut self) -> Result<QuantileTable> {
        if self.table.is_none() {
            let table = if self.cached(QUANTILES_FILE) {
                let f = fs::File::open(self.path(QUANTILES_FILE))?;
                serde_json::from_reader(std::io::BufReader::new(f))
                    .map_err(|e| Error::from(e).in_stage("calibrate"))?
            } else {
                let model = self.model()?;
                let (_, calib, _) = self.splits()?;
                let n_cal = calib.len();
                let mut alphas: Vec<f64> = self
                    .cfg
                    .calibration
                    .alphas
                    .iter()
                    .copied()
                    .filter(|&a| quantile_rank(n_cal, a) <= n_cal)
                    .collect();
                if !alphas
                    .iter()
                    .any(|a| (a - self.cfg.calibration.alpha).abs() < 1e-12)
                {
                    alphas.push(self.cfg.calibration.alpha);
                }
                let t = calibrate(&model, &calib, &self.cfg.sobolev, &alphas)
                    .map_err(|e| e.in_stage("calibrate"))?;
                let f = BufWriter::new(fs::File::create(self.path(QUANTILES_FILE))?);
                serde_json::to_writer_pretty(f, &t)?;
                t
            };
            self.table = Some(table);
            self.stages.push("calibrate".into());
        }
        self.record(QUANTILES_FILE);
        self.model()?;
        Ok(self.table.clone().expect("table set above"))
    }

    fn curve(&mut self) -> Result<()> {
        let model = self.model()?;
        let (_, calib, test) = self.splits()?;
        let n_cal = calib.len();
        let (alphas, skipped): (Vec<f64>, Vec<f64>) = self
            .cfg
            .calibration
            .alphas
            .iter()
            .partition(|&&a| quantile_rank(n_cal, a) <= n_cal);
        if !skipped.is_empty() {
            eprintln!(
                "warning: {n_cal} calibration points cannot certify alpha in {skipped:?}; skipped"
            );
        }
        let rows = calibration_curve(
            &model,
            &calib,
            &test,
            &self.cfg.sobolev,
            &self.cfg.margin(),
            &alphas,
        )
        .map_err(|e| e.in_stage("curve"))?;
        write_curve(&rows, fs::File::create(self.path("curve.csv"))?)?;
        self.record("curve.csv");
        self.stages.push("curve".into());
        Ok(())
    }

    fn collect(&mut self) -> Result<()> {
        if self.cfg.pde.kind == PdeName::Schrodinger {
            return Err(Error::Config(
                "collection needs a real-valued PDE (poisson or heat)".into(),
            )
            .in_stage("collect-experiment"));
        }
        let model = self.model()?;
        let table = self.table()?;
        let cfg = self.cfg;
        let test = generate_samples(
            &cfg.pde_kind(),
            &cfg.grf_params()?,
            cfg.seeds().experiment,
            0..cfg.collection.n_test,
        )
        .map_err(|e| e.in_stage("collect-experiment"))?;
        let summary = compare_experiment(
            &model,
            &test,
            &table,
            &cfg.margin(),
            cfg.calibration.alpha,
            &cfg.collector_config(),
            &cfg.robust_stages(),
            &InnerMaxOptions::default(),
        )
        .map_err(|e| e.in_stage("collect-experiment"))?;
        write_compare_rows(
            &summary.rows,
            fs::File::create(self.path("collection.csv"))?,
        )?;
        let t = summary.test;
        let mut w =
            csv::Writer::from_writer(fs::File::create(self.path("collection_summary.csv"))?);
        w.write_record([
            "pde",
            "rho",
            "trunc",
            "alpha",
            "n",
            "delta_mean",
            "std_error",
            "t",
            "p_value",
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
        w.write_record([
            cfg.pde_kind().name().to_string(),
            cfg.grf.rho.to_string(),
            cfg.sobolev.trunc.to_string(),
            cfg.calibration.alpha.to_string(),
            t.n.to_string(),
            t.mean.to_string(),
            t.std_error.to_string(),
            t.t.to_string(),
            t.p_value.to_string(),
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
        w.flush()?;
        self.record("collection.csv");
        self.record("collection_summary.csv");
        self.stages.push("collect-experiment".into());
        Ok(())
    }

    fn quantum(&mut self) -> Result<()> {
        if self.cfg.pde.kind != PdeName::Schrodinger {
            return Err(
                Error::Config("discrimination needs pde.kind = \"schrodinger\"".into())
                    .in_stage("quantum-experiment"),
            );
        }
        let model = self.model()?;
        let table = self.table()?;
        let cfg = self.cfg;
        let alpha = cfg.calibration.alpha;
        let dc = DiscriminationConfig {
            m: cfg.quantum.m,
            spec: cfg.sobolev,
            alpha,
            radius_mode: cfg.quantum.radius_mode,
            n_test: cfg.quantum.n_test,
            seed: cfg.seeds().experiment,
            phases: PhaseOptions {
                starts: cfg.quantum.starts,
                seed: substream(cfg.seed, "phases"),
                ..PhaseOptions::default()
            },
        };
        let summary = discrimination_experiment(
            &model,
            &cfg.pde_kind(),
            &cfg.grf_params()?,
            &cfg.margin(),
            table.at(alpha)?,
            &dc,
        )
        .map_err(|e| e.in_stage("quantum-experiment"))?;
        write_discrimination_rows(&summary.rows, fs::File::create(self.path("quantum.csv"))?)?;
        let mut w = csv::Writer::from_writer(fs::File::create(self.path("quantum_summary.csv"))?);
        w.write_record([
            "rho",
            "m",
            "trunc",
            "i_pgm",
            "i_nom",
            "i_rob",
            "p_rob_gt_pgm",
            "p_rob_gt_nom",
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
        w.write_record([
            cfg.grf.rho.to_string(),
            cfg.quantum.m.to_string(),
            cfg.sobolev.trunc.to_string(),
            summary.mean_pgm.to_string(),
            summary.mean_nom.to_string(),
            summary.mean_rob.to_string(),
            summary.rob_vs_pgm.p_value.to_string(),
            summary.rob_vs_nom.p_value.to_string(),
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
        w.flush()?;
        self.record("quantum.csv");
        self.record("quantum_summary.csv");
        self.stages.push("quantum-experiment".into());
        Ok(())
    }

    fn write_manifest(&self) -> Result<Manifest> {
        let files = self
            .files
            .iter()
            .map(|f| {
                Ok(FileEntry {
                    path: f.clone(),
                    sha256: file_sha256(&self.path(f))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            config_hash: self.hash.clone(),
            seeds: self.cfg.seeds(),
            stages: self.stages.clone(),
            files,
            config: self.cfg.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(self.path(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}

/// Runs `step` and its prerequisites, writing artifacts and a manifest to
/// `cfg.out_dir`. Artifacts from an earlier run with the same config hash
/// are reused.
pub fn run_pipeline(cfg: &ExperimentConfig, step: Step) -> Result<Manifest> {
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_stage("setup"))?;
    let hash = cfg.hash()?;
    let reuse = Manifest::load(&dir.join(MANIFEST_FILE)).is_ok_and(|m| m.config_hash == hash);
    let mut run = Run {
        cfg,
        dir,
        hash,
        reuse,
        files: Vec::new(),
        stages: Vec::new(),
        dataset: None,
        model: None,
        table: None,
    };
    match step {
        Step::GenerateData => {
            run.dataset()?;
        }
        Step::Train => {
            run.model()?;
        }
        Step::Calibrate => {
            run.table()?;
        }
        Step::Curve => run.curve()?,
        Step::Collect => run.collect()?,
        Step::Quantum => run.quantum()?,
        Step::All => {
            run.table()?;
            run.curve()?;
            match cfg.pde.kind {
                PdeName::Schrodinger => run.quantum()?,
                _ => run.collect()?,
            }
        }
    }
    run.stages.dedup();
    run.write_manifest()
}

impl std::str::FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Step::GenerateData,
            Step::Train,
            Step::Calibrate,
            Step::Curve,
            Step::Collect,
            Step::Quantum,
            Step::All,
        ]
        .into_iter()
        .find(|st| st.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown step `{s}`")))
    }
}
