use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sobolev_conformal::experiments::{run_pipeline, ExperimentConfig, Manifest, PdeName, Step};
use sobolev_conformal::pde::PotentialKind;
use sobolev_conformal::quantum::RadiusMode;
use sobolev_conformal::Result;

/// Conformal prediction over Sobolev spaces for spectral PDE surrogates, and
/// robust design experiments built on it.
#[derive(Parser)]
#[command(name = "sobolev-conformal", version)]
struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed from which all data, model and experiment seeds derive.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample GRF inputs and solve the PDE for the train/calib/test splits.
    GenerateData(Common),
    /// Train the spectral surrogate.
    Train(Common),
    /// Compute calibration scores and quantiles.
    Calibrate(Common),
    /// Raw and corrected coverage across miscoverage levels.
    Curve(Common),
    /// Robust vs nominal resource collection.
    CollectExperiment(Collect),
    /// PGM vs nominal vs robust state discrimination.
    QuantumExperiment(Quantum),
    /// Curve plus the design experiment matching the configured PDE.
    All(Common),
}

#[derive(Args, Default)]
struct Common {
    #[arg(long, value_enum)]
    pde: Option<PdeArg>,
    /// GRF smoothness.
    #[arg(long)]
    rho: Option<f64>,
    /// Spectral truncation N.
    #[arg(long)]
    trunc: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct Collect {
    #[command(flatten)]
    common: Common,
    #[arg(long = "n-test")]
    n_test: Option<usize>,
}

#[derive(Args)]
struct Quantum {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    hamiltonian: Option<Hamiltonian>,
    /// Constellation size.
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "n-test")]
    n_test: Option<usize>,
    #[arg(long = "radius-mode", value_enum)]
    radius_mode: Option<RadiusArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PdeArg {
    Poisson,
    Heat,
    Schrodinger,
}

#[derive(Clone, Copy, ValueEnum)]
enum Hamiltonian {
    Step,
    Grin,
}

#[derive(Clone, Copy, ValueEnum)]
enum RadiusArg {
    /// Radius propagated through the spectral perturbation bound.
    #[value(name = "paper", alias = "propagated")]
    Propagated,
    Empirical,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(p) = self.pde {
            cfg.pde.kind = match p {
                PdeArg::Poisson => PdeName::Poisson,
                PdeArg::Heat => PdeName::Heat,
                PdeArg::Schrodinger => PdeName::Schrodinger,
            };
        }
        if let Some(r) = self.rho {
            cfg.grf.rho = r;
        }
        if let Some(n) = self.trunc {
            cfg.sobolev.trunc = n;
        }
        if let Some(a) = self.alpha {
            cfg.calibration.alpha = a;
        }
        if let Some(e) = self.epochs {
            cfg.surrogate.epochs = e;
        }
    }
}

fn configure(cli: &Cli) -> Result<(ExperimentConfig, Step)> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    let step = match &cli.command {
        Command::GenerateData(c) => {
            c.apply(&mut cfg);
            Step::GenerateData
        }
        Command::Train(c) => {
            c.apply(&mut cfg);
            Step::Train
        }
        Command::Calibrate(c) => {
            c.apply(&mut cfg);
            Step::Calibrate
        }
        Command::Curve(c) => {
            c.apply(&mut cfg);
            Step::Curve
        }
        Command::All(c) => {
            c.apply(&mut cfg);
            Step::All
        }
        Command::CollectExperiment(c) => {
            c.common.apply(&mut cfg);
            if let Some(n) = c.n_test {
                cfg.collection.n_test = n;
            }
            Step::Collect
        }
        Command::QuantumExperiment(q) => {
            q.common.apply(&mut cfg);
            cfg.pde.kind = PdeName::Schrodinger;
            if let Some(h) = q.hamiltonian {
                cfg.pde.potential = match h {
                    Hamiltonian::Step => PotentialKind::step_index(),
                    Hamiltonian::Grin => PotentialKind::grin(),
                };
            }
            if let Some(m) = q.m {
                cfg.quantum.m = m;
            }
            if let Some(n) = q.n_test {
                cfg.quantum.n_test = n;
            }
            if let Some(r) = q.radius_mode {
                cfg.quantum.radius_mode = match r {
                    RadiusArg::Propagated => RadiusMode::Propagated,
                    RadiusArg::Empirical => RadiusMode::Empirical,
                };
            }
            Step::Quantum
        }
    };
    cfg.validate()?;
    Ok((cfg, step))
}

fn report(m: &Manifest, out: &std::path::Path) {
    println!("stages: {}", m.stages.join(", "));
    for f in &m.files {
        println!("  {}  {}", f.sha256, out.join(&f.path).display());
    }
    println!("manifest: {}", out.join("manifest.toml").display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = configure(&cli).and_then(|(cfg, step)| {
        let m = run_pipeline(&cfg, step)?;
        report(&m, &cfg.out_dir);
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
