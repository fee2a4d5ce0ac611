//! `actseq`: run pipeline stages from a config file.

use std::path::PathBuf;
use std::process::ExitCode;

use actseq::pipeline::{FeatureMethod, Pipeline, PipelineConfig, Stage, TargetConfig};
use actseq::predict::Family;
use actseq::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand};

/// Thread-count override for the parallel stages.
const THREADS_ENV: &str = "ACTSEQ_THREADS";

#[derive(Parser)]
#[command(
    name = "actseq",
    version,
    about = "Features, prediction and interpretation for action sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort from the agent spec
    Simulate,
    /// Read sequences and covariates into the per-item layout
    Ingest,
    /// OSS dissimilarity matrix per item
    Dist,
    /// SMACOF embedding of each dissimilarity matrix
    Mds,
    /// Train the sequence autoencoder per item
    AeTrain,
    /// Encode sequences with the trained autoencoders
    Encode,
    /// Principal features from the extracted features
    Pca,
    /// Ridge prediction of each target from each predictor set
    Predict,
    /// Prediction with items added one at a time
    Cumulative,
    /// PLS decomposition against the PLS target
    Pls,
    /// Ranked sequences and pattern curves along PLS components
    Inspect,
    /// Every stage in order
    Pipeline,
}

#[derive(Args)]
struct Overrides {
    /// Pipeline config (TOML)
    #[arg(long, short, global = true, default_value = "actseq.toml")]
    config: PathBuf,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Feature dimension K
    #[arg(long, global = true)]
    dims: Option<usize>,
    /// mds, autoencoder or both
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    n_rep: Option<usize>,
    /// Simulated cohort size
    #[arg(long, global = true)]
    n_subjects: Option<usize>,
    /// Replaces the configured prediction targets
    #[arg(long, global = true)]
    target: Option<String>,
    /// Family for --target: gaussian or binomial
    #[arg(long, global = true, requires = "target")]
    family: Option<String>,
    /// Predictor set label such as `score` or `score+mds`; repeatable
    #[arg(long = "predictor-set", global = true)]
    predictor_sets: Vec<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<(), Error> {
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dims) = self.dims {
            cfg.features.dims = dims;
        }
        if let Some(m) = &self.method {
            cfg.features.method = m.parse::<FeatureMethod>()?;
        }
        if let Some(n) = self.n_rep {
            cfg.predict.n_rep = n;
        }
        if let Some(n) = self.n_subjects {
            match cfg.simulate.as_mut() {
                Some(sim) => sim.n_subjects = n,
                None => return Err(Error::config("--n-subjects needs a [simulate] section")),
            }
        }
        if let Some(name) = &self.target {
            let family = match &self.family {
                Some(f) => f.parse::<Family>()?,
                None => Family::Gaussian,
            };
            cfg.predict.targets = vec![TargetConfig {
                name: name.clone(),
                family,
                center_by: None,
            }];
        }
        if !self.predictor_sets.is_empty() {
            cfg.predict.predictor_sets = self.predictor_sets.clone();
        }
        Ok(())
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize =
        raw.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            Error::config(format!("{THREADS_ENV}={raw:?} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<(), Error> {
    configure_threads()?;
    let mut cfg = PipelineConfig::load(&cli.overrides.config)?;
    cli.overrides.apply(&mut cfg)?;
    let pipeline = Pipeline::new(cfg)?;
    let artifacts = match cli.command {
        Command::Pipeline => pipeline.run_all()?,
        Command::Simulate => pipeline.run(Stage::Simulate)?,
        Command::Ingest => pipeline.run(Stage::Ingest)?,
        Command::Dist => pipeline.run(Stage::Dist)?,
        Command::Mds => pipeline.run(Stage::Mds)?,
        Command::AeTrain => pipeline.run(Stage::AeTrain)?,
        Command::Encode => pipeline.run(Stage::Encode)?,
        Command::Pca => pipeline.run(Stage::Pca)?,
        Command::Predict => pipeline.run(Stage::Predict)?,
        Command::Cumulative => pipeline.run(Stage::Cumulative)?,
        Command::Pls => pipeline.run(Stage::Pls)?,
        Command::Inspect => pipeline.run(Stage::Inspect)?,
    };
    for a in &artifacts {
        println!("{}", serde_json::to_string(a).expect("artifact serializes"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Config(problems) if problems.len() > 1 => {
                    eprintln!("error: invalid configuration:");
                    for p in problems {
                        eprintln!("  - {p}");
                    }
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
