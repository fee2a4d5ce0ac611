//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::AeConfig;
use crate::error::{Error, Result};
use crate::interpret::{PatternSpec, DEFAULT_GRID_SIZE, DEFAULT_SPAN, DEFAULT_WINDOW};
use crate::mds::MdsInit;
use crate::predict::Family;
use crate::reduce::RmsepMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMethod {
    #[default]
    Mds,
    Autoencoder,
    Both,
}

impl FeatureMethod {
    /// Feature-set labels produced by this method.
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            FeatureMethod::Mds => &["mds"],
            FeatureMethod::Autoencoder => &["seq2seq"],
            FeatureMethod::Both => &["mds", "seq2seq"],
        }
    }

    pub fn uses_mds(self) -> bool {
        matches!(self, FeatureMethod::Mds | FeatureMethod::Both)
    }

    pub fn uses_autoencoder(self) -> bool {
        matches!(self, FeatureMethod::Autoencoder | FeatureMethod::Both)
    }
}

impl std::str::FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mds" => Ok(FeatureMethod::Mds),
            "autoencoder" | "seq2seq" => Ok(FeatureMethod::Autoencoder),
            "both" => Ok(FeatureMethod::Both),
            other => Err(Error::config(format!(
                "unknown feature method `{other}` (mds, autoencoder, both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub spec: PathBuf,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub sequences: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub strip_leading: Vec<String>,
    pub strip_trailing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdsSection {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub init: MdsInit,
}

impl Default for MdsSection {
    fn default() -> Self {
        Self {
            max_iter: 300,
            rel_tol: 1e-6,
            init: MdsInit::Classical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub learning_rate: f64,
    pub clip_norm: f64,
}

impl Default for AeSection {
    fn default() -> Self {
        let d = AeConfig::default();
        Self {
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            patience: d.patience,
            val_fraction: d.val_fraction,
            learning_rate: d.learning_rate,
            clip_norm: d.clip_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub method: FeatureMethod,
    /// Feature dimension K for both extractors.
    pub dims: usize,
    pub mds: MdsSection,
    pub autoencoder: AeSection,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            method: FeatureMethod::Mds,
            dims: 100,
            mds: MdsSection::default(),
            autoencoder: AeSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub name: String,
    #[serde(default = "gaussian")]
    pub family: Family,
    /// Covariate column whose groups are median-centred before analysis.
    #[serde(default)]
    pub center_by: Option<String>,
}

fn gaussian() -> Family {
    Family::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub n_rep: usize,
    pub grid_size: usize,
    pub grid_ratio: f64,
    /// Labels such as `score`, `mds`, `score+mds`; empty means `score`,
    /// each feature set, and `score+` each feature set.
    pub predictor_sets: Vec<String>,
    pub targets: Vec<TargetConfig>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            n_rep: 10,
            grid_size: 50,
            grid_ratio: 1e-4,
            predictor_sets: Vec::new(),
            targets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlsConfig {
    /// Defaults to the first prediction target.
    pub target: Option<String>,
    pub max_components: usize,
    pub rmsep: RmsepMode,
}

impl Default for PlsConfig {
    fn default() -> Self {
        Self {
            target: None,
            max_components: 10,
            rmsep: RmsepMode::InSample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPattern {
    pub item: String,
    #[serde(flatten)]
    pub pattern: PatternSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpretConfig {
    pub interval: usize,
    pub window: usize,
    pub grid_size: usize,
    pub span: f64,
    /// Covariate smoothed against each component; defaults to the PLS target.
    pub variable: Option<String>,
    pub patterns: Vec<ItemPattern>,
}

impl Default for InterpretConfig {
    fn default() -> Self {
        Self {
            interval: 50,
            window: DEFAULT_WINDOW,
            grid_size: DEFAULT_GRID_SIZE,
            span: DEFAULT_SPAN,
            variable: None,
            patterns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub predict: PredictConfig,
    #[serde(default)]
    pub pls: PlsConfig,
    #[serde(default)]
    pub interpret: InterpretConfig,
}

impl PipelineConfig {
    /// Parses a TOML config. Relative paths are resolved against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<PipelineConfig> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        if let Some(sim) = cfg.simulate.as_mut() {
            resolve(&mut sim.spec);
        }
        if let Some(p) = cfg.data.sequences.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.data.covariates.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Static checks, reporting every violation. Input files are checked by
    /// the stages that read them.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.features.dims < 1 {
            errs.push("features.dims (K) must be at least 1".to_string());
        }
        if self.predict.n_rep < 1 {
            errs.push("predict.n_rep must be at least 1".to_string());
        }
        if self.predict.grid_size < 1 {
            errs.push("predict.grid_size must be at least 1".to_string());
        }
        if !(self.predict.grid_ratio > 0.0 && self.predict.grid_ratio <= 1.0) {
            errs.push("predict.grid_ratio must be in (0, 1]".to_string());
        }
        if self.pls.max_components < 1 {
            errs.push("pls.max_components must be at least 1".to_string());
        }
        if self.interpret.interval < 1 {
            errs.push("interpret.interval must be at least 1".to_string());
        }
        if self.interpret.window < 1 || self.interpret.grid_size < 1 {
            errs.push("interpret.window and interpret.grid_size must be at least 1".to_string());
        }
        if !(self.interpret.span > 0.0 && self.interpret.span <= 1.0) {
            errs.push("interpret.span must be in (0, 1]".to_string());
        }
        if let Some(sim) = &self.simulate {
            if sim.n_subjects < 1 {
                errs.push("simulate.n_subjects must be at least 1".to_string());
            }
        } else if self.data.sequences.is_none() || self.data.covariates.is_none() {
            errs.push(
                "data.sequences and data.covariates are required without a [simulate] section"
                    .to_string(),
            );
        }
        let mut names = Vec::new();
        for t in &self.predict.targets {
            if names.contains(&t.name.as_str()) {
                errs.push(format!("prediction target `{}` listed twice", t.name));
            }
            names.push(t.name.as_str());
        }
        for set in &self.predict.predictor_sets {
            for part in set.split('+') {
                let known = part == "score" || self.features.method.labels().contains(&part);
                if !known {
                    errs.push(format!(
                        "predictor set `{set}`: `{part}` is not `score` or an enabled feature set"
                    ));
                }
            }
        }
        for p in &self.interpret.patterns {
            if let Err(Error::Config(v)) = p.pattern.validate() {
                errs.extend(
                    v.into_iter()
                        .map(|m| format!("pattern on item `{}`: {m}", p.item)),
                );
            }
        }
        let ae = &self.features.autoencoder;
        if ae.batch_size < 1 {
            errs.push("features.autoencoder.batch_size must be at least 1".to_string());
        }
        if !(ae.val_fraction > 0.0 && ae.val_fraction < 1.0) {
            errs.push("features.autoencoder.val_fraction must be in (0, 1)".to_string());
        }
        if !(ae.learning_rate > 0.0 && ae.clip_norm > 0.0) {
            errs.push(
                "features.autoencoder learning_rate and clip_norm must be positive".to_string(),
            );
        }
        if !(self.features.mds.rel_tol >= 0.0) {
            errs.push("features.mds.rel_tol must be non-negative".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn ae_config(&self) -> AeConfig {
        let s = &self.features.autoencoder;
        AeConfig {
            dims: self.features.dims,
            batch_size: s.batch_size,
            max_epochs: s.max_epochs,
            patience: s.patience,
            val_fraction: s.val_fraction,
            learning_rate: s.learning_rate,
            clip_norm: s.clip_norm,
            seed: self.seed,
            ..AeConfig::default()
        }
    }

    /// Predictor-set labels to evaluate.
    pub fn predictor_sets(&self) -> Vec<String> {
        if !self.predict.predictor_sets.is_empty() {
            return self.predict.predictor_sets.clone();
        }
        let labels = self.features.method.labels();
        let mut sets = vec!["score".to_string()];
        sets.extend(labels.iter().map(|l| l.to_string()));
        sets.extend(labels.iter().map(|l| format!("score+{l}")));
        sets
    }

    pub fn pls_target(&self) -> Option<&str> {
        self.pls
            .target
            .as_deref()
            .or_else(|| self.predict.targets.first().map(|t| t.name.as_str()))
    }
}
