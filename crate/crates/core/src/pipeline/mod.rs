//! End-to-end orchestration: every stage reads its inputs from, and writes
//! its artifacts to, a fixed layout under the configured output directory.
//!
//! ```text
//! simulated/{sequences.jsonl,covariates.csv}    simulate
//! covariates.csv, items.txt                     ingest
//! items/<item>/sequences.jsonl, describe.json   ingest
//! items/<item>/oss.bin                          dist
//! items/<item>/mds.csv, mds_stress.csv          mds
//! items/<item>/seq2seq.ckpt, seq2seq_log.csv    ae-train
//! items/<item>/seq2seq.csv                      encode
//! items/<item>/<set>_pca.csv, ..._variance.csv  pca
//! predict/{report.csv,summary.json}             predict
//! cumulative/{report.csv,summary.json}          cumulative
//! items/<item>/pls_<set>/...                    pls, inspect
//! ```

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::autoencoder::{encode_cohort, train, TrainedAutoencoder};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::interpret::{
    pattern_series, plot_data, rank_export, write_inspection, write_plot_csv, PredicateRegistry,
    SeriesOptions,
};
use crate::mds::{mds_embed, MdsConfig};
use crate::oss::{dissimilarity_matrix, DissimilarityMatrix};
use crate::predict::{
    cumulative_predict, run_replications, write_reports_csv, write_summary_json, ReplicationConfig,
};
use crate::reduce::{pca_fit_transform, pls_fit, pls_scores, select_m, RmsepMode};
use crate::seqdata::{
    center_by_country, describe, emit_sequences, ingest_path, strip_wrappers, Cohort,
    CovariateTable, SequenceFormat,
};
use crate::simgen::{generate, AgentSpec};

pub use config::{
    AeSection, DataConfig, FeatureMethod, FeaturesConfig, InterpretConfig, ItemPattern, MdsSection,
    PipelineConfig, PlsConfig, PredictConfig, SimulateConfig, TargetConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Ingest,
    Dist,
    Mds,
    AeTrain,
    Encode,
    Pca,
    Predict,
    Cumulative,
    Pls,
    Inspect,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Simulate,
        Stage::Ingest,
        Stage::Dist,
        Stage::Mds,
        Stage::AeTrain,
        Stage::Encode,
        Stage::Pca,
        Stage::Predict,
        Stage::Cumulative,
        Stage::Pls,
        Stage::Inspect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Ingest => "ingest",
            Stage::Dist => "dist",
            Stage::Mds => "mds",
            Stage::AeTrain => "ae-train",
            Stage::Encode => "encode",
            Stage::Pca => "pca",
            Stage::Predict => "predict",
            Stage::Cumulative => "cumulative",
            Stage::Pls => "pls",
            Stage::Inspect => "inspect",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::config(format!("unknown stage `{s}`")))
    }
}

/// One written file, reported relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub stage: &'static str,
    pub path: String,
    pub bytes: u64,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    predicates: PredicateRegistry,
}

fn valid_item_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            predicates: PredicateRegistry::new(),
        })
    }

    pub fn with_predicates(mut self, predicates: PredicateRegistry) -> Self {
        self.predicates = predicates;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn output_dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    /// Stages `run_all` executes, in order.
    pub fn plan(&self) -> Vec<Stage> {
        let m = self.cfg.features.method;
        Stage::ALL
            .into_iter()
            .filter(|s| match s {
                Stage::Simulate => self.cfg.simulate.is_some(),
                Stage::Dist | Stage::Mds => m.uses_mds(),
                Stage::AeTrain | Stage::Encode => m.uses_autoencoder(),
                Stage::Predict | Stage::Cumulative => !self.cfg.predict.targets.is_empty(),
                Stage::Pls | Stage::Inspect => self.cfg.pls_target().is_some(),
                _ => true,
            })
            .collect()
    }

    pub fn run_all(&self) -> Result<Vec<Artifact>> {
        let mut out = Vec::new();
        for stage in self.plan() {
            out.extend(self.run(stage)?);
        }
        Ok(out)
    }

    pub fn run(&self, stage: Stage) -> Result<Vec<Artifact>> {
        match stage {
            Stage::Simulate => self.simulate(),
            Stage::Ingest => self.ingest(),
            Stage::Dist => self.dist(),
            Stage::Mds => self.mds(),
            Stage::AeTrain => self.ae_train(),
            Stage::Encode => self.encode(),
            Stage::Pca => self.pca(),
            Stage::Predict => self.predict(),
            Stage::Cumulative => self.cumulative(),
            Stage::Pls => self.pls(),
            Stage::Inspect => self.inspect(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }

    fn write(
        &self,
        stage: Stage,
        rel: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<Artifact> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
        Ok(Artifact {
            stage: stage.name(),
            path: rel.to_string(),
            bytes: buf.len() as u64,
        })
    }

    fn require(&self, rel: &str, stage: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::config(format!(
                "missing {}; run `{stage}` first",
                p.display()
            )))
        }
    }

    fn simulated_paths(&self) -> (PathBuf, PathBuf) {
        (
            self.path("simulated/sequences.jsonl"),
            self.path("simulated/covariates.csv"),
        )
    }

    fn simulate(&self) -> Result<Vec<Artifact>> {
        let sim = self
            .cfg
            .simulate
            .as_ref()
            .ok_or_else(|| Error::config("`simulate` needs a [simulate] section"))?;
        if !sim.spec.exists() {
            return Err(Error::config(format!(
                "agent spec {} does not exist",
                sim.spec.display()
            )));
        }
        let spec = AgentSpec::load(&sim.spec)?;
        let (cohorts, table) = generate(&spec, sim.n_subjects, self.cfg.seed)?;
        Ok(vec![
            self.write(Stage::Simulate, "simulated/sequences.jsonl", |b| {
                emit_sequences(&cohorts, b)
            })?,
            self.write(Stage::Simulate, "simulated/covariates.csv", |b| {
                table.write_csv(b)
            })?,
        ])
    }

    fn input_paths(&self) -> Result<(PathBuf, PathBuf)> {
        let (sim_seq, sim_cov) = self.simulated_paths();
        let seq = self.cfg.data.sequences.clone().unwrap_or(sim_seq);
        let cov = self.cfg.data.covariates.clone().unwrap_or(sim_cov);
        let mut missing = Vec::new();
        for p in [&seq, &cov] {
            if !p.exists() {
                missing.push(format!("input file {} does not exist", p.display()));
            }
        }
        if missing.is_empty() {
            Ok((seq, cov))
        } else {
            Err(Error::Config(missing))
        }
    }

    fn ingest(&self) -> Result<Vec<Artifact>> {
        let (seq_path, cov_path) = self.input_paths()?;
        let cohorts = ingest_path(&seq_path, SequenceFormat::from_path(&seq_path))?;
        let table = CovariateTable::load(&cov_path)?;
        let data = &self.cfg.data;
        let mut out = Vec::new();
        let mut ids = String::new();
        for cohort in &cohorts {
            let id = cohort.item_id();
            if !valid_item_id(id) {
                return Err(Error::invalid(format!(
                    "item id `{id}` cannot name a directory (use letters, digits, `-`, `_`, `.`)"
                )));
            }
            let cohort = if data.strip_leading.is_empty() && data.strip_trailing.is_empty() {
                cohort.clone()
            } else {
                strip_wrappers(cohort, &data.strip_leading, &data.strip_trailing)?
            };
            let desc = describe(&cohort)?;
            out.push(
                self.write(Stage::Ingest, &format!("items/{id}/sequences.jsonl"), |b| {
                    emit_sequences(std::slice::from_ref(&cohort), b)
                })?,
            );
            out.push(
                self.write(Stage::Ingest, &format!("items/{id}/describe.json"), |b| {
                    serde_json::to_writer_pretty(&mut *b, &desc)
                        .map_err(|e| Error::invalid(e.to_string()))?;
                    b.push(b'\n');
                    Ok(())
                })?,
            );
            ids.push_str(id);
            ids.push('\n');
        }
        out.push(self.write(Stage::Ingest, "covariates.csv", |b| table.write_csv(b))?);
        out.push(self.write(Stage::Ingest, "items.txt", |b| {
            b.extend_from_slice(ids.as_bytes());
            Ok(())
        })?);
        Ok(out)
    }

    fn items(&self) -> Result<Vec<String>> {
        let p = self.require("items.txt", "ingest")?;
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(text
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect())
    }

    fn cohort(&self, item: &str) -> Result<Cohort> {
        let p = self.require(&format!("items/{item}/sequences.jsonl"), "ingest")?;
        let mut cohorts = ingest_path(&p, SequenceFormat::JsonLines)?;
        if cohorts.len() != 1 {
            return Err(Error::invalid(format!(
                "{} should hold exactly one item",
                p.display()
            )));
        }
        Ok(cohorts.remove(0))
    }

    fn covariates(&self) -> Result<CovariateTable> {
        CovariateTable::load(&self.require("covariates.csv", "ingest")?)
    }

    fn features(&self, rel: &str, stage: &str) -> Result<FeatureMatrix> {
        FeatureMatrix::load(&self.require(rel, stage)?)
    }

    fn dist(&self) -> Result<Vec<Artifact>> {
        let mut out = Vec::new();
        for item in self.items()? {
            let d = dissimilarity_matrix(&self.cohort(&item)?)?;
            out.push(
                self.write(Stage::Dist, &format!("items/{item}/oss.bin"), |b| {
                    d.write_binary(b)
                })?,
            );
        }
        Ok(out)
    }

    fn mds(&self) -> Result<Vec<Artifact>> {
        let s = &self.cfg.features.mds;
        let cfg = MdsConfig {
            dims: self.cfg.features.dims,
            max_iter: s.max_iter,
            rel_tol: s.rel_tol,
            seed: self.cfg.seed,
            init: s.init,
        };
        let mut out = Vec::new();
        for item in self.items()? {
            let d = DissimilarityMatrix::load(
                &self.require(&format!("items/{item}/oss.bin"), "dist")?,
            )?;
            let emb = mds_embed(&d, &cfg)?;
            let fm = emb.to_features()?;
            out.push(
                self.write(Stage::Mds, &format!("items/{item}/mds.csv"), |b| {
                    fm.write_csv(b)
                })?,
            );
            out.push(
                self.write(Stage::Mds, &format!("items/{item}/mds_stress.csv"), |b| {
                    let mut text = String::from("iteration,stress\n");
                    for (i, s) in emb.stress_history.iter().enumerate() {
                        text.push_str(&format!("{i},{s}\n"));
                    }
                    b.extend_from_slice(text.as_bytes());
                    Ok(())
                })?,
            );
        }
        Ok(out)
    }

    fn ae_train(&self) -> Result<Vec<Artifact>> {
        let cfg = self.cfg.ae_config();
        let mut out = Vec::new();
        for item in self.items()? {
            let (model, log) = train(&self.cohort(&item)?, &cfg)?;
            out.push(
                self.write(Stage::AeTrain, &format!("items/{item}/seq2seq.ckpt"), |b| {
                    model.write_checkpoint(b)
                })?,
            );
            out.push(self.write(
                Stage::AeTrain,
                &format!("items/{item}/seq2seq_log.csv"),
                |b| log.write_csv(b),
            )?);
        }
        Ok(out)
    }

    fn encode(&self) -> Result<Vec<Artifact>> {
        let mut out = Vec::new();
        for item in self.items()? {
            let model = TrainedAutoencoder::load(
                &self.require(&format!("items/{item}/seq2seq.ckpt"), "ae-train")?,
            )?;
            let fm = encode_cohort(&model, &self.cohort(&item)?)?;
            out.push(
                self.write(Stage::Encode, &format!("items/{item}/seq2seq.csv"), |b| {
                    fm.write_csv(b)
                })?,
            );
        }
        Ok(out)
    }

    fn pca(&self) -> Result<Vec<Artifact>> {
        let mut out = Vec::new();
        for item in self.items()? {
            for set in self.cfg.features.method.labels() {
                let producer = if *set == "mds" { "mds" } else { "encode" };
                let raw = self.features(&format!("items/{item}/{set}.csv"), producer)?;
                let (model, scores) = pca_fit_transform(&raw)?;
                out.push(
                    self.write(Stage::Pca, &format!("items/{item}/{set}_pca.csv"), |b| {
                        scores.write_csv(b)
                    })?,
                );
                out.push(self.write(
                    Stage::Pca,
                    &format!("items/{item}/{set}_pca_variance.csv"),
                    |b| {
                        let mut text = String::from("component,variance\n");
                        for (k, v) in model.explained_variance.iter().enumerate() {
                            text.push_str(&format!("pc_{},{v}\n", k + 1));
                        }
                        b.extend_from_slice(text.as_bytes());
                        Ok(())
                    },
                )?);
            }
        }
        Ok(out)
    }

    /// Values of a target column after its configured transform.
    fn target_values(&self, table: &CovariateTable, name: &str) -> Result<Vec<Option<f64>>> {
        let values = table.numeric(name)?;
        let center = self
            .cfg
            .predict
            .targets
            .iter()
            .find(|t| t.name == name)
            .and_then(|t| t.center_by.as_deref());
        match center {
            Some(col) => center_by_country(&values, &table.text(col)?),
            None => Ok(values),
        }
    }

    /// Feature sets per item, keyed by set label, restricted to `subjects`.
    fn item_sets(
        &self,
        items: &[String],
        subjects: &[String],
    ) -> Result<Vec<(String, Vec<FeatureMatrix>)>> {
        let mut sets = Vec::new();
        let mut scores = Vec::new();
        for item in items {
            let cohort = self.cohort(item)?.align_to(subjects)?;
            let col: Vec<f64> = cohort
                .scores()
                .into_iter()
                .map(|s| s.unwrap_or(f64::NAN))
                .collect();
            let m = DMatrix::from_column_slice(subjects.len(), 1, &col);
            scores.push(FeatureMatrix::new(
                subjects.to_vec(),
                vec![format!("{item}:score")],
                m,
            )?);
        }
        sets.push(("score".to_string(), scores));
        for set in self.cfg.features.method.labels() {
            let mut per_item = Vec::new();
            for item in items {
                let fm = self
                    .features(&format!("items/{item}/{set}_pca.csv"), "pca")?
                    .align_to(subjects)?;
                let names = fm
                    .columns()
                    .iter()
                    .map(|c| format!("{item}:{set}_{c}"))
                    .collect();
                per_item.push(FeatureMatrix::new(
                    subjects.to_vec(),
                    names,
                    fm.into_values(),
                )?);
            }
            sets.push((set.to_string(), per_item));
        }
        Ok(sets)
    }

    /// Subjects present in every item with a known score everywhere and a
    /// known `target`, in covariate-table order, with their target values.
    fn analysis_rows(
        &self,
        items: &[String],
        table: &CovariateTable,
        target: &str,
    ) -> Result<(Vec<String>, Vec<f64>)> {
        let values = self.target_values(table, target)?;
        let mut keep: Vec<bool> = values.iter().map(Option::is_some).collect();
        for item in items {
            let cohort = self.cohort(item)?;
            let scored: std::collections::HashSet<&str> = cohort
                .sequences()
                .iter()
                .filter(|s| s.score.is_some())
                .map(|s| s.subject_id.as_str())
                .collect();
            for (k, id) in keep.iter_mut().zip(table.subject_ids()) {
                *k &= scored.contains(id.as_str());
            }
        }
        let mut ids = Vec::new();
        let mut y = Vec::new();
        for ((id, v), k) in table.subject_ids().iter().zip(&values).zip(&keep) {
            if *k {
                ids.push(id.clone());
                y.push(v.unwrap());
            }
        }
        if ids.is_empty() {
            return Err(Error::invalid(format!(
                "no subject has `{target}` and a score on every item"
            )));
        }
        Ok((ids, y))
    }

    fn replication_config(&self) -> ReplicationConfig {
        ReplicationConfig {
            n_rep: self.cfg.predict.n_rep,
            seed: self.cfg.seed,
            grid_size: self.cfg.predict.grid_size,
            grid_ratio: self.cfg.predict.grid_ratio,
        }
    }

    fn predict(&self) -> Result<Vec<Artifact>> {
        let items = self.items()?;
        let table = self.covariates()?;
        let rep = self.replication_config();
        let mut reports = Vec::new();
        for target in &self.cfg.predict.targets {
            let (ids, y) = self.analysis_rows(&items, &table, &target.name)?;
            let sets = self.item_sets(&items, &ids)?;
            for label in self.cfg.predictor_sets() {
                let mut x: Option<FeatureMatrix> = None;
                for part in label.split('+') {
                    let (_, per_item) = sets
                        .iter()
                        .find(|(l, _)| l == part)
                        .ok_or_else(|| Error::config(format!("unknown predictor set `{part}`")))?;
                    for fm in per_item {
                        x = Some(match x {
                            None => fm.clone(),
                            Some(acc) => acc.hconcat(fm)?,
                        });
                    }
                }
                let x =
                    x.ok_or_else(|| Error::config(format!("predictor set `{label}` is empty")))?;
                reports.push(run_replications(
                    &x,
                    &y,
                    &target.name,
                    &label,
                    target.family,
                    &rep,
                )?);
            }
        }
        Ok(vec![
            self.write(Stage::Predict, "predict/report.csv", |b| {
                write_reports_csv(&reports, b)
            })?,
            self.write(Stage::Predict, "predict/summary.json", |b| {
                write_summary_json(&reports, b)
            })?,
        ])
    }

    fn cumulative(&self) -> Result<Vec<Artifact>> {
        let items = self.items()?;
        let table = self.covariates()?;
        let rep = self.replication_config();
        let mut reports = Vec::new();
        for target in &self.cfg.predict.targets {
            let (ids, y) = self.analysis_rows(&items, &table, &target.name)?;
            for (label, per_item) in self.item_sets(&items, &ids)? {
                let named: Vec<(String, FeatureMatrix)> = items
                    .iter()
                    .zip(per_item)
                    .map(|(item, fm)| (format!("{label}:{item}"), fm))
                    .collect();
                reports.extend(cumulative_predict(
                    &named,
                    &y,
                    &target.name,
                    target.family,
                    &rep,
                )?);
            }
        }
        Ok(vec![
            self.write(Stage::Cumulative, "cumulative/report.csv", |b| {
                write_reports_csv(&reports, b)
            })?,
            self.write(Stage::Cumulative, "cumulative/summary.json", |b| {
                write_summary_json(&reports, b)
            })?,
        ])
    }

    fn pls_target(&self) -> Result<&str> {
        self.cfg
            .pls_target()
            .ok_or_else(|| Error::config("PLS needs pls.target or at least one prediction target"))
    }

    fn pls(&self) -> Result<Vec<Artifact>> {
        let target = self.pls_target()?;
        let table = self.covariates()?;
        let values = self.target_values(&table, target)?;
        let mut out = Vec::new();
        for item in self.items()? {
            let cohort = self.cohort(&item)?;
            let in_item: std::collections::HashSet<String> =
                cohort.subject_ids().into_iter().collect();
            let (ids, y): (Vec<String>, Vec<f64>) = table
                .subject_ids()
                .iter()
                .zip(&values)
                .filter_map(|(id, v)| v.filter(|_| in_item.contains(id)).map(|v| (id.clone(), v)))
                .unzip();
            for set in self.cfg.features.method.labels() {
                let x = self
                    .features(&format!("items/{item}/{set}_pca.csv"), "pca")?
                    .align_to(&ids)?;
                let max = self
                    .cfg
                    .pls
                    .max_components
                    .min(x.ncols())
                    .min(ids.len().saturating_sub(1));
                let mut model = pls_fit(&x, &y, max)?;
                if let RmsepMode::CrossValidated { .. } = self.cfg.pls.rmsep {
                    let m = select_m(&model, &x, &y, self.cfg.pls.rmsep)?;
                    model = model.with_components(m)?;
                }
                let scores = pls_scores(&model, &x)?;
                let dir = format!("items/{item}/pls_{set}");
                out.push(self.write(Stage::Pls, &format!("{dir}/rmsep.csv"), |b| {
                    model.write_rmsep_csv(b)
                })?);
                out.push(self.write(Stage::Pls, &format!("{dir}/loadings.csv"), |b| {
                    model.write_loadings_csv(x.columns(), b)
                })?);
                out.push(self.write(Stage::Pls, &format!("{dir}/scores.csv"), |b| {
                    scores.write_csv(b)
                })?);
                out.push(
                    self.write(Stage::Pls, &format!("{dir}/selection.json"), |b| {
                        let sel = serde_json::json!({
                            "target": target,
                            "n_subjects": ids.len(),
                            "max_components": max,
                            "n_extracted": model.n_extracted(),
                            "selected": model.n_components,
                        });
                        serde_json::to_writer_pretty(&mut *b, &sel)
                            .map_err(|e| Error::invalid(e.to_string()))?;
                        b.push(b'\n');
                        Ok(())
                    })?,
                );
            }
        }
        Ok(out)
    }

    fn inspect(&self) -> Result<Vec<Artifact>> {
        let icfg = &self.cfg.interpret;
        let target = self.pls_target()?;
        let variable_name = icfg.variable.as_deref().unwrap_or(target);
        let table = self.covariates()?;
        let variable = self.target_values(&table, variable_name)?;
        let row_of: std::collections::HashMap<&str, usize> = table
            .subject_ids()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let items = self.items()?;
        for p in &icfg.patterns {
            if !items.contains(&p.item) {
                return Err(Error::config(format!(
                    "pattern refers to unknown item `{}`",
                    p.item
                )));
            }
        }
        let opts = SeriesOptions {
            grid_size: icfg.grid_size,
            window: icfg.window,
        };
        let mut out = Vec::new();
        for item in &items {
            let full = self.cohort(item)?;
            for set in self.cfg.features.method.labels() {
                let dir = format!("items/{item}/pls_{set}");
                let scores = self.features(&format!("{dir}/scores.csv"), "pls")?;
                let cohort = full.align_to(scores.subject_ids())?;
                let var: Vec<Option<f64>> = scores
                    .subject_ids()
                    .iter()
                    .map(|id| row_of.get(id.as_str()).and_then(|&r| variable[r]))
                    .collect();
                for c in 0..scores.ncols() {
                    let s: Vec<f64> = scores.values().column(c).iter().copied().collect();
                    let recs = rank_export(&cohort, &s, icfg.interval)?;
                    out.push(self.write(
                        Stage::Inspect,
                        &format!("{dir}/inspect_pls_{}.txt", c + 1),
                        |b| write_inspection(&recs, b),
                    )?);
                    let (sx, sv): (Vec<f64>, Vec<f64>) = s
                        .iter()
                        .zip(&var)
                        .filter_map(|(x, v)| v.map(|v| (*x, v)))
                        .unzip();
                    for (k, p) in icfg
                        .patterns
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| &p.item == item)
                    {
                        let series =
                            pattern_series(&cohort, &s, &p.pattern, &self.predicates, opts)?;
                        let rows = plot_data(&sx, &sv, &series, icfg.span)?;
                        out.push(self.write(
                            Stage::Inspect,
                            &format!("{dir}/plot_p{}_pls_{}.csv", k + 1, c + 1),
                            |b| write_plot_csv(&rows, b),
                        )?);
                    }
                }
            }
        }
        Ok(out)
    }
}
