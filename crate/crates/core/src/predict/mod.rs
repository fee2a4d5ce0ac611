//! Ridge-penalised GLM prediction of covariates from features, evaluated
//! over repeated random train/validation/test splits.

mod metrics;
mod protocol;
mod ridge;

pub use metrics::{auc, osr};
pub use protocol::{
    cumulative_predict, run_replications, run_replications_audited, write_reports_csv,
    write_summary_json, Phase, PredictionReport, ReplicationConfig, SplitPlan,
};
pub use ridge::{fit_ridge, lambda_grid, select_penalty, validation_loss, Family, RidgeGlm};
