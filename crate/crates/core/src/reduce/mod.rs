//! Linear reductions of feature matrices: PCA and univariate-response PLS.

mod pca;
mod pls;

pub use pca::{pca_fit_transform, PcaModel};
pub use pls::{one_se_rule, pls_fit, pls_scores, rmsep_curve, select_m, PlsModel, RmsepMode};
