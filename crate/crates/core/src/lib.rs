//! Feature extraction, prediction and interpretation for categorical action
//! sequences such as the click logs of interactive assessment items.
//!
//! The pipeline:
//!
//! 1. [`seqdata`] ingests sequences and covariates; [`simgen`] can generate
//!    synthetic cohorts with known ground truth instead.
//! 2. [`oss`] computes order-based pairwise dissimilarities, which [`mds`]
//!    embeds in `K` dimensions; [`autoencoder`] learns a second `K`-dim
//!    representation with a GRU sequence autoencoder.
//! 3. [`reduce`] orthogonalises features with PCA and decomposes them
//!    against a target with PLS.
//! 4. [`predict`] measures how well features predict covariates with
//!    ridge-penalised GLMs under a repeated train/validation/test protocol.
//! 5. [`interpret`] ranks sequences along PLS components and tracks action
//!    patterns and covariates along them.
//!
//! [`pipeline`] ties the stages together behind one config file.

pub mod autoencoder;
pub mod error;
pub mod features;
pub mod interpret;
pub mod mds;
pub mod oss;
pub mod pipeline;
pub mod predict;
pub mod reduce;
pub mod seqdata;
pub mod simgen;

pub use error::{Error, ErrorKind, Result};
pub use features::FeatureMatrix;
pub use oss::DissimilarityMatrix;
pub use seqdata::{ActionSequence, Cohort, CovariateTable, Vocabulary};
