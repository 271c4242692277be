//! Speaker-verification back-end on i-vectors: inter-dataset variability
//! compensation, LDA, length-normalized Gaussian PLDA, S-norm and detection
//! metrics, plus a synthetic two-domain generator and an experiment harness.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod gplda;
pub mod harness;
pub mod idv;
pub mod lda;
pub mod linalg;
pub mod metrics;
pub mod par;
mod persist;
pub mod scorenorm;
pub mod scores;

pub use dataset::{Dataset, Domain, GeneratorConfig, IVector, Trial, TrialLabel};
pub use error::{Error, Result};
pub use gplda::PldaModel;
pub use idv::{IdvTransform, IdvVariant};
pub use lda::LdaTransform;
pub use scores::{ScoreEntry, ScoreKind, ScoreSet};
