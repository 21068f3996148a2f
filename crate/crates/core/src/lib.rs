//! Relationship-preserving synthetic tabular data.
//!
//! The pipeline: infer inter-column relationships (hierarchical, mathematical,
//! temporal) over a table's column descriptions, compress the table down to
//! its independent degrees of freedom, model the compressed rows with a
//! latent-space score-based diffusion model, sample, decompress, and score the
//! result with a six-dimension evaluation framework (accuracy, diversity,
//! consistency, dependency, utility, privacy).
//!
//! Numeric kernels are generic over [`scalar::Scalar`] (f32 or f64); the
//! pipeline-facing aliases below pin the default f64 instantiations.

pub mod checkpoint;
pub mod compress;
pub mod csv_io;
pub mod diffusion;
pub mod embed;
pub mod error;
pub mod fixtures;
pub mod formula;
pub mod gbdt;
pub mod gmm;
pub mod metrics;
pub mod nn;
pub mod relspec;
pub mod rng;
pub mod scalar;
pub mod schema;
pub mod serialize;
pub mod smote;
pub mod split;
pub mod table;
pub mod vae;

pub use error::{CoreError, Result};
pub use scalar::Scalar;

/// Default precision for the end-to-end pipeline.
pub type Real = f64;

pub type LatentMatrix = vae::LatentMatrix<Real>;
pub type VaeModel = vae::VaeModel<Real>;
pub type ScoreModel = diffusion::ScoreModel<Real>;
pub type NoiseSchedule = diffusion::NoiseSchedule<Real>;
pub type GmmModel = gmm::GmmModel<Real>;
pub type EmbeddedMatrix = embed::EmbeddedMatrix<Real>;
