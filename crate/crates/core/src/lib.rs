//! Dynamic multi feature-class Gaussian process models.
//!
//! One low-rank Gaussian-process latent space over the shape, rigid pose and
//! intensity of several articulating objects. The crate covers
//!
//! - [`geometry`]: meshes, volumes, rigid transforms and feature fields;
//! - [`pose`]: Procrustes/GPA and the energy displacement representation;
//! - [`model`]: building, sampling, marginalising, conditioning and permuting;
//! - [`synthetic`]: the lollipop-joint data generator, renderer and DRRs;
//! - [`fitting`]: Metropolis-Hastings fitting with local and global filters;
//! - [`metrics`]: correlations, surface distances, specificity and generality.

pub mod error;
pub mod fitting;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod pose;
pub mod synthetic;

pub use error::{Error, Result};
pub use geometry::{
    FeatureField, MultiObjectReference, Point3, RigidTransform, TetMesh, TriMesh, Volume3,
};
pub use model::{Coefficients, DmfcGpm, JointInstance, PoseCoding, TrainingSet};

/// Crate version embedded in written manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
