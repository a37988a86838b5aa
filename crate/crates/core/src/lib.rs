//! Pairwise argument relation prediction with a dual-tower multi-scale
//! convolution network over sentence-pair embeddings.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod cropping;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod metrics;
pub mod model;
pub mod training;

pub use config::RunConfig;
pub use corpus::{Document, LabelMatrix, LabelSpace, Relation};
pub use encoder::{EncoderBackend, RelationshipTensor, ToyBackend};
pub use error::{Error, Result};
pub use experiment::Variant;
pub use fusion::{confidence_margin, fuse, FusedPrediction, PredictionMode};
pub use metrics::{macro_f1, ColumnSpec, MetricsReport};
pub use model::{BranchLogits, DmonParams};
pub use training::TrainConfig;
