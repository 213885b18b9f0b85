//! Zero-shot sign recognition: hand-skeleton features, an optional
//! snippet-sequence channel, and a learned projection into a class
//! embedding space scored by cosine similarity.

pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod model;
pub mod neural;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
pub use eval::{EvalConfig, ProtocolReport, RunResult};
pub use features::FeatureConfig;
pub use io::Dataset;
pub use model::{ClassEmbedding, EmbeddingSet, FeatureVector, FrameSkeleton, HandFrame, Point3, Protocol, SignSample};
pub use pipeline::{DeepChannelConfig, Prediction, TrainConfig, ZslModel};
