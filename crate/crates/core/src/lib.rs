//! Power delay profiles from swept-frequency channel data, and their
//! segmentation into multipath clusters.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the scalar to `f64`, which is what the CLI
//! uses.
//!
//! Pipeline: [`synth`] or measured sweeps → [`transform`] (windowed inverse
//! DFT, ensemble PDP, noise floor) → [`kmeans`] and [`sparse`] clustering →
//! [`fit`] of the decay constants.

pub mod error;
pub mod fit;
pub mod kmeans;
pub mod partition;
pub mod scalar;
pub mod scenario;
pub mod sparse;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
pub use partition::{evaluate_onsets, evaluate_partition, ClusterPartition, Method, PartitionMetrics, Segment};
pub use scalar::Real;

pub type Ctf = transform::ChannelTransferFunction<f64>;
pub type Cir = transform::ChannelImpulseResponse<f64>;
pub type Pdp = transform::PowerDelayProfile<f64>;
pub type Grid = transform::FrequencyGrid<f64>;
pub type SvParams = synth::SvParams<f64>;
pub type SvRealization = synth::SvRealization<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type SparseConfig = sparse::SparseConfig<f64>;
pub type SolverConfig = sparse::SolverConfig<f64>;
pub type Reconstruction = sparse::ReconstructionResult<f64>;
pub type FeatureConfig = kmeans::FeatureConfig<f64>;
pub type KmeansResult = kmeans::KmeansResult<f64>;
pub type SvFit = fit::SvFit<f64>;
