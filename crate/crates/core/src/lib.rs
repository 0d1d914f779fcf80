//! Deterministic simulator of federated averaging augmented by a server-side
//! model trained on generated data.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense softmax classifier, backpropagation and mini-batch SGD.
//! - [`data`]: synthetic Gaussian-cluster datasets, Dirichlet label-skew
//!   partitioning and label-distribution heterogeneity.
//! - [`generator`]: label selection, the imperfect sample generator and the
//!   capped generated pool.
//! - [`protocol`]: client sampling, local training, augmented training, the
//!   weighted aggregation rule and full experiment runs.
//! - [`costmodel`]: simulated round latency and energy.
//!
//! Every random choice is drawn from a stream derived from the experiment
//! seed (see [`rng`]), so a run is a pure function of its configuration,
//! whether clients train serially or in parallel.

pub mod costmodel;
pub mod data;
pub mod generator;
pub mod nn;
pub mod protocol;
pub mod rng;

pub use costmodel::{round_cost, CostConfig, RoundCost, RoundMetrics, RoundWorkload};
pub use data::{LabelHistogram, LabeledDataset, PartitionPlan, Provenance};
pub use generator::{GenPool, GeneratorConfig};
pub use nn::{Gradient, ModelParams, TrainSpec};
pub use protocol::{
    run_experiment, AggregationPolicy, ClientState, ExperimentConfig, Mode, ProtocolError, ServerState,
    Simulation,
};
