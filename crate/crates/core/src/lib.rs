//! Multi-relational ideal point model for signed-ideology estimation on
//! heterogeneous sender/receiver networks.
//!
//! Each sender gets a latent position `p_i`; each receiver gets, per
//! relation, an image `q_j^(r)` and bias `b_j^(r)`. Training maximizes a
//! weighted sum of per-relation mean log-likelihoods with relation weights
//! re-solved every epoch so that well-fit relations count more.

pub mod checkpoint;
pub mod choice;
pub mod error;
pub mod eval;
pub mod hetgraph;
pub mod model;
pub mod optimizer;
pub mod sampler;
pub mod seed;
pub mod synth;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use hetgraph::{load_edges, read_manifest, Edge, HeteroGraph, HeteroGraphBuilder};
pub use model::{Matrix, ModelParams, TrainConfig};
pub use optimizer::{train, train_with, update_weights, TrainState};
pub use sampler::{RelationSample, SampleSet};
pub use synth::{generate_network, SynthNetwork, SynthSpec};
