//! Contextual stochastic block model sampling and graph attention analysis.

pub mod attention;
pub mod classifiers;
pub mod cli;
pub mod csbm;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod metrics;
pub mod numerics;

pub use error::{Error, Result};
pub use graph::{Features, Graph, LabeledGraph};
pub use numerics::RngStream;
