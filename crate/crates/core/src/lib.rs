//! Conditional independence testing between two vertex-matched graphs.
//!
//! The crate samples edge-correlated stochastic block model pairs, computes
//! graph correlation statistics (Pearson, distance correlation, multiscale
//! graph correlation), builds null distributions by permuting edges within
//! blocks, estimates communities jointly from both graphs and turns all of
//! that into p-values and Monte Carlo power curves.

pub mod community;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod inference;
pub mod io;
pub mod model;
pub mod permutation;
pub mod rng;
pub mod samplers;
pub mod statistics;

pub use error::{Error, Result};
pub use graph::{AdjacencyMatrix, CommunityAssignment, DistanceMatrix};
pub use statistics::{GCorrStatistic, Method};
