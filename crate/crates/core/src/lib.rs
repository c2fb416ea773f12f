//! Low-randomness partition oracle for bounded-degree minor-free graphs.
//!
//! The crate provides a global partitioning procedure built from truncated
//! random-walk diffusion, a local oracle that answers per-vertex queries
//! consistently with it while touching only a bounded neighborhood, the seed
//! machinery both share, and a simulator for comparison-based lower-bound
//! constructions on cycles.

pub mod diffusion;
pub mod error;
pub mod generators;
pub mod graph;
pub mod harness;
pub mod lowerbound;
pub mod oracle;
pub mod partition;
pub mod randomness;

pub use error::{Error, Result};
pub use graph::{Graph, GraphAccess, GraphBuilder, GraphError, Label, OracleHandle, QueryStats};
pub use randomness::{Mode, Params, Phase, SeedBundle};
