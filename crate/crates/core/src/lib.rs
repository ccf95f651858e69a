//! Near-isometric point pattern matching.
//!
//! A template point set is located inside a larger scene by MAP inference on
//! a graphical model whose edges form a squared cycle: a Hamiltonian cycle
//! over the template plus every distance-two chord. That graph is globally
//! rigid, and its triangles form a single cycle of cliques, so max-product
//! belief propagation on the clique chain costs `O(n m^3)` per iteration.
//!
//! The crate also carries the exact baselines used to check it: junction-tree
//! inference on a random 3-tree (`O(n m^4)`) and exhaustive enumeration, plus
//! the synthetic benchmark and landmark-sequence harness.

pub mod bp;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod jt;
pub mod matcher;
pub mod oracle;
pub mod pointfile;
pub mod potentials;
pub mod result;

pub use bp::{BpConfig, ConvergenceConfig, Schedule};
pub use error::{MatchError, Result};
pub use geometry::{
    apply_rigid_transform, distance_matrix, generate_instance, objective_residual, Assignment,
    DistanceMatrix, Instance, Point, PointPattern,
};
pub use graph::{CliqueChain, GraphKind, MatchGraph};
pub use jt::{JtConfig, JunctionTree};
pub use matcher::{run_match, Engine, MatchConfig, MatchOutcome};
pub use potentials::{ClampMode, PotentialMode, PotentialParams};
pub use result::{MatchResult, SCHEMA_VERSION};
