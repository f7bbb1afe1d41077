//! Streaming graph coloring: a deterministic multipass (Δ+1)-coloring, its
//! (degree+1)-list-coloring extension, two adversarially robust single-pass
//! colorings, and an adaptive-adversary game harness.

pub mod derand;
pub mod determ;
pub mod error;
pub mod gen;
pub mod graph;
pub mod harness;
pub mod hashing;
pub mod listcolor;
pub mod lowrand;
pub mod metrics;
pub mod robust;
pub mod stream;

pub use error::{Error, Result};
pub use graph::{AdjacencyGraph, Color, Edge, PartialColoring, Vertex};
pub use stream::{MultiPassSource, SpaceCategory, SpaceMeter, StreamToken};
