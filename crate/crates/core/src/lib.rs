//! Approximate minimum equivalent digraphs and p-ary transitive reductions.

pub mod arborescence;
pub mod bounds;
pub mod credit;
pub mod format;
pub mod gen;
pub mod graph;
pub mod matching;
pub mod maxred;
pub mod minred;
pub mod oracle;
pub mod pary;
pub mod solution;

pub use graph::{Edge, EdgeId, GraphError, Instance, NodeId};
pub use solution::Solution;
