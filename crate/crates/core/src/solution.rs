use serde::{Deserialize, Serialize};

use crate::graph::{is_valid_reduction, EdgeId, Instance, ValidityReport};

/// A chosen edge subset with its verification report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    /// Sorted edge ids of the kept edges.
    pub edges: Vec<EdgeId>,
    pub report: ValidityReport,
    /// Lower bound on the optimum size, when one was computed.
    pub lower_bound: Option<usize>,
}

impl Solution {
    pub fn new(inst: &Instance, mut edges: Vec<EdgeId>, lower_bound: Option<usize>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let report = is_valid_reduction(inst, &edges);
        Solution {
            edges,
            report,
            lower_bound,
        }
    }

    pub fn from_mask(inst: &Instance, mask: &[bool], lower_bound: Option<usize>) -> Self {
        let edges = (0..inst.m()).filter(|&e| mask[e]).collect();
        Solution::new(inst, edges, lower_bound)
    }

    pub fn size(&self) -> usize {
        self.edges.len()
    }

    pub fn deletions(&self, inst: &Instance) -> usize {
        inst.m() - self.edges.len()
    }

    pub fn is_valid(&self) -> bool {
        self.report.valid
    }

    pub fn mask(&self, m: usize) -> Vec<bool> {
        crate::graph::mask_of(m, &self.edges)
    }
}
