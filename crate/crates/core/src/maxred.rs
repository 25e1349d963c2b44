//! Maximizing the number of deleted edges: necessary-edge contraction plus a
//! pair of minimum arborescences, and the greedy baseline.

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arborescence::{min_in_arborescence, min_out_arborescence, ArborescenceError, Cost, CostedArc, CostedDigraph};
use crate::graph::{is_redundant_with, reachable_mask, scc_mask, EdgeId, Instance, NodeId, StateSearch};
use crate::solution::Solution;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MaxError {
    #[error("instance is not strongly connected")]
    NotStronglyConnected,
    #[error("expected an unlabeled instance (p = 1), got p = {0}")]
    Labeled(u32),
    #[error(transparent)]
    Arborescence(#[from] ArborescenceError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NecessaryReason {
    Required,
    /// The edge is the only one entering this node set.
    UniqueCut(Vec<NodeId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NecessarySet {
    pub edges: Vec<EdgeId>,
    pub reasons: Vec<NecessaryReason>,
    pub mask: Vec<bool>,
}

/// Edges contained in every solution: required edges, and edges `(u, v)`
/// such that `v` is unreachable from `u` without them.
pub fn find_necessary(inst: &Instance) -> NecessarySet {
    let m = inst.m();
    let mut mask = vec![true; m];
    let mut edges = Vec::new();
    let mut reasons = Vec::new();
    let mut necessary = vec![false; m];
    for e in 0..m {
        let ed = *inst.edge(e);
        if ed.required {
            edges.push(e);
            reasons.push(NecessaryReason::Required);
            necessary[e] = true;
            continue;
        }
        mask[e] = false;
        let reach = reachable_mask(inst, &mask, ed.source);
        mask[e] = true;
        if !reach[ed.target] {
            let witness: Vec<NodeId> = (0..inst.n()).filter(|&x| !reach[x]).collect();
            edges.push(e);
            reasons.push(NecessaryReason::UniqueCut(witness));
            necessary[e] = true;
        }
    }
    NecessarySet {
        edges,
        reasons,
        mask: necessary,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxOptions {
    /// Try every single non-necessary edge as a forced first deletion.
    pub initial_deletion: bool,
}

impl Default for MaxOptions {
    fn default() -> Self {
        MaxOptions {
            initial_deletion: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxSolution {
    pub solution: Solution,
    pub necessary: usize,
    /// No valid solution deletes more edges than this.
    pub upper_bound: usize,
    /// The forced first deletion that produced the result, if any.
    pub initial_deletion: Option<EdgeId>,
}

struct PairResult {
    keep: Vec<bool>,
    upper_bound: usize,
}

/// Contracts the necessary-edge components and keeps the necessary edges
/// plus a minimum out-arborescence and a minimum in-arborescence, the second
/// one getting the first one's edges for free.
fn arborescence_pair(inst: &Instance, alive: &[bool]) -> Result<PairResult, MaxError> {
    let (sub, origin) = inst.restrict(alive);
    let nec = find_necessary(&sub);
    let groups = scc_mask(&sub, &nec.mask);
    let group_of = &groups.component_of;
    let k = groups.len();
    let mut has_nec_entry = vec![false; k];
    let mut arcs = Vec::new();
    let mut arc_edge = Vec::new();
    let mut inside_free = 0;
    for (e, ed) in sub.edges().iter().enumerate() {
        let (a, b) = (group_of[ed.source], group_of[ed.target]);
        if a == b {
            if !nec.mask[e] {
                inside_free += 1;
            }
            continue;
        }
        if nec.mask[e] {
            has_nec_entry[b] = true;
        }
        let cost = if nec.mask[e] { Cost::zero() } else { Cost::from_integer(1) };
        arcs.push(CostedArc { source: a, target: b, cost });
        arc_edge.push(e);
    }
    let root = (0..k).find(|&g| !has_nec_entry[g]).unwrap_or(group_of[0]);
    let g = CostedDigraph::new(k, arcs)?;
    let out = min_out_arborescence(&g, root)?;
    let mut recosted: Vec<CostedArc> = g.arcs().to_vec();
    for &a in &out.arcs {
        recosted[a].cost = Cost::zero();
    }
    let g2 = CostedDigraph::new(k, recosted)?;
    let inn = min_in_arborescence(&g2, root)?;

    let mut keep = vec![false; inst.m()];
    for &e in &nec.edges {
        keep[origin[e]] = true;
    }
    for &a in out.arcs.iter().chain(&inn.arcs) {
        keep[origin[arc_edge[a]]] = true;
    }
    let unit_arcs = g.arcs().iter().filter(|a| !a.cost.is_zero()).count();
    let in_tree = out.cost.to_integer().to_usize().unwrap_or(0);
    Ok(PairResult {
        keep,
        upper_bound: unit_arcs - in_tree + inside_free,
    })
}

/// Removes redundant non-required edges, highest id first.
pub(crate) fn prune(inst: &Instance, keep: &mut [bool], protected: &[bool]) {
    let mut search = StateSearch::default();
    for e in (0..inst.m()).rev() {
        if keep[e] && !protected[e] && !inst.edge(e).required && is_redundant_with(&mut search, inst, keep, e) {
            keep[e] = false;
        }
    }
}

/// The arborescence-pair approximation for maximum deletions.
pub fn solve_max(inst: &Instance, options: MaxOptions) -> Result<MaxSolution, MaxError> {
    if inst.p() != 1 {
        return Err(MaxError::Labeled(inst.p()));
    }
    if !inst.is_strongly_connected() {
        return Err(MaxError::NotStronglyConnected);
    }
    let all = vec![true; inst.m()];
    let base = arborescence_pair(inst, &all)?;
    let necessary = find_necessary(inst);
    let no_protection = vec![false; inst.m()];
    let finish = |mut keep: Vec<bool>| {
        prune(inst, &mut keep, &no_protection);
        keep
    };
    let mut best_keep = finish(base.keep);
    let mut best_choice = None;
    if options.initial_deletion {
        let candidates: Vec<EdgeId> = (0..inst.m()).filter(|&e| !necessary.mask[e]).collect();
        let results: Vec<(usize, usize, Vec<bool>)> = candidates
            .par_iter()
            .enumerate()
            .filter_map(|(idx, &f)| {
                let mut alive = all.clone();
                alive[f] = false;
                let r = arborescence_pair(inst, &alive).ok()?;
                let keep = finish(r.keep);
                Some((keep.iter().filter(|&&x| x).count(), idx, keep))
            })
            .collect();
        let base_size = best_keep.iter().filter(|&&x| x).count();
        if let Some((size, idx, keep)) = results.into_iter().min_by_key(|(s, i, _)| (*s, *i)) {
            if size < base_size {
                best_keep = keep;
                best_choice = Some(candidates[idx]);
            }
        }
    }
    let solution = Solution::from_mask(inst, &best_keep, None);
    Ok(MaxSolution {
        solution,
        necessary: necessary.edges.len(),
        upper_bound: base.upper_bound,
        initial_deletion: best_choice,
    })
}

/// One pass over `order`, deleting each non-required edge that is redundant
/// at the time it is scanned. A later deletion never makes a kept edge
/// redundant, so the result is maximal.
pub fn greedy_baseline(inst: &Instance, order: &[EdgeId]) -> Result<Solution, MaxError> {
    if !inst.is_strongly_connected() {
        return Err(MaxError::NotStronglyConnected);
    }
    let mut keep = vec![true; inst.m()];
    let mut search = StateSearch::default();
    for &e in order {
        if !inst.edge(e).required && is_redundant_with(&mut search, inst, &keep, e) {
            keep[e] = false;
        }
    }
    Ok(Solution::from_mask(inst, &keep, None))
}
