//! Exact solvers for small instances, used as ground truth.
//!
//! Every edge that is not redundant in `E` belongs to every solution; the
//! remaining "free" edges are decided by branch and bound. Deleting an edge
//! is allowed only when it is redundant in the current edge set, which keeps
//! the closure unchanged at every node of the search tree.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::lower_bound;
use crate::graph::{is_redundant_with, is_valid_mask, EdgeId, Instance, StateSearch};
use crate::solution::Solution;

pub const DEFAULT_BUDGET: usize = 24;
const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{free} free edges exceed the budget of {budget}")]
    BudgetExceeded { free: usize, budget: usize },
}

/// Edges outside `D` that are redundant in `E`, ordered for branching.
pub fn free_edges(inst: &Instance) -> Vec<EdgeId> {
    let all = vec![true; inst.m()];
    let mut search = StateSearch::default();
    let mut free: Vec<EdgeId> = (0..inst.m())
        .filter(|&e| !inst.edge(e).required && is_redundant_with(&mut search, inst, &all, e))
        .collect();
    // edges at high-degree ends first: they take part in the most cuts
    let weight = |e: EdgeId| {
        let ed = inst.edge(e);
        inst.out_degree(ed.source) + inst.in_degree(ed.target)
    };
    free.sort_by_key(|&e| (std::cmp::Reverse(weight(e)), e));
    free
}

struct Search<'a> {
    inst: &'a Instance,
    free: &'a [EdgeId],
    /// Minimum size over the whole search, shared across subtrees.
    shared: &'a AtomicUsize,
    root_bound: usize,
    has_in: Vec<bool>,
    has_out: Vec<bool>,
    rs: StateSearch,
    best: usize,
    best_mask: Option<Vec<bool>>,
}

impl Search<'_> {
    /// Lower bound for any completion: fixed edges, plus one more edge for
    /// every node whose entering (or leaving) edges are all undecided.
    fn bound(&self, mask: &[bool], depth: usize) -> usize {
        let inst = self.inst;
        let undecided = &self.free[depth..];
        let mut is_undecided = vec![false; inst.m()];
        for &e in undecided {
            is_undecided[e] = true;
        }
        let fixed = (0..inst.m()).filter(|&e| mask[e] && !is_undecided[e]).count();
        let mut need_in = 0;
        let mut need_out = 0;
        for v in 0..inst.n() {
            if self.has_in[v] && !inst.in_edges(v).iter().any(|&e| mask[e] && !is_undecided[e]) {
                need_in += 1;
            }
            if self.has_out[v] && !inst.out_edges(v).any(|e| mask[e] && !is_undecided[e]) {
                need_out += 1;
            }
        }
        (fixed + need_in.max(need_out)).max(self.root_bound)
    }

    fn run(&mut self, mask: &mut Vec<bool>, depth: usize) {
        let b = self.bound(mask, depth);
        if b >= self.best || b > self.shared.load(Ordering::Relaxed) {
            return;
        }
        if depth == self.free.len() {
            let size = mask.iter().filter(|&&x| x).count();
            self.best = size;
            self.best_mask = Some(mask.clone());
            self.shared.fetch_min(size, Ordering::Relaxed);
            return;
        }
        let e = self.free[depth];
        if is_redundant_with(&mut self.rs, self.inst, mask, e) {
            mask[e] = false;
            self.run(mask, depth + 1);
            mask[e] = true;
            if self.best == self.root_bound {
                return;
            }
        }
        self.run(mask, depth + 1);
    }
}

/// Minimum valid reduction by branch and bound.
pub fn exact_min(inst: &Instance, budget: usize) -> Result<Solution, OracleError> {
    let free = free_edges(inst);
    if free.len() > budget {
        return Err(OracleError::BudgetExceeded {
            free: free.len(),
            budget,
        });
    }
    let root_bound = if inst.is_strongly_connected() {
        lower_bound(&inst.unlabeled()).map(|c| c.bound()).unwrap_or(0)
    } else {
        0
    };
    let has_in: Vec<bool> = (0..inst.n()).map(|v| inst.in_degree(v) > 0).collect();
    let has_out: Vec<bool> = (0..inst.n()).map(|v| inst.out_degree(v) > 0).collect();
    let shared = AtomicUsize::new(inst.m());

    // split on the first few free edges; each prefix is a subtree
    let split = free.len().min(3);
    let mut prefixes: Vec<Vec<bool>> = vec![vec![true; inst.m()]];
    let mut rs = StateSearch::default();
    for &e in &free[..split] {
        let mut next = Vec::new();
        for p in prefixes {
            if is_redundant_with(&mut rs, inst, &p, e) {
                let mut d = p.clone();
                d[e] = false;
                next.push(d);
            }
            next.push(p);
        }
        prefixes = next;
    }
    let results: Vec<Option<(usize, Vec<bool>)>> = prefixes
        .into_par_iter()
        .map(|mut mask| {
            let mut s = Search {
                inst,
                free: &free,
                shared: &shared,
                root_bound,
                has_in: has_in.clone(),
                has_out: has_out.clone(),
                rs: StateSearch::default(),
                best: inst.m() + 1,
                best_mask: None,
            };
            s.run(&mut mask, split);
            s.best_mask.map(|m| (s.best, m))
        })
        .collect();
    let (_, mask) = results
        .into_iter()
        .flatten()
        .min_by_key(|(size, _)| *size)
        .expect("the full edge set is always a solution");
    Ok(Solution::from_mask(inst, &mask, Some(root_bound)))
}

/// Maximum number of deletions, via `exact_min`.
pub fn exact_max(inst: &Instance, budget: usize) -> Result<Solution, OracleError> {
    exact_min(inst, budget)
}

/// Plain subset enumeration over the free edges (at most 20 of them).
pub fn exact_min_exhaustive(inst: &Instance) -> Result<Solution, OracleError> {
    let free = free_edges(inst);
    if free.len() > EXHAUSTIVE_LIMIT {
        return Err(OracleError::BudgetExceeded {
            free: free.len(),
            budget: EXHAUSTIVE_LIMIT,
        });
    }
    let mut best: Option<(u32, u32)> = None;
    let mut mask = vec![true; inst.m()];
    for subset in 0u32..(1u32 << free.len()) {
        let deletions = subset.count_ones();
        if best.is_some_and(|(d, _)| d >= deletions) {
            continue;
        }
        for (i, &e) in free.iter().enumerate() {
            mask[e] = subset >> i & 1 == 0;
        }
        if is_valid_mask(inst, &mask).valid {
            best = Some((deletions, subset));
        }
    }
    let (_, subset) = best.unwrap_or((0, 0));
    for (i, &e) in free.iter().enumerate() {
        mask[e] = subset >> i & 1 == 0;
    }
    Ok(Solution::from_mask(inst, &mask, None))
}
