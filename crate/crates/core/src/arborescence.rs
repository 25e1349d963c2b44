//! Minimum-cost rooted arborescences (Chu–Liu/Edmonds) with dual cuts.
//!
//! Each round picks, for every non-root node of the current contracted
//! graph, its cheapest entering arc, records that price as the dual value of
//! the node set it stands for, and subtracts it from all entering arcs. Zero
//! cycles are contracted and the process repeats; the dual values sum to the
//! optimum cost.

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

pub type Cost = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArborescenceError {
    #[error("node {0} is not reachable from the root")]
    Unreachable(NodeId),
    #[error("arc {0} has a negative cost")]
    NegativeCost(usize),
    #[error("node {node} is out of range for {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostedArc {
    pub source: NodeId,
    pub target: NodeId,
    pub cost: Cost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostedDigraph {
    n: usize,
    arcs: Vec<CostedArc>,
}

impl CostedDigraph {
    pub fn new(n: usize, arcs: Vec<CostedArc>) -> Result<Self, ArborescenceError> {
        for (i, a) in arcs.iter().enumerate() {
            if a.cost < Cost::zero() {
                return Err(ArborescenceError::NegativeCost(i));
            }
            for node in [a.source, a.target] {
                if node >= n {
                    return Err(ArborescenceError::NodeOutOfRange { node, n });
                }
            }
        }
        Ok(CostedDigraph { n, arcs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[CostedArc] {
        &self.arcs
    }

    pub fn reversed(&self) -> CostedDigraph {
        CostedDigraph {
            n: self.n,
            arcs: self
                .arcs
                .iter()
                .map(|a| CostedArc {
                    source: a.target,
                    target: a.source,
                    cost: a.cost,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualCut {
    /// The node set; the cut is the set of arcs entering it (leaving it for
    /// in-arborescences).
    pub nodes: Vec<NodeId>,
    pub y: Cost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arborescence {
    pub root: NodeId,
    /// Arc indices into the input graph, sorted.
    pub arcs: Vec<usize>,
    pub direction: Direction,
    pub cost: Cost,
    pub dual_cuts: Vec<DualCut>,
}

impl Arborescence {
    pub fn dual_total(&self) -> Cost {
        self.dual_cuts.iter().map(|c| c.y).sum()
    }
}

struct Level {
    /// Original node -> node of this level.
    comp: Vec<usize>,
    size: usize,
    /// Chosen entering arc (original index) of each node of this level.
    chosen: Vec<usize>,
    cycles: Vec<Vec<usize>>,
}

/// Minimum-cost spanning out-arborescence rooted at `root`.
pub fn min_out_arborescence(g: &CostedDigraph, root: NodeId) -> Result<Arborescence, ArborescenceError> {
    if root >= g.n {
        return Err(ArborescenceError::NodeOutOfRange { node: root, n: g.n });
    }
    let n = g.n;
    // ties go to the lowest (source, target)
    let mut order: Vec<usize> = (0..g.arcs.len()).filter(|&i| g.arcs[i].source != g.arcs[i].target).collect();
    order.sort_by_key(|&i| (g.arcs[i].source, g.arcs[i].target, i));
    let mut reduced: Vec<Cost> = g.arcs.iter().map(|a| a.cost).collect();
    let mut comp: Vec<usize> = (0..n).collect();
    let mut size = n;
    let mut levels: Vec<Level> = Vec::new();
    let mut dual_cuts = Vec::new();
    loop {
        let root_c = comp[root];
        let mut chosen = vec![usize::MAX; size];
        for &i in &order {
            let a = &g.arcs[i];
            let (u, v) = (comp[a.source], comp[a.target]);
            if u == v || v == root_c {
                continue;
            }
            if chosen[v] == usize::MAX || reduced[i] < reduced[chosen[v]] {
                chosen[v] = i;
            }
        }
        let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); size];
        for v in 0..n {
            members[comp[v]].push(v);
        }
        for c in 0..size {
            if c != root_c && chosen[c] == usize::MAX {
                return Err(ArborescenceError::Unreachable(members[c][0]));
            }
        }
        let mut price = vec![Cost::zero(); size];
        for c in 0..size {
            if c != root_c {
                price[c] = reduced[chosen[c]];
                if !price[c].is_zero() {
                    dual_cuts.push(DualCut {
                        nodes: members[c].clone(),
                        y: price[c],
                    });
                }
            }
        }
        for &i in &order {
            let a = &g.arcs[i];
            let (u, v) = (comp[a.source], comp[a.target]);
            if u != v && v != root_c {
                reduced[i] -= price[v];
            }
        }
        // cycles of the chosen parent pointers
        let parent = |c: usize| comp[g.arcs[chosen[c]].source];
        let mut state = vec![0u8; size]; // 0 new, 1 on current walk, 2 done
        state[root_c] = 2;
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        for start in 0..size {
            let mut walk = Vec::new();
            let mut c = start;
            while state[c] == 0 {
                state[c] = 1;
                walk.push(c);
                c = parent(c);
            }
            if state[c] == 1 {
                let pos = walk.iter().position(|&x| x == c).unwrap();
                cycles.push(walk[pos..].to_vec());
            }
            for w in walk {
                state[w] = 2;
            }
        }
        if cycles.is_empty() {
            levels.push(Level {
                comp: comp.clone(),
                size,
                chosen,
                cycles,
            });
            break;
        }
        let mut new_id = vec![usize::MAX; size];
        let mut next = 0;
        for cycle in &cycles {
            for &c in cycle {
                new_id[c] = next;
            }
            next += 1;
        }
        for id in new_id.iter_mut() {
            if *id == usize::MAX {
                *id = next;
                next += 1;
            }
        }
        levels.push(Level {
            comp: comp.clone(),
            size,
            chosen,
            cycles,
        });
        for c in comp.iter_mut() {
            *c = new_id[*c];
        }
        size = next;
    }

    // expand from the last level down
    let last = levels.pop().unwrap();
    let root_last = last.comp[root];
    let mut picked: Vec<usize> = (0..last.size).filter(|&c| c != root_last).map(|c| last.chosen[c]).collect();
    while let Some(level) = levels.pop() {
        let mut in_cycle = vec![usize::MAX; level.size];
        for (k, cycle) in level.cycles.iter().enumerate() {
            for &c in cycle {
                in_cycle[c] = k;
            }
        }
        // the picked arc entering each cycle decides which cycle arc to drop
        let mut entry = vec![usize::MAX; level.cycles.len()];
        for &i in &picked {
            let t = level.comp[g.arcs[i].target];
            if in_cycle[t] != usize::MAX && level.comp[g.arcs[i].source] != t {
                let k = in_cycle[t];
                let s = level.comp[g.arcs[i].source];
                if in_cycle[s] != k {
                    entry[k] = t;
                }
            }
        }
        for (k, cycle) in level.cycles.iter().enumerate() {
            for &c in cycle {
                if c != entry[k] {
                    picked.push(level.chosen[c]);
                }
            }
        }
    }
    picked.sort_unstable();
    let cost = picked.iter().map(|&i| g.arcs[i].cost).sum();
    Ok(Arborescence {
        root,
        arcs: picked,
        direction: Direction::Out,
        cost,
        dual_cuts,
    })
}

/// Minimum-cost spanning in-arborescence (all nodes reach `root`).
pub fn min_in_arborescence(g: &CostedDigraph, root: NodeId) -> Result<Arborescence, ArborescenceError> {
    let mut a = min_out_arborescence(&g.reversed(), root)?;
    a.direction = Direction::In;
    Ok(a)
}

/// Checks the structural arborescence property of `arcs`.
pub fn is_arborescence(g: &CostedDigraph, root: NodeId, arcs: &[usize], direction: Direction) -> bool {
    let n = g.n;
    if arcs.len() + 1 != n {
        return false;
    }
    let mut parent = vec![usize::MAX; n];
    for &i in arcs {
        let a = &g.arcs[i];
        let (from, to) = match direction {
            Direction::Out => (a.source, a.target),
            Direction::In => (a.target, a.source),
        };
        if to == root || parent[to] != usize::MAX {
            return false;
        }
        parent[to] = from;
    }
    // every node must reach the root by parent pointers
    for start in 0..n {
        let mut v = start;
        let mut steps = 0;
        while v != root {
            v = parent[v];
            steps += 1;
            if v == usize::MAX || steps > n {
                return false;
            }
        }
    }
    true
}
