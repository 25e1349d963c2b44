//! Labeled directed graph instances, strong connectivity, and labeled closures.
//!
//! An [`Instance`] is a simple digraph (no self-loops, no parallel edges)
//! whose edges carry a residue modulo `p` and a `required` flag. Edges are
//! stored sorted by `(source, target)`, so the out-edges of a node occupy a
//! contiguous range of edge ids and every traversal in this crate visits
//! neighbors in increasing order.

use std::collections::VecDeque;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub label: u32,
    pub required: bool,
}

impl Edge {
    pub fn new(source: NodeId, target: NodeId, label: u32, required: bool) -> Self {
        Edge {
            source,
            target,
            label,
            required,
        }
    }

    pub fn plain(source: NodeId, target: NodeId) -> Self {
        Edge::new(source, target, 0, false)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("parallel edge {0} -> {1}")]
    ParallelEdge(NodeId, NodeId),
    #[error("modulus {0} is neither 1 nor a prime")]
    NonPrimeModulus(u32),
    #[error("label {label} on edge {from} -> {to} is outside [0, {p})")]
    LabelOutOfRange {
        from: NodeId,
        to: NodeId,
        label: u32,
        p: u32,
    },
    #[error("node {node} is out of range for an instance with {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
}

/// Trial division; the moduli handled here are small.
pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    p: u32,
    edges: Vec<Edge>,
    out_start: Vec<usize>,
    in_start: Vec<usize>,
    in_order: Vec<EdgeId>,
}

impl Instance {
    /// Validates and builds an instance. Edges may be given in any order.
    pub fn new(n: usize, p: u32, edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        if p != 1 && !is_prime(p) {
            return Err(GraphError::NonPrimeModulus(p));
        }
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        for e in &edges {
            for node in [e.source, e.target] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if e.source == e.target {
                return Err(GraphError::SelfLoop(e.source));
            }
            if e.label >= p {
                return Err(GraphError::LabelOutOfRange {
                    from: e.source,
                    to: e.target,
                    label: e.label,
                    p,
                });
            }
        }
        edges.sort_by_key(|e| (e.source, e.target));
        for w in edges.windows(2) {
            if w[0].source == w[1].source && w[0].target == w[1].target {
                return Err(GraphError::ParallelEdge(w[0].source, w[0].target));
            }
        }
        Ok(Self::from_sorted(n, p, edges))
    }

    fn from_sorted(n: usize, p: u32, edges: Vec<Edge>) -> Self {
        let mut out_start = vec![0usize; n + 1];
        let mut in_start = vec![0usize; n + 1];
        for e in &edges {
            out_start[e.source + 1] += 1;
            in_start[e.target + 1] += 1;
        }
        for i in 0..n {
            out_start[i + 1] += out_start[i];
            in_start[i + 1] += in_start[i];
        }
        let mut fill = in_start.clone();
        let mut in_order = vec![0; edges.len()];
        // edges are sorted by source, so each in-list comes out sorted by source too
        for (id, e) in edges.iter().enumerate() {
            in_order[fill[e.target]] = id;
            fill[e.target] += 1;
        }
        Instance {
            n,
            p,
            edges,
            out_start,
            in_start,
            in_order,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn out_edges(&self, u: NodeId) -> Range<EdgeId> {
        self.out_start[u]..self.out_start[u + 1]
    }

    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_order[self.in_start[v]..self.in_start[v + 1]]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_start[u + 1] - self.out_start[u]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_start[v + 1] - self.in_start[v]
    }

    pub fn find_edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let range = self.out_edges(u);
        let slice = &self.edges[range.clone()];
        slice
            .binary_search_by_key(&v, |e| e.target)
            .ok()
            .map(|i| range.start + i)
    }

    pub fn required_edges(&self) -> Vec<EdgeId> {
        (0..self.m()).filter(|&e| self.edges[e].required).collect()
    }

    pub fn required_count(&self) -> usize {
        self.edges.iter().filter(|e| e.required).count()
    }

    /// The same digraph and required set with all labels dropped (`p = 1`).
    pub fn unlabeled(&self) -> Instance {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.source, e.target, 0, e.required))
            .collect();
        Instance::from_sorted(self.n, 1, edges)
    }

    /// Same edges, required flags replaced.
    pub fn with_required(&self, required: &[bool]) -> Instance {
        let edges = self
            .edges
            .iter()
            .zip(required)
            .map(|(e, &r)| Edge::new(e.source, e.target, e.label, r))
            .collect();
        Instance::from_sorted(self.n, self.p, edges)
    }

    /// The sub-instance on `nodes` (sorted or not). Returns the instance and,
    /// for each of its edges, the id of the corresponding edge here.
    pub fn induced(&self, nodes: &[NodeId]) -> (Instance, Vec<EdgeId>) {
        let mut local = vec![usize::MAX; self.n];
        let mut sorted = nodes.to_vec();
        sorted.sort_unstable();
        for (i, &v) in sorted.iter().enumerate() {
            local[v] = i;
        }
        let mut edges = Vec::new();
        let mut origin = Vec::new();
        for &u in &sorted {
            for e in self.out_edges(u) {
                let ed = &self.edges[e];
                if local[ed.target] != usize::MAX {
                    edges.push(Edge::new(local[u], local[ed.target], ed.label, ed.required));
                    origin.push(e);
                }
            }
        }
        (Instance::from_sorted(sorted.len(), self.p, edges), origin)
    }

    /// Sub-instance keeping only the edges in `keep` (same node set).
    pub fn restrict(&self, keep: &[bool]) -> (Instance, Vec<EdgeId>) {
        let mut edges = Vec::new();
        let mut origin = Vec::new();
        for (id, e) in self.edges.iter().enumerate() {
            if keep[id] {
                edges.push(*e);
                origin.push(id);
            }
        }
        (Instance::from_sorted(self.n, self.p, edges), origin)
    }

    pub fn reversed(&self) -> Instance {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.target, e.source, e.label, e.required))
            .collect::<Vec<_>>();
        Instance::new(self.n, self.p, edges).expect("reversal preserves simplicity")
    }

    pub fn is_strongly_connected(&self) -> bool {
        is_strongly_connected_mask(self, &vec![true; self.m()])
    }
}

pub fn mask_of(m: usize, ids: &[EdgeId]) -> Vec<bool> {
    let mut mask = vec![false; m];
    for &e in ids {
        mask[e] = true;
    }
    mask
}

pub fn ids_of(mask: &[bool]) -> Vec<EdgeId> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

/// Edges entering `set` from outside ("iota").
pub fn in_cut(inst: &Instance, set: &[NodeId]) -> Vec<EdgeId> {
    let inside = node_mask(inst.n(), set);
    let mut cut: Vec<EdgeId> = set
        .iter()
        .flat_map(|&v| inst.in_edges(v).iter().copied())
        .filter(|&e| !inside[inst.edge(e).source])
        .collect();
    cut.sort_unstable();
    cut.dedup();
    cut
}

/// Edges leaving `set`.
pub fn out_cut(inst: &Instance, set: &[NodeId]) -> Vec<EdgeId> {
    let inside = node_mask(inst.n(), set);
    let mut cut: Vec<EdgeId> = set
        .iter()
        .flat_map(|&u| inst.out_edges(u))
        .filter(|&e| !inside[inst.edge(e).target])
        .collect();
    cut.sort_unstable();
    cut.dedup();
    cut
}

pub(crate) fn node_mask(n: usize, set: &[NodeId]) -> Vec<bool> {
    let mut inside = vec![false; n];
    for &v in set {
        inside[v] = true;
    }
    inside
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccDecomposition {
    pub component_of: Vec<usize>,
    /// Components in topological order of the condensation; members sorted.
    pub components: Vec<Vec<NodeId>>,
}

impl SccDecomposition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Reusable buffers for iterative Tarjan.
#[derive(Debug, Default)]
pub(crate) struct TarjanWorkspace {
    index: Vec<usize>,
    low: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<NodeId>,
    call: Vec<(NodeId, EdgeId)>,
    /// Component of each node, numbered in completion order (sinks first).
    pub comp: Vec<usize>,
    pub comp_count: usize,
}

impl TarjanWorkspace {
    /// Runs Tarjan over the out-adjacency of `inst`, skipping nodes with
    /// `!node_alive(v)` and edges with `!edge_alive(e)`. Dead nodes get
    /// component `usize::MAX`.
    pub fn run(
        &mut self,
        inst: &Instance,
        node_alive: impl Fn(NodeId) -> bool,
        edge_alive: impl Fn(EdgeId) -> bool,
    ) {
        let n = inst.n();
        const UNSEEN: usize = usize::MAX;
        self.index.clear();
        self.index.resize(n, UNSEEN);
        self.low.clear();
        self.low.resize(n, 0);
        self.on_stack.clear();
        self.on_stack.resize(n, false);
        self.comp.clear();
        self.comp.resize(n, usize::MAX);
        self.stack.clear();
        self.call.clear();
        self.comp_count = 0;
        let mut counter = 0usize;
        for root in 0..n {
            if self.index[root] != UNSEEN || !node_alive(root) {
                continue;
            }
            self.index[root] = counter;
            self.low[root] = counter;
            counter += 1;
            self.stack.push(root);
            self.on_stack[root] = true;
            self.call.push((root, inst.out_edges(root).start));
            while let Some(&mut (u, ref mut pos)) = self.call.last_mut() {
                let end = inst.out_edges(u).end;
                let mut descended = false;
                while *pos < end {
                    let e = *pos;
                    *pos += 1;
                    if !edge_alive(e) {
                        continue;
                    }
                    let v = inst.edge(e).target;
                    if !node_alive(v) {
                        continue;
                    }
                    if self.index[v] == UNSEEN {
                        self.index[v] = counter;
                        self.low[v] = counter;
                        counter += 1;
                        self.stack.push(v);
                        self.on_stack[v] = true;
                        self.call.push((v, inst.out_edges(v).start));
                        descended = true;
                        break;
                    } else if self.on_stack[v] && self.index[v] < self.low[u] {
                        self.low[u] = self.index[v];
                    }
                }
                if descended {
                    continue;
                }
                self.call.pop();
                if self.low[u] == self.index[u] {
                    loop {
                        let w = self.stack.pop().expect("tarjan stack");
                        self.on_stack[w] = false;
                        self.comp[w] = self.comp_count;
                        if w == u {
                            break;
                        }
                    }
                    self.comp_count += 1;
                }
                if let Some(&(parent, _)) = self.call.last() {
                    if self.low[u] < self.low[parent] {
                        self.low[parent] = self.low[u];
                    }
                }
            }
        }
    }

    /// Topological rank of a completion-order component (sources get 0).
    pub fn topo_rank(&self, comp: usize) -> usize {
        self.comp_count - 1 - comp
    }
}

fn decomposition_from(ws: &TarjanWorkspace, n: usize) -> SccDecomposition {
    let mut components = vec![Vec::new(); ws.comp_count];
    let mut component_of = vec![0; n];
    for v in 0..n {
        let c = ws.topo_rank(ws.comp[v]);
        component_of[v] = c;
        components[c].push(v);
    }
    SccDecomposition {
        component_of,
        components,
    }
}

/// Strongly connected components of the whole instance.
pub fn scc(inst: &Instance) -> SccDecomposition {
    let mut ws = TarjanWorkspace::default();
    ws.run(inst, |_| true, |_| true);
    decomposition_from(&ws, inst.n())
}

/// Strongly connected components of `(V, subset)`.
pub fn scc_of_subset(inst: &Instance, subset: &[EdgeId]) -> SccDecomposition {
    let mask = mask_of(inst.m(), subset);
    scc_mask(inst, &mask)
}

pub fn scc_mask(inst: &Instance, mask: &[bool]) -> SccDecomposition {
    let mut ws = TarjanWorkspace::default();
    ws.run(inst, |_| true, |e| mask[e]);
    decomposition_from(&ws, inst.n())
}

/// Nodes reachable from `start` using edges in `mask`.
pub fn reachable_mask(inst: &Instance, mask: &[bool], start: NodeId) -> Vec<bool> {
    let mut seen = vec![false; inst.n()];
    let mut queue = VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        for e in inst.out_edges(u) {
            let v = inst.edge(e).target;
            if mask[e] && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Nodes that reach `target` using edges in `mask`.
pub fn coreachable_mask(inst: &Instance, mask: &[bool], target: NodeId) -> Vec<bool> {
    let mut seen = vec![false; inst.n()];
    let mut queue = VecDeque::new();
    seen[target] = true;
    queue.push_back(target);
    while let Some(v) = queue.pop_front() {
        for &e in inst.in_edges(v) {
            let u = inst.edge(e).source;
            if mask[e] && !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

pub fn is_strongly_connected_mask(inst: &Instance, mask: &[bool]) -> bool {
    if inst.n() <= 1 {
        return true;
    }
    reachable_mask(inst, mask, 0).iter().all(|&b| b)
        && coreachable_mask(inst, mask, 0).iter().all(|&b| b)
}

/// Breadth-first search over `(node, residue)` states, reusing its buffers.
#[derive(Debug, Default)]
pub(crate) struct StateSearch {
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<usize>,
}

impl StateSearch {
    fn begin(&mut self, states: usize) {
        if self.stamp.len() < states {
            self.stamp.resize(states, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.queue.clear();
    }

    /// Is there a path `from -> to` with characteristic `residue` using
    /// edges in `mask`, never using `skip`?
    pub fn realizes(
        &mut self,
        inst: &Instance,
        mask: &[bool],
        from: NodeId,
        to: NodeId,
        residue: u32,
        skip: Option<EdgeId>,
    ) -> bool {
        let p = inst.p() as usize;
        self.begin(inst.n() * p);
        let goal = to * p + residue as usize;
        let start = from * p;
        if start == goal {
            return true;
        }
        self.stamp[start] = self.epoch;
        self.queue.push(start);
        let mut head = 0;
        while head < self.queue.len() {
            let s = self.queue[head];
            head += 1;
            let (u, q) = (s / p, s % p);
            for e in inst.out_edges(u) {
                if !mask[e] || Some(e) == skip {
                    continue;
                }
                let ed = inst.edge(e);
                let t = ed.target * p + (q + ed.label as usize) % p;
                if self.stamp[t] != self.epoch {
                    if t == goal {
                        return true;
                    }
                    self.stamp[t] = self.epoch;
                    self.queue.push(t);
                }
            }
        }
        false
    }

    /// All states reachable from `(from, 0)`; returns the visited list.
    pub fn explore(&mut self, inst: &Instance, mask: &[bool], from: NodeId) -> &[usize] {
        let p = inst.p() as usize;
        self.begin(inst.n() * p);
        let start = from * p;
        self.stamp[start] = self.epoch;
        self.queue.push(start);
        let mut head = 0;
        while head < self.queue.len() {
            let s = self.queue[head];
            head += 1;
            let (u, q) = (s / p, s % p);
            for e in inst.out_edges(u) {
                if !mask[e] {
                    continue;
                }
                let ed = inst.edge(e);
                let t = ed.target * p + (q + ed.label as usize) % p;
                if self.stamp[t] != self.epoch {
                    self.stamp[t] = self.epoch;
                    self.queue.push(t);
                }
            }
        }
        &self.queue
    }

    pub fn seen(&self, state: usize) -> bool {
        self.stamp.get(state) == Some(&self.epoch)
    }
}

/// Can edge `e` be removed from the edge set `mask` (which contains it)
/// without changing the labeled closure?
pub fn is_redundant(inst: &Instance, mask: &[bool], e: EdgeId) -> bool {
    let ed = inst.edge(e);
    StateSearch::default().realizes(inst, mask, ed.source, ed.target, ed.label, Some(e))
}

pub(crate) fn is_redundant_with(search: &mut StateSearch, inst: &Instance, mask: &[bool], e: EdgeId) -> bool {
    let ed = inst.edge(e);
    search.realizes(inst, mask, ed.source, ed.target, ed.label, Some(e))
}

/// The set of triples `(u, v, q)` such that some path from `u` to `v`
/// (possibly empty) has characteristic `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledClosure {
    n: usize,
    p: u32,
    words: usize,
    bits: Vec<u64>,
}

impl LabeledClosure {
    fn empty(n: usize, p: u32) -> Self {
        let words = (n * p as usize).div_ceil(64);
        LabeledClosure {
            n,
            p,
            words,
            bits: vec![0; words * n],
        }
    }

    fn set(&mut self, u: NodeId, state: usize) {
        self.bits[u * self.words + state / 64] |= 1u64 << (state % 64);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn contains(&self, u: NodeId, v: NodeId, q: u32) -> bool {
        let state = v * self.p as usize + q as usize;
        self.bits[u * self.words + state / 64] >> (state % 64) & 1 == 1
    }

    /// Residues realized from `u` to `v`.
    pub fn residues(&self, u: NodeId, v: NodeId) -> Vec<u32> {
        (0..self.p).filter(|&q| self.contains(u, v, q)).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn triples(&self) -> impl Iterator<Item = (NodeId, NodeId, u32)> + '_ {
        let p = self.p as usize;
        (0..self.n).flat_map(move |u| {
            (0..self.n * p)
                .filter(move |&s| self.contains(u, s / p, (s % p) as u32))
                .map(move |s| (u, s / p, (s % p) as u32))
        })
    }
}

/// Exact labeled closure of `(V, subset)` by search over `(node, residue)`.
pub fn labeled_closure(inst: &Instance, subset: &[EdgeId]) -> LabeledClosure {
    let mask = mask_of(inst.m(), subset);
    labeled_closure_mask(inst, &mask)
}

pub fn labeled_closure_mask(inst: &Instance, mask: &[bool]) -> LabeledClosure {
    let mut closure = LabeledClosure::empty(inst.n(), inst.p());
    let mut search = StateSearch::default();
    for u in 0..inst.n() {
        let states: Vec<usize> = search.explore(inst, mask, u).to_vec();
        for s in states {
            closure.set(u, s);
        }
    }
    closure
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// The candidate names an edge id that does not exist.
    UnknownEdge(EdgeId),
    MissingRequired(EdgeId),
    MissingTriple {
        source: NodeId,
        target: NodeId,
        residue: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violation: Option<Violation>,
}

/// Checks `D ⊆ candidate ⊆ E` and closure equality. Because closures are
/// closed under composition it suffices that every dropped edge's own
/// triple is still realized by the candidate.
pub fn is_valid_reduction(inst: &Instance, candidate: &[EdgeId]) -> ValidityReport {
    let fail = |v| ValidityReport {
        valid: false,
        violation: Some(v),
    };
    if let Some(&bad) = candidate.iter().find(|&&e| e >= inst.m()) {
        return fail(Violation::UnknownEdge(bad));
    }
    let mask = mask_of(inst.m(), candidate);
    is_valid_mask(inst, &mask)
}

pub fn is_valid_mask(inst: &Instance, mask: &[bool]) -> ValidityReport {
    let fail = |v| ValidityReport {
        valid: false,
        violation: Some(v),
    };
    if let Some(e) = (0..inst.m()).find(|&e| inst.edge(e).required && !mask[e]) {
        return fail(Violation::MissingRequired(e));
    }
    // unlabeled and strongly connected: the closure is every pair
    if inst.p() == 1 && is_strongly_connected_mask(inst, mask) && inst.is_strongly_connected() {
        return ValidityReport {
            valid: true,
            violation: None,
        };
    }
    let mut search = StateSearch::default();
    let p = inst.p() as usize;
    let mut explored_from = usize::MAX;
    for e in 0..inst.m() {
        if mask[e] {
            continue;
        }
        let ed = *inst.edge(e);
        if explored_from != ed.source {
            search.explore(inst, mask, ed.source);
            explored_from = ed.source;
        }
        if !search.seen(ed.target * p + ed.label as usize) {
            return fail(Violation::MissingTriple {
                source: ed.source,
                target: ed.target,
                residue: ed.label,
            });
        }
    }
    ValidityReport {
        valid: true,
        violation: None,
    }
}

/// Result of contracting a node set into one node.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CollapseMap {
    /// Old node -> new node.
    pub node_map: Vec<NodeId>,
    /// Id of the contracted node in the new instance.
    pub merged: NodeId,
    pub members: Vec<NodeId>,
    /// New edge -> representative old edge.
    pub edge_origin: Vec<EdgeId>,
    /// Old edges with both ends in the contracted set.
    pub interior: Vec<EdgeId>,
}

impl CollapseMap {
    /// Maps a solution of the collapsed instance back, adding `interior_kept`
    /// (old edge ids inside the contracted set).
    pub fn expand(&self, kept: &[EdgeId], interior_kept: &[EdgeId]) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = kept
            .iter()
            .map(|&e| self.edge_origin[e])
            .chain(interior_kept.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Contracts `set` into a single node. Parallel edges created by the
/// contraction keep a required representative if there is one, otherwise the
/// lowest `(source, target)`; edges inside the set are dropped.
pub fn collapse(inst: &Instance, set: &[NodeId]) -> (Instance, CollapseMap) {
    assert!(!set.is_empty(), "collapse needs a nonempty node set");
    let inside = node_mask(inst.n(), set);
    let anchor = *set.iter().min().unwrap();
    let mut node_map = vec![0; inst.n()];
    let mut next = 0;
    for v in 0..inst.n() {
        if inside[v] && v != anchor {
            continue;
        }
        node_map[v] = next;
        next += 1;
    }
    let merged = node_map[anchor];
    for &v in set {
        node_map[v] = merged;
    }
    let mut members = set.to_vec();
    members.sort_unstable();
    members.dedup();

    let mut interior = Vec::new();
    let mut mapped: Vec<(NodeId, NodeId, bool, EdgeId)> = Vec::new();
    for (id, e) in inst.edges().iter().enumerate() {
        let (a, b) = (node_map[e.source], node_map[e.target]);
        if a == b {
            interior.push(id);
        } else {
            // required first, then lowest old id
            mapped.push((a, b, !e.required, id));
        }
    }
    mapped.sort_unstable();
    mapped.dedup_by_key(|t| (t.0, t.1));
    let mut edges = Vec::with_capacity(mapped.len());
    let mut edge_origin = Vec::with_capacity(mapped.len());
    for (a, b, _, id) in mapped {
        let old = inst.edge(id);
        edges.push(Edge::new(a, b, old.label, old.required));
        edge_origin.push(id);
    }
    let collapsed = Instance::from_sorted(next, inst.p(), edges);
    (
        collapsed,
        CollapseMap {
            node_map,
            merged,
            members,
            edge_origin,
            interior,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: usize, edges: &[(usize, usize)]) -> Instance {
        Instance::new(n, 1, edges.iter().map(|&(u, v)| Edge::plain(u, v))).unwrap()
    }

    #[test]
    fn builds_digon() {
        let g = inst(2, &[(0, 1), (1, 0)]);
        assert_eq!(g.m(), 2);
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn rejects_parallel_edges() {
        let err = Instance::new(2, 2, [Edge::new(0, 1, 1, false), Edge::new(0, 1, 0, false)]).unwrap_err();
        assert_eq!(err, GraphError::ParallelEdge(0, 1));
    }

    #[test]
    fn rejects_composite_modulus() {
        let err = Instance::new(3, 4, [Edge::plain(0, 1)]).unwrap_err();
        assert_eq!(err, GraphError::NonPrimeModulus(4));
        assert_eq!(Instance::new(3, 0, []).unwrap_err(), GraphError::NonPrimeModulus(0));
    }

    #[test]
    fn rejects_self_loops_and_bad_labels() {
        assert_eq!(
            Instance::new(2, 1, [Edge::plain(1, 1)]).unwrap_err(),
            GraphError::SelfLoop(1)
        );
        assert!(matches!(
            Instance::new(2, 3, [Edge::new(0, 1, 3, false)]).unwrap_err(),
            GraphError::LabelOutOfRange { label: 3, .. }
        ));
        assert!(matches!(
            Instance::new(2, 1, [Edge::plain(0, 2)]).unwrap_err(),
            GraphError::NodeOutOfRange { node: 2, .. }
        ));
    }

    #[test]
    fn edges_sorted_and_adjacency_ranges() {
        let g = inst(3, &[(2, 0), (0, 2), (0, 1), (1, 2)]);
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.source, e.target)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2), (2, 0)]);
        assert_eq!(g.out_edges(0), 0..2);
        assert_eq!(g.in_edges(2), &[1, 2]);
        assert_eq!(g.find_edge(1, 2), Some(2));
        assert_eq!(g.find_edge(2, 1), None);
    }

    #[test]
    fn scc_cycle_and_path() {
        let cycle = inst(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(scc(&cycle).len(), 1);
        let path = inst(3, &[(0, 1), (1, 2)]);
        let d = scc(&path);
        assert_eq!(d.components, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn closure_of_single_edge() {
        let g = Instance::new(2, 2, [Edge::new(0, 1, 1, false)]).unwrap();
        let c = labeled_closure(&g, &[0]);
        let triples: Vec<_> = c.triples().collect();
        assert_eq!(triples, vec![(0, 0, 0), (0, 1, 1), (1, 1, 0)]);
    }

    #[test]
    fn odd_digon_gives_both_parities() {
        let g = Instance::new(2, 2, [Edge::new(0, 1, 1, false), Edge::new(1, 0, 0, false)]).unwrap();
        let c = labeled_closure(&g, &[0, 1]);
        assert!(c.contains(0, 1, 0) && c.contains(0, 1, 1));
    }

    #[test]
    fn validity_examples() {
        let cycle = inst(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(is_valid_reduction(&cycle, &[0, 1, 2, 3]).valid);
        let report = is_valid_reduction(&cycle, &[0, 1, 2]);
        assert!(!report.valid);
        assert!(matches!(report.violation, Some(Violation::MissingTriple { .. })));

        let k3 = inst(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)]);
        let tri = [k3.find_edge(0, 1).unwrap(), k3.find_edge(1, 2).unwrap(), k3.find_edge(2, 0).unwrap()];
        assert!(is_valid_reduction(&k3, &tri).valid);
    }

    #[test]
    fn validity_reports_missing_required_edge() {
        let g = Instance::new(2, 1, [Edge::new(0, 1, 0, true), Edge::plain(1, 0)]).unwrap();
        let r = is_valid_reduction(&g, &[1]);
        assert_eq!(r.violation, Some(Violation::MissingRequired(0)));
        assert_eq!(is_valid_reduction(&g, &[9]).violation, Some(Violation::UnknownEdge(9)));
    }

    #[test]
    fn cuts_of_digon_and_k3() {
        let d = inst(2, &[(0, 1), (1, 0)]);
        assert_eq!(in_cut(&d, &[1]), vec![d.find_edge(0, 1).unwrap()]);
        assert_eq!(out_cut(&d, &[1]), vec![d.find_edge(1, 0).unwrap()]);
        let k3 = inst(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)]);
        assert_eq!(in_cut(&k3, &[0]).len(), 2);
        assert_eq!(out_cut(&k3, &[0]).len(), 2);
    }

    #[test]
    fn collapse_digon_in_four_nodes() {
        let g = inst(4, &[(0, 1), (1, 0), (1, 2), (2, 3), (3, 0)]);
        let (c, map) = collapse(&g, &[0, 1]);
        assert_eq!(c.n(), 3);
        assert_eq!(map.interior.len(), 2);
        assert!(c.is_strongly_connected());
    }

    #[test]
    fn collapse_triangle_inherits_outside_edges() {
        // triangle 1 -> 2 -> 3 -> 1, outside node 0 enters at 1 and is left from 3
        let g = inst(4, &[(1, 2), (2, 3), (3, 1), (0, 1), (3, 0)]);
        let (c, map) = collapse(&g, &[1, 2, 3]);
        assert_eq!(c.n(), 2);
        let x = map.merged;
        assert!(c.find_edge(0, x).is_some() && c.find_edge(x, 0).is_some());
        // re-expansion with the triangle restores validity
        let all: Vec<EdgeId> = (0..c.m()).collect();
        let back = map.expand(&all, &map.interior);
        assert!(is_valid_reduction(&g, &back).valid);
    }

    #[test]
    fn collapse_prefers_required_representative() {
        let g = Instance::new(
            3,
            1,
            [Edge::plain(0, 1), Edge::new(0, 2, 0, true), Edge::plain(1, 0), Edge::plain(2, 0)],
        )
        .unwrap();
        let (c, map) = collapse(&g, &[1, 2]);
        let e = c.find_edge(0, map.merged).unwrap();
        assert!(c.edge(e).required);
        assert_eq!(map.edge_origin[e], g.find_edge(0, 2).unwrap());
    }

    #[test]
    fn primality() {
        let primes: Vec<u32> = (0..30).filter(|&p| is_prime(p)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }
}
