//! The 1.5-approximation for minimum equivalent digraphs with required
//! edges. Lower-bound objects steer a depth-first search, poor objects get
//! local repairs, and a credit ledger records who pays for each kept edge.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{lower_bound, Account, BoundsError, CreditLedger, DualCertificate, EdgeRole, ObjectClass, ObjectPartition, Transfer};
use crate::credit::Quarters;
use crate::graph::{collapse, coreachable_mask, is_redundant_with, is_strongly_connected_mask, reachable_mask, scc_mask, CollapseMap, EdgeId, Instance, NodeId, StateSearch};
use crate::solution::Solution;

/// Passes of search plus reclassification before the partition is frozen.
const MAX_PASSES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MinError {
    #[error("instance is not strongly connected")]
    NotStronglyConnected,
    #[error("expected an unlabeled instance (p = 1), got p = {0}")]
    Labeled(u32),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("no L-edge leaving path node {0} leads back to an ancestor")]
    NoFeasiblePrimary(NodeId),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseId {
    #[serde(rename = "1.1")]
    C11,
    #[serde(rename = "1.2")]
    C12,
    #[serde(rename = "2")]
    C2,
    #[serde(rename = "3.1")]
    C31,
    #[serde(rename = "3.2")]
    C32,
    #[serde(rename = "3.3.1")]
    C331,
    #[serde(rename = "3.3.2")]
    C332,
    #[serde(rename = "3.3.3")]
    C333,
    #[serde(rename = "3.3.4")]
    C334,
    #[serde(rename = "3.3.5.1")]
    C3351,
    #[serde(rename = "3.3.5.2")]
    C3352,
    #[serde(rename = "fallback")]
    Fallback,
}

impl CaseId {
    pub fn label(self) -> &'static str {
        match self {
            CaseId::C11 => "1.1",
            CaseId::C12 => "1.2",
            CaseId::C2 => "2",
            CaseId::C31 => "3.1",
            CaseId::C32 => "3.2",
            CaseId::C331 => "3.3.1",
            CaseId::C332 => "3.3.2",
            CaseId::C333 => "3.3.3",
            CaseId::C334 => "3.3.4",
            CaseId::C3351 => "3.3.5.1",
            CaseId::C3352 => "3.3.5.2",
            CaseId::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub object: usize,
    pub nodes: Vec<NodeId>,
    pub case: CaseId,
    pub inserted: Vec<EdgeId>,
    pub deleted: Vec<EdgeId>,
    pub transfers: Vec<Transfer>,
    /// A back edge from inside the object's subtree reaches above its parent.
    pub shares: bool,
    /// The object's deficit could not be covered.
    pub fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseTrace {
    pub entries: Vec<CaseEntry>,
}

impl CaseTrace {
    pub fn fallbacks(&self) -> usize {
        self.entries.iter().filter(|e| e.fallback || e.case == CaseId::Fallback).count()
    }

    /// Number of entries per case label, plus a `fallback` count.
    pub fn summary(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.case.label().to_string()).or_insert(0) += 1;
        }
        let f = self.fallbacks();
        if f > 0 {
            out.insert("fallback".to_string(), f);
        }
        out
    }
}

/// State of the guided search. Rich objects are traversed as single merged
/// nodes; every per-node vector below is indexed by merged node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfsState {
    /// Node -> merged node.
    pub super_of: Vec<usize>,
    pub members: Vec<Vec<NodeId>>,
    pub number: Vec<usize>,
    pub low_done: Vec<usize>,
    pub low_can_do: Vec<usize>,
    pub low_edge: Vec<Option<EdgeId>>,
    pub parent_edge: Vec<Option<EdgeId>>,
    /// Highest number inside the subtree.
    pub last_descendant: Vec<usize>,
    pub tree: Vec<EdgeId>,
    /// `(merged node whose final check inserted it, edge)`.
    pub back: Vec<(usize, EdgeId)>,
    pub counter: usize,
    /// Merged nodes in discovery order.
    pub order: Vec<usize>,
    /// Rule ✽ choice per path node.
    pub star_primary: Vec<Option<EdgeId>>,
}

impl DfsState {
    fn in_subtree(&self, root: usize, x: usize) -> bool {
        self.number[x] >= self.number[root] && self.number[x] <= self.last_descendant[root]
    }
}

/// Picks the primary edge of path node `u`: an `L`-edge `(u, v)` such that a
/// visited node (hence an ancestor's component) is reachable from `v` without
/// passing through `u`. Unvisited targets come first, each group by lowest
/// target. Without visited nodes the lowest target wins.
pub fn select_primary_edge(inst: &Instance, u: NodeId, candidates: &[EdgeId], visited: &[bool]) -> Result<EdgeId, MinError> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by_key(|&e| (inst.edge(e).target, e));
    if !(0..inst.n()).any(|x| x != u && visited[x]) {
        return sorted.first().copied().ok_or(MinError::NoFeasiblePrimary(u));
    }
    let n = inst.n();
    let mut dead = vec![false; n];
    let mut mark = vec![usize::MAX; n];
    let mut to_visited = None;
    for (round, &e) in sorted.iter().enumerate() {
        let v = inst.edge(e).target;
        if visited[v] {
            to_visited.get_or_insert(e);
            continue;
        }
        if dead[v] {
            continue;
        }
        mark[v] = round;
        let mut stack = vec![v];
        let mut explored = vec![v];
        let mut found = false;
        'bfs: while let Some(x) = stack.pop() {
            for f in inst.out_edges(x) {
                let y = inst.edge(f).target;
                if y == u {
                    continue;
                }
                if visited[y] {
                    found = true;
                    break 'bfs;
                }
                if dead[y] || mark[y] == round {
                    continue;
                }
                mark[y] = round;
                stack.push(y);
                explored.push(y);
            }
        }
        if found {
            return Ok(e);
        }
        for x in explored {
            dead[x] = true;
        }
    }
    to_visited.ok_or(MinError::NoFeasiblePrimary(u))
}

fn merged_nodes(part: &ObjectPartition, n: usize) -> (Vec<usize>, Vec<Vec<NodeId>>) {
    let mut super_of = vec![usize::MAX; n];
    let mut members: Vec<Vec<NodeId>> = Vec::new();
    let mut of_object: Vec<Option<usize>> = vec![None; part.objects.len()];
    for v in 0..n {
        let k = part.object_of[v];
        let merged = part.class[k] != ObjectClass::Poor;
        let id = match (merged, of_object[k]) {
            (true, Some(id)) => id,
            _ => {
                members.push(Vec::new());
                let id = members.len() - 1;
                if merged {
                    of_object[k] = Some(id);
                }
                id
            }
        };
        super_of[v] = id;
        members[id].push(v);
    }
    (super_of, members)
}

/// Depth-first search over merged nodes that tracks `LowDone`, `LowCanDo`
/// and `LowEdge`, inserting `LowEdge` at the final check whenever the
/// subtree cannot yet leave itself.
pub fn guided_dfs(inst: &Instance, part: &ObjectPartition) -> Result<DfsState, MinError> {
    let n = inst.n();
    let (super_of, members) = merged_nodes(part, n);
    let k = members.len();
    let mut st = DfsState {
        super_of,
        members,
        number: vec![0; k],
        low_done: vec![0; k],
        low_can_do: vec![0; k],
        low_edge: vec![None; k],
        parent_edge: vec![None; k],
        last_descendant: vec![0; k],
        tree: Vec::new(),
        back: Vec::new(),
        counter: 0,
        order: Vec::new(),
        star_primary: vec![None; n],
    };
    if n == 0 {
        return Ok(st);
    }
    let root = st.super_of[0];
    let mut visited_node = vec![false; n];
    let check_invariant = cfg!(debug_assertions) && n <= 64;

    // (merged node, sorted adjacency, next index)
    let mut stack: Vec<(usize, Vec<EdgeId>, usize)> = Vec::new();
    let visit = |x: usize, st: &mut DfsState, visited_node: &mut Vec<bool>| -> Result<Vec<EdgeId>, MinError> {
        st.counter += 1;
        st.number[x] = st.counter;
        st.low_done[x] = st.counter;
        st.low_can_do[x] = st.counter;
        st.order.push(x);
        let mut star = None;
        if st.members[x].len() == 1 && part.objects[part.object_of[st.members[x][0]]].len() == 1 {
            let u = st.members[x][0];
            let cands: Vec<EdgeId> = inst.out_edges(u).filter(|&e| part.in_l[e]).collect();
            if !cands.is_empty() {
                let e = select_primary_edge(inst, u, &cands, visited_node)?;
                st.star_primary[u] = Some(e);
                star = Some(e);
            }
        }
        for &v in &st.members[x] {
            visited_node[v] = true;
        }
        let mut adj: Vec<(u8, EdgeId)> = Vec::new();
        for &v in &st.members[x] {
            for e in inst.out_edges(v) {
                if st.super_of[inst.edge(e).target] == x {
                    continue;
                }
                let class = if Some(e) == star {
                    0
                } else {
                    match part.role[e] {
                        Some(EdgeRole::Internal) => 1,
                        Some(EdgeRole::Primary) => 2,
                        Some(EdgeRole::Secondary) => 3,
                        None => 4,
                    }
                };
                adj.push((class, e));
            }
        }
        adj.sort_unstable();
        Ok(adj.into_iter().map(|(_, e)| e).collect())
    };

    let adj = visit(root, &mut st, &mut visited_node)?;
    stack.push((root, adj, 0));
    while let Some(top) = stack.last_mut() {
        let x = top.0;
        if top.2 < top.1.len() {
            let e = top.1[top.2];
            top.2 += 1;
            let y = st.super_of[inst.edge(e).target];
            if st.number[y] == 0 {
                st.parent_edge[y] = Some(e);
                st.tree.push(e);
                let adj = visit(y, &mut st, &mut visited_node)?;
                stack.push((y, adj, 0));
            } else if st.low_can_do[x] > st.number[y] {
                st.low_can_do[x] = st.number[y];
                st.low_edge[x] = Some(e);
            }
            continue;
        }
        // final check of x
        stack.pop();
        st.last_descendant[x] = st.counter;
        if st.low_done[x] == st.number[x] && x != root {
            let Some(e) = st.low_edge[x].filter(|_| st.low_can_do[x] < st.number[x]) else {
                return Err(MinError::Invariant(format!("subtree of node {} has no edge leaving it", st.members[x][0])));
            };
            st.back.push((x, e));
            st.low_done[x] = st.low_can_do[x];
        }
        if let Some(parent) = stack.last() {
            let u = parent.0;
            st.low_done[u] = st.low_done[u].min(st.low_done[x]);
            if st.low_can_do[u] > st.low_can_do[x] {
                st.low_can_do[u] = st.low_can_do[x];
                st.low_edge[u] = st.low_edge[x];
            }
            if check_invariant {
                check_subtree_joined(inst, part, &st, u, x)?;
            }
        }
    }
    if st.order.len() != k {
        return Err(MinError::NotStronglyConnected);
    }
    Ok(st)
}

/// Invariant (A): after the call for `child` returns, its subtree lies in the
/// strongly connected component of `parent` in `T ∪ B`.
fn check_subtree_joined(inst: &Instance, part: &ObjectPartition, st: &DfsState, parent: usize, child: usize) -> Result<(), MinError> {
    let mut mask = vec![false; inst.m()];
    for &e in &st.tree {
        mask[e] = true;
    }
    for &(_, e) in &st.back {
        mask[e] = true;
    }
    merged_internal(inst, part, st, &mut mask);
    let comps = scc_mask(inst, &mask);
    let c = comps.component_of[st.members[parent][0]];
    for x in 0..st.members.len() {
        if st.number[x] != 0 && st.in_subtree(child, x) && st.members[x].iter().any(|&v| comps.component_of[v] != c) {
            return Err(MinError::Invariant(format!("subtree of node {} is not joined to its parent", st.members[child][0])));
        }
    }
    Ok(())
}

/// Marks the `L`-edges inside merged objects.
fn merged_internal(inst: &Instance, part: &ObjectPartition, st: &DfsState, mask: &mut [bool]) {
    for &e in &part.l_edges {
        let ed = inst.edge(e);
        let (a, b) = (st.super_of[ed.source], st.super_of[ed.target]);
        if a == b && st.members[a].len() > 1 {
            mask[e] = true;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseStep {
    pub map: CollapseMap,
    /// Edges restoring strong connectivity inside the contracted set, as
    /// ids of the instance before the contraction.
    pub interior: Vec<EdgeId>,
    /// Required edges of the instance before the contraction.
    pub required: Vec<EdgeId>,
    /// Edges every solution must have inside the set.
    pub forced: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseLog {
    pub steps: Vec<CollapseStep>,
}

impl CollapseLog {
    /// Maps a solution of the fully contracted instance back to the original.
    pub fn expand(&self, kept: &[EdgeId]) -> Vec<EdgeId> {
        let mut cur = kept.to_vec();
        for step in self.steps.iter().rev() {
            let mut next = step.map.expand(&cur, &step.interior);
            next.extend_from_slice(&step.required);
            next.sort_unstable();
            next.dedup();
            cur = next;
        }
        cur
    }
}

/// Edges every solution needs inside `set`: required internal edges plus one
/// per node that has no entering (leaving) edge from outside and no required
/// internal one.
fn forced_inside(inst: &Instance, set: &[NodeId]) -> usize {
    let inside = |v: NodeId| set.contains(&v);
    let mut d_int = 0;
    let mut d_in = vec![false; set.len()];
    let mut d_out = vec![false; set.len()];
    let pos = |v: NodeId| set.iter().position(|&x| x == v).unwrap();
    for &v in set {
        for e in inst.out_edges(v) {
            let ed = inst.edge(e);
            if inside(ed.target) && ed.required {
                d_int += 1;
                d_out[pos(v)] = true;
                d_in[pos(ed.target)] = true;
            }
        }
    }
    let mut need_in = d_int;
    let mut need_out = d_int;
    for &v in set {
        if !d_in[pos(v)] && !inst.in_edges(v).iter().any(|&e| !inside(inst.edge(e).source)) {
            need_in += 1;
        }
        if !d_out[pos(v)] && !inst.out_edges(v).any(|e| !inside(inst.edge(e).target)) {
            need_out += 1;
        }
    }
    need_in.max(need_out)
}

/// Smallest set of edges inside `set` that contains its required edges and
/// connects it strongly.
fn cheapest_interior(inst: &Instance, set: &[NodeId]) -> Option<Vec<EdgeId>> {
    let internal: Vec<EdgeId> = set
        .iter()
        .flat_map(|&v| inst.out_edges(v))
        .filter(|&e| set.contains(&inst.edge(e).target))
        .collect();
    if internal.len() > 16 {
        return None;
    }
    let (sub, origin) = inst.induced(set);
    let mut best: Option<Vec<EdgeId>> = None;
    for bits in 0u32..(1 << sub.m()) {
        let mask: Vec<bool> = (0..sub.m()).map(|i| bits >> i & 1 == 1).collect();
        if (0..sub.m()).any(|i| sub.edge(i).required && !mask[i]) {
            continue;
        }
        let size = bits.count_ones() as usize;
        if best.as_ref().is_some_and(|b| b.len() <= size) {
            continue;
        }
        if is_strongly_connected_mask(&sub, &mask) {
            best = Some((0..sub.m()).filter(|&i| mask[i]).map(|i| origin[i]).collect());
        }
    }
    best
}

fn collapse_candidates(inst: &Instance) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    for a in 0..inst.n() {
        for e in inst.out_edges(a) {
            let b = inst.edge(e).target;
            if b > a && inst.find_edge(b, a).is_some() {
                out.push(vec![a, b]);
            }
        }
    }
    for a in 0..inst.n() {
        for e in inst.out_edges(a) {
            let b = inst.edge(e).target;
            if b <= a {
                continue;
            }
            for f in inst.out_edges(b) {
                let c = inst.edge(f).target;
                if c > a && c != b && inst.find_edge(c, a).is_some() {
                    let mut s = vec![a, b, c];
                    s.sort_unstable();
                    out.push(s);
                }
            }
        }
    }
    out.dedup();
    out
}

/// Contracts digons and triangles that force so many internal edges that
/// replacing them by their cheapest strongly connected interior keeps the
/// ratio 1.5 (interior size at most 1.5 times the forced count).
pub fn preprocess_triangles(inst: &Instance) -> (Instance, CollapseLog) {
    let mut cur = inst.clone();
    let mut log = CollapseLog::default();
    'outer: loop {
        if cur.n() <= 2 {
            break;
        }
        for set in collapse_candidates(&cur) {
            let forced = forced_inside(&cur, &set);
            if forced < 2 {
                continue;
            }
            let Some(interior) = cheapest_interior(&cur, &set) else {
                continue;
            };
            if 2 * interior.len() > 3 * forced {
                continue;
            }
            let inside = |v: NodeId| set.contains(&v);
            let required = cur.required_edges().into_iter().filter(|&e| !inside(cur.edge(e).source) || !inside(cur.edge(e).target)).collect();
            let (next, map) = collapse(&cur, &set);
            log.steps.push(CollapseStep {
                map,
                interior,
                required,
                forced,
            });
            cur = next;
            continue 'outer;
        }
        break;
    }
    (cur, log)
}

/// Strong connectivity of `V - excluded` using the edges of `h` between
/// nodes outside `excluded`.
fn connected_outside(inst: &Instance, h: &[bool], excluded: &[bool]) -> bool {
    let Some(start) = (0..inst.n()).find(|&v| !excluded[v]) else {
        return true;
    };
    let mut mask = h.to_vec();
    for (e, ed) in inst.edges().iter().enumerate() {
        if excluded[ed.source] || excluded[ed.target] {
            mask[e] = false;
        }
    }
    let f = reachable_mask(inst, &mask, start);
    let b = coreachable_mask(inst, &mask, start);
    (0..inst.n()).all(|v| excluded[v] || (f[v] && b[v]))
}

struct Editor<'a> {
    inst: &'a Instance,
    h: Vec<bool>,
    size: usize,
}

impl Editor<'_> {
    /// Applies the edit if the result stays strongly connected and is not
    /// larger (or may grow, when `grow` is set). Required edges are never
    /// removed.
    fn try_edit(&mut self, remove: &[EdgeId], add: &[EdgeId], grow: bool) -> Option<(Vec<EdgeId>, Vec<EdgeId>)> {
        let removed: Vec<EdgeId> = remove.iter().copied().filter(|&e| self.h[e] && !self.inst.edge(e).required).collect();
        let mut added: Vec<EdgeId> = Vec::new();
        for &e in &removed {
            self.h[e] = false;
        }
        for &e in add {
            if !self.h[e] {
                self.h[e] = true;
                added.push(e);
            }
        }
        let new_size = self.size + added.len() - removed.len();
        if (grow || new_size <= self.size) && (removed.len() + added.len() > 0) && is_strongly_connected_mask(self.inst, &self.h) {
            self.size = new_size;
            return Some((added, removed));
        }
        for &e in &added {
            self.h[e] = false;
        }
        for &e in &removed {
            self.h[e] = true;
        }
        None
    }

    /// Replaces every edge touching `set` by an entry into `x`, the path
    /// `x -> y -> z` and an exit from `z`, for the first workable order.
    fn rewire(&mut self, set: &[NodeId]) -> Option<(Vec<EdgeId>, Vec<EdgeId>)> {
        let inst = self.inst;
        if set.len() != 3 {
            return None;
        }
        let inside = crate::graph::node_mask(inst.n(), set);
        let touching: Vec<EdgeId> = (0..inst.m())
            .filter(|&e| self.h[e] && (inside[inst.edge(e).source] || inside[inst.edge(e).target]))
            .collect();
        let (u, v, w) = (set[0], set[1], set[2]);
        let orders = [(u, v, w), (v, w, u), (w, u, v), (u, w, v), (w, v, u), (v, u, w)];
        for (x, y, z) in orders {
            let (Some(xy), Some(yz)) = (inst.find_edge(x, y), inst.find_edge(y, z)) else {
                continue;
            };
            let mut entries: Vec<EdgeId> = inst.in_edges(x).iter().copied().filter(|&e| !inside[inst.edge(e).source]).collect();
            let mut exits: Vec<EdgeId> = inst.out_edges(z).filter(|&e| !inside[inst.edge(e).target]).collect();
            entries.sort_by_key(|&e| (!self.h[e], e));
            exits.sort_by_key(|&e| (!self.h[e], e));
            for &a in entries.iter().take(4) {
                for &b in exits.iter().take(4) {
                    if let Some(r) = self.try_edit(&touching, &[a, xy, yz, b], false) {
                        return Some(r);
                    }
                }
            }
        }
        None
    }
}

struct Resolver<'a> {
    inst: &'a Instance,
    part: &'a ObjectPartition,
    dfs: &'a DfsState,
    /// Object -> merged node visited first.
    head: Vec<usize>,
}

impl Resolver<'_> {
    fn entry_edge(&self, obj: usize) -> Option<EdgeId> {
        self.dfs.parent_edge[self.head[obj]]
    }

    fn shares(&self, obj: usize) -> bool {
        let Some(entry) = self.entry_edge(obj) else {
            return false;
        };
        let parent_obj = self.part.object_of[self.inst.edge(entry).source];
        let parent_number = self.head_number(parent_obj);
        let h = self.head[obj];
        self.dfs.back.iter().any(|&(x, e)| {
            let t = self.dfs.super_of[self.inst.edge(e).target];
            self.dfs.in_subtree(h, x) && self.dfs.number[t] < parent_number
        })
    }

    fn head_number(&self, obj: usize) -> usize {
        self.dfs.number[self.head[obj]]
    }

    /// Members ordered by discovery.
    fn ordered(&self, obj: usize) -> Vec<NodeId> {
        let mut nodes = self.part.objects[obj].clone();
        nodes.sort_by_key(|&v| self.dfs.number[self.dfs.super_of[v]]);
        nodes
    }

    /// `L`-edge entering `obj` that is the primary edge of a path node.
    fn primary_from_path_node(&self, obj: usize) -> Option<EdgeId> {
        let part = self.part;
        part.objects[obj]
            .iter()
            .flat_map(|&v| self.inst.in_edges(v).iter().copied())
            .filter(|&e| {
                let s = part.object_of[self.inst.edge(e).source];
                s != obj && part.role[e] == Some(EdgeRole::Primary) && part.objects[s].len() == 1
            })
            .min()
    }

    fn resolve(&self, editor: &mut Editor, obj: usize) -> CaseEntry {
        let nodes = self.ordered(obj);
        let mut entry = CaseEntry {
            object: obj,
            nodes: nodes.clone(),
            case: CaseId::Fallback,
            inserted: Vec::new(),
            deleted: Vec::new(),
            transfers: Vec::new(),
            shares: self.shares(obj),
            fallback: false,
        };
        let record = |entry: &mut CaseEntry, r: Option<(Vec<EdgeId>, Vec<EdgeId>)>| {
            if let Some((a, d)) = r {
                entry.inserted.extend(a);
                entry.deleted.extend(d);
            }
        };
        match nodes.len() {
            1 => {
                let Some(tu) = self.primary_from_path_node(obj) else {
                    return entry;
                };
                let t = self.inst.edge(tu).source;
                let came_from = self.entry_edge(obj).map(|e| self.inst.edge(e).source);
                if came_from == Some(t) {
                    entry.case = CaseId::C11;
                } else {
                    entry.case = CaseId::C12;
                    let pe: Vec<EdgeId> = self.entry_edge(obj).into_iter().collect();
                    let r = editor.try_edit(&pe, &[tu], false);
                    record(&mut entry, r);
                }
            }
            2 => entry.case = CaseId::C2,
            3 => self.resolve_triangle(editor, obj, &nodes, &mut entry),
            _ => {}
        }
        entry
    }

    fn resolve_triangle(&self, editor: &mut Editor, obj: usize, nodes: &[NodeId], entry: &mut CaseEntry) {
        let inst = self.inst;
        let part = self.part;
        let push = |entry: &mut CaseEntry, r: Option<(Vec<EdgeId>, Vec<EdgeId>)>| {
            if let Some((a, d)) = r {
                entry.inserted.extend(a);
                entry.deleted.extend(d);
            }
        };
        let inside = crate::graph::node_mask(inst.n(), nodes);
        let touches_primary = part.in_l.iter().enumerate().any(|(e, &l)| {
            let ed = inst.edge(e);
            l && part.role[e] == Some(EdgeRole::Primary) && inside[ed.source] != inside[ed.target]
        });
        if touches_primary {
            entry.case = CaseId::C31;
            if let Some(te) = self.primary_from_path_node(obj) {
                let came_from = self.entry_edge(obj).map(|e| inst.edge(e).source);
                if came_from != Some(inst.edge(te).source) {
                    let pe: Vec<EdgeId> = self.entry_edge(obj).into_iter().collect();
                    let r = editor.try_edit(&pe, &[te], false);
                    push(entry, r);
                }
            }
            return;
        }
        let mut h_without = editor.h.clone();
        for (e, ed) in inst.edges().iter().enumerate() {
            if (inside[ed.source] || inside[ed.target]) && !ed.required {
                h_without[e] = false;
            }
        }
        if connected_outside(inst, &h_without, &inside) {
            entry.case = CaseId::C32;
            let r = editor.rewire(nodes);
            push(entry, r);
            return;
        }

        // branches: subtrees hanging from the triangle
        let dfs = self.dfs;
        let head = self.head[obj];
        let in_tu = |v: NodeId| dfs.in_subtree(head, dfs.super_of[v]);
        let mut branches: Vec<usize> = (0..dfs.members.len())
            .filter(|&y| {
                dfs.parent_edge[y].is_some_and(|e| inside[inst.edge(e).source]) && !dfs.members[y].iter().any(|&v| inside[v])
            })
            .collect();
        branches.sort_by_key(|&y| dfs.number[y]);
        let open_edge = (0..inst.m()).find(|&e| {
            let ed = inst.edge(e);
            let (s, t) = (ed.source, ed.target);
            (!in_tu(s) && in_tu(t) && !inside[t]) || (in_tu(s) && !inside[s] && !in_tu(t))
        });
        let Some(&first) = branches.first() else {
            entry.case = CaseId::C3352;
            let r = editor.rewire(nodes);
            push(entry, r);
            return;
        };
        // objects of the branch in discovery order
        let mut objs: Vec<usize> = Vec::new();
        for &x in &dfs.order {
            if dfs.in_subtree(first, x) {
                let k = part.object_of[dfs.members[x][0]];
                if !objs.contains(&k) {
                    objs.push(k);
                }
            }
        }
        let rich = |k: usize| part.class[k] != ObjectClass::Poor;
        let path_node = |k: usize| part.objects[k].len() == 1 && !rich(k);
        if objs.len() > 2 {
            entry.case = CaseId::C331;
        } else if objs.len() == 2 && objs.iter().any(|&k| rich(k)) {
            entry.case = CaseId::C332;
        } else if path_node(objs[0]) || objs.get(1).is_some_and(|&k| path_node(k)) {
            let (t_obj, case) = if path_node(objs[0]) { (objs[0], CaseId::C333) } else { (objs[1], CaseId::C334) };
            entry.case = case;
            let t = part.objects[t_obj][0];
            let into_t = dfs.parent_edge[dfs.super_of[t]];
            let st = inst.in_edges(t).iter().copied().filter(|&e| part.in_l[e] && !inside[inst.edge(e).source]).min();
            if let (Some(at), Some(st)) = (into_t, st) {
                let r = editor.try_edit(&[at], &[st], false);
                push(entry, r);
            }
            if case == CaseId::C334 && part.objects[objs[0]].len() == 3 {
                let d1 = self.ordered(objs[0]);
                let r = editor.rewire(&d1);
                push(entry, r);
            }
        } else if let Some(f) = open_edge {
            entry.case = CaseId::C3351;
            // each round inserts an edge crossing the subtree boundary and
            // drops the entry into the triangle and the edge into the branch
            let mut candidate = Some(f);
            let mut rounds = 0;
            while let Some(f) = candidate {
                if rounds >= inst.n() {
                    entry.case = CaseId::Fallback;
                    break;
                }
                rounds += 1;
                let mut remove: Vec<EdgeId> = self.entry_edge(obj).into_iter().collect();
                remove.extend(dfs.parent_edge[first]);
                let r = editor.try_edit(&remove, &[f], false);
                let done = r.is_some();
                push(entry, r);
                if done {
                    break;
                }
                candidate = (f + 1..inst.m()).find(|&e| {
                    let ed = inst.edge(e);
                    let (s, t) = (ed.source, ed.target);
                    (!in_tu(s) && in_tu(t) && !inside[t]) || (in_tu(s) && !inside[s] && !in_tu(t))
                });
            }
        } else {
            entry.case = CaseId::C3352;
            let r = editor.rewire(nodes);
            push(entry, r);
        }
    }
}

/// Removes redundant edges outside `protected`: edges outside `L` first,
/// then `L`-edges, each group from the highest id down.
fn prune_in_order(inst: &Instance, h: &mut [bool], protected: &[bool], in_l: &[bool]) {
    let mut search = StateSearch::default();
    for pass_l in [false, true] {
        for e in (0..inst.m()).rev() {
            if h[e] && in_l[e] == pass_l && !protected[e] && !inst.edge(e).required && is_redundant_with(&mut search, inst, h, e) {
                h[e] = false;
            }
        }
    }
}

/// Result of the approximation together with everything needed to audit it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinSolution {
    pub solution: Solution,
    pub trace: CaseTrace,
    /// Certificate for the original instance.
    pub certificate: DualCertificate,
    /// Ledger over the contracted instance the search ran on.
    pub ledger: CreditLedger,
    pub collapses: CollapseLog,
    pub passes: usize,
    /// Deficit left after all transfers, over all objects.
    pub uncovered: Quarters,
}

/// The 1.5-approximation for a strongly connected unlabeled instance.
pub fn solve_min(inst: &Instance) -> Result<MinSolution, MinError> {
    if inst.p() != 1 {
        return Err(MinError::Labeled(inst.p()));
    }
    if !inst.is_strongly_connected() {
        return Err(MinError::NotStronglyConnected);
    }
    let certificate = lower_bound(inst)?;
    let (work, collapses) = preprocess_triangles(inst);
    let work_cert = if collapses.steps.is_empty() { certificate.clone() } else { lower_bound(&work)? };
    let run = solve_contracted(&work, &work_cert)?;
    let kept: Vec<EdgeId> = (0..work.m()).filter(|&e| run.h[e]).collect();
    let edges = collapses.expand(&kept);
    let solution = Solution::new(inst, edges, Some(certificate.bound()));
    if !solution.is_valid() {
        return Err(MinError::Invariant(format!("approximate solution is invalid: {:?}", solution.report.violation)));
    }
    Ok(MinSolution {
        solution,
        trace: run.trace,
        certificate,
        ledger: run.ledger,
        collapses,
        passes: run.passes,
        uncovered: run.uncovered,
    })
}

struct Run {
    h: Vec<bool>,
    trace: CaseTrace,
    ledger: CreditLedger,
    passes: usize,
    uncovered: Quarters,
}

fn solve_contracted(inst: &Instance, cert: &DualCertificate) -> Result<Run, MinError> {
    let m = inst.m();
    if inst.n() <= 2 {
        let part = ObjectPartition::new(inst, &(0..m).collect::<Vec<_>>(), None);
        let ledger = CreditLedger::allocate(inst, &part);
        return Ok(Run {
            h: vec![true; m],
            trace: CaseTrace::default(),
            ledger,
            passes: 0,
            uncovered: Quarters::ZERO,
        });
    }
    let (mut part, _) = crate::bounds::build_l(inst, cert);
    let mut dfs = guided_dfs(inst, &part)?;
    let mut passes = 1;
    loop {
        let next = ObjectPartition::new(inst, &part.l_edges, Some(&dfs.star_primary));
        let stable = next.class == part.class && next.primary_of == part.primary_of;
        part = next;
        if stable || passes >= MAX_PASSES {
            break;
        }
        dfs = guided_dfs(inst, &part)?;
        passes += 1;
    }
    let mut ledger = CreditLedger::allocate(inst, &part);

    // initial solution: T, B, L inside merged objects, D
    let mut h = vec![false; m];
    let mut protected = vec![false; m];
    merged_internal(inst, &part, &dfs, &mut protected);
    for e in 0..m {
        if protected[e] || inst.edge(e).required {
            h[e] = true;
        }
    }
    for &e in &dfs.tree {
        h[e] = true;
    }
    for &(_, e) in &dfs.back {
        h[e] = true;
    }
    if !is_strongly_connected_mask(inst, &h) {
        return Err(MinError::Invariant("tree and back edges do not connect the graph".into()));
    }

    let mut head = vec![usize::MAX; part.objects.len()];
    for &x in dfs.order.iter().rev() {
        for &v in &dfs.members[x] {
            head[part.object_of[v]] = x;
        }
    }
    let resolver = Resolver {
        inst,
        part: &part,
        dfs: &dfs,
        head,
    };
    let size = h.iter().filter(|&&x| x).count();
    let mut editor = Editor { inst, h, size };
    let mut poor: Vec<usize> = (0..part.objects.len()).filter(|&k| part.class[k] == ObjectClass::Poor).collect();
    poor.sort_by_key(|&k| resolver.head_number(k));
    let mut entries: Vec<CaseEntry> = poor.iter().map(|&k| resolver.resolve(&mut editor, k)).collect();
    let mut h = editor.h;
    prune_in_order(inst, &mut h, &protected, &part.in_l);

    // charge every kept edge to one object
    let mut charged_to: Vec<Option<usize>> = vec![None; m];
    for entry in &entries {
        for &e in &entry.inserted {
            charged_to[e] = Some(entry.object);
        }
    }
    for (y, pe) in dfs.parent_edge.iter().enumerate() {
        if let Some(e) = *pe {
            charged_to[e].get_or_insert(part.object_of[dfs.members[y][0]]);
        }
    }
    for &(x, e) in &dfs.back {
        charged_to[e].get_or_insert(part.object_of[dfs.members[x][0]]);
    }
    for e in 0..m {
        if !h[e] {
            continue;
        }
        let ed = inst.edge(e);
        let (a, b) = (part.object_of[ed.source], part.object_of[ed.target]);
        let k = if a == b { a } else { charged_to[e].unwrap_or(b) };
        ledger.credit(Account::Object(k), Account::Spent(e), Quarters::ONE, "solution edge");
    }

    // cover deficits from the reserve and from objects with a surplus;
    // rich objects first, then poor objects in discovery order
    let mut order: Vec<usize> = (0..part.objects.len()).filter(|&k| part.class[k] != ObjectClass::Poor).collect();
    order.extend(&poor);
    let mut uncovered = Quarters::ZERO;
    for (pos, &k) in order.iter().enumerate() {
        let mut transfers = Vec::new();
        while ledger.balance[k].is_negative() {
            let need = -ledger.balance[k];
            let (from, avail) = if ledger.reserve > Quarters::ZERO {
                (Account::Reserve, ledger.reserve)
            } else if let Some(j) = (0..part.objects.len()).find(|&j| j != k && ledger.balance[j] > Quarters::ZERO) {
                (Account::Object(j), ledger.balance[j])
            } else {
                break;
            };
            let amount = if avail < need { avail } else { need };
            ledger.credit(from, Account::Object(k), amount, "surplus transfer");
            transfers.push(ledger.transfers.last().unwrap().clone());
        }
        if ledger.balance[k].is_negative() {
            uncovered += -ledger.balance[k];
        }
        if let Some(i) = pos.checked_sub(order.len() - poor.len()) {
            entries[i].transfers = transfers;
            entries[i].fallback = ledger.balance[k].is_negative();
        }
    }
    Ok(Run {
        h,
        trace: CaseTrace { entries },
        ledger,
        passes,
        uncovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn inst(n: usize, edges: &[(usize, usize)]) -> Instance {
        Instance::new(n, 1, edges.iter().map(|&(u, v)| Edge::plain(u, v))).unwrap()
    }

    fn complete(n: usize) -> Instance {
        let mut e = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    e.push((u, v));
                }
            }
        }
        inst(n, &e)
    }

    #[test]
    fn cycle_is_kept_whole() {
        let g = inst(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        let s = solve_min(&g).unwrap();
        assert_eq!(s.solution.size(), 6);
        assert!(s.solution.is_valid());
    }

    #[test]
    fn k3_gives_a_triangle() {
        let s = solve_min(&complete(3)).unwrap();
        assert_eq!(s.solution.size(), 3);
    }

    #[test]
    fn complete_graphs_are_valid_and_close() {
        for n in 4..=7 {
            let g = complete(n);
            let s = solve_min(&g).unwrap();
            assert!(s.solution.is_valid());
            assert!(2 * s.solution.size() <= 3 * n, "n = {n}: {}", s.solution.size());
        }
    }

    #[test]
    fn dfs_joins_everything() {
        let g = inst(5, &[(0, 1), (1, 0), (1, 2), (2, 3), (3, 1), (3, 4), (4, 3), (2, 0)]);
        let cert = lower_bound(&g).unwrap();
        let (part, _) = crate::bounds::build_l(&g, &cert);
        let dfs = guided_dfs(&g, &part).unwrap();
        assert_eq!(dfs.tree.len(), dfs.members.len() - 1);
        let mut mask = vec![false; g.m()];
        for &e in dfs.tree.iter().chain(dfs.back.iter().map(|(_, e)| e)) {
            mask[e] = true;
        }
        merged_internal(&g, &part, &dfs, &mut mask);
        assert!(is_strongly_connected_mask(&g, &mask));
    }

    #[test]
    fn rich_object_is_one_merged_node() {
        // digon {0, 5} as the root object, 4-cycle 1..4 as a rich object
        let g = inst(6, &[(0, 5), (5, 0), (1, 2), (2, 3), (3, 4), (4, 1), (5, 1), (3, 0)]);
        let l: Vec<EdgeId> = [(0, 5), (5, 0), (1, 2), (2, 3), (3, 4), (4, 1), (5, 1)]
            .iter()
            .map(|&(u, v)| g.find_edge(u, v).unwrap())
            .collect();
        let part = ObjectPartition::new(&g, &l, None);
        let dfs = guided_dfs(&g, &part).unwrap();
        let big = dfs.members.iter().position(|m| m.len() == 4).expect("merged cycle");
        assert_eq!(dfs.members[big], vec![1, 2, 3, 4]);
        assert_eq!(dfs.tree.len(), 1);
        let s = solve_min(&g).unwrap();
        assert_eq!(s.solution.size(), crate::oracle::exact_min(&g, 24).unwrap().size());
    }

    #[test]
    fn back_edge_inserted_once_for_hanging_digon() {
        // cycle 0 -> 1 -> 2 -> 0 with a digon 2 <-> 3 hanging off node 2
        let g = inst(4, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 2)]);
        let cert = lower_bound(&g).unwrap();
        let (part, _) = crate::bounds::build_l(&g, &cert);
        let dfs = guided_dfs(&g, &part).unwrap();
        let into_two = dfs.back.iter().filter(|(_, e)| g.edge(*e).source == 3).count();
        assert!(into_two <= 1);
        assert_eq!(solve_min(&g).unwrap().solution.size(), 5);
    }

    #[test]
    fn primary_selection() {
        // u = 0; candidate 0 -> 1 leads only into a pocket {1, 2} that needs 0
        // to get out, candidate 0 -> 3 reaches visited node 4
        let g = inst(5, &[(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0), (2, 1)]);
        let mut visited = vec![false; 5];
        visited[4] = true;
        visited[0] = true;
        let cands = [g.find_edge(0, 1).unwrap(), g.find_edge(0, 3).unwrap()];
        assert_eq!(select_primary_edge(&g, 0, &cands, &visited).unwrap(), cands[1]);
        assert_eq!(select_primary_edge(&g, 0, &cands[..1], &visited), Err(MinError::NoFeasiblePrimary(0)));
        // every candidate works: lowest target
        let none = vec![false; 5];
        assert_eq!(select_primary_edge(&g, 0, &cands, &none).unwrap(), cands[0]);
    }

    #[test]
    fn forced_triangle_is_collapsed() {
        // triangle {1, 2, 3} entered only at 1 and left only from 1
        let g = inst(4, &[(0, 1), (1, 0), (1, 2), (2, 3), (3, 1), (2, 1)]);
        let (c, log) = preprocess_triangles(&g);
        assert_eq!(log.steps.len(), 1);
        assert_eq!(c.n(), 2);
        let s = solve_min(&g).unwrap();
        assert!(s.solution.is_valid());
        assert_eq!(s.solution.size(), 5);
    }

    #[test]
    fn required_triangle_variant_is_collapsed() {
        // D-edge (w, u) = (3, 1); v = 2 has no entry from outside
        let edges = [
            Edge::plain(0, 1),
            Edge::plain(1, 0),
            Edge::plain(1, 2),
            Edge::plain(2, 3),
            Edge::new(3, 1, 0, true),
            Edge::plain(3, 0),
            Edge::plain(0, 3),
        ];
        let g = Instance::new(4, 1, edges).unwrap();
        let (_, log) = preprocess_triangles(&g);
        assert!(!log.steps.is_empty());
        let s = solve_min(&g).unwrap();
        assert!(s.solution.is_valid());
        assert!(s.solution.edges.contains(&g.find_edge(3, 1).unwrap()));
    }

    #[test]
    fn open_triangle_is_untouched() {
        // entries at two nodes, exits from two nodes, nothing else forced
        let g = inst(5, &[(0, 1), (1, 2), (2, 0), (3, 0), (0, 3), (3, 1), (1, 3), (4, 1), (1, 4), (4, 2), (2, 4), (3, 4), (4, 3)]);
        let (c, log) = preprocess_triangles(&g);
        assert!(log.steps.is_empty());
        assert_eq!(c, g);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(solve_min(&inst(2, &[(0, 1)])).unwrap_err(), MinError::NotStronglyConnected);
        let l = Instance::new(2, 3, [Edge::new(0, 1, 1, false), Edge::plain(1, 0)]).unwrap();
        assert_eq!(solve_min(&l).unwrap_err(), MinError::Labeled(3));
    }

    #[test]
    fn ledger_charges_each_kept_edge_once() {
        let g = complete(5);
        let s = solve_min(&g).unwrap();
        let spent = s.ledger.transfers.iter().filter(|t| matches!(t.to, Account::Spent(_))).count();
        assert_eq!(spent, s.solution.size());
    }
}
