//! Bipartite matching: Hopcroft–Karp for the unweighted case and successive
//! shortest paths for positive integer weights.

use std::collections::VecDeque;

/// An edge `(left, right, weight)` of a bipartite graph. Weights are positive.
pub type WeightedPair = (usize, usize, i64);

/// Maximum-cardinality matching. Returns `mate_of_left`.
pub fn hopcroft_karp(left: usize, right: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    const INF: usize = usize::MAX;
    let mut mate_l: Vec<Option<usize>> = vec![None; left];
    let mut mate_r: Vec<Option<usize>> = vec![None; right];
    let mut dist = vec![INF; left];
    let mut it = vec![0usize; left];
    let mut stack: Vec<usize> = Vec::new();
    loop {
        // layered BFS from free left vertices
        let mut queue = VecDeque::new();
        for l in 0..left {
            if mate_l[l].is_none() {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = INF;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                match mate_r[r] {
                    None => found = true,
                    Some(l2) if dist[l2] == INF => {
                        dist[l2] = dist[l] + 1;
                        queue.push_back(l2);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        it.iter_mut().for_each(|x| *x = 0);
        for start in 0..left {
            if mate_l[start].is_some() {
                continue;
            }
            // iterative DFS along the layers
            stack.clear();
            stack.push(start);
            while let Some(&l) = stack.last() {
                if it[l] == adj[l].len() {
                    dist[l] = INF;
                    stack.pop();
                    continue;
                }
                let r = adj[l][it[l]];
                it[l] += 1;
                match mate_r[r] {
                    None => {
                        // augment along the stack
                        let mut r_cur = r;
                        while let Some(l_cur) = stack.pop() {
                            let prev = mate_l[l_cur];
                            mate_l[l_cur] = Some(r_cur);
                            mate_r[r_cur] = Some(l_cur);
                            match prev {
                                Some(pr) => r_cur = pr,
                                None => break,
                            }
                        }
                        stack.clear();
                        break;
                    }
                    Some(l2) if dist[l2] == dist[l] + 1 => stack.push(l2),
                    _ => {}
                }
            }
        }
    }
    mate_l
}

/// Maximum-weight matching on positive integer weights. Pairs are returned
/// sorted by left vertex. Among several maximum matchings the one found by
/// augmenting along lowest-index shortest paths is returned.
pub fn max_weight_matching(left: usize, right: usize, pairs: &[WeightedPair]) -> Vec<(usize, usize)> {
    if pairs.is_empty() {
        return Vec::new();
    }
    let uniform = pairs.iter().all(|p| p.2 == pairs[0].2);
    if uniform {
        let mut adj = vec![Vec::new(); left];
        for &(l, r, _) in pairs {
            adj[l].push(r);
        }
        adj.iter_mut().for_each(|a| {
            a.sort_unstable();
            a.dedup();
        });
        let mates = hopcroft_karp(left, right, &adj);
        return mates
            .iter()
            .enumerate()
            .filter_map(|(l, m)| m.map(|r| (l, r)))
            .collect();
    }
    successive_shortest_paths(left, right, pairs)
}

fn successive_shortest_paths(left: usize, right: usize, pairs: &[WeightedPair]) -> Vec<(usize, usize)> {
    // nodes: source, left vertices, right vertices, sink
    let s = 0;
    let t = left + right + 1;
    let nodes = t + 1;
    #[derive(Clone, Copy)]
    struct Arc {
        to: usize,
        cap: i32,
        cost: i64,
    }
    let mut arcs: Vec<Arc> = Vec::new();
    let mut head: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let add = |arcs: &mut Vec<Arc>, head: &mut Vec<Vec<usize>>, a: usize, b: usize, cost: i64| {
        head[a].push(arcs.len());
        arcs.push(Arc { to: b, cap: 1, cost });
        head[b].push(arcs.len());
        arcs.push(Arc { to: a, cap: 0, cost: -cost });
    };
    for l in 0..left {
        add(&mut arcs, &mut head, s, 1 + l, 0);
    }
    let mut pair_arc = Vec::with_capacity(pairs.len());
    for &(l, r, w) in pairs {
        pair_arc.push(arcs.len());
        add(&mut arcs, &mut head, 1 + l, 1 + left + r, -w);
    }
    for r in 0..right {
        add(&mut arcs, &mut head, 1 + left + r, t, 0);
    }
    loop {
        // SPFA over the residual graph; costs may be negative but there is
        // no negative cycle because the current flow is min-cost.
        let mut dist = vec![i64::MAX; nodes];
        let mut prev_arc = vec![usize::MAX; nodes];
        let mut in_queue = vec![false; nodes];
        let mut queue = VecDeque::new();
        dist[s] = 0;
        queue.push_back(s);
        in_queue[s] = true;
        while let Some(x) = queue.pop_front() {
            in_queue[x] = false;
            for &a in &head[x] {
                let arc = arcs[a];
                if arc.cap > 0 && dist[x] + arc.cost < dist[arc.to] {
                    dist[arc.to] = dist[x] + arc.cost;
                    prev_arc[arc.to] = a;
                    if !in_queue[arc.to] {
                        in_queue[arc.to] = true;
                        queue.push_back(arc.to);
                    }
                }
            }
        }
        if dist[t] >= 0 {
            break;
        }
        let mut x = t;
        while x != s {
            let a = prev_arc[x];
            arcs[a].cap -= 1;
            arcs[a ^ 1].cap += 1;
            x = arcs[a ^ 1].to;
        }
    }
    let mut out: Vec<(usize, usize)> = pairs
        .iter()
        .zip(&pair_arc)
        .filter(|(_, &a)| arcs[a].cap == 0)
        .map(|(&(l, r, _), _)| (l, r))
        .collect();
    out.sort_unstable();
    out
}
