//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use strongred::arborescence::{is_arborescence, min_in_arborescence, min_out_arborescence, Cost, CostedArc, CostedDigraph, Direction};
use strongred::bounds::lower_bound;
use strongred::gen::{gap_family, gap_fractional_value, gap_optimum, greedy_adversarial, longest_simple_cycle, max_satisfiable, random_scc, sat_gadget, Clause, Literal};
use strongred::graph::{in_cut, is_valid_reduction, labeled_closure};
use strongred::maxred::{greedy_baseline, solve_max, MaxOptions};
use strongred::minred::solve_min;
use strongred::oracle::{exact_min, DEFAULT_BUDGET};
use strongred::pary::{classify, lift, recombine, Objective, ParityKind};
use strongred::{Edge, Instance};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn line(o: &Outcome) {
    println!("[{}] {:>2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                v.push((a, b));
            }
        }
    }
    v
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn from_bits(n: usize, ps: &[(usize, usize)], bits: u32) -> Instance {
    let edges = ps.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, &(a, b))| Edge::plain(a, b));
    Instance::new(n, 1, edges).unwrap()
}

/// Every strongly connected digraph on 2..=4 labeled nodes, plus one
/// representative per isomorphism class on 5 nodes.
fn exhaustive_family() -> Vec<Instance> {
    let mut out = Vec::new();
    for n in 2..=5usize {
        let ps = pairs(n);
        let index = |a: usize, b: usize| ps.iter().position(|&x| x == (a, b)).unwrap();
        let perms = permutations(n);
        let images: Vec<Vec<usize>> = perms.iter().map(|p| ps.iter().map(|&(a, b)| index(p[a], p[b])).collect()).collect();
        let graphs: Vec<Instance> = (0u32..(1 << ps.len()))
            .into_par_iter()
            .filter(|&bits| {
                if n < 5 {
                    return true;
                }
                images.iter().all(|img| {
                    let mut c = 0u32;
                    for (i, &j) in img.iter().enumerate() {
                        if bits >> i & 1 == 1 {
                            c |= 1 << j;
                        }
                    }
                    c >= bits
                })
            })
            .map(|bits| from_bits(n, &ps, bits))
            .filter(|g| g.is_strongly_connected())
            .collect();
        out.extend(graphs);
    }
    out
}

/// Strongly connected digraph by rejection sampling of edge sets.
fn sampled_scc(rng: &mut ChaCha8Rng, n: usize, max_m: usize, d: f64, p: u32) -> Instance {
    loop {
        let mut ps = pairs(n);
        for i in (1..ps.len()).rev() {
            let j = rng.gen_range(0..=i);
            ps.swap(i, j);
        }
        let m = rng.gen_range(n..=max_m.min(ps.len()));
        let edges: Vec<Edge> = ps[..m]
            .iter()
            .map(|&(a, b)| Edge::new(a, b, if p > 1 { rng.gen_range(0..p) } else { 0 }, d > 0.0 && rng.gen_bool(d)))
            .collect();
        let g = Instance::new(n, p, edges).unwrap();
        if g.is_strongly_connected() {
            return g;
        }
    }
}

/// 10^3 random instances with n <= 8 and at most 20 edges, half from the
/// Hamiltonian-cycle generator and half by rejection sampling.
fn random_small_family() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..1000u64)
        .map(|i| {
            let n = rng.gen_range(3..=8usize);
            let d = [0.0, 0.2, 0.5][(i % 3) as usize];
            if i % 2 == 0 {
                let m = rng.gen_range(n..=20.min(n * (n - 1)));
                random_scc(n, m, d, 1, 10_000 + i).unwrap()
            } else {
                sampled_scc(&mut rng, n, 20, d, 1)
            }
        })
        .collect()
}

fn criterion_validity() -> Outcome {
    let start = Instant::now();
    let fails: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=30usize);
            let m = rng.gen_range(n..=(3 * n).min(n * (n - 1)));
            let p = [1, 2, 3, 5][(seed % 4) as usize];
            let d = [0.0, 0.2, 0.5][(seed / 4 % 3) as usize];
            let g = random_scc(n, m, d, p, seed).unwrap();
            let plain = g.unlabeled();
            let all: Vec<usize> = (0..n).collect();
            let min = match solve_min(&plain) {
                Ok(s) => s,
                Err(e) => return Some(format!("seed {seed}: solve_min error {e}")),
            };
            if !min.solution.is_valid() {
                return Some(format!("seed {seed}: solve_min invalid"));
            }
            match solve_max(&plain, MaxOptions::default()) {
                Ok(s) if s.solution.is_valid() => {}
                _ => return Some(format!("seed {seed}: solve_max")),
            }
            match lift(&g, &all, &min.solution.edges) {
                Ok(l) if is_valid_reduction(&g, &l.edges).valid => {}
                _ => return Some(format!("seed {seed}: lift")),
            }
            for obj in [Objective::Min, Objective::Max] {
                match recombine(&g, obj) {
                    Ok(r) if r.solution.is_valid() => {}
                    _ => return Some(format!("seed {seed}: recombine {obj:?}")),
                }
            }
            None
        })
        .collect();
    Outcome {
        id: 1,
        name: "validity",
        pass: fails.is_empty(),
        detail: format!(
            "{} of 10000 instances valid for solve_min, solve_max, lift, recombine(min, max) in {:.1}s{}",
            10_000 - fails.len(),
            start.elapsed().as_secs_f64(),
            fails.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    }
}

struct OracleRow {
    exhaustive: bool,
    m: usize,
    opt: usize,
    min_size: usize,
    fallbacks: usize,
    max_deletions: usize,
    lb_total: Ratio<i64>,
}

fn oracle_rows(exhaustive: &[Instance], random: &[Instance]) -> Vec<OracleRow> {
    let tagged: Vec<(bool, &Instance)> = exhaustive.iter().map(|g| (true, g)).chain(random.iter().map(|g| (false, g))).collect();
    tagged
        .into_par_iter()
        .map(|(ex, g)| {
            let opt = exact_min(g, DEFAULT_BUDGET).expect("oracle within budget").size();
            let min = solve_min(g).expect("solve_min");
            let max = solve_max(g, MaxOptions::default()).expect("solve_max");
            let cert = lower_bound(g).expect("certificate");
            OracleRow {
                exhaustive: ex,
                m: g.m(),
                opt,
                min_size: min.solution.size(),
                fallbacks: min.trace.fallbacks(),
                max_deletions: max.solution.deletions(g),
                lb_total: Ratio::new(cert.total.0, 4),
            }
        })
        .collect()
}

fn criterion_min_ratio(rows: &[OracleRow], secs: f64) -> Outcome {
    let over = rows.iter().filter(|r| 2 * r.min_size > 3 * r.opt + 1).count();
    let ex_fallbacks: usize = rows.iter().filter(|r| r.exhaustive).map(|r| r.fallbacks).sum();
    let strong = rows.iter().filter(|r| 2 * r.min_size + 2 <= 3 * r.opt).count();
    let ex = rows.iter().filter(|r| r.exhaustive).count();
    Outcome {
        id: 2,
        name: "min ratio",
        pass: over == 0 && ex_fallbacks == 0,
        detail: format!(
            "{} instances ({} exhaustive n<=5, {} random n<=8): {} exceed ceil(1.5*OPT), {} fallbacks on the exhaustive set, {:.2}% meet 1.5*OPT-1, {:.1}s",
            rows.len(),
            ex,
            rows.len() - ex,
            over,
            ex_fallbacks,
            100.0 * strong as f64 / rows.len() as f64,
            secs
        ),
    }
}

fn criterion_max_ratio(rows: &[OracleRow]) -> Outcome {
    let half = rows.iter().filter(|r| 2 * r.max_deletions < r.m - r.opt).count();
    let eligible: Vec<&OracleRow> = rows.iter().filter(|r| r.m - r.opt >= 2).collect();
    let plus_one = eligible.iter().filter(|r| 2 * r.max_deletions >= r.m - r.opt + 2).count();
    let boundary = rows.len() - eligible.len();
    Outcome {
        id: 3,
        name: "max ratio",
        pass: half == 0 && plus_one == eligible.len(),
        detail: format!(
            "{} below ceil(OPT_del/2); {}/{} with OPT_del>=2 reach 0.5*OPT_del+1; {} instances with OPT_del<2 noted as boundary",
            half,
            plus_one,
            eligible.len(),
            boundary
        ),
    }
}

fn criterion_lower_bound(rows: &[OracleRow]) -> Outcome {
    let unsound = rows.iter().filter(|r| r.lb_total > Ratio::from_integer(r.opt as i64)).count();
    let gap: f64 = rows
        .iter()
        .map(|r| {
            let lb = *r.lb_total.numer() as f64 / *r.lb_total.denom() as f64;
            (r.opt as f64 - lb) / r.opt as f64
        })
        .sum::<f64>()
        / rows.len() as f64;
    Outcome {
        id: 4,
        name: "lower-bound soundness",
        pass: unsound == 0,
        detail: format!("{} of {} certificates exceed OPT; mean relative gap {:.4}", unsound, rows.len(), gap),
    }
}

fn criterion_gap() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut best_ratio = 0.0f64;
    for n in 2..=5 {
        let g = gap_family(n).unwrap();
        let opt = exact_min(&g, DEFAULT_BUDGET).unwrap().size();
        ok &= opt == (8 * n - 4).div_ceil(3) && opt == gap_optimum(n);
        let frac = gap_fractional_value(n);
        let ratio = opt as f64 / frac;
        best_ratio = best_ratio.max(ratio);
        let max_ratio = (g.m() as f64 - frac) / (g.m() - opt) as f64;
        parts.push(format!("n={n} OPT={opt} frac={frac} ratio={ratio:.3} max-deletions frac/int={max_ratio:.3}"));
    }
    // half on every edge covers every cut
    for n in [2, 3] {
        let g = gap_family(n).unwrap();
        let nn = g.n();
        for mask in 1u32..(1 << nn) - 1 {
            let set: Vec<usize> = (0..nn).filter(|&v| mask >> v & 1 == 1).collect();
            if in_cut(&g, &set).len() < 2 {
                ok = false;
            }
        }
    }
    ok &= best_ratio >= 1.25;
    Outcome {
        id: 5,
        name: "integrality gap",
        pass: ok,
        detail: format!("{}; every cut of n=2,3 has >=2 entering edges; max OPT/frac over n<=5 = {best_ratio:.3}", parts.join(", ")),
    }
}

fn criterion_sat() -> Outcome {
    let x = || Literal::pos(0);
    let nx = || Literal::neg(0);
    let y = || Literal::pos(1);
    let ny = || Literal::neg(1);
    let formulas: Vec<(Vec<Clause>, usize)> = vec![
        (vec![vec![x()], vec![x()], vec![nx()], vec![nx()]], 1),
        (vec![vec![x(), nx()], vec![x(), nx()]], 1),
        (vec![vec![x(), y()], vec![x(), ny()], vec![nx(), y()], vec![nx(), ny()]], 2),
        (vec![vec![x(), y()], vec![x(), y()], vec![nx(), ny()], vec![nx(), ny()]], 2),
        (vec![vec![x()], vec![x()], vec![nx(), y()], vec![nx(), ny()], vec![y(), ny()]], 2),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (formula, vars) in formulas {
        let gadget = sat_gadget(&formula, vars).unwrap();
        let m = gadget.clauses.len();
        let k = max_satisfiable(&gadget.clauses, vars);
        let want = 8 * vars + 2 * m - k;
        let opt = exact_min(&gadget.instance, 40).unwrap().size();
        let cycle = longest_simple_cycle(&gadget.instance);
        ok &= opt == want && cycle <= 5;
        parts.push(format!("n={vars} m={m} k={k}: OPT={opt} want={want} cycle={cycle}"));
    }
    Outcome {
        id: 6,
        name: "SAT gadget",
        pass: ok,
        detail: parts.join("; "),
    }
}

/// Minimum over all choices of one entering arc per non-root node that
/// reach every node from the root.
fn brute_out(g: &CostedDigraph, root: usize) -> Option<Cost> {
    let n = g.n();
    let entering: Vec<Vec<usize>> = (0..n).map(|v| (0..g.arcs().len()).filter(|&a| g.arcs()[a].target == v && g.arcs()[a].source != v).collect()).collect();
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    if others.iter().any(|&v| entering[v].is_empty()) {
        return None;
    }
    let mut best: Option<Cost> = None;
    let mut choice = vec![0usize; others.len()];
    loop {
        let arcs: Vec<usize> = others.iter().zip(&choice).map(|(&v, &c)| entering[v][c]).collect();
        if is_arborescence(g, root, &arcs, Direction::Out) {
            let cost: Cost = arcs.iter().map(|&a| g.arcs()[a].cost).sum();
            if best.is_none_or(|b| cost < b) {
                best = Some(cost);
            }
        }
        let mut i = 0;
        loop {
            if i == others.len() {
                return best;
            }
            choice[i] += 1;
            if choice[i] < entering[others[i]].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn criterion_arborescence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut bad = 0;
    let mut tested = 0;
    while tested < 200 {
        let n = rng.gen_range(2..=7usize);
        let mut arcs = Vec::new();
        for (a, b) in pairs(n) {
            if rng.gen_bool(0.45) {
                arcs.push(CostedArc {
                    source: a,
                    target: b,
                    cost: Cost::new(rng.gen_range(0..20), rng.gen_range(1..4)),
                });
            }
        }
        let g = CostedDigraph::new(n, arcs).unwrap();
        let root = rng.gen_range(0..n);
        let Some(want_out) = brute_out(&g, root) else {
            continue;
        };
        let Some(want_in) = brute_out(&g.reversed(), root) else {
            continue;
        };
        tested += 1;
        let out = min_out_arborescence(&g, root).unwrap();
        let inn = min_in_arborescence(&g, root).unwrap();
        if out.cost != want_out || inn.cost != want_in || out.dual_total() != out.cost || inn.dual_total() != inn.cost {
            bad += 1;
        }
        if !is_arborescence(&g, root, &out.arcs, Direction::Out) || !is_arborescence(&g, root, &inn.arcs, Direction::In) {
            bad += 1;
        }
    }
    Outcome {
        id: 7,
        name: "arborescences",
        pass: bad == 0,
        detail: format!("{bad} mismatches over {tested} random weighted digraphs (out and in, primal = brute force, dual = primal)"),
    }
}

fn criterion_parity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let mut disagree = 0;
    let mut over_one = 0;
    let mut invalid = 0;
    let mut multiple = 0;
    for i in 0..500 {
        let n = rng.gen_range(2..=8usize);
        let p = [2, 3, 5][i % 3];
        let g = if i % 2 == 0 {
            let m = rng.gen_range(n..=(2 * n).min(n * (n - 1)));
            random_scc(n, m, 0.0, p, 900 + i as u64).unwrap()
        } else {
            sampled_scc(&mut rng, n, 2 * n, 0.0, p)
        };
        let all: Vec<usize> = (0..n).collect();
        let tr1 = solve_min(&g.unlabeled()).unwrap().solution.edges;
        let class = classify(&g, &all, &tr1);
        let closure = labeled_closure(&g, &(0..g.m()).collect::<Vec<_>>());
        let counts: Vec<usize> = all.iter().flat_map(|&u| all.iter().map(move |&v| (u, v))).map(|(u, v)| closure.residues(u, v).len()).collect();
        let brute = if counts.iter().all(|&c| c == p as usize) {
            Some(ParityKind::Multiple)
        } else if counts.iter().all(|&c| c == 1) {
            Some(ParityKind::Single)
        } else {
            None
        };
        if brute != Some(class.kind) {
            disagree += 1;
        }
        if class.kind == ParityKind::Multiple {
            multiple += 1;
        }
        let l = lift(&g, &all, &tr1).unwrap();
        if l.edges.len() > tr1.len() + 1 {
            over_one += 1;
        }
        if !is_valid_reduction(&g, &l.edges).valid {
            invalid += 1;
        }
    }
    Outcome {
        id: 8,
        name: "parity classification",
        pass: disagree == 0 && over_one == 0 && invalid == 0,
        detail: format!("500 components ({multiple} multiple-parity): {disagree} disagree with the closure dichotomy, {over_one} lifts add >1 edge, {invalid} lifted solutions invalid"),
    }
}

fn criterion_greedy() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 4..=8 {
        let a = greedy_adversarial(n).unwrap();
        let g = &a.instance;
        let greedy = greedy_baseline(g, &a.order).unwrap().deletions(g);
        let exact = g.m() - exact_min(g, DEFAULT_BUDGET).unwrap().size();
        ok &= greedy == 1 && exact == n - 2 && a.greedy_deletions == 1 && a.optimum_deletions == n - 2;
        parts.push(format!("n={n}: greedy {greedy}, exact {exact}"));
    }
    Outcome {
        id: 9,
        name: "greedy separation",
        pass: ok,
        detail: parts.join("; "),
    }
}

fn peak_rss_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

fn criterion_performance() -> Outcome {
    let g = random_scc(10_000, 100_000, 0.0, 1, 10).unwrap();
    let start = Instant::now();
    let s = solve_min(&g).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rss = peak_rss_mb();
    let within_memory = rss.is_none_or(|r| r <= 500.0);
    Outcome {
        id: 10,
        name: "performance",
        pass: secs <= 60.0 && within_memory && s.solution.is_valid(),
        detail: format!(
            "n=10^4, m=10^5: {:.1}s, |H|={}, LB={}, peak RSS {}",
            secs,
            s.solution.size(),
            s.certificate.bound(),
            rss.map_or("unknown".into(), |r| format!("{r:.0} MB"))
        ),
    }
}

fn main() {
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        line(&o);
        outcomes.push(o);
    };
    run(criterion_validity());
    let start = Instant::now();
    let exhaustive = exhaustive_family();
    let random = random_small_family();
    let rows = oracle_rows(&exhaustive, &random);
    let secs = start.elapsed().as_secs_f64();
    run(criterion_min_ratio(&rows, secs));
    run(criterion_max_ratio(&rows));
    run(criterion_lower_bound(&rows));
    run(criterion_gap());
    run(criterion_sat());
    run(criterion_arborescence());
    run(criterion_parity());
    run(criterion_greedy());
    run(criterion_performance());
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("acceptance: {} passed, {} failed", outcomes.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
