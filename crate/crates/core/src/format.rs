//! Line-oriented text formats for instances and solutions.
//!
//! ```text
//! # a labeled digon
//! p 2
//! nodes 2
//! edge 0 1 1 0
//! edge 1 0 0 1
//! ```
//!
//! A solution lists one `keep <u> <v>` line per kept edge.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Edge, EdgeId, GraphError, Instance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `{0}` header")]
    MissingHeader(&'static str),
    #[error("line {line}: no edge {u} -> {v} in the instance")]
    UnknownEdge { line: usize, u: usize, v: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, msg: msg.into() }
}

/// Splits `text` into numbered, comment-free, nonempty token lists.
fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn number<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T, FormatError> {
    tok.parse().map_err(|_| syntax(line, format!("bad {what} `{tok}`")))
}

pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let mut p: Option<u32> = None;
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    for (line, t) in lines(text) {
        match (t[0], t.len()) {
            ("p", 2) if p.is_none() && n.is_none() => p = Some(number(line, t[1], "modulus")?),
            ("nodes", 2) if p.is_some() && n.is_none() => n = Some(number(line, t[1], "node count")?),
            ("edge", 5) => {
                if n.is_none() {
                    return Err(FormatError::MissingHeader(if p.is_none() { "p" } else { "nodes" }));
                }
                let required = match t[4] {
                    "0" => false,
                    "1" => true,
                    other => return Err(syntax(line, format!("required flag must be 0 or 1, got `{other}`"))),
                };
                edges.push(Edge::new(
                    number(line, t[1], "node")?,
                    number(line, t[2], "node")?,
                    number(line, t[3], "label")?,
                    required,
                ));
            }
            _ => return Err(syntax(line, format!("unexpected `{}`", t.join(" ")))),
        }
    }
    let p = p.ok_or(FormatError::MissingHeader("p"))?;
    let n = n.ok_or(FormatError::MissingHeader("nodes"))?;
    Ok(Instance::new(n, p, edges)?)
}

pub fn write_instance(inst: &Instance) -> String {
    let mut out = String::new();
    writeln!(out, "p {}", inst.p()).unwrap();
    writeln!(out, "nodes {}", inst.n()).unwrap();
    for e in inst.edges() {
        writeln!(out, "edge {} {} {} {}", e.source, e.target, e.label, u8::from(e.required)).unwrap();
    }
    out
}

pub fn parse_solution(inst: &Instance, text: &str) -> Result<Vec<EdgeId>, FormatError> {
    let mut out = Vec::new();
    for (line, t) in lines(text) {
        if t.len() != 3 || t[0] != "keep" {
            return Err(syntax(line, format!("expected `keep <u> <v>`, got `{}`", t.join(" "))));
        }
        let (u, v) = (number(line, t[1], "node")?, number(line, t[2], "node")?);
        let e = inst.find_edge(u, v).ok_or(FormatError::UnknownEdge { line, u, v })?;
        out.push(e);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn write_solution(inst: &Instance, edges: &[EdgeId]) -> String {
    let mut sorted = edges.to_vec();
    sorted.sort_unstable();
    let mut out = String::new();
    for e in sorted {
        let ed = inst.edge(e);
        writeln!(out, "keep {} {}", ed.source, ed.target).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_with_comments() {
        let text = "# digon\np 2\nnodes 2\nedge 0 1 1 0  # odd\n\nedge 1 0 0 1\n";
        let g = parse_instance(text).unwrap();
        assert_eq!((g.n(), g.m(), g.p()), (2, 2, 2));
        assert!(g.edge(g.find_edge(1, 0).unwrap()).required);
    }

    #[test]
    fn rejects_malformed_input() {
        assert_eq!(parse_instance("nodes 2\n"), Err(FormatError::Syntax { line: 1, msg: "unexpected `nodes 2`".into() }));
        assert_eq!(parse_instance("p 1\nedge 0 1 0 0\n"), Err(FormatError::MissingHeader("nodes")));
        assert!(matches!(parse_instance("p 1\nnodes 2\nedge 0 1 1 0\n"), Err(FormatError::Graph(GraphError::LabelOutOfRange { .. }))));
        assert!(matches!(parse_instance("p 4\nnodes 2\n"), Err(FormatError::Graph(GraphError::NonPrimeModulus(4)))));
        assert!(matches!(parse_instance("p 1\nnodes 2\nedge 0 1 0 2\n"), Err(FormatError::Syntax { line: 3, .. })));
    }

    #[test]
    fn solution_lines_map_to_edges() {
        let g = parse_instance("p 1\nnodes 3\nedge 0 1 0 0\nedge 1 2 0 0\nedge 2 0 0 0\n").unwrap();
        let s = parse_solution(&g, "keep 1 2\nkeep 0 1\n").unwrap();
        assert_eq!(write_solution(&g, &s), "keep 0 1\nkeep 1 2\n");
        assert_eq!(parse_solution(&g, "keep 0 2\n"), Err(FormatError::UnknownEdge { line: 1, u: 0, v: 2 }));
    }

    proptest! {
        #[test]
        fn instance_round_trip(n in 2usize..7, p in prop::sample::select(vec![1u32, 2, 3, 5]), bits in any::<u64>(), labels in any::<u64>()) {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n {
                for v in 0..n {
                    if u != v {
                        if bits >> k & 1 == 1 {
                            edges.push(Edge::new(u, v, ((labels >> k) % p as u64) as u32, (bits >> (k + 1)) & 3 == 0));
                        }
                        k += 1;
                    }
                }
            }
            let g = Instance::new(n, p, edges).unwrap();
            let text = write_instance(&g);
            let back = parse_instance(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(write_instance(&back), text);
        }
    }
}
