use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use strongred::bounds::lower_bound;
use strongred::format::{parse_instance, parse_solution, write_instance, write_solution};
use strongred::gen::{gap_family, greedy_adversarial, random_scc, sat_gadget, Literal};
use strongred::graph::{is_valid_reduction, scc, Violation};
use strongred::maxred::MaxOptions;
use strongred::minred::MinError;
use strongred::oracle::{exact_max, exact_min, OracleError, DEFAULT_BUDGET};
use strongred::pary::{recombine_with, Objective, PAryError};
use strongred::{EdgeId, Instance};

#[derive(Parser)]
#[command(name = "strongred", version, about = "Approximate minimum equivalent digraphs and p-ary transitive reductions")]
struct Cli {
    /// Run on a single thread.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Goal {
    Min,
    Max,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce an instance and print the kept edges.
    Solve {
        #[arg(long, value_enum, default_value = "min")]
        objective: Goal,
        /// Use the exact branch-and-bound solver.
        #[arg(long)]
        exact: bool,
        /// Skip the forced-first-deletion loop of the max solver.
        #[arg(long)]
        no_initial_deletion: bool,
        /// Free-edge budget for --exact.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Print a JSON report instead of the edge list.
        #[arg(long)]
        json: bool,
        /// Instance file, or `-` for standard input.
        file: PathBuf,
    },
    /// Check a solution file against an instance.
    Verify { instance: PathBuf, solution: PathBuf },
    /// Print the lower bound of an instance.
    Lb { file: PathBuf },
    /// Generate an instance.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
    /// Run a benchmark suite and write a JSON report.
    Bench {
        #[arg(long, default_value = "small")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "min")]
        objective: Goal,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Family {
    /// Ladder with a large integrality gap.
    Gap { n: usize },
    /// Reduction gadget for a CNF formula; each clause is a quoted list of
    /// signed 1-based variables, e.g. "1 -2".
    Sat {
        #[arg(long)]
        vars: usize,
        #[arg(required = true, allow_hyphen_values = true)]
        clauses: Vec<String>,
    },
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        p: u32,
        /// Fraction of required edges.
        #[arg(long, default_value_t = 0.0)]
        d: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Instance where a bad deletion order makes greedy delete one edge.
    Adversarial { n: usize },
}

enum Failure {
    Input(String),
    Internal(String),
    Budget(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Internal(_) => 2,
            Failure::Budget(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Internal(m) | Failure::Budget(m) => m,
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure::Budget(e.to_string())
    }
}

impl From<PAryError> for Failure {
    fn from(e: PAryError) -> Self {
        match e {
            PAryError::Min(MinError::NotStronglyConnected) => Failure::Input(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct Report {
    instance: String,
    n: usize,
    m: usize,
    p: u32,
    #[serde(rename = "|D|")]
    d: usize,
    lower_bound: Option<usize>,
    solution_size: usize,
    deletions: usize,
    optimum: Option<usize>,
    ratio: Option<f64>,
    case_trace_summary: BTreeMap<String, usize>,
    fallbacks: usize,
    wall_time_ms: f64,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct BenchReport {
    suite: String,
    seed: u64,
    objective: &'static str,
    instances: Vec<Report>,
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::Input(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    parse_instance(&read_input(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

struct Outcome {
    edges: Vec<EdgeId>,
    lower_bound: Option<usize>,
    optimum: Option<usize>,
    summary: BTreeMap<String, usize>,
    fallbacks: usize,
}

fn run_solver(inst: &Instance, goal: Goal, exact: bool, max: MaxOptions, budget: usize) -> Result<Outcome, Failure> {
    if exact {
        let s = match goal {
            Goal::Min => exact_min(inst, budget)?,
            Goal::Max => exact_max(inst, budget)?,
        };
        return Ok(Outcome {
            optimum: Some(s.size()),
            lower_bound: s.lower_bound,
            edges: s.edges,
            summary: BTreeMap::new(),
            fallbacks: 0,
        });
    }
    let objective = match goal {
        Goal::Min => Objective::Min,
        Goal::Max => Objective::Max,
    };
    let r = recombine_with(inst, objective, max)?;
    Ok(Outcome {
        lower_bound: r.solution.lower_bound,
        edges: r.solution.edges,
        optimum: None,
        summary: r.case_summary,
        fallbacks: r.fallbacks,
    })
}

fn report(name: String, inst: &Instance, out: &Outcome, goal: Goal, ms: f64, seed: Option<u64>) -> Report {
    let size = out.edges.len();
    let deletions = inst.m() - size;
    let ratio = match goal {
        Goal::Min => out.optimum.or(out.lower_bound).filter(|&b| b > 0).map(|b| size as f64 / b as f64),
        Goal::Max => out.optimum.map(|o| inst.m() - o).filter(|&d| d > 0).map(|d| deletions as f64 / d as f64),
    };
    Report {
        instance: name,
        n: inst.n(),
        m: inst.m(),
        p: inst.p(),
        d: inst.required_count(),
        lower_bound: out.lower_bound,
        solution_size: size,
        deletions,
        optimum: out.optimum,
        ratio,
        case_trace_summary: out.summary.clone(),
        fallbacks: out.fallbacks,
        wall_time_ms: ms,
        seed,
    }
}

fn describe(inst: &Instance, v: &Violation) -> String {
    let edge = |e: EdgeId| {
        let ed = inst.edge(e);
        format!("{} -> {}", ed.source, ed.target)
    };
    match *v {
        Violation::UnknownEdge(e) => format!("edge id {e} is not in the instance"),
        Violation::MissingRequired(e) => format!("required edge {} is missing", edge(e)),
        Violation::MissingTriple { source, target, residue } => {
            format!("no kept path from {source} to {target} with residue {residue}")
        }
    }
}

fn solve(goal: Goal, exact: bool, no_initial_deletion: bool, budget: usize, json: bool, file: &Path) -> Result<(), Failure> {
    let inst = load(file)?;
    let start = Instant::now();
    let max = MaxOptions {
        initial_deletion: !no_initial_deletion,
    };
    let out = run_solver(&inst, goal, exact, max, budget)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let rep = report(file.display().to_string(), &inst, &out, goal, ms, None);
    if json {
        println!("{}", serde_json::to_string_pretty(&rep).unwrap());
    } else {
        print!("{}", write_solution(&inst, &out.edges));
        let lb = rep.lower_bound.map_or("-".to_string(), |b| b.to_string());
        let ratio = rep.ratio.map_or("-".to_string(), |r| format!("{r:.3}"));
        println!("# size {} deletions {} lower_bound {lb} ratio {ratio}", rep.solution_size, rep.deletions);
        if let Some(o) = rep.optimum {
            println!("# optimum {o}");
        }
    }
    if out.fallbacks > 0 {
        return Err(Failure::Internal(format!("{} objects fell back to the plain search output", out.fallbacks)));
    }
    Ok(())
}

fn verify(instance: &Path, solution: &Path) -> Result<(), Failure> {
    let inst = load(instance)?;
    let edges = parse_solution(&inst, &read_input(solution)?).map_err(|e| Failure::Input(format!("{}: {e}", solution.display())))?;
    let r = is_valid_reduction(&inst, &edges);
    match r.violation {
        None => {
            println!("valid: {} kept, {} deleted", edges.len(), inst.m() - edges.len());
            Ok(())
        }
        Some(v) => Err(Failure::Input(format!("invalid: {}", describe(&inst, &v)))),
    }
}

fn lb(file: &Path) -> Result<(), Failure> {
    let inst = load(file)?;
    let comps = scc(&inst);
    let mut total = 0;
    for nodes in &comps.components {
        if nodes.len() < 2 {
            continue;
        }
        let (sub, _) = inst.induced(nodes);
        let cert = lower_bound(&sub.unlabeled()).map_err(|e| Failure::Internal(e.to_string()))?;
        println!("# component of {} nodes: {} requirements, {} matched pairs, value {}", nodes.len(), cert.requirements.len(), cert.matching.len(), cert.total);
        total += cert.bound();
    }
    println!("lower_bound {total}");
    Ok(())
}

fn parse_clause(text: &str, vars: usize) -> Result<Vec<Literal>, Failure> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let x: i64 = t.parse().map_err(|_| Failure::Input(format!("bad literal `{t}`")))?;
            let var = x.unsigned_abs() as usize;
            if var == 0 || var > vars {
                return Err(Failure::Input(format!("literal `{t}` outside 1..={vars}")));
            }
            Ok(if x > 0 { Literal::pos(var - 1) } else { Literal::neg(var - 1) })
        })
        .collect()
}

fn generate(family: &Family) -> Result<(), Failure> {
    let bad = |e: strongred::gen::GenError| Failure::Input(e.to_string());
    let inst = match family {
        Family::Gap { n } => gap_family(*n).map_err(bad)?,
        Family::Sat { vars, clauses } => {
            let formula = clauses.iter().map(|c| parse_clause(c, *vars)).collect::<Result<Vec<_>, _>>()?;
            sat_gadget(&formula, *vars).map_err(bad)?.instance
        }
        Family::Random { n, m, p, d, seed } => random_scc(*n, *m, *d, *p, *seed).map_err(bad)?,
        Family::Adversarial { n } => greedy_adversarial(*n).map_err(bad)?.instance,
    };
    print!("{}", write_instance(&inst));
    Ok(())
}

fn suite(name: &str, seed: u64) -> Result<Vec<(String, Instance, Option<u64>)>, Failure> {
    let bad = |e: strongred::gen::GenError| Failure::Internal(e.to_string());
    let mut out = Vec::new();
    match name {
        "small" => {
            for i in 0..64u64 {
                let s = seed.wrapping_add(i);
                let n = 3 + (i % 6) as usize;
                let m = (2 * n).min(n * (n - 1));
                let p = [1, 2, 3, 5][(i % 4) as usize];
                out.push((format!("small-{i:03}"), random_scc(n, m, 0.2 * (i % 3) as f64, p, s).map_err(bad)?, Some(s)));
            }
        }
        "gap" => {
            for n in 2..=5 {
                out.push((format!("gap-{n}"), gap_family(n).map_err(bad)?, None));
            }
        }
        "adversarial" => {
            for n in 4..=8 {
                out.push((format!("adversarial-{n}"), greedy_adversarial(n).map_err(bad)?.instance, None));
            }
        }
        "large" => {
            for i in 0..4u64 {
                let s = seed.wrapping_add(i);
                out.push((format!("large-{i}"), random_scc(2000, 10000, 0.0, 1, s).map_err(bad)?, Some(s)));
            }
        }
        other => return Err(Failure::Input(format!("unknown suite `{other}` (small, gap, adversarial, large)"))),
    }
    Ok(out)
}

fn bench(name: &str, seed: u64, goal: Goal, out_path: &Path) -> Result<(), Failure> {
    let instances = suite(name, seed)?;
    let with_oracle = name != "large";
    let mut reports: Vec<Report> = instances
        .into_par_iter()
        .map(|(label, inst, s)| {
            let start = Instant::now();
            let mut out = run_solver(&inst, goal, false, MaxOptions::default(), DEFAULT_BUDGET)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            if with_oracle {
                out.optimum = exact_min(&inst, DEFAULT_BUDGET).ok().map(|s| s.size());
            }
            Ok(report(label, &inst, &out, goal, ms, s))
        })
        .collect::<Result<_, Failure>>()?;
    reports.sort_by(|a, b| a.instance.cmp(&b.instance));
    let doc = BenchReport {
        suite: name.to_string(),
        seed,
        objective: if goal == Goal::Min { "min" } else { "max" },
        instances: reports,
    };
    let text = serde_json::to_string_pretty(&doc).unwrap();
    std::fs::write(out_path, text + "\n").map_err(|e| Failure::Input(format!("{}: {e}", out_path.display())))?;
    let fallbacks: usize = doc.instances.iter().map(|r| r.fallbacks).sum();
    eprintln!("{} instances written to {}", doc.instances.len(), out_path.display());
    if fallbacks > 0 {
        return Err(Failure::Internal(format!("{fallbacks} fallbacks in the suite")));
    }
    Ok(())
}

fn configure_threads(deterministic: bool) {
    let threads = if deterministic {
        Some(1)
    } else {
        std::env::var("STRONGRED_THREADS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|&t| t > 0)
    };
    if let Some(t) = threads {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.deterministic);
    let result = match &cli.command {
        Command::Solve {
            objective,
            exact,
            no_initial_deletion,
            budget,
            json,
            file,
        } => solve(*objective, *exact, *no_initial_deletion, *budget, *json, file),
        Command::Verify { instance, solution } => verify(instance, solution),
        Command::Lb { file } => lb(file),
        Command::Gen { family } => generate(family),
        Command::Bench { suite, seed, objective, out } => bench(suite, *seed, *objective, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
