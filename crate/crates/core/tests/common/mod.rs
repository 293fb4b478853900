//! Fixture loading and fault injection shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use parasched::dag::{build_graph, parse_dag_text, Dag};
use parasched::generation::rule_based_dag;
use parasched::package::{load_corpus, Corpus, TaskPackage};
use parasched::random::{random_dag_seeded, RandomDagConfig};
use parasched::validator::ProblemCode;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read_fixture(name: &str) -> String {
    fs::read_to_string(fixtures().join(name)).unwrap()
}

pub fn dag_fixture(name: &str) -> Dag {
    parse_dag_text(&read_fixture(name)).unwrap()
}

pub fn corpus() -> Corpus {
    let (corpus, diags) = load_corpus(&fixtures().join("corpus"));
    assert!(diags.is_empty(), "{diags:?}");
    corpus
}

pub fn packages(corpus: &Corpus, scene: &str, ids: &str) -> Vec<TaskPackage> {
    corpus.packages(scene).into_iter().filter(|p| ids.contains(p.package_id)).cloned().collect()
}

/// Valid graphs to mutate: the hand-written and generated scene graphs plus
/// random ones.
pub fn valid_graphs() -> Vec<Dag> {
    let c = corpus();
    let mut out = vec![
        dag_fixture("kitchen_dag.txt"),
        dag_fixture("package_a_dag.txt"),
        dag_fixture("deadlock_dag.txt"),
        rule_based_dag(&packages(&c, "greenhouse", "AB")).unwrap(),
        rule_based_dag(&packages(&c, "kitchen", "ABCDE")).unwrap(),
        rule_based_dag(&packages(&c, "greenhouse", "ABC")).unwrap(),
    ];
    for seed in 0..60 {
        out.push(random_dag_seeded(seed, &RandomDagConfig::with_max_nodes(6 + (seed % 15) as usize)));
    }
    out
}

fn reachable_from(dag: &Dag, pos: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![pos];
    while let Some(p) = stack.pop() {
        if seen.insert(p) {
            stack.extend(dag.succs_at(p));
        }
    }
    seen
}

/// One injected dependency `pred -> node` expected to raise `code`.
pub struct Mutation {
    pub dag: Dag,
    pub pred: usize,
    pub node: usize,
}

/// Adds one edge that commits a `code` error, if `dag` offers a spot for
/// one. The edge never closes a cycle.
pub fn inject<R: Rng>(rng: &mut R, dag: &Dag, code: ProblemCode) -> Option<Mutation> {
    let n = dag.len();
    let mut pairs = vec![];
    for i in 0..n {
        let ni = dag.at(i);
        if ni.kind.is_switch() || ni.kind.is_completion() {
            continue;
        }
        let below = reachable_from(dag, i);
        for j in 0..n {
            let nj = dag.at(j);
            if below.contains(&j) || dag.preds_at(i).contains(&j) || nj.kind.is_completion() {
                continue;
            }
            let differ = matches!((ni.source(), nj.source()), (Some(a), Some(b)) if a != b);
            let ok = match code {
                ProblemCode::P1 => !ni.kind.is_pick() && nj.kind.is_place() && differ,
                ProblemCode::P3 => nj.kind.is_tool_use() && differ,
                ProblemCode::P2 => false,
            };
            if ok {
                pairs.push((j, i));
            }
        }
    }
    if code == ProblemCode::P2 {
        // A place of a tool that is used after its pick: hook it straight to the pick.
        for j in 0..n {
            let nj = dag.at(j);
            if !nj.kind.is_pick() {
                continue;
            }
            let tool = nj.target();
            let used = dag.succs_at(j).iter().any(|&u| dag.at(u).kind.is_tool_use() && dag.at(u).source() == tool);
            if !used {
                continue;
            }
            for &i in reachable_from(dag, j).iter() {
                let ni = dag.at(i);
                if ni.kind.is_place() && ni.source() == tool && !dag.preds_at(i).contains(&j) {
                    pairs.push((j, i));
                }
            }
        }
    }
    let &(j, i) = pairs.choose(rng)?;
    let mut nodes = dag.nodes().to_vec();
    let pred = nodes[j].index;
    let node = nodes[i].index;
    nodes[i].edges.push(pred);
    Some(Mutation { dag: build_graph(nodes).expect("mutation keeps the graph acyclic"), pred, node })
}

/// Injects `count` faults of class `code` into randomly chosen valid graphs
/// and returns how many were reported as exactly that one problem on exactly
/// the injected edge.
pub fn detected<R: Rng>(rng: &mut R, graphs: &[Dag], code: ProblemCode, count: usize) -> usize {
    let mut hits = 0;
    let mut made = 0;
    while made < count {
        let base = graphs.choose(rng).unwrap();
        let Some(m) = inject(rng, base, code) else { continue };
        made += 1;
        let diags = parasched::validator::verify(&m.dag);
        if diags.len() == 1 && diags[0].code == code && diags[0].edge == (m.pred, m.node) {
            hits += 1;
        }
    }
    hits
}
