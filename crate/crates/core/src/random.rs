//! Seeded generator of valid dependency graphs for fuzzing and oracle
//! comparison.
//!
//! Every object gets a pick, zero or more uses and a place. Only the first
//! use may be a dual-arm skill. Picks may wait on earlier places or container
//! switches, and switches may wait on any earlier node, so the graphs pass
//! [`crate::validator::verify`] by construction.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dag::{build_graph, Dag, DagNode};
use crate::package::SkillCall;
use crate::skills::{self, SkillCategory};

const SINGLE_USES: &[&str] = &["wipe", "stick_on", "pour_into", "push_to", "write", "inspect", "scan", "tighten", "mark"];
const DUAL_USES: &[&str] = &["cut", "stir", "bind", "weld", "assemble", "drill", "lift_from"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomDagConfig {
    /// Upper bound on node count, completion included.
    pub max_nodes: usize,
    pub max_uses: usize,
    pub switch_prob: f64,
    pub dual_prob: f64,
    pub cross_edge_prob: f64,
    pub max_duration: u64,
    pub max_delay: u64,
}

impl RandomDagConfig {
    pub fn with_max_nodes(max_nodes: usize) -> Self {
        RandomDagConfig {
            max_nodes,
            max_uses: 2,
            switch_prob: 0.15,
            dual_prob: 0.35,
            cross_edge_prob: 0.3,
            max_duration: 10,
            max_delay: 0,
        }
    }
}

fn call(skill: &str, source: Option<String>, target: String) -> SkillCall {
    SkillCall { skill: skill.to_string(), source, target }
}

fn arms(skill: &str) -> u8 {
    skills::lookup(skill).unwrap().default_arms
}

pub fn random_dag<R: Rng>(rng: &mut R, cfg: &RandomDagConfig) -> Dag {
    let mut nodes: Vec<DagNode> = vec![];
    // Indices of places and switches a later pick may wait on.
    let mut anchors: Vec<usize> = vec![];
    let mut budget = cfg.max_nodes.saturating_sub(1).max(1);
    let mut objects = 0;
    let switches: Vec<&str> =
        skills::SKILLS.iter().filter(|s| s.category == SkillCategory::ContainerSwitch).map(|s| s.name).collect();

    let duration = |rng: &mut R| rng.gen_range(1..=cfg.max_duration.max(1));

    while budget > 0 {
        let next = nodes.len() + 1;
        if budget == 1 || rng.gen_bool(cfg.switch_prob) {
            let skill = *switches.choose(rng).unwrap();
            let target = format!("box{}", rng.gen_range(1..=2));
            let mut edges = vec![];
            if next > 1 && rng.gen_bool(cfg.cross_edge_prob) {
                edges.push(rng.gen_range(1..next));
            }
            let t = duration(rng);
            nodes.push(DagNode::op(next, call(skill, None, target), arms(skill), t, edges));
            anchors.push(next);
            budget -= 1;
            continue;
        }

        objects += 1;
        let object = format!("obj{objects}");
        let uses = rng.gen_range(0..=cfg.max_uses.min(budget - 2));
        let mut edges: Vec<usize> = anchors.iter().copied().filter(|_| rng.gen_bool(cfg.cross_edge_prob)).collect();
        edges.truncate(2);
        let t = duration(rng);
        let pick = DagNode::op(next, call("pick", Some(format!("loc{}", rng.gen_range(1..=3))), object.clone()), 1, t, edges);
        nodes.push(pick);
        let mut last = next;
        for u in 0..uses {
            let skill = if u == 0 && rng.gen_bool(cfg.dual_prob) {
                *DUAL_USES.choose(rng).unwrap()
            } else {
                *SINGLE_USES.choose(rng).unwrap()
            };
            let idx = nodes.len() + 1;
            let t = duration(rng);
            let target = format!("surface{}", rng.gen_range(1..=3));
            nodes.push(DagNode::op(idx, call(skill, Some(object.clone()), target), arms(skill), t, vec![last]));
            last = idx;
        }
        let idx = nodes.len() + 1;
        let t = duration(rng);
        let place = DagNode::op(idx, call("place", Some(object), format!("loc{}", rng.gen_range(1..=3))), 1, t, vec![last]);
        nodes.push(place);
        anchors.push(idx);
        budget -= 2 + uses;
    }

    if cfg.max_delay > 0 {
        for n in &mut nodes {
            if rng.gen_bool(0.2) {
                n.delay_after = rng.gen_range(1..=cfg.max_delay);
            }
        }
    }

    let mut has_succ = vec![false; nodes.len() + 1];
    for n in &nodes {
        for &e in &n.edges {
            has_succ[e] = true;
        }
    }
    let sinks: Vec<usize> = (1..=nodes.len()).filter(|&i| !has_succ[i]).collect();
    nodes.push(DagNode::completion(nodes.len() + 1, sinks));
    build_graph(nodes).expect("generator only builds valid graphs")
}

pub fn random_dag_seeded(seed: u64, cfg: &RandomDagConfig) -> Dag {
    random_dag(&mut ChaCha8Rng::seed_from_u64(seed), cfg)
}
