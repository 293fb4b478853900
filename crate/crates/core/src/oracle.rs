//! Exact minimum makespan for small graphs by memoised branch and bound.
//!
//! A schedule is built by repeatedly dispatching a ready node to an arm
//! choice at `max(ready time, arm free time)`. Every feasible schedule can be
//! left-shifted into one produced this way, so the search is exact. Arms may
//! hold at most one picked object; an object's uses and place run on the arm
//! that holds it, and a dual-arm node needs both arms empty-handed or holding
//! its source.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::dag::{Dag, NodeKind};
use crate::scheduler::{Plan, ScheduleEntry};
use crate::selector::ArmChoice;
use crate::Seconds;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("graph has {nodes} nodes, limit is {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("no feasible schedule under the holding rules")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    pub optimal_makespan: Seconds,
    pub witness: Plan,
    pub nodes_explored: u64,
}

pub const DEFAULT_NODE_LIMIT: usize = 10;

const NONE: u16 = 0;
const INF: Seconds = Seconds::MAX / 4;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    Pick(u16),
    Place(u16),
    /// Any other node; `u16` is its source object or `NONE`.
    Other(u16),
}

struct Node {
    pos: usize,
    op: Op,
    dual: bool,
    take: Seconds,
    delay: Seconds,
    preds: u64,
    succs: Vec<usize>,
    tail: Seconds,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct State {
    done: u64,
    free: [Seconds; 2],
    chain: [u16; 2],
    ready: Vec<Seconds>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Choice {
    Arm(usize),
    Both,
}

struct Search<'a> {
    nodes: Vec<Node>,
    dag: &'a Dag,
    memo: HashMap<State, Seconds>,
    explored: u64,
}

impl State {
    fn base(&self) -> Seconds {
        self.free[0].min(self.free[1])
    }

    /// Times rebased to the earlier arm, and the arms put in canonical order.
    fn key(&self) -> State {
        let m = self.base();
        let ready = self.ready.iter().map(|&r| r.max(m) - m).collect();
        let a = State { done: self.done, free: [self.free[0] - m, self.free[1] - m], chain: self.chain, ready };
        let b = State { free: [a.free[1], a.free[0]], chain: [a.chain[1], a.chain[0]], ..a.clone() };
        if (b.free, b.chain) < (a.free, a.chain) {
            b
        } else {
            a
        }
    }
}

impl<'a> Search<'a> {
    fn all_done(&self) -> u64 {
        if self.nodes.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.nodes.len()) - 1
        }
    }

    fn choices(&self, st: &State, i: usize) -> Vec<Choice> {
        let n = &self.nodes[i];
        let holder = |o: u16| (0..2).find(|&a| o != NONE && st.chain[a] == o);
        if n.dual {
            let src = match n.op {
                Op::Other(o) => o,
                _ => NONE,
            };
            let ok = st.chain.iter().all(|&c| c == NONE || (src != NONE && c == src));
            return if ok { vec![Choice::Both] } else { vec![] };
        }
        let empty: Vec<Choice> = (0..2).filter(|&a| st.chain[a] == NONE).map(Choice::Arm).collect();
        let mut out = match n.op {
            Op::Pick(_) => empty,
            Op::Place(o) => holder(o).map(Choice::Arm).into_iter().collect(),
            Op::Other(o) => match holder(o) {
                Some(h) => vec![Choice::Arm(h)],
                None => empty,
            },
        };
        if out.len() == 2 && st.free[0] == st.free[1] {
            out.truncate(1);
        }
        out
    }

    fn apply(&self, st: &State, i: usize, c: Choice) -> (State, Seconds, Seconds) {
        let n = &self.nodes[i];
        let mut next = st.clone();
        let (s, e) = match c {
            Choice::Both => {
                let s = st.ready[i].max(st.free[0]).max(st.free[1]);
                next.free = [s + n.take; 2];
                (s, s + n.take)
            }
            Choice::Arm(a) => {
                let s = st.ready[i].max(st.free[a]);
                next.free[a] = s + n.take;
                match n.op {
                    Op::Pick(o) => next.chain[a] = o,
                    Op::Place(_) => next.chain[a] = NONE,
                    Op::Other(_) => {}
                }
                (s, s + n.take)
            }
        };
        next.done |= 1 << i;
        for &v in &n.succs {
            next.ready[v] = next.ready[v].max(e + self.nodes[v].delay);
        }
        (next, s, e)
    }

    fn lower_bound(&self, st: &State) -> Seconds {
        let m = st.base();
        let mut lb = st.free[0].max(st.free[1]);
        let mut work = st.free[0] + st.free[1];
        for (i, n) in self.nodes.iter().enumerate() {
            if st.done & (1 << i) != 0 {
                continue;
            }
            lb = lb.max(st.ready[i].max(m) + n.tail);
            work += n.take * if n.dual { 2 } else { 1 };
        }
        lb.max(work.div_ceil(2))
    }

    fn ready(&self, st: &State, i: usize) -> bool {
        st.done & (1 << i) == 0 && self.nodes[i].preds & !st.done == 0
    }

    /// Remaining makespan measured from `st.base()`.
    fn solve(&mut self, st: &State) -> Seconds {
        let m = st.base();
        if st.done == self.all_done() {
            return st.free[0].max(st.free[1]) - m;
        }
        let key = st.key();
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        self.explored += 1;
        let lb = self.lower_bound(st);
        let mut best = INF;
        'outer: for i in 0..self.nodes.len() {
            if !self.ready(st, i) {
                continue;
            }
            for c in self.choices(st, i) {
                let (child, _, _) = self.apply(st, i, c);
                if self.lower_bound(&child) >= best {
                    continue;
                }
                let sub = self.solve(&child);
                if sub >= INF {
                    continue;
                }
                let total = child.base() + sub;
                if total < best {
                    best = total;
                    if best <= lb {
                        break 'outer;
                    }
                }
            }
        }
        let rel = if best >= INF { INF } else { best - m };
        self.memo.insert(key, rel);
        rel
    }

    fn witness(&mut self, root: &State, target: Seconds) -> Plan {
        let mut st = root.clone();
        let mut plan = Plan::default();
        while st.done != self.all_done() {
            let mut advanced = false;
            'pick: for i in 0..self.nodes.len() {
                if !self.ready(&st, i) {
                    continue;
                }
                for c in self.choices(&st, i) {
                    let (child, s, e) = self.apply(&st, i, c);
                    let sub = self.solve(&child);
                    if sub < INF && child.base() + sub == target {
                        let node = self.dag.at(self.nodes[i].pos);
                        let entry = ScheduleEntry { start: s, end: e, node: node.index, name: node.name() };
                        let choice = match c {
                            Choice::Both => {
                                plan.left.push(entry.clone());
                                plan.right.push(entry);
                                ArmChoice::Both
                            }
                            Choice::Arm(0) => {
                                plan.left.push(entry);
                                ArmChoice::Left
                            }
                            Choice::Arm(_) => {
                                plan.right.push(entry);
                                ArmChoice::Right
                            }
                        };
                        plan.assignment.insert(node.index, choice);
                        st = child;
                        advanced = true;
                        break 'pick;
                    }
                }
            }
            assert!(advanced, "witness reconstruction lost the optimum");
        }
        plan.left.sort_by_key(|e| (e.start, e.node));
        plan.right.sort_by_key(|e| (e.start, e.node));
        plan.makespan = target;
        plan
    }
}

/// Minimum makespan over all feasible schedules of `dag` (at most
/// `node_limit` nodes, completion included), with one optimal witness plan.
pub fn optimal_makespan(dag: &Dag, node_limit: usize) -> Result<OracleResult, OracleError> {
    if dag.len() > node_limit || dag.len() > 64 {
        return Err(OracleError::TooLarge { nodes: dag.len(), limit: node_limit.min(64) });
    }
    let ops: Vec<usize> = (0..dag.len()).filter(|&p| !dag.at(p).kind.is_completion()).collect();
    let slot: HashMap<usize, usize> = ops.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut objects: HashMap<String, u16> = HashMap::new();
    let mut intern = |o: Option<&str>| -> u16 {
        match o {
            None => NONE,
            Some(o) => {
                let next = objects.len() as u16 + 1;
                *objects.entry(o.to_string()).or_insert(next)
            }
        }
    };

    let mut nodes: Vec<Node> = ops
        .iter()
        .map(|&p| {
            let n = dag.at(p);
            let op = match n.kind {
                NodeKind::Pick => Op::Pick(intern(n.target())),
                NodeKind::Place => Op::Place(intern(n.source())),
                _ => Op::Other(intern(n.source())),
            };
            let preds = dag.preds_at(p).iter().fold(0u64, |acc, q| acc | 1 << slot[q]);
            let succs = dag.succs_at(p).iter().filter_map(|s| slot.get(s).copied()).collect();
            Node { pos: p, op, dual: n.is_dual(), take: n.take_time, delay: n.delay_after, preds, succs, tail: 0 }
        })
        .collect();
    for &p in dag.topo_order().iter().rev() {
        let Some(&i) = slot.get(&p) else { continue };
        let after = nodes[i].succs.iter().map(|&s| nodes[s].delay + nodes[s].tail).max().unwrap_or(0);
        nodes[i].tail = nodes[i].take + after;
    }

    let root = State { done: 0, free: [0, 0], chain: [NONE; 2], ready: nodes.iter().map(|n| n.delay).collect() };
    let mut search = Search { nodes, dag, memo: HashMap::new(), explored: 0 };
    let best = search.solve(&root);
    if best >= INF {
        return Err(OracleError::Infeasible);
    }
    let witness = search.witness(&root, best);
    Ok(OracleResult { optimal_makespan: best, witness, nodes_explored: search.explored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{build_graph, DagNode};
    use crate::package::parse_call;
    use crate::scheduler::validate_plan;

    fn op(i: usize, s: &str, arms: u8, take: Seconds, edges: Vec<usize>) -> DagNode {
        DagNode::op(i, parse_call(s).unwrap(), arms, take, edges)
    }

    #[test]
    fn forced_chain_sums() {
        let dag = build_graph(vec![
            op(1, r#"pick(source="table", target="carrots")"#, 1, 5, vec![]),
            op(2, r#"place(source="carrots", target="cutting_board")"#, 1, 7, vec![1]),
            op(3, r#"pick(source="counter", target="knife")"#, 1, 5, vec![2]),
            op(4, r#"cut(source="knife", target="carrots")"#, 2, 10, vec![3]),
            op(5, r#"place(source="knife", target="counter")"#, 1, 5, vec![4]),
            DagNode::completion(6, vec![5]),
        ])
        .unwrap();
        let r = optimal_makespan(&dag, DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(r.optimal_makespan, 32);
        assert!(validate_plan(&r.witness, &dag).is_empty());
    }

    #[test]
    fn independent_nodes_run_in_parallel() {
        let dag = build_graph(vec![
            op(1, r#"press_open(target="a")"#, 1, 5, vec![]),
            op(2, r#"press_open(target="b")"#, 1, 5, vec![]),
            DagNode::completion(3, vec![1, 2]),
        ])
        .unwrap();
        let r = optimal_makespan(&dag, DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(r.optimal_makespan, 5);
        assert_eq!((r.witness.left.len(), r.witness.right.len()), (1, 1));
    }

    #[test]
    fn size_limit() {
        let dag = build_graph(vec![
            op(1, r#"press_open(target="a")"#, 1, 5, vec![]),
            DagNode::completion(2, vec![1]),
        ])
        .unwrap();
        assert_eq!(optimal_makespan(&dag, 1).unwrap_err(), OracleError::TooLarge { nodes: 2, limit: 1 });
    }
}
