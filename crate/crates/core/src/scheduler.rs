//! Event-driven dual-arm scheduler and an independent plan checker.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::dag::{Dag, DagNode, NodeKind};
use crate::selector::{choose_arm, Arm, ArmChoice, ArmState, TaskView};
use crate::Seconds;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleEntry {
    pub start: Seconds,
    pub end: Seconds,
    pub node: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Plan {
    pub left: Vec<ScheduleEntry>,
    pub right: Vec<ScheduleEntry>,
    pub makespan: Seconds,
    pub rollbacks: usize,
    /// Arm(s) used by each operational node, keyed by node index.
    pub assignment: BTreeMap<usize, ArmChoice>,
}

impl Plan {
    pub fn trace(&self, arm: Arm) -> &[ScheduleEntry] {
        match arm {
            Arm::Left => &self.left,
            Arm::Right => &self.right,
        }
    }

    /// `{makespan, rollbacks, left, right}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "makespan": self.makespan,
            "rollbacks": self.rollbacks,
            "left": self.left,
            "right": self.right,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("no progress: simulation time {time} passed the cap of {cap} s; pending nodes {pending:?}")]
    Livelock { time: Seconds, cap: Seconds, pending: Vec<usize> },
}

const COMPLETED: u8 = 0;
const AVAILABLE: u8 = 1;

type Event = (Seconds, u8, usize);

struct Sim<'a> {
    dag: &'a Dag,
    queue: BTreeSet<Event>,
    dep: Vec<usize>,
    start: Vec<Seconds>,
    arms: [ArmState; 2],
    traces: [Vec<(Seconds, Seconds, usize)>; 2],
    assigned: HashMap<usize, ArmChoice>,
    rollbacks: usize,
}

/// Schedules every operation of `dag` onto the two arms.
///
/// Events are processed in `(time, completed-before-available, node)` order.
/// An operation that cannot be placed is retried one second later without
/// moving its dependency-derived earliest start, so a later retry may still
/// fill an idle gap on an arm. Place locks release when the place completes.
pub fn schedule(dag: &Dag) -> Result<Plan, ScheduleError> {
    let n = dag.len();
    let mut sim = Sim {
        dag,
        queue: BTreeSet::new(),
        dep: (0..n).map(|p| dag.preds_at(p).len()).collect(),
        start: (0..n).map(|p| dag.at(p).delay_after).collect(),
        arms: [ArmState::free(0), ArmState::free(0)],
        traces: [vec![], vec![]],
        assigned: HashMap::new(),
        rollbacks: 0,
    };
    for p in 0..n {
        if sim.dep[p] == 0 {
            sim.queue.insert((sim.start[p], AVAILABLE, p));
        }
    }
    let cap = 4 * dag.sequential_sum();

    while let Some(ev) = sim.queue.pop_first() {
        let (t, kind, p) = ev;
        if t > cap {
            let mut pending: Vec<usize> = std::iter::once(ev).chain(sim.queue.iter().copied()).map(|e| dag.at(e.2).index).collect();
            pending.sort_unstable();
            pending.dedup();
            return Err(ScheduleError::Livelock { time: t, cap, pending });
        }
        if kind == AVAILABLE {
            sim.available(t, p);
        } else {
            sim.completed(t, p);
        }
    }
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn retry(&mut self, t: Seconds, p: usize) {
        self.queue.insert((t + 1, AVAILABLE, p));
    }

    fn holder_of(&self, object: Option<&str>) -> Option<Arm> {
        [Arm::Left, Arm::Right].into_iter().find(|a| self.arms[a.idx()].owns(object))
    }

    fn last_is_pick(&self, arm: Arm) -> bool {
        self.traces[arm.idx()].last().is_some_and(|e| self.dag.at(e.2).kind.is_pick())
    }

    fn available(&mut self, t: Seconds, p: usize) {
        let node = self.dag.at(p);
        if node.kind.is_completion() {
            return;
        }
        let view = TaskView::of(node, self.start[p], t);
        let choice = choose_arm(&view, &self.arms[0], &self.arms[1]);

        if choice == ArmChoice::None
            && node.is_dual()
            && self.last_is_pick(Arm::Left)
            && self.last_is_pick(Arm::Right)
            && self.rollback(t, p)
        {
            return;
        }

        match choice {
            ArmChoice::None => self.retry(t, p),
            ArmChoice::Both => {
                let compatible = self.arms.iter().all(|a| a.chain.is_none() || a.owns(node.source()));
                if !compatible {
                    return self.retry(t, p);
                }
                self.run_both(p);
            }
            ArmChoice::Left | ArmChoice::Right => {
                let a = choice.single().unwrap();
                let st = &self.arms[a.idx()];
                let blocked = match node.kind {
                    NodeKind::Place => !st.owns(node.source()),
                    NodeKind::Pick => st.locked,
                    // Another arm holding this object, or this arm holding a
                    // different one.
                    _ => {
                        self.holder_of(node.source()).is_some_and(|h| h != a)
                            || (st.chain.is_some() && !st.owns(node.source()))
                    }
                };
                if blocked {
                    return self.retry(t, p);
                }
                if node.kind.is_pick() {
                    self.arms[a.idx()].locked = true;
                    self.arms[a.idx()].chain = node.target().map(str::to_string);
                }
                let s = self.arms[a.idx()].free_time.max(self.start[p]);
                let e = s + node.take_time;
                self.arms[a.idx()].free_time = e;
                self.traces[a.idx()].push((s, e, p));
                self.assigned.insert(p, choice);
                self.queue.insert((e, COMPLETED, p));
            }
        }
    }

    fn run_both(&mut self, p: usize) {
        let node = self.dag.at(p);
        let s = self.arms[0].free_time.max(self.arms[1].free_time).max(self.start[p]);
        let e = s + node.take_time;
        for a in 0..2 {
            self.arms[a].free_time = e;
            self.traces[a].push((s, e, p));
        }
        self.assigned.insert(p, ArmChoice::Both);
        self.queue.insert((e, COMPLETED, p));
    }

    /// Undoes the latest pick of the arm that does not hold the dual task's
    /// source, runs the dual task, and queues the pick again. Declines when
    /// neither arm holds the source or the pick already has scheduled
    /// descendants.
    fn rollback(&mut self, t: Seconds, p: usize) -> bool {
        let node = self.dag.at(p);
        let Some(keeper) = self.holder_of(node.source()) else { return false };
        let victim = keeper.other();
        let q = self.traces[victim.idx()].last().unwrap().2;

        let mut desc = BTreeSet::new();
        let mut stack = vec![q];
        while let Some(x) = stack.pop() {
            for &s in self.dag.succs_at(x) {
                if desc.insert(s) {
                    stack.push(s);
                }
            }
        }
        if self.traces.iter().flatten().any(|e| desc.contains(&e.2)) {
            return false;
        }

        let q_end = self.traces[victim.idx()].last().unwrap().1;
        if !self.queue.remove(&(q_end, COMPLETED, q)) {
            for &s in self.dag.succs_at(q) {
                self.dep[s] += 1;
            }
        }
        self.queue.retain(|e| !(e.1 == AVAILABLE && desc.contains(&e.2)));

        self.traces[victim.idx()].pop();
        let v = &mut self.arms[victim.idx()];
        v.locked = false;
        v.chain = None;
        v.free_time = self.traces[victim.idx()].last().map_or(0, |e| e.1);
        self.assigned.remove(&q);

        self.run_both(p);
        self.start[q] = self.start[q].max(t);
        self.queue.insert((self.start[q], AVAILABLE, q));
        self.rollbacks += 1;
        true
    }

    fn completed(&mut self, t: Seconds, p: usize) {
        let node = self.dag.at(p);
        match self.assigned.get(&p).copied() {
            Some(ArmChoice::Both) => {
                for a in &mut self.arms {
                    if a.locked && a.chain.is_none() {
                        a.locked = false;
                    }
                }
            }
            Some(choice) if node.kind.is_place() => {
                let a = &mut self.arms[choice.single().unwrap().idx()];
                a.locked = false;
                a.chain = None;
            }
            _ => {}
        }
        for &s in self.dag.succs_at(p) {
            self.dep[s] -= 1;
            self.start[s] = self.start[s].max(t + self.dag.at(s).delay_after);
            if self.dep[s] == 0 {
                self.queue.insert((self.start[s], AVAILABLE, s));
            }
        }
    }

    fn finish(self) -> Plan {
        let dag = self.dag;
        let entries = |trace: &[(Seconds, Seconds, usize)]| -> Vec<ScheduleEntry> {
            trace
                .iter()
                .map(|&(start, end, p)| ScheduleEntry { start, end, node: dag.at(p).index, name: dag.at(p).name() })
                .collect()
        };
        Plan {
            left: entries(&self.traces[0]),
            right: entries(&self.traces[1]),
            makespan: self.arms[0].free_time.max(self.arms[1].free_time),
            rollbacks: self.rollbacks,
            assignment: self.assigned.iter().map(|(&p, &c)| (dag.at(p).index, c)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Constraint {
    C1Dependency,
    C2ArmOverlap,
    C3LockChain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub nodes: Vec<usize>,
    pub detail: String,
}

fn violation(constraint: Constraint, nodes: Vec<usize>, detail: String) -> Violation {
    Violation { constraint, nodes, detail }
}

/// Checks a plan against its graph without trusting the scheduler:
/// dependencies with delays, one operation per arm at a time, dual-arm
/// synchronisation, and that each picked object stays on its arm (and that
/// arm does nothing else) until it is placed.
pub fn validate_plan(plan: &Plan, dag: &Dag) -> Vec<Violation> {
    use Constraint::*;
    let mut out = vec![];

    let mut on: HashMap<usize, Vec<(Arm, Seconds, Seconds)>> = HashMap::new();
    for arm in [Arm::Left, Arm::Right] {
        for e in plan.trace(arm) {
            if dag.node(e.node).is_none() {
                out.push(violation(C2ArmOverlap, vec![e.node], format!("entry for unknown node {}", e.node)));
                continue;
            }
            on.entry(e.node).or_default().push((arm, e.start, e.end));
        }
    }

    let mut sigma: HashMap<usize, (Seconds, Seconds, Vec<Arm>)> = HashMap::new();
    for node in dag.operations() {
        let Some(es) = on.get(&node.index) else {
            out.push(violation(C1Dependency, vec![node.index], format!("node_{} is never scheduled", node.index)));
            continue;
        };
        let arms: Vec<Arm> = es.iter().map(|e| e.0).collect();
        let same_interval = es.iter().all(|e| (e.1, e.2) == (es[0].1, es[0].2));
        let distinct = arms.iter().collect::<BTreeSet<_>>().len() == arms.len();
        if es.len() != node.arm_num as usize || !same_interval || !distinct {
            out.push(violation(
                C2ArmOverlap,
                vec![node.index],
                format!("node_{} needs {} arm(s) in lockstep, has {} entries", node.index, node.arm_num, es.len()),
            ));
        }
        let (s, e) = (es[0].1, es[0].2);
        if e < s || e - s != node.take_time {
            out.push(violation(C2ArmOverlap, vec![node.index], format!("node_{} lasts {} s, expected {}", node.index, e.saturating_sub(s), node.take_time)));
        }
        sigma.insert(node.index, (s, e, arms));
    }

    for node in dag.operations() {
        let Some(&(s, _, _)) = sigma.get(&node.index) else { continue };
        for &u in &node.edges {
            match sigma.get(&u) {
                Some(&(_, ue, _)) if s < ue + node.delay_after => out.push(violation(
                    C1Dependency,
                    vec![u, node.index],
                    format!("node_{} starts at {s} before node_{u} ends at {ue} plus delay {}", node.index, node.delay_after),
                )),
                Some(_) => {}
                None => out.push(violation(C1Dependency, vec![u, node.index], format!("predecessor node_{u} is never scheduled"))),
            }
        }
    }

    for arm in [Arm::Left, Arm::Right] {
        let mut trace: Vec<&ScheduleEntry> = plan.trace(arm).iter().collect();
        trace.sort_by_key(|e| (e.start, e.end));
        for w in trace.windows(2) {
            if w[1].start < w[0].end {
                out.push(violation(
                    C2ArmOverlap,
                    vec![w[0].node, w[1].node],
                    format!("{arm:?} arm runs node_{} and node_{} at once", w[0].node, w[1].node),
                ));
            }
        }
    }

    out.extend(check_chains(plan, dag, &sigma));
    out
}

fn descendants(dag: &Dag, pos: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![pos];
    while let Some(x) = stack.pop() {
        for &s in dag.succs_at(x) {
            if seen.insert(s) {
                stack.push(s);
            }
        }
    }
    seen
}

fn check_chains(plan: &Plan, dag: &Dag, sigma: &HashMap<usize, (Seconds, Seconds, Vec<Arm>)>) -> Vec<Violation> {
    use Constraint::C3LockChain;
    let mut out = vec![];

    // Each use or place of an object belongs to the latest-starting pick of
    // that object among its ancestors.
    let picks: Vec<&DagNode> = dag.nodes().iter().filter(|n| n.kind.is_pick() && sigma.contains_key(&n.index)).collect();
    let desc: HashMap<usize, BTreeSet<usize>> =
        picks.iter().map(|p| (p.index, descendants(dag, dag.position(p.index).unwrap()))).collect();
    let mut members: HashMap<usize, Vec<&DagNode>> = HashMap::new();
    for node in dag.operations().filter(|n| !n.kind.is_pick() && n.source().is_some()) {
        let pos = dag.position(node.index).unwrap();
        let owner = picks
            .iter()
            .filter(|p| p.target() == node.source() && desc[&p.index].contains(&pos))
            .max_by_key(|p| (sigma[&p.index].0, p.index));
        if let Some(p) = owner {
            members.entry(p.index).or_default().push(node);
        }
    }

    for pick in picks {
        let (_, pick_end, ref pick_arms) = sigma[&pick.index];
        let arm = pick_arms[0];
        let object = pick.target();
        let chain = members.get(&pick.index).cloned().unwrap_or_default();
        let mut release = Seconds::MAX;
        for m in &chain {
            let Some((ms, _, m_arms)) = sigma.get(&m.index) else { continue };
            if m.kind.is_place() {
                release = release.min(*ms);
                if m_arms != pick_arms {
                    out.push(violation(
                        C3LockChain,
                        vec![pick.index, m.index],
                        format!("{} picked by {arm:?} but placed by {:?}", object.unwrap_or("?"), m_arms),
                    ));
                }
            } else if !m_arms.contains(&arm) {
                out.push(violation(
                    C3LockChain,
                    vec![pick.index, m.index],
                    format!("{} held by {arm:?} but used without it", object.unwrap_or("?")),
                ));
            }
        }
        for e in plan.trace(arm) {
            if e.start >= pick_end && e.start < release {
                let n = dag.node(e.node);
                if n.is_some_and(|n| n.source() != object) {
                    out.push(violation(
                        C3LockChain,
                        vec![pick.index, e.node],
                        format!("{arm:?} arm runs node_{} while holding {}", e.node, object.unwrap_or("?")),
                    ));
                }
            }
        }
    }
    out
}
