//! Offline graph generation from structured packages.
//!
//! Every held object becomes a pick -> uses -> place spine. A tool picked and
//! placed identically in several packages is handled once, its uses chained
//! in package order. A pick waits on whatever must already be in position:
//! the objects its uses act on, the spot it will be placed on, the place it is
//! taken from (including an opened container). Identical container switches
//! across packages collapse into one node. Wait steps become `delay_after` on
//! the following step.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use crate::dag::{build_graph, Dag, DagNode};
use crate::package::{PackageStep, SkillCall, TaskPackage};
use crate::skills::{self, SkillCategory};
use crate::Seconds;

use super::GenError;

#[derive(Debug)]
struct Unit {
    call: SkillCall,
    arms: u8,
    take: Seconds,
    /// Global position of the first step mapped here.
    pos: usize,
    delay: Seconds,
    edges: BTreeSet<usize>,
}

#[derive(Debug)]
struct Chain {
    pkg: char,
    pick: usize,
    pick_pos: usize,
    pick_source: Option<String>,
    object: String,
    /// (unit, position, target)
    uses: Vec<(usize, usize, String)>,
    /// (unit, position, target)
    place: Option<(usize, usize, String)>,
}

impl Chain {
    fn tail(&self) -> usize {
        self.uses.last().map_or(self.pick, |u| u.0)
    }
    fn contains(&self, unit: usize) -> bool {
        self.pick == unit || self.uses.iter().any(|u| u.0 == unit) || self.place.as_ref().is_some_and(|p| p.0 == unit)
    }
}

#[derive(Default)]
struct Builder {
    units: Vec<Unit>,
    chains: Vec<Chain>,
    /// Latest chain per object.
    last_chain: HashMap<String, usize>,
    /// (object, position, unit) for every place step.
    places: Vec<(String, usize, usize)>,
    /// (container, position, unit, opening) for every switch step.
    switches: Vec<(String, usize, usize, bool)>,
    merged_switches: HashMap<(String, usize), usize>,
    completion_delay: Seconds,
}

/// Number of steps that would run without any merging; wait steps are not
/// operations.
pub fn operational_steps(pkgs: &[TaskPackage]) -> usize {
    pkgs.iter().flat_map(|p| &p.steps).filter(|s| s.call.category() != SkillCategory::Wait).count()
}

/// The place step closing the chain opened by the pick at `i`, and whether a
/// tool use of the picked object sits in between.
fn chain_shape(steps: &[PackageStep], i: usize) -> (Option<&PackageStep>, bool) {
    let object = steps[i].target();
    let mut used = false;
    for s in &steps[i + 1..] {
        if s.source() != Some(object) {
            continue;
        }
        match s.call.category() {
            SkillCategory::ToolUse => used = true,
            SkillCategory::Place => return (Some(s), used),
            _ => {}
        }
    }
    (None, used)
}

impl Builder {
    fn push(&mut self, step: &PackageStep, pos: usize) -> usize {
        self.units.push(Unit {
            call: step.call.clone(),
            arms: step.arm_count,
            take: step.duration,
            pos,
            delay: 0,
            edges: BTreeSet::new(),
        });
        self.units.len() - 1
    }

    /// Nodes that must finish before `object` can be touched at `before`:
    /// its latest place and, if the latest switch on it opened it, that
    /// switch.
    fn ready_deps(&self, object: &str, before: usize) -> Vec<usize> {
        let mut out = vec![];
        if let Some(p) = self.places.iter().filter(|p| p.0 == object && p.1 < before).max_by_key(|p| p.1) {
            out.push(p.2);
        }
        if let Some(s) = self.switches.iter().filter(|s| s.0 == object && s.1 < before).max_by_key(|s| s.1) {
            if s.3 {
                out.push(s.2);
            }
        }
        out
    }

    fn package(&mut self, pkg: &TaskPackage, base: usize) -> Result<(), GenError> {
        let mut held: HashMap<String, usize> = HashMap::new();
        // Per container: the last switch unit in this package and whether it
        // opened, plus picks and places touching it since.
        let mut local_switch: HashMap<String, (usize, bool)> = HashMap::new();
        let mut touched: HashMap<String, Vec<usize>> = HashMap::new();
        let mut occurrences: HashMap<String, usize> = HashMap::new();
        let mut prev: Option<usize> = None;
        let mut pending: Option<(Seconds, Option<usize>)> = None;

        let closed = |local: &HashMap<String, (usize, bool)>, step: &PackageStep, container: &str| {
            match local.get(container) {
                Some(&(_, false)) => Err(GenError::ContainerClosed { step: step.step_id.clone(), container: container.to_string() }),
                _ => Ok(()),
            }
        };

        for (i, step) in pkg.steps.iter().enumerate() {
            let pos = base + i;
            let unit = match step.call.category() {
                SkillCategory::Wait => {
                    let (d, anchor) = pending.unwrap_or((0, prev));
                    pending = Some((d + step.duration, anchor));
                    continue;
                }
                SkillCategory::Completion => return Err(GenError::Unsupported(step.step_id.clone())),
                SkillCategory::Pick => {
                    let object = step.target().to_string();
                    if held.contains_key(&object) {
                        return Err(GenError::AlreadyHeld { step: step.step_id.clone(), object });
                    }
                    if let Some(src) = step.source() {
                        closed(&local_switch, step, src)?;
                    }
                    let (place, used) = chain_shape(&pkg.steps, i);
                    let mergeable = self.last_chain.get(&object).copied().filter(|&c| {
                        let ch = &self.chains[c];
                        let prior_place = ch.place.as_ref().map(|p| &self.units[p.0].call);
                        ch.pkg != pkg.package_id
                            && used
                            && !ch.uses.is_empty()
                            && self.units[ch.pick].call == step.call
                            && prior_place.is_some()
                            && prior_place == place.map(|p| &p.call)
                    });
                    let (c, unit) = match mergeable {
                        Some(c) => (c, self.chains[c].pick),
                        None => {
                            let unit = self.push(step, pos);
                            self.chains.push(Chain {
                                pkg: pkg.package_id,
                                pick: unit,
                                pick_pos: pos,
                                pick_source: step.source().map(str::to_string),
                                object: object.clone(),
                                uses: vec![],
                                place: None,
                            });
                            (self.chains.len() - 1, unit)
                        }
                    };
                    self.last_chain.insert(object.clone(), c);
                    held.insert(object, c);
                    if let Some(src) = step.source() {
                        touched.entry(src.to_string()).or_default().push(unit);
                    }
                    unit
                }
                SkillCategory::ToolUse => {
                    let object = step.source().unwrap_or_default().to_string();
                    let c = *held.get(&object).ok_or_else(|| GenError::NotHeld { step: step.step_id.clone(), object })?;
                    let unit = self.push(step, pos);
                    self.chains[c].uses.push((unit, pos, step.target().to_string()));
                    unit
                }
                SkillCategory::Place => {
                    let object = step.source().unwrap_or_default().to_string();
                    let c = held.remove(&object).ok_or_else(|| GenError::NotHeld { step: step.step_id.clone(), object: object.clone() })?;
                    closed(&local_switch, step, step.target())?;
                    let unit = match &self.chains[c].place {
                        Some(p) => p.0,
                        None => {
                            let unit = self.push(step, pos);
                            self.chains[c].place = Some((unit, pos, step.target().to_string()));
                            unit
                        }
                    };
                    self.places.push((object, pos, unit));
                    touched.entry(step.target().to_string()).or_default().push(unit);
                    unit
                }
                SkillCategory::ContainerSwitch => {
                    let container = step.target().to_string();
                    let key = step.call.to_string();
                    let n = occurrences.entry(key.clone()).or_insert(0);
                    *n += 1;
                    let unit = match self.merged_switches.get(&(key.clone(), *n)) {
                        Some(&u) => u,
                        None => {
                            let u = self.push(step, pos);
                            self.merged_switches.insert((key, *n), u);
                            u
                        }
                    };
                    let opening = skills::is_opening(step.skill());
                    // A close follows the retrievals since the opening; with
                    // none it follows the opening itself.
                    let since = touched.remove(&container).unwrap_or_default();
                    let mut deps = if opening { vec![] } else { since };
                    if deps.is_empty() {
                        if let Some(&(last, _)) = local_switch.get(&container) {
                            deps.push(last);
                        }
                    }
                    if let Some(&c) = held.get(&container) {
                        deps.push(self.chains[c].tail());
                    }
                    // The container itself may have been put in place first.
                    if let Some(p) = self.places.iter().filter(|p| p.0 == container).max_by_key(|p| p.1) {
                        deps.push(p.2);
                    }
                    local_switch.insert(container.clone(), (unit, opening));
                    self.switches.push((container, pos, unit, opening));
                    deps.retain(|&d| d != unit);
                    self.units[unit].edges.extend(deps);
                    unit
                }
            };

            if let Some((d, anchor)) = pending.take() {
                let u = &mut self.units[unit];
                u.delay = u.delay.max(d);
                // Uses and places keep their single chain edge.
                let cat = u.call.category();
                if let Some(a) = anchor.filter(|&a| a != unit) {
                    let anchor_is_use = self.units[a].call.category() == SkillCategory::ToolUse;
                    if cat == SkillCategory::ContainerSwitch || (cat == SkillCategory::Pick && !anchor_is_use) {
                        self.units[unit].edges.insert(a);
                    }
                }
            }
            prev = Some(unit);
        }
        if let Some((d, _)) = pending {
            self.completion_delay = self.completion_delay.max(d);
        }
        Ok(())
    }

    fn chain_edges(&mut self) {
        for c in 0..self.chains.len() {
            let ch = &self.chains[c];
            let mut deps: Vec<(usize, usize)> = vec![];
            let mut prev = ch.pick;
            for u in &ch.uses {
                deps.push((u.0, prev));
                prev = u.0;
            }
            if let Some(p) = &ch.place {
                deps.push((p.0, prev));
            }

            let mut pick_deps = self.ready_deps(&ch.object, ch.pick_pos);
            if let Some(src) = &ch.pick_source {
                pick_deps.extend(self.ready_deps(src, ch.pick_pos));
            }
            for (_, pos, target) in &ch.uses {
                pick_deps.extend(self.ready_deps(target, *pos));
            }
            if let Some((_, pos, target)) = &ch.place {
                pick_deps.extend(self.ready_deps(target, *pos));
            }
            pick_deps.retain(|&d| !ch.contains(d));
            let pick = ch.pick;
            for d in pick_deps {
                deps.push((pick, d));
            }
            for (node, dep) in deps {
                self.units[node].edges.insert(dep);
            }
        }
    }

    /// Numbers units in dependency order, preferring earlier package steps.
    fn finish(self) -> Result<Dag, GenError> {
        let n = self.units.len();
        let mut succs = vec![vec![]; n];
        let mut indeg = vec![0; n];
        for (u, unit) in self.units.iter().enumerate() {
            for &e in &unit.edges {
                succs[e].push(u);
                indeg[u] += 1;
            }
        }
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
            (0..n).filter(|&u| indeg[u] == 0).map(|u| Reverse((self.units[u].pos, u))).collect();
        let mut index = vec![0; n];
        let mut next = 1;
        while let Some(Reverse((_, u))) = heap.pop() {
            index[u] = next;
            next += 1;
            for &s in &succs[u] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    heap.push(Reverse((self.units[s].pos, s)));
                }
            }
        }
        if next <= n {
            let stuck: Vec<String> = (0..n).filter(|&u| index[u] == 0).map(|u| self.units[u].call.to_string()).collect();
            return Err(GenError::Cyclic(stuck));
        }

        let mut nodes = Vec::with_capacity(n + 1);
        for (u, unit) in self.units.into_iter().enumerate() {
            let mut edges: Vec<usize> = unit.edges.iter().map(|&e| index[e]).collect();
            edges.sort_unstable();
            nodes.push(DagNode::op(index[u], unit.call, unit.arms, unit.take, edges).with_delay(unit.delay));
        }
        let mut sinks: Vec<usize> = (0..n).filter(|&u| succs[u].is_empty()).map(|u| index[u]).collect();
        sinks.sort_unstable();
        nodes.push(DagNode::completion(n + 1, sinks).with_delay(self.completion_delay));
        Ok(build_graph(nodes)?)
    }
}

/// Builds a dependency graph from packages, processed in letter order.
pub fn rule_based_dag(pkgs: &[TaskPackage]) -> Result<Dag, GenError> {
    let mut ordered: Vec<&TaskPackage> = pkgs.iter().collect();
    ordered.sort_by_key(|p| p.package_id);
    let mut b = Builder::default();
    let mut base = 0;
    for p in ordered {
        b.package(p, base)?;
        base += p.steps.len();
    }
    b.chain_edges();
    b.finish()
}
