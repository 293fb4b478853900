//! Dependency graphs in the `Nodes: / node_k:` text format.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::package::{parse_call, SkillCall, StepError};
use crate::skills::SkillCategory;
use crate::Seconds;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum NodeKind {
    Pick,
    Place,
    ToolUse(String),
    ContainerSwitch(String),
    TaskCompletion,
}

impl NodeKind {
    /// The `type:` field as written in DAG text.
    pub fn type_name(&self) -> &str {
        match self {
            NodeKind::Pick => "pick",
            NodeKind::Place => "place",
            NodeKind::ToolUse(s) | NodeKind::ContainerSwitch(s) => s,
            NodeKind::TaskCompletion => "task_completion",
        }
    }

    pub fn is_pick(&self) -> bool {
        matches!(self, NodeKind::Pick)
    }
    pub fn is_place(&self) -> bool {
        matches!(self, NodeKind::Place)
    }
    pub fn is_tool_use(&self) -> bool {
        matches!(self, NodeKind::ToolUse(_))
    }
    pub fn is_switch(&self) -> bool {
        matches!(self, NodeKind::ContainerSwitch(_))
    }
    pub fn is_completion(&self) -> bool {
        matches!(self, NodeKind::TaskCompletion)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagNode {
    pub index: usize,
    pub kind: NodeKind,
    /// `None` only for the completion node.
    pub call: Option<SkillCall>,
    pub arm_num: u8,
    pub take_time: Seconds,
    pub edges: Vec<usize>,
    pub delay_after: Seconds,
}

impl DagNode {
    /// Builds an operational node from a skill call. The kind follows the
    /// skill's category.
    pub fn op(index: usize, call: SkillCall, arm_num: u8, take_time: Seconds, edges: Vec<usize>) -> Self {
        let kind = match call.category() {
            SkillCategory::Pick => NodeKind::Pick,
            SkillCategory::Place => NodeKind::Place,
            SkillCategory::ToolUse => NodeKind::ToolUse(call.skill.clone()),
            SkillCategory::ContainerSwitch => NodeKind::ContainerSwitch(call.skill.clone()),
            SkillCategory::Wait | SkillCategory::Completion => {
                panic!("`{}` cannot be an operational node", call.skill)
            }
        };
        DagNode { index, kind, call: Some(call), arm_num, take_time, edges, delay_after: 0 }
    }

    pub fn completion(index: usize, edges: Vec<usize>) -> Self {
        DagNode { index, kind: NodeKind::TaskCompletion, call: None, arm_num: 0, take_time: 0, edges, delay_after: 0 }
    }

    pub fn with_delay(mut self, delay: Seconds) -> Self {
        self.delay_after = delay;
        self
    }

    pub fn name(&self) -> String {
        match &self.call {
            Some(c) => c.to_string(),
            None => "task_completion".to_string(),
        }
    }

    pub fn source(&self) -> Option<&str> {
        self.call.as_ref().and_then(|c| c.source.as_deref())
    }

    pub fn target(&self) -> Option<&str> {
        self.call.as_ref().map(|c| c.target.as_str())
    }

    pub fn is_dual(&self) -> bool {
        self.arm_num == 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("node_{node}: missing field `{field}`")]
    MissingField { node: usize, field: &'static str },
    #[error("node_{node}: bad name: {source}")]
    BadName { node: usize, source: StepError },
    #[error("node_{node}: type `{found}` does not match skill `{skill}`")]
    TypeMismatch { node: usize, found: String, skill: String },
    #[error("node_{node}: skill `{skill}` needs {expected} arm(s), got {found}")]
    ArmMismatch { node: usize, skill: String, expected: u8, found: u8 },
    #[error("node_{0}: completion nodes need arm_num 0 and take_time 0, other nodes a positive take_time and arms")]
    CompletionShape(usize),
    #[error("duplicate node index {0}")]
    DuplicateIndex(usize),
    #[error("node_{node}: edge to missing node {edge}")]
    DanglingEdge { node: usize, edge: usize },
    #[error("node_{node}: edge {edge} listed twice")]
    DuplicateEdge { node: usize, edge: usize },
    #[error("node_{0}: depends on itself")]
    SelfLoop(usize),
    #[error("cycle through edge {from} -> {to}")]
    Cycle { from: usize, to: usize },
    #[error("missing task completion sink")]
    MissingCompletion,
    #[error("more than one task completion node: {0:?}")]
    MultipleCompletion(Vec<usize>),
    #[error("node_{0} depends on the task completion node")]
    CompletionNotSink(usize),
}

/// A validated dependency graph. Nodes are kept sorted by index; most
/// algorithms work on positions `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<DagNode>,
    pos: HashMap<usize, usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
    sink: usize,
}

pub fn build_graph(mut nodes: Vec<DagNode>) -> Result<Dag, DagError> {
    nodes.sort_by_key(|n| n.index);
    let mut pos = HashMap::new();
    for (p, n) in nodes.iter().enumerate() {
        if pos.insert(n.index, p).is_some() {
            return Err(DagError::DuplicateIndex(n.index));
        }
    }
    for n in &nodes {
        let mut seen = BTreeSet::new();
        for &e in &n.edges {
            if e == n.index {
                return Err(DagError::SelfLoop(e));
            }
            if !pos.contains_key(&e) {
                return Err(DagError::DanglingEdge { node: n.index, edge: e });
            }
            if !seen.insert(e) {
                return Err(DagError::DuplicateEdge { node: n.index, edge: e });
            }
        }
        check_shape(n)?;
    }

    let completions: Vec<usize> = nodes.iter().filter(|n| n.kind.is_completion()).map(|n| n.index).collect();
    let sink = match completions.as_slice() {
        [] => return Err(DagError::MissingCompletion),
        [one] => pos[one],
        many => return Err(DagError::MultipleCompletion(many.to_vec())),
    };

    let len = nodes.len();
    let mut preds: Vec<Vec<usize>> = nodes.iter().map(|n| n.edges.iter().map(|e| pos[e]).collect()).collect();
    let mut succs = vec![Vec::new(); len];
    for (p, ps) in preds.iter().enumerate() {
        for &q in ps {
            succs[q].push(p);
        }
    }
    if let Some(&first) = succs[sink].first() {
        return Err(DagError::CompletionNotSink(nodes[first].index));
    }
    // Operations nobody depends on feed the completion node even when its
    // edge list leaves them out (the usual hand-written form lists only the
    // last step of each package).
    for p in 0..len {
        if p != sink && succs[p].is_empty() {
            succs[p].push(sink);
            preds[sink].push(p);
        }
    }
    for s in &mut succs {
        s.sort_unstable();
    }

    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..len).filter(|&p| indeg[p] == 0).collect();
    let mut topo = Vec::with_capacity(len);
    while let Some(p) = ready.pop_first() {
        topo.push(p);
        for &s in &succs[p] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert(s);
            }
        }
    }
    if topo.len() < len {
        // Walk predecessors inside the stuck set until a node repeats.
        let stuck: BTreeSet<usize> = (0..len).filter(|&p| indeg[p] > 0).collect();
        let mut cur = *stuck.iter().next().unwrap();
        let mut visited = BTreeSet::new();
        loop {
            let prev = *preds[cur].iter().find(|q| stuck.contains(q)).unwrap();
            if !visited.insert(cur) {
                return Err(DagError::Cycle { from: nodes[prev].index, to: nodes[cur].index });
            }
            cur = prev;
        }
    }


    Ok(Dag { nodes, pos, preds, succs, topo, sink })
}

fn check_shape(n: &DagNode) -> Result<(), DagError> {
    match &n.call {
        None => {
            if !n.kind.is_completion() || n.arm_num != 0 || n.take_time != 0 {
                return Err(DagError::CompletionShape(n.index));
            }
        }
        Some(call) => {
            let spec = call.spec();
            if n.kind.is_completion() || n.take_time == 0 {
                return Err(DagError::CompletionShape(n.index));
            }
            if spec.default_arms != n.arm_num {
                return Err(DagError::ArmMismatch {
                    node: n.index,
                    skill: call.skill.clone(),
                    expected: spec.default_arms,
                    found: n.arm_num,
                });
            }
        }
    }
    Ok(())
}

impl Dag {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes sorted by index.
    pub fn nodes(&self) -> &[DagNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> Option<&DagNode> {
        self.pos.get(&index).map(|&p| &self.nodes[p])
    }

    pub fn at(&self, pos: usize) -> &DagNode {
        &self.nodes[pos]
    }

    pub fn position(&self, index: usize) -> Option<usize> {
        self.pos.get(&index).copied()
    }

    pub fn preds_at(&self, pos: usize) -> &[usize] {
        &self.preds[pos]
    }

    pub fn succs_at(&self, pos: usize) -> &[usize] {
        &self.succs[pos]
    }

    /// Successor indices of node `index`, ascending.
    pub fn successors(&self, index: usize) -> Vec<usize> {
        self.position(index)
            .map(|p| self.succs[p].iter().map(|&s| self.nodes[s].index).collect())
            .unwrap_or_default()
    }

    pub fn indegree(&self, index: usize) -> Option<usize> {
        self.position(index).map(|p| self.preds[p].len())
    }

    /// Positions in a topological order (smallest ready position first).
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn sink_position(&self) -> usize {
        self.sink
    }

    pub fn sink(&self) -> &DagNode {
        &self.nodes[self.sink]
    }

    /// Operational nodes, i.e. everything except the completion sink.
    pub fn operations(&self) -> impl Iterator<Item = &DagNode> {
        self.nodes.iter().filter(|n| !n.kind.is_completion())
    }

    pub fn sequential_sum(&self) -> Seconds {
        self.nodes.iter().map(|n| n.take_time + n.delay_after).sum()
    }

    pub fn into_nodes(self) -> Vec<DagNode> {
        self.nodes
    }
}

/// Longest path where every node weighs its duration plus its own start delay.
pub fn critical_path(dag: &Dag) -> Seconds {
    let mut finish = vec![0; dag.len()];
    for &p in dag.topo_order() {
        let n = dag.at(p);
        let ready = dag.preds_at(p).iter().map(|&q| finish[q]).max().unwrap_or(0);
        finish[p] = ready + n.delay_after + n.take_time;
    }
    finish.into_iter().max().unwrap_or(0)
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(key)?.trim_start();
    rest.strip_prefix(':').map(str::trim)
}

fn parse_edges(line_no: usize, text: &str) -> Result<Vec<usize>, DagError> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| DagError::Syntax { line: line_no, msg: "edge list must be bracketed".into() })?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let t = t.strip_prefix("node_").unwrap_or(t);
            t.parse::<usize>()
                .map_err(|_| DagError::Syntax { line: line_no, msg: format!("non-numeric edge `{t}`") })
        })
        .collect()
}

fn parse_number(line_no: usize, key: &str, text: &str) -> Result<u64, DagError> {
    text.parse().map_err(|_| DagError::Syntax { line: line_no, msg: format!("`{key}` must be a non-negative integer") })
}

#[derive(Default)]
struct RawNode {
    index: usize,
    type_name: Option<String>,
    name: Option<String>,
    arm_num: Option<u8>,
    take_time: Option<Seconds>,
    edges: Option<Vec<usize>>,
    delay_after: Seconds,
}

impl RawNode {
    fn finish(self) -> Result<DagNode, DagError> {
        let idx = self.index;
        let missing = |field| DagError::MissingField { node: idx, field };
        let type_name = self.type_name.ok_or(missing("type"))?;
        let name = self.name.ok_or(missing("name"))?;
        let arm_num = self.arm_num.ok_or(missing("arm_num"))?;
        let take_time = self.take_time.ok_or(missing("take_time"))?;
        let edges = self.edges.ok_or(missing("edge"))?;

        if name == "task_completion" || type_name == "task_completion" {
            if name != type_name {
                return Err(DagError::TypeMismatch { node: idx, found: type_name, skill: name });
            }
            let mut n = DagNode::completion(idx, edges);
            n.arm_num = arm_num;
            n.take_time = take_time;
            n.delay_after = self.delay_after;
            return Ok(n);
        }
        let call = parse_call(&name).map_err(|source| DagError::BadName { node: idx, source })?;
        if matches!(call.category(), SkillCategory::Wait | SkillCategory::Completion) || type_name != call.skill {
            return Err(DagError::TypeMismatch { node: idx, found: type_name, skill: call.skill });
        }
        Ok(DagNode::op(idx, call, arm_num, take_time, edges).with_delay(self.delay_after))
    }
}

/// Parses DAG text. Lines before the first `node_<k>:` header (such as
/// `Nodes:` or chatter from a language model) are ignored.
pub fn parse_dag_nodes(text: &str) -> Result<Vec<DagNode>, DagError> {
    let mut nodes = vec![];
    let mut cur: Option<RawNode> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("node_") {
            if let Some(num) = rest.trim_end().strip_suffix(':') {
                let index = num.trim().parse::<usize>().map_err(|_| DagError::Syntax {
                    line: line_no,
                    msg: format!("bad node header `{line}`"),
                })?;
                if let Some(prev) = cur.take() {
                    nodes.push(prev.finish()?);
                }
                cur = Some(RawNode { index, ..Default::default() });
                continue;
            }
        }
        let Some(node) = cur.as_mut() else { continue };
        if let Some(v) = field(line, "type") {
            node.type_name = Some(v.to_string());
        } else if let Some(v) = field(line, "name") {
            node.name = Some(v.to_string());
        } else if let Some(v) = field(line, "arm_num") {
            let n = parse_number(line_no, "arm_num", v)?;
            node.arm_num = Some(u8::try_from(n).ok().filter(|&a| a <= 2).ok_or(DagError::Syntax {
                line: line_no,
                msg: "arm_num must be 0, 1 or 2".into(),
            })?);
        } else if let Some(v) = field(line, "take_time") {
            node.take_time = Some(parse_number(line_no, "take_time", v)?);
        } else if let Some(v) = field(line, "edge") {
            node.edges = Some(parse_edges(line_no, v)?);
        } else if let Some(v) = field(line, "delay_after") {
            node.delay_after = parse_number(line_no, "delay_after", v)?;
        } else {
            return Err(DagError::Syntax { line: line_no, msg: format!("unexpected line `{line}`") });
        }
    }
    if let Some(prev) = cur.take() {
        nodes.push(prev.finish()?);
    }
    Ok(nodes)
}

pub fn parse_dag_text(text: &str) -> Result<Dag, DagError> {
    build_graph(parse_dag_nodes(text)?)
}

pub fn serialize_nodes(nodes: &[DagNode]) -> String {
    let mut out = String::from("Nodes:\n");
    for (k, n) in nodes.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let edges: Vec<String> = n.edges.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "node_{}:", n.index);
        let _ = writeln!(out, "type: {}", n.kind.type_name());
        let _ = writeln!(out, "name: {}", n.name());
        let _ = writeln!(out, "arm_num: {}", n.arm_num);
        let _ = writeln!(out, "take_time: {}", n.take_time);
        let _ = writeln!(out, "edge: [{}]", edges.join(", "));
        if n.delay_after > 0 {
            let _ = writeln!(out, "delay_after: {}", n.delay_after);
        }
    }
    out
}

pub fn serialize_dag(dag: &Dag) -> String {
    serialize_nodes(dag.nodes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeJson {
    pub index: usize,
    #[serde(rename = "type")]
    pub node_type: String,
    pub name: String,
    pub arm_num: u8,
    pub take_time: Seconds,
    pub edge: Vec<usize>,
    pub delay_after: Seconds,
}

pub fn dag_to_json(dag: &Dag) -> serde_json::Value {
    let nodes: Vec<NodeJson> = dag
        .nodes()
        .iter()
        .map(|n| NodeJson {
            index: n.index,
            node_type: n.kind.type_name().to_string(),
            name: n.name(),
            arm_num: n.arm_num,
            take_time: n.take_time,
            edge: n.edges.clone(),
            delay_after: n.delay_after,
        })
        .collect();
    serde_json::json!({ "nodes": nodes })
}

/// Indegree of every node keyed by index; handy for reports.
pub fn indegrees(dag: &Dag) -> BTreeMap<usize, usize> {
    dag.nodes().iter().map(|n| (n.index, n.edges.len())).collect()
}
