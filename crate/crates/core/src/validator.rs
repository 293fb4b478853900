//! Structural checks on generated graphs: wrong-object dependencies and
//! places that skip a required tool use.

use std::fmt;

use serde::Serialize;

use crate::dag::Dag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ProblemCode {
    P1,
    P2,
    P3,
}

impl ProblemCode {
    pub fn description(self) -> &'static str {
        match self {
            ProblemCode::P1 => "Depends on another object's place node.",
            ProblemCode::P2 => "Does not depend on the tool usage node but directly depends on the pick node.",
            ProblemCode::P3 => "Depends on another object's tool usage node.",
        }
    }
}

impl fmt::Display for ProblemCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub node: usize,
    pub code: ProblemCode,
    /// `(predecessor, node)`.
    pub edge: (usize, usize),
    pub message: String,
}

/// One diagnostic per offending (node, predecessor) pair, ordered by node
/// index then predecessor index. Container switches are never checked as the
/// dependent node. A missing `source` on either side never counts as a
/// different object.
pub fn verify(dag: &Dag) -> Vec<Diagnostic> {
    let mut out = vec![];
    for (pi, ni) in dag.nodes().iter().enumerate() {
        if ni.kind.is_switch() {
            continue;
        }
        let mut preds: Vec<usize> = dag.preds_at(pi).to_vec();
        preds.sort_by_key(|&q| dag.at(q).index);
        for pj in preds {
            let nj = dag.at(pj);
            let differ = match (ni.source(), nj.source()) {
                (Some(a), Some(b)) => a != b,
                _ => false,
            };
            let tj = nj.target();
            let use_follows = dag.succs_at(pj).iter().any(|&u| {
                let nu = dag.at(u);
                nu.kind.is_tool_use() && nu.source().is_some() && nu.source() == tj
            });
            let code = if !ni.kind.is_pick() && nj.kind.is_place() && differ {
                Some(ProblemCode::P1)
            } else if nj.kind.is_pick() && use_follows && ni.kind.is_place() && ni.source().is_some() && ni.source() == tj {
                Some(ProblemCode::P2)
            } else if nj.kind.is_tool_use() && differ {
                Some(ProblemCode::P3)
            } else {
                None
            };
            if let Some(code) = code {
                out.push(Diagnostic {
                    node: ni.index,
                    code,
                    edge: (nj.index, ni.index),
                    message: format!("node_{} ({}) -> node_{} ({}): {}", nj.index, nj.name(), ni.index, ni.name(), code.description()),
                });
            }
        }
    }
    out
}

/// Problem lines for the correction prompt.
pub fn render_problems(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("node_{}: {} {} (edge: node_{})", d.node, d.code, d.code.description(), d.edge.0))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn diagnostics_json(diags: &[Diagnostic]) -> serde_json::Value {
    serde_json::to_value(diags).expect("diagnostics serialize")
}
