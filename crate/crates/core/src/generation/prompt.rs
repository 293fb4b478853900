//! Prompt templates and placeholder substitution.

use crate::skills;

use super::GenError;

const STEPS: &str = include_str!("../../assets/templates/steps.txt");
const DAG_FIRST: &str = include_str!("../../assets/templates/dag_first.txt");
const DAG_CORRECTION: &str = include_str!("../../assets/templates/dag_correction.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    /// Asks the model to repair package and step order.
    Steps,
    /// Asks for a dependency graph from retrieved packages.
    DagFirst,
    /// Feeds a graph and its problems back for repair.
    DagCorrection,
}

impl PromptKind {
    pub fn template(self) -> &'static str {
        match self {
            PromptKind::Steps => STEPS,
            PromptKind::DagFirst => DAG_FIRST,
            PromptKind::DagCorrection => DAG_CORRECTION,
        }
    }
}

/// Values for every placeholder any template uses. Empty strings count as
/// missing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptContext {
    pub instruction: String,
    pub environment: String,
    /// Package text as produced by `serialize_packages`.
    pub packages: String,
    pub skills: String,
    /// The previous model response, for corrections.
    pub response: String,
    /// Rendered problem lines, for corrections.
    pub problems: String,
}

impl PromptContext {
    pub fn new(instruction: &str, environment: &str, packages: &str) -> Self {
        PromptContext {
            instruction: instruction.to_string(),
            environment: environment.to_string(),
            packages: packages.to_string(),
            skills: skills::render_skill_list(),
            ..Default::default()
        }
    }

    fn value(&self, name: &str) -> Option<String> {
        let v = match name {
            "context" => self.packages.clone(),
            "target_env" => self.environment.clone(),
            "instruction" => self.instruction.clone(),
            // The packages go on the lines after the mission.
            "rag_output" if !self.packages.trim().is_empty() => format!("\n{}", self.packages.trim_end()),
            "List of skills" => self.skills.trim_end().to_string(),
            "response" => self.response.trim_end().to_string(),
            "problems_section" => self.problems.trim_end().to_string(),
            _ => return None,
        };
        (!v.trim().is_empty()).then_some(v)
    }
}

/// Fills `{name}` markers from `ctx`; `{{` and `}}` are literal braces.
pub fn render_prompt(kind: PromptKind, ctx: &PromptContext) -> Result<String, GenError> {
    let tpl = kind.template();
    let mut out = String::with_capacity(tpl.len() + ctx.packages.len());
    let mut rest = tpl;
    while let Some(i) = rest.find(['{', '}']) {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
        } else if tail.starts_with('{') {
            let close = tail.find('}').ok_or_else(|| GenError::Template(format!("unclosed placeholder in {kind:?}")))?;
            let name = &tail[1..close];
            let value = ctx.value(name).ok_or_else(|| GenError::MissingPlaceholder(name.to_string()))?;
            out.push_str(&value);
            rest = &tail[close + 1..];
        } else {
            return Err(GenError::Template(format!("stray `}}` in {kind:?}")));
        }
    }
    out.push_str(rest);
    Ok(out)
}
