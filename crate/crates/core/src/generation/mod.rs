//! From an instruction to a verified dependency graph: package retrieval,
//! prompt rendering, graph generators and the bounded correction loop.

mod prompt;
mod retrieval;
mod rules;

use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::time::Duration;

use thiserror::Error;

use crate::dag::{parse_dag_text, serialize_dag, Dag, DagError};
use crate::package::TaskPackage;
use crate::validator::{render_problems, verify, Diagnostic};

pub use prompt::{render_prompt, PromptContext, PromptKind};
pub use retrieval::{retrieve_packages, tokens, Retrieval};
pub use rules::{operational_steps, rule_based_dag};

/// Generation calls after the first one.
pub const MAX_RETRIES: usize = 2;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("no value for prompt placeholder `{0}`")]
    MissingPlaceholder(String),
    #[error("malformed template: {0}")]
    Template(String),
    #[error("step {step}: `{object}` is not held at this point")]
    NotHeld { step: String, object: String },
    #[error("step {step}: `{object}` is already held")]
    AlreadyHeld { step: String, object: String },
    #[error("step {step}: container `{container}` was closed earlier in the package")]
    ContainerClosed { step: String, container: String },
    #[error("step {0}: skill cannot appear in a package")]
    Unsupported(String),
    #[error("package steps depend on each other in a cycle: {}", .0.join(", "))]
    Cyclic(Vec<String>),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error("generator failed: {0}")]
    Transport(String),
    #[error("environment variable {0} is not set")]
    MissingEnv(&'static str),
    #[error("generator response is not a valid graph after {retries_used} retries: {error}")]
    Unparseable { retries_used: usize, error: DagError, diagnostics: Vec<Diagnostic> },
    #[error("graph still has {} problem(s) after {retries_used} retries", .report.diagnostics_per_round.last().map_or(0, Vec::len))]
    StillInvalid { retries_used: usize, report: Box<GenerationReport> },
}

/// Produces graph text for a prompt. The text may be invalid; the
/// correction loop deals with that.
pub trait PlanGenerator {
    fn generate(&self, prompt: &str) -> Result<String, GenError>;
}

/// Ignores the prompt and derives the graph from structured packages.
#[derive(Debug, Clone)]
pub struct RuleBased {
    pub packages: Vec<TaskPackage>,
}

impl PlanGenerator for RuleBased {
    fn generate(&self, _prompt: &str) -> Result<String, GenError> {
        Ok(serialize_dag(&rule_based_dag(&self.packages)?))
    }
}

/// Replays canned responses in order, for tests.
#[derive(Debug, Default)]
pub struct Scripted {
    responses: RefCell<VecDeque<String>>,
    calls: Cell<usize>,
    prompts: RefCell<Vec<String>>,
}

impl Scripted {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Scripted { responses: RefCell::new(responses.into_iter().map(Into::into).collect()), ..Default::default() }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.borrow().clone()
    }
}

impl PlanGenerator for Scripted {
    fn generate(&self, prompt: &str) -> Result<String, GenError> {
        self.calls.set(self.calls.get() + 1);
        self.prompts.borrow_mut().push(prompt.to_string());
        self.responses.borrow_mut().pop_front().ok_or_else(|| GenError::Transport("script exhausted".into()))
    }
}

/// Chat-completion endpoint. The whole prompt goes out as one user message.
#[derive(Debug, Clone)]
pub struct RemoteLlm {
    pub url: String,
    pub model: String,
    pub key: String,
    pub timeout: Duration,
}

impl RemoteLlm {
    /// Reads `PARASCHED_LLM_URL`, `PARASCHED_LLM_MODEL` and `PARASCHED_LLM_KEY`.
    pub fn from_env() -> Result<Self, GenError> {
        let var = |name: &'static str| std::env::var(name).ok().filter(|v| !v.is_empty()).ok_or(GenError::MissingEnv(name));
        Ok(RemoteLlm {
            url: var("PARASCHED_LLM_URL")?,
            model: var("PARASCHED_LLM_MODEL")?,
            key: var("PARASCHED_LLM_KEY")?,
            timeout: Duration::from_secs(120),
        })
    }
}

impl PlanGenerator for RemoteLlm {
    fn generate(&self, prompt: &str) -> Result<String, GenError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| GenError::Transport(e.to_string()))?;
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp: serde_json::Value = client
            .post(&self.url)
            .bearer_auth(&self.key)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| GenError::Transport(e.to_string()))?;
        resp.pointer("/choices/0/message/content")
            .or_else(|| resp.get("text"))
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| GenError::Transport("response carries no message text".into()))
    }
}

#[derive(Debug, Clone)]
pub struct GenerationReport {
    pub final_dag: Dag,
    pub retries_used: usize,
    /// Problems found after each generation call, in call order.
    pub diagnostics_per_round: Vec<Vec<Diagnostic>>,
}

/// Generate, parse, verify; on problems render a correction prompt and try
/// again, at most [`MAX_RETRIES`] times. An unparseable response counts as
/// a problem round until the last call, where it becomes a hard error.
pub fn generate_with_correction(gen: &dyn PlanGenerator, ctx: &PromptContext) -> Result<GenerationReport, GenError> {
    let mut prompt = render_prompt(PromptKind::DagFirst, ctx)?;
    let mut rounds: Vec<Vec<Diagnostic>> = vec![];
    let mut retries = 0;
    loop {
        let text = gen.generate(&prompt)?;
        let problems = match parse_dag_text(&text) {
            Ok(dag) => {
                let diags = verify(&dag);
                rounds.push(diags.clone());
                if diags.is_empty() {
                    return Ok(GenerationReport { final_dag: dag, retries_used: retries, diagnostics_per_round: rounds });
                }
                if retries == MAX_RETRIES {
                    let report = GenerationReport { final_dag: dag, retries_used: retries, diagnostics_per_round: rounds };
                    return Err(GenError::StillInvalid { retries_used: retries, report: Box::new(report) });
                }
                render_problems(&diags)
            }
            Err(error) => {
                if retries == MAX_RETRIES {
                    let diagnostics = rounds.last().cloned().unwrap_or_default();
                    return Err(GenError::Unparseable { retries_used: retries, error, diagnostics });
                }
                rounds.push(vec![]);
                format!("The output could not be parsed: {error}")
            }
        };
        let correction = PromptContext { response: text, problems, ..ctx.clone() };
        prompt = render_prompt(PromptKind::DagCorrection, &correction)?;
        retries += 1;
    }
}
