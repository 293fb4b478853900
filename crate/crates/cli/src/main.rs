//! Command-line front end: validate and schedule graphs, run the full
//! instruction pipeline, benchmark a corpus.
//!
//! Exit codes: 0 ok, 1 domain failure (diagnostics, nothing retrieved,
//! generation gave up), 2 scheduler livelock, 3 bad input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use parasched::dag::{dag_to_json, parse_dag_text, serialize_dag, Dag};
use parasched::gantt::{gantt, schedule_text, timeline, GanttFormat};
use parasched::generation::{
    generate_with_correction, operational_steps, retrieve_packages, rule_based_dag, GenError, PlanGenerator, PromptContext,
    RemoteLlm, RuleBased,
};
use parasched::metrics::{parallel_intervals, rows_to_csv, rows_to_text, ExecutionReport, MetricRow, MetricSet};
use parasched::oracle::optimal_makespan;
use parasched::package::{load_corpus, serialize_packages, Corpus, Difficulty};
use parasched::random::{random_dag_seeded, RandomDagConfig};
use parasched::scheduler::{schedule, Plan, ScheduleError};
use parasched::selector::{choose_arm_explained, ArmState, TaskKind, TaskView};
use parasched::validator::{diagnostics_json, render_problems, verify};

#[derive(Parser)]
#[command(name = "parasched", version, about = "Dual-arm task graph validation, scheduling and planning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
    Svg,
    Ascii,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a graph file for dependency problems.
    Validate {
        dag: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Schedule a graph file onto the two arms.
    Schedule {
        dag: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Retrieve packages for an instruction, build a graph, schedule it.
    Plan {
        instruction: String,
        #[arg(long)]
        corpus: PathBuf,
        /// Generate through the remote model instead of the rule-based generator.
        #[arg(long)]
        llm: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Metrics over cumulative package groups, optionally against the exact optimum.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        samples: u64,
        #[arg(long, default_value_t = 8)]
        max_nodes: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Show which arm the selector picks for one task in one arm state.
    ExplainChoice {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        dual: bool,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long)]
        now: Option<u64>,
        #[arg(long, default_value_t = 0)]
        left_free: u64,
        /// Object the left arm holds; omit for an unlocked arm.
        #[arg(long)]
        left_chain: Option<String>,
        #[arg(long, default_value_t = 0)]
        right_free: u64,
        #[arg(long)]
        right_chain: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Pick,
    Place,
    Other,
}

struct Fail {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Fail {
    Fail { code, msg: msg.into() }
}

type Out = Result<(String, u8), Fail>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Validate { dag, format } => cmd_validate(&dag, format),
        Cmd::Schedule { dag, format } => cmd_schedule(&dag, format),
        Cmd::Plan { instruction, corpus, llm, format } => cmd_plan(&instruction, &corpus, llm, format),
        Cmd::Bench { corpus, oracle, seed, samples, max_nodes, format } => {
            cmd_bench(&corpus, oracle.then_some((seed, samples, max_nodes)), format)
        }
        Cmd::ExplainChoice { kind, source, target, dual, start, now, left_free, left_chain, right_free, right_chain } => {
            let kind = match kind {
                KindArg::Pick => TaskKind::Pick,
                KindArg::Place => TaskKind::Place,
                KindArg::Other => TaskKind::Other,
            };
            let task = TaskView {
                kind,
                source: source.as_deref(),
                target: target.as_deref(),
                dual,
                start,
                now: now.unwrap_or(start),
            };
            let arm = |free, chain: Option<String>| ArmState { free_time: free, locked: chain.is_some(), chain };
            let (choice, branch) = choose_arm_explained(&task, &arm(left_free, left_chain), &arm(right_free, right_chain));
            Ok((format!("{choice:?} ({})\n", branch.describe()), 0))
        }
    };
    match result {
        Ok((out, code)) => {
            print!("{out}");
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn read_dag(path: &Path) -> Result<Dag, Fail> {
    let text = fs::read_to_string(path).map_err(|e| fail(3, format!("{}: {e}", path.display())))?;
    parse_dag_text(&text).map_err(|e| fail(3, format!("{}: {e}", path.display())))
}

fn schedule_or_fail(dag: &Dag) -> Result<Plan, Fail> {
    schedule(dag).map_err(|e @ ScheduleError::Livelock { .. }| fail(2, e.to_string()))
}

fn cmd_validate(path: &Path, format: Format) -> Out {
    let dag = read_dag(path)?;
    let diags = verify(&dag);
    let code = if diags.is_empty() { 0 } else { 1 };
    let out = match format {
        Format::Json => format!("{:#}\n", json!({"ok": diags.is_empty(), "diagnostics": diagnostics_json(&diags)})),
        Format::Text if diags.is_empty() => "OK\n".to_string(),
        Format::Text => format!("{}\n", render_problems(&diags)),
        _ => return Err(fail(3, "validate supports --format text or json")),
    };
    Ok((out, code))
}

fn cmd_schedule(path: &Path, format: Format) -> Out {
    let dag = read_dag(path)?;
    let diags = verify(&dag);
    if !diags.is_empty() {
        return Err(fail(1, format!("graph has dependency problems:\n{}", render_problems(&diags))));
    }
    let plan = schedule_or_fail(&dag)?;
    let out = match format {
        Format::Text => {
            let mut s = schedule_text(&plan);
            if plan.rollbacks > 0 {
                let _ = writeln!(s, "\nRollbacks: {}", plan.rollbacks);
            }
            s
        }
        Format::Json => format!("{:#}\n", plan.to_json()),
        Format::Svg => gantt(&plan, GanttFormat::Svg),
        Format::Ascii => format!("{}\n{}", timeline(&plan, 1), gantt(&plan, GanttFormat::Ascii)),
        Format::Csv => return Err(fail(3, "schedule supports --format text, json, svg or ascii")),
    };
    Ok((out, 0))
}

fn read_corpus(root: &Path) -> Result<Corpus, Fail> {
    if !root.is_dir() {
        return Err(fail(3, format!("{}: not a corpus directory", root.display())));
    }
    let (corpus, diags) = load_corpus(root);
    for d in diags {
        eprintln!("warning: {}: {}", d.path.display(), d.message);
    }
    Ok(corpus)
}

fn gen_fail(e: GenError) -> Fail {
    match e {
        GenError::MissingEnv(_) => fail(3, e.to_string()),
        other => fail(1, other.to_string()),
    }
}

fn cmd_plan(instruction: &str, root: &Path, llm: bool, format: Format) -> Out {
    let corpus = read_corpus(root)?;
    let found = retrieve_packages(instruction, &corpus);
    if found.is_empty() {
        return Err(fail(1, found.report()));
    }
    let packages = found.packages.clone();
    let gen: Box<dyn PlanGenerator> = if llm {
        Box::new(RemoteLlm::from_env().map_err(gen_fail)?)
    } else {
        Box::new(RuleBased { packages: packages.clone() })
    };
    let environment = if found.environment.trim().is_empty() { "unknown".to_string() } else { found.environment.clone() };
    let ctx = PromptContext::new(instruction, &environment, &serialize_packages(&packages));
    let report = generate_with_correction(gen.as_ref(), &ctx).map_err(gen_fail)?;
    let dag = report.final_dag;
    let plan = schedule_or_fail(&dag)?;
    let ops = dag.operations().count();
    let ideal = operational_steps(&packages);
    let metrics = MetricSet::compute(&ExecutionReport::all_succeeded(ops), &plan, ops, ideal)
        .map_err(|e| fail(1, e.to_string()))?;
    let intervals = parallel_intervals(&plan);

    let out = match format {
        Format::Json => format!(
            "{:#}\n",
            json!({
                "scene": found.scene,
                "packages": packages.iter().map(|p| p.package_id.to_string()).collect::<Vec<_>>(),
                "retries_used": report.retries_used,
                "dag": dag_to_json(&dag),
                "plan": plan.to_json(),
                "parallel_intervals": intervals,
                "metrics": metrics,
            })
        ),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "Retrieved {}", found.report());
            let _ = writeln!(s, "Generator retries: {}\n", report.retries_used);
            s.push_str(&serialize_dag(&dag));
            s.push('\n');
            s.push_str(&schedule_text(&plan));
            let _ = writeln!(s, "\nParallel intervals: {intervals}");
            let _ = writeln!(s, "Steps: {ops} of {ideal}");
            let _ = writeln!(
                s,
                "TEI {:.4}  TFR {:.4}  PPR {:.4}  APR {:.4}",
                metrics.tei, metrics.tfr, metrics.ppr, metrics.apr
            );
            s
        }
        _ => return Err(fail(3, "plan supports --format text or json")),
    };
    Ok((out, 0))
}

fn bench_rows(corpus: &Corpus) -> Result<Vec<MetricRow>, Fail> {
    let mut rows = vec![];
    for (scene_name, scene) in &corpus.scenes {
        for diff in [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard] {
            let group: Vec<_> =
                scene.entries.iter().filter(|e| e.difficulty == Some(diff)).map(|e| e.package.clone()).collect();
            for k in 1..=group.len() {
                let pkgs = &group[..k];
                let dag = rule_based_dag(pkgs).map_err(gen_fail)?;
                let plan = schedule_or_fail(&dag)?;
                let ops = dag.operations().count();
                let metrics = MetricSet::compute(&ExecutionReport::all_succeeded(ops), &plan, ops, operational_steps(pkgs))
                    .map_err(|e| fail(1, e.to_string()))?;
                rows.push(MetricRow {
                    scene: scene_name.clone(),
                    difficulty: diff.as_str().to_string(),
                    group: k,
                    makespan: plan.makespan,
                    metrics,
                });
            }
        }
    }
    Ok(rows)
}

struct OracleRow {
    seed: u64,
    nodes: usize,
    makespan: u64,
    optimal: u64,
}

impl OracleRow {
    fn ratio(&self) -> f64 {
        if self.optimal == 0 {
            1.0
        } else {
            self.makespan as f64 / self.optimal as f64
        }
    }
}

fn oracle_rows(seed: u64, samples: u64, max_nodes: usize) -> Result<Vec<OracleRow>, Fail> {
    if !(2..=12).contains(&max_nodes) {
        return Err(fail(3, "--max-nodes must be between 2 and 12 for the exact search"));
    }
    let cfg = RandomDagConfig::with_max_nodes(max_nodes);
    let mut rows = vec![];
    for s in seed..seed + samples {
        let dag = random_dag_seeded(s, &cfg);
        let plan = schedule_or_fail(&dag)?;
        let opt = optimal_makespan(&dag, max_nodes).map_err(|e| fail(1, format!("seed {s}: {e}")))?;
        rows.push(OracleRow { seed: s, nodes: dag.len(), makespan: plan.makespan, optimal: opt.optimal_makespan });
    }
    Ok(rows)
}

fn cmd_bench(root: &Path, oracle: Option<(u64, u64, usize)>, format: Format) -> Out {
    let corpus = read_corpus(root)?;
    let rows = bench_rows(&corpus)?;
    let oracle = match oracle {
        Some((seed, samples, max_nodes)) => Some(oracle_rows(seed, samples, max_nodes)?),
        None => None,
    };
    let out = match format {
        Format::Json => {
            let mut v = json!({ "rows": rows });
            if let Some(o) = &oracle {
                v["oracle"] = o
                    .iter()
                    .map(|r| json!({"seed": r.seed, "nodes": r.nodes, "makespan": r.makespan, "optimal": r.optimal, "ratio": r.ratio()}))
                    .collect();
            }
            format!("{v:#}\n")
        }
        Format::Csv | Format::Text => {
            let mut s = if format == Format::Csv { rows_to_csv(&rows) } else { rows_to_text(&rows) };
            if let Some(o) = &oracle {
                s.push_str("\nseed,nodes,makespan,optimal,ratio\n");
                for r in o {
                    let _ = writeln!(s, "{},{},{},{},{:.4}", r.seed, r.nodes, r.makespan, r.optimal, r.ratio());
                }
                let within = o.iter().filter(|r| r.ratio() <= 1.5).count();
                let worst = o.iter().map(OracleRow::ratio).fold(1.0, f64::max);
                let _ = writeln!(s, "# ratio <= 1.5 in {within} of {}; worst {worst:.4}", o.len());
            }
            s
        }
        _ => return Err(fail(3, "bench supports --format csv, text or json")),
    };
    Ok((out, 0))
}
