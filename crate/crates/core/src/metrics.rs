//! Efficiency, failure, step-merging and arm-parallelism rates.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::scheduler::{Plan, ScheduleEntry};
use crate::Seconds;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("makespan is zero")]
    ZeroMakespan,
    #[error("no steps were scheduled")]
    ZeroSteps,
    #[error("actual step count {actual} must be positive and at most the ideal count {ideal}")]
    BadStepCounts { actual: usize, ideal: usize },
}

/// Per-step success flags of one execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionReport {
    pub success: Vec<bool>,
}

impl ExecutionReport {
    pub fn all_succeeded(steps: usize) -> Self {
        ExecutionReport { success: vec![true; steps] }
    }

    /// The first `succeeded` steps succeed, the rest fail.
    pub fn with_counts(steps: usize, succeeded: usize) -> Self {
        ExecutionReport { success: (0..steps).map(|i| i < succeeded).collect() }
    }

    pub fn scheduled(&self) -> usize {
        self.success.len()
    }

    pub fn succeeded(&self) -> usize {
        self.success.iter().filter(|&&s| s).count()
    }
}

/// 100 * succeeded / (scheduled * makespan).
pub fn tei(report: &ExecutionReport, makespan: Seconds) -> Result<f64, MetricError> {
    if makespan == 0 {
        return Err(MetricError::ZeroMakespan);
    }
    if report.scheduled() == 0 {
        return Err(MetricError::ZeroSteps);
    }
    Ok(100.0 * report.succeeded() as f64 / (report.scheduled() as f64 * makespan as f64))
}

/// Fraction of scheduled steps that failed.
pub fn tfr(report: &ExecutionReport) -> Result<f64, MetricError> {
    if report.scheduled() == 0 {
        return Err(MetricError::ZeroSteps);
    }
    Ok(1.0 - report.succeeded() as f64 / report.scheduled() as f64)
}

/// actual / ideal step count.
pub fn ppr_raw(actual: usize, ideal: usize) -> Result<f64, MetricError> {
    if actual == 0 || actual > ideal {
        return Err(MetricError::BadStepCounts { actual, ideal });
    }
    Ok(actual as f64 / ideal as f64)
}

/// Share of package steps removed by merging: 1 - actual / ideal.
pub fn ppr(actual: usize, ideal: usize) -> Result<f64, MetricError> {
    Ok(1.0 - ppr_raw(actual, ideal)?)
}

fn union(entries: &[ScheduleEntry]) -> Vec<(Seconds, Seconds)> {
    let mut iv: Vec<(Seconds, Seconds)> = entries.iter().filter(|e| e.end > e.start).map(|e| (e.start, e.end)).collect();
    iv.sort_unstable();
    let mut out: Vec<(Seconds, Seconds)> = vec![];
    for (s, e) in iv {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Seconds during which both arms are executing something.
pub fn apr_raw(plan: &Plan) -> Seconds {
    let (l, r) = (union(&plan.left), union(&plan.right));
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < l.len() && j < r.len() {
        let lo = l[i].0.max(r[j].0);
        let hi = l[i].1.min(r[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if l[i].1 < r[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Both-arms-busy time as a fraction of the makespan.
pub fn apr(plan: &Plan) -> Result<f64, MetricError> {
    if plan.makespan == 0 {
        return Err(MetricError::ZeroMakespan);
    }
    Ok(apr_raw(plan) as f64 / plan.makespan as f64)
}

/// Pairs of different single-arm operations, one on each arm, that overlap
/// in time. Dual-arm operations are one joint action and are not counted.
pub fn parallel_intervals(plan: &Plan) -> usize {
    let dual = |e: &ScheduleEntry, other: &[ScheduleEntry]| other.iter().any(|o| o.node == e.node);
    let left: Vec<&ScheduleEntry> = plan.left.iter().filter(|e| !dual(e, &plan.right)).collect();
    let right: Vec<&ScheduleEntry> = plan.right.iter().filter(|e| !dual(e, &plan.left)).collect();
    left.iter()
        .map(|l| right.iter().filter(|r| l.start.max(r.start) < l.end.min(r.end)).count())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSet {
    pub tei: f64,
    pub tfr: f64,
    pub ppr: f64,
    pub apr: f64,
}

impl MetricSet {
    pub fn compute(report: &ExecutionReport, plan: &Plan, actual: usize, ideal: usize) -> Result<Self, MetricError> {
        Ok(MetricSet {
            tei: tei(report, plan.makespan)?,
            tfr: tfr(report)?,
            ppr: ppr(actual, ideal)?,
            apr: apr(plan)?,
        })
    }

    /// Component-wise mean; `None` for an empty slice.
    pub fn mean(sets: &[MetricSet]) -> Option<MetricSet> {
        if sets.is_empty() {
            return None;
        }
        let n = sets.len() as f64;
        let sum = |f: fn(&MetricSet) -> f64| sets.iter().map(f).sum::<f64>() / n;
        Some(MetricSet { tei: sum(|m| m.tei), tfr: sum(|m| m.tfr), ppr: sum(|m| m.ppr), apr: sum(|m| m.apr) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub scene: String,
    pub difficulty: String,
    /// Number of packages in the cumulative group.
    pub group: usize,
    pub makespan: Seconds,
    pub metrics: MetricSet,
}

pub fn rows_to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("scene,difficulty,group,makespan,TEI,TFR,PPR,APR\n");
    for r in rows {
        let m = r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
            r.scene, r.difficulty, r.group, r.makespan, m.tei, m.tfr, m.ppr, m.apr
        );
    }
    out
}

/// Aligned table with one averaged line per scene and difficulty.
pub fn rows_to_text(rows: &[MetricRow]) -> String {
    let mut out = format!("{:<12} {:<10} {:>6} {:>8} {:>8} {:>8} {:>8}\n", "scene", "difficulty", "groups", "TEI", "TFR", "PPR", "APR");
    let mut keys: Vec<(&str, &str)> = rows.iter().map(|r| (r.scene.as_str(), r.difficulty.as_str())).collect();
    keys.dedup();
    for (scene, diff) in keys {
        let sets: Vec<MetricSet> = rows.iter().filter(|r| r.scene == scene && r.difficulty == diff).map(|r| r.metrics).collect();
        let m = MetricSet::mean(&sets).unwrap();
        let _ = writeln!(
            out,
            "{scene:<12} {diff:<10} {:>6} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            sets.len(),
            m.tei,
            m.tfr,
            m.ppr,
            m.apr
        );
    }
    out
}
