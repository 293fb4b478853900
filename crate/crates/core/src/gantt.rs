//! Text and SVG renderings of a plan.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::scheduler::{Plan, ScheduleEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanttFormat {
    Ascii,
    Svg,
}

impl FromStr for GanttFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ascii" => Ok(GanttFormat::Ascii),
            "svg" => Ok(GanttFormat::Svg),
            other => Err(format!("unknown gantt format `{other}`")),
        }
    }
}

pub fn gantt(plan: &Plan, format: GanttFormat) -> String {
    match format {
        GanttFormat::Ascii => lanes(plan),
        GanttFormat::Svg => svg(plan),
    }
}

fn lane(out: &mut String, title: &str, entries: &[ScheduleEntry]) {
    let _ = writeln!(out, "{title} arm schedule table:");
    for e in entries {
        let span = format!("{}-{}", e.start, e.end);
        let width = (span.len() + 1).max(8);
        let _ = writeln!(out, "{span:<width$}{}", e.name);
    }
}

/// Both lanes as `start-end name` lines, the interval left-aligned in an
/// eight-column field (wider when the interval itself needs it).
pub fn lanes(plan: &Plan) -> String {
    let mut out = String::new();
    lane(&mut out, "Left", &plan.left);
    out.push('\n');
    lane(&mut out, "Right", &plan.right);
    out
}

/// The full schedule report: total time followed by both lanes.
pub fn schedule_text(plan: &Plan) -> String {
    format!("Total execution time: {} seconds\n\n{}", plan.makespan, lanes(plan))
}

/// A bar per arm, one column per `scale` seconds, each entry drawn with the
/// last digit of its node index.
pub fn timeline(plan: &Plan, scale: u64) -> String {
    let scale = scale.max(1);
    let cols = plan.makespan.div_ceil(scale) as usize;
    let mut out = String::new();
    for (label, entries) in [("L", &plan.left), ("R", &plan.right)] {
        let mut row = vec!['.'; cols];
        for e in entries {
            let mark = char::from_digit((e.node % 10) as u32, 10).unwrap();
            for c in (e.start / scale) as usize..(e.end.div_ceil(scale) as usize).min(cols) {
                row[c] = mark;
            }
        }
        let _ = writeln!(out, "{label} |{}|", row.into_iter().collect::<String>());
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg(plan: &Plan) -> String {
    const PX: u64 = 10;
    const LANE: u64 = 40;
    const LEFT_PAD: u64 = 60;
    let width = LEFT_PAD + plan.makespan * PX + 20;
    let height = 2 * LANE + 40;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for (row, (label, entries)) in [("Left", &plan.left), ("Right", &plan.right)].into_iter().enumerate() {
        let y = 10 + row as u64 * (LANE + 10);
        let _ = writeln!(out, r#"  <text x="4" y="{}" font-size="12">{label}</text>"#, y + LANE / 2);
        for e in entries.iter().filter(|e| e.end > e.start) {
            let x = LEFT_PAD + e.start * PX;
            let w = (e.end - e.start) * PX;
            let name = xml_escape(&e.name);
            let _ = writeln!(
                out,
                r##"  <rect x="{x}" y="{y}" width="{w}" height="{LANE}" fill="#9cc3e6" stroke="#1f3b57"><title>{}-{} {name}</title></rect>"##,
                e.start, e.end
            );
            let _ = writeln!(out, r#"  <text x="{}" y="{}" font-size="9">{}</text>"#, x + 2, y + LANE / 2, e.node);
        }
    }
    let _ = writeln!(out, r#"  <text x="{LEFT_PAD}" y="{}" font-size="12">makespan {} s</text>"#, height - 6, plan.makespan);
    out.push_str("</svg>\n");
    out
}
