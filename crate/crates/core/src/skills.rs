//! The skill library: every meta operation a task package may invoke.

use serde::Serialize;

/// Parameter shape of a skill call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Params {
    SourceTarget,
    TargetOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SkillCategory {
    Pick,
    Place,
    ToolUse,
    ContainerSwitch,
    /// A pause between two steps. Never becomes a graph node; the generator
    /// folds it into the following node's `delay_after`.
    Wait,
    Completion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SkillSpec {
    pub name: &'static str,
    pub params: Params,
    pub category: SkillCategory,
    pub default_arms: u8,
    pub description: &'static str,
}

const fn skill(
    name: &'static str,
    params: Params,
    category: SkillCategory,
    default_arms: u8,
    description: &'static str,
) -> SkillSpec {
    SkillSpec { name, params, category, default_arms, description }
}

use Params::{SourceTarget as ST, TargetOnly as T};
use SkillCategory::*;

pub static SKILLS: &[SkillSpec] = &[
    skill("pick", ST, Pick, 1, "Pick the \"target\" object from the \"source\" placement."),
    skill("place", ST, Place, 1, "Place the \"source\" object into/on the \"target\" area."),
    skill("slide_open", T, ContainerSwitch, 1, "Slide open a prismatic-joint object (e.g., drawer)."),
    skill("slide_close", T, ContainerSwitch, 1, "Slide close a prismatic-joint object (e.g., drawer)."),
    skill("flap_open", T, ContainerSwitch, 1, "Rotate open a revolute-joint object (e.g., microwave)."),
    skill("flap_close", T, ContainerSwitch, 1, "Rotate close a revolute-joint object (e.g., oven)."),
    skill("push_to", ST, ToolUse, 1, "Push the \"target\" object to a specified location."),
    skill("lift_from", ST, ToolUse, 2, "Lift the \"source\" object from the \"target\" surface."),
    skill("open_cap", T, ContainerSwitch, 2, "Open the cap of the \"target\" object."),
    skill("close_cap", T, ContainerSwitch, 2, "Close the cap of the \"target\" object."),
    skill("wipe", ST, ToolUse, 1, "Wipe the \"target\" using the \"source\" object."),
    skill("stick_on", ST, ToolUse, 1, "Stick the \"source\" object onto the \"target\"."),
    skill("pour_into", ST, ToolUse, 1, "Pour the \"source\" substance into the \"target\" container."),
    skill("cut", ST, ToolUse, 2, "Use the \"source\" tool to cut the \"target\"."),
    skill("stir", ST, ToolUse, 2, "Use the \"source\" tool to stir the \"target\"."),
    skill("press_open", T, ContainerSwitch, 1, "Press to open the \"target\" object."),
    skill("press_close", T, ContainerSwitch, 1, "Press to close the \"target\" object."),
    skill("write", ST, ToolUse, 1, "Use the \"source\" to write on the \"target\"."),
    skill("inspect", ST, ToolUse, 1, "Inspect the \"target\" area using the \"source\"."),
    skill("bind", ST, ToolUse, 2, "Bind the \"source\" to the \"target\" support."),
    skill("weld", ST, ToolUse, 2, "Weld the \"target\" using the \"source\" welding tool."),
    skill("scan", ST, ToolUse, 1, "Scan the \"target\" object with the \"source\" scanner."),
    skill("tighten", ST, ToolUse, 1, "Tighten the \"target\" component using the \"source\"."),
    // Listed among tool skills but takes only a target.
    skill("align", T, ToolUse, 1, "Align the \"target\" component to its correct pose."),
    skill("assemble", ST, ToolUse, 2, "Assemble the \"target\" part with the \"source\" tool."),
    skill("drill", ST, ToolUse, 2, "Drill holes into the \"target\" with the \"source\" drill."),
    skill("mark", ST, ToolUse, 1, "Mark the \"target\" object using the \"source\"."),
    skill("wait", T, Wait, 1, "Wait for the \"target\" process to finish."),
    skill("task_completion", T, Completion, 1, "Aggregate all terminal operations."),
];

pub fn lookup(name: &str) -> Option<&'static SkillSpec> {
    SKILLS.iter().find(|s| s.name == name)
}

/// Container-switch skills that open their target.
pub fn is_opening(name: &str) -> bool {
    matches!(name, "slide_open" | "flap_open" | "open_cap" | "press_open")
}

/// Container-switch skills that close their target.
pub fn is_closing(name: &str) -> bool {
    matches!(name, "slide_close" | "flap_close" | "close_cap" | "press_close")
}

/// Opening and closing skills of the same mechanism share a stem.
pub fn mechanism(name: &str) -> &str {
    name.trim_end_matches("_open")
        .trim_end_matches("_close")
        .trim_start_matches("open_")
        .trim_start_matches("close_")
}

/// Renders the skill list in the form spliced into generation prompts.
pub fn render_skill_list() -> String {
    let mut out = String::new();
    for s in SKILLS.iter().filter(|s| !matches!(s.category, Wait | Completion)) {
        let params = match s.params {
            ST => "source, target",
            T => "target",
        };
        let arms = if s.default_arms == 2 { "Dual" } else { "Left/Right" };
        out.push_str(&format!("{}({}): {} [{}]\n", s.name, params, s.description, arms));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_unique() {
        let names: HashSet<_> = SKILLS.iter().map(|s| s.name).collect();
        assert_eq!(names.len(), SKILLS.len());
    }

    #[test]
    fn container_switch_set_is_exact() {
        let mut got: Vec<_> = SKILLS
            .iter()
            .filter(|s| s.category == ContainerSwitch)
            .map(|s| s.name)
            .collect();
        got.sort();
        let mut want = vec![
            "slide_open", "slide_close", "flap_open", "flap_close", "open_cap", "close_cap",
            "press_open", "press_close",
        ];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn tool_use_covers_library() {
        for name in [
            "push_to", "wipe", "stick_on", "pour_into", "cut", "stir", "write", "inspect", "bind",
            "weld", "scan", "tighten", "align", "assemble", "drill", "mark", "lift_from",
        ] {
            assert_eq!(lookup(name).unwrap().category, ToolUse, "{name}");
        }
    }

    #[test]
    fn mechanism_pairs() {
        assert_eq!(mechanism("flap_open"), mechanism("flap_close"));
        assert_eq!(mechanism("open_cap"), mechanism("close_cap"));
        assert_ne!(mechanism("flap_open"), mechanism("slide_open"));
    }
}
