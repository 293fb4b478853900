//! Arm selection for a ready operation given both arms' free times and the
//! object each arm currently holds.

use serde::Serialize;

use crate::dag::{DagNode, NodeKind};
use crate::Seconds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Arm {
    Left,
    Right,
}

impl Arm {
    pub fn other(self) -> Arm {
        match self {
            Arm::Left => Arm::Right,
            Arm::Right => Arm::Left,
        }
    }

    pub fn idx(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ArmChoice {
    Left,
    Right,
    Both,
    None,
}

impl From<Arm> for ArmChoice {
    fn from(a: Arm) -> Self {
        match a {
            Arm::Left => ArmChoice::Left,
            Arm::Right => ArmChoice::Right,
        }
    }
}

impl ArmChoice {
    pub fn single(self) -> Option<Arm> {
        match self {
            ArmChoice::Left => Some(Arm::Left),
            ArmChoice::Right => Some(Arm::Right),
            _ => None,
        }
    }

    pub fn mirrored(self) -> ArmChoice {
        match self {
            ArmChoice::Left => ArmChoice::Right,
            ArmChoice::Right => ArmChoice::Left,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ArmState {
    pub free_time: Seconds,
    pub locked: bool,
    pub chain: Option<String>,
}

impl ArmState {
    pub fn free(free_time: Seconds) -> Self {
        ArmState { free_time, locked: false, chain: None }
    }

    pub fn holding(free_time: Seconds, object: &str) -> Self {
        ArmState { free_time, locked: true, chain: Some(object.to_string()) }
    }

    pub fn owns(&self, object: Option<&str>) -> bool {
        object.is_some() && self.chain.as_deref() == object
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TaskKind {
    Pick,
    Place,
    Other,
}

/// What the selector needs to know about an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TaskView<'a> {
    pub kind: TaskKind,
    pub source: Option<&'a str>,
    pub target: Option<&'a str>,
    pub dual: bool,
    /// Earliest start allowed by the task's dependencies.
    pub start: Seconds,
    /// Current simulation time. Checks on the arm that already holds the
    /// task's object compare against `max(start, now)`; every other check
    /// compares against `start`.
    pub now: Seconds,
}

impl<'a> TaskView<'a> {
    pub fn of(node: &'a DagNode, start: Seconds, now: Seconds) -> Self {
        let kind = match node.kind {
            NodeKind::Pick => TaskKind::Pick,
            NodeKind::Place => TaskKind::Place,
            _ => TaskKind::Other,
        };
        TaskView { kind, source: node.source(), target: node.target(), dual: node.is_dual(), start, now }
    }

    /// The object an arm must hold to take this task: target for a pick,
    /// otherwise source, falling back to target when there is no source.
    pub fn match_object(&self) -> Option<&'a str> {
        match self.kind {
            TaskKind::Pick => self.target,
            _ => self.source.or(self.target),
        }
    }

    fn owner_deadline(&self) -> Seconds {
        self.start.max(self.now)
    }
}

/// Which rule produced a choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    PlaceOverride,
    BothLocked,
    DualFree,
    OneLocked,
    BothFree,
}

impl Branch {
    pub fn describe(self) -> &'static str {
        match self {
            Branch::PlaceOverride => "place: arm holding the source object",
            Branch::BothLocked => "both arms locked",
            Branch::DualFree => "dual-arm task with at least one unlocked arm",
            Branch::OneLocked => "exactly one arm locked",
            Branch::BothFree => "both arms unlocked: earliest free arm",
        }
    }
}

pub fn choose_arm(task: &TaskView<'_>, left: &ArmState, right: &ArmState) -> ArmChoice {
    choose_arm_explained(task, left, right).0
}

fn earliest(left: &ArmState, right: &ArmState) -> ArmChoice {
    if left.free_time <= right.free_time {
        ArmChoice::Left
    } else {
        ArmChoice::Right
    }
}

pub fn choose_arm_explained(task: &TaskView<'_>, left: &ArmState, right: &ArmState) -> (ArmChoice, Branch) {
    let arms = [left, right];
    let owner_ok = |a: &ArmState| a.free_time <= task.owner_deadline();

    if task.kind == TaskKind::Place {
        for (arm, st) in [(Arm::Left, left), (Arm::Right, right)] {
            if st.owns(task.source) && owner_ok(st) {
                return (arm.into(), Branch::PlaceOverride);
            }
        }
        return (ArmChoice::None, Branch::PlaceOverride);
    }

    let o = task.match_object();
    if left.locked && right.locked {
        let (ml, mr) = (left.owns(o), right.owns(o));
        let choice = if task.dual {
            if (ml && mr) || (ml && right.chain.is_none()) || (mr && left.chain.is_none()) {
                ArmChoice::Both
            } else {
                ArmChoice::None
            }
        } else if ml && !mr && owner_ok(left) {
            ArmChoice::Left
        } else if mr && !ml && owner_ok(right) {
            ArmChoice::Right
        } else if ml && mr {
            earliest(left, right)
        } else {
            ArmChoice::None
        };
        return (choice, Branch::BothLocked);
    }

    if task.dual {
        return (ArmChoice::Both, Branch::DualFree);
    }

    if left.locked != right.locked {
        let a = if left.locked { Arm::Left } else { Arm::Right };
        let (sa, sb) = (arms[a.idx()], arms[a.other().idx()]);
        let choice = if sa.owns(o) && owner_ok(sa) {
            a.into()
        } else if sb.free_time <= task.start {
            a.other().into()
        } else {
            ArmChoice::None
        };
        return (choice, Branch::OneLocked);
    }

    (earliest(left, right), Branch::BothFree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(kind: TaskKind, source: Option<&'static str>, target: &'static str, dual: bool, start: Seconds) -> TaskView<'static> {
        TaskView { kind, source, target: Some(target), dual, start, now: start }
    }

    #[test]
    fn place_goes_to_holder() {
        let t = task(TaskKind::Place, Some("knife"), "counter", false, 10);
        assert_eq!(choose_arm(&t, &ArmState::holding(10, "knife"), &ArmState::free(0)), ArmChoice::Left);
        assert_eq!(choose_arm(&t, &ArmState::free(0), &ArmState::holding(3, "knife")), ArmChoice::Right);
        assert_eq!(choose_arm(&t, &ArmState::free(0), &ArmState::free(0)), ArmChoice::None);
        assert_eq!(choose_arm(&t, &ArmState::holding(11, "knife"), &ArmState::free(0)), ArmChoice::None);
    }

    #[test]
    fn dual_with_free_arms_is_both() {
        let t = task(TaskKind::Other, Some("knife"), "carrots", true, 0);
        assert_eq!(choose_arm_explained(&t, &ArmState::free(0), &ArmState::free(4)), (ArmChoice::Both, Branch::DualFree));
    }

    #[test]
    fn dual_with_two_foreign_chains_is_none() {
        let t = task(TaskKind::Other, Some("knife"), "cucumber", true, 5);
        let l = ArmState::holding(5, "cucumber");
        let r = ArmState::holding(5, "knife");
        assert_eq!(choose_arm_explained(&t, &l, &r), (ArmChoice::None, Branch::BothLocked));
        let l = ArmState { free_time: 5, locked: true, chain: None };
        assert_eq!(choose_arm(&t, &l, &r), ArmChoice::Both);
    }

    #[test]
    fn free_pick_prefers_earliest_then_left() {
        let t = task(TaskKind::Pick, Some("table"), "x", false, 0);
        assert_eq!(choose_arm(&t, &ArmState::free(3), &ArmState::free(5)), ArmChoice::Left);
        assert_eq!(choose_arm(&t, &ArmState::free(6), &ArmState::free(5)), ArmChoice::Right);
        assert_eq!(choose_arm(&t, &ArmState::free(5), &ArmState::free(5)), ArmChoice::Left);
    }

    #[test]
    fn one_locked_uses_owner_or_free_arm() {
        let use_butter = task(TaskKind::Other, Some("butter"), "bread", false, 66);
        let r = ArmState::holding(66, "butter");
        let l = ArmState::free(69);
        assert_eq!(choose_arm_explained(&use_butter, &l, &r), (ArmChoice::Right, Branch::OneLocked));
        let switch = task(TaskKind::Other, None, "refrigerator", false, 0);
        assert_eq!(choose_arm(&switch, &ArmState::free(42), &ArmState::holding(40, "x")), ArmChoice::None);
        assert_eq!(choose_arm(&switch, &ArmState::free(0), &ArmState::holding(40, "x")), ArmChoice::Left);
    }

    #[test]
    fn owner_checks_use_current_time() {
        let mut t = task(TaskKind::Place, Some("knife"), "counter", false, 5);
        let l = ArmState::holding(9, "knife");
        assert_eq!(choose_arm(&t, &l, &ArmState::free(0)), ArmChoice::None);
        t.now = 9;
        assert_eq!(choose_arm(&t, &l, &ArmState::free(0)), ArmChoice::Left);
    }
}
