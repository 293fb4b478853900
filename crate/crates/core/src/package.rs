//! Task packages: the step grammar, package blocks and the on-disk corpus.
//!
//! A step line looks like
//!
//! ```text
//! A1: pick(source="table", target="carrots")(Single arm, 5 seconds)
//! ```
//!
//! and a package is a `Package <letter>: <title>` header followed by its
//! steps, optionally preceded by a `<scene> scene` line.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::skills::{self, Params, SkillCategory, SkillSpec};
use crate::Seconds;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("skill `{skill}` takes {expected} parameters")]
    WrongParams { skill: String, expected: &'static str },
    #[error("skill `{skill}` requires {expected} arm(s), step declares {found}")]
    ArmMismatch { skill: String, expected: u8, found: u8 },
    #[error("duration must be positive")]
    ZeroDuration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PackageError {
    #[error("line {line}: {source}")]
    Step { line: usize, source: StepError },
    #[error("line {line}: step line outside of a package")]
    OrphanStep { line: usize },
    #[error("line {line}: malformed package header")]
    BadHeader { line: usize },
    #[error("package {0} has no steps")]
    EmptyPackage(char),
    #[error("package {0} declared twice")]
    DuplicatePackage(char),
    #[error("line {line}: step id {found} out of sequence, expected {expected}")]
    StepSequence { line: usize, expected: String, found: String },
    #[error("line {line}: unrecognised line")]
    Unrecognised { line: usize },
}

/// A skill invocation without its step id and timing suffix, e.g.
/// `cut(source="knife", target="carrots")`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SkillCall {
    pub skill: String,
    pub source: Option<String>,
    pub target: String,
}

impl SkillCall {
    pub fn spec(&self) -> &'static SkillSpec {
        skills::lookup(&self.skill).expect("skill calls are only built from known skills")
    }

    pub fn category(&self) -> SkillCategory {
        self.spec().category
    }
}

impl fmt::Display for SkillCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some(s) => write!(f, "{}(source=\"{}\", target=\"{}\")", self.skill, s, self.target),
            None => write!(f, "{}(target=\"{}\")", self.skill, self.target),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackageStep {
    pub step_id: String,
    pub call: SkillCall,
    pub arm_count: u8,
    pub duration: Seconds,
}

impl PackageStep {
    pub fn skill(&self) -> &str {
        &self.call.skill
    }
    pub fn source(&self) -> Option<&str> {
        self.call.source.as_deref()
    }
    pub fn target(&self) -> &str {
        &self.call.target
    }
}

impl fmt::Display for PackageStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arms = if self.arm_count == 2 { "Dual" } else { "Single" };
        write!(f, "{}: {}({} arm, {} seconds)", self.step_id, self.call, arms, self.duration)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskPackage {
    pub package_id: char,
    pub title: String,
    pub scene: Option<String>,
    pub steps: Vec<PackageStep>,
}

impl fmt::Display for TaskPackage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(scene) = &self.scene {
            writeln!(f, "{scene} scene")?;
        }
        writeln!(f, "Package {}: {}", self.package_id, self.title)?;
        for step in &self.steps {
            writeln!(f, "{step}")?;
        }
        Ok(())
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn err(&self, expected: impl Into<String>) -> StepError {
        StepError::Syntax { offset: self.pos, expected: expected.into() }
    }

    fn eat(&mut self, lit: &str) -> Result<(), StepError> {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(self.err(format!("`{lit}`")))
        }
    }

    fn try_eat(&mut self, lit: &str) -> bool {
        self.eat(lit).is_ok()
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        let len: usize = self.rest().chars().take_while(|&c| pred(c)).map(char::len_utf8).sum();
        self.pos += len;
        &self.text[start..self.pos]
    }

    fn quoted(&mut self) -> Result<String, StepError> {
        self.eat("\"")?;
        let value = self.take_while(|c| c != '"');
        if value.is_empty() {
            return Err(self.err("object name"));
        }
        self.eat("\"")?;
        Ok(value.to_string())
    }

    fn identifier(&mut self) -> Result<&'a str, StepError> {
        let id = self.take_while(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if id.is_empty() {
            Err(self.err("skill name"))
        } else {
            Ok(id)
        }
    }

    fn number(&mut self) -> Result<u64, StepError> {
        let at = self.pos;
        let digits = self.take_while(|c| c.is_ascii_digit());
        digits.parse().map_err(|_| StepError::Syntax { offset: at, expected: "integer".into() })
    }

    fn at_end(&self) -> bool {
        self.pos == self.text.len()
    }
}

fn parse_call_at(cur: &mut Cursor<'_>) -> Result<SkillCall, StepError> {
    let name = cur.identifier()?;
    cur.eat("(")?;
    let source = if cur.try_eat("source=") {
        let s = cur.quoted()?;
        cur.eat(", ")?;
        Some(s)
    } else {
        None
    };
    cur.eat("target=")?;
    let target = cur.quoted()?;
    cur.eat(")")?;

    let spec = skills::lookup(name).ok_or_else(|| StepError::UnknownSkill(name.to_string()))?;
    match (spec.params, source.is_some()) {
        (Params::SourceTarget, false) => {
            return Err(StepError::WrongParams { skill: name.into(), expected: "source and target" })
        }
        (Params::TargetOnly, true) => {
            return Err(StepError::WrongParams { skill: name.into(), expected: "target-only" })
        }
        _ => {}
    }
    Ok(SkillCall { skill: name.to_string(), source, target })
}

/// Parses a bare skill call such as `flap_open(target="refrigerator")`.
/// Completion and wait skills are accepted; callers decide whether they fit.
pub fn parse_call(text: &str) -> Result<SkillCall, StepError> {
    let mut cur = Cursor::new(text);
    let call = parse_call_at(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err("end of call"));
    }
    Ok(call)
}

pub fn parse_step(line: &str) -> Result<PackageStep, StepError> {
    let mut cur = Cursor::new(line);
    let letter = cur.take_while(|c| c.is_ascii_uppercase());
    if letter.chars().count() != 1 {
        return Err(StepError::Syntax { offset: 0, expected: "package letter".into() });
    }
    let ordinal = cur.take_while(|c| c.is_ascii_digit());
    if ordinal.is_empty() {
        return Err(cur.err("step ordinal"));
    }
    let step_id = format!("{letter}{ordinal}");
    cur.eat(": ")?;
    let call = parse_call_at(&mut cur)?;
    cur.eat("(")?;
    let arm_count = if cur.try_eat("Single") {
        1
    } else if cur.try_eat("Dual") {
        2
    } else {
        return Err(cur.err("`Single` or `Dual`"));
    };
    cur.eat(" arm, ")?;
    let duration = cur.number()?;
    cur.eat(" seconds)")?;
    if !cur.at_end() {
        return Err(cur.err("end of line"));
    }

    let spec = call.spec();
    if spec.category == SkillCategory::Completion {
        return Err(StepError::UnknownSkill(call.skill));
    }
    if spec.default_arms != arm_count {
        return Err(StepError::ArmMismatch { skill: call.skill, expected: spec.default_arms, found: arm_count });
    }
    if duration == 0 {
        return Err(StepError::ZeroDuration);
    }
    Ok(PackageStep { step_id, call, arm_count, duration })
}

fn parse_header(line: &str) -> Option<(char, String)> {
    let rest = line.strip_prefix("Package ")?;
    let (id, title) = rest.split_once(':')?;
    let mut chars = id.chars();
    let letter = chars.next()?;
    if chars.next().is_some() || !letter.is_ascii_uppercase() {
        return None;
    }
    Some((letter, title.trim().to_string()))
}

fn looks_like_step(line: &str) -> bool {
    let mut chars = line.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.next().is_some_and(|c| c.is_ascii_digit())
}

/// Parses one or more package blocks. Blank lines and `#` comment lines are
/// ignored.
pub fn parse_package_text(text: &str) -> Result<Vec<TaskPackage>, PackageError> {
    let mut packages: Vec<TaskPackage> = Vec::new();
    let mut pending_scene: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("Package ") {
            let (letter, title) = parse_header(line).ok_or(PackageError::BadHeader { line: line_no })?;
            if let Some(prev) = packages.last() {
                if prev.steps.is_empty() {
                    return Err(PackageError::EmptyPackage(prev.package_id));
                }
            }
            if packages.iter().any(|p| p.package_id == letter) {
                return Err(PackageError::DuplicatePackage(letter));
            }
            packages.push(TaskPackage { package_id: letter, title, scene: pending_scene.take(), steps: vec![] });
        } else if looks_like_step(line) {
            let step = parse_step(line).map_err(|source| PackageError::Step { line: line_no, source })?;
            let pkg = packages.last_mut().ok_or(PackageError::OrphanStep { line: line_no })?;
            let expected = format!("{}{}", pkg.package_id, pkg.steps.len() + 1);
            if step.step_id != expected {
                return Err(PackageError::StepSequence { line: line_no, expected, found: step.step_id });
            }
            pkg.steps.push(step);
        } else if let Some(scene) = line.strip_suffix(" scene") {
            pending_scene = Some(scene.trim().to_string());
        } else {
            return Err(PackageError::Unrecognised { line: line_no });
        }
    }
    if let Some(last) = packages.last() {
        if last.steps.is_empty() {
            return Err(PackageError::EmptyPackage(last.package_id));
        }
    }
    Ok(packages)
}

pub fn serialize_packages(pkgs: &[TaskPackage]) -> String {
    pkgs.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("\n")
}

/// Trimmed, non-empty, non-comment lines joined with `\n`.
pub fn normalize_text(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn sequential_duration(pkgs: &[TaskPackage]) -> Seconds {
    pkgs.iter().flat_map(|p| &p.steps).map(|s| s.duration).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl std::str::FromStr for Difficulty {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(format!("unknown difficulty `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusEntry {
    pub package: TaskPackage,
    pub difficulty: Option<Difficulty>,
    pub file: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Scene {
    pub entries: Vec<CorpusEntry>,
    /// Object-location text from `environment.txt`, if the scene ships one.
    pub environment: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Corpus {
    pub scenes: BTreeMap<String, Scene>,
}

impl Corpus {
    pub fn is_empty(&self) -> bool {
        self.scenes.values().all(|s| s.entries.is_empty())
    }

    pub fn package_count(&self) -> usize {
        self.scenes.values().map(|s| s.entries.len()).sum()
    }

    pub fn packages(&self, scene: &str) -> Vec<&TaskPackage> {
        self.scenes.get(scene).map(|s| s.entries.iter().map(|e| &e.package).collect()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusDiagnostic {
    pub path: PathBuf,
    pub message: String,
}

fn split_blocks(text: &str) -> Vec<(usize, String)> {
    // Each block starts at a header (plus a scene line directly above it).
    let lines: Vec<&str> = text.lines().collect();
    let mut starts = vec![];
    for (i, l) in lines.iter().enumerate() {
        if l.trim().starts_with("Package ") {
            let scene_above = i > 0 && lines[i - 1].trim().ends_with(" scene");
            starts.push(if scene_above { i - 1 } else { i });
        }
    }
    let mut blocks = vec![];
    for (k, &s) in starts.iter().enumerate() {
        let e = starts.get(k + 1).copied().unwrap_or(lines.len());
        blocks.push((s + 1, lines[s..e].join("\n")));
    }
    blocks
}

/// Loads `root/<scene>/*.txt`. Each file may start with a
/// `# difficulty: easy|medium|hard` line. Packages that fail to parse are
/// skipped and reported; loading continues.
pub fn load_corpus(root: &Path) -> (Corpus, Vec<CorpusDiagnostic>) {
    let mut corpus = Corpus::default();
    let mut diags = vec![];
    let report = |diags: &mut Vec<CorpusDiagnostic>, path: &Path, message: String| {
        diags.push(CorpusDiagnostic { path: path.to_path_buf(), message });
    };

    let scene_dirs = match fs::read_dir(root) {
        Ok(rd) => {
            let mut dirs: Vec<PathBuf> = rd.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
            dirs.sort();
            dirs
        }
        Err(e) => {
            report(&mut diags, root, format!("cannot read corpus root: {e}"));
            return (corpus, diags);
        }
    };

    for dir in scene_dirs {
        let scene_name = dir.file_name().unwrap_or_default().to_string_lossy().to_string();
        let mut scene = Scene::default();
        let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(rd) => rd.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_file()).collect(),
            Err(e) => {
                report(&mut diags, &dir, format!("cannot read scene directory: {e}"));
                continue;
            }
        };
        files.sort();
        for file in files {
            let text = match fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    report(&mut diags, &file, format!("unreadable: {e}"));
                    continue;
                }
            };
            if file.file_name().is_some_and(|n| n == "environment.txt") {
                scene.environment = text.trim().to_string();
                continue;
            }
            if file.extension().is_none_or(|e| e != "txt") {
                continue;
            }
            let difficulty = match text.lines().next().and_then(|l| l.trim().strip_prefix("# difficulty:")) {
                Some(d) => match d.parse::<Difficulty>() {
                    Ok(d) => Some(d),
                    Err(msg) => {
                        report(&mut diags, &file, msg);
                        None
                    }
                },
                None => None,
            };
            for (first_line, block) in split_blocks(&text) {
                match parse_package_text(&block) {
                    Ok(pkgs) => {
                        for package in pkgs {
                            if scene.entries.iter().any(|e| e.package.package_id == package.package_id) {
                                report(&mut diags, &file, format!("duplicate package {} in scene {scene_name}", package.package_id));
                                continue;
                            }
                            scene.entries.push(CorpusEntry { package, difficulty, file: file.clone() });
                        }
                    }
                    Err(e) => report(&mut diags, &file, format!("block at line {first_line}: {e}")),
                }
            }
        }
        scene.entries.sort_by_key(|e| e.package.package_id);
        corpus.scenes.insert(scene_name, scene);
    }
    (corpus, diags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_arm_pick() {
        let s = parse_step(r#"A1: pick(source="table", target="carrots")(Single arm, 5 seconds)"#).unwrap();
        assert_eq!(s.step_id, "A1");
        assert_eq!(s.skill(), "pick");
        assert_eq!(s.source(), Some("table"));
        assert_eq!(s.target(), "carrots");
        assert_eq!((s.arm_count, s.duration), (1, 5));
    }

    #[test]
    fn parses_dual_cut() {
        let s = parse_step(r#"A4: cut(source="knife", target="carrots")(Dual arm, 10 seconds)"#).unwrap();
        assert_eq!((s.skill(), s.source(), s.target(), s.arm_count, s.duration), ("cut", Some("knife"), "carrots", 2, 10));
    }

    #[test]
    fn parses_target_only() {
        let s = parse_step(r#"C5: flap_open(target="refrigerator")(Single arm, 3 seconds)"#).unwrap();
        assert_eq!(s.source(), None);
        assert_eq!(s.target(), "refrigerator");
    }

    #[test]
    fn unknown_skill_is_named() {
        let e = parse_step(r#"A1: fly(target="moon")(Single arm, 5 seconds)"#).unwrap_err();
        assert_eq!(e, StepError::UnknownSkill("fly".into()));
    }

    #[test]
    fn syntax_error_reports_offset() {
        let e = parse_step(r#"A1: pick(source="table" target="x")(Single arm, 5 seconds)"#).unwrap_err();
        assert_eq!(e, StepError::Syntax { offset: 23, expected: "`, `".into() });
    }

    #[test]
    fn rejects_param_shape_arm_count_and_zero_duration() {
        assert!(matches!(
            parse_step(r#"A1: pick(target="x")(Single arm, 5 seconds)"#),
            Err(StepError::WrongParams { .. })
        ));
        assert!(matches!(
            parse_step(r#"A1: flap_open(source="a", target="x")(Single arm, 5 seconds)"#),
            Err(StepError::WrongParams { .. })
        ));
        assert!(matches!(
            parse_step(r#"A1: pick(source="a", target="x")(Dual arm, 5 seconds)"#),
            Err(StepError::ArmMismatch { .. })
        ));
        assert_eq!(parse_step(r#"A1: pick(source="a", target="x")(Single arm, 0 seconds)"#), Err(StepError::ZeroDuration));
        assert!(parse_step(r#"A1: pick(source="a", target="x")(Single arm, 1.5 seconds)"#).is_err());
        assert!(parse_step(r#"AA1: pick(source="a", target="x")(Single arm, 1 seconds)"#).is_err());
    }

    #[test]
    fn empty_text_is_empty_list() {
        assert_eq!(parse_package_text("").unwrap(), vec![]);
        assert_eq!(parse_package_text("\n  \n").unwrap(), vec![]);
    }

    #[test]
    fn package_errors() {
        assert_eq!(parse_package_text("Package A: x\n"), Err(PackageError::EmptyPackage('A')));
        let dup = "Package A: x\nA1: pick(source=\"a\", target=\"b\")(Single arm, 1 seconds)\nPackage A: y\nA1: pick(source=\"a\", target=\"b\")(Single arm, 1 seconds)\n";
        assert_eq!(parse_package_text(dup), Err(PackageError::DuplicatePackage('A')));
        let gap = "Package A: x\nA1: pick(source=\"a\", target=\"b\")(Single arm, 1 seconds)\nA3: place(source=\"b\", target=\"c\")(Single arm, 1 seconds)\n";
        assert!(matches!(parse_package_text(gap), Err(PackageError::StepSequence { line: 3, .. })));
        assert!(matches!(parse_package_text("Package AB: x\n"), Err(PackageError::BadHeader { .. })));
        assert!(matches!(
            parse_package_text("A1: pick(source=\"a\", target=\"b\")(Single arm, 1 seconds)\n"),
            Err(PackageError::OrphanStep { line: 1 })
        ));
    }

    #[test]
    fn scene_line_attaches_to_next_package() {
        let text = "factory scene\nPackage A: Wipe\nA1: pick(source=\"s\", target=\"rag\")(Single arm, 5 seconds)\nA2: place(source=\"rag\", target=\"s\")(Single arm, 5 seconds)\n";
        let pkgs = parse_package_text(text).unwrap();
        assert_eq!(pkgs[0].scene.as_deref(), Some("factory"));
        assert_eq!(normalize_text(&serialize_packages(&pkgs)), normalize_text(text));
    }

    #[test]
    fn sequential_duration_sums() {
        assert_eq!(sequential_duration(&[]), 0);
    }
}
