use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_parasched")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn schema(name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(root().join("schemas").join(name)).unwrap()).unwrap()
}

/// Checks the draft-07 keywords the shipped schemas use: type, required,
/// properties, items, enum, minimum, maximum, min/maxItems, min/maxLength
/// and local `$ref`s.
fn conforms(value: &Value, s: &Value, top: &Value, path: &str) -> Result<(), String> {
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let target = top.pointer(r.trim_start_matches('#')).ok_or(format!("{path}: bad ref {r}"))?;
        return conforms(value, target, top, path);
    }
    if let Some(t) = s.get("type") {
        let types: Vec<&str> = match t {
            Value::String(one) => vec![one.as_str()],
            Value::Array(many) => many.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let ok = types.iter().any(|t| match *t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "integer" => value.is_u64() || value.is_i64(),
            "number" => value.is_number(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        });
        if !ok {
            return Err(format!("{path}: expected {types:?}, got {value}"));
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            return Err(format!("{path}: {value} not in {options:?}"));
        }
    }
    if let (Some(min), Some(v)) = (s.get("minimum").and_then(Value::as_f64), value.as_f64()) {
        if v < min {
            return Err(format!("{path}: {v} < {min}"));
        }
    }
    if let (Some(max), Some(v)) = (s.get("maximum").and_then(Value::as_f64), value.as_f64()) {
        if v > max {
            return Err(format!("{path}: {v} > {max}"));
        }
    }
    if let Some(text) = value.as_str() {
        let len = text.chars().count() as u64;
        if s.get("minLength").and_then(Value::as_u64).is_some_and(|m| len < m)
            || s.get("maxLength").and_then(Value::as_u64).is_some_and(|m| len > m)
        {
            return Err(format!("{path}: bad length"));
        }
    }
    if let Some(obj) = value.as_object() {
        for key in s.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                return Err(format!("{path}: missing `{key}`"));
            }
        }
        if let Some(props) = s.get("properties").and_then(Value::as_object) {
            for (k, sub) in props {
                if let Some(v) = obj.get(k) {
                    conforms(v, sub, top, &format!("{path}.{k}"))?;
                }
            }
        }
    }
    if let Some(items) = value.as_array() {
        let n = items.len() as u64;
        if s.get("minItems").and_then(Value::as_u64).is_some_and(|m| n < m)
            || s.get("maxItems").and_then(Value::as_u64).is_some_and(|m| n > m)
        {
            return Err(format!("{path}: bad item count {n}"));
        }
        if let Some(sub) = s.get("items") {
            for (i, v) in items.iter().enumerate() {
                conforms(v, sub, top, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

fn assert_schema(json_text: &str, name: &str) -> Value {
    let value: Value = serde_json::from_str(json_text).unwrap();
    let s = schema(name);
    conforms(&value, &s, &s, "$").unwrap();
    value
}

#[test]
fn schema_checker_rejects_missing_keys() {
    let s = schema("plan.schema.json");
    let bad: Value = serde_json::json!({"makespan": 3, "left": [], "right": []});
    assert!(conforms(&bad, &s, &s, "$").unwrap_err().contains("rollbacks"));
    let bad: Value = serde_json::json!({"makespan": 3, "rollbacks": 0, "left": [{"start": 0}], "right": []});
    assert!(conforms(&bad, &s, &s, "$").is_err());
}

#[test]
fn validate_kitchen_is_ok() {
    let (code, out, _) = run(&["validate", &fixture("kitchen_dag.txt")]);
    assert_eq!(code, 0);
    assert_eq!(out, "OK\n");
}

#[test]
fn validate_mutated_reports_one_p1() {
    let (code, out, _) = run(&["validate", &fixture("p1_mutated_dag.txt")]);
    assert_eq!(code, 1);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("node_4: P1 "));
    let (code, out, _) = run(&["validate", &fixture("p1_mutated_dag.txt"), "--format", "json"]);
    assert_eq!(code, 1);
    let v = assert_schema(&out, "validate.schema.json");
    assert_eq!(v["ok"], false);
    assert_eq!(v["diagnostics"][0]["code"], "P1");
}

#[test]
fn validate_garbage_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.txt");
    fs::write(&path, "node_1:\ntype: ???\n").unwrap();
    let (code, _, err) = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error:"));
    let (code, _, _) = run(&["validate", "/does/not/exist"]);
    assert_eq!(code, 3);
}

#[test]
fn schedule_kitchen_text_and_json() {
    let (code, out, _) = run(&["schedule", &fixture("kitchen_dag.txt")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("Total execution time: 82 seconds\n"));
    assert_eq!(out, fs::read_to_string(fixture("kitchen_schedule.txt")).unwrap());
    let (code, out, _) = run(&["schedule", &fixture("kitchen_dag.txt"), "--format", "json"]);
    assert_eq!(code, 0);
    let v = assert_schema(&out, "plan.schema.json");
    assert_eq!(v["makespan"], 82);
}

#[test]
fn schedule_other_formats() {
    let (code, out, _) = run(&["schedule", &fixture("kitchen_dag.txt"), "--format", "svg"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("<svg") && out.trim_end().ends_with("</svg>"));
    let (code, out, _) = run(&["schedule", &fixture("kitchen_dag.txt"), "--format", "ascii"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("L |"));
    let (code, _, _) = run(&["schedule", &fixture("kitchen_dag.txt"), "--format", "csv"]);
    assert_eq!(code, 3);
}

#[test]
fn schedule_deadlock_reports_rollback() {
    let (code, out, _) = run(&["schedule", &fixture("deadlock_dag.txt")]);
    assert_eq!(code, 0);
    assert!(out.ends_with("Rollbacks: 1\n"));
    let (_, out, _) = run(&["schedule", &fixture("deadlock_dag.txt"), "--format", "json"]);
    assert_eq!(assert_schema(&out, "plan.schema.json")["rollbacks"], 1);
}

#[test]
fn schedule_refuses_invalid_graph() {
    let (code, _, err) = run(&["schedule", &fixture("p1_mutated_dag.txt")]);
    assert_eq!(code, 1);
    assert!(err.contains("P1"));
}

#[test]
fn plan_kitchen_offline() {
    let corpus = fixture("corpus");
    let (code, out, _) =
        run(&["plan", "make me carrot slices, apple salad and cream bread", "--corpus", &corpus, "--format", "json"]);
    assert_eq!(code, 0);
    let v = assert_schema(&out, "pipeline.schema.json");
    assert!(v["plan"]["makespan"].as_u64().unwrap() <= 82);
    assert!(v["metrics"]["ppr"].as_f64().unwrap() >= 0.10);
    assert_eq!(v["packages"], serde_json::json!(["A", "B", "C"]));
    conforms(&v["plan"], &schema("plan.schema.json"), &schema("plan.schema.json"), "$.plan").unwrap();
}

#[test]
fn plan_greenhouse_offline() {
    let corpus = fixture("corpus");
    let (code, out, _) = run(&["plan", "pack cucumbers and prepare seed tray for sprouting", "--corpus", &corpus]);
    assert_eq!(code, 0);
    assert!(out.contains("Total execution time: 50 seconds"));
    assert!(out.contains("Parallel intervals: 6"));
}

#[test]
fn plan_without_matches() {
    let (code, _, err) = run(&["plan", "fold laundry", "--corpus", &fixture("corpus")]);
    assert_eq!(code, 1);
    assert!(err.contains("no package found"));
}

#[test]
fn plan_llm_needs_configuration() {
    let out = Command::new(env!("CARGO_BIN_EXE_parasched"))
        .args(["plan", "make me carrot slices", "--corpus", &fixture("corpus"), "--llm"])
        .env_remove("PARASCHED_LLM_URL")
        .env_remove("PARASCHED_LLM_MODEL")
        .env_remove("PARASCHED_LLM_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PARASCHED_LLM_"));
}

#[test]
fn bench_kitchen_easy_groups() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("kitchen")).unwrap();
    fs::copy(fixture("corpus/kitchen/easy.txt"), dir.path().join("kitchen/easy.txt")).unwrap();
    let (code, out, _) = run(&["bench", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "scene,difficulty,group,makespan,TEI,TFR,PPR,APR");
    assert_eq!(lines.len(), 4);
    for (k, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[..3], ["kitchen", "easy", &(k + 1).to_string()]);
    }
}

#[test]
fn bench_oracle_ratios() {
    let (code, out, _) = run(&["bench", "--corpus", &fixture("corpus"), "--oracle", "--seed", "100", "--format", "json"]);
    assert_eq!(code, 0);
    let v = assert_schema(&out, "bench.schema.json");
    let oracle = v["oracle"].as_array().unwrap();
    assert_eq!(oracle.len(), 50);
    assert!(oracle.iter().all(|r| r["ratio"].as_f64().unwrap() >= 1.0));
    assert!(oracle.iter().all(|r| r["nodes"].as_u64().unwrap() <= 8));
}

#[test]
fn bench_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["bench", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out, "scene,difficulty,group,makespan,TEI,TFR,PPR,APR\n");
}

#[test]
fn deterministic_output() {
    let args = ["bench", "--corpus", &fixture("corpus"), "--oracle", "--seed", "7", "--samples", "10"];
    assert_eq!(run(&args).1, run(&args).1);
}

#[test]
fn explain_choice_branches() {
    let (code, out, _) = run(&[
        "explain-choice", "--kind", "other", "--source", "knife", "--target", "carrots", "--dual", "--left-chain", "knife",
        "--right-chain", "cup",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "None (both arms locked)\n");
    let (_, out, _) = run(&["explain-choice", "--kind", "pick", "--target", "cup", "--left-free", "9", "--right-free", "4"]);
    assert_eq!(out, "Right (both arms unlocked: earliest free arm)\n");
}
