use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(p: &str) -> String {
    root().join("fixtures").join(p).display().to_string()
}

fn asmkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asmkit"))
        .args(args)
        .current_dir(root())
        .env_remove("ASMKIT_UNSET_KEY")
        .output()
        .expect("asmkit runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let o = asmkit(&full);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

fn schema_check(name: &str, v: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("schemas/{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(v) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        panic!("{name} output violates its schema: {msgs:#?}");
    };
}

#[test]
fn valid_fixture_passes_validation() {
    let o = asmkit(&["validate", &fixture("items/chair/item.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1/1 valid"));
}

#[test]
fn broken_fixture_fails_with_messages() {
    let o = asmkit(&["validate", &fixture("invalid/broken_item.json")]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("duplicate part ids"), "{out}");
    assert!(out.contains("unknown part 5"), "{out}");
}

#[test]
fn batch_summary_matches_single_runs() {
    let dirs = [fixture("items"), fixture("invalid"), fixture("eval/gt")];
    let mut args = vec!["validate"];
    args.extend(dirs.iter().map(|s| s.as_str()));
    let o = asmkit(&[&["--json"], args.as_slice()].concat());
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    schema_check("validate", &v);
    let files = v["files"].as_array().unwrap();
    let mut valid = 0;
    for f in files {
        let path = f["path"].as_str().unwrap();
        let single = asmkit(&["validate", path]);
        let ok = single.status.code() == Some(0);
        assert_eq!(ok, f["valid"].as_bool().unwrap(), "{path}");
        valid += ok as u64;
    }
    assert_eq!(v["valid"].as_u64().unwrap(), valid);
    assert_eq!(v["total"].as_u64().unwrap(), files.len() as u64);
    assert_eq!(files.len(), 2 + 1 + 17);
}

#[test]
fn missing_input_is_a_usage_error() {
    let o = asmkit(&["validate", "no/such/file.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = asmkit(&["simulate", "no/such/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = asmkit(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn perfect_predictions_score_full_marks() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture("eval/gt")).unwrap() {
        let p = entry.unwrap().path();
        let item: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        let pred = serde_json::json!({ "tree": item["gt_tree"] });
        std::fs::write(dir.path().join(p.file_name().unwrap()), pred.to_string()).unwrap();
    }
    let pred_dir = dir.path().display().to_string();
    for mode in ["exact", "simple", "hard"] {
        let v = json(&["eval-plan", &pred_dir, &fixture("eval/gt"), "--mode", mode]);
        for b in v["buckets"].as_array().unwrap() {
            if b["items"].as_u64().unwrap() > 0 {
                assert_eq!(b["success_rate"].as_f64(), Some(100.0), "{b}");
                assert_eq!(b["simple"]["f1"].as_f64(), Some(1.0));
                assert_eq!(b["hard"]["f1"].as_f64(), Some(1.0));
            }
        }
        let table = stdout(&asmkit(&[
            "eval-plan",
            &pred_dir,
            &fixture("eval/gt"),
            "--mode",
            mode,
        ]));
        let row = table.lines().nth(1).unwrap();
        let cells: Vec<&str> = row.split_whitespace().skip(1).collect();
        assert!(cells.iter().all(|c| *c == "100.0" || *c == "-"), "{row}");
    }
}

#[test]
fn eval_table_shows_one_decimal() {
    let o = asmkit(&["eval-plan", &fixture("eval/pred"), &fixture("eval/gt")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    assert_eq!(row.split_whitespace().nth(1), Some("78.6"), "{out}");
}

#[test]
fn eval_report_totals_match_recount() {
    let v = json(&["eval-plan", &fixture("eval/pred"), &fixture("eval/gt")]);
    schema_check("eval-plan", &v);
    let items = v["items"].as_object().unwrap();
    let mut per_bucket: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in items.values() {
        let Some(b) = r["bucket"].as_str() else {
            continue;
        };
        let e = per_bucket.entry(b.to_string()).or_default();
        e.0 += 1;
        e.1 += r["scores"]["exact"].as_bool().unwrap() as u64;
    }
    let mut total = (0, 0);
    for b in v["buckets"].as_array().unwrap() {
        let (n, k) = per_bucket
            .get(b["label"].as_str().unwrap())
            .copied()
            .unwrap_or_default();
        assert_eq!(b["items"].as_u64().unwrap(), n);
        assert_eq!(b["exact"].as_u64().unwrap(), k);
        total.0 += n;
        total.1 += k;
    }
    assert_eq!(v["overall"]["items"].as_u64().unwrap(), total.0);
    assert_eq!(v["overall"]["exact"].as_u64().unwrap(), total.1);
    assert_eq!(total, (17, 13));
    let errors = v["errors"].as_object().unwrap();
    assert_eq!(errors.len(), 2);
    assert!(errors["a13"].as_str().unwrap().contains("no prediction"));
}

#[test]
fn per_count_buckets() {
    let v = json(&[
        "eval-plan",
        &fixture("eval/pred"),
        &fixture("eval/gt"),
        "--per-count",
        "2-16",
    ]);
    let buckets = v["buckets"].as_array().unwrap();
    assert_eq!(buckets.len(), 15);
    let two = &buckets[0];
    assert_eq!(two["items"].as_u64(), Some(1));
}

#[test]
fn all_success_scenario_has_unit_acr() {
    let v = json(&["simulate", &fixture("sim/four_bars.json"), "--trials", "2"]);
    schema_check("simulate", &v);
    assert_eq!(v["acr"].as_f64(), Some(1.0));
    assert_eq!(v["success_rate"].as_f64(), Some(1.0));
}

#[test]
fn partial_failure_acr_by_hand() {
    let v = json(&["simulate", &fixture("sim/partial.json"), "--trials", "2"]);
    // Each trial completes the first of three steps, then fails.
    let by_hand = (1.0 / 3.0 + 1.0 / 3.0) / 2.0;
    assert!((v["acr"].as_f64().unwrap() - by_hand).abs() < 1e-15);
    assert_eq!(v["success_rate"].as_f64(), Some(0.0));
    for t in v["results"].as_array().unwrap() {
        assert_eq!(t["failure"], "pose_too_far");
        assert_eq!(t["completed"], 1);
    }
}

#[test]
fn seed_changes_initial_poses_but_not_schema() {
    let a = json(&[
        "simulate",
        &fixture("sim/four_bars_jitter.json"),
        "--seed",
        "5",
    ]);
    let b = json(&[
        "simulate",
        &fixture("sim/four_bars_jitter.json"),
        "--seed",
        "6",
    ]);
    let again = json(&[
        "simulate",
        &fixture("sim/four_bars_jitter.json"),
        "--seed",
        "5",
    ]);
    schema_check("simulate", &a);
    schema_check("simulate", &b);
    assert_ne!(a["results"][0]["initial"], b["results"][0]["initial"]);
    assert_eq!(a, again);
    let keys = |v: &Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    assert_eq!(keys(&a), keys(&b));
    assert_eq!(keys(&a["results"][0]), keys(&b["results"][0]));
}

#[test]
fn replayed_transcript_gives_known_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chair.json");
    let o = asmkit(&[
        "pipeline",
        &fixture("items/chair/item.json"),
        "--transcript",
        &fixture("transcripts/chair.jsonl"),
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(stdout(&o).lines().next(), Some("[[[[1,5],2],7],3,4]"));
    let expected = std::fs::read(fixture("transcripts/chair.expected.json")).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), expected);
    let v: Value = serde_json::from_slice(&expected).unwrap();
    schema_check("pipeline", &v);
}

#[test]
fn missing_api_key_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("endpoint.toml");
    std::fs::write(
        &cfg,
        "base_url = \"http://127.0.0.1:9/v1\"\nmodel = \"gpt-4o\"\napi_key_env = \"ASMKIT_UNSET_KEY\"\n",
    )
    .unwrap();
    let o = asmkit(&[
        "pipeline",
        &fixture("items/chair/item.json"),
        "--endpoint-config",
        &cfg.display().to_string(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ASMKIT_UNSET_KEY"));
}

#[test]
fn repeats_log_modal_selection() {
    let o = asmkit(&[
        "pipeline",
        &fixture("items/side_frames/item.json"),
        "--mock",
        &fixture("items/side_frames/mock.json"),
        "--repeats",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("selected run 0 (2 of 3 runs agree)"), "{err}");
    assert_eq!(stdout(&o).lines().next(), Some("[[0,1,2],3]"));
}

#[test]
fn tampered_request_is_rejected_unless_lenient() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("transcripts/chair.jsonl")).unwrap();
    let t = dir.path().join("chair.jsonl");
    let mut recs: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    recs[0]["key"] = Value::String("0".repeat(64));
    let body: Vec<String> = recs.iter().map(|r| r.to_string()).collect();
    std::fs::write(&t, body.join("\n")).unwrap();
    let args = |lenient: bool| {
        let mut a = vec![
            "pipeline".to_string(),
            fixture("items/chair/item.json"),
            "--transcript".into(),
            t.display().to_string(),
        ];
        if lenient {
            a.push("--lenient".into());
        }
        a
    };
    let strict = asmkit(&args(false).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert_eq!(strict.status.code(), Some(1));
    let lenient = asmkit(&args(true).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert_eq!(lenient.status.code(), Some(0));
}

#[test]
fn json_outputs_follow_schemas() {
    schema_check(
        "canonicalize",
        &json(&["canonicalize", "[3,[[2,[5,1]],7],4]", "--equiv", "2-7,3-4"]),
    );
    schema_check(
        "orders",
        &json(&["orders", &fixture("items/chair/item.json")]),
    );
    schema_check(
        "orders",
        &json(&["orders", "[[0,1],[2,3],[4,5]]", "--limit", "5"]),
    );
    schema_check(
        "sample",
        &json(&[
            "sample",
            &fixture("items/chair/item.json"),
            "-m",
            "4",
            "-n",
            "2",
        ]),
    );
    schema_check("metrics", &json(&["metrics", &fixture("poses/step.json")]));
    schema_check("loss", &json(&["loss", &fixture("poses/step.json")]));
    schema_check("grasp", &json(&["grasp", "--box", "0.3,0.2,0.01"]));
    schema_check(
        "eval-plan",
        &json(&[
            "eval-plan",
            &fixture("eval/pred"),
            &fixture("eval/gt"),
            "--mode",
            "hard",
        ]),
    );
    schema_check(
        "pipeline",
        &json(&[
            "pipeline",
            &fixture("items/side_frames/item.json"),
            "--transcript",
            &fixture("transcripts/side_frames.jsonl"),
        ]),
    );
}

#[test]
fn commands_are_deterministic() {
    let runs = [
        vec![
            "sample",
            "fixtures/items/chair/item.json",
            "-m",
            "4",
            "-n",
            "2",
            "--seed",
            "9",
        ],
        vec!["loss", "fixtures/poses/step.json"],
        vec!["simulate", "fixtures/sim/four_bars.json"],
    ];
    for r in runs {
        assert_eq!(json(&r), json(&r), "{r:?}");
    }
}

#[test]
fn orders_count_and_listing() {
    let v = json(&["orders", "[[0,1],[2,3],[4,5]]", "--limit", "4"]);
    assert_eq!(v["total"], 6);
    assert_eq!(v["listed"], 4);
    let o = asmkit(&["orders", "[[0,1],[2]]"]);
    assert_eq!(o.status.code(), Some(1));
    let o = asmkit(&["orders", "[[0,1],[1,2]]"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn loss_reports_reassignment_gain() {
    let v = json(&["loss", "fixtures/poses/step.json"]);
    let id = v["identity"]["total"].as_f64().unwrap();
    let min = v["minimum"]["loss"]["total"].as_f64().unwrap();
    assert!(min < id);
    assert_eq!(v["minimum"]["assignment"]["0"], 1);
    assert_eq!(v["minimum"]["permutations_tried"], 2);
    let o = asmkit(&["loss", "fixtures/poses/step.json", "--weights", "1,1,1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_threshold_flag() {
    let v = json(&[
        "metrics",
        "fixtures/poses/step.json",
        "--thresholds",
        "pa=0.5",
    ]);
    assert_eq!(v["part_accuracy"].as_f64(), Some(1.0));
    let v = json(&["metrics", "fixtures/poses/step.json"]);
    assert!((v["part_accuracy"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let o = asmkit(&[
        "metrics",
        "fixtures/poses/step.json",
        "--thresholds",
        "bogus=1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
