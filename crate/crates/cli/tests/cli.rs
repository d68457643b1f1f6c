mod common;

use common::*;
use serde_json::Value;

const TOY: &str = "item,annotator,label\n1,a,1\n1,b,2\n2,a,1\n";

#[test]
fn mv_on_toy_gives_first_class() {
    let dir = tempfile::tempdir().unwrap();
    let r = write(dir.path(), "r.csv", TOY);
    let out = dir.path().join("out.json");
    run_ok(&["aggregate", "--responses", s(&r), "--method", "mv", "--out", s(&out)]);
    let doc = read_json(&out);
    assert_valid("result.schema.json", &doc);
    assert_eq!(doc["labels"], serde_json::json!([1, 1]));
    assert_eq!(doc["index_maps"]["items"], serde_json::json!(["1", "2"]));
    assert_eq!(doc["index_maps"]["annotators"], serde_json::json!(["a", "b"]));
    assert!(doc["n_v"].is_null());
    assert!(doc["scores"].is_null());
}

#[test]
fn zero_label_rows_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let with_zero = write(dir.path(), "z.csv", &format!("{TOY}2,b,0\n3,a,\n"));
    let plain = write(dir.path(), "p.csv", TOY);
    let a = run_ok(&["aggregate", "--responses", s(&with_zero), "--method", "vb"]);
    let b = run_ok(&["aggregate", "--responses", s(&plain), "--method", "vb"]);
    let (a, b): (Value, Value) = (
        serde_json::from_slice(&a.stdout).unwrap(),
        serde_json::from_slice(&b.stdout).unwrap(),
    );
    // the blank/zero rows still register their ids but add no responses
    assert_eq!(a["posterior"][0], b["posterior"][0]);
    assert_eq!(a["posterior"][1], b["posterior"][1]);
}

#[test]
fn every_method_validates() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--items", "60", "--annotators", "4", "--seed", "2"]);
    let r = dir.path().join("responses.csv");
    let t = dir.path().join("truth.csv");
    let c = write(dir.path(), "c.csv", "kind,a,b\nML,1,2\nCL,3,4\nLABEL,5,2\n");
    for method in ["mv", "ds", "vb", "vb-lc", "vb-ilc"] {
        let out = run_ok(&[
            "aggregate", "--responses", s(&r), "--truth", s(&t), "--constraints", s(&c),
            "--method", method,
        ]);
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_valid("result.schema.json", &doc);
        assert_eq!(doc["method"], method);
        assert!(doc["scores"]["macro_f1"].is_number());
        assert!(doc["n_v"].is_u64());
    }
}

#[test]
fn eta_grid_table_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--items", "80", "--annotators", "5", "--seed", "4"]);
    let r = dir.path().join("responses.csv");
    let t = dir.path().join("truth.csv");
    let out = run_ok(&[
        "aggregate", "--responses", s(&r), "--truth", s(&t), "--method", "vb-ilc",
        "--eta-grid", "default", "--select", "12", "--seed", "3",
    ]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid("result.schema.json", &doc);
    let table = doc["eta_search"]["table"].as_array().unwrap();
    assert!(table.len() > 1);
    assert_eq!(doc["eta"], doc["eta_search"]["best_eta"]);
    let best = doc["eta_search"]["best_eta"].as_f64().unwrap();
    let min_nv = table.iter().map(|r| r["n_v"].as_u64().unwrap()).min().unwrap();
    let first = table.iter().find(|r| r["n_v"].as_u64() == Some(min_nv)).unwrap();
    assert_eq!(first["eta"].as_f64().unwrap(), best);
    assert_eq!(doc["constraints"]["queries"].as_array().unwrap().len(), 12);
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let r = write(dir.path(), "r.csv", TOY);
    let bad = write(dir.path(), "bad.csv", "item,annotator,label\n1,a,x\n");
    let dup = write(dir.path(), "dup.csv", "item,annotator,label\n1,a,1\n1,a,2\n");
    let conflict = write(dir.path(), "c.csv", "kind,a,b\nML,1,2\nCL,1,2\n");
    let missing = dir.path().join("nope.csv");

    assert_eq!(code(&["aggregate", "--responses", s(&bad), "--method", "mv"]), 2);
    assert_eq!(code(&["aggregate", "--responses", s(&dup), "--method", "mv"]), 2);
    assert_eq!(code(&["aggregate", "--responses", s(&missing), "--method", "mv"]), 2);
    assert_eq!(
        code(&["aggregate", "--responses", s(&r), "--method", "mv", "--classes", "1"]),
        2
    );
    assert_eq!(
        code(&["aggregate", "--responses", s(&r), "--constraints", s(&conflict), "--method", "vb-ilc"]),
        3
    );
    // two must-links at η near f64::MAX overflow the coupling term
    let r3 = write(dir.path(), "r3.csv", "item,annotator,label\n1,a,1\n2,a,1\n3,a,1\n1,b,2\n");
    let ml = write(dir.path(), "ml.csv", "kind,a,b\nML,1,2\nML,1,3\n");
    assert_eq!(
        code(&["aggregate", "--responses", s(&r3), "--constraints", s(&ml), "--method", "vb-ilc", "--eta", "1e308"]),
        4
    );
    assert_eq!(code(&["aggregate", "--responses", s(&r), "--method", "vb", "--tol", "NaN"]), 2);
    let stderr = String::from_utf8(run(&["aggregate", "--responses", s(&bad), "--method", "mv"]).stderr).unwrap();
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn label_outside_configured_k_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let r = write(dir.path(), "r.csv", "item,annotator,label\n1,a,3\n2,a,1\n");
    assert_eq!(code(&["aggregate", "--responses", s(&r), "--method", "mv", "--classes", "2"]), 2);
    run_ok(&["aggregate", "--responses", s(&r), "--method", "mv", "--classes", "4"]);
}

#[test]
fn aggregate_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--items", "100", "--annotators", "5", "--seed", "8"]);
    let r = dir.path().join("responses.csv");
    let t = dir.path().join("truth.csv");
    let args = [
        "aggregate", "--responses", s(&r), "--truth", s(&t), "--method", "vb-ilc", "--select", "9", "--seed", "5",
    ];
    assert_eq!(run_ok(&args).stdout, run_ok(&args).stdout);
}

#[test]
fn synth_is_deterministic_and_valid() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let flags = ["--items", "50", "--annotators", "3", "--seed", "11"];
    synth(a.path(), &flags);
    synth(b.path(), &flags);
    for f in ["responses.csv", "truth.csv", "spec.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert_valid("crowd_spec.schema.json", &read_json(&a.path().join("spec.json")));
}

#[test]
fn identity_synth_replicates_truth() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--items", "40", "--annotators", "3", "--diag", "1", "--seed", "1"]);
    let truth: std::collections::HashMap<String, String> = std::fs::read_to_string(dir.path().join("truth.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (i, y) = l.split_once(',').unwrap();
            (i.to_owned(), y.to_owned())
        })
        .collect();
    let text = std::fs::read_to_string(dir.path().join("responses.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 120);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(truth[f[0]], f[2]);
    }
}

#[test]
fn half_response_rate_row_count() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--items", "1000", "--annotators", "4", "--mu", "0.5", "--seed", "6"]);
    let rows = std::fs::read_to_string(dir.path().join("responses.csv")).unwrap().lines().count() - 1;
    let sd3 = 3.0 * (2000.0f64 * 0.25).sqrt();
    assert!((rows as f64 - 2000.0).abs() <= sd3, "{rows}");
}

#[test]
fn synth_rejects_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["synth", "--out-dir", s(dir.path()), "--diag", "0.2"]), 2);
    assert_eq!(code(&["synth", "--out-dir", s(dir.path()), "--mu", "1.5"]), 2);
}

fn experiment_rows(extra: &[&str]) -> Vec<std::collections::HashMap<String, String>> {
    let mut args = vec!["experiment", "--items", "120", "--annotators", "5", "--repeats", "2", "--seed", "3"];
    args.extend_from_slice(extra);
    let out = run_ok(&args);
    let mut rd = csv::Reader::from_reader(out.stdout.as_slice());
    rd.deserialize().map(Result::unwrap).collect()
}

#[test]
fn zero_constraints_reduce_to_vb() {
    let rows = experiment_rows(&["--protocol", "random-constraints,label-derived", "--n-c", "0"]);
    for rep in ["0", "1"] {
        let cell: Vec<_> = rows.iter().filter(|r| r["repeat"] == rep).collect();
        let vb = cell.iter().find(|r| r["method"] == "vb").unwrap();
        for r in cell.iter().filter(|r| r["method"].starts_with("vb-")) {
            assert_eq!(r["macro_f1"], vb["macro_f1"]);
            assert_eq!(r["accuracy"], vb["accuracy"]);
        }
    }
}

#[test]
fn label_derived_has_no_violations() {
    let rows = experiment_rows(&["--protocol", "label-derived", "--n-c", "20,40"]);
    let ilc: Vec<_> = rows.iter().filter(|r| r["method"] == "vb-ilc").collect();
    assert_eq!(ilc.len(), 4);
    assert!(ilc.iter().all(|r| r["n_v"] == "0"));
}

#[test]
fn experiment_rows_are_ordered() {
    let rows = experiment_rows(&["--n-c", "0,30"]);
    let keys: Vec<(String, usize, usize)> = rows
        .iter()
        .map(|r| (r["protocol"].clone(), r["n_c"].parse().unwrap(), r["repeat"].parse().unwrap()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by_key(|(p, n, r)| {
        let order = ["random-constraints", "bvsb-constraints", "label-derived"];
        (order.iter().position(|o| o == p).unwrap(), *n, *r)
    });
    assert_eq!(keys, sorted);
}

fn bounds_setup(dir: &std::path::Path, method: &str, extra: &[&str]) -> Value {
    synth(dir, &["--items", "150", "--annotators", "8", "--classes", "3", "--diag", "0.85", "--seed", "5"]);
    let r = dir.join("responses.csv");
    let t = dir.join("truth.csv");
    let res = dir.join("result.json");
    run_ok(&[
        "aggregate", "--responses", s(&r), "--truth", s(&t), "--method", method, "--select", "9",
        "--seed", "2", "--out", s(&res),
    ]);
    let out = dir.join("bounds.json");
    let spec = dir.join("spec.json");
    let mut args = vec![
        "bounds", "--spec", s(&spec), "--result", s(&res), "--truth", s(&t),
        "--out", s(&out),
    ];
    args.extend_from_slice(extra);
    run_ok(&args);
    let doc = read_json(&out);
    assert_valid("bound_report.schema.json", &doc);
    doc
}

#[test]
fn bounds_without_eta_match_global() {
    let dir = tempfile::tempdir().unwrap();
    let doc = bounds_setup(dir.path(), "vb", &["--eta", "0", "--t-frac", "0.5", "--r-frac", "0.5"]);
    let global = &doc["eps_q_bound"];
    for t in doc["tilde_eps_q"].as_array().unwrap() {
        assert_eq!(t, global);
    }
    assert_eq!(doc["nu_terms"].as_array().unwrap().len(), 3);
}

#[test]
fn bounds_on_vb_ilc_result() {
    let dir = tempfile::tempdir().unwrap();
    let doc = bounds_setup(dir.path(), "vb-ilc", &["--form", "lemma"]);
    assert_eq!(doc["form"], "lemma_form");
    assert!(doc["empirical"]["max_label_error"].is_number());
}

#[test]
fn bounds_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    bounds_setup(dir.path(), "vb", &[]);
    let other = tempfile::tempdir().unwrap();
    synth(other.path(), &["--items", "150", "--annotators", "6", "--classes", "3", "--seed", "5"]);
    let c = code(&[
        "bounds", "--spec", s(&other.path().join("spec.json")),
        "--result", s(&dir.path().join("result.json")),
        "--truth", s(&dir.path().join("truth.csv")),
    ]);
    assert_eq!(c, 2);
}

#[test]
fn perfect_fit_has_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--items", "60", "--annotators", "3", "--classes", "2", "--diag", "1", "--seed", "7"]);
    let r = dir.path().join("responses.csv");
    let t = dir.path().join("truth.csv");
    let res = dir.path().join("result.json");
    // unanimous votes give an exact point-mass posterior; mv has no parameters to score
    run_ok(&["aggregate", "--responses", s(&r), "--method", "mv", "--out", s(&res)]);
    let out = run_ok(&[
        "bounds", "--spec", s(&dir.path().join("spec.json")), "--result", s(&res), "--truth", s(&t),
        "--eps-pi", "0", "--eps-gamma", "0",
    ]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid("bound_report.schema.json", &doc);
    let emp = &doc["empirical"];
    assert_eq!(emp["max_label_error"].as_f64().unwrap(), 0.0);
    assert_ne!(emp["label_status"], "violated");
}
