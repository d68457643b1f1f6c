#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_crowdfuse"));
    cmd.env_remove("CROWDFUSE_THREADS").env("RUST_LOG", "error");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn crowdfuse")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "crowdfuse {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&v).expect("schema compiles")
}

pub fn assert_valid(schema_file: &str, doc: &Value) {
    let compiled = schema(schema_file);
    let msgs: Vec<String> = match compiled.validate(doc) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{schema_file}: {msgs:#?}");
}

/// Writes a synthetic crowd into `dir` through the binary.
pub fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out-dir", s(dir)];
    args.extend_from_slice(extra);
    run_ok(&args);
}
