use std::path::Path;
use std::process::Command;

const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus");

fn safeplc(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_safeplc")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn corpus(rel: &str) -> String {
    Path::new(CORPUS).join(rel).to_string_lossy().into_owned()
}

#[test]
fn build_then_simulate_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(corpus("scenarios")).unwrap() {
        let sc = entry.unwrap().path();
        let stem = sc.file_stem().unwrap().to_string_lossy().into_owned();
        let model = stem.split('_').next().unwrap();
        let bundle = dir.path().join(format!("{model}.csp"));
        let (code, out, err) = safeplc(&["build", &corpus(&format!("{model}.b0")), "--out", bundle.to_str().unwrap()]);
        assert_eq!(code, 0, "{out}{err}");

        let trace = dir.path().join(format!("{stem}.jsonl"));
        let (code, out, _) = safeplc(&["sim", bundle.to_str().unwrap(), sc.to_str().unwrap(), "--out", trace.to_str().unwrap()]);
        let lines = std::fs::read_to_string(&trace).unwrap();
        let last: serde_json::Value = serde_json::from_str(lines.lines().last().unwrap()).unwrap();
        let panicked = last["status"]["state"] == "PANIC";
        assert_eq!(code, if panicked { 3 } else { 0 }, "{stem}: {out}");
        // Press and freeze scenarios are fault-free or benign.
        assert_eq!(panicked, !(stem.ends_with("press") || stem.ends_with("frozen")), "{stem}");
    }
}

#[test]
fn seeded_defect_exits_two_and_names_the_obligation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csp");
    let (code, text, _) = safeplc(&["build", &corpus("seeded/bug_div.b0"), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(text.contains("WD_DIV"), "{text}");
    assert!(!out.exists());
}

#[test]
fn relay_to_stdout_and_po_text() {
    let (code, b0, _) = safeplc(&["relay", &corpus("relay/motor.rly"), "--stdout"]);
    assert_eq!(code, 0);
    assert!(b0.starts_with("-- Generated from relay net"));
    let (code, table, _) = safeplc(&["po", &corpus("blinker.b0"), "--format", "text"]);
    assert_eq!(code, 0);
    assert!(table.contains("PROVED_INTERVAL"));
    assert_eq!(safeplc(&["sim"]).0, 1);
}
