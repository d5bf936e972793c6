use std::path::PathBuf;
use std::process::{Command, Output};

use kern_core::trace::{canonicalize, read_log, read_trace, Action, Trace};
use kern_core::{Pid, Tag};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn kern(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kern")).args(args).output().unwrap()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn star() -> Trace {
    let (p, l) = (Pid, Tag);
    Trace(
        [
            (p(1), vec![Action::Spawn { child: p(2) }, Action::Spawn { child: p(3) }, Action::Send { tag: l(1), to: p(2) }, Action::Exit]),
            (p(2), vec![Action::Deliver { tag: l(1) }, Action::Rec { tag: l(1) }, Action::Deliver { tag: l(2) }, Action::Deliver { tag: l(3) }]),
            (p(3), vec![Action::Send { tag: l(2), to: p(2) }, Action::Send { tag: l(3), to: p(2) }, Action::Exit]),
        ]
        .into(),
    )
}

#[test]
fn run_writes_trace_star_and_reports_blocked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("star.json");
    let o = kern(&[
        "run",
        path(&corpus("fig1_star.kern")),
        "--sched",
        "scripted",
        "--script",
        path(&corpus("fig1b.sched")),
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("blocked: p2"));
    let t = read_trace(&std::fs::read_to_string(&out).unwrap()).unwrap().trace;
    assert_eq!(canonicalize(&t).unwrap(), canonicalize(&star()).unwrap());

    let o = kern(&["analyze", path(&out), "--text"]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("blocked: p2"), "{text}");
    assert!(text.contains("orphan: l2 l3"), "{text}");
    assert!(text.contains("race set of p2#1 rec(l1): p3:[l2, l3]"), "{text}");

    let o = kern(&["analyze", path(&out), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["symptoms"]["orphan"], serde_json::json!(["l2", "l3"]));
    assert_eq!(v["race_sets"][0]["receive"], serde_json::json!({"pid": "p2", "index": 1, "tag": "l1"}));
    assert_eq!(v["race_sets"][0]["races"], serde_json::json!({"p3": ["l2", "l3"]}));
}

#[test]
fn trivial_program() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = kern(&["run", path(&corpus("trivial.kern")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let t = read_trace(&std::fs::read_to_string(&out).unwrap()).unwrap().trace;
    assert_eq!(t, Trace([(Pid(1), vec![Action::Exit])].into()));
    let o = kern(&["analyze", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "no symptoms\n");
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(kern(&["run", "missing.kern"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.kern");
    std::fs::write(&bad, "main() -> receive end.").unwrap();
    let o = kern(&["run", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at 1:19"), "{}", stderr(&o));
    let corrupt = dir.path().join("c.json");
    std::fs::write(&corrupt, "{\"version\": 1, \"events\": [{\"pid\": 3}]}").unwrap();
    assert_eq!(kern(&["analyze", path(&corrupt)]).status.code(), Some(2));
}

#[test]
fn budget_exit_4() {
    let o = kern(&["run", path(&corpus("ping_pong.kern")), "--budget", "3"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn variant_replay_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("fig1.json");
    let o = kern(&[
        "run",
        path(&corpus("fig1.kern")),
        "--sched",
        "scripted",
        "--script",
        path(&corpus("fig1b.sched")),
        "--out",
        path(&trace),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let log = dir.path().join("log.json");
    std::fs::write(&log, kern(&["log", path(&trace)]).stdout).unwrap();
    let o = kern(&["replay", path(&corpus("fig1.kern")), "--log", path(&log)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    for (tag, code) in [("l2", 5), ("l3", 0)] {
        let o = kern(&["variant", path(&trace), "--receive", "p2#1", "--tag", tag]);
        assert_eq!(o.status.code(), Some(0));
        let v = dir.path().join(format!("{tag}.json"));
        std::fs::write(&v, &o.stdout).unwrap();
        assert_eq!(read_log(&stdout(&o)).unwrap().seq(Pid(2)), &[kern_core::trace::LogAction::Rec { tag: tag.parse().unwrap() }]);
        let o = kern(&["replay", path(&corpus("fig1.kern")), "--log", path(&v)]);
        assert_eq!(o.status.code(), Some(code), "{tag}: {}", stderr(&o));
        if code == 5 {
            assert!(stderr(&o).contains("StuckAtReceive(p2, l2)"));
        } else {
            assert!(stdout(&o).contains("rec(l3)"));
        }
    }
}

#[test]
fn explore_exit_codes() {
    let o = kern(&["explore", path(&corpus("fig1_star.kern")), "--find", "orphan"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("witness"));
    let o = kern(&["explore", path(&corpus("trivial.kern")), "--find", "deadlock"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("no witness"));
    let o = kern(&["explore", path(&corpus("fig1.kern")), "--find", "orphan", "--delayed"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kern(&["explore", path(&corpus("deadlock.kern")), "--find", "deadlock", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["witness"], 0);
}

#[test]
fn same_seed_same_trace() {
    let a = kern(&["run", path(&corpus("workers.kern")), "--seed", "11"]);
    let b = kern(&["run", path(&corpus("workers.kern")), "--seed", "11"]);
    let c = kern(&["run", path(&corpus("workers.kern"))]);
    let d = kern(&["run", path(&corpus("workers.kern")), "--seed", "0"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(c.stdout, d.stdout);
}
