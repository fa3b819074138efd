use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn crosscut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crosscut"))
        .args(args)
        .env_remove("CROSSCUT_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("readable")).expect("json")
}

#[test]
fn clean_round_trip_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let puz = dir.path().join("a.ccpuzzle");
    let sol = dir.path().join("a.ccsol");
    let rep = dir.path().join("eval.json");
    assert_eq!(
        code(&crosscut(&["generate", "--cuts", "8", "--seed", "5", "-o", p(&puz)])),
        0
    );
    assert_eq!(
        code(&crosscut(&["solve", "-i", p(&puz), "--mode", "clean", "-o", p(&sol)])),
        0
    );
    let out = crosscut(&["evaluate", "-s", p(&sol), "-p", p(&puz), "-o", p(&rep)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&rep);
    assert_eq!(r["precision"], 1.0);
    assert_eq!(r["recall"], 1.0);
    assert!(r["q_positions"].as_f64().unwrap() > 0.999);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ccpuzzle");
    let b = dir.path().join("b.ccpuzzle");
    let c = dir.path().join("c.ccpuzzle");
    crosscut(&[
        "generate",
        "--shape",
        "polygon",
        "--cuts",
        "6",
        "--xi",
        "0.01",
        "--seed",
        "9",
        "-o",
        p(&a),
    ]);
    crosscut(&[
        "generate",
        "--shape",
        "polygon",
        "--cuts",
        "6",
        "--xi",
        "0.01",
        "--seed",
        "9",
        "-o",
        p(&b),
    ]);
    let env = Command::new(env!("CARGO_BIN_EXE_crosscut"))
        .args([
            "generate",
            "--shape",
            "polygon",
            "--cuts",
            "6",
            "--xi",
            "0.01",
            "-o",
            p(&c),
        ])
        .env("CROSSCUT_SEED", "9")
        .status()
        .unwrap();
    assert!(env.success());
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes, fs::read(&c).unwrap());

    let s1 = dir.path().join("1.ccsol");
    let s2 = dir.path().join("2.ccsol");
    for s in [&s1, &s2] {
        assert_eq!(
            code(&crosscut(&[
                "solve",
                "-i",
                p(&a),
                "--mode",
                "noisy",
                "--eval",
                "-o",
                p(s)
            ])),
            0
        );
    }
    assert_eq!(fs::read(&s1).unwrap(), fs::read(&s2).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let puz = dir.path().join("x.ccpuzzle");
    assert_eq!(
        code(&crosscut(&["generate", "--cuts", "4", "--xi", "1.5", "-o", p(&puz)])),
        2
    );
    assert_eq!(
        code(&crosscut(&["--jobs", "0", "generate", "--cuts", "4", "-o", p(&puz)])),
        2
    );
    assert_eq!(
        code(&crosscut(&["generate", "--cuts", "4", "--bogus", "-o", p(&puz)])),
        2
    );

    let missing = dir.path().join("missing.ccpuzzle");
    let out = crosscut(&["solve", "-i", p(&missing), "-o", p(&dir.path().join("m.ccsol"))]);
    assert_eq!(code(&out), 3);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert_eq!(msg.matches("No such file").count(), 1, "{msg}");

    let broken = dir.path().join("broken.ccpuzzle");
    fs::write(&broken, "{\"format_version\":").unwrap();
    assert_eq!(
        code(&crosscut(&[
            "solve",
            "-i",
            p(&broken),
            "-o",
            p(&dir.path().join("b.ccsol"))
        ])),
        3
    );

    let stripped = dir.path().join("s.ccpuzzle");
    crosscut(&["generate", "--cuts", "4", "--strip-truth", "-o", p(&stripped)]);
    let out = crosscut(&[
        "solve",
        "-i",
        p(&stripped),
        "--mode",
        "known-matings",
        "-o",
        p(&dir.path().join("s.ccsol")),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn stripped_bundle_has_no_truth() {
    let dir = tempfile::tempdir().unwrap();
    let puz = dir.path().join("s.ccpuzzle");
    assert_eq!(
        code(&crosscut(&["generate", "--cuts", "5", "--strip-truth", "-o", p(&puz)])),
        0
    );
    let v = json(&puz);
    assert!(v.get("ground_truth").is_none());
    assert!(v.get("cuts").is_none());
    let sol = dir.path().join("s.ccsol");
    assert_eq!(
        code(&crosscut(&["solve", "-i", p(&puz), "--mode", "clean", "-o", p(&sol)])),
        0
    );
    assert_eq!(code(&crosscut(&["evaluate", "-s", p(&sol), "-p", p(&puz)])), 3);
}

#[test]
fn batch_generate_solve_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set");
    let out = crosscut(&[
        "--jobs",
        "1",
        "generate",
        "--cuts",
        "6",
        "--count",
        "3",
        "--seed",
        "2",
        "-o",
        p(&set),
    ]);
    assert_eq!(code(&out), 0);
    let mut names: Vec<String> = fs::read_dir(&set)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["puzzle_0000.ccpuzzle", "puzzle_0001.ccpuzzle", "puzzle_0002.ccpuzzle"]
    );

    assert_eq!(
        code(&crosscut(&["solve", "-i", p(&set), "--mode", "clean", "-o", p(&set)])),
        0
    );
    let rep = dir.path().join("all.json");
    let out = crosscut(&["evaluate", "--dir", p(&set), "-o", p(&rep)]);
    assert_eq!(code(&out), 0);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.lines().any(|l| l.starts_with("mean")), "{table}");
    let v = json(&rep);
    assert_eq!(v.as_object().unwrap().len(), 3);
    assert_eq!(v["puzzle_0001"]["precision"], 1.0);
}

#[test]
fn trace_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let puz = dir.path().join("k.ccpuzzle");
    let sol = dir.path().join("k.ccsol");
    let trace = dir.path().join("k.jsonl");
    crosscut(&["generate", "--cuts", "5", "--xi", "0.005", "--seed", "3", "-o", p(&puz)]);
    let out = crosscut(&[
        "solve",
        "-i",
        p(&puz),
        "--mode",
        "known-matings",
        "--trace",
        p(&trace),
        "--trace-every",
        "50",
        "-o",
        p(&sol),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.lines().count() > 1);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v.is_object());
    }
    assert_eq!(json(&sol)["mode"], "known-matings");
}

#[test]
fn stats_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = crosscut(&[
        "stats",
        "--cuts",
        "5,10",
        "--count",
        "4",
        "--xi",
        "0,0.01",
        "-o",
        p(&csv),
    ]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("family,a,xi,"));
    assert_eq!(text.lines().count(), 5);

    let puz = dir.path().join("r.ccpuzzle");
    let sol = dir.path().join("r.ccsol");
    let svg = dir.path().join("r.svg");
    crosscut(&["generate", "--cuts", "5", "-o", p(&puz)]);
    crosscut(&["solve", "-i", p(&puz), "--mode", "clean", "-o", p(&sol)]);
    for extra in [&["--view", "bag"][..], &["-s", p(&sol), "--overlay-truth"][..]] {
        let mut args = vec!["render", "-i", p(&puz), "-o", p(&svg)];
        args.extend_from_slice(extra);
        assert_eq!(code(&crosscut(&args)), 0);
        let s = fs::read_to_string(&svg).unwrap();
        assert!(s.contains("<svg") && s.trim_end().ends_with("</svg>"));
    }
}
