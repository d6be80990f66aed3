use std::io::Write;
use std::process::{Command, Stdio};

use cubecover::cli::run_command;
use cubecover::system::parse_system;
use serde_json::Value;

fn run(args: &[&str], stdin: &str) -> (i32, Value, String) {
    let argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let out = run_command(&argv, stdin);
    let json = serde_json::from_str(&out.stdout).unwrap_or(Value::Null);
    (out.exit_code, json, out.stderr)
}

const TWO_ZERO: &str = r#"{"n":2,"rows":[["1","0"],["0","1"]],"mu":["0","0"]}"#;

#[test]
fn binary_pipes_construct_into_verify() {
    let exe = env!("CARGO_BIN_EXE_cubecover");
    let built = Command::new(exe).args(["construct-lr", "--n", "4"]).output().unwrap();
    assert!(built.status.success());
    let mut child = Command::new(exe)
        .args(["verify", "--seed", "0"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&built.stdout).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["is_essential"], Value::Bool(true));
}

#[test]
fn verify_exit_codes() {
    let (code, v, _) = run(&["verify", "--seed", "0"], TWO_ZERO);
    assert_eq!(code, 1);
    assert_eq!(v["uncovered_witness"], serde_json::json!([1, 1]));
    let (code, _, err) = run(&["verify", "--seed", "0"], "{not json");
    assert_eq!(code, 3);
    assert!(err.contains("error"));
    let (code, _, _) = run(&["verify", "--seed", "0", "--cap", "2"], r#"{"n":3,"rows":[["1","0","0"]],"mu":["0"]}"#);
    assert_eq!(code, 2);
}

#[test]
fn input_file_is_read() {
    let dir = std::env::temp_dir().join(format!("cubecover-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sys.json");
    std::fs::write(&path, TWO_ZERO).unwrap();
    let (code, _, _) = run(&["verify", "--seed", "0", "--input", path.to_str().unwrap()], "");
    assert_eq!(code, 1);
    let (code, _, _) = run(&["verify", "--input", dir.join("missing.json").to_str().unwrap()], "");
    assert_eq!(code, 3);
}

#[test]
fn bounds_prints_each_inequality() {
    let (code, v, _) = run(&["bounds", "--n", "1000", "--k", "10", "--s", "5", "--w", "2", "--seed", "0"], "");
    assert_eq!(code, 0);
    for b in v["bounds"].as_array().unwrap() {
        assert!(b["lhs"].is_number() && b["rhs"].is_number() && b["holds"].is_boolean());
    }
    let out = run_command(
        &["bounds", "--n", "1000", "--k", "10", "--s", "5", "--w", "2", "--format", "csv", "--seed", "0"]
            .map(String::from),
        "",
    );
    assert_eq!(out.exit_code, 0);
    assert!(out.stdout.starts_with("inequality,lhs,rhs,holds"));
    assert_eq!(out.stdout.lines().count(), 6);
}

#[test]
fn construct_output_round_trips() {
    let (code, _, _) = run(&["construct-lr", "--n", "3"], "");
    assert_eq!(code, 2);
    let out = run_command(&["construct-lr".into(), "--n".into(), "6".into()], "");
    let s = parse_system(&out.stdout).unwrap();
    assert_eq!((s.n(), s.k()), (6, 4));
}

#[test]
fn decompose_reports_validity() {
    let lr = run_command(&["construct-lr".into(), "--n".into(), "8".into()], "").stdout;
    for stage in ["first", "second"] {
        let (code, v, _) = run(&["decompose", "--s", "2", "--w", "1/2", "--stage", stage, "--seed", "0"], &lr);
        assert_eq!(code, 0, "{stage}");
        assert_eq!(v["valid"], Value::Bool(true));
    }
    let (code, _, _) = run(&["decompose", "--s", "1", "--w", "1", "--gamma", "2", "--seed", "0"], &lr);
    assert_eq!(code, 2);
}

#[test]
fn numeric_subcommands() {
    let (code, v, _) = run(&["bang", "--seed", "4"], r#"{"m":[[1,0.5],[0.5,1]],"zeta":[0,0],"theta":[1,1]}"#);
    assert_eq!(code, 0);
    assert_eq!(v["signs"][0], v["signs"][1]);

    let (code, v, _) = run(&["atom-prob", "--seed", "0"], r#"{"v":["1","1","1","1"],"a":"2"}"#);
    assert_eq!(code, 0);
    assert_eq!(v["probability"], "3/8");
    let (_, v, _) = run(&["atom-prob", "--seed", "0"], r#"{"v":["1","2","4"]}"#);
    assert_eq!(v["probability"], "1/8");
    let (_, v, _) = run(&["atom-prob", "--seed", "0", "--trials", "2000"], r#"{"v":["1","1"],"a":"1"}"#);
    assert_eq!(v["exact"], Value::Bool(false));

    let (code, v, _) = run(&["scales", "--seed", "0"], r#"{"v":["10000","100","1"]}"#);
    assert_eq!((code, v["s"].as_u64()), (0, Some(3)));
    let out = run_command(&["scales", "--format", "csv", "--seed", "0"].map(String::from), r#"{"v":["100","1"]}"#);
    assert!(out.stdout.starts_with("scale,columns,squared_norm"));

    let (code, v, _) = run(&["window", "--seed", "0"], r#"{"v":["1","1"]}"#);
    assert_eq!(code, 0);
    assert_eq!(v["probability"]["value"], "1/2");
    let (code, _, _) = run(&["window", "--seed", "0"], r#"{"v":["1"],"c0":"4"}"#);
    assert_eq!(code, 2);
}

#[test]
fn find_uncovered_and_refute() {
    let blocks = serde_json::json!({
        "n": 64,
        "rows": (0..4).map(|i| (0..64).map(|j| if j / 16 == i { "1" } else { "0" }).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "mu": ["8", "8", "8", "8"],
    })
    .to_string();
    let (code, v, _) = run(&["find-uncovered", "--seed", "1"], &blocks);
    assert_eq!(code, 0);
    assert_eq!(v["verified"], Value::Bool(true));
    let (code, _, err) = run(&["find-uncovered", "--seed", "1"], r#"{"n":1,"rows":[["1"],["1"]],"mu":["0","1"]}"#);
    assert_eq!(code, 2);
    assert!(err.contains("precondition 2αβlog(4ℓ)>1"));

    let (code, v, _) = run(&["refute", "--seed", "2"], &blocks);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "uncovered");
    let lr = run_command(&["construct-lr".into(), "--n".into(), "12".into()], "").stdout;
    let (code, v, _) = run(&["refute", "--seed", "2", "--c5", "4", "--c", "0.5"], &lr);
    assert_eq!(code, 1);
    assert_eq!(v["status"], "failed");
}

#[test]
fn seeds_make_runs_replayable() {
    let input = r#"{"m":[[2,1,0],[1,2,1],[0,1,2]],"zeta":[0.3,0.1,0.2],"theta":[1,1,1]}"#;
    let a = run(&["bang", "--seed", "9"], input);
    let b = run(&["bang", "--seed", "9"], input);
    assert_eq!(a.1, b.1);
    let (_, _, err) = run(&["bang"], input);
    assert!(err.starts_with("seed: "));
}

#[test]
fn usage_errors() {
    let (code, _, err) = run(&["nope"], "");
    assert_eq!(code, 3);
    assert!(err.contains("Usage"));
    let out = run_command(&["--help".into()], "");
    assert_eq!(out.exit_code, 0);
    assert!(out.stdout.contains("refute"));
    let (code, _, _) = run(&["verify", "--format", "xml"], TWO_ZERO);
    assert_eq!(code, 3);
    let (code, _, _) = run(&["verify", "--threads", "2", "--seed", "0"], TWO_ZERO);
    assert_eq!(code, 1);
}
