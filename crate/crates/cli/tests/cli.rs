//! End-to-end checks of the binary: output shapes, exit codes, determinism.

use std::process::{Command, Output};

fn tree2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tree2"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).to_string()
}

#[test]
fn field_examples() {
    let o = tree2(&["field", "valuation", "u^-3*t^2+t^5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "(2,-3)");

    let o = tree2(&["--q", "2", "--u-window", "4", "field", "invert", "1+u"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1+u+u^2+u^3+O(u^4)");

    let o = tree2(&["--q", "2", "field", "eval", "t*(1+u)^2"]);
    assert_eq!(stdout(&o).trim(), "t+t*u^2");
}

#[test]
fn decompose_identity_and_examples() {
    let o = tree2(&[
        "decompose",
        "--kind",
        "bruhat",
        "--verify",
        r#"[["1","0"],["0","1"]]"#,
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("verify: OK"));

    let o = tree2(&[
        "decompose",
        "--kind",
        "bruhat",
        "--verify",
        r#"[["1","0"],["t^-1","1"]]"#,
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("verify: OK"));

    let o = tree2(&[
        "decompose",
        "--kind",
        "cartan",
        "--verify",
        r#"[["1","t^-1"],["0","1"]]"#,
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("verify: OK"));
    assert!(text.contains("middle class: OK"));
    // the Cartan datum has valuations (1,0) and (-1,0)
    assert!(text.contains("t^-1"));
}

#[test]
fn tree_examples() {
    let o = tree2(&["tree", "distance", "x:0,0", "x:5,0"]);
    assert_eq!(stdout(&o).trim(), "(0,5)");

    let o = tree2(&["tree", "path", "x:0,0", "x:0,1"]);
    assert_eq!(stdout(&o).trim(), "Ray->y_0 | y_0--z_1 | Ray->x_{0,1}");

    let o = tree2(&["--q", "2", "tree", "neighbors", "x:0,0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim().lines().count(), 3);

    let o = tree2(&["--q", "3", "tree", "neighbors", "x:0,0"]);
    assert_eq!(stdout(&o).trim().lines().count(), 4);

    let o = tree2(&["tree", "ball", "--radius", "1", "--fibers", "2"]);
    let dot = stdout(&o);
    assert!(dot.starts_with("graph tree2 {"));
    assert!(dot.contains("shape=diamond"));
    assert!(dot.contains("--"));
}

#[test]
fn weyl_examples() {
    let o = tree2(&["weyl", "reduce", "w0,w1,w2,w0,w1,w2"]);
    assert_eq!(stdout(&o).trim(), "a^0 b^0 w0^0");
    let o = tree2(&["weyl", "reduce", "w0,w1,w0,w1"]);
    assert_eq!(stdout(&o).trim(), "a^2 b^0 w0^0");
}

#[test]
fn exit_codes() {
    // parse error -> 2
    let o = tree2(&["field", "eval", "v+1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tree2(&["decompose", "--kind", "bruhat", "not json"]);
    assert_eq!(o.status.code(), Some(2));
    // singular input -> 4
    let o = tree2(&["decompose", "--kind", "bruhat", r#"[["1","1"],["1","1"]]"#]);
    assert_eq!(o.status.code(), Some(4));
    // stratum error -> 5
    let o = tree2(&["tree", "distance", "y:0", "x:0,0"]);
    assert_eq!(o.status.code(), Some(5));
    let o = tree2(&["tree", "neighbors", "y:0"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn verify_runs_and_is_deterministic() {
    let args = [
        "--seed",
        "7",
        "verify",
        "--suite",
        "weyl",
        "--trials",
        "25",
    ];
    let a = tree2(&args);
    let b = tree2(&args);
    assert!(a.status.success(), "weyl suite failed");
    assert_eq!(stdout(&a), stdout(&b), "same seed must give identical bytes");
}
