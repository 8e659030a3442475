//! End-to-end runs of the command-line front end through `loglab::cli::run`.

use std::fs;
use std::path::PathBuf;

use loglab::cli::run;
use loglab::cli::verify::{run_suite, Suite, VerifySettings};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("loglab-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &std::path::Path) -> String {
    p.display().to_string()
}

#[test]
fn phase_output_is_byte_identical_across_runs() {
    let dir = scratch("phase");
    let (one, two) = (dir.join("one.csv"), dir.join("two.csv"));
    for out in [&one, &two] {
        let code = run(["loglab", "phase", "--which", "schrodinger", "--gamma=-1:1:0.25", "--mbeta=-1:3:0.25", "--out", &s(out)]);
        assert_eq!(code, 0);
    }
    let (a, b) = (fs::read(&one).unwrap(), fs::read(&two).unwrap());
    assert_eq!(a.len(), b.len());
    // the output paths differ, so compare everything after the config line
    let body = |v: &[u8]| String::from_utf8(v.to_vec()).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&a), body(&b));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# config: {"));
    assert!(text.contains("\"grid\":{\"n\":2048"));
    assert!(text.lines().nth(1).unwrap().starts_with("gamma,mbeta,label"));
}

#[test]
fn same_config_gives_same_bytes() {
    let dir = scratch("same");
    let path = dir.join("tb.csv");
    let mut seen = Vec::new();
    for _ in 0..2 {
        let code = run(["loglab", "diverge", "--family", "two-bubble", "--eps", "0.3", "--a", "2", "--b", "1.5", "--out", &s(&path)]);
        assert_eq!(code, 0);
        seen.push(fs::read(&path).unwrap());
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn verify_corpus_depends_only_on_the_seed() {
    let settings = |seed| VerifySettings { samples: 4, seed, ..VerifySettings::default() };
    let a = run_suite(Suite::Inequalities, &settings(3)).unwrap();
    let b = run_suite(Suite::Inequalities, &settings(3)).unwrap();
    let c = run_suite(Suite::Inequalities, &settings(4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.iter().all(|c| c.pass));
}

#[test]
fn documented_eval_examples() {
    let dir = scratch("eval");
    let check = |args: &[&str], expect: f64, tol: f64| {
        let json = dir.join("eval.json");
        let mut full = vec!["loglab", "eval"];
        full.extend_from_slice(args);
        let j = s(&json);
        full.extend(["--json", &j]);
        assert_eq!(run(full), 0, "{args:?}");
        let v: serde_json::Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
        let value = v["value"].as_f64().unwrap();
        assert!((value - expect).abs() <= tol, "{args:?}: {value} vs {expect}");
        assert_eq!(v["config"]["command"], "eval");
    };
    check(&["--functional", "interaction", "--density", "rho-star", "--M", "1"], 0.5, 1e-5);
    check(&["--functional", "entropy", "--density", "gaussian", "--M", "1"], -(1.0 + (2.0 * std::f64::consts::PI).ln()), 1e-4);
    check(&["--functional", "g", "--a", "0.5", "--density", "k-minimizer:a=0.5,lambda=1"], (0.5 / (std::f64::consts::E * std::f64::consts::PI)).ln(), 1e-4);
    check(&["--identity", "j-minimum:eta=2"], (1.0 / std::f64::consts::PI).ln(), 1e-15);
}

#[test]
fn exit_codes() {
    // invalid parameters
    assert_eq!(run(["loglab", "eval", "--functional", "j", "--density", "gaussian"]), 2);
    assert_eq!(run(["loglab", "phase", "--a", "0:1", "--out", "/dev/null"]), 2);
    assert_eq!(run(["loglab", "diverge"]), 2);
    assert_eq!(run(["loglab", "flow", "--a", "2", "--c", "-1"]), 2);
    // a witness applied where it cannot win
    assert_eq!(run(["loglab", "diverge", "--family", "translate", "--a", "1", "--b", "-1"]), 1);
    // degraded grid: the equality tolerance breaks
    assert_eq!(run(["loglab", "verify", "--suite", "equalities", "--grid.N", "256"]), 1);
    assert_eq!(run(["loglab", "verify", "--suite", "equalities"]), 0);
    // flow that runs out of steps
    assert_eq!(run(["loglab", "flow", "--a", "2", "--steps", "10", "--grid.N", "101", "--grid.rmax", "20"]), 1);
}

#[test]
fn flow_and_minimize_write_their_artifacts() {
    let dir = scratch("artifacts");
    let (hist, prof, plot) = (dir.join("flow.csv"), dir.join("rho.csv"), dir.join("plot.py"));
    let code = run([
        "loglab", "flow", "--a", "3", "--grid.N", "201", "--grid.rmax", "30", "--out", &s(&hist), "--profile", &s(&prof),
        "--plot", &s(&plot),
    ]);
    assert_eq!(code, 0);
    let h = fs::read_to_string(&hist).unwrap();
    assert!(h.lines().nth(1).unwrap() == "time,F,dissipation,mass");
    assert!(fs::read_to_string(&prof).unwrap().contains("\"command\":\"flow\""));
    assert!(fs::read_to_string(&plot).unwrap().contains("import matplotlib"));

    let (out, u) = (dir.join("gs.json"), dir.join("u.csv"));
    let code = run([
        "loglab", "minimize", "--alpha", "1", "--beta", "0", "--gamma", "0", "--n", "256", "--rmax", "15", "--out", &s(&out),
        "--profile", &s(&u),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["report"]["converged"], true);
    assert_eq!(v["config"]["grid"]["n"], 256);
    assert!(fs::read_to_string(&u).unwrap().lines().nth(1).unwrap() == "r,u");
}
