use std::path::PathBuf;

use calmtier::cli;
use serde_json::Value;

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(rel)
        .display()
        .to_string()
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("calmtier").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn assert_one_error_line(err: &str) {
    assert!(err.starts_with("error:"), "{err:?}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err:?}");
}

#[test]
fn classify_exit_codes_follow_tier() {
    let (code, out, _) = call(&["classify", &data("tasks/budget.json")]);
    assert_eq!(code, 20);
    assert!(out.contains("tier: NM"));
    assert!(out.contains("SharedResourceNegation: resource 'budget' capacity 100 < worst-case demand 150"));

    assert_eq!(call(&["classify", &data("tasks/stage_gate.json")]).0, 10);
    assert_eq!(call(&["classify", &data("tasks/strategy_pillars.json")]).0, 0);
    let both = call(&["classify", &data("tasks/strategy_pillars.json"), &data("tasks/headcount.json")]);
    assert_eq!(both.0, 20);
}

#[test]
fn classify_json() {
    let (code, out, _) = call(&["classify", &data("tasks/strategy_pillars.json"), "--format", "json"]);
    assert_eq!(code, 0);
    assert!(out.contains(r#""tier":"M""#), "{out}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], 1);
}

#[test]
fn errors_are_single_lines_with_code_2() {
    let (code, out, err) = call(&["classify", "missing.json"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert_one_error_line(&err);

    for args in [
        &["frobnicate"][..],
        &["classify"],
        &["tax", "--f", "1.5", "--c", "3"],
        &["tax", "--f", "0.2", "--c", "1"],
        &["tax", "--f", "0.2", "--c-range", "4"],
        &["simulate", "--task", "missing.json"],
        &["simulate", "--task", "x.json", "--mode", "sideways"],
        &["--format", "yaml", "tax"],
    ] {
        let (code, _, err) = call(args);
        assert_eq!(code, 2, "{args:?}");
        assert_one_error_line(&err);
    }
}

#[test]
fn tax_from_fraction_and_range() {
    let (code, out, _) = call(&["tax", "--f", "0.26", "--c-range", "2.3:4.4"]);
    assert_eq!(code, 0);
    assert!(out.contains("42%") && out.contains("57%"), "{out}");

    let (_, out, _) = call(&["tax", "--f", "0.58", "--c", "2.3", "--format", "json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["tax"]["t_percent"], "24");

    let (_, out, _) = call(&["tax", "--f", "0.26", "--c-range", "2.3:4.4", "--format", "csv"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("f,c,t,t_percent"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn tax_from_portfolio() {
    let (code, out, _) = call(&[
        "tax",
        "--portfolio",
        &data("apqc_portfolio.csv"),
        "--c",
        "4.4",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["tax"]["f"], "17/65");
    assert_eq!(v["tax"]["n"], 65);
}

#[test]
fn simulate_all_modes() {
    let (code, out, err) = call(&[
        "simulate",
        "--task",
        &data("tasks/budget.json"),
        "--mode",
        "all",
        "--exhaustive",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["runs"].as_array().unwrap().len(), 18);
    let modes = v["summary"]["modes"].as_array().unwrap();
    let rate = |m: &str| {
        modes.iter().find(|s| s["mode"] == m).unwrap()["validity_rate"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(rate("uncoordinated"), 0.0);
    assert_eq!(rate("orchestrated"), 1.0);
    assert!(v["summary"]["c_ratio"].as_f64().unwrap() > 1.0);
}

#[test]
fn simulate_seeded_with_partition() {
    let dir = std::env::temp_dir().join(format!("calmtier-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let plan = dir.join("plan.json");
    std::fs::write(
        &plan,
        r#"{"partitions":[{"from_tick":0,"until_tick":5,"blocked":["operations"]}]}"#,
    )
    .unwrap();
    let out_file = dir.join("runs.json");
    let args = [
        "simulate",
        "--task",
        &data("tasks/strategy_pillars.json"),
        "--mode",
        "uncoordinated",
        "--runs",
        "3",
        "--seed",
        "11",
        "--partition",
        plan.to_str().unwrap(),
        "--out",
        out_file.to_str().unwrap(),
    ];
    let (code, out, err) = call(&args);
    assert_eq!(code, 0, "{err}");
    assert!(out.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert_eq!(runs[0]["seed"], 11);
    assert!(runs.iter().all(|r| r["verdict"] == "VALID"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reproduce_tax_only() {
    let (code, out, _) = call(&["reproduce", "--tax-only"]);
    assert_eq!(code, 0);
    assert!(out.contains("42%") && out.contains("57%"), "{out}");
    assert!(!out.contains("strategy_pillars"));
}

#[test]
fn reproduce_report() {
    let (code, out, err) = call(&["reproduce", "--format", "json"]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], 1);

    let tiers: Vec<&str> = v["classification"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["tier"].as_str().unwrap())
        .collect();
    for (tier, n) in [("M", 4), ("M-O", 2), ("NM", 4)] {
        assert_eq!(tiers.iter().filter(|t| **t == tier).count(), n);
    }

    let sim = v["simulation"].as_array().unwrap();
    assert_eq!(sim.len(), 10);
    for row in sim.iter().filter(|r| r["tier"] == "NM") {
        let modes = row["modes"].as_array().unwrap();
        let rate = |m: &str| modes.iter().find(|s| s["mode"] == m).unwrap()["validity_rate"].as_f64();
        assert_eq!(rate("uncoordinated"), Some(0.0));
        assert_eq!(rate("orchestrated"), Some(1.0));
    }
}
