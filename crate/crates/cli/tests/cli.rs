use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn seqpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqpd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = seqpd(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

const SOCIAL_MIXTURE: &str = r#"{
  "seed": 11,
  "mixture": {"pi": [0.4, 0.3, 0.2, 0.1], "sigma": -0.1, "rho": 0.5, "beta": 0.5, "omega": 0.15},
  "estimation": {"restarts": 6}
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn all_c_group() -> String {
    let mut s = String::from("subject_id,part,round,group_id,position,position_class,m_c,choice\n");
    s.push_str("a,1,1,g1,1,pos1,,C\nb,1,1,g1,2,pos2,0,C\nb,1,1,g1,2,pos2,1,C\n");
    for (id, pos) in [("c", 3), ("d", 4), ("e", 5)] {
        for k in 0..3 {
            s.push_str(&format!("{id},1,1,g1,{pos},uncertain,{k},C\n"));
        }
    }
    s
}

#[test]
fn equilibrium_report_for_the_laboratory_game() {
    let text = ok(&["equilibrium"]);
    assert!(text.contains("T threshold 633.333: PASS"), "{text}");
    let v: Value = serde_json::from_str(&ok(&["equilibrium", "--format", "json"])).unwrap();
    assert_eq!(v["tokens"]["threshold"], "1900/3");
    assert_eq!(v["tokens"]["holds"], true);
    assert_eq!(v["normalized"]["threshold"], "1/3");
    assert_eq!(v["g"], "1/4");
}

#[test]
fn equilibrium_sweep_follows_closed_form() {
    let text = ok(&[
        "equilibrium",
        "--sweep",
        "--n",
        "5",
        "--m",
        "1,2,3",
        "--g",
        "0.25",
    ]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,m,g,threshold,holds");
    for (line, m) in lines[1..].iter().zip(1..=3) {
        let threshold: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        let closed = 1.0 - 2.0 * m as f64 / (4.0 + m as f64);
        assert!((threshold - closed).abs() < 1e-6, "{line}");
    }
    assert_eq!(lines.len(), 4);
}

#[test]
fn degenerate_sample_size_is_a_validation_error() {
    let o = seqpd(&["equilibrium", "--sweep", "--n", "5", "--m", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SOCIAL_MIXTURE);
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    ok(&["simulate", "--config", &cfg, "--out", out_s]);
    let choices = fs::read_to_string(out.join("choices.csv")).unwrap();
    assert_eq!(choices.lines().count(), 1200 + 2);
    assert!(!choices.contains("gm") && !choices.contains("free"));
    let types = fs::read_to_string(out.join("types.csv")).unwrap();
    assert_eq!(types.lines().count(), 51);

    let data = out.join("choices.csv");
    let data_s = data.to_str().unwrap();
    ok(&[
        "estimate", "--config", &cfg, "--data", data_s, "--out", out_s,
    ]);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    for key in [
        "estimates",
        "std_errors",
        "ll",
        "aic",
        "bic",
        "n_obs",
        "posteriors",
        "diagnostics",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["n_obs"], 1200);
    let ll = v["ll"].as_f64().unwrap();
    let k = v["k"].as_f64().unwrap();
    assert_eq!(v["aic"].as_f64().unwrap(), -2.0 * ll + 2.0 * k);
    assert_eq!(v["bic"].as_f64().unwrap(), -2.0 * ll + k * 1200f64.ln());
    assert!(ll > 1200.0 * 0.5f64.ln());
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SOCIAL_MIXTURE);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let out_s = out.to_str().unwrap();
        ok(&["simulate", "--config", &cfg, "--out", out_s]);
        let data = out.join("choices.csv");
        ok(&[
            "estimate",
            "--config",
            &cfg,
            "--data",
            data.to_str().unwrap(),
            "--out",
            out_s,
        ]);
        files.push((
            fs::read(out.join("choices.csv")).unwrap(),
            fs::read(out.join("results.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    let other = dir.path().join("c");
    ok(&[
        "simulate",
        "--config",
        &cfg,
        "--seed",
        "12",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_ne!(fs::read(other.join("choices.csv")).unwrap(), files[0].0);
}

#[test]
fn describe_all_cooperators() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("allc.csv");
    fs::write(&data, all_c_group()).unwrap();
    let out = dir.path().join("d");
    let text = ok(&[
        "describe",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(text.contains("All       1.000  1.000  1.000"), "{text}");
    let csv = fs::read_to_string(out.join("rates_part1.csv")).unwrap();
    assert_eq!(csv, "Position,c_0,c_1,c_2\n1,1.000,-,-\n2,1.000,1.000,-\n>2,1.000,1.000,1.000\nAll,1.000,1.000,1.000\n");
    let v: Value = serde_json::from_str(&ok(&[
        "describe",
        "--data",
        data.to_str().unwrap(),
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(v["strategy_rates"]["total"]["coop"], 12);
}

#[test]
fn realize_plays_out_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("allc.csv");
    fs::write(&data, all_c_group()).unwrap();
    let text = ok(&["realize", "--data", data.to_str().unwrap()]);
    assert_eq!(text.lines().count(), 6);
    assert!(
        text.lines().skip(1).all(|l| l.ends_with(",C,2000")),
        "{text}"
    );
}

#[test]
fn compare_methods_needs_both_parts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("allc.csv");
    fs::write(&data, all_c_group()).unwrap();
    let o = seqpd(&["compare-methods", "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(
        dir.path(),
        "both.json",
        &SOCIAL_MIXTURE.replace("\"seed\": 11", "\"seed\": 11, \"elicitation\": \"both\""),
    );
    let out = dir.path().join("both");
    ok(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let both = out.join("choices.csv");
    let v: Value = serde_json::from_str(&ok(&[
        "compare-methods",
        "--data",
        both.to_str().unwrap(),
        "--format",
        "json",
    ]))
    .unwrap();
    let hot = v["hot"]["total"].as_u64().unwrap();
    let unmatched = v["unmatched"].as_u64().unwrap();
    assert_eq!(hot + unmatched, 500);
    assert_eq!(v["mcnemar"]["variant"], "corrected");
}

#[test]
fn plot_data_is_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("allc.csv");
    fs::write(&data, all_c_group()).unwrap();
    let text = ok(&["plot-data", "--data", data.to_str().unwrap()]);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("figure,part,round,series,coop,total,rate")
    );
    let rows: Vec<&str> = lines.collect();
    assert!(rows.contains(&"individual,1,1,all,12,12,1.000000"));
    assert!(rows.contains(&"group,1,1,all,5,5,1.000000"));
    assert!(rows.contains(&"condition,1,1,uncertain/c_2,3,3,1.000000"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        seqpd(&["describe", "--data", "/nonexistent/file.csv"])
            .status
            .code(),
        Some(4)
    );

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        all_c_group().replace("a,1,1,g1,1,pos1,,C", "a,1,1,g1,1,pos1,1,C"),
    )
    .unwrap();
    let o = seqpd(&["describe", "--data", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let cfg = write_config(dir.path(), "c.json", SOCIAL_MIXTURE);
    let out = dir.path().join("sim");
    ok(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let stuck = write_config(
        dir.path(),
        "stuck.json",
        &SOCIAL_MIXTURE.replace("\"restarts\": 6", "\"restarts\": 2, \"max_iter\": 0"),
    );
    let data = out.join("choices.csv");
    let o = seqpd(&[
        "estimate",
        "--config",
        &stuck,
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let payoffs = write_config(
        dir.path(),
        "p.json",
        r#"{"payoffs": {"T": 1000, "R": 600, "P": 100, "S": 300}}"#,
    );
    assert_eq!(
        seqpd(&["equilibrium", "--config", &payoffs]).status.code(),
        Some(2)
    );
}

#[test]
fn recover_noiseless_free_riders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"seed": 5, "assignment": "quota",
            "mixture": {"pi": [0, 0, 1, 0], "sigma": -0.1, "rho": 0.5, "beta": 0.5, "omega": 0},
            "estimation": {"restarts": 6}, "recovery": {"iterations": 1}}"#,
    );
    let v: Value =
        serde_json::from_str(&ok(&["recover", "--config", &cfg, "--format", "json"])).unwrap();
    let mean = v["summary"]["mean"].as_array().unwrap();
    assert!((mean[2].as_f64().unwrap() - 1.0).abs() < 1e-3, "{mean:?}");
    let text = ok(&["recover", "--config", &cfg]);
    assert!(text.contains("pi_gm"));
    assert!(
        text.contains("True value") && text.contains("Estimated value") && text.contains("s.d.")
    );
}
