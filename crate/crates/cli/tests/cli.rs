use std::process::Command;

use pvbqc_cli::commands::{ProtocolRow, SweepRow, VerifyRow};
use pvbqc_cli::main_with;
use serde_json::Value;

fn run(args: &[&str]) -> (String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["pvbqc"];
    full.extend_from_slice(args);
    main_with(full, &mut out, &mut err).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    (String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn records(out: &str, kind: &str) -> Vec<Value> {
    out.lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["record"] == kind)
        .collect()
}

fn summary(out: &str) -> Value {
    records(out, "summary").pop().expect("summary record")
}

fn exit_code(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pvbqc"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn honest_verify_accepts_without_failures() {
    let (out, _) = run(&["verify", "--n", "6", "--seed", "1"]);
    let rows = records(&out, "trial");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["accepted"], true);
    assert_eq!(rows[0]["k1"], 0);
    assert_eq!(rows[0]["k2"], 0);
    assert!(rows[0]["fidelity_bound"].is_number());
}

#[test]
fn product_zero_is_rejected() {
    let (out, _) = run(&["verify", "--strategy", "product_zero", "--trials", "100", "--seed", "2"]);
    let s = summary(&out);
    assert!(1.0 - s["acceptance_rate"].as_f64().unwrap() >= 0.99);
}

#[test]
fn threshold_override_of_two_k_accepts_everything() {
    let (out, _) = run(&[
        "verify",
        "--strategy",
        "product_zero",
        "--trials",
        "20",
        "--seed",
        "3",
        "--c-override",
        "130",
    ]);
    assert_eq!(summary(&out)["acceptance_rate"], 1.0);
    assert!(records(&out, "trial").iter().all(|r| r["fidelity_bound"].is_null()));
}

#[test]
fn honest_protocol_always_accepts() {
    let (out, _) = run(&["protocol", "--seed", "4", "--trials", "10", "--dispute", "never"]);
    let s = summary(&out);
    assert_eq!(s["acceptance_rate"], 1.0);
    assert_eq!(s["blame_none"], 10);
    for r in records(&out, "trial") {
        assert_eq!(r["copies_prepared"], 325);
        assert_eq!(r["local_measurements_client"], 780);
        assert_eq!(r["local_measurements_computation"], 6);
        assert!(r["transcript"]["steps"].is_array());
    }
}

#[test]
fn noisy_protocol_acceptance_is_intermediate() {
    let (out, _) = run(&[
        "protocol",
        "--strategy",
        "iid_z",
        "--q",
        "0.01",
        "--trials",
        "500",
        "--seed",
        "5",
        "--dispute",
        "never",
        "--format",
        "csv",
    ]);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<ProtocolRow> = rdr.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 500);
    let rate = rows.iter().filter(|r| r.client_accepted).count() as f64 / 500.0;
    assert!(rate > 0.0 && rate < 1.0, "{rate}");
}

#[test]
fn q_sweep_is_monotone() {
    let (out, _) = run(&[
        "sweep",
        "--axis",
        "q",
        "--values",
        "0,0.005,0.01,0.02,0.05",
        "--strategy",
        "iid_z",
        "--q",
        "0",
        "--trials",
        "400",
        "--seed",
        "6",
    ]);
    let rows: Vec<SweepRow> = records(&out, "trial")
        .into_iter()
        .map(|v| serde_json::from_value(v).unwrap())
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].acceptance_rate, 1.0);
    for w in rows.windows(2) {
        let sigma = (0.25f64 / 400.0).sqrt();
        assert!(w[1].acceptance_rate <= w[0].acceptance_rate + 3.0 * sigma);
    }
    assert!(rows[4].acceptance_rate < 0.5);
}

#[test]
fn n_sweep_honest_is_complete() {
    let (out, _) = run(&[
        "sweep", "--axis", "n", "--values", "6,8,10", "--graph", "cycle", "--trials", "4", "--seed", "7",
    ]);
    let rows = records(&out, "trial");
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(r["acceptance_rate"], 1.0);
    }
}

#[test]
fn c_sweep_is_a_step_at_the_failure_count() {
    let (out, _) = run(&[
        "verify",
        "--strategy",
        "iid_z",
        "--q",
        "0.05",
        "--seed",
        "8",
        "--c-override",
        "130",
    ]);
    let failures = {
        let r = &records(&out, "trial")[0];
        r["k1"].as_u64().unwrap() + r["k2"].as_u64().unwrap()
    };
    let f = failures as f64;
    let values = format!("{},{},{},{}", f - 1.0, f - 0.5, f, f + 1.0);
    let (out, _) = run(&[
        "sweep", "--axis", "c", "--values", &values, "--strategy", "iid_z", "--q", "0.05", "--seed", "8",
    ]);
    let rates: Vec<f64> = records(&out, "trial")
        .iter()
        .map(|r| r["acceptance_rate"].as_f64().unwrap())
        .collect();
    assert_eq!(rates, vec![0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn csv_and_json_carry_the_same_values() {
    let base = ["verify", "--strategy", "iid_x", "--q", "0.02", "--trials", "25", "--seed", "9"];
    let (json, _) = run(&base);
    let mut csv_args = base.to_vec();
    csv_args.extend(["--format", "csv"]);
    let (csv_out, err) = run(&csv_args);
    let from_json: Vec<VerifyRow> = records(&json, "trial")
        .into_iter()
        .map(|v| serde_json::from_value(v).unwrap())
        .collect();
    let from_csv: Vec<VerifyRow> = csv::Reader::from_reader(csv_out.as_bytes())
        .deserialize()
        .map(Result::unwrap)
        .collect();
    assert_eq!(from_json, from_csv);
    assert_eq!(summary(&json), serde_json::from_str::<Value>(err.trim()).unwrap());
}

#[test]
fn worker_count_does_not_change_output() {
    let base = ["protocol", "--strategy", "iid_depolarizing", "--q", "0.02", "--trials", "12", "--seed", "10"];
    let mut one = base.to_vec();
    one.extend(["--workers", "1"]);
    let mut four = base.to_vec();
    four.extend(["--workers", "4"]);
    assert_eq!(run(&one).0, run(&four).0);
}

#[test]
fn single_rows_can_be_rerun() {
    let (all, _) = run(&["verify", "--strategy", "iid_z", "--q", "0.02", "--trials", "8", "--seed", "11"]);
    let (one, _) = run(&[
        "verify",
        "--strategy",
        "iid_z",
        "--q",
        "0.02",
        "--trials",
        "1",
        "--first-trial",
        "5",
        "--seed",
        "11",
    ]);
    assert_eq!(records(&all, "trial")[5], records(&one, "trial")[0]);
}

#[test]
fn config_files_mirror_flags() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("exp.json");
    std::fs::write(
        &json,
        r#"{"graph": "grid:2x3", "strategy": "iid_z", "q": 0.02, "trials": 6, "seed": 12}"#,
    )
    .unwrap();
    let toml = dir.path().join("exp.toml");
    std::fs::write(&toml, "graph = \"grid:2x3\"\nstrategy = \"iid_z\"\nq = 0.02\ntrials = 6\nseed = 12\n").unwrap();
    let (a, _) = run(&["verify", "--config", json.to_str().unwrap()]);
    let (b, _) = run(&["verify", "--config", toml.to_str().unwrap()]);
    let (c, _) = run(&[
        "verify", "--graph", "grid:2x3", "--strategy", "iid_z", "--q", "0.02", "--trials", "6", "--seed", "12",
    ]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let (d, _) = run(&["verify", "--config", json.to_str().unwrap(), "--trials", "2"]);
    assert_eq!(records(&d, "trial").len(), 2);
}

#[test]
fn config_file_accepts_structured_strategies_and_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    std::fs::write(
        &path,
        r#"{
            "graph": {"n": 6, "edges": [[1, 2], [2, 3], [3, 4], [4, 5], [5, 6]]},
            "strategy": {"kind": "mixed_batch", "fraction_bad": 1.0, "bad": {"kind": "product_zero"}},
            "trials": 3,
            "seed": 13
        }"#,
    )
    .unwrap();
    let (out, _) = run(&["protocol", "--config", path.to_str().unwrap()]);
    let s = summary(&out);
    assert_eq!(s["acceptance_rate"], 0.0);
    assert_eq!(s["blame_bob"], 3);
}

#[test]
fn replay_reproduces_protocol_output() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = run(&[
        "protocol",
        "--strategy",
        "iid_x",
        "--q",
        "0.01",
        "--noise-p",
        "0.005",
        "--dispute",
        "always",
        "--trials",
        "3",
        "--seed",
        "14",
    ]);
    let path = dir.path().join("run.jsonl");
    std::fs::write(&path, &out).unwrap();
    let (replayed, _) = run(&["replay", "--transcript", path.to_str().unwrap()]);
    let rows: Vec<Value> = replayed.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["identical"] == true));

    let mut tampered: Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    tampered["transcript"]["client_verdict"]["k1"] = Value::from(99);
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, tampered.to_string()).unwrap();
    assert_eq!(exit_code(&["replay", "--transcript", bad.to_str().unwrap()]), 4);
}

#[test]
fn bounds_outputs() {
    let (out, _) = run(&["bounds", "plan", "--n", "6"]);
    let plan: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(plan["k"], 65);
    assert!((plan["c_client"].as_f64().unwrap() - 5.416_666_666_666_667).abs() < 1e-12);
    assert_eq!(plan["c_arbiter"], 8.125);

    let (out, _) = run(&["bounds", "certificate", "--role", "arbiter", "--n", "10", "--lambda", "1"]);
    let f: Vec<f64> = out
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["fidelity_bound"].as_f64().unwrap())
        .collect();
    assert!((f[0] - 0.585).abs() < 1e-3);
    assert!((f[1] - 0.6).abs() < 1e-12);

    let (out, _) = run(&["bounds", "cost", "--n", "6", "--n-max", "20", "--format", "csv"]);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<std::collections::HashMap<String, String>> = rdr.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 15);
    assert_eq!(rows[0]["our_copies"], "325");
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&["verify", "--seed", "1", "--graph", "path:5"]), 3);
    assert_eq!(exit_code(&["verify"]), 2);
    assert_eq!(exit_code(&["verify", "--seed", "1", "--strategy", "nonsense"]), 2);
    assert_eq!(exit_code(&["verify", "--seed", "1", "--trials", "0"]), 2);
    assert_eq!(exit_code(&["verify", "--seed", "1", "--traps-k", "100", "--p-th", "0.1"]), 3);
    assert_eq!(exit_code(&["bounds", "plan", "--n", "4"]), 3);
    assert_eq!(exit_code(&["verify", "--seed", "1", "--bogus"]), 2);
    assert_eq!(exit_code(&["verify", "--seed", "1", "--trials", "2"]), 0);
}
