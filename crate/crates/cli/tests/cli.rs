use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_acs");

fn acs(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ACS_CONFIG")
        .env_remove("ACS_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_corpus(path: &Path, prompts: &[(&str, &str)]) {
    let body: String = prompts
        .iter()
        .map(|(id, p)| format!("{{\"id\":\"{id}\",\"prompt\":[{p}]}}\n"))
        .collect();
    std::fs::write(path, body).unwrap();
}

fn trace_tokens(path: &Path) -> Vec<(String, u64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (
                v["prompt_id"].as_str().unwrap().to_string(),
                v["chosen"].as_u64().unwrap(),
            )
        })
        .collect()
}

fn without_timing(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("elapsed_seconds");
            v
        })
        .collect()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn generate_prints_continuation() {
    let o = acs(&[
        "generate",
        "--prompt",
        "1,2,3",
        "--max-new-tokens",
        "12",
        "--method",
        "adaptive_contrastive",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tokens"].as_array().unwrap().len(), 12);
    assert_eq!(v["method"], "adaptive_contrastive");
}

#[test]
fn seed_flag_controls_sampling() {
    let run = |seed: &str| {
        let o = acs(&[
            "generate",
            "--prompt",
            "4 5",
            "--method",
            "top_k",
            "--max-new-tokens",
            "40",
            "--seed",
            seed,
        ]);
        serde_json::from_slice::<Value>(&o.stdout).unwrap()["tokens"].clone()
    };
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn run_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(
        &d.join("c.jsonl"),
        &[("a", "1,2,3"), ("b", "9,8"), ("c", "100")],
    );
    let o = acs(&[
        "run",
        "--corpus",
        &p(d, "c.jsonl"),
        "--trace",
        &p(d, "t.jsonl"),
        "--report",
        &p(d, "r.jsonl"),
        "--manifest-out",
        &p(d, "m.json"),
        "--max-new-tokens",
        "16",
        "--workers",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(trace_tokens(&d.join("t.jsonl")).len(), 48);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    assert_eq!(manifest["backend_descriptor"]["vocab_size"], 512);
    assert_eq!(manifest["decoder"]["method"], "adaptive_contrastive");
    let first = without_timing(&d.join("t.jsonl"));

    let o = acs(&["run", "--manifest", &p(d, "m.json")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(without_timing(&d.join("t.jsonl")), first);

    let o = acs(&[
        "eval",
        "--trace",
        &p(d, "t.jsonl"),
        "--corpus",
        &p(d, "c.jsonl"),
        "--report",
        &p(d, "r2.jsonl"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read_to_string(d.join("r.jsonl")).unwrap(),
        std::fs::read_to_string(d.join("r2.jsonl")).unwrap()
    );

    let o = acs(&["compare", &p(d, "r.jsonl"), &p(d, "r2.jsonl"), "--json"]);
    assert_eq!(code(&o), 0);
    let cmp: Value = serde_json::from_slice(&o.stdout).unwrap();
    for row in cmp["rows"].as_array().unwrap() {
        assert!(row["delta"].is_null() || row["delta"].as_f64() == Some(0.0));
    }

    let o = acs(&["trace-dump", &p(d, "t.jsonl")]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 49);
    assert!(table.lines().next().unwrap().contains("alpha_t"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("acs.toml"),
        "[decoder]\nmethod = \"greedy\"\nmax_new_tokens = 5\n[backend]\nkind = \"synthetic\"\nvocab_size = 64\nhidden_dim = 8\nseed = 3\nrepetition_bias = 0.0\n",
    )
    .unwrap();
    let cfg = p(d, "acs.toml");
    let o = acs(&["--config", &cfg, "generate", "--prompt", "1"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tokens"].as_array().unwrap().len(), 5);
    assert_eq!(v["method"], "greedy");
    let o = acs(&[
        "--config",
        &cfg,
        "generate",
        "--prompt",
        "1",
        "--max-new-tokens",
        "7",
    ]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tokens"].as_array().unwrap().len(), 7);
    assert!(v["tokens"]
        .as_array()
        .unwrap()
        .iter()
        .all(|t| t.as_u64().unwrap() < 64));

    let o = Command::new(BIN)
        .args(["generate", "--prompt", "1"])
        .env("ACS_CONFIG", &cfg)
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tokens"].as_array().unwrap().len(), 5);
}

#[test]
fn output_dir_env_sets_default_paths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(&d.join("c.jsonl"), &[("a", "1,2")]);
    let o = Command::new(BIN)
        .args([
            "run",
            "--corpus",
            &p(d, "c.jsonl"),
            "--method",
            "greedy",
            "--max-new-tokens",
            "6",
        ])
        .env_remove("ACS_CONFIG")
        .env("ACS_OUTPUT_DIR", d)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(trace_tokens(&d.join("greedy.trace.jsonl")).len(), 6);
    assert!(d.join("greedy.report.jsonl").exists());
    assert!(d.join("greedy.report.jsonl.manifest.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&acs(&[
            "generate",
            "--prompt",
            "1",
            "--method",
            "contrastive",
            "--alpha",
            "1.5"
        ])),
        2
    );
    assert_eq!(code(&acs(&["generate", "--prompt", "x"])), 2);
    assert_eq!(code(&acs(&["run", "--corpus", &p(d, "missing.jsonl")])), 2);
    std::fs::write(d.join("bad.toml"), "[decoder]\nk = \"ten\"\n").unwrap();
    assert_eq!(
        code(&acs(&[
            "--config",
            &p(d, "bad.toml"),
            "generate",
            "--prompt",
            "1"
        ])),
        2
    );
    assert_eq!(code(&acs(&["generate"])), 2);

    write_corpus(&d.join("c.jsonl"), &[("ok", "1,2"), ("bad", "1,9999")]);
    let o = acs(&[
        "run",
        "--corpus",
        &p(d, "c.jsonl"),
        "--trace",
        &p(d, "t.jsonl"),
        "--report",
        &p(d, "r.jsonl"),
        "--method",
        "greedy",
        "--max-new-tokens",
        "4",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(trace_tokens(&d.join("t.jsonl")).len(), 4);
    let report = std::fs::read_to_string(d.join("r.jsonl")).unwrap();
    assert!(report.contains("\"failure\""));

    write_corpus(&d.join("other.jsonl"), &[("zzz", "3")]);
    let o = acs(&[
        "run",
        "--corpus",
        &p(d, "other.jsonl"),
        "--trace",
        &p(d, "t2.jsonl"),
        "--report",
        &p(d, "r2.jsonl"),
        "--max-new-tokens",
        "6",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        code(&acs(&["compare", &p(d, "r.jsonl"), &p(d, "r2.jsonl")])),
        2
    );
}

#[test]
fn process_backend_matches_in_process_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(&d.join("c.jsonl"), &[("a", "1,2,3"), ("b", "40,41")]);
    let common = [
        "--max-new-tokens",
        "24",
        "--method",
        "adaptive_contrastive",
        "--workers",
        "1",
    ];
    let corpus = p(d, "c.jsonl");
    let mut local = vec!["run", "--corpus", &corpus];
    let (lt, lr) = (p(d, "local.t"), p(d, "local.r"));
    local.extend([
        "--trace",
        &lt,
        "--report",
        &lr,
        "--vocab-size",
        "64",
        "--hidden-dim",
        "16",
    ]);
    local.extend(common);
    assert_eq!(code(&acs(&local)), 0);
    let expected = trace_tokens(&d.join("local.t"));

    for wire in ["json", "binary"] {
        let (t, r) = (p(d, &format!("{wire}.t")), p(d, &format!("{wire}.r")));
        let mut args = vec!["run", "--corpus", &corpus];
        args.extend([
            "--trace",
            &t,
            "--report",
            &r,
            "--process",
            BIN,
            "--wire",
            wire,
        ]);
        args.extend([
            "--process-arg",
            "serve",
            "--process-arg",
            "--wire",
            "--process-arg",
            wire,
        ]);
        args.extend(["--process-arg", "--vocab-size", "--process-arg", "64"]);
        args.extend(["--process-arg", "--hidden-dim", "--process-arg", "16"]);
        args.extend(common);
        let o = acs(&args);
        assert_eq!(
            code(&o),
            0,
            "{wire}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let got = trace_tokens(&d.join(format!("{wire}.t")));
        assert_eq!(got.len(), expected.len());
        if wire == "json" {
            assert_eq!(got, expected);
        }
    }
}
