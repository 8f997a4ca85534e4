use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn logicheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logicheck"))
        .args(args)
        .env_remove("LOGICHECK_LEXICON")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn parse_and_linearize() {
    let o = logicheck(&["parse", "select AVG(age) from dogs where age > 3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "SELECT avg(age) FROM dogs WHERE age > 3\n");

    let o = logicheck(&["linearize", "--control", "SELECT avg(age) FROM dogs"]);
    assert_eq!(stdout(&o), "[SQL] ( the average of ( age ) ) that belongs to ( dogs )\n");

    let o = logicheck(&["--dialect", "logic", "parse", "eq { count { all_rows } ; 5 } = true"]);
    assert_eq!(stdout(&o), "eq { count { all_rows } ; 5 }\n");
}

#[test]
fn input_errors_exit_1() {
    assert_eq!(logicheck(&["parse", "SELECT FROM"]).status.code(), Some(1));
    assert_eq!(logicheck(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(logicheck(&["--lexicon", "/does/not/exist", "linearize", "SELECT a FROM t"]).status.code(), Some(1));
    assert_eq!(logicheck(&["--help"]).status.code(), Some(0));
}

#[test]
fn lexicon_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon = dir.path().join("tiny.lexicon");
    fs::write(&lexicon, "Operator\tAVG\tavg\tthe mean value of\tmean\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_logicheck"))
        .args(["linearize", "SELECT avg(age) FROM dogs"])
        .env("LOGICHECK_LEXICON", &lexicon)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "( the mean value of ( age ) ) that belongs to ( dogs )\n");
}

#[test]
fn perturb_lists_records() {
    let o = logicheck(&["perturb", "--max", "2", "SELECT avg(age) FROM dogs"]);
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["kind"], "AggregatorSwap");
    assert_eq!(lines[0]["result"], "SELECT max(age) FROM dogs");
}

#[test]
fn blec_score_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.jsonl");
    fs::write(
        &pairs,
        "{\"id\": \"good\", \"query\": \"SELECT avg(age) FROM dogs\", \"question\": \"What is the average age of dogs?\"}\n\
         {\"id\": \"bad\", \"query\": \"SELECT avg(age) FROM dogs\", \"question\": \"What is the oldest age of dogs?\"}\n",
    )
    .unwrap();
    let diag = dir.path().join("diag.tsv");
    let o = logicheck(&["blec", "score", p(&pairs), "--diagnostics", p(&diag)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "BLEC 1/2 = 0.5000\n");
    let d = fs::read_to_string(diag).unwrap();
    assert!(d.contains("good\tconsistent"));
    assert!(d.lines().any(|l| l.starts_with("bad\tinconsistent") && l.contains("avg") && l.contains("oldest")), "{d}");
}

#[test]
fn snowball_then_compose() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        format!("iterations = 1\nbeam_size = 2\nperturb.max_per_seed = 2\nseeds = {}\nout = out\n", p(&fixture("sql_seeds.jsonl"))),
    )
    .unwrap();
    let o = logicheck(&["--config", p(&config), "snowball", "run"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("iteration 1"));
    let it = dir.path().join("out/iteration-1");
    let evaluator = fs::read_to_string(it.join("evaluator.jsonl")).unwrap();

    // re-composing the persisted samples reproduces the evaluator set
    let again = dir.path().join("again");
    let o = logicheck(&[
        "compose",
        "--seeds",
        p(&fixture("sql_seeds.jsonl")),
        "--augmented",
        p(&it.join("augmented.jsonl")),
        "--out",
        p(&again),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(again.join("evaluator.jsonl")).unwrap(), evaluator);
}

#[test]
fn worker_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        format!(
            "iterations = 1\nperturb.max_per_seed = 1\nseeds = {}\nevaluator = subprocess: sh -c 'while read -r l; do echo \"{{\\\"id\\\": 0, \\\"gamma\\\": 2.0}}\"; done'\n",
            p(&fixture("sql_seeds.jsonl"))
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = logicheck(&["--config", p(&config), "--out", p(&out), "snowball", "run"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn serve_builtin_protocol() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_logicheck"))
        .args(["serve-builtin", "--max-requests", "2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let requests = concat!(
        r#"{"id": 4, "op": "evaluate", "logic": "SELECT avg(age) FROM dogs", "text": "What is the average age of dogs?"}"#,
        "\n",
        r#"{"id": 5, "op": "generate", "input": "( the average of ( age ) ) that belongs to ( dogs )", "control": "[SQL]", "beam": 2}"#,
        "\n",
        r#"{"id": 6, "op": "evaluate", "logic": "SELECT avg(age) FROM dogs", "text": "x"}"#,
        "\n"
    );
    child.stdin.take().unwrap().write_all(requests.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], serde_json::json!({"id": 4, "gamma": 1.0}));
    assert_eq!(lines[1]["id"], 5);
    assert_eq!(lines[1]["candidates"][0]["text"], "what is the average age of dogs");
    assert_eq!(lines[1]["candidates"].as_array().unwrap().len(), 2);
}

#[test]
fn split_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("spider.json");
    let records: Vec<serde_json::Value> =
        (0..10).map(|i| serde_json::json!({"query": format!("SELECT a FROM t{i}"), "question": "q"})).collect();
    fs::write(&data, serde_json::to_string(&records).unwrap()).unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = logicheck(&["split-spider", p(&data), "--seed", "3", "--out", p(&out)]);
        assert_eq!(stdout(&o), "train 8 dev 2\n");
        (fs::read_to_string(out.join("train.jsonl")).unwrap(), fs::read_to_string(out.join("dev.jsonl")).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert_eq!(a.0.lines().count() + a.1.lines().count(), 10);
}
