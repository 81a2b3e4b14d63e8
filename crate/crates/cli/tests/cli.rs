use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use gridqa_core::harness::{EpisodeLog, EpisodeRecord};
use gridqa_core::questions::{verify_balance, Dataset, Split};
use gridqa_server::{AgentTag, Control, FramedClient, Request, Response};

fn gridqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridqa"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = gridqa(args);
    assert!(
        out.status.success(),
        "gridqa {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rooms and a 1/64-scale dataset under `root`.
fn generate(root: &Path) -> (PathBuf, PathBuf) {
    let rooms = root.join("rooms");
    let data = root.join("data");
    ok(&[
        "gen-rooms",
        "--suite",
        "small",
        "--seed",
        "3",
        "--out",
        s(&rooms),
    ]);
    ok(&[
        "gen-dataset",
        "--rooms",
        s(&rooms),
        "--scale",
        "0.015625",
        "--seed",
        "4",
        "--out",
        s(&data),
    ]);
    (rooms, data)
}

#[test]
fn generated_datasets_are_balanced_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (rooms, data) = generate(dir.path());
    let again = dir.path().join("again");
    let stdout = ok(&[
        "gen-dataset",
        "--rooms",
        s(&rooms),
        "--scale",
        "0.015625",
        "--seed",
        "4",
        "--out",
        s(&again),
    ]);
    assert!(
        stdout.starts_with("split,qtype,items\ntrain,existence,"),
        "{stdout}"
    );

    let ds = Dataset::read_dir(&data).unwrap();
    let balance = verify_balance(&ds.items).unwrap();
    assert_eq!(balance.split_total(Split::Train), 25 * 16 * 3);
    for entry in std::fs::read_dir(&data).unwrap() {
        let path = entry.unwrap().path();
        let twin = again.join(path.file_name().unwrap());
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(twin).unwrap(),
            "{}",
            path.display()
        );
    }
}

#[test]
fn eval_reports_csv_and_tables_and_logs_replay() {
    let dir = tempfile::tempdir().unwrap();
    let (rooms, data) = generate(dir.path());
    let out = dir.path().join("eval");
    let stdout = ok(&[
        "eval",
        "--rooms",
        s(&rooms),
        "--dataset",
        s(&data),
        "--arm",
        "scripted",
        "--arm",
        "mla",
        "--logs",
        "--out",
        s(&out),
    ]);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(stdout.starts_with(&csv));
    assert!(stdout.contains("[unseen]") && stdout.contains("scripted"));
    assert!(csv
        .lines()
        .any(|l| l.starts_with("mla,unseen,existence,") && l.contains(",0.500000,")));

    // metrics recomputed from the record file match the live report
    let again = ok(&["metrics", s(&out.join("records.jsonl"))]);
    assert!(again.starts_with(&csv));

    let logs: Vec<PathBuf> = std::fs::read_dir(out.join("logs/scripted"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(
        logs.len(),
        csv.lines()
            .find(|l| l.starts_with("scripted,all,all,"))
            .unwrap()
            .split(',')
            .nth(3)
            .unwrap()
            .parse::<usize>()
            .unwrap()
    );
    let replayed = ok(&["replay", "--steps", s(&logs[0])]);
    assert!(replayed.contains("record matches true"), "{replayed}");

    let mut log = EpisodeLog::read(&logs[0]).unwrap();
    log.record.total_reward += 1.0;
    let bad = dir.path().join("bad.jsonl.gz");
    log.write(&bad).unwrap();
    let out = gridqa(&["replay", s(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("record matches false"));
}

#[test]
fn train_writes_parameters_that_eval_loads() {
    let dir = tempfile::tempdir().unwrap();
    let (rooms, data) = generate(dir.path());
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"training": {"updates": 30, "workers": 2, "log_every": 10}, "eval": {"repeats": 1}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let common = [
        "--config",
        s(&config),
        "--out",
        s(&out),
        "--rooms",
        s(&rooms),
        "--dataset",
        s(&data),
    ];

    let missing = gridqa(&[&["eval", "--arm", "himn_gt"], &common[..]].concat());
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("gridqa train --arm himn_gt"));

    let trained = ok(&[&["train", "--arm", "himn_gt", "--seed", "5"], &common[..]].concat());
    assert!(trained.starts_with("himn_gt: updates 30"), "{trained}");
    assert!(out.join("params/himn_gt.params").exists());
    let curves = std::fs::read_to_string(out.join("params/himn_gt_curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 4);

    let stdout = ok(&[&["eval", "--arm", "himn_gt"], &common[..]].concat());
    assert!(stdout.lines().any(|l| l.starts_with("himn_gt,unseen,all,")));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"world": {"scale": -1}}"#).unwrap();
    assert!(!gridqa(&["eval", "--config", s(&bad), "--arm", "mla"])
        .status
        .success());
}

#[test]
fn serve_accepts_a_framed_client_and_records_the_episode() {
    let dir = tempfile::tempdir().unwrap();
    let (rooms, data) = generate(dir.path());
    let out = dir.path().join("served");
    let assets = dir.path().join("www");
    std::fs::create_dir_all(&assets).unwrap();
    std::fs::write(assets.join("index.html"), "<!doctype html>").unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_gridqa"))
        .args([
            "serve",
            "--port",
            "0",
            "--rooms",
            s(&rooms),
            "--dataset",
            s(&data),
            "--out",
            s(&out),
            "--static",
            s(&assets),
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .expect("address line")
        .to_string();

    let item = Dataset::read_dir(&data)
        .unwrap()
        .items
        .into_iter()
        .find(|i| i.split == Split::Test)
        .unwrap();
    let mut client = FramedClient::connect(&addr).unwrap();
    let reset = Request::Reset {
        item_id: item.item_id.clone(),
        control: Control::Primitive,
        agent: AgentTag::Human,
        seed: None,
    };
    assert!(matches!(
        client.request(&reset).unwrap(),
        Response::State(_)
    ));
    let answer = Request::Step {
        action: serde_json::json!(7 + item.answer),
    };
    let result = match client.request(&answer).unwrap() {
        Response::Result(r) => r,
        other => panic!("{other:?}"),
    };
    assert!(result.correct);
    let (status, _) = gridqa_server::http_raw(&addr, "GET", "/", b"").unwrap();
    assert_eq!(status, 200);
    child.kill().unwrap();
    child.wait().unwrap();

    let text = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    let records: Vec<EpisodeRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].agent, "human");
    assert_eq!(records[0], result.record);
    let metrics = ok(&["metrics", s(&out.join("records.jsonl"))]);
    assert!(
        metrics.contains("human,unseen,all,1,1.000000,"),
        "{metrics}"
    );
}
