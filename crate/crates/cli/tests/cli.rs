use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn planted(name: &str) -> PathBuf {
    fixture("planted").join(name)
}

fn lifecap<I, S>(out: &Path, args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_lifecap"))
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn labeling(selection: &Value) -> Vec<u64> {
    selection["images"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["label"].as_u64().unwrap())
        .collect()
}

/// Decodes the planted stream into `dir` and returns the candidates path.
fn decode_planted(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec![
        "decode".into(),
        "--manifest".into(),
        planted("manifest.jsonl").into_os_string(),
    ];
    args.push("--predictor".into());
    args.push(planted("predictor.json").into_os_string());
    args.extend(extra.iter().map(Into::into));
    ok(lifecap(dir, args));
    dir.join("candidates.jsonl")
}

#[test]
fn missing_manifest_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let missing = fixture("no_such_manifest.jsonl");
    let out = lifecap(dir.path(), ["decode", "--manifest", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no_such_manifest.jsonl"), "{}", stderr(&out));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn negative_beta_exits_64() {
    let dir = TempDir::new().unwrap();
    let out = lifecap(
        dir.path(),
        [
            "smooth",
            "--costs",
            fixture("costs.csv").to_str().unwrap(),
            "--beta",
            "-1",
        ],
    );
    assert_eq!(code(&out), 64, "{}", stderr(&out));
}

#[test]
fn bad_flags_exit_64() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&lifecap(dir.path(), ["smooth", "--gamma", "1"])), 64);
    assert_eq!(
        code(&lifecap(
            dir.path(),
            ["decode", "--manifest", "m", "--beam-size", "five"]
        )),
        64
    );
    assert_eq!(
        code(&lifecap(dir.path(), ["decode", "--manifest", "m", "--beam-size", "0"])),
        64
    );
    assert_eq!(code(&lifecap(dir.path(), ["frobnicate"])), 64);
    assert_eq!(code(&lifecap(dir.path(), ["evaluate", "--scores-row", "1,2,3"])), 64);
    assert_eq!(code(&lifecap(dir.path(), ["--help"])), 0);
}

#[test]
fn empty_references_exit_65() {
    let dir = TempDir::new().unwrap();
    let out = lifecap(
        dir.path(),
        [
            "evaluate",
            "--candidates",
            fixture("candidates_as_refs.jsonl").to_str().unwrap(),
            "--references",
            fixture("empty.jsonl").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 65, "{}", stderr(&out));
}

#[test]
fn missing_reference_lists_the_image() {
    let dir = TempDir::new().unwrap();
    let refs = dir.path().join("refs.jsonl");
    std::fs::write(&refs, "{\"image_id\": \"a\", \"references\": [\"a man\"]}\n").unwrap();
    let out = lifecap(
        dir.path(),
        [
            "evaluate",
            "--candidates",
            fixture("candidates_as_refs.jsonl").to_str().unwrap(),
            "--references",
            refs.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 65);
    let err = stderr(&out);
    assert!(err.contains('b') && err.contains('c'), "{err}");
    assert!(!dir.path().join("eval.json").exists());
}

#[test]
fn malformed_keywords_exit_64() {
    let dir = TempDir::new().unwrap();
    for name in ["keywords_bad.json", "keywords_truncated.json"] {
        let out = lifecap(
            dir.path(),
            [
                "retrieve",
                "--candidates",
                fixture("bathroom.jsonl").to_str().unwrap(),
                "--keywords",
                fixture(name).to_str().unwrap(),
            ],
        );
        assert_eq!(code(&out), 64, "{name}: {}", stderr(&out));
    }
}

#[test]
fn decode_defaults_give_fifteen_candidates() {
    let dir = TempDir::new().unwrap();
    let lines = jsonl(&decode_planted(dir.path(), &[]));
    assert_eq!(lines.len(), 50);
    for line in &lines {
        assert_eq!(line["candidates"].as_array().unwrap().len(), 15);
    }

    let dir = TempDir::new().unwrap();
    let lines = jsonl(&decode_planted(dir.path(), &["--rounds", "1", "--beam-size", "5"]));
    assert!(lines.iter().all(|l| l["candidates"].as_array().unwrap().len() == 5));
}

#[test]
fn decode_output_feeds_smooth_score_and_retrieve() {
    let dir = TempDir::new().unwrap();
    let cands = decode_planted(dir.path(), &[]);
    let cands = cands.to_str().unwrap();
    let (manifest, vectors) = (planted("manifest.jsonl"), planted("vectors.txt"));
    let region_args = [
        "--manifest",
        manifest.to_str().unwrap(),
        "--word-vectors",
        vectors.to_str().unwrap(),
    ];

    let mut args = vec!["smooth", "--candidates", cands, "--beta", "1"];
    args.extend(region_args);
    ok(lifecap(dir.path(), &args));
    let diary = json(&dir.path().join("diary.json"));
    let bounds: Vec<(u64, u64)> = diary["segments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["start_index"].as_u64().unwrap(), s["end_index"].as_u64().unwrap()))
        .collect();
    assert_eq!(bounds, vec![(0, 16), (17, 33), (34, 49)]);
    let text = std::fs::read_to_string(dir.path().join("diary.txt")).unwrap();
    assert_eq!(text.lines().count(), 3);

    let mut args = vec!["score", "--candidates", cands];
    args.extend(region_args);
    ok(lifecap(dir.path(), &args));
    let costs = dir.path().join("costs.csv");
    ok(lifecap(
        dir.path(),
        ["smooth", "--costs", costs.to_str().unwrap(), "--beta", "1"],
    ));
    let from_costs = json(&dir.path().join("diary.json"));
    assert_eq!(from_costs["segments"].as_array().unwrap().len(), 3);

    ok(lifecap(dir.path(), ["retrieve", "--candidates", cands]));
    assert_eq!(jsonl(&dir.path().join("retrieval.jsonl")).len(), 50);
}

#[test]
fn cost_fixture_matches_enumeration() {
    let rows = [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
    let energy = |l: &[usize], beta: f64| {
        let unary: f64 = l.iter().enumerate().map(|(i, &c)| rows[i][c]).sum();
        unary + beta * l.windows(2).filter(|w| w[0] != w[1]).count() as f64
    };
    let costs = fixture("costs.csv");
    for beta in [0.0, 0.4, 1.0, 3.0] {
        let dir = TempDir::new().unwrap();
        ok(lifecap(
            dir.path(),
            [
                "smooth",
                "--costs",
                costs.to_str().unwrap(),
                "--beta",
                &beta.to_string(),
            ],
        ));
        let sel = json(&dir.path().join("selection.json"));
        let best = (0..8)
            .map(|code| [(code >> 2) & 1, (code >> 1) & 1, code & 1])
            .map(|l| energy(&l, beta))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(sel["energy"].as_f64().unwrap(), best, "beta {beta}");
        let picked: Vec<usize> = labeling(&sel).iter().map(|&l| l as usize).collect();
        assert_eq!(energy(&picked, beta), best);
        assert_eq!(
            sel["images"][0]["sentence"],
            if picked[0] == 0 {
                "a man at a desk"
            } else {
                "a plate of food"
            }
        );
    }

    let dir = TempDir::new().unwrap();
    ok(lifecap(
        dir.path(),
        ["smooth", "--costs", costs.to_str().unwrap(), "--beta", "0"],
    ));
    assert_eq!(labeling(&json(&dir.path().join("selection.json"))), vec![1, 0, 1]);
    ok(lifecap(
        dir.path(),
        ["smooth", "--costs", costs.to_str().unwrap(), "--beta", "1000"],
    ));
    assert_eq!(
        json(&dir.path().join("diary.json"))["segments"]
            .as_array()
            .unwrap()
            .len(),
        1
    );
}

#[test]
fn scores_row_reproduces_the_printed_mean() {
    let dir = TempDir::new().unwrap();
    ok(lifecap(
        dir.path(),
        [
            "evaluate",
            "--scores-row",
            "0.669,0.472,0.324,0.218,0.257,0.209,0.462",
            "--label",
            "demo",
        ],
    ));
    let report = json(&dir.path().join("eval.json"));
    assert!((report["mean"].as_f64().unwrap() - 0.373).abs() <= 0.0005);
    let table = std::fs::read_to_string(dir.path().join("eval.txt")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("demo"), "{table}");
    assert!(table.contains("0.373"), "{table}");
}

#[test]
fn candidates_equal_to_references_score_one() {
    let dir = TempDir::new().unwrap();
    ok(lifecap(
        dir.path(),
        [
            "evaluate",
            "--candidates",
            fixture("candidates_as_refs.jsonl").to_str().unwrap(),
            "--references",
            fixture("refs_small.jsonl").to_str().unwrap(),
        ],
    ));
    let report = json(&dir.path().join("eval.json"));
    for key in ["bleu1", "bleu2", "bleu3", "bleu4"] {
        assert_eq!(report[key].as_f64().unwrap(), 1.0, "{key}");
    }
}

#[test]
fn bathroom_captions_are_places() {
    let dir = TempDir::new().unwrap();
    ok(lifecap(
        dir.path(),
        [
            "retrieve",
            "--candidates",
            fixture("bathroom.jsonl").to_str().unwrap(),
            "--labels",
            fixture("bathroom_labels.csv").to_str().unwrap(),
        ],
    ));
    let eval = json(&dir.path().join("confusion.json"));
    assert_eq!(eval["three_way"]["rates"][1], serde_json::json!([0.0, 1.0, 0.0]));
    let table = std::fs::read_to_string(dir.path().join("confusion_3way.txt")).unwrap();
    assert!(table.contains("place\t0.000\t1.000\t0.000"), "{table}");
    assert!(dir.path().join("pr_place.csv").exists());
    assert!(!dir.path().join("pr_display.csv").exists());
}

#[test]
fn no_keywords_means_not_sensitive() {
    let dir = TempDir::new().unwrap();
    ok(lifecap(
        dir.path(),
        [
            "retrieve",
            "--candidates",
            fixture("plain.jsonl").to_str().unwrap(),
            "--labels",
            fixture("plain_labels.csv").to_str().unwrap(),
        ],
    ));
    for line in jsonl(&dir.path().join("retrieval.jsonl")) {
        assert_eq!(line["label"], "not_sensitive");
    }
}

#[test]
fn unlabeled_image_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let out = lifecap(
        dir.path(),
        [
            "retrieve",
            "--candidates",
            fixture("plain.jsonl").to_str().unwrap(),
            "--labels",
            fixture("bathroom_labels.csv").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 65);
    assert!(stderr(&out).contains("q1"));
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn full_chain(dir: &Path) {
    let cands = decode_planted(dir, &[]);
    let (manifest, vectors, refs) = (
        planted("manifest.jsonl"),
        planted("vectors.txt"),
        planted("references.jsonl"),
    );
    let (cands, manifest, vectors, refs) = (
        cands.to_str().unwrap(),
        manifest.to_str().unwrap(),
        vectors.to_str().unwrap(),
        refs.to_str().unwrap(),
    );
    ok(lifecap(
        dir,
        [
            "score",
            "--candidates",
            cands,
            "--manifest",
            manifest,
            "--word-vectors",
            vectors,
        ],
    ));
    ok(lifecap(
        dir,
        [
            "smooth",
            "--candidates",
            cands,
            "--manifest",
            manifest,
            "--word-vectors",
            vectors,
            "--beta",
            "2",
        ],
    ));
    let selection = dir.join("selection.json");
    ok(lifecap(
        dir,
        [
            "evaluate",
            "--selection",
            selection.to_str().unwrap(),
            "--references",
            refs,
        ],
    ));
    ok(lifecap(dir, ["retrieve", "--candidates", cands]));
}

#[test]
fn full_chain_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    full_chain(a.path());
    full_chain(b.path());
    let (fa, fb) = (read_dir_bytes(a.path()), read_dir_bytes(b.path()));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "candidates.jsonl",
            "costs.csv",
            "costs.labels.txt",
            "diary.json",
            "diary.txt",
            "eval.json",
            "eval.txt",
            "retrieval.jsonl",
            "selection.json"
        ]
    );
    assert_eq!(fa, fb);
}

#[test]
fn diary_command_runs_everything() {
    let dir = TempDir::new().unwrap();
    let args = [
        "--seed-free".into(),
        "diary".into(),
        "--manifest".into(),
        planted("manifest.jsonl").into_os_string(),
        "--predictor".into(),
        planted("predictor.json").into_os_string(),
        "--word-vectors".into(),
        planted("vectors.txt").into_os_string(),
        "--references".into(),
        planted("references.jsonl").into_os_string(),
        "--beta".into(),
        "5".into(),
    ];
    ok(lifecap(dir.path(), &args));
    let text = std::fs::read_to_string(dir.path().join("diary.txt")).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(
        text.starts_with("2016-05-02T08:00:00Z - 2016-05-02T08:16:00Z\t"),
        "{text}"
    );
    for name in [
        "candidates.jsonl",
        "costs.csv",
        "selection.json",
        "diary.json",
        "retrieval.jsonl",
        "eval.json",
        "eval.txt",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &config,
        serde_json::json!({
            "joint": {"beta": 1000.0},
            "output_dir": out_dir,
        })
        .to_string(),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lifecap"))
        .args([
            "--config",
            config.to_str().unwrap(),
            "smooth",
            "--costs",
            fixture("costs.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    ok(out);
    assert_eq!(json(&out_dir.join("selection.json"))["beta"].as_f64(), Some(1000.0));

    std::fs::write(&config, "{\"joint\": {\"beta\": 1.0}, \"gamma\": 2}").unwrap();
    let out = lifecap(
        dir.path(),
        [
            "--config",
            config.to_str().unwrap(),
            "smooth",
            "--costs",
            fixture("costs.csv").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 64, "{}", stderr(&out));
}
