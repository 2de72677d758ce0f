use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pointsight::eval::manifest::scan_dataset;
use pointsight::eval::sample_subset;
use pointsight::eval::synthetic::{synthetic_shape, write_dataset};
use pointsight::imagebuf::decode_png;
use pointsight::mesh::write_off;
use pointsight::vlm::{read_transcript, TranscriptRecord, MODELNET10};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pointsight"));
    c.env_remove("VLM_API_KEY")
        .env_remove("VLM_ENDPOINT")
        .env_remove("VLM_MODEL")
        .env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn chair(dir: &Path) -> PathBuf {
    let p = dir.join("chair_0001.off");
    fs::write(&p, write_off(&synthetic_shape(2, 1))).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_transcript(path: &Path, records: &[TranscriptRecord]) {
    let lines: Vec<String> = records.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn listed(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn render_writes_one_png_per_view() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "render",
        s(&input),
        "--style",
        "ri-gray",
        "--views",
        "3",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        listed(&out),
        [
            "chair_0001_ri-gray_front.png",
            "chair_0001_ri-gray_side.png",
            "chair_0001_ri-gray_top.png"
        ]
    );
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn render_grid_composes_ten_views() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let out = dir.path().join("grid");
    let o = run(&[
        "render",
        s(&input),
        "--style",
        "ri-gray",
        "--views",
        "10",
        "--grid",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(listed(&out), ["chair_0001_ri-gray_grid10.png"]);
    let img = decode_png::<f64>(&fs::read(out.join("chair_0001_ri-gray_grid10.png")).unwrap()).unwrap();
    assert_eq!((img.width(), img.height()), (2568, 1026));
}

#[test]
fn bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let o = run(&["render", s(&input), "--style", "watercolor"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown style \"watercolor\""), "{}", stderr(&o));
    assert_eq!(run(&["render", s(&input), "--views", "4"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_1() {
    let o = run(&["render", "/nonexistent/chair.off", "--out", "/tmp"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonexistent"));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let cfg = dir.path().join("settings.json");
    fs::write(&cfg, r#"{"views": 1, "style": "dm-dense"}"#).unwrap();
    let out1 = dir.path().join("a");
    let o = run(&["--config", s(&cfg), "render", s(&input), "--out", s(&out1)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(listed(&out1), ["chair_0001_dm-dense_front.png"]);
    let out2 = dir.path().join("b");
    let o = run(&[
        "--config",
        s(&cfg),
        "render",
        s(&input),
        "--views",
        "3",
        "--out",
        s(&out2),
    ]);
    assert!(o.status.success());
    assert_eq!(listed(&out2).len(), 3);
}

#[test]
fn classify_with_oracle_prints_label() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let transcript = dir.path().join("t.jsonl");
    let o = run(&[
        "classify",
        s(&input),
        "--backend",
        "oracle",
        "--categories",
        "modelnet10",
        "--transcript",
        s(&transcript),
        "--verbose",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("chair"));
    assert!(out.contains("response: "));
    assert!(out.contains("latency: "));
    let recs = read_transcript(&transcript).unwrap();
    assert_eq!(recs.len(), 1);
    assert!(recs[0]
        .prompt
        .contains("I will provide you 10 options: bathtub, bed, chair"));
    assert_eq!(recs[0].image_digests.len(), 3);
}

#[test]
fn classify_service_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let t = dir.path().join("fail.jsonl");
    write_transcript(
        &t,
        &[TranscriptRecord {
            error: Some("HTTP 500: internal".into()),
            ..Default::default()
        }],
    );
    let cfg = dir.path().join("fast.json");
    fs::write(&cfg, r#"{"gateway": {"retry": {"max_retries": 1}}}"#).unwrap();
    let spec = format!("scripted:{}", s(&t));
    let o = run(&["--config", s(&cfg), "classify", s(&input), "--backend", &spec]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("HTTP 500"));
}

#[test]
fn classify_unparseable_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let t = dir.path().join("hedge.jsonl");
    write_transcript(
        &t,
        &[TranscriptRecord {
            response: Some("Could be a chair or a sofa.".into()),
            ..Default::default()
        }],
    );
    let o = run(&["classify", s(&input), "--backend", &format!("scripted:{}", s(&t))]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stdout(&o).lines().next(), Some("unparseable"));
}

#[test]
fn classify_rejects_five_images() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let out = dir.path().join("views");
    assert!(run(&["render", s(&input), "--views", "6", "--out", s(&out)])
        .status
        .success());
    let pngs: Vec<String> = listed(&out)
        .into_iter()
        .take(5)
        .map(|n| out.join(n).to_string_lossy().into_owned())
        .collect();
    let mut args = vec!["classify", "--backend", "oracle", "--label", "chair", "--image"];
    args.extend(pngs.iter().map(String::as_str));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("5 images"));
    let o = run(&args[..10]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("chair"));
}

#[test]
fn live_backend_without_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let input = chair(dir.path());
    let o = run(&["classify", s(&input), "--backend", "live"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("VLM_API_KEY"));
    let o = run(&["eval", "--dataset", s(dir.path()), "--backend", "live"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("configuration missing"));
}

fn mn10(dir: &Path) -> PathBuf {
    let root = dir.join("ModelNet10");
    write_dataset(&root, &MODELNET10, 20, 100, false).unwrap();
    root
}

#[test]
fn eval_with_oracle_prints_perfect_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = mn10(dir.path());
    let out = dir.path().join("run");
    let o = run(&[
        "eval",
        "--dataset",
        s(&data),
        "--style",
        "ri-gray",
        "--views",
        "3",
        "--n",
        "50",
        "--backend",
        "oracle",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("100.0 (50/50)"), "{}", stdout(&o));
    assert_eq!(listed(&out.join("images")).len(), 150);

    // replaying the recorded configuration reproduces the run
    let again = dir.path().join("again");
    let o = run(&["--config", s(&out.join("config.json")), "--out", s(&again), "eval"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.json", "records.jsonl", "summary.json"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_with_scripted_fixture_prints_table_notation() {
    let dir = tempfile::tempdir().unwrap();
    let data = mn10(dir.path());
    let m = scan_dataset(&data).unwrap();
    let records: Vec<TranscriptRecord> = sample_subset(&m, 50, 0)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let (response, error) = match i {
                0..32 => (Some(format!("Answer: {}", e.category)), None),
                32..44 => (Some("I think this is a bathtub, honestly.".to_string()), None),
                _ => (None, Some("HTTP 503".to_string())),
            };
            let response = match (&response, e.category.as_str()) {
                (Some(_), "bathtub") if i >= 32 => Some("Answer: toilet".to_string()),
                _ => response,
            };
            TranscriptRecord {
                sample_id: Some(e.id),
                response,
                error,
                latency: 5.0,
                ..Default::default()
            }
        })
        .collect();
    let t = dir.path().join("mn10.jsonl");
    write_transcript(&t, &records);
    let o = run(&[
        "eval",
        "--dataset",
        s(&data),
        "--style",
        "ri-gray",
        "--views",
        "3",
        "--n",
        "50",
        "--backend",
        &format!("scripted:{}", s(&t)),
        "--out",
        s(&dir.path().join("run")),
        "--no-images",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("accuracy      72.7 (32/44)"), "{text}");
    assert!(text.contains("mean latency  5.00 s"), "{text}");
}

#[test]
fn manifest_reports_counts_and_warns() {
    let dir = tempfile::tempdir().unwrap();
    let data = mn10(dir.path());
    let out = dir.path().join("idx");
    let o = run(&["manifest", s(&data), "--out", s(&out)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("total"), "{text}");
    assert!(
        stderr(&o).contains("found 20 train shapes, expected 3991"),
        "{}",
        stderr(&o)
    );
    assert!(out.join("manifest.json").is_file());
}
