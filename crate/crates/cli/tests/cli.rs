use geosynth::dataset::{compute_stats, read_corpus, write_corpus, TrigramEmbedder, CORPUS_FILE};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geosynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geosynth")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn generate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--mock-client", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    geosynth(&args)
}

#[test]
fn generate_twice_is_identical() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    assert!(generate(&a, &["--figures", "10", "--seed", "7"]).status.success());
    assert!(generate(&b, &["--figures", "10", "--seed", "7", "--jobs", "1"]).status.success());
    for f in [CORPUS_FILE, "manifest.json", "requests.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn dry_run_emits_figures_without_requests() {
    let t = tempfile::tempdir().unwrap();
    let out = generate(t.path(), &["--figures", "1", "--dry-run"]);
    assert!(out.status.success());
    let records = read_corpus(t.path()).unwrap();
    assert_eq!(records.len(), 1);
    assert!(!records[0].ledger.lengths.is_empty());
    assert_eq!(fs::read_to_string(t.path().join("requests.jsonl")).unwrap(), "");
}

#[test]
fn flags_override_the_config_file() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("run.toml");
    fs::write(&cfg, "figures = 3\n[generation]\nseed = 4\nretry_budget = 80\n").unwrap();
    let out_dir = t.path().join("c");
    let out = generate(&out_dir, &["--config", cfg.to_str().unwrap(), "--seed", "9"]);
    assert!(out.status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["generation"]["seed"], 9);
    assert_eq!(m["config"]["generation"]["retry_budget"], 80);
    assert_eq!(m["config"]["figures"], 3);
    assert_eq!(m["counts"]["figures_requested"], 3);
}

#[test]
fn bad_config_fails_before_writing() {
    let t = tempfile::tempdir().unwrap();
    let out_dir = t.path().join("c");
    let out = generate(&out_dir, &["--distribution", "group9"]);
    assert!(!out.status.success());
    assert!(!out_dir.exists());
}

#[test]
fn validate_reports_corruption_and_empty_corpora() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("c");
    assert!(generate(&dir, &["--figures", "5", "--seed", "3"]).status.success());
    let ok = geosynth(&["validate", dir.to_str().unwrap()]);
    assert!(ok.status.success());
    assert_eq!(json(&ok)["violations"].as_array().unwrap().len(), 0);

    let mut records = read_corpus(&dir).unwrap();
    let r = &mut records[1];
    let (a, b) = {
        let mut it = r.ledger.lengths.iter().filter(|(k, _)| !k.starts_with("r("));
        let (a, x) = it.next().unwrap();
        let (b, _) = r.ledger.lengths.iter().find(|(_, y)| (*y - x).abs() > 1.0).unwrap();
        (a.clone(), b.clone())
    };
    r.qa[0].answer = format!("{a} = {b}");
    let bad = t.path().join("bad");
    write_corpus(&bad, &records, serde_json::json!({}), &geosynth::catalog::bundled(), Default::default(), true).unwrap();
    let out = geosynth(&["validate", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let v = json(&out)["violations"].as_array().unwrap().clone();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0]["line"], 2);

    let empty = t.path().join("empty");
    fs::create_dir(&empty).unwrap();
    fs::write(empty.join(CORPUS_FILE), "").unwrap();
    let out = geosynth(&["validate", empty.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(json(&out)["records"], 0);
}

#[test]
fn validate_reports_parse_errors_with_lines() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join(CORPUS_FILE), "{}\n").unwrap();
    let out = geosynth(&["validate", t.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1:"));
}

#[test]
fn stats_match_the_library() {
    let t = tempfile::tempdir().unwrap();
    assert!(generate(t.path(), &["--figures", "12", "--seed", "5"]).status.success());
    let out = geosynth(&["stats", t.path().to_str().unwrap(), "--sample-size", "50", "--seed", "2"]);
    assert!(out.status.success());
    let golden = compute_stats(&read_corpus(t.path()).unwrap(), &TrigramEmbedder::default(), 50, 2).unwrap();
    assert_eq!(json(&out), serde_json::to_value(&golden).unwrap());
}

#[test]
fn stats_on_missing_path_fails_quietly() {
    let out = geosynth(&["stats", "/nonexistent/corpus"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn strict_augmentation_filters_every_pair() {
    let t = tempfile::tempdir().unwrap();
    let src = t.path().join("src.jsonl");
    let rows = [
        r#"{"id":"q1","question":"In triangle ABC, AB = AC and ∠BAC = 40°. Find ∠ABC.","cot_answer":"Triangle ABC is isosceles. Its base angles are equal. So ∠ABC = 70°."}"#,
        r#"{"id":"q2","question":"In rectangle ABCD, AB = 6 and BC = 8. Find AC.","cot_answer":"∠ABC = 90°. By Pythagoras AC² = 36 + 64. So AC = 10."}"#,
        r#"{"id":"q3","question":"Circle O has radius 5 and AB is a diameter. Find AB.","cot_answer":"A diameter is twice the radius. So AB = 10."}"#,
    ];
    fs::write(&src, rows.join("\n") + "\n").unwrap();
    let dst = t.path().join("aug.jsonl");
    let out = geosynth(&["augment", src.to_str().unwrap(), "--out", dst.to_str().unwrap(), "--mock-client", "--strict"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&dst).unwrap();
    let recs: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 3);
    let report = json(&out);
    let kept: usize = recs.iter().map(|r| r["qa"].as_array().unwrap().len()).sum();
    let steps: usize = recs.iter().map(|r| r["steps"].as_array().unwrap().len()).sum();
    let rejected: u64 = report["rejected"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(kept as u64 + rejected, steps as u64);
    for r in &recs {
        for p in r["qa"].as_array().unwrap() {
            assert_eq!(p["status"], "accepted");
            assert_ne!(p["question"], r["source_question"]);
        }
    }
}

#[test]
fn render_reproduces_images() {
    let t = tempfile::tempdir().unwrap();
    let c = t.path().join("c");
    assert!(generate(&c, &["--figures", "3", "--seed", "1"]).status.success());
    let r = t.path().join("r");
    assert!(geosynth(&["render", c.to_str().unwrap(), "--out", r.to_str().unwrap()]).status.success());
    for rec in read_corpus(&c).unwrap() {
        assert_eq!(fs::read(c.join(&rec.image)).unwrap(), fs::read(r.join(&rec.image)).unwrap());
    }
}
