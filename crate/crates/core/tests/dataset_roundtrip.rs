use geosynth::catalog::{bundled, Catalog};
use geosynth::dataset::{
    augment_corpus, compute_stats, read_corpus, read_manifest, read_sources, run_generation, validate_corpus,
    write_corpus, DatasetRecord, RunOptions, SourceItem, TrigramEmbedder, CORPUS_FILE,
};
use geosynth::engine::{GenerationConfig, PropertyLedger};
use geosynth::reasoner::parse::extract_numeric_claims;
use geosynth::reasoner::{MockClient, PromptTemplatePool, Reasoner, RequestLog};
use std::collections::BTreeSet;
use std::fs;

fn corpus(seed: u64, figures: u64) -> (Catalog, Vec<DatasetRecord>, geosynth::dataset::Counts) {
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let client = MockClient::new();
    let log = RequestLog::new();
    let cfg = GenerationConfig { seed, ..Default::default() };
    let out = run_generation(&cfg, &cat, &pool, &client, &log, &RunOptions { figures, jobs: 2, dry_run: false });
    assert!(out.complete && out.errors.is_empty(), "{:?}", out.errors);
    (cat, out.records, out.counts)
}

/// A ledger-inconsistent replacement for an answer.
fn corrupt(answer: &str, ledger: &PropertyLedger) -> String {
    if let Some(c) = extract_numeric_claims(answer).first() {
        return answer.replace(&c.literal, &format!("{:.1}", c.value * 1.3 + 1.0));
    }
    let lens: Vec<(&String, &f64)> = ledger.lengths.iter().filter(|(k, _)| !k.starts_with("r(")).collect();
    for (a, x) in &lens {
        for (b, y) in &lens {
            if (*x - *y).abs() > 1.0 {
                return format!("{a} = {b}");
            }
        }
    }
    panic!("no unequal segments")
}

#[test]
fn ten_records_round_trip() {
    let (cat, records, counts) = corpus(11, 10);
    assert_eq!(records.len(), 10);
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({"seed": 11});
    let m1 = write_corpus(dir.path(), &records, cfg.clone(), &cat, counts.clone(), true).unwrap();
    let text = fs::read_to_string(dir.path().join(CORPUS_FILE)).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert_eq!(read_corpus(dir.path()).unwrap(), records);
    assert_eq!(read_manifest(dir.path()).unwrap(), m1);
    for r in &records {
        assert!(dir.path().join(&r.image).is_file());
    }
    let m2 = write_corpus(dir.path(), &records, cfg, &cat, counts, true).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(fs::read_to_string(dir.path().join(CORPUS_FILE)).unwrap(), text);
}

#[test]
fn one_corrupted_answer_is_one_violation_at_its_line() {
    let (cat, mut records, counts) = corpus(12, 6);
    assert!(validate_corpus(&records, &cat).is_empty());
    let line = 4;
    let r = &mut records[line - 1];
    r.qa[0].answer = corrupt(&r.qa[0].answer, &r.ledger);
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &records, serde_json::json!({}), &cat, counts, true).unwrap();
    let v = validate_corpus(&read_corpus(dir.path()).unwrap(), &cat);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].line, line);
}

#[test]
fn schema_violation_writes_nothing() {
    let (cat, mut records, counts) = corpus(13, 3);
    records[2].pattern = "nonsense".into();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    assert!(write_corpus(&out, &records, serde_json::json!({}), &cat, counts, true).is_err());
    assert!(!out.exists());
}

#[test]
fn stats_are_deterministic_and_count_patterns() {
    let (_, records, _) = corpus(14, 40);
    let e = TrigramEmbedder::default();
    let a = compute_stats(&records, &e, 5000, 3).unwrap();
    let b = compute_stats(&records, &e, 5000, 3).unwrap();
    assert_eq!(a, b);
    let qa: usize = records.iter().map(|r| r.qa.len()).sum();
    assert_eq!(a.qa_per_figure, qa as f64 / records.len() as f64);
    let hand: BTreeSet<(Vec<String>, Vec<String>)> = records
        .iter()
        .map(|r| {
            let mut kinds = r.substrates.clone();
            kinds.sort();
            let mut roles: Vec<String> = r.scene.role_multiset().iter().map(|x| x.as_str().to_string()).collect();
            roles.sort();
            (kinds, roles)
        })
        .collect();
    assert_eq!(a.unique_patterns, hand.len());
    assert_eq!(a.question_types.values().sum::<usize>(), qa);
}

#[test]
fn identical_texts_have_zero_diversity() {
    let (_, mut records, _) = corpus(15, 1);
    records[0].qa.truncate(1);
    let twin = records[0].qa[0].clone();
    records[0].qa.push(twin);
    let s = compute_stats(&records, &TrigramEmbedder::default(), 10, 0).unwrap();
    assert_eq!(s.diversity, Some(0.0));
}

#[test]
fn dry_run_makes_no_requests() {
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let client = MockClient::strict(Default::default());
    let log = RequestLog::new();
    let out = run_generation(&GenerationConfig::default(), &cat, &pool, &client, &log, &RunOptions { figures: 1, jobs: 1, dry_run: true });
    assert_eq!(out.records.len(), 1);
    assert!(out.records[0].qa.is_empty());
    assert!(log.is_empty());
}

#[test]
fn empty_source_file_gives_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("src.jsonl");
    fs::write(&p, "").unwrap();
    let (items, warnings) = read_sources(&p).unwrap();
    assert!(items.is_empty() && warnings.is_empty());
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let client = MockClient::new();
    let log = RequestLog::new();
    let r = Reasoner { client: &client, log: &log, pool: &pool, catalog: &cat };
    let out = augment_corpus(&r, &items, false);
    assert!(out.records.is_empty() && out.errors.is_empty());
    assert!(log.is_empty());
}

#[test]
fn fixture_segmentation_defines_the_pairs() {
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let item = SourceItem {
        id: "g1".into(),
        question: "In circle O, AB is a diameter and C lies on the circle. ∠ABC = 30°. Find ∠BAC.".into(),
        cot_answer: "∠ACB = 90°, so ∠BAC = 60°.".into(),
        image: None,
    };
    let steps = ["AB is a diameter, so ∠ACB = 90°.", "The angles of triangle ABC sum to 180°.", "So ∠BAC = 180° - 90° - 30° = 60°."];
    let mut client = MockClient::new();
    let seg_prompt = {
        let log = RequestLog::new();
        let probe = MockClient::new();
        let r = Reasoner { client: &probe, log: &log, pool: &pool, catalog: &cat };
        augment_corpus(&r, std::slice::from_ref(&item), false);
        log.entries().into_iter().find(|e| e.request_id.ends_with("/segment")).unwrap().prompt
    };
    let listed: Vec<String> = steps.iter().enumerate().map(|(i, s)| format!("{}. {s}", i + 1)).collect();
    client.insert(&seg_prompt, format!("```steps\n{}\n```", listed.join("\n")));
    let log = RequestLog::new();
    let r = Reasoner { client: &client, log: &log, pool: &pool, catalog: &cat };
    let out = augment_corpus(&r, &[item.clone()], false);
    let rec = &out.records[0];
    assert_eq!(rec.steps, steps);
    assert_eq!(rec.qa.len(), 3);
    for p in &rec.qa {
        assert!(p.chain.iter().all(|&k| k < rec.steps.len()));
        assert_ne!(p.question, item.question);
    }
}
