//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use geosynth::catalog::{applicable_conclusions, bundled, check_statement, Catalog};
use geosynth::dataset::{read_corpus, run_generation, to_jsonl, RunOptions, CORPUS_FILE};
use geosynth::engine::{fidelity_check, generate_figure, FidelityConfig, Figure, GenerationConfig, RejectReason};
use geosynth::geometry::{angle_at, distance, polygon_area, segment_id, Label, Point, Primitive, Role, Scene};
use geosynth::reasoner::mock::section;
use geosynth::reasoner::parse::extract_numeric_claims;
use geosynth::reasoner::{
    filter_qa, patch_reasoning_fusion, reverse_question_generation, validate_step, ClientError, Completion,
    CompletionClient, FigureContext, Grounding, MockClient, PromptTemplatePool, QaPair, QaStatus, Reasoner,
    RequestLog, Taxonomy,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

const AREA_TOL: f64 = 1e-9;
const ANGLE_SUM_TOL: f64 = 1e-6;
const PYTHAGORAS_TOL: f64 = 1e-9;
const CONCLUSION_TOL: f64 = 1e-6;
const DIST_TOL_PP: f64 = 2.0;
const CHI2_P_MIN: f64 = 0.01;
const PLANTED_FRACTION: f64 = 0.16;
const RESIDUAL_MAX: f64 = 0.05;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.into()) }
}

// ------------------------------------------------------------------ 1

fn ccw(pts: &[Point]) -> bool {
    pts.iter().zip(pts.iter().cycle().skip(1)).map(|(a, b)| a.cross(*b)).sum::<f64>() > 0.0
}

fn tri_area(a: Point, b: Point, c: Point) -> f64 {
    (b.sub(a).cross(c.sub(a)) / 2.0).abs()
}

fn ear_clip_area(pts: &[Point]) -> Option<f64> {
    let mut idx: Vec<usize> = if ccw(pts) { (0..pts.len()).collect() } else { (0..pts.len()).rev().collect() };
    let mut total = 0.0;
    while idx.len() > 3 {
        let m = idx.len();
        let i = (0..m).find(|&i| {
            let (a, b, c) = (pts[idx[(i + m - 1) % m]], pts[idx[i]], pts[idx[(i + 1) % m]]);
            b.sub(a).cross(c.sub(b)) > 0.0
                && idx.iter().all(|&k| {
                    let p = pts[k];
                    p == a
                        || p == b
                        || p == c
                        || !(b.sub(a).cross(p.sub(a)) > 0.0
                            && c.sub(b).cross(p.sub(b)) > 0.0
                            && a.sub(c).cross(p.sub(c)) > 0.0)
                })
        })?;
        total += tri_area(pts[idx[(i + m - 1) % m]], pts[idx[i]], pts[idx[(i + 1) % m]]);
        idx.remove(i);
    }
    Some(total + tri_area(pts[idx[0]], pts[idx[1]], pts[idx[2]]))
}

fn interior_angle_sum(pts: &[Point]) -> f64 {
    let n = pts.len();
    let orient = ccw(pts);
    (0..n)
        .map(|i| {
            let (p, v, q) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            let a = angle_at(v, p, q).unwrap();
            if (v.sub(p).cross(q.sub(v)) > 0.0) == orient { a } else { 360.0 - a }
        })
        .sum()
}

fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let n = rng.gen_range(3..=9);
    let c = Point::new(50.0, 50.0);
    let mut s = Scene::new();
    let labels: Vec<Label> = (0..n)
        .map(|i| {
            let deg = (i as f64 + 0.8 * rng.gen::<f64>()) * 360.0 / n as f64;
            s.add_vertex(Point::polar(c, rng.gen_range(8.0..40.0), deg)).unwrap()
        })
        .collect();
    for i in 0..n {
        s.add_primitive(Primitive::segment(labels[i].clone(), labels[(i + 1) % n].clone(), Role::Side)).unwrap();
    }
    s
}

fn pythagoras_residual(a: Point, right: Point, b: Point) -> f64 {
    let (x, y, z) = (distance(right, a), distance(right, b), distance(a, b));
    (x * x + y * y - z * z).abs() / (z * z).max(1.0)
}

fn criterion_1() -> Verdict {
    let t = Instant::now();
    let (mut polys, mut rights, mut worst_area, mut worst_sum, mut worst_py) = (0, 0, 0.0f64, 0.0f64, 0.0f64);
    let mut check_polygon = |pts: &[Point]| -> Result<(), String> {
        let a = polygon_area(pts).map_err(|e| e.to_string())?;
        let t = ear_clip_area(pts).ok_or("polygon is not simple")?;
        let d = (a - t).abs() / a.max(1.0);
        worst_area = worst_area.max(d);
        ensure(d <= AREA_TOL, format!("shoelace {a} vs triangulation {t}"))?;
        let want = (pts.len() as f64 - 2.0) * 180.0;
        let s = interior_angle_sum(pts);
        worst_sum = worst_sum.max((s - want).abs());
        ensure((s - want).abs() <= ANGLE_SUM_TOL, format!("angle sum {s} vs {want}"))?;
        polys += 1;
        Ok(())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let s = random_scene(&mut rng);
        let pts: Vec<Point> = s.vertices().iter().map(|v| v.point).collect();
        check_polygon(&pts)?;
    }
    let cat = bundled();
    let cfg = GenerationConfig { seed: 101, ..Default::default() };
    let figures: Vec<Figure> = (0..1000u64).into_par_iter().filter_map(|i| generate_figure(&cfg, &cat, i).ok()).collect();
    ensure(figures.len() >= 990, format!("only {} of 1000 figures generated", figures.len()))?;
    for f in &figures {
        for sub in &f.scene.substrates {
            if sub.group == "circle" || sub.vertices.len() < 3 {
                continue;
            }
            let pts: Vec<Point> = sub.vertices.iter().map(|l| f.scene.point(l).unwrap()).collect();
            check_polygon(&pts)?;
        }
        for (id, &deg) in &f.ledger.angles {
            if (deg - 90.0).abs() > 1e-9 {
                continue;
            }
            let Some(l) = Label::split_run(id.trim_start_matches('∠')) else { continue };
            if !f.ledger.lengths.contains_key(&segment_id(&l[0], &l[2])) {
                continue;
            }
            let p: Vec<Point> = l.iter().map(|x| f.scene.point(x).unwrap()).collect();
            let r = pythagoras_residual(p[0], p[1], p[2]);
            worst_py = worst_py.max(r);
            ensure(r <= PYTHAGORAS_TOL, format!("{id}: Pythagoras residual {r:e}"))?;
            rights += 1;
        }
    }
    for _ in 0..1000 {
        let p = Point::new(rng.gen_range(10.0..90.0), rng.gen_range(10.0..90.0));
        let u = Point::polar(Point::new(0.0, 0.0), 1.0, rng.gen_range(0.0..360.0));
        let a = p.add(u.scale(rng.gen_range(1.0..40.0)));
        let b = p.add(u.rotate(90.0).scale(rng.gen_range(1.0..40.0)));
        let r = pythagoras_residual(a, p, b);
        worst_py = worst_py.max(r);
        ensure(r <= PYTHAGORAS_TOL, format!("synthetic right triangle residual {r:e}"))?;
        rights += 1;
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "{polys} polygons, {rights} right triangles; worst area {worst_area:.1e}, angle sum {worst_sum:.1e}, Pythagoras {worst_py:.1e}; {secs:.2}s"
    ))
}

// ------------------------------------------------------------------ 2

fn scene_of(pts: &[Point]) -> Scene {
    let mut s = Scene::new();
    let l: Vec<Label> = pts.iter().map(|&p| s.add_vertex(p).unwrap()).collect();
    for i in 0..l.len() {
        s.add_primitive(Primitive::segment(l[i].clone(), l[(i + 1) % l.len()].clone(), Role::Side)).unwrap();
    }
    s
}

/// Isosceles triangle with apex angle `deg`; the apex is the first vertex.
fn apex_triangle(deg: f64) -> Scene {
    let apex = Point::new(50.0, 80.0);
    scene_of(&[apex, Point::polar(apex, 30.0, 270.0 - deg / 2.0), Point::polar(apex, 30.0, 270.0 + deg / 2.0)])
}

fn criterion_2() -> Verdict {
    let cfg = FidelityConfig::default();
    let mut degenerate: Vec<(Scene, RejectReason, f64)> = Vec::new();
    for i in 0..20 {
        let deg = 5.0 + 9.9 * i as f64 / 19.0;
        degenerate.push((apex_triangle(deg), RejectReason::ExtremeAngle, deg));
    }
    for i in 0..15 {
        let deg = 160.1 + 14.9 * i as f64 / 14.0;
        degenerate.push((apex_triangle(deg), RejectReason::ExtremeAngle, deg));
    }
    for i in 0..15 {
        let aspect = 20.5 + 19.5 * i as f64 / 14.0;
        let (w, h) = (2.0 * aspect, 2.0);
        let s = scene_of(&[Point::new(5.0, 40.0), Point::new(5.0 + w, 40.0), Point::new(5.0 + w, 40.0 + h), Point::new(5.0, 40.0 + h)]);
        degenerate.push((s, RejectReason::DistanceRatio, (w * w + h * h).sqrt() / h));
    }
    for (k, (s, reason, value)) in degenerate.iter().enumerate() {
        match fidelity_check(s, &cfg) {
            Ok(()) => return Err(format!("degenerate figure {k} accepted")),
            Err(r) if r.reason != *reason || (r.value - value).abs() > 1e-6 * value.max(1.0) => {
                return Err(format!("degenerate figure {k}: got {r}, expected {} {value:.3}", reason.as_str()))
            }
            Err(_) => {}
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut healthy = Vec::new();
    while healthy.len() < 25 {
        let (a, b) = (rng.gen_range(16.0..150.0), rng.gen_range(16.0..150.0));
        let c = 180.0 - a - b;
        if !(16.0..=150.0).contains(&c) {
            continue;
        }
        let p = Point::new(20.0, 30.0);
        let q = Point::new(60.0, 30.0);
        let side = 40.0 * (b as f64).to_radians().sin() / (c as f64).to_radians().sin();
        let r = Point::polar(p, side, a);
        healthy.push(scene_of(&[p, q, r]));
    }
    while healthy.len() < 50 {
        let c = Point::new(50.0, 50.0);
        let mut degs: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..360.0)).collect();
        degs.sort_by(f64::total_cmp);
        let pts: Vec<Point> = degs.iter().map(|&d| Point::polar(c, 30.0, d)).collect();
        let n = pts.len();
        let angles: Vec<f64> = (0..n).map(|i| angle_at(pts[i], pts[(i + n - 1) % n], pts[(i + 1) % n]).unwrap()).collect();
        let dists: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| distance(pts[i], pts[j])).collect();
        let ratio = dists.iter().cloned().fold(0.0, f64::max) / dists.iter().cloned().fold(f64::INFINITY, f64::min);
        if angles.iter().all(|a| (16.0..=159.0).contains(a)) && ratio < 18.0 {
            healthy.push(scene_of(&pts));
        }
    }
    for (k, s) in healthy.iter().enumerate() {
        if let Err(r) = fidelity_check(s, &cfg) {
            return Err(format!("healthy figure {k} rejected: {r}"));
        }
    }
    Ok(format!("{} degenerate rejected with the expected reason, {} healthy accepted", degenerate.len(), healthy.len()))
}

// ------------------------------------------------------------------ 3

fn figure_facts_violations(f: &Figure, cat: &Catalog) -> (usize, Vec<String>) {
    let ctx = FigureContext::new("f", f, cat);
    let (mut n, mut bad) = (0, Vec::new());
    for t in &ctx.theorems {
        for fact in applicable_conclusions(t, &f.scene) {
            n += 1;
            match check_statement(&fact.statement, &f.scene) {
                Ok((true, r)) if r <= CONCLUSION_TOL => {}
                other => bad.push(format!("{}: {} ({other:?})", t.id, fact.text())),
            }
        }
    }
    (n, bad)
}

fn mock_run(seed: u64, figures: u64) -> (Catalog, geosynth::dataset::RunOutput) {
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let client = MockClient::new();
    let log = RequestLog::new();
    let cfg = GenerationConfig { seed, ..Default::default() };
    let out = run_generation(&cfg, &cat, &pool, &client, &log, &RunOptions { figures, jobs: 0, dry_run: false });
    (cat, out)
}

fn criterion_3() -> Verdict {
    let (cat, out) = mock_run(303, 1000);
    ensure(out.complete, format!("run incomplete: {:?}", out.errors))?;
    let cfg = GenerationConfig { seed: 303, ..Default::default() };
    let per: Vec<(usize, Vec<String>)> = out
        .records
        .par_iter()
        .map(|r| {
            let index: u64 = r.figure_id.trim_start_matches("fig").parse().unwrap();
            let f = generate_figure(&cfg, &cat, index).unwrap();
            assert_eq!(f.scene, r.scene);
            let (n, mut bad) = figure_facts_violations(&f, &cat);
            let g = Grounding::new(&r.scene, &r.ledger, &cat);
            let mut claims = 0;
            for p in &r.qa {
                for &j in &p.chain {
                    claims += r.steps[j].claims.len();
                    if let Err(e) = validate_step(&r.steps[j], &g) {
                        bad.push(format!("{} step {j}: {e}", r.figure_id));
                    }
                }
            }
            (n + claims, bad)
        })
        .collect();
    let checked: usize = per.iter().map(|p| p.0).sum();
    let bad: Vec<&String> = per.iter().flat_map(|p| &p.1).collect();
    ensure(out.records.len() >= 900, format!("only {} records", out.records.len()))?;
    ensure(bad.is_empty(), format!("{} violations, first: {}", bad.len(), bad.first().map_or("", |s| s.as_str())))?;
    Ok(format!("{} figures, {checked} instantiated conclusions and supporting claims, 0 violations", out.records.len()))
}

// ------------------------------------------------------------------ 4

/// Answers judge prompts from ground truth: planted pairs are not
/// answerable, every other pair is.
struct OracleJudge {
    inner: MockClient,
    planted: BTreeSet<(String, String)>,
}

impl CompletionClient for OracleJudge {
    fn identity(&self) -> String {
        "oracle-judge".into()
    }

    fn complete(&self, prompt: &str) -> Result<Completion, ClientError> {
        if let (Some(q), Some(a)) = (section(prompt, "Question"), section(prompt, "Answer")) {
            let yes = !self.planted.contains(&(q.to_string(), a.to_string()));
            let text = format!("```verdict\nVERDICT: {}\nREASON: oracle\n```", if yes { "yes" } else { "no" });
            return Ok(Completion { text, latency_ms: 0 });
        }
        self.inner.complete(prompt)
    }
}

fn corrupt(answer: &str, f: &Figure) -> Option<String> {
    if let Some(c) = extract_numeric_claims(answer).first() {
        return Some(answer.replace(&c.literal, &format!("{:.1}", c.value * 1.3 + 1.0)));
    }
    let lens: Vec<(&String, &f64)> = f.ledger.lengths.iter().filter(|(k, _)| !k.starts_with("r(")).collect();
    lens.iter()
        .flat_map(|a| lens.iter().map(move |b| (a, b)))
        .find(|(a, b)| (a.1 - b.1).abs() > 1.0)
        .map(|(a, b)| format!("{} = {}", a.0, b.0))
}

fn criterion_4() -> Verdict {
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let cfg = GenerationConfig { seed: 404, ..Default::default() };
    let figures: Vec<Figure> = (0..120u64).filter_map(|i| generate_figure(&cfg, &cat, i).ok()).collect();
    let mock = MockClient::new();
    let log = RequestLog::new();
    let r = Reasoner { client: &mock, log: &log, pool: &pool, catalog: &cat };
    let mut items: Vec<(usize, Vec<geosynth::reasoner::ReasoningStep>, QaPair)> = Vec::new();
    let mut chains = Vec::new();
    for (k, f) in figures.iter().enumerate() {
        if items.len() >= 200 {
            break;
        }
        let ctx = FigureContext::new(format!("f{k}"), f, &cat);
        let steps = patch_reasoning_fusion(&r, &ctx).map_err(|e| e.to_string())?;
        if steps.iter().any(|s| s.malformed) {
            continue;
        }
        let g = Grounding::new(&f.scene, &f.ledger, &cat);
        let rev = reverse_question_generation(&r, &ctx, &g, &steps).map_err(|e| e.to_string())?;
        for p in rev.pairs {
            items.push((k, steps.clone(), p));
        }
        chains.push(k);
    }
    items.truncate(200);
    ensure(items.len() == 200, format!("only {} candidate pairs", items.len()))?;
    let n_plant = (PLANTED_FRACTION * 200.0).round() as usize;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    let plant: BTreeSet<usize> = order[..n_plant].iter().copied().collect();
    let mut planted = BTreeSet::new();
    for &i in &plant {
        let (k, _, p) = &mut items[i];
        p.answer = corrupt(&p.answer, &figures[*k]).ok_or("no corruption available")?;
        planted.insert((p.question.clone(), p.answer.clone()));
    }
    let judge = OracleJudge { inner: MockClient::new(), planted };
    let log = RequestLog::new();
    let r = Reasoner { client: &judge, log: &log, pool: &pool, catalog: &cat };
    let (mut forward_rejected, mut accepted, mut planted_accepted, mut clean_rejected) = (0, 0, 0, 0);
    for (i, (k, steps, p)) in items.iter().enumerate() {
        let f = &figures[*k];
        let g = Grounding::new(&f.scene, &f.ledger, &cat);
        let out = filter_qa(&r, &format!("p{i}"), vec![p.clone()], steps, Some(&g));
        ensure(!out.incomplete, "judge request failed")?;
        let status = &out.pairs[0].status;
        let is_planted = plant.contains(&i);
        match status {
            QaStatus::Accepted => {
                accepted += 1;
                planted_accepted += is_planted as usize;
            }
            QaStatus::Rejected { reason } if is_planted && *reason != Taxonomy::AnswerabilityAmbiguity => {
                forward_rejected += 1
            }
            QaStatus::Rejected { .. } => clean_rejected += !is_planted as usize,
            QaStatus::Candidate => return Err("pair left undecided".into()),
        }
    }
    let residual = if accepted == 0 { 1.0 } else { planted_accepted as f64 / accepted as f64 };
    ensure(forward_rejected == n_plant, format!("forward filter rejected {forward_rejected} of {n_plant} planted pairs"))?;
    ensure(residual <= RESIDUAL_MAX, format!("residual planted-error rate {:.1}%", residual * 100.0))?;
    Ok(format!(
        "{n_plant}/200 planted ({:.0}%), forward filter rejected {forward_rejected}/{n_plant}; residual {:.1}% over {accepted} accepted; {clean_rejected} clean pairs rejected",
        PLANTED_FRACTION * 100.0,
        residual * 100.0
    ))
}

// ------------------------------------------------------------------ 5

fn criterion_5() -> Verdict {
    let t = Instant::now();
    let cat = bundled();
    let cfg = GenerationConfig { seed: 505, ..Default::default() };
    let weights = cfg.substrate_distribution.clone();
    let groups: Vec<Option<String>> = (0..10_000u64)
        .into_par_iter()
        .map(|i| generate_figure(&cfg, &cat, i).ok().map(|f| f.scene.substrates[0].group.clone()))
        .collect();
    let failed = groups.iter().filter(|g| g.is_none()).count();
    let mut counts: BTreeMap<String, f64> = weights.keys().map(|k| (k.clone(), 0.0)).collect();
    for g in groups.iter().flatten() {
        *counts.get_mut(g).ok_or(format!("unexpected group {g}"))? += 1.0;
    }
    let n: f64 = counts.values().sum();
    let total_w: f64 = weights.values().sum();
    let (mut chi2, mut worst, mut parts) = (0.0, 0.0f64, Vec::new());
    for (k, w) in &weights {
        let expected = n * w / total_w;
        let got = counts[k];
        chi2 += (got - expected).powi(2) / expected;
        let pp = 100.0 * (got / n - w / total_w);
        worst = worst.max(pp.abs());
        parts.push(format!("{k} {:.1}%", 100.0 * got / n));
    }
    let p = ChiSquared::new((weights.len() - 1) as f64).unwrap().sf(chi2);
    let secs = t.elapsed().as_secs_f64();
    ensure(worst <= DIST_TOL_PP, format!("deviation {worst:.2}pp"))?;
    ensure(p > CHI2_P_MIN, format!("chi-square p = {p:.4}"))?;
    ensure(secs < 120.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} figures ({failed} exhausted): {}; max dev {worst:.2}pp, chi2 {chi2:.2}, p {p:.3}; {secs:.1}s", n, parts.join(", ")))
}

// ------------------------------------------------------------------ 6 & 7

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_geosynth")).args(args).output().expect("binary runs")
}

const SEED_6: &str = "606";

fn criterion_6(tmp: &Path) -> Verdict {
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.join(name);
        let o = run_cli(&["generate", "--figures", "100", "--seed", SEED_6, "--mock-client", "--out", out.to_str().unwrap()]);
        ensure(o.status.success(), format!("generate exited with {}", o.status))?;
        trees.push(files(&out));
    }
    ensure(trees[0].keys().eq(trees[1].keys()), "file sets differ")?;
    let differing: Vec<&String> = trees[0].iter().filter(|(k, v)| trees[1][*k] != **v).map(|(k, _)| k).collect();
    ensure(differing.is_empty(), format!("differing files: {differing:?}"))?;
    let svgs = trees[0].keys().filter(|k| k.ends_with(".svg")).count();
    ensure(trees[0].contains_key(CORPUS_FILE) && trees[0].contains_key("manifest.json") && svgs > 0, "missing outputs")?;
    Ok(format!("{} files identical across runs (JSONL, manifest, request log, {svgs} SVGs)", trees[0].len()))
}

fn criterion_7(tmp: &Path) -> Verdict {
    let dir = tmp.join("a");
    let o = run_cli(&["validate", dir.to_str().unwrap()]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
    let violations = report["violations"].as_array().map_or(usize::MAX, Vec::len);
    ensure(o.status.success() && violations == 0, format!("validate: exit {}, {violations} violations", o.status))?;
    let text = std::fs::read_to_string(dir.join(CORPUS_FILE)).map_err(|e| e.to_string())?;
    let records = read_corpus(&dir).map_err(|e| e.to_string())?;
    ensure(to_jsonl(&records) == text, "re-serialized records differ from the file")?;
    let (_, fresh) = mock_run(SEED_6.parse().unwrap(), 100);
    ensure(fresh.records == records, "records read back differ from an in-process run")?;
    let qa: usize = records.iter().map(|r| r.qa.len()).sum();
    Ok(format!("{} records / {qa} pairs: 0 violations; read-back equals written records field for field", records.len()))
}

// ------------------------------------------------------------------ 8

fn criterion_8() -> Verdict {
    let cat = bundled();
    ensure(cat.theorems.len() == 110 && cat.substrates.len() == 20, format!("{} theorems, {} substrates", cat.theorems.len(), cat.substrates.len()))?;
    for s in &cat.substrates {
        for id in &s.theorem_ids {
            ensure(cat.theorem(id).is_some(), format!("{}: unresolved theorem {id}", s.id))?;
        }
    }
    let text = cat.to_toml();
    ensure(Catalog::from_toml(&text).map_err(|e| e.to_string())? == cat, "TOML round trip changed the catalog")?;
    let base: toml::Value = toml::from_str(&text).unwrap();
    type Mutation = (&'static str, fn(&mut toml::Value));
    let mutations: Vec<Mutation> = vec![
        ("dropped theorem", |v| {
            v["theorem"].as_array_mut().unwrap().pop();
        }),
        ("dropped substrate", |v| {
            v["substrate"].as_array_mut().unwrap().pop();
        }),
        ("dangling substrate theorem id", |v| {
            v["substrate"][0]["theorems"].as_array_mut().unwrap()[0] = "no-such-theorem".into();
        }),
        ("duplicate theorem id", |v| {
            let id = v["theorem"][0]["id"].clone();
            v["theorem"][1]["id"] = id;
        }),
        ("unknown field", |v| {
            v["theorem"][0].as_table_mut().unwrap().insert("proof".into(), "trivial".into());
        }),
        ("unparsable conclusion", |v| {
            v["theorem"][0]["conclude"] = toml::Value::Array(vec!["angle(A,B) = ".into()]);
        }),
        ("unknown substrate group", |v| {
            v["substrate"][0]["group"] = "heptagon".into();
        }),
        ("unknown role", |v| {
            v["substrate"][0]["injectable"].as_array_mut().unwrap()[0] = "spiral".into();
        }),
        ("bad schema version", |v| {
            v["schema_version"] = toml::Value::Integer(99);
        }),
    ];
    let mut caught = 0;
    for (name, m) in &mutations {
        let mut v = base.clone();
        m(&mut v);
        let res = Catalog::from_toml(&toml::to_string(&v).unwrap()).and_then(|c| c.check_cardinality().map(|_| c));
        ensure(res.is_err(), format!("mutation not caught: {name}"))?;
        caught += 1;
    }
    let wrong = text.replace("angle(B,A,C) + angle(A,B,C) + angle(A,C,B) = 180", "angle(B,A,C) + angle(A,B,C) + angle(A,C,B) = 190");
    ensure(wrong != text, "semantic mutation target not found")?;
    let bad_cat = Catalog::from_toml(&wrong).map_err(|e| e.to_string())?;
    let cfg = GenerationConfig { seed: 808, ..Default::default() };
    let found = (0..200u64).any(|i| match generate_figure(&cfg, &bad_cat, i) {
        Ok(f) => !figure_facts_violations(&f, &bad_cat).1.is_empty(),
        Err(_) => true,
    });
    ensure(found, "false conclusion went unnoticed")?;
    caught += 1;
    Ok(format!("110 theorems, 20 substrates, all substrate theorem ids resolve; {caught}/{} mutated fixtures caught", mutations.len() + 1))
}

// ------------------------------------------------------------------ 9

fn criterion_9() -> Verdict {
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let cfg = GenerationConfig { seed: 909, ..Default::default() };
    let fig = (0..500u64)
        .filter_map(|i| generate_figure(&cfg, &cat, i).ok())
        .find(|f| f.description.patches.len() == 3)
        .ok_or("no 3-patch figure")?;
    let client = MockClient::new();
    let log = RequestLog::new();
    let r = Reasoner { client: &client, log: &log, pool: &pool, catalog: &cat };
    let ctx = FigureContext::new("fix", &fig, &cat);
    let steps = patch_reasoning_fusion(&r, &ctx).map_err(|e| e.to_string())?;
    ensure(steps.len() == 3 && steps.iter().all(|s| !s.malformed), "fusion did not produce three steps")?;
    let entries = log.entries();
    let prompts: Vec<&str> = (0..3)
        .map(|i| entries.iter().find(|e| e.request_id == format!("fix/fuse/{i}")).map(|e| e.prompt.as_str()))
        .collect::<Option<_>>()
        .ok_or("missing logged prompt")?;
    ensure(!prompts[0].contains("## Previous steps"), "first prompt has previous steps")?;
    let tags: BTreeMap<&str, &Vec<String>> = pool.templates.iter().map(|t| (t.id.as_str(), &t.tags)).collect();
    let mut counts = Vec::new();
    for (i, p) in prompts.iter().enumerate() {
        for s in &steps[..i] {
            ensure(p.contains(&s.statement), format!("prompt {i} lacks prior step {:?}", s.statement))?;
        }
        let examples = p.matches("### Example ").count();
        ensure(examples == 3, format!("prompt {i} has {examples} examples"))?;
        let ids: Vec<&str> = p.lines().filter_map(|l| l.strip_prefix("### Template ")).collect();
        ensure((3..=4).contains(&ids.len()), format!("prompt {i} has {} templates", ids.len()))?;
        let wanted: BTreeSet<&str> = ctx
            .theorems
            .iter()
            .map(|t| t.family.as_str())
            .chain(fig.description.patches[i].theorem_ids.iter().filter_map(|id| cat.theorem(id)).map(|t| t.family.as_str()))
            .collect();
        let score = |id: &str| tags[id].iter().filter(|t| wanted.contains(t.as_str())).count();
        let listed: Vec<usize> = ids.iter().map(|id| score(id)).collect();
        ensure(listed.windows(2).all(|w| w[0] >= w[1]), format!("prompt {i}: templates not ranked {listed:?}"))?;
        let floor = *listed.last().unwrap();
        let better_left_out = tags.keys().filter(|id| !ids.contains(id)).any(|id| score(id) > floor);
        ensure(!better_left_out, format!("prompt {i}: a more relevant template was left out"))?;
        counts.push(ids.len());
    }
    Ok(format!("3 prompts: prior steps verbatim, 3 examples each, templates {counts:?} ranked by relevance"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let checks: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("geometry oracles", Box::new(criterion_1)),
        ("fidelity filter", Box::new(criterion_2)),
        ("theorem soundness", Box::new(criterion_3)),
        ("forward filter and residual error", Box::new(criterion_4)),
        ("Group I distribution", Box::new(criterion_5)),
        ("generate determinism", Box::new(|| criterion_6(tmp.path()))),
        ("validate closure and round trip", Box::new(|| criterion_7(tmp.path()))),
        ("catalog integrity", Box::new(criterion_8)),
        ("prompt assembly", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(e.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match res {
            Ok(detail) => println!("PASS  criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
