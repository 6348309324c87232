//! Stepwise theorem-guided figure construction.
//!
//! A figure starts from a substrate consistent with sampled substrate
//! theorems, then receives line elements motivated by sampled
//! line-element theorems. Each step appends one description patch.
//! Values shown in the description come from exact coordinates.

pub mod config;
pub mod fidelity;
mod inject;
pub mod ledger;
pub mod recipes;
pub mod render;

pub use config::{distribution_preset, group_one, Canvas, FidelityConfig, GenerationConfig};
pub use fidelity::{canvas_check, fidelity_check, RejectReason, Rejection};
pub use inject::legal_anchors;
pub use ledger::{assign_values, compute_ledger, display_angle, display_length, pattern_key, PropertyLedger};
pub use render::render_svg;

use crate::catalog::{applicable_conclusions, parse_template, Catalog, Category, Substrate, TemplatePart, Theorem, VRef};
use crate::geometry::{
    construct_special_line, Annotation, AnnotationTarget, ConstructionStep, Label, Role, Scene, StepKind,
    SubstrateInstance,
};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("catalog mismatch: {0}")]
    CatalogMismatch(String),
    #[error("figure {index}: retry budget exhausted after {attempts} attempts (last failure: {last})")]
    RetryExhausted { index: u64, attempts: u32, last: String },
}

/// One description fragment per construction step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub text: String,
    pub vertices: Vec<Label>,
    pub theorem_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub patches: Vec<Patch>,
}

impl Description {
    pub fn text(&self) -> String {
        self.patches.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub index: u64,
    pub scene: Scene,
    pub description: Description,
    pub ledger: PropertyLedger,
    /// Sampled theorems, substrate category first.
    pub theorem_ids: Vec<String>,
    /// Attempts used, counting the accepted one.
    pub attempts: u32,
}

/// Random stream of figure `index`: the seed picks the key and the
/// index picks the stream, so figures can be produced in any order.
pub fn figure_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

enum Failure {
    Retry(String),
    Mismatch(String),
}

/// Generates figure `index` of the corpus described by `config`.
pub fn generate_figure(config: &GenerationConfig, catalog: &Catalog, index: u64) -> Result<Figure, EngineError> {
    config.validate(catalog).map_err(EngineError::InvalidConfig)?;
    let mut rng = figure_rng(config.seed, index);
    let keys: Vec<(&String, &f64)> = config.substrate_distribution.iter().collect();
    let dist = WeightedIndex::new(keys.iter().map(|k| *k.1)).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
    let key = keys[dist.sample(&mut rng)].0.as_str();
    let kinds = config::resolve_key(catalog, key);
    if kinds.is_empty() {
        return Err(EngineError::CatalogMismatch(format!("no substrate available for {key:?}")));
    }
    let mut last = String::new();
    for attempt in 1..=config.retry_budget {
        match attempt_figure(config, catalog, &kinds, &mut rng) {
            Ok(mut fig) => {
                let checked = fidelity_check(&fig.scene, &config.fidelity)
                    .and_then(|_| canvas_check(&fig.scene, config.canvas));
                match checked {
                    Ok(()) => {
                        fig.index = index;
                        fig.attempts = attempt;
                        return Ok(fig);
                    }
                    Err(r) => last = r.to_string(),
                }
            }
            Err(Failure::Retry(m)) => last = m,
            Err(Failure::Mismatch(m)) => return Err(EngineError::CatalogMismatch(m)),
        }
    }
    Err(EngineError::RetryExhausted {
        index,
        attempts: config.retry_budget,
        last,
    })
}

fn retry(e: impl ToString) -> Failure {
    Failure::Retry(e.to_string())
}

fn pick_by_overlap<'a, R: Rng + ?Sized>(cands: &[&'a Substrate], thms: &[&Theorem], rng: &mut R) -> &'a Substrate {
    let overlap = |s: &Substrate| thms.iter().filter(|t| s.theorem_ids.contains(&t.id)).count();
    let best = cands.iter().map(|s| overlap(s)).max().unwrap_or(0);
    let ties: Vec<&&Substrate> = cands.iter().filter(|s| overlap(s) == best).collect();
    ties.choose(rng).expect("non-empty candidates")
}

struct Builder {
    scene: Scene,
    patches: Vec<Patch>,
}

impl Builder {
    fn annotate(&mut self, targets: Vec<AnnotationTarget>) {
        for t in targets {
            if let Some(display) = ledger::display(&self.scene, &t) {
                self.scene.annotations.push(Annotation { target: t, display });
            }
        }
    }

    fn step(&mut self, kind: StepKind, text: String, vertices: Vec<Label>, primitives: Vec<usize>, ids: Vec<String>) {
        self.scene.construction_log.push(ConstructionStep {
            kind,
            theorem_ids: ids.clone(),
            vertices: vertices.clone(),
            primitives,
        });
        self.patches.push(Patch {
            text,
            vertices,
            theorem_ids: ids,
        });
    }
}

fn fill_template(scene: &Scene, inst: &SubstrateInstance, template: &str) -> Result<(String, Vec<AnnotationTarget>), String> {
    let parts = parse_template(template)?;
    let lab = |r: VRef| -> Result<Label, String> {
        match r {
            VRef::Idx(i) => inst.vertices.get(i).cloned().ok_or(format!("template index {i} out of range")),
            VRef::Center => inst.center.clone().ok_or("template uses {O} without a center".to_string()),
        }
    };
    let mut text = String::new();
    let mut targets = Vec::new();
    for part in parts {
        let target = match part {
            TemplatePart::Text(t) => {
                text.push_str(&t);
                continue;
            }
            TemplatePart::Vertex(r) => {
                text.push_str(lab(r)?.as_str());
                continue;
            }
            TemplatePart::Len(a, b) => AnnotationTarget::Length { a: lab(a)?, b: lab(b)? },
            TemplatePart::Angle(a, b, c) => AnnotationTarget::Angle { ray1: lab(a)?, vertex: lab(b)?, ray2: lab(c)? },
            TemplatePart::Radius => AnnotationTarget::Radius { center: lab(VRef::Center)? },
        };
        let value = ledger::display(scene, &target).ok_or(format!("template value {} is undefined", target.element_id()))?;
        text.push_str(&value);
        targets.push(target);
    }
    Ok((text, targets))
}

fn substrate_step<R: Rng + ?Sized>(
    b: &mut Builder,
    sub: &Substrate,
    placed: &recipes::Placed,
    ids: Vec<String>,
    rng: &mut R,
) -> Result<(), Failure> {
    let template = sub
        .templates
        .choose(rng)
        .ok_or_else(|| Failure::Mismatch(format!("substrate {} has no templates", sub.id)))?;
    let (text, targets) = fill_template(&b.scene, &placed.instance, template).map_err(Failure::Mismatch)?;
    b.annotate(targets);
    let mut vertices = placed.instance.vertices.clone();
    vertices.extend(placed.instance.center.clone());
    b.step(StepKind::Substrate { kind: sub.kind.clone() }, text, vertices, placed.primitives.clone(), ids);
    Ok(())
}

fn list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn attempt_figure<R: Rng + ?Sized>(
    config: &GenerationConfig,
    catalog: &Catalog,
    kinds: &[&Substrate],
    rng: &mut R,
) -> Result<Figure, Failure> {
    let tpc = config.theorems_per_category;
    let pool: Vec<&Theorem> = catalog
        .theorems
        .iter()
        .filter(|t| t.category == Category::Substrate && kinds.iter().any(|s| s.theorem_ids.contains(&t.id)))
        .collect();
    if pool.is_empty() {
        return Err(Failure::Mismatch(format!("no substrate theorem fits {}", kinds[0].group)));
    }
    let count = rng.gen_range(1..=tpc);
    let sub_thms: Vec<&Theorem> = pool.choose_multiple(rng, count).copied().collect();
    let sub = pick_by_overlap(kinds, &sub_thms, rng);
    let line_pool: Vec<&Theorem> = catalog
        .theorems
        .iter()
        .filter(|t| t.category == Category::LineElement && t.motivates.iter().any(|r| sub.injectable.contains(r)))
        .collect();
    if line_pool.is_empty() {
        return Err(Failure::Mismatch(format!("no line-element theorem fits {}", sub.kind)));
    }
    let count = rng.gen_range(1..=tpc);
    let line_thms: Vec<&Theorem> = line_pool.choose_multiple(rng, count).copied().collect();

    let mut b = Builder {
        scene: Scene::new(),
        patches: Vec::new(),
    };
    let local = recipes::local_shape(sub, rng).map_err(retry)?;
    let placed = recipes::place(&mut b.scene, sub, &local, rng, config.canvas).map_err(retry)?;
    let ids_for = |s: &Substrate| -> Vec<String> {
        sub_thms
            .iter()
            .filter(|t| s.theorem_ids.contains(&t.id))
            .map(|t| t.id.clone())
            .collect()
    };
    substrate_step(&mut b, sub, &placed, ids_for(sub), rng)?;
    #[cfg_attr(not(feature = "multi-substrate"), allow(unused_mut))]
    let mut angles = placed.angles.clone();
    #[cfg_attr(not(feature = "multi-substrate"), allow(unused_mut))]
    let mut injectable = sub.injectable.clone();

    #[cfg(feature = "multi-substrate")]
    for _ in 1..config.n {
        let (extra, more) = glue_round(&mut b, catalog, &sub_thms, rng)?;
        substrate_step(&mut b, extra, &more, ids_for(extra), rng)?;
        angles.extend(more.angles);
        for r in &extra.injectable {
            if !injectable.contains(r) {
                injectable.push(*r);
            }
        }
    }

    let k = config.k.unwrap_or_else(|| rng.gen_range(1..=3));
    for _ in 0..k {
        inject_round(&mut b, &line_thms, &line_pool, &injectable, rng)?;
    }

    let targets: Vec<AnnotationTarget> = angles
        .iter()
        .map(|[p, v, q]| AnnotationTarget::Angle { ray1: p.clone(), vertex: v.clone(), ray2: q.clone() })
        .collect();
    let parts: Vec<String> = targets
        .iter()
        .filter_map(|t| {
            let AnnotationTarget::Angle { ray1, vertex, ray2 } = t else { return None };
            ledger::display(&b.scene, t).map(|d| format!("∠{ray1}{vertex}{ray2} = {d}"))
        })
        .collect();
    let mut vertices: Vec<Label> = Vec::new();
    for [p, v, q] in &angles {
        for l in [v, p, q] {
            if !vertices.contains(l) {
                vertices.push(l.clone());
            }
        }
    }
    let ids = b.scene.construction_log[0].theorem_ids.clone();
    b.annotate(targets);
    b.step(StepKind::Angles, format!("{}.", list(&parts)), vertices, Vec::new(), ids);

    assign_values(&mut b.scene);
    let ledger = compute_ledger(&b.scene);
    Ok(Figure {
        index: 0,
        scene: b.scene,
        description: Description { patches: b.patches },
        ledger,
        theorem_ids: sub_thms.iter().chain(&line_thms).map(|t| t.id.clone()).collect(),
        attempts: 0,
    })
}

/// Tries at most this many constructible anchors per role while looking
/// for one that makes the motivating theorem applicable.
const ANCHOR_PROBES: usize = 6;

fn inject_round<R: Rng + ?Sized>(
    b: &mut Builder,
    line_thms: &[&Theorem],
    line_pool: &[&Theorem],
    injectable: &[Role],
    rng: &mut R,
) -> Result<(), Failure> {
    let thm = *line_thms.choose(rng).expect("sampled at least one");
    let mut roles: Vec<Role> = thm.motivates.iter().copied().filter(|r| injectable.contains(r)).collect();
    roles.shuffle(rng);
    let mut rest: Vec<Role> = injectable.iter().copied().filter(|r| !roles.contains(r)).collect();
    rest.shuffle(rng);
    roles.extend(rest);

    for role in roles {
        let mut anchors = legal_anchors(&b.scene, role, rng);
        anchors.shuffle(rng);
        let motivating = if thm.motivates.contains(&role) {
            Some(thm)
        } else {
            line_pool.iter().copied().find(|t| t.motivates.contains(&role))
        };
        let mut fallback = None;
        let mut probes = 0;
        for anchor in anchors {
            let mut trial = b.scene.clone();
            let Ok(c) = construct_special_line(&mut trial, role, &anchor) else { continue };
            let grounded = motivating.is_some_and(|t| !applicable_conclusions(t, &trial).is_empty());
            if grounded {
                fallback = Some((trial, c, anchor));
                break;
            }
            if fallback.is_none() {
                fallback = Some((trial, c, anchor));
            }
            probes += 1;
            if probes >= ANCHOR_PROBES {
                break;
            }
        }
        if let Some((trial, c, anchor)) = fallback {
            b.scene = trial;
            let (text, targets) = inject::describe(&b.scene, role, &anchor, &c);
            b.annotate(targets);
            let mut vertices = vec![c.from.clone(), c.to.clone()];
            vertices.extend(c.crossings.iter().cloned());
            let ids = motivating.map(|t| vec![t.id.clone()]).unwrap_or_default();
            b.step(StepKind::Injection { role }, text, vertices, vec![c.primitive], ids);
            return Ok(());
        }
    }
    Err(Failure::Retry("no legal injection position".into()))
}

#[cfg(feature = "multi-substrate")]
fn glue_round<'c, R: Rng + ?Sized>(
    b: &mut Builder,
    catalog: &'c Catalog,
    sub_thms: &[&Theorem],
    rng: &mut R,
) -> Result<(&'c Substrate, recipes::Placed), Failure> {
    use crate::geometry::centroid;
    let polygons: Vec<&Substrate> = catalog
        .substrates
        .iter()
        .filter(|s| crate::catalog::kind_shape(&s.kind).is_some_and(|(n, c)| n >= 3 && !c))
        .collect();
    let extra = pick_by_overlap(&polygons, sub_thms, rng);
    let mut sides = Vec::new();
    for s in b.scene.substrates.iter().filter(|s| s.center.is_none()) {
        let m = s.vertices.len();
        for i in 0..m {
            sides.push((s.vertices[i].clone(), s.vertices[(i + 1) % m].clone()));
        }
    }
    let (a, c) = sides.choose(rng).cloned().ok_or_else(|| retry("no side to glue onto"))?;
    let away = centroid(&b.scene.vertices().iter().map(|v| v.point).collect::<Vec<_>>());
    let local = recipes::local_shape(extra, rng).map_err(retry)?;
    let placed = recipes::glue(&mut b.scene, extra, &local, &a, &c, away).map_err(retry)?;
    Ok((extra, placed))
}
