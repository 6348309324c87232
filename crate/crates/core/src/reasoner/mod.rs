//! Chained reasoning over description patches, answer-constrained
//! question generation and bidirectional Q&A filtering.

pub mod client;
pub mod mock;
pub mod parse;
pub mod prompt;
pub mod validate;

pub use client::{
    prompt_hash, ClientError, ClientSettings, Completion, CompletionClient, HttpClient, LogEntry, MockClient, RequestLog,
};
pub use parse::NumericClaim;
pub use prompt::{select_prompt_context, PromptContext, PromptTemplatePool};
pub use validate::{validate_answer, validate_step, Grounding, Residual, Taxonomy};

use crate::catalog::{conclusions_in, Catalog, Fact, MatchContext, Theorem};
use crate::engine::{Figure, Patch, PropertyLedger};
use crate::geometry::{Label, Scene};
use parse::{extract_numeric_claims, parse_qa, parse_step, parse_verdict};
use prompt::{fill, render_examples, render_knowledge, render_prior, render_question_examples, render_templates, render_theorems};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use thiserror::Error;

/// Facts offered per patch prompt.
pub const FACTS_PER_PATCH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub index: usize,
    /// Index of the source patch.
    pub patch: usize,
    pub statement: String,
    pub theorem_ids: Vec<String>,
    pub numeric_claims: Vec<NumericClaim>,
    /// Every claim as written in the response.
    pub claims: Vec<String>,
    /// The last claim; `None` when the step only restates givens.
    pub conclusion: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub malformed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionType {
    SideLength,
    Angle,
    Area,
    GeometricRelationship,
}

impl QuestionType {
    pub const ALL: [QuestionType; 4] =
        [QuestionType::SideLength, QuestionType::Angle, QuestionType::Area, QuestionType::GeometricRelationship];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::SideLength => "side length",
            QuestionType::Angle => "angle",
            QuestionType::Area => "area",
            QuestionType::GeometricRelationship => "geometric relationship",
        }
    }
}

/// Keyword rules over the target claim.
pub fn classify_question(target: &str) -> QuestionType {
    let lower = target.to_lowercase();
    if lower.contains("area") {
        return QuestionType::Area;
    }
    let numeric = extract_numeric_claims(target);
    if let Some(c) = numeric.first() {
        return if c.element.starts_with('∠') { QuestionType::Angle } else { QuestionType::SideLength };
    }
    let has_digit = target.chars().any(|c| c.is_ascii_digit());
    if has_digit && (target.contains('°') || lower.contains("angle")) {
        QuestionType::Angle
    } else if has_digit && (lower.contains("length") || lower.contains("side")) {
        QuestionType::SideLength
    } else {
        QuestionType::GeometricRelationship
    }
}

/// Vertex labels named in free text.
pub fn mentioned_labels(text: &str) -> BTreeSet<Label> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\b[A-Z][A-Z0-9]*\b").expect("valid pattern"));
    re.find_iter(text)
        .filter_map(|m| Label::split_run(m.as_str()))
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum QaStatus {
    Candidate,
    Accepted,
    Rejected { reason: Taxonomy },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
    /// Indices of the supporting reasoning steps.
    pub chain: Vec<usize>,
    #[serde(rename = "type")]
    pub qtype: QuestionType,
    #[serde(flatten)]
    pub status: QaStatus,
}

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("request {request_id}: {source}")]
    Client { request_id: String, source: ClientError },
    #[error("description has no patches")]
    EmptyDescription,
}

/// Shared handles for every client call.
pub struct Reasoner<'a> {
    pub client: &'a dyn CompletionClient,
    pub log: &'a RequestLog,
    pub pool: &'a PromptTemplatePool,
    pub catalog: &'a Catalog,
}

impl Reasoner<'_> {
    /// Sends one logged request.
    pub fn ask(&self, request_id: &str, prompt: &str) -> Result<String, PipelineError> {
        let res = self.client.complete(prompt);
        let (response, error, latency_ms) = match &res {
            Ok(c) => (Some(c.text.clone()), None, c.latency_ms),
            Err(e) => (None, Some(e.to_string()), 0),
        };
        self.log.push(LogEntry {
            request_id: request_id.to_string(),
            prompt_hash: prompt_hash(prompt),
            prompt: prompt.to_string(),
            response,
            error,
            latency_ms,
        });
        res.map(|c| c.text)
            .map_err(|source| PipelineError::Client { request_id: request_id.to_string(), source })
    }

    /// Sends a request and parses the reply, re-asking once with a
    /// format reminder. The inner error is the last parse failure.
    pub(crate) fn ask_parsed<T>(
        &self,
        request_id: &str,
        prompt: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Result<T, String>, PipelineError> {
        let first = parse(&self.ask(request_id, prompt)?);
        let Err(e) = first else { return Ok(first) };
        let again = format!(
            "{prompt}\n\n## Format reminder\nYour previous reply could not be used ({e}). Reply with exactly one fenced block in the format described above.\n"
        );
        Ok(parse(&self.ask(&format!("{request_id}/retry1"), &again)?))
    }
}

/// A generated figure prepared for reasoning.
pub struct FigureContext<'a> {
    pub id: String,
    pub scene: &'a Scene,
    pub ledger: &'a PropertyLedger,
    pub patches: &'a [Patch],
    /// Theorems offered to the model: the sampled ones, those cited by
    /// construction steps and those of the substrate.
    pub theorems: Vec<&'a Theorem>,
    pub facts: Vec<Fact>,
}

impl<'a> FigureContext<'a> {
    pub fn new(id: impl Into<String>, figure: &'a Figure, catalog: &'a Catalog) -> Self {
        let mut ids: Vec<&str> = figure.theorem_ids.iter().map(String::as_str).collect();
        ids.extend(figure.description.patches.iter().flat_map(|p| p.theorem_ids.iter().map(String::as_str)));
        for s in &figure.scene.substrates {
            if let Some(sub) = catalog.substrate_by_kind(&s.kind) {
                ids.extend(sub.theorem_ids.iter().map(String::as_str));
            }
        }
        let mut seen = BTreeSet::new();
        let theorems: Vec<&Theorem> =
            ids.into_iter().filter(|id| seen.insert(*id)).filter_map(|id| catalog.theorem(id)).collect();
        let facts = if figure.scene.vertices().is_empty() {
            Vec::new()
        } else {
            let ctx = MatchContext::new(&figure.scene);
            let mut keys = BTreeSet::new();
            theorems.iter().flat_map(|t| conclusions_in(&ctx, t, &mut keys)).collect()
        };
        Self {
            id: id.into(),
            scene: &figure.scene,
            ledger: &figure.ledger,
            patches: &figure.description.patches,
            theorems,
            facts,
        }
    }

    fn families(&self, ids: &[String]) -> Vec<String> {
        ids.iter()
            .filter_map(|id| self.theorems.iter().find(|t| &t.id == id).map(|t| t.family.clone()))
            .collect()
    }

    /// Facts about patch `i`: every label already introduced and at least
    /// one named by the patch. Each fact is offered once per figure.
    fn patch_facts(&self, i: usize, used: &mut BTreeSet<usize>) -> Vec<(String, String)> {
        let known: BTreeSet<&Label> = self.patches[..=i].iter().flat_map(|p| &p.vertices).collect();
        let here: BTreeSet<&Label> = self.patches[i].vertices.iter().collect();
        let mut out = Vec::new();
        for (k, f) in self.facts.iter().enumerate() {
            if out.len() == FACTS_PER_PATCH {
                break;
            }
            let labels = f.statement.labels();
            if used.contains(&k) || !labels.iter().all(|l| known.contains(l)) || !labels.iter().any(|l| here.contains(l)) {
                continue;
            }
            used.insert(k);
            out.push((f.theorem_id.clone(), f.text()));
        }
        out
    }
}

/// Reasons over the patches in order; each prompt carries all earlier
/// steps. Stops at the first malformed step, which ends the chain.
pub fn patch_reasoning_fusion(r: &Reasoner, fig: &FigureContext) -> Result<Vec<ReasoningStep>, PipelineError> {
    if fig.patches.is_empty() {
        return Err(PipelineError::EmptyDescription);
    }
    let mut steps: Vec<ReasoningStep> = Vec::new();
    let mut used = BTreeSet::new();
    for (i, patch) in fig.patches.iter().enumerate() {
        let ctx = select_prompt_context(r.pool, &fig.theorems, &fig.families(&patch.theorem_ids));
        let facts = fig.patch_facts(i, &mut used);
        let values = BTreeMap::from([
            ("PATCH", patch.text.clone()),
            ("PRIOR_STEPS", render_prior(&steps)),
            ("THEOREMS", render_theorems(&fig.theorems, &facts)),
            ("EXAMPLES", render_examples(&ctx)),
            ("KNOWLEDGE", render_knowledge(&ctx)),
            ("TEMPLATES", render_templates(&ctx)),
        ]);
        let prompt = fill(&r.pool.skeletons.reasoning, &values);
        let step = match r.ask_parsed(&format!("{}/fuse/{i}", fig.id), &prompt, parse_step)? {
            Ok(b) => ReasoningStep {
                index: i,
                patch: i,
                statement: b.statement,
                theorem_ids: b.theorem_ids,
                numeric_claims: b.numeric,
                conclusion: b.claims.last().map(|c| c.friendly()),
                claims: b.claims.iter().map(|c| c.friendly()).collect(),
                malformed: false,
            },
            Err(e) => ReasoningStep {
                index: i,
                patch: i,
                statement: e,
                theorem_ids: Vec::new(),
                numeric_claims: Vec::new(),
                claims: Vec::new(),
                conclusion: None,
                malformed: true,
            },
        };
        let stop = step.malformed;
        steps.push(step);
        if stop {
            break;
        }
    }
    Ok(steps)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReverseOutcome {
    pub pairs: Vec<QaPair>,
    /// Steps refused by the validator, with the failing check.
    pub gated: Vec<(usize, Residual)>,
    /// Question replies still unusable after the re-ask.
    pub malformed: usize,
}

/// Asks for one question per validated step whose answer is the step's
/// conclusion. Steps failing validation get no question.
pub fn reverse_question_generation(
    r: &Reasoner,
    fig: &FigureContext,
    g: &Grounding,
    chain: &[ReasoningStep],
) -> Result<ReverseOutcome, PipelineError> {
    let mut out = ReverseOutcome::default();
    for (i, step) in chain.iter().enumerate() {
        if step.malformed {
            continue;
        }
        if let Err(res) = validate_step(step, g) {
            out.gated.push((i, res));
            continue;
        }
        let Some(conclusion) = &step.conclusion else { continue };
        let patch = &fig.patches[step.patch.min(fig.patches.len() - 1)];
        let ctx = select_prompt_context(r.pool, &fig.theorems, &fig.families(&patch.theorem_ids));
        let conditions: Vec<&str> = fig.patches[..=step.patch].iter().map(|p| p.text.as_str()).collect();
        let values = BTreeMap::from([
            ("PATCH", conditions.join("\n")),
            ("PRIOR_STEPS", render_prior(&chain[..=i])),
            ("CONCLUSION", conclusion.clone()),
            ("EXAMPLES", render_question_examples(&ctx)),
        ]);
        let prompt = fill(&r.pool.skeletons.question, &values);
        match r.ask_parsed(&format!("{}/question/{i}", fig.id), &prompt, parse_qa)? {
            Ok(qa) => out.pairs.push(QaPair {
                question: qa.question,
                answer: conclusion.clone(),
                chain: (0..=i).collect(),
                qtype: classify_question(conclusion),
                status: QaStatus::Candidate,
            }),
            Err(_) => out.malformed += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub pairs: Vec<QaPair>,
    /// A client failure left some pair undecided.
    pub incomplete: bool,
}

/// Forward pass against the figure, then one reverse answerability call
/// per surviving pair. Without grounding only the reverse pass runs.
pub fn filter_qa(
    r: &Reasoner,
    request_prefix: &str,
    pairs: Vec<QaPair>,
    chain: &[ReasoningStep],
    g: Option<&Grounding>,
) -> FilterOutcome {
    let mut incomplete = false;
    let mut out = Vec::with_capacity(pairs.len());
    for (k, mut pair) in pairs.into_iter().enumerate() {
        if pair.status != QaStatus::Candidate {
            out.push(pair);
            continue;
        }
        if let Some(g) = g {
            let forward = pair
                .chain
                .iter()
                .try_for_each(|&j| match chain.get(j) {
                    Some(s) => validate_step(s, g),
                    None => Err(Residual {
                        reason: Taxonomy::DiagramTextMismatch,
                        detail: format!("supporting step {j} does not exist"),
                        residual: None,
                    }),
                })
                .and_then(|_| validate_answer(&pair.answer, g));
            if let Err(res) = forward {
                pair.status = QaStatus::Rejected { reason: res.reason };
                out.push(pair);
                continue;
            }
        }
        let values = BTreeMap::from([("QUESTION", pair.question.clone()), ("ANSWER", pair.answer.clone())]);
        let prompt = fill(&r.pool.skeletons.judge, &values);
        match r.ask_parsed(&format!("{request_prefix}/judge/{k}"), &prompt, parse_verdict) {
            Ok(Ok(true)) => pair.status = QaStatus::Accepted,
            Ok(Ok(false)) | Ok(Err(_)) => {
                pair.status = QaStatus::Rejected { reason: Taxonomy::AnswerabilityAmbiguity }
            }
            Err(_) => incomplete = true,
        }
        out.push(pair);
    }
    FilterOutcome { pairs: out, incomplete }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutcome {
    pub steps: Vec<ReasoningStep>,
    /// Every generated pair with its final status.
    pub pairs: Vec<QaPair>,
    pub gated: Vec<(usize, Residual)>,
    /// Malformed replies that cost the figure its pairs or a question.
    pub malformed: usize,
    pub incomplete: bool,
}

impl FigureOutcome {
    pub fn accepted(&self) -> impl Iterator<Item = &QaPair> {
        self.pairs.iter().filter(|p| p.status == QaStatus::Accepted)
    }
}

/// Fusion, reverse generation and filtering for one figure. A malformed
/// reasoning step rejects the whole figure.
pub fn process_figure(r: &Reasoner, fig: &FigureContext) -> Result<FigureOutcome, PipelineError> {
    let steps = patch_reasoning_fusion(r, fig)?;
    if steps.iter().any(|s| s.malformed) {
        return Ok(FigureOutcome { steps, pairs: Vec::new(), gated: Vec::new(), malformed: 1, incomplete: false });
    }
    let g = Grounding::new(fig.scene, fig.ledger, r.catalog);
    let rev = reverse_question_generation(r, fig, &g, &steps)?;
    let filtered = filter_qa(r, &fig.id, rev.pairs, &steps, Some(&g));
    Ok(FigureOutcome {
        steps,
        pairs: filtered.pairs,
        gated: rev.gated,
        malformed: rev.malformed,
        incomplete: filtered.incomplete,
    })
}
