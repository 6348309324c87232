//! End-to-end generation: engine, reasoner and filter per figure.

use super::{figure_id, image_path, DatasetRecord};
use crate::catalog::Catalog;
use crate::engine::{generate_figure, pattern_key, EngineError, GenerationConfig};
use crate::reasoner::{
    process_figure, CompletionClient, FigureContext, PromptTemplatePool, QaPair, QaStatus, Reasoner, RequestLog,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub figures_requested: u64,
    pub figures_generated: u64,
    /// Attempts discarded by the fidelity and canvas checks.
    pub fidelity_rejected: u64,
    /// Figures whose retry budget ran out.
    pub figures_exhausted: u64,
    pub figures_malformed: u64,
    pub figures_without_qa: u64,
    pub records_written: u64,
    pub qa_candidates: u64,
    pub qa_accepted: u64,
    /// Steps refused by the validator before question generation.
    pub gate_rejected: BTreeMap<String, u64>,
    /// Pairs rejected by the filter, by reason.
    pub filter_rejected: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub figures: u64,
    /// Worker threads; 0 means one per logical CPU.
    pub jobs: usize,
    /// Generate figures and ledgers only, without client calls.
    pub dry_run: bool,
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub records: Vec<DatasetRecord>,
    pub counts: Counts,
    pub complete: bool,
    pub errors: Vec<String>,
}

enum Item {
    Record(Box<DatasetRecord>, FigureTally),
    Skipped(FigureTally),
    Failed(String, FigureTally),
}

#[derive(Default)]
struct FigureTally {
    retries: u64,
    generated: bool,
    exhausted: bool,
    malformed: bool,
    no_qa: bool,
    incomplete: bool,
    candidates: u64,
    gate: Vec<String>,
    filter: Vec<String>,
}

fn one(
    index: u64,
    config: &GenerationConfig,
    catalog: &Catalog,
    reasoner: &Reasoner,
    dry_run: bool,
) -> Item {
    let mut t = FigureTally::default();
    let fig = match generate_figure(config, catalog, index) {
        Ok(f) => f,
        Err(EngineError::RetryExhausted { attempts, .. }) => {
            t.retries = attempts as u64;
            t.exhausted = true;
            return Item::Skipped(t);
        }
        Err(e) => return Item::Failed(e.to_string(), t),
    };
    t.generated = true;
    t.retries = fig.attempts as u64 - 1;
    let id = figure_id(index);
    let (steps, qa) = if dry_run {
        (Vec::new(), Vec::new())
    } else {
        let ctx = FigureContext::new(id.clone(), &fig, catalog);
        let out = match process_figure(reasoner, &ctx) {
            Ok(o) => o,
            Err(e) => {
                t.incomplete = true;
                return Item::Failed(format!("{id}: {e}"), t);
            }
        };
        t.malformed = out.malformed > 0 && out.steps.iter().any(|s| s.malformed);
        t.incomplete = out.incomplete;
        t.candidates = out.pairs.len() as u64;
        t.gate = out.gated.iter().map(|(_, r)| r.reason.to_string()).collect();
        t.filter = out
            .pairs
            .iter()
            .filter_map(|p| match p.status {
                QaStatus::Rejected { reason } => Some(reason.to_string()),
                _ => None,
            })
            .collect();
        if out.incomplete {
            return Item::Failed(format!("{id}: a filter request failed"), t);
        }
        let qa: Vec<QaPair> = out.pairs.into_iter().filter(|p| p.status == QaStatus::Accepted).collect();
        if qa.is_empty() {
            t.no_qa = true;
            return Item::Skipped(t);
        }
        (out.steps, qa)
    };
    let record = DatasetRecord {
        image: image_path(&id),
        figure_id: id,
        description: fig.description.text(),
        patches: fig.description.patches.clone(),
        ledger: fig.ledger.clone(),
        steps,
        qa,
        theorems: fig.theorem_ids.clone(),
        substrates: fig.scene.substrates.iter().map(|s| s.kind.clone()).collect(),
        pattern: pattern_key(&fig.scene),
        scene: fig.scene,
    };
    Item::Record(Box::new(record), t)
}

/// Generates figures `0..figures` on a worker pool. Results are merged
/// in figure order, so output does not depend on scheduling.
pub fn run_generation(
    config: &GenerationConfig,
    catalog: &Catalog,
    pool: &PromptTemplatePool,
    client: &dyn CompletionClient,
    log: &RequestLog,
    opts: &RunOptions,
) -> RunOutput {
    let mut out = RunOutput { complete: true, ..Default::default() };
    out.counts.figures_requested = opts.figures;
    if let Err(e) = config.validate(catalog) {
        out.errors.push(format!("invalid generation config: {e}"));
        out.complete = false;
        return out;
    }
    let reasoner = Reasoner { client, log, pool, catalog };
    let threads = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build();
    let work = || -> Vec<Item> {
        (0..opts.figures)
            .into_par_iter()
            .map(|i| one(i, config, catalog, &reasoner, opts.dry_run))
            .collect()
    };
    let items = match threads {
        Ok(p) => p.install(work),
        Err(_) => work(),
    };
    let c = &mut out.counts;
    for item in items {
        let t = match item {
            Item::Record(r, t) => {
                c.records_written += 1;
                c.qa_accepted += r.qa.len() as u64;
                out.records.push(*r);
                t
            }
            Item::Skipped(t) => t,
            Item::Failed(e, t) => {
                out.errors.push(e);
                out.complete = false;
                t
            }
        };
        c.fidelity_rejected += t.retries;
        c.figures_generated += t.generated as u64;
        c.figures_exhausted += t.exhausted as u64;
        c.figures_malformed += t.malformed as u64;
        c.figures_without_qa += t.no_qa as u64;
        c.qa_candidates += t.candidates;
        if t.incomplete {
            out.complete = false;
        }
        for g in t.gate {
            *c.gate_rejected.entry(g).or_default() += 1;
        }
        for f in t.filter {
            *c.filter_rejected.entry(f).or_default() += 1;
        }
    }
    out
}
