//! Step-wise augmentation of an existing chain-of-thought Q&A corpus:
//! full analysis, segmentation into steps, one new pair per step.

use super::DatasetError;
use crate::reasoner::parse::{parse_analysis, parse_qa, parse_steps};
use crate::reasoner::prompt::fill;
use crate::reasoner::{classify_question, filter_qa, PipelineError, QaPair, QaStatus, QuestionType, Reasoner};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

/// One row of the external corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceItem {
    pub id: String,
    pub question: String,
    pub cot_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

/// Reads source rows. Rows that do not parse or have an empty question
/// are skipped and reported as warnings.
pub fn read_sources(path: &Path) -> Result<(Vec<SourceItem>, Vec<String>), DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SourceItem>(line) {
            Ok(s) if s.question.trim().is_empty() || s.cot_answer.trim().is_empty() => {
                warnings.push(format!("{}:{}: empty question or answer, skipped", path.display(), i + 1))
            }
            Ok(s) => items.push(s),
            Err(e) => warnings.push(format!("{}:{}: {e}, skipped", path.display(), i + 1)),
        }
    }
    Ok((items, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub source_id: String,
    pub source_question: String,
    pub source_answer: String,
    pub analysis: String,
    pub steps: Vec<String>,
    /// One pair per usable step; `chain` holds the step index.
    pub qa: Vec<QaPair>,
}

#[derive(Debug, Default)]
pub struct AugmentOutcome {
    pub records: Vec<AugmentationRecord>,
    /// Replies unusable after the re-ask.
    pub malformed: u64,
    /// Generated questions dropped for repeating a source question.
    pub duplicates: u64,
    pub rejected: BTreeMap<String, u64>,
    pub errors: Vec<String>,
}

struct ItemResult {
    record: Option<AugmentationRecord>,
    malformed: u64,
    duplicates: u64,
    rejected: Vec<String>,
    error: Option<String>,
}

fn parse_type(kind: &str, answer: &str) -> QuestionType {
    QuestionType::ALL
        .into_iter()
        .find(|t| t.as_str().eq_ignore_ascii_case(kind.trim()))
        .unwrap_or_else(|| classify_question(answer))
}

fn one(r: &Reasoner, item: &SourceItem, sources: &BTreeSet<&str>, strict: bool) -> Result<ItemResult, PipelineError> {
    let mut res = ItemResult { record: None, malformed: 0, duplicates: 0, rejected: Vec::new(), error: None };
    let prefix = format!("aug/{}", item.id);
    let sk = &r.pool.skeletons;
    let values = BTreeMap::from([("QUESTION", item.question.clone()), ("ANSWER", item.cot_answer.clone())]);
    let analysis = match r.ask_parsed(&format!("{prefix}/analysis"), &fill(&sk.augment_analysis, &values), parse_analysis)? {
        Ok(a) => a,
        Err(_) => {
            res.malformed += 1;
            return Ok(res);
        }
    };
    let values = BTreeMap::from([("ANALYSIS", analysis.clone())]);
    let steps = match r.ask_parsed(&format!("{prefix}/segment"), &fill(&sk.augment_segment, &values), parse_steps)? {
        Ok(s) => s,
        Err(_) => {
            res.malformed += 1;
            return Ok(res);
        }
    };
    let mut qa = Vec::new();
    for (k, step) in steps.iter().enumerate() {
        let values = BTreeMap::from([("QUESTION", item.question.clone()), ("STEP", step.clone())]);
        match r.ask_parsed(&format!("{prefix}/qa/{k}"), &fill(&sk.augment_qa, &values), parse_qa)? {
            Ok(b) if sources.contains(b.question.as_str()) => res.duplicates += 1,
            Ok(b) => qa.push(QaPair {
                qtype: parse_type(&b.kind, &b.answer),
                question: b.question,
                answer: b.answer,
                chain: vec![k],
                status: QaStatus::Candidate,
            }),
            Err(_) => res.malformed += 1,
        }
    }
    if strict {
        let out = filter_qa(r, &prefix, qa, &[], None);
        if out.incomplete {
            res.error = Some(format!("{}: a judge request failed", item.id));
        }
        qa = Vec::new();
        for p in out.pairs {
            match p.status {
                QaStatus::Accepted => qa.push(p),
                QaStatus::Rejected { reason } => res.rejected.push(reason.to_string()),
                QaStatus::Candidate => {}
            }
        }
    }
    res.record = Some(AugmentationRecord {
        source_id: item.id.clone(),
        source_question: item.question.clone(),
        source_answer: item.cot_answer.clone(),
        analysis,
        steps,
        qa,
    });
    Ok(res)
}

/// Runs the three stages for every item. Without `strict` the new pairs
/// are left as candidates; with it they go through the answerability
/// judge and only accepted pairs are kept.
pub fn augment_corpus(r: &Reasoner, items: &[SourceItem], strict: bool) -> AugmentOutcome {
    let sources: BTreeSet<&str> = items.iter().map(|s| s.question.as_str()).collect();
    let results: Vec<Result<ItemResult, PipelineError>> =
        items.par_iter().map(|item| one(r, item, &sources, strict)).collect();
    let mut out = AugmentOutcome::default();
    for (item, res) in items.iter().zip(results) {
        match res {
            Ok(res) => {
                out.malformed += res.malformed;
                out.duplicates += res.duplicates;
                for reason in res.rejected {
                    *out.rejected.entry(reason).or_default() += 1;
                }
                out.errors.extend(res.error);
                out.records.extend(res.record);
            }
            Err(e) => out.errors.push(format!("{}: {e}", item.id)),
        }
    }
    out
}
