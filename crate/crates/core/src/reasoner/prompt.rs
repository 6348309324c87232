//! Template pool, relevance ranking and prompt assembly.

use super::ReasoningStep;
use crate::catalog::Theorem;
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

/// Contextual examples per prompt.
pub const EXAMPLES_PER_PROMPT: usize = 3;
pub const MIN_TEMPLATES: usize = 3;
pub const MAX_TEMPLATES: usize = 4;
pub const MAX_KNOWLEDGE: usize = 3;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("pool.toml: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub id: String,
    pub tags: Vec<String>,
    pub problem: String,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knowledge {
    pub id: String,
    pub tags: Vec<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example {
    pub id: String,
    pub tags: Vec<String>,
    pub patch: String,
    /// A ```step response to `patch`.
    pub response: String,
    /// A ```qa response built on the step's conclusion.
    pub qa: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPool {
    #[serde(default)]
    template: Vec<Template>,
    #[serde(default)]
    knowledge: Vec<Knowledge>,
    #[serde(default)]
    example: Vec<Example>,
}

/// Prompt skeletons with `{NAME}` placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeletons {
    pub reasoning: String,
    pub question: String,
    pub judge: String,
    pub augment_analysis: String,
    pub augment_segment: String,
    pub augment_qa: String,
}

const SKELETON_FILES: [&str; 6] = [
    "reasoning.txt",
    "question.txt",
    "judge.txt",
    "augment_analysis.txt",
    "augment_segment.txt",
    "augment_qa.txt",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplatePool {
    pub templates: Vec<Template>,
    pub knowledge: Vec<Knowledge>,
    pub examples: Vec<Example>,
    pub skeletons: Skeletons,
}

impl PromptTemplatePool {
    pub fn bundled() -> Self {
        let files = [
            include_str!("../../assets/prompts/reasoning.txt"),
            include_str!("../../assets/prompts/question.txt"),
            include_str!("../../assets/prompts/judge.txt"),
            include_str!("../../assets/prompts/augment_analysis.txt"),
            include_str!("../../assets/prompts/augment_segment.txt"),
            include_str!("../../assets/prompts/augment_qa.txt"),
        ];
        Self::from_parts(include_str!("../../assets/prompts/pool.toml"), files.map(String::from))
            .expect("bundled prompt pool is valid")
    }

    /// Loads `pool.toml` and the skeleton files from a directory.
    pub fn load(dir: &Path) -> Result<Self, PoolError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| PoolError::Io { path: path.display().to_string(), source })
        };
        let pool = read("pool.toml")?;
        let mut files: [String; 6] = Default::default();
        for (slot, name) in files.iter_mut().zip(SKELETON_FILES) {
            *slot = read(name)?;
        }
        Self::from_parts(&pool, files)
    }

    fn from_parts(pool: &str, files: [String; 6]) -> Result<Self, PoolError> {
        let raw: RawPool = toml::from_str(pool).map_err(|e| PoolError::Parse(e.to_string()))?;
        let [reasoning, question, judge, augment_analysis, augment_segment, augment_qa] = files;
        let p = PromptTemplatePool {
            templates: raw.template,
            knowledge: raw.knowledge,
            examples: raw.example,
            skeletons: Skeletons { reasoning, question, judge, augment_analysis, augment_segment, augment_qa },
        };
        if p.examples.len() < EXAMPLES_PER_PROMPT {
            return Err(PoolError::Invalid(format!("need at least {EXAMPLES_PER_PROMPT} examples")));
        }
        let mut ids = BTreeSet::new();
        let entries = p
            .templates
            .iter()
            .map(|t| (&t.id, &t.tags))
            .chain(p.knowledge.iter().map(|k| (&k.id, &k.tags)))
            .chain(p.examples.iter().map(|e| (&e.id, &e.tags)));
        for (id, tags) in entries {
            if !ids.insert(id) {
                return Err(PoolError::Invalid(format!("duplicate pool id {id}")));
            }
            if tags.is_empty() {
                return Err(PoolError::Invalid(format!("{id} has no tags")));
            }
        }
        Ok(p)
    }

    /// Every entry must carry at least one tag from `families`.
    pub fn check_tags(&self, families: &BTreeSet<&str>) -> Result<(), PoolError> {
        let entries = self
            .templates
            .iter()
            .map(|t| (&t.id, &t.tags))
            .chain(self.knowledge.iter().map(|k| (&k.id, &k.tags)))
            .chain(self.examples.iter().map(|e| (&e.id, &e.tags)));
        for (id, tags) in entries {
            if !tags.iter().any(|t| families.contains(t.as_str())) {
                return Err(PoolError::Invalid(format!("{id} has no tag from the theorem families")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext<'p> {
    pub templates: Vec<&'p Template>,
    pub knowledge: Vec<&'p Knowledge>,
    pub examples: Vec<&'p Example>,
}

fn overlap(tags: &[String], wanted: &BTreeSet<&str>) -> usize {
    tags.iter().filter(|t| wanted.contains(t.as_str())).count()
}

/// Ranks by descending tag overlap, then id.
fn ranked<'p, T>(items: &'p [T], key: impl Fn(&T) -> (&[String], &str), wanted: &BTreeSet<&str>) -> Vec<(usize, &'p T)> {
    let mut v: Vec<(usize, &T)> = items.iter().map(|t| (overlap(key(t).0, wanted), t)).collect();
    v.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| key(a.1).1.cmp(key(b.1).1)));
    v
}

/// Picks 3–4 templates, up to 3 knowledge snippets and 3 examples
/// ranked by tag overlap with the theorems' families and `patch_tags`.
/// Templates beyond the third need a positive overlap.
pub fn select_prompt_context<'p>(
    pool: &'p PromptTemplatePool,
    theorems: &[&Theorem],
    patch_tags: &[String],
) -> PromptContext<'p> {
    let wanted: BTreeSet<&str> =
        theorems.iter().map(|t| t.family.as_str()).chain(patch_tags.iter().map(String::as_str)).collect();
    let templates = ranked(&pool.templates, |t| (&t.tags, &t.id), &wanted)
        .into_iter()
        .enumerate()
        .take_while(|(i, (o, _))| *i < MIN_TEMPLATES || (*i < MAX_TEMPLATES && *o > 0))
        .map(|(_, (_, t))| t)
        .collect();
    let knowledge = ranked(&pool.knowledge, |k| (&k.tags, &k.id), &wanted)
        .into_iter()
        .filter(|(o, _)| *o > 0)
        .take(MAX_KNOWLEDGE)
        .map(|(_, k)| k)
        .collect();
    let examples = ranked(&pool.examples, |e| (&e.tags, &e.id), &wanted)
        .into_iter()
        .take(EXAMPLES_PER_PROMPT)
        .map(|(_, e)| e)
        .collect();
    PromptContext { templates, knowledge, examples }
}

/// Replaces `{NAME}` placeholders in one pass; unknown names stay.
pub fn fill(skeleton: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(skeleton.len() * 2);
    let mut rest = skeleton;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        match close.map(|c| &after[..c]).and_then(|name| values.get(name).map(|v| (name, v))) {
            Some((name, v)) => {
                out.push_str(v);
                rest = &after[name.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn render_examples(ctx: &PromptContext) -> String {
    ctx.examples
        .iter()
        .enumerate()
        .map(|(i, e)| format!("### Example {}\nCurrent step: {}\n{}\n", i + 1, e.patch.trim(), e.response.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Examples for question prompts: conditions, conclusion and ```qa block.
pub fn render_question_examples(ctx: &PromptContext) -> String {
    ctx.examples
        .iter()
        .enumerate()
        .map(|(i, e)| format!("### Example {}\nConditions: {}\n{}\n", i + 1, e.patch.trim(), e.qa.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_templates(ctx: &PromptContext) -> String {
    ctx.templates
        .iter()
        .map(|t| format!("### Template {}\nProblem: {}\nReasoning: {}\n", t.id, t.problem.trim(), t.reasoning.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_knowledge(ctx: &PromptContext) -> String {
    if ctx.knowledge.is_empty() {
        return "none\n".into();
    }
    ctx.knowledge.iter().map(|k| format!("- {}\n", k.text.trim())).collect()
}

/// Previous steps as a titled section, or nothing for the first step.
pub fn render_prior(steps: &[ReasoningStep]) -> String {
    if steps.is_empty() {
        return String::new();
    }
    let mut s = String::from("\n## Previous steps\n");
    for (i, st) in steps.iter().enumerate() {
        s.push_str(&format!("{}. {}\n", i + 1, st.statement));
    }
    s
}

/// One theorem line per instantiated fact, `- [id] statement => fact`,
/// and a bare line for theorems without a fact here.
pub fn render_theorems(theorems: &[&Theorem], facts: &[(String, String)]) -> String {
    let mut s = String::new();
    for t in theorems {
        let mine: Vec<&String> = facts.iter().filter(|(id, _)| *id == t.id).map(|(_, f)| f).collect();
        if mine.is_empty() {
            s.push_str(&format!("- [{}] {}\n", t.id, t.statement));
        }
        for f in mine {
            s.push_str(&format!("- [{}] {} => {f}\n", t.id, t.statement));
        }
    }
    if s.is_empty() {
        s.push_str("none\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::bundled;

    fn tpl(id: &str, tags: &[&str]) -> Template {
        Template {
            id: id.into(),
            tags: tags.iter().map(|s| s.to_string()).collect(),
            problem: format!("p{id}"),
            reasoning: format!("r{id}"),
        }
    }

    fn pool(templates: Vec<Template>) -> PromptTemplatePool {
        let mut p = PromptTemplatePool::bundled();
        p.templates = templates;
        p
    }

    fn ids(ctx: &PromptContext) -> Vec<String> {
        ctx.templates.iter().map(|t| t.id.clone()).collect()
    }

    #[test]
    fn bundled_pool_tags_are_families() {
        let cat = bundled();
        let fams: BTreeSet<&str> = cat.theorems.iter().map(|t| t.family.as_str()).collect();
        let p = PromptTemplatePool::bundled();
        p.check_tags(&fams).unwrap();
        assert!(p.templates.len() >= MAX_TEMPLATES);
    }

    #[test]
    fn exactly_three_matching() {
        let p = pool(vec![
            tpl("T1", &["Circle"]),
            tpl("T2", &["Median"]),
            tpl("T3", &["Circle"]),
            tpl("T4", &["Rhombus"]),
            tpl("T5", &["Circle"]),
        ]);
        let ctx = select_prompt_context(&p, &[], &["Circle".into()]);
        assert_eq!(ids(&ctx), vec!["T1", "T3", "T5"]);
    }

    #[test]
    fn top_four_by_overlap_then_id() {
        let p = pool(vec![
            tpl("T01", &["Rhombus"]),
            tpl("T02", &["Circle", "Chord"]),
            tpl("T03", &["Median"]),
            tpl("T04", &["Chord"]),
            tpl("T05", &["Square"]),
            tpl("T06", &["Circle", "Chord", "Tangent"]),
            tpl("T07", &["Altitude"]),
            tpl("T08", &["Tangent"]),
            tpl("T09", &["Circle"]),
            tpl("T10", &["Diagonal"]),
        ]);
        let tags: Vec<String> = ["Circle", "Chord", "Tangent"].map(String::from).to_vec();
        let ctx = select_prompt_context(&p, &[], &tags);
        assert_eq!(ids(&ctx), vec!["T06", "T02", "T04", "T08"]);
    }

    #[test]
    fn pads_to_three() {
        let p = pool(vec![tpl("T1", &["Square"]), tpl("T2", &["Circle"]), tpl("T3", &["Median"]), tpl("T4", &["Rhombus"])]);
        let ctx = select_prompt_context(&p, &[], &["Median".into()]);
        assert_eq!(ids(&ctx), vec!["T3", "T1", "T2"]);
        assert_eq!(ctx.examples.len(), EXAMPLES_PER_PROMPT);
    }

    #[test]
    fn circle_figures_prefer_circle_knowledge() {
        let p = PromptTemplatePool::bundled();
        let cat = bundled();
        let th: Vec<&Theorem> = cat.theorems.iter().filter(|t| t.family == "Inscribed Angle").take(1).collect();
        let ctx = select_prompt_context(&p, &th, &["Circle".into()]);
        assert!(!ctx.knowledge.is_empty());
        for k in &ctx.knowledge {
            assert!(k.tags.iter().any(|t| t == "Circle" || t == "Inscribed Angle"));
        }
    }

    #[test]
    fn bundled_examples_parse() {
        for e in PromptTemplatePool::bundled().examples {
            super::super::parse::parse_step(&e.response).unwrap();
            super::super::parse::parse_qa(&e.qa).unwrap();
        }
    }

    #[test]
    fn fill_is_single_pass() {
        let v = BTreeMap::from([("A", "{B}".to_string()), ("B", "x".to_string())]);
        assert_eq!(fill("{A}-{B}-{C}", &v), "{B}-x-{C}");
    }

    #[test]
    fn deterministic() {
        let p = PromptTemplatePool::bundled();
        let tags = vec!["Parallelogram".to_string()];
        assert_eq!(select_prompt_context(&p, &[], &tags), select_prompt_context(&p, &[], &tags));
    }
}
