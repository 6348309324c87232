use geosynth::catalog::bundled;
use geosynth::engine::{generate_figure, GenerationConfig};
use geosynth::reasoner::mock::section;
use geosynth::reasoner::{
    filter_qa, process_figure, ClientError, Completion, CompletionClient, FigureContext, Grounding, MockClient,
    PromptTemplatePool, QaPair, QaStatus, Reasoner, RequestLog, Taxonomy,
};

/// Mock that refuses every judge request.
struct NoJudge(MockClient);

impl CompletionClient for NoJudge {
    fn identity(&self) -> String {
        "no-judge".into()
    }

    fn complete(&self, prompt: &str) -> Result<Completion, ClientError> {
        if section(prompt, "Question").is_some() && section(prompt, "Answer").is_some() {
            return Err(ClientError::Transport("judge offline".into()));
        }
        self.0.complete(prompt)
    }
}

fn pair(answer: &str, chain: Vec<usize>) -> QaPair {
    QaPair {
        question: "In the figure, what can be concluded?".into(),
        answer: answer.into(),
        chain,
        qtype: geosynth::reasoner::classify_question(answer),
        status: QaStatus::Candidate,
    }
}

#[test]
fn each_taxonomy_reason_is_reachable() {
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let fig = generate_figure(&GenerationConfig { seed: 21, ..Default::default() }, &cat, 0).unwrap();
    let client = MockClient::new();
    let log = RequestLog::new();
    let r = Reasoner { client: &client, log: &log, pool: &pool, catalog: &cat };
    let ctx = FigureContext::new("f", &fig, &cat);
    let out = process_figure(&r, &ctx).unwrap();
    assert!(out.accepted().count() > 0);
    let g = Grounding::new(&fig.scene, &fig.ledger, &cat);
    let (seg, len) = fig.ledger.lengths.iter().find(|(k, _)| !k.starts_with("r(")).unwrap();
    let other = fig.ledger.lengths.iter().find(|(_, v)| (*v - len).abs() > 1.0).map(|(k, _)| k).unwrap();
    let pairs = vec![
        pair(&format!("{seg} = {:.1}", len * 1.5), vec![0]),
        pair(&format!("{seg} = {other}"), vec![0]),
        pair("QZ = 3", vec![0]),
        pair(&format!("{seg} = {len:.1}"), vec![9]),
    ];
    let f = filter_qa(&r, "f", pairs, &out.steps, Some(&g));
    let reasons: Vec<QaStatus> = f.pairs.iter().map(|p| p.status.clone()).collect();
    assert_eq!(
        reasons,
        vec![
            QaStatus::Rejected { reason: Taxonomy::MetricDiscrepancy },
            QaStatus::Rejected { reason: Taxonomy::TheoremViolation },
            QaStatus::Rejected { reason: Taxonomy::DiagramTextMismatch },
            QaStatus::Rejected { reason: Taxonomy::DiagramTextMismatch },
        ]
    );
    let mut vague = pair(&format!("{seg} = {len:.1}"), vec![0]);
    vague.question = "What is the value?".into();
    let f = filter_qa(&r, "f", vec![vague], &out.steps, Some(&g));
    assert_eq!(f.pairs[0].status, QaStatus::Rejected { reason: Taxonomy::AnswerabilityAmbiguity });
}

#[test]
fn judge_failure_leaves_pairs_undecided() {
    let cat = bundled();
    let pool = PromptTemplatePool::bundled();
    let fig = generate_figure(&GenerationConfig { seed: 22, ..Default::default() }, &cat, 0).unwrap();
    let client = NoJudge(MockClient::new());
    let log = RequestLog::new();
    let r = Reasoner { client: &client, log: &log, pool: &pool, catalog: &cat };
    let out = process_figure(&r, &FigureContext::new("f", &fig, &cat)).unwrap();
    assert!(out.incomplete);
    assert!(out.pairs.iter().all(|p| p.status == QaStatus::Candidate));
    assert!(log.entries().iter().any(|e| e.error.is_some()));
}
