//! Rule-based responder behind [`MockClient`](super::MockClient) for
//! prompts without a fixture. It reads the prompt's sections and answers
//! in the requested block format, so whole pipelines run offline.

use super::parse::{as_numeric, extract_numeric_claims};
use super::{classify_question, mentioned_labels};
use crate::catalog::expr::{parse_atom, Atom, Cmp, Expr, Pred};

/// Text of the `## name` section, up to the next section header.
pub fn section<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    let head = format!("## {name}\n");
    let start = if prompt.starts_with(&head) {
        head.len()
    } else {
        prompt.find(&format!("\n{head}"))? + head.len() + 1
    };
    let rest = &prompt[start..];
    let end = rest.find("\n## ").unwrap_or(rest.len());
    Some(rest[..end].trim())
}

pub fn respond(prompt: &str) -> String {
    if let Some(patch) = section(prompt, "Current step") {
        reasoning(patch, section(prompt, "Applicable theorems").unwrap_or(""))
    } else if let Some(c) = section(prompt, "Verified conclusion") {
        question(section(prompt, "Conditions").unwrap_or(""), c)
    } else if let Some(sol) = section(prompt, "Reference solution") {
        format!("```analysis\n{sol}\n```")
    } else if let Some(a) = section(prompt, "Analysis") {
        segment(a)
    } else if let (Some(step), Some(q)) = (section(prompt, "Step"), section(prompt, "Original problem")) {
        augment_qa(q, step)
    } else if let (Some(q), Some(a)) = (section(prompt, "Question"), section(prompt, "Answer")) {
        judge(q, a)
    } else {
        "I am not sure what is being asked.".into()
    }
}

fn reasoning(patch: &str, theorems: &str) -> String {
    let fact = theorems.lines().find_map(|l| {
        let l = l.strip_prefix("- [")?;
        let (id, rest) = l.split_once(']')?;
        let (_, fact) = rest.split_once(" => ")?;
        parse_atom(fact.trim()).ok().map(|_| (id.to_string(), fact.trim().to_string()))
    });
    let mut claims: Vec<String> = extract_numeric_claims(patch).iter().map(|c| c.text()).collect();
    let mut statement = patch.to_string();
    let theorems = match &fact {
        Some((id, f)) => {
            statement.push_str(&format!(" Hence {f}."));
            claims.push(f.clone());
            id.clone()
        }
        None => "none".into(),
    };
    format!("```step\nSTATEMENT: {statement}\nTHEOREMS: {theorems}\nCLAIMS: {}\n```", claims.join("; "))
}

fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, _) in text.match_indices(". ") {
        out.push(text[start..=i].trim());
        start = i + 2;
    }
    if start < text.len() {
        out.push(text[start..].trim());
    }
    out.into_iter().filter(|s| !s.is_empty()).collect()
}

fn ask(atom: &Atom) -> String {
    if let Some((e, _)) = as_numeric(atom) {
        let name = e.friendly();
        return match e {
            Expr::Angle(..) => format!("Find the measure of {name}."),
            Expr::Area(..) => format!("Find {name}."),
            Expr::Radius(o) => format!("Find the radius of circle {o}."),
            _ => format!("Find the length of {name}."),
        };
    }
    match atom {
        Atom::Cmp(l, Cmp::Eq, r) => format!("What is the relationship between {} and {}?", l.friendly(), r.friendly()),
        Atom::Cmp(l, _, r) => format!("Which is larger, {} or {}?", l.friendly(), r.friendly()),
        Atom::Pred { pred: Pred::Parallel | Pred::Perpendicular, labels, .. } => format!(
            "What is the positional relationship between {}{} and {}{}?",
            labels[0], labels[1], labels[2], labels[3]
        ),
        Atom::Pred { labels, .. } => {
            let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
            format!("Which geometric relationship holds among {}?", names.join(", "))
        }
    }
}

fn question(conditions: &str, conclusion: &str) -> String {
    let Ok(atom) = parse_atom(conclusion) else {
        return "```qa\nQUESTION:\nANSWER:\nTYPE:\n```".into();
    };
    let target = as_numeric(&atom).map(|(e, _)| e.canonical());
    let flat = conditions.replace('\n', " ");
    let kept: Vec<&str> = sentences(&flat)
        .into_iter()
        .filter(|s| match &target {
            Some(t) => !extract_numeric_claims(s).iter().any(|c| c.expr().map(|e| e.canonical()).as_ref() == Some(t)),
            None => !s.contains(conclusion),
        })
        .collect();
    let mut q = kept.join(" ");
    if !q.is_empty() {
        q.push(' ');
    }
    q.push_str(&ask(&atom));
    format!(
        "```qa\nQUESTION: {q}\nANSWER: {conclusion}\nTYPE: {}\n```",
        classify_question(conclusion).as_str()
    )
}

fn judge(question: &str, answer: &str) -> String {
    let asked = mentioned_labels(question);
    let missing = mentioned_labels(answer).into_iter().find(|l| !asked.contains(l));
    match (question.trim().is_empty(), missing) {
        (true, _) => "```verdict\nVERDICT: no\nREASON: the question is empty.\n```".into(),
        (false, Some(l)) => format!("```verdict\nVERDICT: no\nREASON: the question never introduces {l}.\n```"),
        (false, None) => "```verdict\nVERDICT: yes\nREASON: every element of the answer is given in the question.\n```".into(),
    }
}

fn segment(analysis: &str) -> String {
    let lines: Vec<String> = analysis
        .lines()
        .flat_map(sentences)
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect();
    format!("```steps\n{}\n```", lines.join("\n"))
}

fn augment_qa(problem: &str, step: &str) -> String {
    let opening: Vec<&str> = step.split_whitespace().take(6).collect();
    format!(
        "```qa\nQUESTION: For the problem \"{}\", what is established by the step beginning \"{}\"?\nANSWER: {step}\nTYPE: {}\n```",
        problem.replace('\n', " "),
        opening.join(" "),
        classify_question(step).as_str()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoner::parse::{parse_qa, parse_step, parse_verdict};

    #[test]
    fn sections() {
        let p = "intro\n## Current step\nAB = 5.\n## Other\nx";
        assert_eq!(section(p, "Current step"), Some("AB = 5."));
        assert_eq!(section(p, "Other"), Some("x"));
        assert_eq!(section(p, "Missing"), None);
    }

    #[test]
    fn reasoning_response_parses() {
        let p = "## Applicable theorems\n- [isosceles-base-angles] The base angles are equal. => ∠ABC = ∠ACB\n\n## Current step\nIn isosceles triangle ABC, AB = AC = 7 and BC = 6.";
        let s = parse_step(&respond(p)).unwrap();
        assert_eq!(s.theorem_ids, vec!["isosceles-base-angles"]);
        assert_eq!(s.claims.last().unwrap().friendly(), "∠ABC = ∠ACB");
        assert_eq!(s.numeric.len(), 3);
    }

    #[test]
    fn question_hides_the_answer() {
        let p = "## Conditions\nIn triangle ABC, AB = 7. BC = 6.\n\n## Verified conclusion\nAB = 7";
        let qa = parse_qa(&respond(p)).unwrap();
        assert_eq!(qa.question, "BC = 6. Find the length of AB.");
        assert_eq!(qa.kind, "side length");
    }

    #[test]
    fn judge_checks_labels() {
        assert!(parse_verdict(&respond("## Question\nFind AB.\n\n## Answer\nAB = 3")).unwrap());
        assert!(!parse_verdict(&respond("## Question\nFind AB.\n\n## Answer\nCD = 3")).unwrap());
    }

    #[test]
    fn unknown_prompt_is_unparseable() {
        assert!(parse_step(&respond("hello")).is_err());
    }
}
