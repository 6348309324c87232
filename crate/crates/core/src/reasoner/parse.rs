//! Response blocks and the numeric-claim extractor.

use crate::catalog::expr::{parse_atom, parse_expr, Atom, Cmp, Expr};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// A literal `element = value` statement found in free text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericClaim {
    /// Element in claim syntax: `AB`, `∠ABC`, `area(ABC)`, `radius(O)`.
    pub element: String,
    pub value: f64,
    /// The number exactly as written, degree sign included.
    pub literal: String,
}

impl NumericClaim {
    pub fn expr(&self) -> Option<Expr> {
        parse_expr(&self.element).ok().filter(|e| e.as_element().is_some())
    }

    pub fn text(&self) -> String {
        format!("{} = {}", self.element, self.literal)
    }
}

const LABEL: &str = r"[A-Z](?:[1-9][0-9]*)?";

fn chain_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let elem = format!(
            r"(?:∠{LABEL}{LABEL}{LABEL}|area\((?:{LABEL})+\)|radius\({LABEL}\)|\b{LABEL}{LABEL})"
        );
        Regex::new(&format!(r"((?:{elem}\s*=\s*)+)(\d+(?:\.\d+)?)(°)?")).expect("valid pattern")
    })
}

const OPERATORS: &[char] = &['+', '-', '*', '/', '^', '(', '·', '×', '√', '='];

/// Extracts every chain such as `AB = AC = 7` or `∠ABC = 64°` whose
/// right end is a bare number. Chains that are part of a larger
/// arithmetic expression are skipped.
pub fn extract_numeric_claims(text: &str) -> Vec<NumericClaim> {
    let mut out = Vec::new();
    for caps in chain_re().captures_iter(text) {
        let whole = caps.get(0).expect("match");
        let before = text[..whole.start()].trim_end().chars().last();
        let after = text[whole.end()..].trim_start().chars().next();
        if before.is_some_and(|c| OPERATORS.contains(&c))
            || after.is_some_and(|c| OPERATORS.contains(&c) || c.is_ascii_digit())
        {
            continue;
        }
        let number = &caps[2];
        let Ok(value) = number.parse::<f64>() else { continue };
        let literal = format!("{number}{}", caps.get(3).map_or("", |m| m.as_str()));
        for part in caps[1].split('=') {
            let element = part.trim();
            if element.is_empty() {
                continue;
            }
            if parse_expr(element).ok().and_then(|e| e.as_element().cloned()).is_some() {
                out.push(NumericClaim { element: element.to_string(), value, literal: literal.clone() });
            }
        }
    }
    out
}

/// The body of the first fenced block tagged `tag`.
pub fn fenced<'a>(response: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("```{tag}");
    let start = response.find(&open)? + open.len();
    let rest = &response[start..];
    let rest = rest.strip_prefix('\n').or_else(|| rest.strip_prefix("\r\n"))?;
    let end = rest.find("```")?;
    Some(&rest[..end])
}

/// `KEY: value` lines of a block. Each key must appear exactly once.
pub fn fields(block: &str, keys: &[&str]) -> Result<Vec<String>, String> {
    let mut found: Vec<Option<String>> = vec![None; keys.len()];
    for line in block.lines() {
        let Some((k, v)) = line.split_once(':') else { continue };
        if let Some(i) = keys.iter().position(|key| *key == k.trim()) {
            if found[i].is_some() {
                return Err(format!("{} appears twice", keys[i]));
            }
            found[i] = Some(v.trim().to_string());
        }
    }
    keys.iter()
        .zip(found)
        .map(|(k, v)| v.ok_or_else(|| format!("missing {k}")))
        .collect()
}

/// Splits on `;` outside parentheses.
pub fn split_claims(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ';' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out.into_iter().map(str::trim).filter(|s| !s.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepBlock {
    pub statement: String,
    pub theorem_ids: Vec<String>,
    pub numeric: Vec<NumericClaim>,
    pub claims: Vec<Atom>,
}

/// The numeric form of a claim: a single element equal to a number.
pub fn as_numeric(atom: &Atom) -> Option<(&Expr, f64)> {
    match atom {
        Atom::Cmp(l, Cmp::Eq, Expr::Num(v)) => l.as_element().map(|e| (e, *v)),
        _ => None,
    }
}

/// Parses a ```step block. Numbers in CLAIMS must be stated literally
/// in STATEMENT.
pub fn parse_step(response: &str) -> Result<StepBlock, String> {
    let block = fenced(response, "step").ok_or("no ```step block")?;
    let f = fields(block, &["STATEMENT", "THEOREMS", "CLAIMS"])?;
    let statement = f[0].clone();
    if statement.is_empty() {
        return Err("empty STATEMENT".into());
    }
    let theorem_ids = if f[1].eq_ignore_ascii_case("none") {
        Vec::new()
    } else {
        f[1].split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
    };
    let numeric = extract_numeric_claims(&statement);
    let mut claims = Vec::new();
    for item in split_claims(&f[2]) {
        let atom = parse_atom(item).map_err(|e| format!("claim {item:?}: {e}"))?;
        if let Some((el, v)) = as_numeric(&atom) {
            let stated = numeric.iter().any(|n| n.value == v && n.expr().as_ref().map(Expr::canonical) == Some(el.canonical()));
            if !stated {
                return Err(format!("claim {item:?} is not stated in STATEMENT"));
            }
        }
        claims.push(atom);
    }
    Ok(StepBlock { statement, theorem_ids, numeric, claims })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaBlock {
    pub question: String,
    pub answer: String,
    pub kind: String,
}

pub fn parse_qa(response: &str) -> Result<QaBlock, String> {
    let block = fenced(response, "qa").ok_or("no ```qa block")?;
    let f = fields(block, &["QUESTION", "ANSWER", "TYPE"])?;
    if f[0].is_empty() {
        return Err("empty QUESTION".into());
    }
    Ok(QaBlock { question: f[0].clone(), answer: f[1].clone(), kind: f[2].clone() })
}

/// `Some(true)` for an answerable verdict.
pub fn parse_verdict(response: &str) -> Result<bool, String> {
    let block = fenced(response, "verdict").ok_or("no ```verdict block")?;
    let f = fields(block, &["VERDICT"])?;
    match f[0].to_ascii_lowercase().as_str() {
        "yes" => Ok(true),
        "no" => Ok(false),
        other => Err(format!("verdict {other:?} is neither yes nor no")),
    }
}

pub fn parse_analysis(response: &str) -> Result<String, String> {
    let body = fenced(response, "analysis").ok_or("no ```analysis block")?.trim();
    if body.is_empty() {
        return Err("empty analysis".into());
    }
    Ok(body.to_string())
}

/// Numbered lines of a ```steps block, numbers stripped.
pub fn parse_steps(response: &str) -> Result<Vec<String>, String> {
    let body = fenced(response, "steps").ok_or("no ```steps block")?;
    let mut out = Vec::new();
    for line in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (n, text) = line.split_once('.').ok_or_else(|| format!("unnumbered line {line:?}"))?;
        if n.trim().parse::<usize>() != Ok(out.len() + 1) {
            return Err(format!("step numbering broken at {line:?}"));
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(format!("empty step {}", out.len() + 1));
        }
        out.push(text.to_string());
    }
    if out.is_empty() {
        return Err("no steps".into());
    }
    Ok(out)
}
