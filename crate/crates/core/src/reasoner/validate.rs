//! Deterministic validation of reasoning steps and answers.

use super::parse::{as_numeric, extract_numeric_claims, NumericClaim};
use super::ReasoningStep;
use crate::catalog::expr::{eval_geometric, parse_atom, Atom, Expr, Tolerance, CONCLUSION_TOL};
use crate::catalog::{applicable_conclusions, Catalog};
use crate::engine::PropertyLedger;
use crate::geometry::{angle_id, segment_id, Scene};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Taxonomy {
    TheoremViolation,
    MetricDiscrepancy,
    DiagramTextMismatch,
    AnswerabilityAmbiguity,
}

impl Taxonomy {
    pub const ALL: [Taxonomy; 4] = [
        Taxonomy::TheoremViolation,
        Taxonomy::MetricDiscrepancy,
        Taxonomy::DiagramTextMismatch,
        Taxonomy::AnswerabilityAmbiguity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Taxonomy::TheoremViolation => "theorem-violation",
            Taxonomy::MetricDiscrepancy => "metric-discrepancy",
            Taxonomy::DiagramTextMismatch => "diagram-text-mismatch",
            Taxonomy::AnswerabilityAmbiguity => "answerability-ambiguity",
        }
    }
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The first failing check of a validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub reason: Taxonomy,
    pub detail: String,
    /// Size of the violation where one is measurable.
    pub residual: Option<f64>,
}

impl fmt::Display for Residual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.reason, self.detail)?;
        if let Some(r) = self.residual {
            write!(f, " (residual {r:.4})")?;
        }
        Ok(())
    }
}

fn fail(reason: Taxonomy, detail: impl Into<String>, residual: Option<f64>) -> Residual {
    Residual { reason, detail: detail.into(), residual }
}

/// Ground truth of one figure, with a cache of theorem applicability.
pub struct Grounding<'a> {
    pub scene: &'a Scene,
    pub ledger: &'a PropertyLedger,
    pub catalog: &'a Catalog,
    applicable: Mutex<BTreeMap<String, bool>>,
}

impl<'a> Grounding<'a> {
    pub fn new(scene: &'a Scene, ledger: &'a PropertyLedger, catalog: &'a Catalog) -> Self {
        Self { scene, ledger, catalog, applicable: Mutex::new(BTreeMap::new()) }
    }

    fn applies(&self, id: &str) -> Option<bool> {
        let theorem = self.catalog.theorem(id)?;
        if let Some(&b) = self.applicable.lock().expect("cache lock").get(id) {
            return Some(b);
        }
        let b = !applicable_conclusions(theorem, self.scene).is_empty();
        self.applicable.lock().expect("cache lock").insert(id.to_string(), b);
        Some(b)
    }
}

/// Ledger id of an element expression.
pub fn element_id(e: &Expr) -> Option<String> {
    Some(match e {
        Expr::Len(a, b) => segment_id(a, b),
        Expr::Angle(a, v, c) => angle_id(a, v, c),
        Expr::Radius(o) => format!("r({o})"),
        Expr::Area(l) => format!("area({})", l.iter().map(|x| x.as_str()).collect::<String>()),
        _ => return None,
    })
}

/// Allowed deviation of a claimed value: 0.5% relative or half the
/// display quantum (0.05 for lengths and areas, 0.5° for angles),
/// whichever is larger. Comparisons add 1e-9 so values exactly on a
/// rounding boundary pass.
pub fn claim_tolerance(element: &Expr, exact: f64) -> f64 {
    let quantum = if matches!(element, Expr::Angle(..)) { 0.5 } else { 0.05 };
    (0.005 * exact.abs()).max(quantum)
}

fn check_labels(text: &str, atom_labels: Vec<crate::geometry::Label>, scene: &Scene) -> Result<(), Residual> {
    match atom_labels.iter().find(|l| !scene.has_vertex(l)) {
        Some(l) => Err(fail(Taxonomy::DiagramTextMismatch, format!("{text}: no vertex {l} in the figure"), None)),
        None => Ok(()),
    }
}

fn exact_value(g: &Grounding, e: &Expr) -> Option<f64> {
    element_id(e).and_then(|id| g.ledger.exact(&id)).or_else(|| e.eval(g.scene).ok())
}

/// Checks claims in order: referenced vertices exist, numbers match the
/// ledger, cited theorems apply, relations hold.
pub fn check_claims(
    numeric: &[NumericClaim],
    relations: &[Atom],
    theorem_ids: &[String],
    g: &Grounding,
) -> Result<(), Residual> {
    let mut parsed = Vec::new();
    for c in numeric {
        let Some(e) = c.expr() else {
            return Err(fail(Taxonomy::DiagramTextMismatch, format!("{}: not an element", c.element), None));
        };
        let mut labels = Vec::new();
        e.labels(&mut labels);
        check_labels(&c.text(), labels, g.scene)?;
        parsed.push((c, e));
    }
    for a in relations {
        check_labels(&a.friendly(), a.labels(), g.scene)?;
    }
    for (c, e) in parsed {
        let Some(exact) = exact_value(g, &e) else {
            return Err(fail(Taxonomy::DiagramTextMismatch, format!("{}: not measurable in the figure", c.element), None));
        };
        let off = (c.value - exact).abs();
        if off > claim_tolerance(&e, exact) + 1e-9 {
            return Err(fail(
                Taxonomy::MetricDiscrepancy,
                format!("{} claimed, ledger has {exact:.4}", c.text()),
                Some(off),
            ));
        }
    }
    for id in theorem_ids {
        match g.applies(id) {
            None => return Err(fail(Taxonomy::TheoremViolation, format!("unknown theorem {id}"), None)),
            Some(false) => {
                return Err(fail(Taxonomy::TheoremViolation, format!("preconditions of {id} do not hold"), None))
            }
            Some(true) => {}
        }
    }
    for a in relations {
        match eval_geometric(a, g.scene, Tolerance::Absolute(CONCLUSION_TOL)) {
            Ok(Some((true, _))) | Ok(None) => {}
            Ok(Some((false, r))) => {
                return Err(fail(Taxonomy::TheoremViolation, format!("{} does not hold", a.friendly()), Some(r)))
            }
            Err(e) => return Err(fail(Taxonomy::DiagramTextMismatch, format!("{}: {e}", a.friendly()), None)),
        }
    }
    Ok(())
}

/// Splits claim strings into relation atoms, dropping the numeric ones
/// already covered by the statement's numeric claims.
pub fn relation_atoms(claims: &[String]) -> Result<Vec<Atom>, Residual> {
    let mut out = Vec::new();
    for c in claims {
        let a = parse_atom(c).map_err(|e| fail(Taxonomy::DiagramTextMismatch, format!("{c}: {e}"), None))?;
        if as_numeric(&a).is_none() {
            out.push(a);
        }
    }
    Ok(out)
}

/// Validates a reasoning step against the figure.
pub fn validate_step(step: &ReasoningStep, g: &Grounding) -> Result<(), Residual> {
    if step.malformed {
        return Err(fail(Taxonomy::DiagramTextMismatch, "malformed step", None));
    }
    let relations = relation_atoms(&step.claims)?;
    check_claims(&step.numeric_claims, &relations, &step.theorem_ids, g)
}

/// Validates an answer: its numeric statements and, when the whole
/// answer is one claim, that claim.
pub fn validate_answer(answer: &str, g: &Grounding) -> Result<(), Residual> {
    let numeric = extract_numeric_claims(answer);
    let relations = match parse_atom(answer.trim().trim_end_matches('.')) {
        Ok(a) if as_numeric(&a).is_none() => vec![a],
        Ok(_) => Vec::new(),
        Err(_) if !numeric.is_empty() => Vec::new(),
        Err(e) => return Err(fail(Taxonomy::DiagramTextMismatch, format!("answer {answer:?}: {e}"), None)),
    };
    check_claims(&numeric, &relations, &[], g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::bundled;
    use crate::engine::compute_ledger;
    use crate::geometry::{Point, Primitive, Role};

    fn step(statement: &str, theorems: &[&str], claims: &[&str]) -> ReasoningStep {
        ReasoningStep {
            index: 0,
            patch: 0,
            statement: statement.into(),
            theorem_ids: theorems.iter().map(|s| s.to_string()).collect(),
            numeric_claims: extract_numeric_claims(statement),
            claims: claims.iter().map(|s| s.to_string()).collect(),
            conclusion: claims.last().map(|s| s.to_string()),
            malformed: false,
        }
    }

    fn isosceles() -> Scene {
        let mut s = Scene::new();
        let l: Vec<_> = [(50.0, 60.0), (46.0, 50.0), (54.0, 50.0)]
            .iter()
            .map(|&(x, y)| s.add_vertex(Point::new(x, y)).unwrap())
            .collect();
        for i in 0..3 {
            s.add_primitive(Primitive::segment(l[i].clone(), l[(i + 1) % 3].clone(), Role::Side)).unwrap();
        }
        s
    }

    #[test]
    fn exact_length_passes() {
        let cat = bundled();
        let s = isosceles();
        let ledger = compute_ledger(&s);
        let g = Grounding::new(&s, &ledger, &cat);
        assert_eq!(validate_step(&step("BC = 8.0", &[], &["BC = 8.0"]), &g), Ok(()));
        assert_eq!(validate_step(&step("AB = 10.8 and ∠ABC = ∠ACB", &["isosceles-base-angles"], &["∠ABC = ∠ACB"]), &g), Ok(()));
    }

    #[test]
    fn right_angle_claim_on_isosceles_fails() {
        let cat = bundled();
        let s = isosceles();
        let ledger = compute_ledger(&s);
        let g = Grounding::new(&s, &ledger, &cat);
        let r = validate_step(&step("∠BAC = 90°", &[], &[]), &g).unwrap_err();
        assert_eq!(r.reason, Taxonomy::MetricDiscrepancy);
    }

    #[test]
    fn inscribed_angle_without_circle_fails() {
        let cat = bundled();
        let s = isosceles();
        let ledger = compute_ledger(&s);
        let g = Grounding::new(&s, &ledger, &cat);
        let id = cat.theorems.iter().find(|t| t.family == "Inscribed Angle").unwrap().id.clone();
        let r = validate_step(&step("∠BAC is inscribed.", &[&id], &[]), &g).unwrap_err();
        assert_eq!(r.reason, Taxonomy::TheoremViolation);
    }

    #[test]
    fn missing_segment_and_false_relation() {
        let cat = bundled();
        let s = isosceles();
        let ledger = compute_ledger(&s);
        let g = Grounding::new(&s, &ledger, &cat);
        assert_eq!(validate_answer("XY = 3", &g).unwrap_err().reason, Taxonomy::DiagramTextMismatch);
        assert_eq!(validate_answer("AB = BC", &g).unwrap_err().reason, Taxonomy::TheoremViolation);
        assert_eq!(validate_answer("AB = AC", &g), Ok(()));
        assert_eq!(validate_answer("BC = 8.9", &g).unwrap_err().reason, Taxonomy::MetricDiscrepancy);
    }

    #[test]
    fn tolerance_absorbs_display_rounding() {
        let len = Expr::Len("A".into(), "B".into());
        let ang = Expr::Angle("A".into(), "B".into(), "C".into());
        assert_eq!(claim_tolerance(&len, 5.0), 0.05);
        assert_eq!(claim_tolerance(&len, 100.0), 0.5);
        assert_eq!(claim_tolerance(&ang, 64.0), 0.5);
    }
}
