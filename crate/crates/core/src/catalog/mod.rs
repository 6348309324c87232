//! Theorem and substrate catalogs.
//!
//! A catalog is a TOML file with a `schema_version` header, `[[theorem]]`
//! entries and `[[substrate]]` entries. Theorem preconditions and
//! conclusions are written in the predicate language of [`expr`].
//!
//! ```toml
//! schema_version = 1
//!
//! [[theorem]]
//! id = "isosceles-base-angles"
//! family = "Isosceles Triangles"
//! category = "substrate"
//! statement = "The base angles of an isosceles triangle are equal."
//! require = ["triangle(A,B,C)", "len(A,B) = len(A,C)"]
//! conclude = ["angle(A,B,C) = angle(A,C,B)"]
//! ```
//!
//! Every label in a theorem is a variable. Variables bind to distinct
//! vertices unless the entry sets `distinct = false`.

pub mod expr;
pub mod matcher;

use crate::geometry::{Label, Role, Scene};
use expr::{eval_geometric, parse_atom, Atom, Coords, EvalError, Tolerance, CONCLUSION_TOL};
pub use matcher::MatchContext;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
pub const EXPECTED_THEOREMS: usize = 110;
pub const EXPECTED_SUBSTRATES: usize = 20;

/// The bundled default catalog.
pub const BUNDLED: &str = include_str!("../../assets/catalog.toml");

/// Shape groups used by substrate distributions.
pub const GROUPS: [&str; 5] = ["triangle", "quadrilateral", "circle", "pentagon", "hexagon"];

/// Substrate kinds with a coordinate recipe: (kind, polygon vertex count, has center).
pub const SUBSTRATE_KINDS: [(&str, usize, bool); 20] = [
    ("triangle", 3, false),
    ("isosceles-triangle", 3, false),
    ("equilateral-triangle", 3, false),
    ("right-triangle", 3, false),
    ("special-right-triangle", 3, false),
    ("parallelogram", 4, false),
    ("rectangle", 4, false),
    ("rhombus", 4, false),
    ("square", 4, false),
    ("trapezoid", 4, false),
    ("isosceles-trapezoid", 4, false),
    ("circle-chord", 2, true),
    ("inscribed-angle", 3, true),
    ("circle-diameter", 3, true),
    ("circle-tangent", 2, true),
    ("cyclic-quadrilateral", 4, true),
    ("inscribed-equilateral-triangle", 3, true),
    ("inscribed-square", 4, true),
    ("regular-pentagon", 5, false),
    ("regular-hexagon", 6, false),
];

pub fn kind_shape(kind: &str) -> Option<(usize, bool)> {
    SUBSTRATE_KINDS.iter().find(|k| k.0 == kind).map(|k| (k.1, k.2))
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema violation at {entry}.{field}: {message}")]
    Schema {
        entry: String,
        field: String,
        message: String,
    },
    #[error("catalog holds {theorems} theorems and {substrates} substrates, expected {EXPECTED_THEOREMS} and {EXPECTED_SUBSTRATES}")]
    Cardinality { theorems: usize, substrates: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Substrate,
    LineElement,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Substrate => "substrate",
            Category::LineElement => "line-element",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem {
    pub id: String,
    pub family: String,
    pub category: Category,
    pub statement: String,
    pub preconditions: Vec<Atom>,
    pub conclusions: Vec<Atom>,
    /// Line roles whose injection this theorem calls for.
    pub motivates: Vec<Role>,
    pub distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Integer range for the base length.
    pub side: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angle_choices: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substrate {
    pub id: String,
    pub kind: String,
    pub group: String,
    pub generator: GeneratorSpec,
    pub templates: Vec<String>,
    pub theorem_ids: Vec<String>,
    pub injectable: Vec<Role>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub schema_version: u32,
    pub note: Option<String>,
    pub theorems: Vec<Theorem>,
    pub substrates: Vec<Substrate>,
}

// ---------------------------------------------------------------------------
// file schema

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(default)]
    theorem: Vec<RawTheorem>,
    #[serde(default)]
    substrate: Vec<RawSubstrate>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheorem {
    id: String,
    family: String,
    category: Category,
    statement: String,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    distinct: bool,
    require: Vec<String>,
    conclude: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    motivates: Vec<String>,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubstrate {
    id: String,
    kind: String,
    group: String,
    generator: GeneratorSpec,
    templates: Vec<String>,
    theorems: Vec<String>,
    injectable: Vec<String>,
}

// ---------------------------------------------------------------------------
// description templates

/// A vertex reference inside a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VRef {
    Idx(usize),
    Center,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplatePart {
    Text(String),
    Vertex(VRef),
    Len(VRef, VRef),
    /// Angle at the middle reference.
    Angle(VRef, VRef, VRef),
    Radius,
}

/// Parses `{0}`, `{O}`, `{len:0-1}`, `{angle:0-1-2}` and `{r}` placeholders.
pub fn parse_template(src: &str) -> Result<Vec<TemplatePart>, String> {
    let vref = |s: &str| -> Result<VRef, String> {
        if s == "O" {
            Ok(VRef::Center)
        } else {
            s.parse().map(VRef::Idx).map_err(|_| format!("bad vertex reference {s:?}"))
        }
    };
    let mut out = Vec::new();
    let mut rest = src;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(TemplatePart::Text(rest[..open].to_string()));
        }
        let close = rest[open..].find('}').ok_or("unclosed placeholder")? + open;
        let body = &rest[open + 1..close];
        let part = if body == "r" {
            TemplatePart::Radius
        } else if let Some(args) = body.strip_prefix("len:") {
            let v: Vec<&str> = args.split('-').collect();
            if v.len() != 2 {
                return Err(format!("len takes two references: {body:?}"));
            }
            TemplatePart::Len(vref(v[0])?, vref(v[1])?)
        } else if let Some(args) = body.strip_prefix("angle:") {
            let v: Vec<&str> = args.split('-').collect();
            if v.len() != 3 {
                return Err(format!("angle takes three references: {body:?}"));
            }
            TemplatePart::Angle(vref(v[0])?, vref(v[1])?, vref(v[2])?)
        } else {
            TemplatePart::Vertex(vref(body)?)
        };
        out.push(part);
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(TemplatePart::Text(rest.to_string()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// loading

fn schema(entry: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> CatalogError {
    CatalogError::Schema {
        entry: entry.into(),
        field: field.into(),
        message: message.into(),
    }
}

/// Reads and validates a catalog file.
pub fn load_catalogs(path: &Path) -> Result<Catalog, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Catalog::from_toml(&text)
}

/// The bundled catalog, checked for the full 110/20 library.
pub fn bundled() -> Catalog {
    let c = Catalog::from_toml(BUNDLED).expect("bundled catalog is valid");
    c.check_cardinality().expect("bundled catalog is complete");
    c
}

impl Catalog {
    pub fn from_toml(text: &str) -> Result<Catalog, CatalogError> {
        if text.trim().is_empty() {
            return Err(CatalogError::Parse("empty catalog file".into()));
        }
        let raw: RawCatalog = toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "header",
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
            ));
        }
        let mut theorems = Vec::new();
        let mut ids = BTreeSet::new();
        for (i, t) in raw.theorem.into_iter().enumerate() {
            let entry = if t.id.is_empty() {
                format!("theorem[{i}]")
            } else {
                format!("theorem {:?}", t.id)
            };
            if t.id.is_empty() {
                return Err(schema(entry, "id", "empty id"));
            }
            if !ids.insert(t.id.clone()) {
                return Err(schema(entry, "id", "duplicate id"));
            }
            let parse_list = |field: &str, list: &[String]| -> Result<Vec<Atom>, CatalogError> {
                if list.is_empty() {
                    return Err(schema(&entry, field, "must not be empty"));
                }
                list.iter()
                    .enumerate()
                    .map(|(k, s)| parse_atom(s).map_err(|e| schema(&entry, format!("{field}[{k}]"), e.to_string())))
                    .collect()
            };
            let preconditions = parse_list("require", &t.require)?;
            let conclusions = parse_list("conclude", &t.conclude)?;
            let bound: BTreeSet<Label> = preconditions.iter().flat_map(|a| a.labels()).collect();
            for (k, c) in conclusions.iter().enumerate() {
                if !c.is_conclusion() {
                    return Err(schema(&entry, format!("conclude[{k}]"), "predicate is not allowed as a conclusion"));
                }
                if let Some(l) = c.labels().into_iter().find(|l| !bound.contains(l)) {
                    return Err(schema(&entry, format!("conclude[{k}]"), format!("variable {l} is not bound by require")));
                }
            }
            let motivates = t
                .motivates
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    r.parse::<Role>()
                        .map_err(|e| schema(&entry, format!("motivates[{k}]"), e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            match t.category {
                Category::LineElement if motivates.is_empty() => {
                    return Err(schema(&entry, "motivates", "line-element theorems must name the roles they motivate"))
                }
                Category::Substrate if !motivates.is_empty() => {
                    return Err(schema(&entry, "motivates", "only line-element theorems motivate roles"))
                }
                _ => {}
            }
            if motivates.contains(&Role::Side) {
                return Err(schema(&entry, "motivates", "sides are not injected"));
            }
            theorems.push(Theorem {
                id: t.id,
                family: t.family,
                category: t.category,
                statement: t.statement,
                preconditions,
                conclusions,
                motivates,
                distinct: t.distinct,
            });
        }

        let by_id: BTreeMap<&str, &Theorem> = theorems.iter().map(|t| (t.id.as_str(), t)).collect();
        let mut substrates = Vec::new();
        let mut sids = BTreeSet::new();
        let mut kinds = BTreeSet::new();
        for (i, s) in raw.substrate.into_iter().enumerate() {
            let entry = if s.id.is_empty() {
                format!("substrate[{i}]")
            } else {
                format!("substrate {:?}", s.id)
            };
            if s.id.is_empty() {
                return Err(schema(entry, "id", "empty id"));
            }
            if !sids.insert(s.id.clone()) {
                return Err(schema(entry, "id", "duplicate id"));
            }
            let (nverts, has_center) =
                kind_shape(&s.kind).ok_or_else(|| schema(&entry, "kind", format!("unknown substrate kind {:?}", s.kind)))?;
            if !kinds.insert(s.kind.clone()) {
                return Err(schema(&entry, "kind", format!("kind {:?} appears twice", s.kind)));
            }
            if !GROUPS.contains(&s.group.as_str()) {
                return Err(schema(&entry, "group", format!("unknown group {:?}", s.group)));
            }
            let g = &s.generator;
            if !(g.side[0] > 0.0 && g.side[0] <= g.side[1]) {
                return Err(schema(&entry, "generator.side", "range must be positive and ordered"));
            }
            for (name, r) in [("angle", g.angle), ("ratio", g.ratio)] {
                if let Some(r) = r {
                    if !(r[0] > 0.0 && r[0] <= r[1]) {
                        return Err(schema(&entry, format!("generator.{name}"), "range must be positive and ordered"));
                    }
                }
            }
            if s.templates.is_empty() {
                return Err(schema(&entry, "templates", "must not be empty"));
            }
            for (k, tpl) in s.templates.iter().enumerate() {
                let field = format!("templates[{k}]");
                let parts = parse_template(tpl).map_err(|e| schema(&entry, &field, e))?;
                let check = |v: &VRef| match v {
                    VRef::Idx(n) if *n >= nverts => Err(schema(&entry, &field, format!("vertex {n} out of range"))),
                    VRef::Center if !has_center => Err(schema(&entry, &field, "kind has no center")),
                    _ => Ok(()),
                };
                for p in &parts {
                    match p {
                        TemplatePart::Vertex(v) => check(v)?,
                        TemplatePart::Len(a, b) => {
                            check(a)?;
                            check(b)?;
                        }
                        TemplatePart::Angle(a, b, c) => {
                            check(a)?;
                            check(b)?;
                            check(c)?;
                        }
                        TemplatePart::Radius if !has_center => {
                            return Err(schema(&entry, &field, "kind has no radius"))
                        }
                        _ => {}
                    }
                }
            }
            for (k, id) in s.theorems.iter().enumerate() {
                match by_id.get(id.as_str()) {
                    None => {
                        return Err(schema(&entry, format!("theorems[{k}]"), format!("unknown theorem id {id:?}")))
                    }
                    Some(t) if t.category != Category::Substrate => {
                        return Err(schema(
                            &entry,
                            format!("theorems[{k}]"),
                            format!("theorem {id:?} is not substrate-related"),
                        ))
                    }
                    _ => {}
                }
            }
            let injectable = s
                .injectable
                .iter()
                .enumerate()
                .map(|(k, r)| match r.parse::<Role>() {
                    Ok(Role::Side) => Err(schema(&entry, format!("injectable[{k}]"), "sides are not injected")),
                    Ok(role) => Ok(role),
                    Err(e) => Err(schema(&entry, format!("injectable[{k}]"), e)),
                })
                .collect::<Result<Vec<_>, _>>()?;
            substrates.push(Substrate {
                id: s.id,
                kind: s.kind,
                group: s.group,
                generator: s.generator,
                templates: s.templates,
                theorem_ids: s.theorems,
                injectable,
            });
        }
        Ok(Catalog {
            schema_version: raw.schema_version,
            note: raw.note,
            theorems,
            substrates,
        })
    }

    /// Canonical TOML form: atoms in canonical syntax, fixed field order.
    pub fn to_toml(&self) -> String {
        let raw = RawCatalog {
            schema_version: self.schema_version,
            note: self.note.clone(),
            theorem: self
                .theorems
                .iter()
                .map(|t| RawTheorem {
                    id: t.id.clone(),
                    family: t.family.clone(),
                    category: t.category,
                    statement: t.statement.clone(),
                    distinct: t.distinct,
                    require: t.preconditions.iter().map(|a| a.to_string()).collect(),
                    conclude: t.conclusions.iter().map(|a| a.to_string()).collect(),
                    motivates: t.motivates.iter().map(|r| r.as_str().to_string()).collect(),
                })
                .collect(),
            substrate: self
                .substrates
                .iter()
                .map(|s| RawSubstrate {
                    id: s.id.clone(),
                    kind: s.kind.clone(),
                    group: s.group.clone(),
                    generator: s.generator.clone(),
                    templates: s.templates.clone(),
                    theorems: s.theorem_ids.clone(),
                    injectable: s.injectable.iter().map(|r| r.as_str().to_string()).collect(),
                })
                .collect(),
        };
        toml::to_string(&raw).expect("catalog serializes")
    }

    pub fn check_cardinality(&self) -> Result<(), CatalogError> {
        if self.theorems.len() == EXPECTED_THEOREMS && self.substrates.len() == EXPECTED_SUBSTRATES {
            Ok(())
        } else {
            Err(CatalogError::Cardinality {
                theorems: self.theorems.len(),
                substrates: self.substrates.len(),
            })
        }
    }

    pub fn theorem(&self, id: &str) -> Option<&Theorem> {
        self.theorems.iter().find(|t| t.id == id)
    }

    pub fn substrate_by_kind(&self, kind: &str) -> Option<&Substrate> {
        self.substrates.iter().find(|s| s.kind == kind)
    }
}

// ---------------------------------------------------------------------------
// sampling

/// Samples `per_category_count` theorems from each category without
/// replacement. Optional weights are keyed by family; missing families
/// weigh 1.
pub fn sample_theorems<'a, R: Rng + ?Sized>(
    theorems: &'a [Theorem],
    rng: &mut R,
    per_category_count: usize,
    family_weights: Option<&BTreeMap<String, f64>>,
) -> Vec<&'a Theorem> {
    let count = per_category_count.clamp(1, 3);
    let mut out = Vec::new();
    for cat in [Category::Substrate, Category::LineElement] {
        let pool: Vec<&Theorem> = theorems.iter().filter(|t| t.category == cat).collect();
        match family_weights {
            None => out.extend(pool.choose_multiple(rng, count).copied()),
            Some(w) => {
                let weight = |t: &&Theorem| w.get(&t.family).copied().unwrap_or(1.0).max(0.0);
                let picked = pool
                    .choose_multiple_weighted(rng, count, weight)
                    .map(|it| it.copied().collect::<Vec<_>>())
                    .unwrap_or_else(|_| pool.choose_multiple(rng, count).copied().collect());
                out.extend(picked);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// instantiation

/// A theorem conclusion instantiated on scene vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Fact {
    pub theorem_id: String,
    pub statement: Atom,
    pub binding: BTreeMap<Label, Label>,
}

impl Fact {
    /// Human-readable form, e.g. `∠ABC = ∠ACB`.
    pub fn text(&self) -> String {
        self.statement.friendly()
    }
}

fn trivial(a: &Atom) -> bool {
    match a {
        Atom::Cmp(l, expr::Cmp::Eq, r) => l.canonical() == r.canonical(),
        _ => false,
    }
}

/// Conclusions of `theorem` instantiated for every binding satisfying
/// its preconditions, deduplicated.
pub fn applicable_conclusions(theorem: &Theorem, scene: &Scene) -> Vec<Fact> {
    if scene.vertices().is_empty() {
        return Vec::new();
    }
    let ctx = MatchContext::new(scene);
    let mut seen = BTreeSet::new();
    conclusions_in(&ctx, theorem, &mut seen)
}

/// As [`applicable_conclusions`], sharing a match context and a
/// deduplication set across theorems.
pub fn conclusions_in(ctx: &MatchContext, theorem: &Theorem, seen: &mut BTreeSet<String>) -> Vec<Fact> {
    let mut out = Vec::new();
    for binding in ctx.bindings(&theorem.preconditions, theorem.distinct) {
        for c in &theorem.conclusions {
            let statement = c.substitute(&binding);
            if trivial(&statement) || !seen.insert(statement.canonical_key()) {
                continue;
            }
            out.push(Fact {
                theorem_id: theorem.id.clone(),
                statement,
                binding: binding.clone(),
            });
        }
    }
    out
}

/// Checks an instantiated statement against coordinates with the
/// absolute conclusion tolerance. Returns whether it holds and the residual.
pub fn check_statement(statement: &Atom, coords: &dyn Coords) -> Result<(bool, f64), EvalError> {
    match eval_geometric(statement, coords, Tolerance::Absolute(CONCLUSION_TOL))? {
        Some(r) => Ok(r),
        None => Ok((false, f64::INFINITY)),
    }
}
