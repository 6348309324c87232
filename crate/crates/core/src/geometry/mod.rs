//! Planar geometry kernel.
//!
//! Double-precision coordinates with residual-based predicates. Every
//! equality or incidence decision compares a residual against [`EPS`].

mod construct;
mod relations;
mod scene;

pub use construct::{construct_special_line, Anchor, Construction};
pub use relations::{relation_tests, Relation, RelationKind};
pub use scene::{
    angle_id, collinear, segment_id, Annotation, AnnotationTarget, ConstructionStep, Primitive, Scene, SceneIndex, Shape,
    StepKind, SubstrateInstance, Vertex,
};

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// Residual threshold for equality and incidence relations.
pub const EPS: f64 = 1e-9;

/// Polygons with a smaller area are collinear-degenerate.
pub const MIN_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("degenerate ray: endpoint coincides with the angle vertex")]
    DegenerateRay,
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersection(usize, usize),
    #[error("polygon is collinear-degenerate (area {0:e})")]
    Degenerate(f64),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("vertex label {0} is already registered")]
    DuplicateLabel(String),
    #[error("degenerate anchor: {0}")]
    DegenerateAnchor(String),
    #[error("construction impossible: {0}")]
    ConstructionImpossible(String),
    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(GeometryError::NonFinite(x, y))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn unit(self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(1.0 / n))
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn midpoint(self, o: Point) -> Point {
        Point::new((self.x + o.x) / 2.0, (self.y + o.y) / 2.0)
    }

    /// Counter-clockwise rotation by `deg` degrees about the origin.
    pub fn rotate(self, deg: f64) -> Point {
        let (s, c) = deg.to_radians().sin_cos();
        Point::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    pub fn polar(center: Point, radius: f64, deg: f64) -> Point {
        let (s, c) = deg.to_radians().sin_cos();
        Point::new(center.x + radius * c, center.y + radius * s)
    }
}

/// Vertex name: an uppercase letter optionally followed by a numeric subscript.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(String);

impl Label {
    /// The `n`-th label in registration order: A..Z, then A1..Z1, A2...
    pub fn nth(n: usize) -> Label {
        let letter = (b'A' + (n % 26) as u8) as char;
        match n / 26 {
            0 => Label(letter.to_string()),
            k => Label(format!("{letter}{k}")),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn key(&self) -> (u32, char) {
        let mut chars = self.0.chars();
        let letter = chars.next().unwrap_or('A');
        let sub = chars.as_str().parse().unwrap_or(0);
        (sub, letter)
    }

    /// Splits a concatenation like `AB1C` into labels `A`, `B1`, `C`.
    pub fn split_run(s: &str) -> Option<Vec<Label>> {
        let mut out = Vec::new();
        let bytes = s.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if !bytes[i].is_ascii_uppercase() {
                return None;
            }
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Label(s[start..i].to_string()));
        }
        (!out.is_empty()).then_some(out)
    }

    pub fn is_valid(s: &str) -> bool {
        let mut chars = s.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
            && chars.clone().all(|c| c.is_ascii_digit())
            && !chars.as_str().starts_with('0')
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if Label::is_valid(s) {
            Ok(Label(s.to_string()))
        } else {
            Err(format!("invalid vertex label {s:?}"))
        }
    }
}

impl TryFrom<String> for Label {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        l.0
    }
}

impl From<&str> for Label {
    /// Panics on an invalid label; intended for literals.
    fn from(s: &str) -> Label {
        s.parse().expect("valid vertex label")
    }
}

/// Construction roles a primitive can carry. Closed vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Side,
    Midline,
    AngleBisector,
    Altitude,
    Median,
    Radius,
    Chord,
    Tangent,
    Diagonal,
    ParallelAuxiliary,
    PerpendicularBisector,
}

impl Role {
    pub const ALL: [Role; 11] = [
        Role::Side,
        Role::Midline,
        Role::AngleBisector,
        Role::Altitude,
        Role::Median,
        Role::Radius,
        Role::Chord,
        Role::Tangent,
        Role::Diagonal,
        Role::ParallelAuxiliary,
        Role::PerpendicularBisector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Side => "side",
            Role::Midline => "midline",
            Role::AngleBisector => "angle-bisector",
            Role::Altitude => "altitude",
            Role::Median => "median",
            Role::Radius => "radius",
            Role::Chord => "chord",
            Role::Tangent => "tangent",
            Role::Diagonal => "diagonal",
            Role::ParallelAuxiliary => "parallel-auxiliary",
            Role::PerpendicularBisector => "perpendicular-bisector",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

/// An angle `ray1 -> vertex -> ray2` with its measure in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleMeasure {
    pub vertex: Label,
    pub ray1: Label,
    pub ray2: Label,
    pub degrees: f64,
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Unsigned angle in degrees, in `[0, 180]`, between `vertex->p` and `vertex->q`.
pub fn angle_at(vertex: Point, p: Point, q: Point) -> Result<f64, GeometryError> {
    let u = p.sub(vertex).unit().ok_or(GeometryError::DegenerateRay)?;
    let v = q.sub(vertex).unit().ok_or(GeometryError::DegenerateRay)?;
    Ok(u.dot(v).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Twice the signed area; positive for counter-clockwise order.
pub fn signed_area2(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum()
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(vertices: &[Point]) -> Result<f64, GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    if let Some(&p) = vertices.iter().find(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite(p.x, p.y));
    }
    if let Some((i, j)) = first_self_intersection(vertices) {
        return Err(GeometryError::SelfIntersection(i, j));
    }
    let area = signed_area2(vertices).abs() / 2.0;
    if area < MIN_AREA {
        return Err(GeometryError::Degenerate(area));
    }
    Ok(area)
}

/// O(n^2) scan for a pair of polygon edges that intersect anywhere other than
/// at the vertex they share.
pub fn first_self_intersection(vertices: &[Point]) -> Option<(usize, usize)> {
    let n = vertices.len();
    let edge = |i: usize| (vertices[i], vertices[(i + 1) % n]);
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges may only share their common vertex; they
                // fail when they fold back over each other.
                let shared = if j == i + 1 { b } else { a };
                let other_i = if j == i + 1 { a } else { b };
                let other_j = if j == i + 1 { d } else { c };
                let u = other_i.sub(shared);
                let v = other_j.sub(shared);
                let folded = u.cross(v).abs() <= EPS * u.norm() * v.norm() && u.dot(v) > 0.0;
                if folded {
                    return Some((i, j));
                }
            } else if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_box(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let scale = distance(a, b).max(distance(c, d)).max(1.0);
    let tol = EPS * scale;
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol))
        && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))
    {
        return true;
    }
    (d1.abs() <= tol && on_box(c, d, a))
        || (d2.abs() <= tol && on_box(c, d, b))
        || (d3.abs() <= tol && on_box(a, b, c))
        || (d4.abs() <= tol && on_box(a, b, d))
}

/// Intersection point of the open segments `ab` and `cd` when they cross
/// properly (interior to both).
pub fn proper_crossing(a: Point, b: Point, c: Point, d: Point) -> Option<Point> {
    let r = b.sub(a);
    let s = d.sub(c);
    let denom = r.cross(s);
    if denom.abs() <= EPS * r.norm() * s.norm() {
        return None;
    }
    let t = c.sub(a).cross(s) / denom;
    let u = c.sub(a).cross(r) / denom;
    let margin = 1e-7;
    (t > margin && t < 1.0 - margin && u > margin && u < 1.0 - margin).then(|| a.lerp(b, t))
}

/// Distance from `p` to the infinite line through `a` and `b`.
pub fn point_line_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b.sub(a);
    let n = d.norm();
    if n == 0.0 {
        return distance(p, a);
    }
    d.cross(p.sub(a)).abs() / n
}

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b.sub(a);
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return distance(p, a);
    }
    let t = (p.sub(a).dot(d) / len2).clamp(0.0, 1.0);
    distance(p, a.lerp(b, t))
}

/// Orthogonal projection of `p` onto the line `ab`, with its parameter `t`.
pub fn project(p: Point, a: Point, b: Point) -> (Point, f64) {
    let d = b.sub(a);
    let t = p.sub(a).dot(d) / d.dot(d);
    (a.lerp(b, t), t)
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len().max(1) as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
    Point::new(sx / n, sy / n)
}

/// True when `a` and `b` agree within `EPS` relative to their magnitude.
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS * a.abs().max(b.abs()).max(1.0)
}
