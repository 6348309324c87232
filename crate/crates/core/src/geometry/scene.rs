use super::{distance, point_segment_distance, GeometryError, Label, Point, Role, EPS};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub label: Label,
    #[serde(flatten)]
    pub point: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Segment { a: Label, b: Label },
    Circle { center: Label, radius: f64 },
    Arc { center: Label, from: Label, to: Label },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub roles: BTreeSet<Role>,
}

impl Primitive {
    pub fn segment(a: Label, b: Label, role: Role) -> Self {
        Self {
            shape: Shape::Segment { a, b },
            roles: BTreeSet::from([role]),
        }
    }

    pub fn circle(center: Label, radius: f64) -> Self {
        Self {
            shape: Shape::Circle { center, radius },
            roles: BTreeSet::new(),
        }
    }

    pub fn endpoints(&self) -> Option<(&Label, &Label)> {
        match &self.shape {
            Shape::Segment { a, b } => Some((a, b)),
            _ => None,
        }
    }

    pub fn has_endpoints(&self, p: &Label, q: &Label) -> bool {
        matches!(self.endpoints(), Some((a, b)) if (a == p && b == q) || (a == q && b == p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnnotationTarget {
    Length { a: Label, b: Label },
    Angle { ray1: Label, vertex: Label, ray2: Label },
    Radius { center: Label },
}

impl AnnotationTarget {
    /// Element id used by ledgers and claims: `AB`, `∠ABC`, `r(O)`.
    pub fn element_id(&self) -> String {
        match self {
            AnnotationTarget::Length { a, b } => segment_id(a, b),
            AnnotationTarget::Angle { ray1, vertex, ray2 } => angle_id(ray1, vertex, ray2),
            AnnotationTarget::Radius { center } => format!("r({center})"),
        }
    }
}

/// Canonical segment id: endpoint labels in label order.
pub fn segment_id(a: &Label, b: &Label) -> String {
    if a <= b {
        format!("{a}{b}")
    } else {
        format!("{b}{a}")
    }
}

/// Canonical angle id: vertex in the middle, rays in label order.
pub fn angle_id(p: &Label, vertex: &Label, q: &Label) -> String {
    if p <= q {
        format!("∠{p}{vertex}{q}")
    } else {
        format!("∠{q}{vertex}{p}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub target: AnnotationTarget,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "kebab-case")]
pub enum StepKind {
    Substrate { kind: String },
    Injection { role: Role },
    Angles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionStep {
    #[serde(flatten)]
    pub kind: StepKind,
    pub theorem_ids: Vec<String>,
    /// Vertices introduced or referenced by this step.
    pub vertices: Vec<Label>,
    /// Primitive indices added by this step.
    pub primitives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstrateInstance {
    pub kind: String,
    pub group: String,
    /// Polygon or key points in recipe order.
    pub vertices: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Label>,
}

/// The evolving figure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    vertices: Vec<Vertex>,
    primitives: Vec<Primitive>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub construction_log: Vec<ConstructionStep>,
    #[serde(default)]
    pub substrates: Vec<SubstrateInstance>,
    /// Next label index; labels are never reused.
    #[serde(default)]
    next_label: usize,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn point(&self, label: &Label) -> Option<Point> {
        self.vertices
            .iter()
            .find(|v| &v.label == label)
            .map(|v| v.point)
    }

    pub fn require(&self, label: &Label) -> Result<Point, GeometryError> {
        self.point(label)
            .ok_or_else(|| GeometryError::UnknownVertex(label.to_string()))
    }

    pub fn has_vertex(&self, label: &Label) -> bool {
        self.vertices.iter().any(|v| &v.label == label)
    }

    /// Registers a point under the next free label.
    pub fn add_vertex(&mut self, point: Point) -> Result<Label, GeometryError> {
        let p = Point::try_new(point.x, point.y)?;
        let label = loop {
            let l = Label::nth(self.next_label);
            self.next_label += 1;
            if !self.has_vertex(&l) {
                break l;
            }
        };
        self.vertices.push(Vertex {
            label: label.clone(),
            point: p,
        });
        Ok(label)
    }

    /// Registers a point under an explicit label.
    pub fn add_labeled(&mut self, label: Label, point: Point) -> Result<(), GeometryError> {
        let p = Point::try_new(point.x, point.y)?;
        if self.has_vertex(&label) {
            return Err(GeometryError::DuplicateLabel(label.to_string()));
        }
        self.vertices.push(Vertex { label, point: p });
        Ok(())
    }

    /// Existing vertex within `EPS` of `p`.
    pub fn vertex_near(&self, p: Point) -> Option<Label> {
        self.vertices
            .iter()
            .find(|v| distance(v.point, p) <= EPS * p.norm().max(1.0))
            .map(|v| v.label.clone())
    }

    /// Returns the existing vertex at `p` or registers a new one.
    pub fn register_point(&mut self, p: Point) -> Result<(Label, bool), GeometryError> {
        match self.vertex_near(p) {
            Some(l) => Ok((l, false)),
            None => self.add_vertex(p).map(|l| (l, true)),
        }
    }

    pub fn add_primitive(&mut self, prim: Primitive) -> Result<usize, GeometryError> {
        self.check_primitive(&prim)?;
        self.primitives.push(prim);
        Ok(self.primitives.len() - 1)
    }

    pub fn primitive_mut(&mut self, idx: usize) -> Option<&mut Primitive> {
        self.primitives.get_mut(idx)
    }

    fn check_primitive(&self, prim: &Primitive) -> Result<(), GeometryError> {
        match &prim.shape {
            Shape::Segment { a, b } => {
                let pa = self.require(a)?;
                let pb = self.require(b)?;
                if a == b || distance(pa, pb) <= EPS {
                    return Err(GeometryError::InvalidPrimitive(format!(
                        "segment {a}{b} has coincident endpoints"
                    )));
                }
            }
            Shape::Circle { center, radius } => {
                self.require(center)?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(GeometryError::InvalidPrimitive(format!(
                        "circle {center} has radius {radius}"
                    )));
                }
            }
            Shape::Arc { center, from, to } => {
                let c = self.require(center)?;
                let f = self.require(from)?;
                let t = self.require(to)?;
                if (distance(c, f) - distance(c, t)).abs() > EPS * distance(c, f).max(1.0) {
                    return Err(GeometryError::InvalidPrimitive(format!(
                        "arc {from}{to} endpoints are not equidistant from {center}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks the structural invariants: finite unique vertices and
    /// primitives that reference registered vertices.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let mut seen = BTreeSet::new();
        for v in &self.vertices {
            if !v.point.is_finite() {
                return Err(GeometryError::NonFinite(v.point.x, v.point.y));
            }
            if !seen.insert(&v.label) {
                return Err(GeometryError::DuplicateLabel(v.label.to_string()));
            }
        }
        for p in &self.primitives {
            self.check_primitive(p)?;
        }
        Ok(())
    }

    pub fn segments(&self) -> impl Iterator<Item = (usize, &Label, &Label)> {
        self.primitives
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.endpoints().map(|(a, b)| (i, a, b)))
    }

    pub fn circles(&self) -> impl Iterator<Item = (usize, &Label, f64)> {
        self.primitives
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match &p.shape {
                Shape::Circle { center, radius } => Some((i, center, *radius)),
                _ => None,
            })
    }

    pub fn segment_index(&self, p: &Label, q: &Label) -> Option<usize> {
        self.primitives.iter().position(|s| s.has_endpoints(p, q))
    }

    pub fn role_multiset(&self) -> Vec<Role> {
        let mut roles: Vec<Role> = self
            .construction_log
            .iter()
            .filter_map(|s| match s.kind {
                StepKind::Injection { role } => Some(role),
                _ => None,
            })
            .collect();
        roles.sort();
        roles
    }

    pub fn index(&self) -> SceneIndex {
        SceneIndex::build(self)
    }
}

/// Derived incidence structure of a scene: which vertices lie on which
/// segments and circles, drawn connectivity, and triangles.
#[derive(Debug, Clone)]
pub struct SceneIndex {
    pub labels: Vec<Label>,
    pub points: Vec<Point>,
    by_label: HashMap<Label, usize>,
    /// `connected[i][j]`: some drawn segment contains both vertices.
    pub connected: Vec<Vec<bool>>,
    /// Vertices lying on each segment primitive, by primitive index.
    pub on_segment: Vec<(usize, Vec<usize>)>,
    /// (primitive index, center vertex, radius, vertices on the circle).
    pub circles: Vec<(usize, usize, f64, Vec<usize>)>,
    /// Vertex triples `i < j < k`, pairwise connected and not collinear.
    pub triangles: Vec<[usize; 3]>,
}

impl SceneIndex {
    fn build(scene: &Scene) -> Self {
        let labels: Vec<Label> = scene.vertices.iter().map(|v| v.label.clone()).collect();
        let points: Vec<Point> = scene.vertices.iter().map(|v| v.point).collect();
        let by_label: HashMap<Label, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let n = labels.len();
        let mut connected = vec![vec![false; n]; n];
        let mut on_segment = Vec::new();
        for (pi, a, b) in scene.segments() {
            let (pa, pb) = (points[by_label[a]], points[by_label[b]]);
            let tol = EPS * distance(pa, pb).max(1.0);
            let members: Vec<usize> = (0..n)
                .filter(|&i| point_segment_distance(points[i], pa, pb) <= tol)
                .collect();
            for &i in &members {
                for &j in &members {
                    if i != j {
                        connected[i][j] = true;
                    }
                }
            }
            on_segment.push((pi, members));
        }
        let circles = scene
            .circles()
            .map(|(pi, c, r)| {
                let ci = by_label[c];
                let members = (0..n)
                    .filter(|&i| {
                        i != ci && (distance(points[i], points[ci]) - r).abs() <= EPS * r.max(1.0)
                    })
                    .collect();
                (pi, ci, r, members)
            })
            .collect();
        let mut triangles = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if !connected[i][j] {
                    continue;
                }
                for k in (j + 1)..n {
                    if connected[i][k]
                        && connected[j][k]
                        && !collinear(points[i], points[j], points[k])
                    {
                        triangles.push([i, j, k]);
                    }
                }
            }
        }
        Self {
            labels,
            points,
            by_label,
            connected,
            on_segment,
            circles,
            triangles,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn idx(&self, l: &Label) -> Option<usize> {
        self.by_label.get(l).copied()
    }

    pub fn is_connected(&self, a: &Label, b: &Label) -> bool {
        match (self.idx(a), self.idx(b)) {
            (Some(i), Some(j)) => self.connected[i][j],
            _ => false,
        }
    }

    /// Neighbours of `i`, keeping only the nearest vertex along each
    /// distinct ray direction.
    pub fn ray_neighbours(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        let mut cands: Vec<usize> = (0..self.len()).filter(|&j| self.connected[i][j]).collect();
        cands.sort_by(|&a, &b| {
            distance(self.points[i], self.points[a])
                .total_cmp(&distance(self.points[i], self.points[b]))
        });
        for j in cands {
            let d = self.points[j].sub(self.points[i]);
            let dup = out.iter().any(|&k| {
                let e = self.points[k].sub(self.points[i]);
                d.cross(e).abs() <= EPS * d.norm() * e.norm() && d.dot(e) > 0.0
            });
            if !dup {
                out.push(j);
            }
        }
        out
    }
}

pub fn collinear(a: Point, b: Point, c: Point) -> bool {
    let u = b.sub(a);
    let v = c.sub(a);
    u.cross(v).abs() <= EPS * u.norm() * v.norm()
}
