//! Analytic constructions of auxiliary line elements.
//!
//! Every construction computes its endpoints in closed form and only
//! produces segments whose endpoints are existing vertices or lie on
//! existing primitives.

use super::scene::{collinear, Primitive, Scene};
use super::{distance, point_line_distance, project, proper_crossing, GeometryError, Label, Point, Role, EPS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "anchor", rename_all = "kebab-case")]
pub enum Anchor {
    /// Corner at `apex` with arms towards `b` and `c`. Used by median,
    /// altitude and angle-bisector (towards side `bc`) and midline.
    Corner { apex: Label, b: Label, c: Label },
    /// Two drawn sides `ab` and `cd`: midline joining their midpoints.
    Sides { a: Label, b: Label, c: Label, d: Label },
    /// Existing vertices `a` and `b`: perpendicular bisector of `ab`,
    /// diagonal `ab`, chord `ab`, or radius `ab` with `a` the center.
    Segment { a: Label, b: Label },
    /// Line through `through` parallel to `ab`.
    Parallel { through: Label, a: Label, b: Label },
    /// Fresh point on the circle centred at `center` at a polar angle.
    CirclePoint { center: Label, degrees: f64 },
    /// Chord between two polar angles on the circle centred at `center`.
    Chord { center: Label, from_deg: f64, to_deg: f64 },
    /// Tangent from an external point; `first` picks the contact point.
    External { point: Label, center: Label, first: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub primitive: usize,
    pub from: Label,
    pub to: Label,
    /// Endpoints that did not exist before.
    pub new_vertices: Vec<Label>,
    /// Crossing points with earlier segments, registered as vertices.
    pub crossings: Vec<Label>,
}

enum End {
    Existing(Label),
    Fresh(Point),
}

impl End {
    fn point(&self, scene: &Scene) -> Point {
        match self {
            End::Existing(l) => scene.point(l).expect("checked"),
            End::Fresh(p) => *p,
        }
    }
}

/// Constructs a special line of the given role and adds it to the scene.
/// The scene is left unchanged on error.
pub fn construct_special_line(
    scene: &mut Scene,
    kind: Role,
    anchor: &Anchor,
) -> Result<Construction, GeometryError> {
    let (from, to) = plan(scene, kind, anchor)?;
    let (p, q) = (from.point(scene), to.point(scene));
    if distance(p, q) <= EPS * p.norm().max(1.0) {
        return Err(GeometryError::DegenerateAnchor(format!(
            "{kind} has zero length"
        )));
    }
    check_no_overlap(scene, p, q)?;

    let mut new_vertices = Vec::new();
    let mut resolve = |scene: &mut Scene, end: End| -> Result<Label, GeometryError> {
        match end {
            End::Existing(l) => Ok(l),
            End::Fresh(pt) => {
                let (l, fresh) = scene.register_point(pt)?;
                if fresh {
                    new_vertices.push(l.clone());
                }
                Ok(l)
            }
        }
    };
    let a = resolve(scene, from)?;
    let b = resolve(scene, to)?;
    let primitive = scene.add_primitive(Primitive::segment(a.clone(), b.clone(), kind))?;

    let mut crossings = Vec::new();
    let earlier: Vec<(Point, Point)> = scene
        .segments()
        .filter(|(i, _, _)| *i != primitive)
        .map(|(_, c, d)| (scene.point(c).unwrap(), scene.point(d).unwrap()))
        .collect();
    for (c, d) in earlier {
        if let Some(x) = proper_crossing(p, q, c, d) {
            let (l, fresh) = scene.register_point(x)?;
            if fresh {
                crossings.push(l);
            }
        }
    }
    Ok(Construction {
        primitive,
        from: a,
        to: b,
        new_vertices,
        crossings,
    })
}

fn plan(scene: &Scene, kind: Role, anchor: &Anchor) -> Result<(End, End), GeometryError> {
    let idx = scene.index();
    let impossible = |m: &str| GeometryError::ConstructionImpossible(format!("{kind}: {m}"));
    let degenerate = |m: &str| GeometryError::DegenerateAnchor(format!("{kind}: {m}"));
    match (kind, anchor) {
        (Role::Median | Role::Altitude | Role::AngleBisector | Role::Midline, Anchor::Corner { apex, b, c }) => {
            let (pa, pb, pc) = (scene.require(apex)?, scene.require(b)?, scene.require(c)?);
            if collinear(pa, pb, pc) || b == c {
                return Err(degenerate("corner is collinear"));
            }
            match kind {
                Role::Median => {
                    if !idx.is_connected(b, c) {
                        return Err(impossible("opposite side is not drawn"));
                    }
                    Ok((End::Existing(apex.clone()), End::Fresh(pb.midpoint(pc))))
                }
                Role::Altitude => {
                    if !idx.is_connected(b, c) {
                        return Err(impossible("opposite side is not drawn"));
                    }
                    let (foot, t) = project(pa, pb, pc);
                    if !(1e-6..=1.0 - 1e-6).contains(&t) {
                        return Err(impossible("foot of the perpendicular is off the side"));
                    }
                    Ok((End::Existing(apex.clone()), End::Fresh(foot)))
                }
                Role::AngleBisector => {
                    if !idx.is_connected(apex, b) || !idx.is_connected(apex, c) {
                        return Err(impossible("angle arms are not drawn"));
                    }
                    if idx.is_connected(b, c) {
                        // divides bc in the ratio of the adjacent sides
                        let (ab, ac) = (distance(pa, pb), distance(pa, pc));
                        let foot = pb.scale(ac / (ab + ac)).add(pc.scale(ab / (ab + ac)));
                        Ok((End::Existing(apex.clone()), End::Fresh(foot)))
                    } else {
                        let dir = pb.sub(pa).unit().unwrap().add(pc.sub(pa).unit().unwrap());
                        let hit = cast(scene, pa, dir).ok_or_else(|| impossible("bisector ray leaves the figure"))?;
                        Ok((End::Existing(apex.clone()), hit_end(scene, hit)))
                    }
                }
                _ => {
                    if !idx.is_connected(apex, b) || !idx.is_connected(apex, c) {
                        return Err(impossible("triangle sides are not drawn"));
                    }
                    Ok((End::Fresh(pa.midpoint(pb)), End::Fresh(pa.midpoint(pc))))
                }
            }
        }
        (Role::Midline, Anchor::Sides { a, b, c, d }) => {
            let (pa, pb, pc, pd) = (scene.require(a)?, scene.require(b)?, scene.require(c)?, scene.require(d)?);
            if !idx.is_connected(a, b) || !idx.is_connected(c, d) {
                return Err(impossible("sides are not drawn"));
            }
            Ok((End::Fresh(pa.midpoint(pb)), End::Fresh(pc.midpoint(pd))))
        }
        (Role::PerpendicularBisector, Anchor::Segment { a, b }) => {
            let (pa, pb) = (scene.require(a)?, scene.require(b)?);
            if !idx.is_connected(a, b) {
                return Err(impossible("segment is not drawn"));
            }
            let m = pa.midpoint(pb);
            let normal = pb.sub(pa).rotate(90.0);
            let toward = super::centroid(&idx.points).sub(m);
            let dirs = if normal.dot(toward) >= 0.0 {
                [normal, normal.scale(-1.0)]
            } else {
                [normal.scale(-1.0), normal]
            };
            let hit = dirs
                .iter()
                .find_map(|d| cast(scene, m, *d))
                .ok_or_else(|| impossible("bisector leaves the figure"))?;
            Ok((End::Fresh(m), hit_end(scene, hit)))
        }
        (Role::Diagonal | Role::Chord, Anchor::Segment { a, b }) => {
            scene.require(a)?;
            scene.require(b)?;
            if a == b {
                return Err(degenerate("endpoints coincide"));
            }
            if idx.is_connected(a, b) {
                return Err(impossible("segment already drawn"));
            }
            if kind == Role::Chord && !on_common_circle(&idx, a, b) {
                return Err(impossible("endpoints are not on one circle"));
            }
            Ok((End::Existing(a.clone()), End::Existing(b.clone())))
        }
        (Role::Radius, Anchor::Segment { a, b }) => {
            let (_, r) = circle_at(scene, a).ok_or_else(|| degenerate("no circle at center"))?;
            let pb = scene.require(b)?;
            if (distance(scene.require(a)?, pb) - r).abs() > EPS * r.max(1.0) {
                return Err(impossible("point is not on the circle"));
            }
            if idx.is_connected(a, b) {
                return Err(impossible("radius already drawn"));
            }
            Ok((End::Existing(a.clone()), End::Existing(b.clone())))
        }
        (Role::Radius, Anchor::CirclePoint { center, degrees }) => {
            let (c, r) = circle_at(scene, center).ok_or_else(|| degenerate("no circle at center"))?;
            Ok((End::Existing(center.clone()), End::Fresh(Point::polar(c, r, *degrees))))
        }
        (Role::Chord, Anchor::Chord { center, from_deg, to_deg }) => {
            let (c, r) = circle_at(scene, center).ok_or_else(|| degenerate("no circle at center"))?;
            let sep = (from_deg - to_deg).rem_euclid(360.0);
            if sep < 1e-6 || sep > 360.0 - 1e-6 {
                return Err(degenerate("chord endpoints coincide"));
            }
            Ok((
                End::Fresh(Point::polar(c, r, *from_deg)),
                End::Fresh(Point::polar(c, r, *to_deg)),
            ))
        }
        (Role::Tangent, Anchor::External { point, center, first }) => {
            let (c, r) = circle_at(scene, center).ok_or_else(|| degenerate("no circle at center"))?;
            let p = scene.require(point)?;
            let d = distance(p, c);
            if d <= r * (1.0 + EPS) {
                return Err(impossible("tangent from a point that is not outside the circle"));
            }
            let theta = (r / d).acos().to_degrees();
            let towards = p.sub(c).unit().unwrap();
            let dir = towards.rotate(if *first { theta } else { -theta });
            Ok((End::Existing(point.clone()), End::Fresh(c.add(dir.scale(r)))))
        }
        (Role::ParallelAuxiliary, Anchor::Parallel { through, a, b }) => {
            let (pt, pa, pb) = (scene.require(through)?, scene.require(a)?, scene.require(b)?);
            if distance(pa, pb) <= EPS {
                return Err(degenerate("reference segment has zero length"));
            }
            if point_line_distance(pt, pa, pb) <= EPS * distance(pa, pb).max(1.0) {
                return Err(degenerate("point lies on the reference line"));
            }
            let dir = pb.sub(pa);
            let hits = [cast(scene, pt, dir), cast(scene, pt, dir.scale(-1.0))];
            let hit = hits
                .into_iter()
                .flatten()
                .min_by(|x, y| distance(pt, x.0).total_cmp(&distance(pt, y.0)))
                .ok_or_else(|| impossible("parallel line leaves the figure"))?;
            Ok((End::Existing(through.clone()), hit_end(scene, hit)))
        }
        (Role::Side, _) => Err(impossible("sides come from substrates")),
        _ => Err(degenerate("anchor does not fit this construction")),
    }
}

fn circle_at(scene: &Scene, center: &Label) -> Option<(Point, f64)> {
    scene
        .circles()
        .find(|(_, c, _)| *c == center)
        .map(|(_, c, r)| (scene.point(c).unwrap(), r))
}

fn on_common_circle(idx: &super::SceneIndex, a: &Label, b: &Label) -> bool {
    let (Some(i), Some(j)) = (idx.idx(a), idx.idx(b)) else {
        return false;
    };
    idx.circles
        .iter()
        .any(|(_, _, _, members)| members.contains(&i) && members.contains(&j))
}

/// A ray hit: the point and, when it coincides with a vertex, its label.
type Hit = (Point, Option<Label>);

fn hit_end(scene: &Scene, hit: Hit) -> End {
    match hit.1.or_else(|| scene.vertex_near(hit.0)) {
        Some(l) => End::Existing(l),
        None => End::Fresh(hit.0),
    }
}

/// Nearest point where the ray `origin + t*dir` (t > 0) meets a segment
/// or circle of the scene.
fn cast(scene: &Scene, origin: Point, dir: Point) -> Option<Hit> {
    let dir = dir.unit()?;
    let tmin = 1e-7 * origin.norm().max(1.0);
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t > tmin && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    for (_, a, b) in scene.segments() {
        let (pa, pb) = (scene.point(a).unwrap(), scene.point(b).unwrap());
        let s = pb.sub(pa);
        let denom = dir.cross(s);
        if denom.abs() <= EPS * s.norm() {
            continue;
        }
        let w = pa.sub(origin);
        let t = w.cross(s) / denom;
        let u = w.cross(dir) / denom;
        if (-EPS..=1.0 + EPS).contains(&u) {
            consider(t);
        }
    }
    for (_, c, r) in scene.circles() {
        let pc = scene.point(c).unwrap();
        let w = origin.sub(pc);
        let bq = w.dot(dir);
        let disc = bq * bq - (w.dot(w) - r * r);
        if disc < 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        consider(-bq - sq);
        consider(-bq + sq);
    }
    let t = best?;
    let p = origin.add(dir.scale(t));
    Some((p, scene.vertex_near(p)))
}

/// Rejects a new segment that would run along an existing one.
fn check_no_overlap(scene: &Scene, p: Point, q: Point) -> Result<(), GeometryError> {
    for (_, a, b) in scene.segments() {
        let (pa, pb) = (scene.point(a).unwrap(), scene.point(b).unwrap());
        let scale = distance(pa, pb).max(1.0);
        if point_line_distance(p, pa, pb) > EPS * scale || point_line_distance(q, pa, pb) > EPS * scale {
            continue;
        }
        let d = pb.sub(pa);
        let len2 = d.dot(d);
        let (mut t0, mut t1) = (p.sub(pa).dot(d) / len2, q.sub(pa).dot(d) / len2);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        let overlap = t1.min(1.0) - t0.max(0.0);
        if overlap > 1e-9 {
            return Err(GeometryError::ConstructionImpossible(format!(
                "new segment overlaps {a}{b}"
            )));
        }
    }
    Ok(())
}
