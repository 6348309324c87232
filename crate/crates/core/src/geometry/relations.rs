use super::scene::{segment_id, Scene, SceneIndex};
use super::{distance, point_line_distance, project, Point, EPS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    Parallel,
    Perpendicular,
    EqualLength,
    CongruentTriangles,
    RightTriangle,
    Tangent,
    OnCircle,
    MidpointOf,
}

/// A relation between scene elements with the residual that decided it.
///
/// Element ids: segments `AB`, triangles `ABC` (vertex order gives the
/// correspondence for congruences), circles `⊙O`, points `D`. For
/// right triangles the second element is the right-angle vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub elements: Vec<String>,
    pub residual: f64,
}

fn direction(p: Point, q: Point) -> Point {
    q.sub(p).unit().unwrap_or(Point::new(0.0, 0.0))
}

/// All pairwise relations among the scene's segments, circles and the
/// triangles they form.
pub fn relation_tests(scene: &Scene) -> Vec<Relation> {
    let idx = scene.index();
    let mut out = Vec::new();
    let segs: Vec<(String, Point, Point)> = scene
        .segments()
        .map(|(_, a, b)| {
            (
                segment_id(a, b),
                scene.point(a).expect("registered"),
                scene.point(b).expect("registered"),
            )
        })
        .collect();

    for (i, (id1, a, b)) in segs.iter().enumerate() {
        for (id2, c, d) in &segs[i + 1..] {
            let u = direction(*a, *b);
            let v = direction(*c, *d);
            let cross = u.cross(v).abs();
            let scale = distance(*a, *b).max(distance(*c, *d)).max(1.0);
            if cross < EPS && point_line_distance(*c, *a, *b) > EPS * scale {
                out.push(Relation {
                    kind: RelationKind::Parallel,
                    elements: vec![id1.clone(), id2.clone()],
                    residual: cross,
                });
            }
            let dot = u.dot(v).abs();
            if dot < EPS {
                out.push(Relation {
                    kind: RelationKind::Perpendicular,
                    elements: vec![id1.clone(), id2.clone()],
                    residual: dot,
                });
            }
            let (l1, l2) = (distance(*a, *b), distance(*c, *d));
            let rel = (l1 - l2).abs() / l1.max(l2);
            if rel < EPS {
                out.push(Relation {
                    kind: RelationKind::EqualLength,
                    elements: vec![id1.clone(), id2.clone()],
                    residual: rel,
                });
            }
        }
    }

    triangle_relations(&idx, &mut out);

    for (_, ci, r, _) in &idx.circles {
        let center = idx.points[*ci];
        let cid = format!("⊙{}", idx.labels[*ci]);
        for (sid, a, b) in &segs {
            let (foot, t) = project(center, *a, *b);
            let gap = (distance(center, foot) - r).abs();
            if gap < EPS * r.max(1.0) && (-EPS..=1.0 + EPS).contains(&t) {
                out.push(Relation {
                    kind: RelationKind::Tangent,
                    elements: vec![cid.clone(), sid.clone()],
                    residual: gap,
                });
            }
        }
        for (vi, p) in idx.points.iter().enumerate() {
            if vi == *ci {
                continue;
            }
            let gap = (distance(center, *p) - r).abs();
            if gap < EPS * r.max(1.0) {
                out.push(Relation {
                    kind: RelationKind::OnCircle,
                    elements: vec![idx.labels[vi].to_string(), cid.clone()],
                    residual: gap,
                });
            }
        }
    }

    for (sid, a, b) in &segs {
        let mid = a.midpoint(*b);
        for (vi, p) in idx.points.iter().enumerate() {
            let gap = distance(mid, *p);
            if gap < EPS * distance(*a, *b).max(1.0) {
                out.push(Relation {
                    kind: RelationKind::MidpointOf,
                    elements: vec![idx.labels[vi].to_string(), sid.clone()],
                    residual: gap,
                });
            }
        }
    }
    out
}

fn triangle_relations(idx: &SceneIndex, out: &mut Vec<Relation>) {
    let name = |t: &[usize]| -> String { t.iter().map(|&i| idx.labels[i].as_str()).collect() };
    // sides opposite each vertex, with the vertex order kept for correspondence
    let sides: Vec<[f64; 3]> = idx
        .triangles
        .iter()
        .map(|&[i, j, k]| {
            let p = &idx.points;
            [
                distance(p[j], p[k]),
                distance(p[i], p[k]),
                distance(p[i], p[j]),
            ]
        })
        .collect();

    for (t, &[i, j, k]) in idx.triangles.iter().enumerate() {
        let p = &idx.points;
        for (v, a, b) in [(i, j, k), (j, i, k), (k, i, j)] {
            let cos = direction(p[v], p[a]).dot(direction(p[v], p[b])).abs();
            if cos < EPS {
                out.push(Relation {
                    kind: RelationKind::RightTriangle,
                    elements: vec![name(&[a, v, b]), idx.labels[v].to_string()],
                    residual: cos,
                });
            }
        }
        for (u, &other) in idx.triangles.iter().enumerate().skip(t + 1) {
            if let Some((perm, residual)) = sss_match(&sides[t], &sides[u]) {
                let mapped: Vec<usize> = perm.iter().map(|&q| other[q]).collect();
                out.push(Relation {
                    kind: RelationKind::CongruentTriangles,
                    elements: vec![name(&[i, j, k]), name(&mapped)],
                    residual,
                });
            }
        }
    }
}

/// Finds a vertex correspondence under which opposite sides agree.
fn sss_match(s: &[f64; 3], t: &[f64; 3]) -> Option<([usize; 3], f64)> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    PERMS
        .iter()
        .map(|perm| {
            let r = (0..3)
                .map(|q| (s[q] - t[perm[q]]).abs() / s[q].max(t[perm[q]]))
                .fold(0.0, f64::max);
            (*perm, r)
        })
        .filter(|(_, r)| *r < EPS)
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Label, Primitive, Role};

    fn seg(s: &mut Scene, p: Point, q: Point) {
        let (a, _) = s.register_point(p).unwrap();
        let (b, _) = s.register_point(q).unwrap();
        s.add_primitive(Primitive::segment(a, b, Role::Side)).unwrap();
    }

    fn kinds(rels: &[Relation]) -> Vec<RelationKind> {
        let mut k: Vec<_> = rels.iter().map(|r| r.kind).collect();
        k.dedup();
        k
    }

    #[test]
    fn horizontal_segments_are_parallel() {
        let mut s = Scene::new();
        seg(&mut s, Point::new(0.0, 0.0), Point::new(2.0, 0.0));
        seg(&mut s, Point::new(0.0, 1.0), Point::new(3.0, 1.0));
        assert_eq!(kinds(&relation_tests(&s)), vec![RelationKind::Parallel]);
    }

    #[test]
    fn segment_tangent_to_circle() {
        let mut s = Scene::new();
        seg(&mut s, Point::new(0.0, 0.0), Point::new(0.0, 2.0));
        let o = s.add_vertex(Point::new(1.0, 1.0)).unwrap();
        s.add_primitive(Primitive::circle(o, 1.0)).unwrap();
        let rels = relation_tests(&s);
        assert_eq!(kinds(&rels), vec![RelationKind::Tangent]);
        assert!(rels[0].residual < 1e-12);
    }

    #[test]
    fn right_triangles_detected() {
        let mut s = Scene::new();
        let (a, b, c) = (Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(0.0, 4.0));
        seg(&mut s, a, b);
        seg(&mut s, b, c);
        seg(&mut s, c, a);
        let rels = relation_tests(&s);
        let right: Vec<_> = rels
            .iter()
            .filter(|r| r.kind == RelationKind::RightTriangle)
            .collect();
        assert_eq!(right.len(), 1);
        assert_eq!(right[0].elements[1], Label::from("A").to_string());
    }
}
