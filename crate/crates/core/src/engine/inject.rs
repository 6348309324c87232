//! Injection positions for line elements and their description text.

use super::ledger::display;
use crate::geometry::{
    collinear, distance, point_line_distance, point_segment_distance, segment_id, Anchor, AnnotationTarget,
    Construction, Label, Role, Scene, EPS,
};
use rand::Rng;

/// Legal anchors for a role in the current scene. Random chord and
/// radius endpoints are drawn from `rng`.
pub fn legal_anchors<R: Rng + ?Sized>(scene: &Scene, role: Role, rng: &mut R) -> Vec<Anchor> {
    let idx = scene.index();
    let n = idx.len();
    let lab = |i: usize| idx.labels[i].clone();
    let mut out = Vec::new();
    match role {
        Role::Median | Role::Altitude | Role::AngleBisector | Role::Midline => {
            for a in 0..n {
                let rays = idx.ray_neighbours(a);
                for (x, &b) in rays.iter().enumerate() {
                    for &c in &rays[x + 1..] {
                        if collinear(idx.points[a], idx.points[b], idx.points[c]) {
                            continue;
                        }
                        let closed = idx.connected[b][c];
                        if matches!(role, Role::Median | Role::Altitude) && !closed {
                            continue;
                        }
                        out.push(Anchor::Corner { apex: lab(a), b: lab(b), c: lab(c) });
                    }
                }
            }
            if role == Role::Midline {
                for s in scene.substrates.iter().filter(|s| s.vertices.len() == 4) {
                    let v = &s.vertices;
                    out.push(Anchor::Sides { a: v[0].clone(), b: v[3].clone(), c: v[1].clone(), d: v[2].clone() });
                    out.push(Anchor::Sides { a: v[0].clone(), b: v[1].clone(), c: v[3].clone(), d: v[2].clone() });
                }
            }
        }
        Role::ParallelAuxiliary => {
            for v in 0..n {
                for (_, a, b) in scene.segments() {
                    let (pa, pb) = (scene.point(a).expect("registered"), scene.point(b).expect("registered"));
                    if point_line_distance(idx.points[v], pa, pb) > 1e-6 * distance(pa, pb) {
                        out.push(Anchor::Parallel { through: lab(v), a: a.clone(), b: b.clone() });
                    }
                }
            }
        }
        Role::PerpendicularBisector => {
            for (_, a, b) in scene.segments() {
                out.push(Anchor::Segment { a: a.clone(), b: b.clone() });
            }
        }
        Role::Diagonal => {
            for s in &scene.substrates {
                let m = s.vertices.len();
                if m < 4 {
                    continue;
                }
                for i in 0..m {
                    for j in (i + 2)..m {
                        if (j + 1) % m == i || idx.is_connected(&s.vertices[i], &s.vertices[j]) {
                            continue;
                        }
                        out.push(Anchor::Segment { a: s.vertices[i].clone(), b: s.vertices[j].clone() });
                    }
                }
            }
        }
        Role::Chord => {
            for (_, c, _, members) in &idx.circles {
                for (x, &i) in members.iter().enumerate() {
                    for &j in &members[x + 1..] {
                        if !idx.connected[i][j] {
                            out.push(Anchor::Segment { a: lab(i), b: lab(j) });
                        }
                    }
                }
                for _ in 0..2 {
                    let from = rng.gen_range(0..360) as f64;
                    let to = from + rng.gen_range(50..=150) as f64;
                    out.push(Anchor::Chord { center: lab(*c), from_deg: from, to_deg: to });
                }
            }
        }
        Role::Radius => {
            for (_, c, _, members) in &idx.circles {
                for &m in members {
                    if !idx.connected[*c][m] {
                        out.push(Anchor::Segment { a: lab(*c), b: lab(m) });
                    }
                }
                for _ in 0..2 {
                    out.push(Anchor::CirclePoint { center: lab(*c), degrees: rng.gen_range(0..360) as f64 });
                }
            }
        }
        Role::Tangent => {
            for (_, c, r, _) in &idx.circles {
                for v in 0..n {
                    if distance(idx.points[v], idx.points[*c]) > r * (1.0 + 1e-6) {
                        for first in [true, false] {
                            out.push(Anchor::External { point: lab(v), center: lab(*c), first });
                        }
                    }
                }
            }
        }
        Role::Side => {}
    }
    out
}

/// The drawn element a vertex lies on, other than primitive `skip`:
/// a segment id when the vertex is interior to it, else a circle.
fn host(scene: &Scene, v: &Label, skip: usize) -> Option<String> {
    let p = scene.point(v)?;
    for (i, a, b) in scene.segments() {
        if i == skip || a == v || b == v {
            continue;
        }
        let (pa, pb) = (scene.point(a)?, scene.point(b)?);
        if point_segment_distance(p, pa, pb) <= EPS * distance(pa, pb).max(1.0) {
            return Some(segment_id(a, b));
        }
    }
    scene
        .circles()
        .find(|(_, c, r)| (distance(scene.point(c).expect("registered"), p) - r).abs() <= EPS * r.max(1.0))
        .map(|(_, c, _)| format!("circle {c}"))
}

fn meets(scene: &Scene, v: &Label, skip: usize) -> String {
    match host(scene, v, skip) {
        Some(h) => format!("meets {h} at {v}"),
        None => format!("ends at {v}"),
    }
}

/// Patch text for a committed construction, with the annotation targets
/// whose values it mentions.
pub fn describe(scene: &Scene, role: Role, anchor: &Anchor, c: &Construction) -> (String, Vec<AnnotationTarget>) {
    let (f, t, p) = (&c.from, &c.to, c.primitive);
    let mut text = match (role, anchor) {
        (Role::Median, Anchor::Corner { apex, b, c: cc }) => {
            format!("{f}{t} is the median from {apex} to {b}{cc}, so {t} is the midpoint of {b}{cc}.")
        }
        (Role::Altitude, Anchor::Corner { apex, b, c: cc }) => {
            format!("{f}{t} is the altitude from {apex} to {b}{cc}, so {f}{t} ⊥ {b}{cc} with foot {t}.")
        }
        (Role::AngleBisector, Anchor::Corner { apex, b, c: cc }) => {
            format!("{f}{t} bisects ∠{b}{apex}{cc} and {}.", meets(scene, t, p))
        }
        (Role::Midline, Anchor::Corner { apex, b, c: cc }) => {
            format!("{f} and {t} are the midpoints of {apex}{b} and {apex}{cc}, joined by the midline {f}{t}.")
        }
        (Role::Midline, Anchor::Sides { a, b, c: cc, d }) => {
            format!("{f} and {t} are the midpoints of {a}{b} and {cc}{d}, joined by the segment {f}{t}.")
        }
        (Role::ParallelAuxiliary, Anchor::Parallel { through, a, b }) => {
            format!("Through {through}, a line parallel to {a}{b} {}.", meets(scene, t, p))
        }
        (Role::PerpendicularBisector, Anchor::Segment { a, b }) => format!(
            "The perpendicular bisector of {a}{b} passes through its midpoint {f} and {}.",
            meets(scene, t, p)
        ),
        (Role::Diagonal, _) => format!("Diagonal {f}{t} is drawn."),
        (Role::Chord, Anchor::Chord { center, .. }) => {
            format!("{f} and {t} are points on circle {center}, joined by the chord {f}{t}.")
        }
        (Role::Chord, _) => format!("Chord {f}{t} is drawn."),
        (Role::Radius, Anchor::CirclePoint { center, .. }) => {
            format!("{t} is a point on circle {center}, and the radius {center}{t} is drawn.")
        }
        (Role::Radius, _) => format!("Radius {f}{t} is drawn."),
        (Role::Tangent, Anchor::External { center, .. }) => {
            format!("{f}{t} is tangent to circle {center} at {t}.")
        }
        _ => format!("{f}{t} is drawn."),
    };
    let target = AnnotationTarget::Length { a: f.clone(), b: t.clone() };
    if let Some(v) = display(scene, &target) {
        text.push_str(&format!(" {f}{t} = {v}."));
    }
    for x in &c.crossings {
        if let Some(h) = host(scene, x, p) {
            text.push_str(&format!(" It crosses {h} at {x}."));
        }
    }
    (text, vec![target])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{construct_special_line, Point, Primitive};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> Scene {
        let mut s = Scene::new();
        let l: Vec<_> = [(40.0, 40.0), (50.0, 40.0), (50.0, 50.0), (40.0, 50.0)]
            .iter()
            .map(|&(x, y)| s.add_vertex(Point::new(x, y)).unwrap())
            .collect();
        for i in 0..4 {
            s.add_primitive(Primitive::segment(l[i].clone(), l[(i + 1) % 4].clone(), Role::Side)).unwrap();
        }
        s.substrates.push(crate::geometry::SubstrateInstance {
            kind: "square".into(),
            group: "quadrilateral".into(),
            vertices: l,
            center: None,
        });
        s
    }

    #[test]
    fn square_diagonals() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = square();
        let anchors = legal_anchors(&s, Role::Diagonal, &mut rng);
        assert_eq!(anchors.len(), 2);
        assert!(legal_anchors(&s, Role::Median, &mut rng).is_empty());
        assert!(legal_anchors(&s, Role::Tangent, &mut rng).is_empty());
    }

    #[test]
    fn second_diagonal_reports_crossing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = square();
        let anchors = legal_anchors(&s, Role::Diagonal, &mut rng);
        construct_special_line(&mut s, Role::Diagonal, &anchors[0]).unwrap();
        let c = construct_special_line(&mut s, Role::Diagonal, &anchors[1]).unwrap();
        let (text, targets) = describe(&s, Role::Diagonal, &anchors[1], &c);
        assert_eq!(text, "Diagonal BD is drawn. BD = 14.1. It crosses AC at E.");
        assert_eq!(targets.len(), 1);
    }

    #[test]
    fn every_anchor_is_constructible_or_refused_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = square();
        for role in Role::ALL {
            for a in legal_anchors(&s, role, &mut rng) {
                let mut t = s.clone();
                if construct_special_line(&mut t, role, &a).is_err() {
                    assert_eq!(t, s);
                }
            }
        }
    }
}
