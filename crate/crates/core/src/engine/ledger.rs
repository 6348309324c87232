use crate::geometry::{
    angle_at, angle_id, distance, polygon_area, relation_tests, segment_id, Annotation, AnnotationTarget, Relation,
    Role, Scene, StepKind,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Exact ground truth of a figure. Keys are element ids: segments `AB`,
/// radii `r(O)`, angles `∠ABC`, areas `area(ABC)` and `area(⊙O)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyLedger {
    pub lengths: BTreeMap<String, f64>,
    pub angles: BTreeMap<String, f64>,
    pub areas: BTreeMap<String, f64>,
    pub relations: Vec<Relation>,
    /// Displayed value of every annotation, by element id.
    pub displayed: BTreeMap<String, String>,
}

impl PropertyLedger {
    /// Exact value of a length, radius or angle id.
    pub fn exact(&self, id: &str) -> Option<f64> {
        self.lengths
            .get(id)
            .or_else(|| self.angles.get(id))
            .or_else(|| self.areas.get(id))
            .copied()
    }
}

fn half_up(x: f64, scale: f64) -> f64 {
    // the nudge keeps values such as 2.45 stored as 2.4499.. rounding up
    ((x * scale) + 0.5 + 1e-9).floor() / scale
}

/// Lengths round half-up to one decimal; a trailing `.0` is dropped.
pub fn display_length(x: f64) -> String {
    let r = half_up(x, 10.0);
    if r.fract() == 0.0 {
        format!("{r:.0}")
    } else {
        format!("{r:.1}")
    }
}

/// Angles round half-up to a whole degree.
pub fn display_angle(deg: f64) -> String {
    format!("{:.0}°", half_up(deg, 1.0))
}

/// Exact value of an annotation target, computed from coordinates.
pub fn target_value(scene: &Scene, t: &AnnotationTarget) -> Option<f64> {
    match t {
        AnnotationTarget::Length { a, b } => Some(distance(scene.point(a)?, scene.point(b)?)),
        AnnotationTarget::Angle { ray1, vertex, ray2 } => {
            angle_at(scene.point(vertex)?, scene.point(ray1)?, scene.point(ray2)?).ok()
        }
        AnnotationTarget::Radius { center } => scene.circles().find(|c| c.1 == center).map(|c| c.2),
    }
}

pub fn display(scene: &Scene, t: &AnnotationTarget) -> Option<String> {
    let v = target_value(scene, t)?;
    Some(match t {
        AnnotationTarget::Angle { .. } => display_angle(v),
        _ => display_length(v),
    })
}

/// Labels every substrate side, radius and injected element, keeps any
/// annotation already present, and recomputes all displayed values from
/// coordinates.
pub fn assign_values(scene: &mut Scene) -> Vec<Annotation> {
    let mut targets: Vec<AnnotationTarget> = scene.annotations.iter().map(|a| a.target.clone()).collect();
    let prims = scene.primitives();
    for step in &scene.construction_log {
        if matches!(step.kind, StepKind::Angles) {
            continue;
        }
        for &i in &step.primitives {
            match prims[i].endpoints() {
                Some((a, b)) => targets.push(AnnotationTarget::Length { a: a.clone(), b: b.clone() }),
                None => {
                    if let crate::geometry::Shape::Circle { center, .. } = &prims[i].shape {
                        targets.push(AnnotationTarget::Radius { center: center.clone() });
                    }
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    let annotations: Vec<Annotation> = targets
        .into_iter()
        .filter(|t| seen.insert(t.element_id()))
        .filter_map(|t| display(scene, &t).map(|display| Annotation { target: t, display }))
        .collect();
    scene.annotations = annotations.clone();
    annotations
}

/// Computes every length, angle and area the figure determines.
pub fn compute_ledger(scene: &Scene) -> PropertyLedger {
    let idx = scene.index();
    let n = idx.len();
    let mut ledger = PropertyLedger::default();
    for i in 0..n {
        for j in (i + 1)..n {
            if idx.connected[i][j] {
                ledger
                    .lengths
                    .insert(segment_id(&idx.labels[i], &idx.labels[j]), distance(idx.points[i], idx.points[j]));
            }
        }
    }
    for (_, c, r) in scene.circles() {
        ledger.lengths.insert(format!("r({c})"), r);
        ledger.areas.insert(format!("area(⊙{c})"), std::f64::consts::PI * r * r);
    }
    for v in 0..n {
        let rays = idx.ray_neighbours(v);
        for (x, &p) in rays.iter().enumerate() {
            for &q in &rays[x + 1..] {
                let Ok(a) = angle_at(idx.points[v], idx.points[p], idx.points[q]) else { continue };
                if a > 1e-9 && a < 180.0 - 1e-9 {
                    ledger.angles.insert(angle_id(&idx.labels[p], &idx.labels[v], &idx.labels[q]), a);
                }
            }
        }
    }
    for &[i, j, k] in &idx.triangles {
        let id = format!("area({}{}{})", idx.labels[i], idx.labels[j], idx.labels[k]);
        if let Ok(a) = polygon_area(&[idx.points[i], idx.points[j], idx.points[k]]) {
            ledger.areas.insert(id, a);
        }
    }
    for s in &scene.substrates {
        if s.vertices.len() >= 4 {
            let pts: Option<Vec<_>> = s.vertices.iter().map(|l| scene.point(l)).collect();
            if let Some(Ok(a)) = pts.map(|p| polygon_area(&p)) {
                let id: String = s.vertices.iter().map(|l| l.as_str()).collect();
                ledger.areas.insert(format!("area({id})"), a);
            }
        }
    }
    for a in &scene.annotations {
        if let Some(v) = target_value(scene, &a.target) {
            let id = a.target.element_id();
            match a.target {
                AnnotationTarget::Angle { .. } => ledger.angles.insert(id.clone(), v),
                _ => ledger.lengths.insert(id.clone(), v),
            };
        }
        ledger.displayed.insert(a.target.element_id(), a.display.clone());
    }
    ledger.relations = relation_tests(scene);
    ledger
}

/// Pattern identity: sorted substrate kinds and sorted injected roles.
pub fn pattern_key(scene: &Scene) -> String {
    let mut kinds: Vec<&str> = scene.substrates.iter().map(|s| s.kind.as_str()).collect();
    kinds.sort_unstable();
    let roles: Vec<&str> = scene.role_multiset().into_iter().map(Role::as_str).collect();
    format!("{}|{}", kinds.join("+"), roles.join("+"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Primitive};

    #[test]
    fn rounding_rule() {
        assert_eq!(display_length(5.0), "5");
        assert_eq!(display_length(7.0710678), "7.1");
        assert_eq!(display_length(2.45), "2.5");
        assert_eq!(display_length(9.96), "10");
        assert_eq!(display_length(0.04), "0");
        assert_eq!(display_angle(90.0), "90°");
        assert_eq!(display_angle(59.5), "60°");
        assert_eq!(display_angle(59.49), "59°");
    }

    #[test]
    fn right_angle_annotation() {
        let mut s = Scene::new();
        let a = s.add_vertex(Point::new(0.0, 0.0)).unwrap();
        let b = s.add_vertex(Point::new(3.0, 0.0)).unwrap();
        let c = s.add_vertex(Point::new(0.0, 4.0)).unwrap();
        for (p, q) in [(&a, &b), (&b, &c), (&c, &a)] {
            s.add_primitive(Primitive::segment(p.clone(), q.clone(), Role::Side)).unwrap();
        }
        s.annotations.push(Annotation {
            target: AnnotationTarget::Angle { ray1: b.clone(), vertex: a.clone(), ray2: c.clone() },
            display: String::new(),
        });
        s.annotations.push(Annotation {
            target: AnnotationTarget::Length { a: b.clone(), b: c.clone() },
            display: String::new(),
        });
        assign_values(&mut s);
        let l = compute_ledger(&s);
        assert_eq!(l.displayed["∠BAC"], "90°");
        assert!((l.angles["∠BAC"] - 90.0).abs() < 1e-12);
        assert_eq!(l.displayed["BC"], "5");
        assert_eq!(l.lengths.len(), 3);
        assert_eq!(l.angles.len(), 3);
        assert!((l.areas["area(ABC)"] - 6.0).abs() < 1e-12);
        assert_eq!(l.exact("BC"), Some(5.0));
    }
}
