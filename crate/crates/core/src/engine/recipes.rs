//! Coordinate recipes for the substrate kinds.

use crate::catalog::{GeneratorSpec, Substrate};
use crate::geometry::{GeometryError, Label, Point, Primitive, Role, Scene, SubstrateInstance};
use rand::seq::SliceRandom;
use rand::Rng;

use super::config::Canvas;

/// Index of the circle center in [`Local`] segment and angle lists.
pub const CENTER: usize = usize::MAX;

/// A substrate in local coordinates, before placement.
#[derive(Debug, Clone)]
pub struct Local {
    pub pts: Vec<Point>,
    pub circle: Option<(Point, f64)>,
    pub segs: Vec<(usize, usize, Role)>,
    /// Angles annotated after the line rounds, as `[ray1, vertex, ray2]`.
    pub angles: Vec<[usize; 3]>,
}

/// A substrate merged into a scene.
#[derive(Debug, Clone)]
pub struct Placed {
    pub instance: SubstrateInstance,
    pub primitives: Vec<usize>,
    pub angles: Vec<[Label; 3]>,
}

fn int_in<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    let lo = r[0].ceil() as i64;
    let hi = (r[1].floor() as i64).max(lo);
    rng.gen_range(lo..=hi) as f64
}

fn angle<R: Rng + ?Sized>(rng: &mut R, spec: &GeneratorSpec, default: [f64; 2]) -> f64 {
    int_in(rng, spec.angle.unwrap_or(default))
}

fn polygon(pts: Vec<Point>) -> Local {
    let n = pts.len();
    Local {
        segs: (0..n).map(|i| (i, (i + 1) % n, Role::Side)).collect(),
        angles: (0..n).map(|i| [(i + n - 1) % n, i, (i + 1) % n]).collect(),
        pts,
        circle: None,
    }
}

fn inscribed(r: f64, degrees: &[f64]) -> Local {
    let o = Point::new(0.0, 0.0);
    let mut l = polygon(degrees.iter().map(|d| Point::polar(o, r, *d)).collect());
    l.circle = Some((o, r));
    l
}

fn regular(n: usize, circumradius: f64) -> Local {
    let step = 360.0 / n as f64;
    let o = Point::new(0.0, 0.0);
    polygon((0..n).map(|i| Point::polar(o, circumradius, 90.0 + step * i as f64)).collect())
}

fn too_short(kind: &str) -> GeometryError {
    GeometryError::DegenerateAnchor(format!("{kind}: sampled parameters give a degenerate shape"))
}

/// Samples the local shape of a substrate kind from its generator ranges.
pub fn local_shape<R: Rng + ?Sized>(sub: &Substrate, rng: &mut R) -> Result<Local, GeometryError> {
    let g = &sub.generator;
    let o = Point::new(0.0, 0.0);
    Ok(match sub.kind.as_str() {
        "triangle" => {
            let (a, c, t) = (int_in(rng, g.side), int_in(rng, g.side), angle(rng, g, [40.0, 85.0]));
            let b = o;
            polygon(vec![Point::polar(b, c, t), b, Point::new(a, 0.0)])
        }
        "isosceles-triangle" => {
            let (s, t) = (int_in(rng, g.side), angle(rng, g, [35.0, 110.0]));
            polygon(vec![o, Point::polar(o, s, -90.0 - t / 2.0), Point::polar(o, s, -90.0 + t / 2.0)])
        }
        "equilateral-triangle" => {
            let s = int_in(rng, g.side);
            polygon(vec![Point::polar(o, s, 60.0), o, Point::new(s, 0.0)])
        }
        "right-triangle" => {
            let a = int_in(rng, g.side);
            let r = g.ratio.unwrap_or([0.5, 2.0]);
            let b = int_in(rng, [(a * r[0]).ceil().max(1.0), (a * r[1]).floor().max(1.0)]);
            polygon(vec![Point::new(a, 0.0), Point::new(0.0, b), o])
        }
        "special-right-triangle" => {
            let c = int_in(rng, g.side);
            let choices = if g.angle_choices.is_empty() { vec![30.0, 45.0, 60.0] } else { g.angle_choices.clone() };
            let a = *choices.choose(rng).expect("non-empty");
            let (s, co) = a.to_radians().sin_cos();
            polygon(vec![Point::new(c * co, 0.0), Point::new(0.0, c * s), o])
        }
        "parallelogram" | "rhombus" => {
            let a = int_in(rng, g.side);
            let b = if sub.kind == "rhombus" { a } else { int_in(rng, g.side) };
            let d = Point::polar(o, b, angle(rng, g, [50.0, 80.0]));
            polygon(vec![o, Point::new(a, 0.0), Point::new(a, 0.0).add(d), d])
        }
        "rectangle" | "square" => {
            let a = int_in(rng, g.side);
            let b = if sub.kind == "square" { a } else { int_in(rng, g.side) };
            polygon(vec![o, Point::new(a, 0.0), Point::new(a, b), Point::new(0.0, b)])
        }
        "trapezoid" | "isosceles-trapezoid" => {
            let a = int_in(rng, g.side);
            let alpha = angle(rng, g, [50.0, 80.0]);
            let beta = if sub.kind == "trapezoid" { angle(rng, g, [50.0, 80.0]) } else { alpha };
            let d = int_in(rng, [3.0, (a / 2.0).floor().max(3.0)]);
            let top = Point::polar(o, d, alpha);
            let h = top.y;
            let c = Point::new(a - h / beta.to_radians().tan(), h);
            if c.x - top.x < 2.0 {
                return Err(too_short(&sub.kind));
            }
            polygon(vec![o, Point::new(a, 0.0), c, top])
        }
        "circle-chord" => {
            let (r, t) = (int_in(rng, g.side), angle(rng, g, [50.0, 140.0]));
            Local {
                pts: vec![Point::polar(o, r, -90.0 - t / 2.0), Point::polar(o, r, -90.0 + t / 2.0)],
                circle: Some((o, r)),
                segs: vec![(CENTER, 0, Role::Radius), (CENTER, 1, Role::Radius), (0, 1, Role::Chord)],
                angles: vec![[0, CENTER, 1], [CENTER, 0, 1], [CENTER, 1, 0]],
            }
        }
        "inscribed-angle" => {
            let (r, t) = (int_in(rng, g.side), angle(rng, g, [50.0, 140.0]));
            let spread = ((180.0 - t / 2.0) * 0.5).floor();
            let c = int_in(rng, [-spread, spread]);
            Local {
                pts: vec![
                    Point::polar(o, r, -90.0 - t / 2.0),
                    Point::polar(o, r, -90.0 + t / 2.0),
                    Point::polar(o, r, 90.0 + c),
                ],
                circle: Some((o, r)),
                segs: vec![
                    (CENTER, 0, Role::Radius),
                    (CENTER, 1, Role::Radius),
                    (2, 0, Role::Chord),
                    (2, 1, Role::Chord),
                ],
                angles: vec![[0, 2, 1], [0, CENTER, 1]],
            }
        }
        "circle-diameter" => {
            let (r, t) = (int_in(rng, g.side), angle(rng, g, [25.0, 65.0]));
            Local {
                pts: vec![Point::new(-r, 0.0), Point::new(r, 0.0), Point::polar(o, r, 2.0 * t)],
                circle: Some((o, r)),
                segs: vec![(0, 1, Role::Chord), (2, 0, Role::Chord), (2, 1, Role::Chord)],
                angles: vec![[2, 0, 1], [2, 1, 0], [0, 2, 1]],
            }
        }
        "circle-tangent" => {
            let (r, t) = (int_in(rng, g.side), angle(rng, g, [25.0, 55.0]));
            let d = r / t.to_radians().sin();
            Local {
                pts: vec![Point::new(d, 0.0), Point::polar(o, r, (r / d).acos().to_degrees())],
                circle: Some((o, r)),
                segs: vec![(CENTER, 1, Role::Radius), (0, 1, Role::Tangent), (CENTER, 0, Role::Side)],
                angles: vec![[CENTER, 1, 0], [CENTER, 0, 1], [1, CENTER, 0]],
            }
        }
        "cyclic-quadrilateral" => {
            let r = int_in(rng, g.side);
            let gaps: Vec<f64> = (0..4).map(|_| angle(rng, g, [50.0, 120.0])).collect();
            let total: f64 = gaps.iter().sum();
            let mut at = -90.0;
            let degrees: Vec<f64> = gaps
                .iter()
                .map(|gap| {
                    let d = at;
                    at += gap * 360.0 / total;
                    d
                })
                .collect();
            inscribed(r, &degrees)
        }
        "inscribed-equilateral-triangle" => inscribed(int_in(rng, g.side), &[90.0, 210.0, 330.0]),
        "inscribed-square" => inscribed(int_in(rng, g.side), &[45.0, 135.0, 225.0, 315.0]),
        "regular-pentagon" => {
            let s = int_in(rng, g.side);
            regular(5, s / (2.0 * 36f64.to_radians().sin()))
        }
        "regular-hexagon" => regular(6, int_in(rng, g.side)),
        other => {
            return Err(GeometryError::InvalidPrimitive(format!("no recipe for substrate kind {other:?}")))
        }
    })
}

/// Rotates the local shape by a small random angle, centres its bounding
/// box on the canvas and merges it into the scene.
pub fn place<R: Rng + ?Sized>(
    scene: &mut Scene,
    sub: &Substrate,
    local: &Local,
    rng: &mut R,
    canvas: Canvas,
) -> Result<Placed, GeometryError> {
    let rot = rng.gen_range(-20.0..=20.0);
    let turned: Vec<Point> = local.pts.iter().map(|p| p.rotate(rot)).collect();
    let circle = local.circle.map(|(c, r)| (c.rotate(rot), r));
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Point, pad: f64| {
        lo = Point::new(lo.x.min(p.x - pad), lo.y.min(p.y - pad));
        hi = Point::new(hi.x.max(p.x + pad), hi.y.max(p.y + pad));
    };
    turned.iter().for_each(|p| grow(*p, 0.0));
    if let Some((c, r)) = circle {
        grow(c, r);
    }
    let shift = Point::new(canvas.width / 2.0, canvas.height / 2.0).sub(lo.midpoint(hi));
    let map = move |p: Point| p.rotate(rot).add(shift);
    merge(scene, sub, local, map, &[])
}

/// Adds the transformed shape to the scene, reusing `reuse[i]` labels for
/// the listed local vertex indices.
pub fn merge(
    scene: &mut Scene,
    sub: &Substrate,
    local: &Local,
    map: impl Fn(Point) -> Point,
    reuse: &[(usize, Label)],
) -> Result<Placed, GeometryError> {
    let mut work = scene.clone();
    let mut labels = Vec::with_capacity(local.pts.len());
    for (i, p) in local.pts.iter().enumerate() {
        match reuse.iter().find(|(j, _)| *j == i) {
            Some((_, l)) => labels.push(l.clone()),
            None => labels.push(work.add_vertex(map(*p))?),
        }
    }
    let center = match local.circle {
        Some((c, _)) => {
            let o = Label::nth(14);
            let pc = map(c);
            if work.has_vertex(&o) {
                Some(work.add_vertex(pc)?)
            } else {
                work.add_labeled(o.clone(), pc)?;
                Some(o)
            }
        }
        None => None,
    };
    let label = |i: usize| -> Label {
        if i == CENTER {
            center.clone().expect("recipe with a center")
        } else {
            labels[i].clone()
        }
    };
    let mut primitives = Vec::new();
    if let (Some((_, r)), Some(c)) = (local.circle, &center) {
        primitives.push(work.add_primitive(Primitive::circle(c.clone(), r))?);
    }
    for &(a, b, role) in &local.segs {
        let (la, lb) = (label(a), label(b));
        if work.segment_index(&la, &lb).is_some() {
            continue;
        }
        primitives.push(work.add_primitive(Primitive::segment(la, lb, role))?);
    }
    let angles = local.angles.iter().map(|t| t.map(label)).collect();
    let instance = SubstrateInstance {
        kind: sub.kind.clone(),
        group: sub.group.clone(),
        vertices: labels,
        center,
    };
    work.substrates.push(instance.clone());
    *scene = work;
    Ok(Placed {
        instance,
        primitives,
        angles,
    })
}

/// Glues a polygon substrate onto the drawn side `a`-`b` of the scene,
/// on the side away from `away`. Local vertices 0 and 1 land on `b` and
/// `a`, scaled to the side's length.
#[cfg(feature = "multi-substrate")]
pub fn glue(
    scene: &mut Scene,
    sub: &Substrate,
    local: &Local,
    a: &Label,
    b: &Label,
    away: Point,
) -> Result<Placed, GeometryError> {
    use crate::geometry::distance;
    if local.circle.is_some() || local.pts.len() < 3 {
        return Err(GeometryError::ConstructionImpossible(format!("{} cannot be glued", sub.kind)));
    }
    let (pa, pb) = (scene.require(a)?, scene.require(b)?);
    let (l0, l1) = (local.pts[0], local.pts[1]);
    let k = distance(pa, pb) / distance(l0, l1);
    let turn = {
        let u = l1.sub(l0);
        let v = pa.sub(pb);
        v.y.atan2(v.x).to_degrees() - u.y.atan2(u.x).to_degrees()
    };
    let forward = |p: Point| p.sub(l0).rotate(turn).scale(k).add(pb);
    let side = |p: Point| pa.sub(pb).cross(p.sub(pb));
    let probe = crate::geometry::centroid(&local.pts.iter().map(|p| forward(*p)).collect::<Vec<_>>());
    let flip = side(probe).signum() == side(away).signum();
    let map = |p: Point| {
        let q = if flip { Point::new(p.x, -p.y) } else { p };
        let (m0, m1) = if flip { (Point::new(l0.x, -l0.y), Point::new(l1.x, -l1.y)) } else { (l0, l1) };
        let u = m1.sub(m0);
        let v = pa.sub(pb);
        let t = v.y.atan2(v.x).to_degrees() - u.y.atan2(u.x).to_degrees();
        q.sub(m0).rotate(t).scale(k).add(pb)
    };
    merge(scene, sub, local, map, &[(0, b.clone()), (1, a.clone())])
}
