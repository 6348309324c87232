use crate::geometry::{centroid, AnnotationTarget, Point, Scene, Shape};
use std::fmt::Write;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 2.5;

struct Frame {
    lo: Point,
    hi: Point,
    scale: f64,
}

impl Frame {
    fn fit(scene: &Scene) -> Frame {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut grow = |p: Point, pad: f64| {
            lo = Point::new(lo.x.min(p.x - pad), lo.y.min(p.y - pad));
            hi = Point::new(hi.x.max(p.x + pad), hi.y.max(p.y + pad));
        };
        for v in scene.vertices() {
            grow(v.point, MARGIN);
        }
        for (_, c, r) in scene.circles() {
            grow(scene.point(c).expect("registered"), r + MARGIN);
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
        Frame {
            lo,
            hi,
            scale: SIZE / span,
        }
    }

    /// Canvas to pixel coordinates, flipping the y axis.
    fn px(&self, p: Point) -> (f64, f64) {
        ((p.x - self.lo.x) * self.scale, (self.hi.y - p.y) * self.scale)
    }
}

/// Renders the scene as a standalone SVG 1.1 document.
pub fn render_svg(scene: &Scene) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if scene.vertices().is_empty() {
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\"></svg>"
        );
        return out;
    }
    let f = Frame::fit(scene);
    let (w, h) = (((f.hi.x - f.lo.x) * f.scale).ceil(), ((f.hi.y - f.lo.y) * f.scale).ceil());
    let font = 0.9 * f.scale;
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(out, "<g stroke=\"black\" stroke-width=\"2\" fill=\"none\">");
    for prim in scene.primitives() {
        match &prim.shape {
            Shape::Segment { a, b } => {
                let (x1, y1) = f.px(scene.point(a).expect("registered"));
                let (x2, y2) = f.px(scene.point(b).expect("registered"));
                let _ = writeln!(out, "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\"/>");
            }
            Shape::Circle { center, radius } => {
                let (cx, cy) = f.px(scene.point(center).expect("registered"));
                let _ = writeln!(out, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\"/>", radius * f.scale);
            }
            Shape::Arc { center, from, to } => {
                let c = scene.point(center).expect("registered");
                let (p, q) = (scene.point(from).expect("registered"), scene.point(to).expect("registered"));
                let r = p.sub(c).norm() * f.scale;
                let (x1, y1) = f.px(p);
                let (x2, y2) = f.px(q);
                let _ = writeln!(out, "<path d=\"M {x1:.2} {y1:.2} A {r:.2} {r:.2} 0 0 0 {x2:.2} {y2:.2}\"/>");
            }
        }
    }
    let _ = writeln!(out, "</g>");

    let mid = centroid(&scene.vertices().iter().map(|v| v.point).collect::<Vec<_>>());
    let away = |p: Point, dist: f64| -> Point {
        let d = p.sub(mid).unit().unwrap_or(Point::new(0.0, 1.0));
        p.add(d.scale(dist))
    };
    let _ = writeln!(
        out,
        "<g font-family=\"sans-serif\" font-size=\"{font:.2}\" text-anchor=\"middle\" dominant-baseline=\"middle\">"
    );
    for v in scene.vertices() {
        let (x, y) = f.px(away(v.point, 1.2));
        let _ = writeln!(out, "<text x=\"{x:.2}\" y=\"{y:.2}\">{}</text>", v.label);
    }
    for a in &scene.annotations {
        match &a.target {
            AnnotationTarget::Length { a: p, b: q } => {
                let (pp, pq) = (scene.point(p).expect("registered"), scene.point(q).expect("registered"));
                let m = pp.midpoint(pq);
                let normal = pq.sub(pp).rotate(90.0).unit().unwrap_or(Point::new(0.0, 1.0));
                let side = if normal.dot(m.sub(mid)) >= 0.0 { 0.8 } else { -0.8 };
                let (x, y) = f.px(m.add(normal.scale(side)));
                let _ = writeln!(out, "<text x=\"{x:.2}\" y=\"{y:.2}\" fill=\"#1f4e9e\">{}</text>", a.display);
            }
            AnnotationTarget::Angle { ray1, vertex, ray2 } => {
                let v = scene.point(vertex).expect("registered");
                let (Some(u1), Some(u2)) = (
                    scene.point(ray1).expect("registered").sub(v).unit(),
                    scene.point(ray2).expect("registered").sub(v).unit(),
                ) else {
                    continue;
                };
                let r = 1.4;
                let (x1, y1) = f.px(v.add(u1.scale(r)));
                let (x2, y2) = f.px(v.add(u2.scale(r)));
                // the y flip reverses orientation
                let sweep = if u1.cross(u2) > 0.0 { 0 } else { 1 };
                let pr = r * f.scale;
                let _ = writeln!(
                    out,
                    "<path d=\"M {x1:.2} {y1:.2} A {pr:.2} {pr:.2} 0 0 {sweep} {x2:.2} {y2:.2}\" stroke=\"#9e1f1f\" fill=\"none\"/>"
                );
                let bis = u1.add(u2).unit().unwrap_or(u1.rotate(90.0));
                let (x, y) = f.px(v.add(bis.scale(2.6)));
                let _ = writeln!(out, "<text x=\"{x:.2}\" y=\"{y:.2}\" fill=\"#9e1f1f\">{}</text>", a.display);
            }
            AnnotationTarget::Radius { center } => {
                let c = scene.point(center).expect("registered");
                let (x, y) = f.px(c.add(Point::new(0.0, -1.2)));
                let _ = writeln!(out, "<text x=\"{x:.2}\" y=\"{y:.2}\" fill=\"#1f4e9e\">r = {}</text>", a.display);
            }
        }
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}
