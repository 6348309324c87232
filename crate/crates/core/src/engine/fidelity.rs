use super::config::{Canvas, FidelityConfig};
use crate::geometry::{angle_at, angle_id, distance, segment_id, Scene};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    ExtremeAngle,
    DistanceRatio,
    OutOfCanvas,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::ExtremeAngle => "extreme-angle",
            RejectReason::DistanceRatio => "distance-ratio",
            RejectReason::OutOfCanvas => "out-of-canvas",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub reason: RejectReason,
    /// Offending element: an angle id, a vertex pair, or a vertex label.
    pub element: String,
    pub value: f64,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {} ({:.3})", self.reason.as_str(), self.element, self.value)
    }
}

/// Angles within this many degrees of 180 are straight lines, not corners.
const STRAIGHT: f64 = 1e-6;

/// Rejects scenes with a corner outside the configured angle range or a
/// vertex spread above the distance-ratio threshold. Over-wide corners
/// are reported before narrow ones, then the distance ratio.
pub fn fidelity_check(scene: &Scene, cfg: &FidelityConfig) -> Result<(), Rejection> {
    let idx = scene.index();
    let n = idx.len();
    if n < 2 {
        return Ok(());
    }
    let mut wide: Option<Rejection> = None;
    let mut narrow: Option<Rejection> = None;
    for v in 0..n {
        let rays = idx.ray_neighbours(v);
        for (x, &p) in rays.iter().enumerate() {
            for &q in &rays[x + 1..] {
                let Ok(a) = angle_at(idx.points[v], idx.points[p], idx.points[q]) else { continue };
                if a >= 180.0 - STRAIGHT {
                    continue;
                }
                let slot = if a > cfg.max_angle_deg {
                    &mut wide
                } else if a < cfg.min_angle_deg {
                    &mut narrow
                } else {
                    continue;
                };
                if slot.is_none() {
                    *slot = Some(Rejection {
                        reason: RejectReason::ExtremeAngle,
                        element: angle_id(&idx.labels[p], &idx.labels[v], &idx.labels[q]),
                        value: a,
                    });
                }
            }
        }
    }
    if let Some(r) = wide.or(narrow) {
        return Err(r);
    }
    let (mut lo, mut hi) = ((f64::INFINITY, 0, 0), (0.0f64, 0, 0));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distance(idx.points[i], idx.points[j]);
            if d < lo.0 {
                lo = (d, i, j);
            }
            if d > hi.0 {
                hi = (d, i, j);
            }
        }
    }
    let ratio = if lo.0 > 0.0 { hi.0 / lo.0 } else { f64::INFINITY };
    if ratio > cfg.max_min_distance_ratio {
        return Err(Rejection {
            reason: RejectReason::DistanceRatio,
            element: format!(
                "{}/{}",
                segment_id(&idx.labels[hi.1], &idx.labels[hi.2]),
                segment_id(&idx.labels[lo.1], &idx.labels[lo.2])
            ),
            value: ratio,
        });
    }
    Ok(())
}

/// Rejects scenes whose vertices or circles leave the canvas.
pub fn canvas_check(scene: &Scene, canvas: Canvas) -> Result<(), Rejection> {
    let inside = |x: f64, y: f64, pad: f64| {
        x - pad >= 0.0 && y - pad >= 0.0 && x + pad <= canvas.width && y + pad <= canvas.height
    };
    for v in scene.vertices() {
        if !inside(v.point.x, v.point.y, 0.0) {
            return Err(Rejection {
                reason: RejectReason::OutOfCanvas,
                element: v.label.to_string(),
                value: v.point.x.min(v.point.y),
            });
        }
    }
    for (_, c, r) in scene.circles() {
        let p = scene.point(c).expect("registered");
        if !inside(p.x, p.y, r) {
            return Err(Rejection {
                reason: RejectReason::OutOfCanvas,
                element: format!("⊙{c}"),
                value: r,
            });
        }
    }
    Ok(())
}
