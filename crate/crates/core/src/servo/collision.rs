//! Coarse self-collision proxy: a capsule around every straight piece of the kinematic chain.

use nalgebra::Point3;

use crate::model::{Pose, RobotModel};

/// Capsule radius, m.
pub const DEFAULT_CAPSULE_RADIUS: f64 = 0.03;

/// Points closer than this are merged when building the chain polyline, m.
const MERGE_TOL: f64 = 1e-9;

/// Origins of every intermediate ETS frame, with coincident neighbours merged.
fn chain_points(model: &RobotModel, q: &[f64]) -> Vec<Point3<f64>> {
    let mut pose = Pose::identity();
    let mut pts = vec![Point3::origin()];
    for et in model.ets() {
        pose *= et.eval(q);
        let p = Point3::from(pose.translation.vector);
        if (p - pts[pts.len() - 1]).norm() > MERGE_TOL {
            pts.push(p);
        }
    }
    pts
}

/// Minimum distance between segments `p1`–`q1` and `p2`–`q2`.
pub fn segment_distance(p1: &Point3<f64>, q1: &Point3<f64>, p2: &Point3<f64>, q2: &Point3<f64>) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t) = if a <= f64::EPSILON && e <= f64::EPSILON {
        (0.0, 0.0)
    } else if a <= f64::EPSILON {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// True when two non-adjacent chain segments come within `2 · radius` of each other.
pub fn self_collides(model: &RobotModel, q: &[f64], radius: f64) -> bool {
    let pts = chain_points(model, q);
    let segs: Vec<_> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    for i in 0..segs.len() {
        for j in i + 2..segs.len() {
            if segment_distance(&segs[i].0, &segs[i].1, &segs[j].0, &segs[j].1) < 2.0 * radius {
                return true;
            }
        }
    }
    false
}
