//! Exact rectangle-rectangle geometry via the separating-axis theorem.

use crate::types::OrientedBox;

/// Boundary tolerance for touching contacts.
pub const TOUCH_TOL: f64 = 1e-9;

fn project(b: &OrientedBox, axis: [f64; 2]) -> (f64, f64) {
    let [u, v] = b.axes();
    let [hl, hw] = b.half_extents();
    let c = b.cx * axis[0] + b.cy * axis[1];
    let r = hl * (u[0] * axis[0] + u[1] * axis[1]).abs() + hw * (v[0] * axis[0] + v[1] * axis[1]).abs();
    (c - r, c + r)
}

/// Signed overlap of the two projections on `axis` (negative means a gap).
fn axis_overlap(a: &OrientedBox, b: &OrientedBox, axis: [f64; 2]) -> f64 {
    let (a0, a1) = project(a, axis);
    let (b0, b1) = project(b, axis);
    a1.min(b1) - a0.max(b0)
}

/// Minimum projected overlap over the four candidate axes. Positive when the
/// boxes overlap with positive area, negative when some axis separates them.
pub fn penetration_depth(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let [au, av] = a.axes();
    let [bu, bv] = b.axes();
    [au, av, bu, bv]
        .into_iter()
        .map(|axis| axis_overlap(a, b, axis))
        .fold(f64::INFINITY, f64::min)
}

/// True iff the rectangles overlap or touch.
pub fn exact_intersects(a: &OrientedBox, b: &OrientedBox) -> bool {
    penetration_depth(a, b) >= -TOUCH_TOL
}

/// True iff the rectangles share positive area.
pub fn overlaps_with_area(a: &OrientedBox, b: &OrientedBox) -> bool {
    penetration_depth(a, b) > 1e-12
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - (a[0] + t * dx)).hypot(p[1] - (a[1] + t * dy))
}

/// Euclidean distance between the two rectangles; zero when they intersect.
pub fn box_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if exact_intersects(a, b) {
        return 0.0;
    }
    // Disjoint convex polygons: the closest pair always involves a vertex.
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for (poly, other) in [(&ca, &cb), (&cb, &ca)] {
        for p in poly.iter() {
            for k in 0..4 {
                best = best.min(point_segment_distance(*p, other[k], other[(k + 1) % 4]));
            }
        }
    }
    best
}
