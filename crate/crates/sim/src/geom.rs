//! Planar geometry primitives: vectors, oriented boxes, convex-polygon
//! separation tests, and segment intersection.

use serde::{Deserialize, Serialize};

/// A point or direction in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at the given angle (radians, counterclockwise from +x).
    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product (signed parallelogram area).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Angle of the vector in radians.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotate counterclockwise by `theta` radians.
    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;

    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;

    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    r
}

/// Corner points of an oriented rectangle centered at `center` with the long
/// axis along `heading`. Returned in counterclockwise order.
pub fn obb_corners(center: Vec2, heading: f64, length: f64, width: f64) -> [Vec2; 4] {
    let fwd = Vec2::from_angle(heading).scale(0.5 * length);
    let left = Vec2::from_angle(heading).perp().scale(0.5 * width);
    [
        center + fwd + left,
        center - fwd + left,
        center - fwd - left,
        center + fwd - left,
    ]
}

/// Signed separation between two convex polygons under the separating-axis
/// test. Negative values mean the polygons overlap (the magnitude is the
/// smallest translation along a face normal that restores contact); positive
/// values are the largest face-normal gap found.
pub fn convex_separation(a: &[Vec2], b: &[Vec2]) -> f64 {
    debug_assert!(a.len() >= 3 && b.len() >= 3);
    let mut best = f64::NEG_INFINITY;
    for poly in [a, b] {
        for i in 0..poly.len() {
            let edge = poly[(i + 1) % poly.len()] - poly[i];
            let n = edge.norm();
            if n <= f64::EPSILON {
                continue;
            }
            let axis = edge.perp().scale(1.0 / n);
            let (min_a, max_a) = project(a, axis);
            let (min_b, max_b) = project(b, axis);
            let gap = (min_b - max_a).max(min_a - max_b);
            if gap > best {
                best = gap;
            }
        }
    }
    best
}

/// Whether two convex polygons overlap (shared interior or touching within
/// floating-point exactness).
pub fn convex_overlap(a: &[Vec2], b: &[Vec2]) -> bool {
    convex_separation(a, b) < 0.0
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in poly {
        let d = p.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Proper intersection of segments `p0..p1` and `q0..q1`. Returns the
/// parameters along each segment and the intersection point, or `None` for
/// parallel, collinear, or non-crossing segments.
pub fn segment_intersection(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Option<(f64, f64, Vec2)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    if denom.abs() < 1e-12 {
        return None;
    }
    let qp = q0 - p0;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u, p0 + r.scale(t)))
    } else {
        None
    }
}
