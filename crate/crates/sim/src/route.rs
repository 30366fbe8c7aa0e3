//! Arc-length parameterized polylines used as route centerlines.

use crate::geom::Vec2;

/// A piecewise-linear curve with cached cumulative arc length. Queries by
/// arc length clamp to the curve's ends, so a vehicle pushed past the final
/// point holds the last pose.
#[derive(Clone, Debug)]
pub struct Polyline {
    pts: Vec<Vec2>,
    cum: Vec<f64>,
}

impl Polyline {
    /// Build from an ordered point list, dropping consecutive duplicates.
    /// Panics if fewer than two distinct points remain.
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|q| q.dist(p) > 1e-9) {
                pts.push(p);
            }
        }
        assert!(pts.len() >= 2, "polyline needs at least two distinct points");
        let mut cum = Vec::with_capacity(pts.len());
        let mut s = 0.0;
        cum.push(0.0);
        for w in pts.windows(2) {
            s += w[0].dist(w[1]);
            cum.push(s);
        }
        Polyline { pts, cum }
    }

    /// Total arc length.
    pub fn len(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.pts
    }

    /// Index of the segment containing arc length `s` (clamped).
    fn segment_at(&self, s: f64) -> usize {
        if s <= 0.0 {
            return 0;
        }
        match self
            .cum
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(self.pts.len() - 2),
            Err(i) => (i - 1).min(self.pts.len() - 2),
        }
    }

    /// Point at arc length `s`, clamped to the curve.
    pub fn pos_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.len());
        let i = self.segment_at(s);
        let seg_len = self.cum[i + 1] - self.cum[i];
        let t = if seg_len > 0.0 { (s - self.cum[i]) / seg_len } else { 0.0 };
        self.pts[i] + (self.pts[i + 1] - self.pts[i]).scale(t)
    }

    /// Tangent heading (radians) at arc length `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.len());
        let i = self.segment_at(s);
        (self.pts[i + 1] - self.pts[i]).angle()
    }

    /// Project `p` onto the portion of the curve with arc length in
    /// `[s_lo, s_hi]`. Returns `(s, lateral)` where `lateral` is the signed
    /// offset of `p` from the curve (positive to the left of travel).
    pub fn project_window(&self, p: Vec2, s_lo: f64, s_hi: f64) -> (f64, f64) {
        let s_lo = s_lo.clamp(0.0, self.len());
        let s_hi = s_hi.clamp(0.0, self.len()).max(s_lo);
        let first = self.segment_at(s_lo);
        let last = self.segment_at(s_hi);
        let mut best = (f64::INFINITY, s_lo, 0.0);
        for i in first..=last {
            let a = self.pts[i];
            let d = self.pts[i + 1] - a;
            let seg_len = self.cum[i + 1] - self.cum[i];
            if seg_len <= 0.0 {
                continue;
            }
            let mut t = (p - a).dot(d) / (seg_len * seg_len);
            // Restrict to the queried window inside this segment.
            let t_lo = ((s_lo - self.cum[i]) / seg_len).clamp(0.0, 1.0);
            let t_hi = ((s_hi - self.cum[i]) / seg_len).clamp(0.0, 1.0);
            t = t.clamp(t_lo, t_hi);
            let q = a + d.scale(t);
            let dist = p.dist(q);
            if dist < best.0 {
                // cross(tangent, offset) > 0 when p lies left of travel.
                let lat = d.scale(1.0 / seg_len).cross(p - q);
                best = (dist, self.cum[i] + t * seg_len, lat);
            }
        }
        (best.1, best.2)
    }
}

/// Sample a circular arc from angle `a0` to `a1` (radians, traversed in the
/// signed direction of `a1 - a0`) with chord spacing at most `max_step`.
pub fn sample_arc(center: Vec2, radius: f64, a0: f64, a1: f64, max_step: f64) -> Vec<Vec2> {
    let sweep = a1 - a0;
    let arc_len = sweep.abs() * radius;
    let n = (arc_len / max_step).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| {
            let a = a0 + sweep * (k as f64) / (n as f64);
            center + Vec2::from_angle(a).scale(radius)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_reports_signed_lateral_offset() {
        let line = Polyline::new(vec![Vec2::ZERO, Vec2::new(10.0, 0.0)]);
        let (s, lat) = line.project_window(Vec2::new(4.0, 1.5), 0.0, 10.0);
        assert!((s - 4.0).abs() < 1e-12);
        assert!((lat - 1.5).abs() < 1e-12, "left of +x travel is positive");
        let (_, lat) = line.project_window(Vec2::new(4.0, -2.0), 0.0, 10.0);
        assert!((lat + 2.0).abs() < 1e-12);
    }

    #[test]
    fn arc_length_of_sampled_quarter_circle_is_close() {
        let pts = sample_arc(Vec2::ZERO, 10.0, 0.0, std::f64::consts::FRAC_PI_2, 0.25);
        let line = Polyline::new(pts);
        let expect = 10.0 * std::f64::consts::FRAC_PI_2;
        assert!((line.len() - expect).abs() / expect < 1e-4);
    }
}
