//! Construction of a four-approach unsignalized cross intersection.
//!
//! The intersection is centered at the origin. Each road has `lanes` lanes
//! per direction of width 4 m, so the central box spans `[-half, half]` on
//! both axes with `half = 4 * lanes`. Approach legs are 60 m long, measured
//! from the stop line at the box edge; exit legs extend 15 m past the box so
//! crossing vehicles have somewhere to go.
//!
//! Routes are generated for a template approach entering from the south
//! (heading +y) and rotated by quarter turns for the remaining approaches:
//! approach `k` is the template rotated `k * 90` degrees counterclockwise.
//! Within an approach, lane `i` (0 = innermost) is centered `2 + 4 i` to the
//! right of the road axis, and every lane offers all three movements.
//! Turn centerlines are circular arcs tangent to both connecting lanes:
//! a right turn from lane `i` has radius `half - (2 + 4 i)` around the near
//! box corner, a left turn radius `half + (2 + 4 i)` around the far corner.

use crate::error::Error;
use crate::geom::{segment_intersection, Vec2};
use crate::route::{sample_arc, Polyline};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Lane width in meters.
pub const LANE_WIDTH: f64 = 4.0;
/// Length of each approach leg from spawn horizon to stop line.
pub const APPROACH_LEN: f64 = 60.0;
/// Length of each exit leg past the intersection box.
pub const EXIT_LEN: f64 = 15.0;
/// Chord spacing used when discretizing turn arcs.
const ARC_STEP: f64 = 0.25;
/// Crossings with |sin(angle)| below this are treated as merging rather
/// than transversal and produce no conflict zone.
const MIN_CROSS_SIN: f64 = 0.1;
/// Crossing points closer than this on the same route pair are merged.
const DEDUPE_DIST: f64 = 1.5;
/// Half-width of the conflict band around each centerline.
const ZONE_HALF_WIDTH: f64 = 1.0;

/// Turning movement through the intersection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Right,
    Straight,
    Left,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Right, Movement::Straight, Movement::Left];

    pub fn index(self) -> usize {
        match self {
            Movement::Right => 0,
            Movement::Straight => 1,
            Movement::Left => 2,
        }
    }
}

/// A complete path from spawn horizon to exit-leg end for one
/// (approach, lane, movement) combination.
#[derive(Clone, Debug)]
pub struct Route {
    pub id: usize,
    pub approach: usize,
    pub lane: usize,
    pub movement: Movement,
    pub line: Polyline,
    /// Arc length of the stop line (box edge) measured from the route start.
    pub stop_line_s: f64,
}

/// A quadrilateral region where two routes cross transversally, used for
/// post-encroachment-time measurement.
#[derive(Clone, Debug)]
pub struct ConflictZone {
    /// Route ids of the crossing pair, lower id first.
    pub routes: (usize, usize),
    /// Centerline crossing point.
    pub point: Vec2,
    /// Arc length of the crossing along each route.
    pub s: (f64, f64),
    /// Convex quadrilateral covering the overlap of the two conflict bands.
    pub polygon: [Vec2; 4],
}

/// The full intersection: routes for every approach/lane/movement plus the
/// derived conflict zones.
#[derive(Clone, Debug)]
pub struct RoadNetwork {
    pub lanes: usize,
    /// Half-extent of the central intersection box.
    pub half: f64,
    pub routes: Vec<Route>,
    pub zones: Vec<ConflictZone>,
}

impl RoadNetwork {
    /// Index of the route for `(approach, lane, movement)`.
    pub fn route_index(&self, approach: usize, lane: usize, movement: Movement) -> usize {
        (approach * self.lanes + lane) * 3 + movement.index()
    }

    pub fn route(&self, approach: usize, lane: usize, movement: Movement) -> &Route {
        &self.routes[self.route_index(approach, lane, movement)]
    }
}

/// Rotate a point by `k` quarter turns counterclockwise, exactly.
fn rotate_quarter(p: Vec2, k: usize) -> Vec2 {
    match k % 4 {
        0 => p,
        1 => Vec2::new(-p.y, p.x),
        2 => Vec2::new(-p.x, -p.y),
        _ => Vec2::new(p.y, -p.x),
    }
}

/// Template centerline for the south approach, before rotation.
fn template_points(half: f64, lane: usize, movement: Movement) -> Vec<Vec2> {
    let x_e = 2.0 + LANE_WIDTH * lane as f64;
    let start = Vec2::new(x_e, -half - APPROACH_LEN);
    let stop = Vec2::new(x_e, -half);
    let mut pts = vec![start, stop];
    match movement {
        Movement::Straight => {
            pts.push(Vec2::new(x_e, half));
            pts.push(Vec2::new(x_e, half + EXIT_LEN));
        }
        Movement::Right => {
            // Quarter arc around the near corner, swept clockwise.
            let center = Vec2::new(half, -half);
            let radius = half - x_e;
            pts.extend(sample_arc(
                center,
                radius,
                std::f64::consts::PI,
                std::f64::consts::FRAC_PI_2,
                ARC_STEP,
            ));
            pts.push(Vec2::new(half + EXIT_LEN, -x_e));
        }
        Movement::Left => {
            // Quarter arc around the far corner, swept counterclockwise.
            let center = Vec2::new(-half, -half);
            let radius = half + x_e;
            pts.extend(sample_arc(center, radius, 0.0, std::f64::consts::FRAC_PI_2, ARC_STEP));
            pts.push(Vec2::new(-half - EXIT_LEN, x_e));
        }
    }
    pts
}

/// Build the intersection for the given lane count (1..=3 per direction).
pub fn build_network(lanes: usize) -> Result<RoadNetwork> {
    if !(1..=3).contains(&lanes) {
        return Err(Error::BadLaneCount(lanes));
    }
    let half = LANE_WIDTH * lanes as f64;
    let mut routes = Vec::with_capacity(4 * lanes * 3);
    for approach in 0..4 {
        for lane in 0..lanes {
            for movement in Movement::ALL {
                let pts = template_points(half, lane, movement)
                    .into_iter()
                    .map(|p| rotate_quarter(p, approach))
                    .collect();
                let line = Polyline::new(pts);
                routes.push(Route {
                    id: routes.len(),
                    approach,
                    lane,
                    movement,
                    line,
                    stop_line_s: APPROACH_LEN,
                });
            }
        }
    }
    let zones = find_conflict_zones(&routes, half);
    Ok(RoadNetwork { lanes, half, routes, zones })
}

/// Locate transversal centerline crossings between all route pairs and wrap
/// each in a conflict quadrilateral. Merging or parallel geometry (shared
/// approach or exit lanes) is excluded by the crossing-angle filter.
fn find_conflict_zones(routes: &[Route], half: f64) -> Vec<ConflictZone> {
    let bound = half + 1.0;
    let mut zones = Vec::new();
    for i in 0..routes.len() {
        for j in (i + 1)..routes.len() {
            let mut kept: Vec<Vec2> = Vec::new();
            for (sa, pa, ca) in segments_in_box(&routes[i].line, bound) {
                for (sb, pb, cb) in segments_in_box(&routes[j].line, bound) {
                    let Some((t, u, point)) = segment_intersection(pa, ca, pb, cb) else {
                        continue;
                    };
                    let len_a = ca.dist(pa);
                    let len_b = cb.dist(pb);
                    let ua = (ca - pa).scale(1.0 / len_a);
                    let ub = (cb - pb).scale(1.0 / len_b);
                    let cross = ua.cross(ub);
                    if cross.abs() < MIN_CROSS_SIN {
                        continue;
                    }
                    if kept.iter().any(|q| q.dist(point) < DEDUPE_DIST) {
                        continue;
                    }
                    kept.push(point);
                    // The zone is the intersection of the two width-2h bands
                    // around the centerlines: a parallelogram with sides
                    // parallel to the crossing directions. Solving the band
                    // constraints in the (ua, ub) basis puts the vertices at
                    // point +- (h / cross) ua +- (h / cross) ub.
                    let su = ZONE_HALF_WIDTH / cross;
                    let polygon = [
                        point + ua.scale(su) + ub.scale(su),
                        point + ua.scale(su) - ub.scale(su),
                        point - ua.scale(su) - ub.scale(su),
                        point - ua.scale(su) + ub.scale(su),
                    ];
                    zones.push(ConflictZone {
                        routes: (routes[i].id, routes[j].id),
                        point,
                        s: (sa + t * len_a, sb + u * len_b),
                        polygon,
                    });
                }
            }
        }
    }
    zones
}

/// Segments of a polyline that touch the intersection box, as
/// `(start_arc_length, start_point, end_point)`.
fn segments_in_box(line: &Polyline, bound: f64) -> Vec<(f64, Vec2, Vec2)> {
    let pts = line.points();
    let mut out = Vec::new();
    let mut s = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let inside = |p: Vec2| p.x.abs() <= bound && p.y.abs() <= bound;
        if inside(a) || inside(b) {
            out.push((s, a, b));
        }
        s += a.dist(b);
    }
    out
}
