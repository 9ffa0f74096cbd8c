//! Polyhedral kernel: representation conversions and the LP/QP solvers.

pub mod dd;
pub mod hull;
pub mod lp;
pub mod polygon;
pub mod qp;

pub use dd::{
    double_description, hpolytope_from_points, prune_redundant_rays, Conditioning, DdOutput,
    HPolytope, PolyCone, VPolytope,
};
pub use hull::convex_hull_2d;
pub use lp::{lp_solve, LpError, LpOutcome, LpSolution};
pub use polygon::{
    chebyshev_center, polar_vertex_enum, polygon_from_halfplanes, Chebyshev, ChebyshevError,
    HalfplaneIntersection, CHEBYSHEV_CAP,
};
pub use qp::{kkt_residual, qp_solve, QpError, QpOutcome, QpSolution};

use crate::Vec2;

/// Numerical tolerances shared by the kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Collinearity threshold for 2D hulls (sine of the turning angle).
    pub hull: f64,
    /// LP feasibility / optimality tolerance.
    pub lp: f64,
    /// Inscribed radius below which a polygon is reported as degenerate.
    pub degenerate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hull: 1e-10,
            lp: 1e-9,
            degenerate: 1e-9,
        }
    }
}

/// A planar convex region, possibly degenerate.
#[derive(Clone, Debug, PartialEq)]
pub enum Region2 {
    Empty,
    Point(Vec2),
    Segment(Vec2, Vec2),
    /// Counter-clockwise, duplicate-free vertices with no three collinear.
    Polygon(Vec<Vec2>),
    /// Unbounded region; carries recession directions.
    Unbounded { directions: Vec<Vec2> },
}

impl Region2 {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Region2::Point(_) | Region2::Segment(..))
    }

    pub fn vertices(&self) -> Vec<Vec2> {
        match self {
            Region2::Point(p) => vec![*p],
            Region2::Segment(a, b) => vec![*a, *b],
            Region2::Polygon(v) => v.clone(),
            Region2::Empty | Region2::Unbounded { .. } => Vec::new(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Region2::Polygon(v) => polygon_area(v),
            _ => 0.0,
        }
    }

    /// Euclidean distance from `p` to the region (0 inside).
    pub fn distance(&self, p: &Vec2) -> f64 {
        match self {
            Region2::Empty => f64::INFINITY,
            Region2::Unbounded { .. } => f64::NAN,
            Region2::Point(q) => (p - q).norm(),
            Region2::Segment(a, b) => point_segment_distance(p, a, b),
            Region2::Polygon(v) => {
                let n = v.len();
                let inside = (0..n).all(|i| cross(&v[i], &v[(i + 1) % n], p) >= 0.0);
                if inside {
                    return 0.0;
                }
                (0..n)
                    .map(|i| point_segment_distance(p, &v[i], &v[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Hausdorff distance between two bounded convex regions.
pub fn hausdorff(a: &Region2, b: &Region2) -> f64 {
    let directed = |from: &Region2, to: &Region2| {
        from.vertices()
            .iter()
            .map(|p| to.distance(p))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

pub(crate) fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

pub(crate) fn polygon_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (v[i], v[(i + 1) % n]);
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
}

fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
