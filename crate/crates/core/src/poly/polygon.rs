//! Halfplane intersection by polar duality, and Chebyshev centering.

use nalgebra::DMatrix;
use thiserror::Error;

use super::dd::HPolytope;
use super::hull::convex_hull_2d;
use super::lp::{minimize_via_dual, DualRoute, LpError};
use super::{Region2, Tolerances};
use crate::Vec2;

/// Radius cap for the Chebyshev LP; reaching it means "unbounded".
pub const CHEBYSHEV_CAP: f64 = 1e6;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ChebyshevError {
    #[error("polytope is empty")]
    Infeasible,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Largest inscribed ball of an H-polytope.
#[derive(Clone, Debug, PartialEq)]
pub struct Chebyshev {
    pub center: Vec<f64>,
    /// Capped at [`CHEBYSHEV_CAP`] for regions without a finite inscribed ball.
    pub radius: f64,
}

impl Chebyshev {
    pub fn is_capped(&self) -> bool {
        self.radius >= CHEBYSHEV_CAP * (1.0 - 1e-9)
    }
}

/// Chebyshev center of `{x : A x ≤ b}` by a single LP over `(x, r)`.
pub fn chebyshev_center(p: &HPolytope) -> Result<Chebyshev, ChebyshevError> {
    let (h, d) = p.a.shape();
    let mut rows: Vec<usize> = Vec::with_capacity(h);
    for i in 0..h {
        let norm = p.a.row(i).norm();
        if norm == 0.0 {
            if p.b[i] < 0.0 {
                return Err(ChebyshevError::Infeasible);
            }
            continue;
        }
        rows.push(i);
    }
    let m = rows.len() + 2;
    let mut g = DMatrix::zeros(m, d + 1);
    let mut beta = vec![0.0; m];
    for (k, &i) in rows.iter().enumerate() {
        let norm = p.a.row(i).norm();
        for j in 0..d {
            g[(k, j)] = p.a[(i, j)] / norm;
        }
        g[(k, d)] = 1.0;
        beta[k] = p.b[i] / norm;
    }
    g[(m - 2, d)] = -1.0;
    g[(m - 1, d)] = 1.0;
    beta[m - 1] = CHEBYSHEV_CAP;
    let mut q = vec![0.0; d + 1];
    q[d] = -1.0;
    match minimize_via_dual(&q, &g, &beta, 1e-9)? {
        DualRoute::Optimal { z, .. } => Ok(Chebyshev {
            center: z[..d].to_vec(),
            radius: z[d].max(0.0),
        }),
        DualRoute::PrimalInfeasible => Err(ChebyshevError::Infeasible),
        // Cannot happen with the radius cap; treat as empty to be safe.
        DualRoute::DualInfeasible => Err(ChebyshevError::Infeasible),
    }
}

/// Vertices of `{x : B x ≤ 1}` for a planar `B` given by its rows.
///
/// The rows are hulled as points; consecutive hull vertices `q_i, q_{i+1}`
/// give the polygon vertex solving `q_i·x = q_{i+1}·x = 1`. When the origin
/// of the dual plane is not strictly inside that hull the region is
/// unbounded.
pub fn polar_vertex_enum(rows: &[Vec2], tol: &Tolerances) -> Region2 {
    let hull = convex_hull_2d(rows, tol.hull);
    let qs = match hull {
        Region2::Polygon(v) => v,
        Region2::Empty => return Region2::Unbounded { directions: vec![Vec2::x(), -Vec2::x(), Vec2::y(), -Vec2::y()] },
        _ => return Region2::Unbounded { directions: recession_directions(rows) },
    };
    let n = qs.len();
    let mut verts = Vec::with_capacity(n);
    for i in 0..n {
        let (p, q) = (qs[i], qs[(i + 1) % n]);
        let det = p.x * q.y - p.y * q.x;
        if det <= 1e-12 * p.norm() * q.norm() {
            return Region2::Unbounded { directions: recession_directions(rows) };
        }
        verts.push(Vec2::new(q.y - p.y, p.x - q.x) / det);
    }
    convex_hull_2d(&verts, tol.hull)
}

fn recession_directions(rows: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::new();
    let candidates = rows
        .iter()
        .filter(|r| r.norm() > 0.0)
        .flat_map(|r| {
            let t = Vec2::new(-r.y, r.x) / r.norm();
            [t, -t, -r / r.norm()]
        })
        .chain([Vec2::x(), -Vec2::x(), Vec2::y(), -Vec2::y()]);
    for d in candidates {
        let ok = rows.iter().all(|r| r.dot(&d) <= 1e-12 * r.norm());
        if ok && !out.iter().any(|o| (o - d).norm() < 1e-9) {
            out.push(d);
        }
    }
    out
}

/// Result of intersecting planar halfplanes.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfplaneIntersection {
    pub region: Region2,
    /// Chebyshev center, when the system is feasible.
    pub center: Option<Vec2>,
    pub radius: f64,
}

/// Intersection of the halfplanes `rows[i]·x ≤ rhs[i]`.
///
/// The system is re-centred on its Chebyshev center so the origin is
/// strictly interior, put in polar form and handed to
/// [`polar_vertex_enum`]. Regions with an inscribed radius below
/// `tol.degenerate` are resolved as a point or segment by extreme-point LPs.
pub fn polygon_from_halfplanes(rows: &[Vec2], rhs: &[f64], tol: &Tolerances) -> HalfplaneIntersection {
    let empty = HalfplaneIntersection {
        region: Region2::Empty,
        center: None,
        radius: 0.0,
    };
    let mut nrows: Vec<Vec2> = Vec::with_capacity(rows.len());
    let mut nrhs: Vec<f64> = Vec::with_capacity(rows.len());
    for (r, &b) in rows.iter().zip(rhs) {
        let norm = r.norm();
        if norm <= 1e-14 {
            if b < -tol.lp {
                return empty;
            }
            continue;
        }
        nrows.push(r / norm);
        nrhs.push(b / norm);
    }
    let hp = HPolytope::from_rows2(&nrows, &nrhs);
    let cheb = match chebyshev_center(&hp) {
        Ok(c) => c,
        Err(_) => return empty,
    };
    let c = Vec2::new(cheb.center[0], cheb.center[1]);
    let radius = cheb.radius;
    if cheb.is_capped() {
        return HalfplaneIntersection {
            region: Region2::Unbounded { directions: recession_directions(&nrows) },
            center: Some(c),
            radius,
        };
    }
    if radius <= tol.degenerate {
        return HalfplaneIntersection {
            region: degenerate_region(&hp, c, tol),
            center: Some(c),
            radius,
        };
    }
    let polar: Vec<Vec2> = nrows
        .iter()
        .zip(&nrhs)
        .map(|(a, b)| a / (b - a.dot(&c)))
        .collect();
    let region = match polar_vertex_enum(&polar, tol) {
        Region2::Polygon(v) => Region2::Polygon(v.iter().map(|p| p + c).collect()),
        Region2::Segment(a, b) => Region2::Segment(a + c, b + c),
        Region2::Point(p) => Region2::Point(p + c),
        other => other,
    };
    HalfplaneIntersection {
        region,
        center: Some(c),
        radius,
    }
}

fn degenerate_region(hp: &HPolytope, c: Vec2, tol: &Tolerances) -> Region2 {
    let mut extremes = vec![c];
    for dir in [Vec2::x(), -Vec2::x(), Vec2::y(), -Vec2::y()] {
        match minimize_via_dual(&[-dir.x, -dir.y], &hp.a, &hp.b, tol.lp) {
            Ok(DualRoute::Optimal { z, .. }) => extremes.push(Vec2::new(z[0], z[1])),
            Ok(DualRoute::DualInfeasible) => {
                return Region2::Unbounded { directions: vec![dir] };
            }
            _ => {}
        }
    }
    let mut best = (c, c, 0.0);
    for (i, p) in extremes.iter().enumerate() {
        for q in &extremes[i + 1..] {
            let d = (p - q).norm();
            if d > best.2 {
                best = (*p, *q, d);
            }
        }
    }
    if best.2 <= 1e-9 {
        Region2::Point(c)
    } else {
        Region2::Segment(best.0, best.1)
    }
}
