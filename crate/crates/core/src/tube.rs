//! Polyhedral COM tubes and the acceleration cone shared by every point of a
//! tube.
//!
//! For a tube with vertices `ν_j`, an acceleration feasible at every vertex
//! is feasible at every point of the tube, because the cone rows
//! `c_i(p) = a_O + a × p` are affine in `p`. Stacking the rows of all
//! vertices gives `C_T`; its cross-section hull gives the reduced `C′_T`.

use nalgebra::DVector;
use thiserror::Error;

use crate::contact::{tangent_frame, WrenchCone};
use crate::poly::dd::hpolytope_from_points;
use crate::poly::{HPolytope, Region2};
use crate::regions::{accel_cone_from_rows, cone_rows_at, AccelCone};
use crate::Vec3;

/// Default tube radius (m).
pub const DEFAULT_RADIUS: f64 = 0.05;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TubeError {
    #[error("the acceleration cone of the tube has an empty interior")]
    EmptyCone,
}

/// Square cylinder around a segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Tube {
    pub vertices: Vec<Vec3>,
    /// Unit-norm rows, `A x ≤ b`.
    pub hrep: HPolytope,
    pub radius: f64,
    pub segment: (Vec3, Vec3),
}

impl Tube {
    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        self.hrep.contains(p.as_slice(), tol)
    }

    /// Polar form around the segment midpoint: `B (x - c) ≤ 1`.
    pub fn polar_form(&self) -> (Vec3, Vec<Vec3>) {
        let c = (self.segment.0 + self.segment.1) * 0.5;
        let rows = (0..self.hrep.len())
            .map(|i| {
                let a = Vec3::new(self.hrep.a[(i, 0)], self.hrep.a[(i, 1)], self.hrep.a[(i, 2)]);
                a / (self.hrep.b[i] - a.dot(&c))
            })
            .collect();
        (c, rows)
    }

    /// Axis-aligned volume for cubes, exact volume of the box otherwise.
    pub fn volume(&self) -> f64 {
        let side = 2.0 * self.radius;
        side * side * ((self.segment.1 - self.segment.0).norm() + if self.is_cube() { side } else { 0.0 })
    }

    fn is_cube(&self) -> bool {
        (self.segment.1 - self.segment.0).norm() < 1e-9
    }
}

/// Tube of half-width `radius` around `[p0, pt]`.
///
/// Cross-sections are squares orthogonal to the segment, oriented by
/// Gram–Schmidt against world x (world y when the segment is nearly along
/// x). A zero-length segment gives an axis-aligned cube.
pub fn build_tube(p0: Vec3, pt: Vec3, radius: f64) -> Tube {
    let d = pt - p0;
    if d.norm() < 1e-9 {
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8 {
            let s = |bit: usize| if i & bit == 0 { -radius } else { radius };
            vertices.push(p0 + Vec3::new(s(1), s(2), s(4)));
        }
        return finish(vertices, radius, (p0, pt));
    }
    build_tube_along(p0, pt, radius, &d)
}

/// Tube around `[p0, pt]` whose cross-sections follow the frame of `axis`.
///
/// Sub-tubes built with the axis of a longer segment nest inside it.
pub fn build_tube_along(p0: Vec3, pt: Vec3, radius: f64, axis: &Vec3) -> Tube {
    let (t1, t2) = tangent_frame(axis);
    let mut vertices = Vec::with_capacity(8);
    for end in [p0, pt] {
        for (s1, s2) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            vertices.push(end + (t1 * s1 + t2 * s2) * radius);
        }
    }
    if (pt - p0).norm() < 1e-9 {
        // Flat square: thicken along the axis so the tube stays a solid.
        let a = axis.normalize() * radius;
        for v in vertices.iter_mut().take(4) {
            *v -= a;
        }
        for v in vertices.iter_mut().skip(4) {
            *v += a;
        }
    }
    finish(vertices, radius, (p0, pt))
}

fn finish(vertices: Vec<Vec3>, radius: f64, segment: (Vec3, Vec3)) -> Tube {
    let pts: Vec<DVector<f64>> = vertices.iter().map(|v| DVector::from_column_slice(v.as_slice())).collect();
    let hrep = hpolytope_from_points(&pts);
    Tube {
        vertices,
        hrep,
        radius,
        segment,
    }
}

/// Acceleration cone valid over a whole tube.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeCone {
    /// `C_T`: rows `c_i(ν_j)` for every vertex and CWC row.
    pub raw: Vec<Vec3>,
    /// `C′_T`: minimal unit rows.
    pub reduced: Vec<Vec3>,
    /// Rays `(x̃, ỹ, 1)` of the cone with apex `(0, 0, -g)`.
    pub rays: Vec<Vec3>,
    pub cone: AccelCone,
}

impl TubeCone {
    /// `C′_T (p̈ - g)` per row; non-positive inside.
    pub fn slacks(&self, accel: &Vec3) -> Vec<f64> {
        self.cone.slacks(accel)
    }

    pub fn contains(&self, accel: &Vec3, tol: f64) -> bool {
        self.slacks(accel).iter().all(|&s| s <= tol)
    }

    /// Membership through the unreduced rows.
    pub fn contains_raw(&self, accel: &Vec3, tol: f64) -> bool {
        let rel = accel - self.cone.apex;
        self.raw.iter().all(|c| c.dot(&rel) <= tol * c.norm())
    }

    /// Whether `p̈ = 0` is strictly inside, i.e. the tube sits inside the
    /// static-equilibrium polygon.
    pub fn contains_rest(&self) -> bool {
        self.cone.interior
    }
}

/// `I_T = ∩_j C(ν_j)` for the tube vertices.
pub fn tube_cone(w: &WrenchCone, t: &Tube) -> Result<TubeCone, TubeError> {
    cone_over_points(w, &t.vertices)
}

/// Intersection of the acceleration cones at the given positions.
pub fn cone_over_points(w: &WrenchCone, points: &[Vec3]) -> Result<TubeCone, TubeError> {
    let raw: Vec<Vec3> = points.iter().flat_map(|p| cone_rows_at(w, p)).collect();
    let cone = accel_cone_from_rows(&raw);
    match cone.cross_section {
        Region2::Polygon(_) => {}
        _ => return Err(TubeError::EmptyCone),
    }
    Ok(TubeCone {
        reduced: cone.hrep.clone(),
        rays: cone.rays.clone(),
        raw,
        cone,
    })
}
