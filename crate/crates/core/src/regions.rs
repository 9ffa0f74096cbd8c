//! Stability regions derived from a contact wrench cone: static-equilibrium
//! polygon, pendular ZMP support area and COM acceleration cone, plus the
//! support-direction LP oracle used to cross-check the polygon.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::contact::{ContactSet, WrenchCone};
use crate::poly::hull::convex_hull_2d;
use crate::poly::lp::{solve_standard, LpOutcome};
use crate::poly::polygon::{polar_vertex_enum, polygon_from_halfplanes};
use crate::poly::{cross, HPolytope, Region2, Tolerances};
use crate::screw::dual_twist_at;
use crate::{Vec2, Vec3, GRAVITY};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("no point satisfies the stability conditions")]
    Empty,
    #[error("ZMP plane passes through the COM (h = 0)")]
    DegenerateHeight,
    #[error("no static equilibrium exists for this contact set")]
    Infeasible,
    #[error("support LP failed: {0}")]
    Lp(String),
}

/// Rows with a horizontal part below this norm are treated as constants.
const FLAT_ROW: f64 = 1e-10;
/// Relative slackness under which the polar form is not used.
const POLAR_MIN_SLACK: f64 = 1e-9;

/// Static-equilibrium polygon of the COM projection.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticPolygon {
    pub polygon: Region2,
    /// Unit-norm halfplanes `row·(x, y) ≤ rhs`, one per contributing CWC row.
    pub rows: Vec<Vec2>,
    pub rhs: Vec<f64>,
    pub chebyshev: Option<Vec2>,
    pub inscribed_radius: f64,
}

impl StaticPolygon {
    pub fn halfplanes(&self) -> HPolytope {
        HPolytope::from_rows2(&self.rows, &self.rhs)
    }

    /// Signed distances `σ` of `xy` to every supporting line (positive
    /// inside).
    pub fn slackness(&self, xy: &Vec2) -> Vec<f64> {
        slackness(self, xy)
    }

    pub fn min_slackness(&self, xy: &Vec2) -> f64 {
        self.slackness(xy).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Strict interior test with a margin in meters.
    pub fn contains_strictly(&self, xy: &Vec2, margin: f64) -> bool {
        !self.rows.is_empty() && self.min_slackness(xy) > margin
    }
}

/// `σ_â(x, y) = -a_Oz + a_y x - a_x y`, normalised per row.
pub fn slackness(sp: &StaticPolygon, xy: &Vec2) -> Vec<f64> {
    sp.rows.iter().zip(&sp.rhs).map(|(r, b)| b - r.dot(xy)).collect()
}

/// Static-equilibrium polygon from the CWC rows.
///
/// Each row gives `m g (a_Oz - a_y x + a_x y) ≤ 0`; the `mass` only scales
/// rows before normalisation, so the polygon does not depend on it.
pub fn static_polygon(w: &WrenchCone, mass: f64) -> StaticPolygon {
    static_polygon_with(w, mass, &Tolerances::default())
}

pub fn static_polygon_with(w: &WrenchCone, mass: f64, tol: &Tolerances) -> StaticPolygon {
    let mg = mass * GRAVITY;
    let mut rows = Vec::with_capacity(w.len());
    let mut rhs = Vec::with_capacity(w.len());
    let mut infeasible = false;
    for d in &w.rows {
        // Express the row at the world origin.
        let a_o = dual_twist_at(d, &Vec3::zeros());
        let a = d.a;
        let row = Vec2::new(-a.y, a.x) * mg;
        let b = -a_o.z * mg;
        let n = row.norm();
        if n <= FLAT_ROW * mg * (a_o.norm() + a.norm()).max(1e-300) {
            if b < -tol.lp * mg {
                infeasible = true;
            }
            continue;
        }
        rows.push(row / n);
        rhs.push(b / n);
    }
    if infeasible {
        return StaticPolygon {
            polygon: Region2::Empty,
            rows,
            rhs,
            chebyshev: None,
            inscribed_radius: 0.0,
        };
    }
    let hp = polygon_from_halfplanes(&rows, &rhs, tol);
    StaticPolygon {
        polygon: hp.region,
        rows,
        rhs,
        chebyshev: hp.center,
        inscribed_radius: hp.radius,
    }
}

/// Force coefficients `c_i(p) = a_O + a × p` of every CWC row at `p`.
///
/// A contact force `f` applied with zero moment about `p` is in the cone iff
/// `c_i(p)·f ≤ 0` for all rows.
pub fn cone_rows_at(w: &WrenchCone, p: &Vec3) -> Vec<Vec3> {
    w.rows.iter().map(|d| dual_twist_at(d, p)).collect()
}

/// Pendular ZMP support area on the horizontal plane `z = z_plane`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZmpArea {
    pub polygon: Region2,
    pub com: Vec3,
    /// `z_plane - z_com`; negative when the plane is below the COM.
    pub h: f64,
    pub z_plane: f64,
    /// Whether the polar form around the COM projection was used, i.e. the
    /// COM is strictly inside the static polygon.
    pub polar: bool,
}

/// ZMP support area for a COM at `com`, under zero angular momentum and
/// constant height.
///
/// With `Δ = Z - G`, the contact force is `(mg/h)(Δx, Δy, h)`, so each row
/// becomes `(a_i, b_i)·Δ ≤ h σ_i` for `h > 0` and the reverse for `h < 0`.
/// Dividing by `h σ_i` gives the polar form around the COM projection when
/// every `σ_i > 0`. Otherwise the halfplanes are intersected after Chebyshev
/// recentering.
pub fn zmp_area(w: &WrenchCone, com: Vec3, z_plane: f64) -> Result<ZmpArea, RegionError> {
    let tol = Tolerances::default();
    let h = z_plane - com.z;
    if h.abs() < 1e-12 {
        return Err(RegionError::DegenerateHeight);
    }
    let rows = cone_rows_at(w, &com);
    let g2 = com.xy();
    let all_positive = rows.iter().all(|c| -c.z > POLAR_MIN_SLACK * c.norm());
    let (polygon, polar) = if all_positive {
        let polar_pts: Vec<Vec2> = rows.iter().map(|c| Vec2::new(c.x, c.y) / (h * -c.z)).collect();
        (shift(polar_vertex_enum(&polar_pts, &tol), g2), true)
    } else {
        let s = h.signum();
        let r2: Vec<Vec2> = rows.iter().map(|c| Vec2::new(c.x, c.y) * s).collect();
        let b: Vec<f64> = rows
            .iter()
            .zip(&r2)
            .map(|(c, r)| -c.z * h.abs() + r.dot(&g2))
            .collect();
        (polygon_from_halfplanes(&r2, &b, &tol).region, false)
    };
    if polygon == Region2::Empty {
        return Err(RegionError::Empty);
    }
    Ok(ZmpArea {
        polygon,
        com,
        h,
        z_plane,
        polar,
    })
}

fn shift(r: Region2, by: Vec2) -> Region2 {
    match r {
        Region2::Point(p) => Region2::Point(p + by),
        Region2::Segment(a, b) => Region2::Segment(a + by, b + by),
        Region2::Polygon(v) => Region2::Polygon(v.into_iter().map(|p| p + by).collect()),
        other => other,
    }
}

/// Cone of feasible COM accelerations: `apex + cone(rays)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AccelCone {
    pub apex: Vec3,
    /// Cross-section in `(ẍ, ÿ) / (g + z̈)`.
    pub cross_section: Region2,
    /// Rays `(x̃_i, ỹ_i, 1)`.
    pub rays: Vec<Vec3>,
    /// Unit rows `c` with `c·(p̈ - g) ≤ 0`; minimal for polygonal
    /// cross-sections.
    pub hrep: Vec<Vec3>,
    /// True when `0` is strictly inside the cone.
    pub interior: bool,
}

impl AccelCone {
    pub fn is_empty(&self) -> bool {
        self.cross_section == Region2::Empty
    }

    /// `c·(p̈ - g)` per row; non-positive inside.
    pub fn slacks(&self, accel: &Vec3) -> Vec<f64> {
        let rel = accel - self.apex;
        self.hrep.iter().map(|c| c.dot(&rel)).collect()
    }

    pub fn contains(&self, accel: &Vec3, tol: f64) -> bool {
        !self.is_empty() && self.slacks(accel).iter().all(|&s| s <= tol)
    }

    /// Scalar `z̈` bound form: `(ẍ, ÿ)/(g + z̈)` in the cross-section.
    pub fn cross_section_at(&self, zdd: f64) -> Region2 {
        shift_scale(&self.cross_section, GRAVITY + zdd)
    }
}

fn shift_scale(r: &Region2, s: f64) -> Region2 {
    match r {
        Region2::Point(p) => Region2::Point(p * s),
        Region2::Segment(a, b) => Region2::Segment(a * s, b * s),
        Region2::Polygon(v) => Region2::Polygon(v.iter().map(|p| p * s).collect()),
        other => other.clone(),
    }
}

/// Acceleration cone at `com`.
pub fn accel_cone(w: &WrenchCone, com: Vec3) -> AccelCone {
    accel_cone_from_rows(&cone_rows_at(w, &com))
}

/// Acceleration cone from force rows `c_i` (each `c_i·(p̈ - g) ≤ 0`).
///
/// The cross-section `a_i x̃ + b_i ỹ ≤ σ_i` is read in polar form when every
/// `σ_i > 0`; otherwise it is Chebyshev-recentred.
pub fn accel_cone_from_rows(rows: &[Vec3]) -> AccelCone {
    let tol = Tolerances::default();
    let apex = Vec3::new(0.0, 0.0, -GRAVITY);
    let unit: Vec<Vec3> = rows
        .iter()
        .filter(|c| c.norm() > 0.0)
        .map(|c| c.normalize())
        .collect();
    let interior = !unit.is_empty() && unit.iter().all(|c| -c.z > POLAR_MIN_SLACK);
    let cross_section = if interior {
        let polar_pts: Vec<Vec2> = unit.iter().map(|c| Vec2::new(c.x, c.y) / -c.z).collect();
        polar_vertex_enum(&polar_pts, &tol)
    } else {
        let r2: Vec<Vec2> = unit.iter().map(|c| Vec2::new(c.x, c.y)).collect();
        let b: Vec<f64> = unit.iter().map(|c| -c.z).collect();
        polygon_from_halfplanes(&r2, &b, &tol).region
    };
    let rays: Vec<Vec3> = cross_section
        .vertices()
        .iter()
        .map(|v| Vec3::new(v.x, v.y, 1.0))
        .collect();
    let hrep = match &cross_section {
        Region2::Polygon(v) => facets_over_polygon(v),
        _ => unit,
    };
    AccelCone {
        apex,
        cross_section,
        rays,
        hrep,
        interior,
    }
}

/// Facet rows of the cone over a CCW polygon lifted to `z = 1`.
fn facets_over_polygon(v: &[Vec2]) -> Vec<Vec3> {
    let n = v.len();
    let centroid: Vec2 = v.iter().sum::<Vec2>() / n as f64;
    let inner = Vec3::new(centroid.x, centroid.y, 1.0);
    (0..n)
        .map(|i| {
            let r1 = Vec3::new(v[i].x, v[i].y, 1.0);
            let r2 = Vec3::new(v[(i + 1) % n].x, v[(i + 1) % n].y, 1.0);
            let c = r1.cross(&r2).normalize();
            if c.dot(&inner) > 0.0 {
                -c
            } else {
                c
            }
        })
        .collect()
}

/// Static-equilibrium polygon by support-direction LPs over contact forces.
///
/// Starting from the four axis directions, the edge of the inner polygon with
/// the largest gap to the outer approximation is refined along its normal
/// until no outer vertex is farther than `gap_tol` (m) from the inner
/// polygon, which bounds the Hausdorff error.
pub fn bretl_lall_polygon(cs: &ContactSet, mass: f64) -> Result<Region2, RegionError> {
    bretl_lall_polygon_with(cs, mass, 1e-7)
}

pub fn bretl_lall_polygon_with(cs: &ContactSet, mass: f64, gap_tol: f64) -> Result<Region2, RegionError> {
    let lp = SupportLp::new(cs, mass);
    let mut support: Vec<(Vec2, Vec2)> = Vec::new();
    for d in [Vec2::x(), Vec2::y(), -Vec2::x(), -Vec2::y()] {
        match lp.support(&d)? {
            Support::Point(p) => support.push((d, p)),
            Support::Unbounded => return Ok(Region2::Unbounded { directions: vec![d] }),
        }
    }
    let angle = |d: &Vec2| d.y.atan2(d.x);
    for _ in 0..2000 {
        support.sort_by(|a, b| angle(&a.0).total_cmp(&angle(&b.0)));
        let n = support.len();
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            let (d1, p1) = support[i];
            let (d2, p2) = support[(i + 1) % n];
            let gap = gap_height(&d1, &p1, &d2, &p2);
            if gap > gap_tol && worst.is_none_or(|(_, g)| gap > g) {
                worst = Some((i, gap));
            }
        }
        let Some((i, _)) = worst else { break };
        let (_, p1) = support[i];
        let (_, p2) = support[(i + 1) % n];
        let e = p2 - p1;
        let d = Vec2::new(e.y, -e.x).normalize();
        match lp.support(&d)? {
            Support::Point(p) => support.push((d, p)),
            Support::Unbounded => return Ok(Region2::Unbounded { directions: vec![d] }),
        }
    }
    let pts: Vec<Vec2> = support.iter().map(|(_, p)| *p).collect();
    let hull = convex_hull_2d(&pts, 1e-10);
    Ok(match hull {
        Region2::Segment(a, b) if (a - b).norm() < 1e-9 => Region2::Point(a),
        other => other,
    })
}

/// Distance from the corner of the two support lines to the inner edge
/// `p1 p2`.
fn gap_height(d1: &Vec2, p1: &Vec2, d2: &Vec2, p2: &Vec2) -> f64 {
    if (p1 - p2).norm() < 1e-12 {
        return 0.0;
    }
    let det = d1.x * d2.y - d1.y * d2.x;
    if det.abs() < 1e-15 {
        return 0.0;
    }
    let b1 = d1.dot(p1);
    let b2 = d2.dot(p2);
    let w = Vec2::new(b1 * d2.y - b2 * d1.y, d1.x * b2 - d2.x * b1) / det;
    cross(p1, &w, p2).abs() / (p2 - p1).norm()
}

enum Support {
    Point(Vec2),
    Unbounded,
}

/// `max d·(x, y)` subject to equilibrium with pyramid-feasible forces.
struct SupportLp {
    a: DMatrix<f64>,
    b: Vec<f64>,
    n_forces: usize,
}

impl SupportLp {
    fn new(cs: &ContactSet, mass: f64) -> Self {
        let mg = mass * GRAVITY;
        let gens = cs.wrench_generators(&Vec3::zeros());
        let n = gens.len();
        // Columns: λ (n), x⁺, x⁻, y⁺, y⁻.
        let mut a = DMatrix::zeros(6, n + 4);
        for (j, g) in gens.iter().enumerate() {
            for i in 0..6 {
                a[(i, j)] = g[i];
            }
        }
        // Σ C × f = m g (y, -x, 0)
        a[(3, n + 2)] = -mg;
        a[(3, n + 3)] = mg;
        a[(4, n)] = mg;
        a[(4, n + 1)] = -mg;
        let b = vec![0.0, 0.0, mg, 0.0, 0.0, 0.0];
        Self { a, b, n_forces: n }
    }

    fn support(&self, d: &Vec2) -> Result<Support, RegionError> {
        let n = self.n_forces;
        let mut c = vec![0.0; n + 4];
        c[n] = -d.x;
        c[n + 1] = d.x;
        c[n + 2] = -d.y;
        c[n + 3] = d.y;
        match solve_standard(&self.a, &self.b, &c, 1e-9) {
            Ok(LpOutcome::Optimal(sol)) => Ok(Support::Point(Vec2::new(
                sol.x[n] - sol.x[n + 1],
                sol.x[n + 2] - sol.x[n + 3],
            ))),
            Ok(LpOutcome::Infeasible) => Err(RegionError::Infeasible),
            Ok(LpOutcome::Unbounded) => Ok(Support::Unbounded),
            Err(e) => Err(RegionError::Lp(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{compute_cwc, feasible_forces, Contact};
    use crate::poly::hausdorff;
    use crate::screw::Screw;
    use nalgebra::Matrix3;

    fn foot(center: Vec3, length: f64, width: f64) -> ContactSet {
        ContactSet::rectangle(center, &Matrix3::identity(), length, width, 0.7).unwrap()
    }

    fn rect(cx: f64, cy: f64, l: f64, w: f64) -> Region2 {
        Region2::Polygon(vec![
            Vec2::new(cx - l / 2.0, cy - w / 2.0),
            Vec2::new(cx + l / 2.0, cy - w / 2.0),
            Vec2::new(cx + l / 2.0, cy + w / 2.0),
            Vec2::new(cx - l / 2.0, cy + w / 2.0),
        ])
    }

    fn static_ok(cs: &ContactSet, xy: Vec2, mass: f64) -> bool {
        let f = Vec3::new(0.0, 0.0, mass * GRAVITY);
        let g = Vec3::new(xy.x, xy.y, 0.8);
        feasible_forces(cs, &Screw::wrench(f, Vec3::zeros(), g)).is_some()
    }

    #[test]
    fn point_contact_gives_point() {
        let cs = ContactSet::new(vec![Contact::new(Vec3::new(0.3, 0.2, 0.0), Vec3::z(), 0.7).unwrap()]);
        let sp = static_polygon(&compute_cwc(&cs, Vec3::zeros()), 38.0);
        match sp.polygon {
            Region2::Point(p) => assert!((p - Vec2::new(0.3, 0.2)).norm() < 1e-7),
            other => panic!("expected point, got {other:?}"),
        }
        // Grid oracle: only the contact's projection admits equilibrium.
        assert!(static_ok(&cs, Vec2::new(0.3, 0.2), 38.0));
        assert!(!static_ok(&cs, Vec2::new(0.301, 0.2), 38.0));
        let bl = bretl_lall_polygon(&cs, 38.0).unwrap();
        assert!(hausdorff(&bl, &Region2::Point(Vec2::new(0.3, 0.2))) < 1e-7);
    }

    #[test]
    fn flat_foot_polygon_is_the_rectangle() {
        let cs = foot(Vec3::new(0.1, -0.05, 0.0), 0.2, 0.1);
        let sp = static_polygon(&compute_cwc(&cs, Vec3::zeros()), 38.0);
        let expected = rect(0.1, -0.05, 0.2, 0.1);
        assert!(hausdorff(&sp.polygon, &expected) < 1e-6);
        let bl = bretl_lall_polygon(&cs, 38.0).unwrap();
        assert!(hausdorff(&bl, &expected) < 1e-6);
    }

    #[test]
    fn mass_invariance() {
        let cs = foot(Vec3::new(0.0, 0.0, 0.1), 0.24, 0.14);
        let w = compute_cwc(&cs, Vec3::zeros());
        let a = static_polygon(&w, 1.0).polygon.vertices();
        for m in [38.0, 100.0] {
            let b = static_polygon(&w, m).polygon.vertices();
            assert_eq!(a.len(), b.len());
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn slackness_examples() {
        let cs = foot(Vec3::zeros(), 0.2, 0.1);
        let sp = static_polygon(&compute_cwc(&cs, Vec3::zeros()), 38.0);
        let on_edge = sp.slackness(&Vec2::new(0.1, 0.0));
        assert!(on_edge.iter().any(|s| s.abs() < 1e-9));
        let c = sp.chebyshev.unwrap();
        assert!((sp.min_slackness(&c) - sp.inscribed_radius).abs() < 1e-9);
        assert!((sp.inscribed_radius - 0.05).abs() < 1e-7);
        assert!(sp.min_slackness(&Vec2::new(0.3, 0.0)) < 0.0);
    }

    #[test]
    fn zmp_area_flat_foot() {
        let cs = foot(Vec3::zeros(), 0.2, 0.1);
        let w = compute_cwc(&cs, Vec3::zeros());
        let area = zmp_area(&w, Vec3::new(0.0, 0.0, 0.8), 0.0).unwrap();
        assert!(area.polar && area.h < 0.0);
        assert!(hausdorff(&area.polygon, &rect(0.0, 0.0, 0.2, 0.1)) < 1e-6);
        assert_eq!(area.polygon.distance(&Vec2::zeros()), 0.0);
        assert_eq!(
            zmp_area(&w, Vec3::new(0.0, 0.0, 0.8), 0.8),
            Err(RegionError::DegenerateHeight)
        );
    }

    #[test]
    fn accel_cone_basics() {
        let cs = foot(Vec3::zeros(), 0.2, 0.1);
        let w = compute_cwc(&cs, Vec3::zeros());
        let cone = accel_cone(&w, Vec3::new(0.02, 0.01, 0.8));
        assert!(cone.interior);
        assert!(cone.contains(&Vec3::zeros(), 0.0));
        let slacks = cone.slacks(&cone.apex);
        assert!(slacks.iter().all(|s| s.abs() < 1e-12));
        assert!(!cone.contains(&Vec3::new(0.0, 0.0, -GRAVITY - 1.0), 1e-9));
        // Cross-sections scale with g + z̈.
        let a = cone.cross_section_at(0.0);
        let b = cone.cross_section_at(2.0);
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            assert!((p * ((GRAVITY + 2.0) / GRAVITY) - q).norm() < 1e-12);
        }
    }

    // The cone rows written from σ match the direct CWC pairing with
    // f = m(p̈ - g), τ_G = 0.
    #[test]
    fn sigma_form_matches_direct_pairing() {
        let cs = foot(Vec3::new(0.05, 0.0, 0.1), 0.2, 0.1).union(&foot(Vec3::new(0.3, 0.2, 0.2), 0.2, 0.1));
        let w = compute_cwc(&cs, Vec3::zeros());
        let g = Vec3::new(0.1, 0.05, 0.9);
        let acc = Vec3::new(0.4, -0.3, 1.2);
        let f = (acc - crate::gravity()) * 38.0;
        let wrench = Screw::wrench(f, Vec3::zeros(), g);
        let sp = static_polygon(&w, 38.0);
        for d in &w.rows {
            let direct = d.pair(&wrench);
            let a_o = d.a_o;
            let sigma = -a_o.z + d.a.y * g.x - d.a.x * g.y;
            let c = dual_twist_at(d, &g);
            assert!((c.z + sigma).abs() < 1e-12);
            let row_form = (c.x * acc.x + c.y * acc.y - sigma * acc.z - GRAVITY * sigma) * 38.0;
            assert!((direct - row_form).abs() < 1e-9 * (1.0 + direct.abs()));
        }
        assert!(!sp.rows.is_empty());
    }

    #[test]
    fn zmp_area_and_cone_cross_section_are_related() {
        let cs = foot(Vec3::zeros(), 0.2, 0.1).union(&foot(Vec3::new(0.25, -0.2, 0.0), 0.2, 0.1));
        let w = compute_cwc(&cs, Vec3::zeros());
        let com = Vec3::new(0.1, -0.1, 0.8);
        let cone = accel_cone(&w, com);
        let area = zmp_area(&w, com, 0.0).unwrap();
        // With z̈ = 0, (ẍ, ÿ) = (g / h)(x_Z - x_G, y_Z - y_G).
        let mapped: Vec<Vec2> = area
            .polygon
            .vertices()
            .iter()
            .map(|z| (z - com.xy()) * (GRAVITY / area.h))
            .collect();
        let mapped = convex_hull_2d(&mapped, 1e-10);
        assert!(hausdorff(&mapped, &cone.cross_section_at(0.0)) < 1e-9);
    }
}
