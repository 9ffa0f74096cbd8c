//! Contacts, linearized friction cones, grasp matrix and the contact wrench
//! cone.

use nalgebra::{DMatrix, DVector, Matrix3};
use thiserror::Error;

use crate::poly::dd::{double_description, Conditioning, PolyCone};
use crate::poly::lp::{solve_standard, LpOutcome};
use crate::screw::{DualTwist, Screw};
use crate::Vec3;

/// Default feasibility tolerance for cone membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ContactError {
    #[error("contact normal has zero length")]
    ZeroNormal,
    #[error("friction coefficient must be positive, got {0}")]
    Friction(f64),
    #[error("a friction pyramid needs at least 3 edges, got {0}")]
    Edges(usize),
    #[error("contact set is empty")]
    EmptySet,
}

/// A frictional point contact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub position: Vec3,
    /// Unit normal pointing into the robot.
    pub normal: Vec3,
    pub mu: f64,
    pub edges: usize,
}

impl Contact {
    /// Point contact with a 4-sided pyramid. The normal is normalised.
    pub fn new(position: Vec3, normal: Vec3, mu: f64) -> Result<Self, ContactError> {
        Self::with_edges(position, normal, mu, 4)
    }

    pub fn with_edges(position: Vec3, normal: Vec3, mu: f64, edges: usize) -> Result<Self, ContactError> {
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(ContactError::ZeroNormal);
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(ContactError::Friction(mu));
        }
        if edges < 3 {
            return Err(ContactError::Edges(edges));
        }
        Ok(Self {
            position,
            normal: normal / n,
            mu,
            edges,
        })
    }

    /// Tangent frame `(t1, t2)` with `(t1, t2, n)` right-handed.
    pub fn tangents(&self) -> (Vec3, Vec3) {
        tangent_frame(&self.normal)
    }

    /// Exact Coulomb cone: `‖f_t‖ ≤ μ f_n`.
    pub fn in_exact_cone(&self, f: &Vec3, tol: f64) -> bool {
        let fn_ = f.dot(&self.normal);
        let ft = (f - self.normal * fn_).norm();
        ft <= self.mu * fn_ + tol
    }
}

/// Unit vectors orthogonal to `d`, built by Gram–Schmidt against world x
/// (world y when `d` is nearly parallel to x).
pub fn tangent_frame(d: &Vec3) -> (Vec3, Vec3) {
    let d = d.normalize();
    let seed = if d.x.abs() > 0.99 { Vec3::y() } else { Vec3::x() };
    let t1 = (seed - d * d.dot(&seed)).normalize();
    let t2 = d.cross(&t1);
    (t1, t2)
}

/// Inner polyhedral approximation of a friction cone.
#[derive(Clone, Debug, PartialEq)]
pub struct FrictionPyramid {
    pub rays: Vec<Vec3>,
    /// Unit rows `F` with `F f ≤ 0` inside.
    pub halfspaces: Vec<Vec3>,
}

impl FrictionPyramid {
    pub fn contains(&self, f: &Vec3, tol: f64) -> bool {
        self.halfspaces.iter().all(|row| row.dot(f) <= tol)
    }
}

/// Pyramid inscribed in the friction cone: edges `n + μ(cos θ t1 + sin θ t2)`
/// at `θ_k = 2πk/E + π/E`.
pub fn linearize_friction(c: &Contact) -> FrictionPyramid {
    let (t1, t2) = c.tangents();
    let e = c.edges;
    let rays: Vec<Vec3> = (0..e)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / e as f64 + std::f64::consts::PI / e as f64;
            c.normal + (t1 * th.cos() + t2 * th.sin()) * c.mu
        })
        .collect();
    let halfspaces = (0..e)
        .map(|k| {
            let row = rays[k].cross(&rays[(k + 1) % e]).normalize();
            if row.dot(&c.normal) > 0.0 {
                -row
            } else {
                row
            }
        })
        .collect();
    FrictionPyramid { rays, halfspaces }
}

/// A set of point contacts acting on the same body.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContactSet {
    pub contacts: Vec<Contact>,
}

impl ContactSet {
    pub fn new(contacts: Vec<Contact>) -> Self {
        Self { contacts }
    }

    /// Four corner contacts of a rectangle of `length × width` whose frame
    /// is `rotation` (columns: length axis, width axis, normal).
    pub fn rectangle(center: Vec3, rotation: &Matrix3<f64>, length: f64, width: f64, mu: f64) -> Result<Self, ContactError> {
        let ex = rotation.column(0).into_owned();
        let ey = rotation.column(1).into_owned();
        let n = rotation.column(2).into_owned();
        let mut contacts = Vec::with_capacity(4);
        for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            let p = center + ex * (sx * length / 2.0) + ey * (sy * width / 2.0);
            contacts.push(Contact::new(p, n, mu)?);
        }
        Ok(Self { contacts })
    }

    pub fn union(&self, other: &ContactSet) -> ContactSet {
        let mut contacts = self.contacts.clone();
        contacts.extend(other.contacts.iter().copied());
        ContactSet { contacts }
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn with_friction(&self, mu: f64) -> ContactSet {
        ContactSet {
            contacts: self.contacts.iter().map(|c| Contact { mu, ..*c }).collect(),
        }
    }

    /// Wrench generators `(f_e, (C_i − O) × f_e)` over every pyramid edge.
    pub fn wrench_generators(&self, origin: &Vec3) -> Vec<[f64; 6]> {
        let mut out = Vec::new();
        for c in &self.contacts {
            let arm = c.position - origin;
            for f in linearize_friction(c).rays {
                let t = arm.cross(&f);
                out.push([f.x, f.y, f.z, t.x, t.y, t.z]);
            }
        }
        out
    }
}

/// `G_O` (6 × 3K) with block `[I; (C_i − O)×]`, so that `w_O = G_O f_all`.
pub fn grasp_matrix(cs: &ContactSet, origin: &Vec3) -> DMatrix<f64> {
    let k = cs.len();
    let mut g = DMatrix::zeros(6, 3 * k);
    for (i, c) in cs.contacts.iter().enumerate() {
        let r = c.position - origin;
        for j in 0..3 {
            g[(j, 3 * i + j)] = 1.0;
        }
        let cross = r.cross_matrix();
        g.view_mut((3, 3 * i), (3, 3)).copy_from(&cross);
    }
    g
}

/// Contact wrench cone in halfspace form: `â·ŵ ≤ 0` for every row.
#[derive(Clone, Debug, PartialEq)]
pub struct WrenchCone {
    pub rows: Vec<DualTwist>,
    /// Point where the rows were computed.
    pub origin: Vec3,
    pub conditioning: Conditioning,
}

/// Outcome of a membership query.
#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// `â·ŵ` per row; non-positive inside.
    pub values: Vec<f64>,
}

impl WrenchCone {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `A_O` as an `L × 6` matrix, force columns first.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), 6, |i, j| self.rows[i].row()[j])
    }

    pub fn membership(&self, wrench: &Screw) -> Membership {
        cwc_membership(self, wrench)
    }
}

/// CWC of a contact set at `origin`: V-rep generators converted by double
/// description. Rows have unit norm.
pub fn compute_cwc(cs: &ContactSet, origin: Vec3) -> WrenchCone {
    let rays: Vec<DVector<f64>> = cs
        .wrench_generators(&origin)
        .iter()
        .map(|g| DVector::from_column_slice(g))
        .collect();
    let out = double_description(&PolyCone::from_rays(6, rays));
    if out.conditioning.warning {
        log::warn!(
            "contact wrench cone conditioning warning: rank {}, 1/cond {:.3e}",
            out.conditioning.rank,
            out.conditioning.inverse_condition
        );
    }
    let a = out.cone.halfspaces().expect("V input gives H output");
    let rows = (0..a.nrows())
        .map(|i| {
            let r: Vec<f64> = a.row(i).iter().copied().collect();
            DualTwist::from_row(&r, origin)
        })
        .collect();
    WrenchCone {
        rows,
        origin,
        conditioning: out.conditioning,
    }
}

/// Membership of a wrench, given at any point, in the cone.
pub fn cwc_membership(w: &WrenchCone, wrench: &Screw) -> Membership {
    let at = wrench.transport(w.origin);
    let values: Vec<f64> = w.rows.iter().map(|d| d.pair(&at)).collect();
    let scale = MEMBERSHIP_TOL * at.coords().iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let member = values.iter().all(|&v| v <= scale);
    Membership { member, values }
}

/// Force-existence test: pyramid-feasible contact forces whose net wrench is
/// `wrench`. Returns one force per contact when they exist.
pub fn feasible_forces(cs: &ContactSet, wrench: &Screw) -> Option<Vec<Vec3>> {
    let origin = wrench.point;
    let pyramids: Vec<FrictionPyramid> = cs.contacts.iter().map(linearize_friction).collect();
    let gens = cs.wrench_generators(&origin);
    let n = gens.len();
    if n == 0 {
        return None;
    }
    let a = DMatrix::from_fn(6, n, |i, j| gens[j][i]);
    let b = wrench.coords();
    match solve_standard(&a, &b, &vec![0.0; n], 1e-9) {
        Ok(LpOutcome::Optimal(sol)) => {
            let mut forces = Vec::with_capacity(cs.len());
            let mut k = 0;
            for p in &pyramids {
                let mut f = Vec3::zeros();
                for r in &p.rays {
                    f += r * sol.x[k];
                    k += 1;
                }
                forces.push(f);
            }
            Some(forces)
        }
        _ => None,
    }
}
