//! Screw algebra.
//!
//! A screw is a resultant vector plus a moment taken at an explicit reference
//! point. Twists store `(ω, v_O)` and wrenches `(f, τ_O)`; both are the same
//! type here, and every value carries the point its moment is expressed at.

use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Screw {
    pub resultant: Vec3,
    pub moment: Vec3,
    pub point: Vec3,
}

impl Screw {
    pub fn new(resultant: Vec3, moment: Vec3, point: Vec3) -> Self {
        Self {
            resultant,
            moment,
            point,
        }
    }

    /// Twist with angular velocity `omega` and linear velocity `v` at `point`.
    pub fn twist(omega: Vec3, v: Vec3, point: Vec3) -> Self {
        Self::new(omega, v, point)
    }

    /// Wrench with net force `force` and net moment `torque` at `point`.
    pub fn wrench(force: Vec3, torque: Vec3, point: Vec3) -> Self {
        Self::new(force, torque, point)
    }

    /// Moment of the screw at `p`: `m_P = m_O + (O - P) × r`.
    pub fn moment_at(&self, p: &Vec3) -> Vec3 {
        self.moment + (self.point - p).cross(&self.resultant)
    }

    /// Re-express the screw at `p`. The resultant is unchanged.
    pub fn transport(&self, p: Vec3) -> Screw {
        Screw::new(self.resultant, self.moment_at(&p), p)
    }

    /// Six-vector `[resultant; moment]` at the screw's own point.
    pub fn coords(&self) -> [f64; 6] {
        let r = &self.resultant;
        let m = &self.moment;
        [r.x, r.y, r.z, m.x, m.y, m.z]
    }
}

/// Scalar product between a twist and a wrench, `v·f + ω·τ`.
///
/// The wrench is transported to the twist's reference point first, so the
/// two screws may be given at different points.
pub fn screw_pairing(twist: &Screw, wrench: &Screw) -> f64 {
    let torque = wrench.moment_at(&twist.point);
    twist.moment.dot(&wrench.resultant) + twist.resultant.dot(&torque)
}

/// One halfspace row of a contact wrench cone, read as a twist.
///
/// The row `[a_O; a]` of the CWC matrix computed at `origin` gives the
/// inequality `a_O·f + a·τ_O ≤ 0`. The pair `(a, a_O)` transforms exactly
/// like a twist (resultant `a`, moment `a_O`), which is what makes the
/// inequality independent of the point where the wrench is expressed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualTwist {
    /// Moment part at `origin`, paired with the force.
    pub a_o: Vec3,
    /// Resultant part, paired with the torque.
    pub a: Vec3,
    pub origin: Vec3,
}

impl DualTwist {
    pub fn new(a_o: Vec3, a: Vec3, origin: Vec3) -> Self {
        Self { a_o, a, origin }
    }

    pub fn from_row(row: &[f64], origin: Vec3) -> Self {
        Self::new(
            Vec3::new(row[0], row[1], row[2]),
            Vec3::new(row[3], row[4], row[5]),
            origin,
        )
    }

    pub fn as_screw(&self) -> Screw {
        Screw::twist(self.a, self.a_o, self.origin)
    }

    /// `â·ŵ`, with the wrench given at any point.
    pub fn pair(&self, wrench: &Screw) -> f64 {
        screw_pairing(&self.as_screw(), wrench)
    }

    pub fn row(&self) -> [f64; 6] {
        [
            self.a_o.x, self.a_o.y, self.a_o.z, self.a.x, self.a.y, self.a.z,
        ]
    }
}

/// Force-part coefficient of a dual twist at `p_g`: `a_G = a_O + (O - G) × a`.
///
/// With `O` at the world origin this is `a_O + a × p_G`.
pub fn dual_twist_at(d: &DualTwist, p_g: &Vec3) -> Vec3 {
    d.a_o + (d.origin - p_g).cross(&d.a)
}
