//! Ground-truth check: do contact forces exist for a COM acceleration?

use serde::{Deserialize, Serialize};

use crate::contact::{feasible_forces, ContactSet};
use crate::screw::Screw;
use crate::{gravity, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub enum ForceCheck {
    Feasible(Vec<Vec3>),
    Infeasible,
}

impl ForceCheck {
    pub fn is_feasible(&self) -> bool {
        matches!(self, ForceCheck::Feasible(_))
    }

    pub fn status(&self) -> ForceStatus {
        match self {
            ForceCheck::Feasible(_) => ForceStatus::Feasible,
            ForceCheck::Infeasible => ForceStatus::Infeasible,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceStatus {
    Feasible,
    Infeasible,
}

/// Forces in the friction pyramids summing to `m (u - g)` with zero moment
/// about the COM `p`.
pub fn validate_tick(cs: &ContactSet, mass: f64, p: &Vec3, u: &Vec3) -> ForceCheck {
    let f = (u - gravity()) * mass;
    match feasible_forces(cs, &Screw::wrench(f, Vec3::zeros(), *p)) {
        Some(forces) => ForceCheck::Feasible(forces),
        None => ForceCheck::Infeasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GRAVITY;
    use nalgebra::Matrix3;

    fn foot() -> ContactSet {
        ContactSet::rectangle(Vec3::zeros(), &Matrix3::identity(), 0.24, 0.14, 0.7).unwrap()
    }

    #[test]
    fn gravity_compensation() {
        let m = 38.0;
        match validate_tick(&foot(), m, &Vec3::new(0.0, 0.0, 0.8), &Vec3::zeros()) {
            ForceCheck::Feasible(fs) => {
                let total: Vec3 = fs.iter().sum();
                assert!((total - Vec3::new(0.0, 0.0, m * GRAVITY)).norm() < 1e-6);
                let moment: Vec3 = fs
                    .iter()
                    .zip(&foot().contacts)
                    .map(|(f, c)| (c.position - Vec3::new(0.0, 0.0, 0.8)).cross(f))
                    .sum();
                assert!(moment.norm() < 1e-6);
            }
            ForceCheck::Infeasible => panic!("standing still must be feasible"),
        }
    }

    #[test]
    fn outside_foot_is_infeasible() {
        assert_eq!(validate_tick(&foot(), 38.0, &Vec3::new(1.0, 0.0, 0.8), &Vec3::zeros()), ForceCheck::Infeasible);
    }
}
