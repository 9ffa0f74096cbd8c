//! Contact-stability computation and preview control for multi-contact
//! point-mass walking.
//!
//! The crate is organised bottom-up:
//!
//! - [`screw`]: twists, wrenches and moment transport.
//! - [`poly`]: 2D hulls, polar vertex enumeration, double description,
//!   Chebyshev centering and the LP/QP solvers everything else relies on.
//! - [`contact`]: contacts, friction pyramids, grasp matrix and the contact
//!   wrench cone (CWC) as a set of dual twists.
//! - [`regions`]: static-equilibrium polygon, pendular ZMP area, COM
//!   acceleration cone and the support-direction LP oracle.
//! - [`tube`]: polyhedral COM tubes and the trajectory-wide acceleration cone.
//! - [`preview`] and [`fsm`]: the linear preview controller and the walking
//!   state machine that feeds it.
//! - [`sim`]: scenarios, the simulation loop, force-existence validation and
//!   benchmarks.

pub mod contact;
pub mod fsm;
pub mod poly;
pub mod preview;
pub mod regions;
pub mod screw;
pub mod sim;
pub mod tube;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Gravity constant (m/s²).
pub const GRAVITY: f64 = 9.81;

/// Gravity vector `(0, 0, -g)`.
pub fn gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, -GRAVITY)
}

pub use contact::{compute_cwc, Contact, ContactSet, WrenchCone};
pub use poly::{Region2, Tolerances};
pub use regions::{accel_cone, bretl_lall_polygon, static_polygon, zmp_area, AccelCone};
pub use screw::{DualTwist, Screw};
pub use tube::{build_tube, tube_cone, Tube, TubeCone};
