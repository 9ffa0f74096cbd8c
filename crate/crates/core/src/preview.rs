//! Linear preview control of the COM as a discrete double integrator.
//!
//! With `u(k)` the COM acceleration held over `[kΔT, (k+1)ΔT)`:
//!
//! ```text
//! p(k) = p0 + kΔT v0 + Σ_{j<k} ΔT² (k - j - ½) u(j)
//! v(k) = v0 + ΔT Σ_{j<k} u(j)
//! ```
//!
//! The preview problem minimises `‖x(N) - x_T‖² + ε‖U‖²` subject to
//! per-step cone rows on `u(k)` and tube rows on `p(k)`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::poly::qp::{qp_solve, QpError, QpOutcome};
use crate::poly::HPolytope;
use crate::{gravity, Vec3};

/// COM position and velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComState {
    pub p: Vec3,
    pub v: Vec3,
}

impl ComState {
    pub fn new(p: Vec3, v: Vec3) -> Self {
        Self { p, v }
    }

    pub fn at_rest(p: Vec3) -> Self {
        Self { p, v: Vec3::zeros() }
    }

    /// One exact integration step under constant acceleration `u`.
    pub fn step(&self, u: &Vec3, dt: f64) -> ComState {
        ComState {
            p: self.p + self.v * dt + u * (0.5 * dt * dt),
            v: self.v + u * dt,
        }
    }

    fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z])
    }
}

/// States `x(1..=N)` reached from `x0` under `u`.
pub fn propagate(x0: &ComState, u: &[Vec3], dt: f64) -> Vec<ComState> {
    let mut x = *x0;
    u.iter()
        .map(|uk| {
            x = x.step(uk, dt);
            x
        })
        .collect()
}

/// Constraint set active on a range of preview steps.
#[derive(Clone, Debug, PartialEq)]
pub struct PreviewSegment {
    /// Steps `k` covered: rows on `u(k)` for `k < N` and on `p(k)` for
    /// `k ≥ 1`.
    pub k_range: Range<usize>,
    /// Unit rows `c` of `c·(u - g) ≤ 0`.
    pub cone: Vec<Vec3>,
    /// Tube `A p ≤ b`.
    pub tube: HPolytope,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreviewProblem {
    pub x0: ComState,
    pub x_target: ComState,
    pub n: usize,
    pub dt: f64,
    pub eps: f64,
    pub segments: Vec<PreviewSegment>,
    pub g: Vec3,
    /// Cone rows are tightened to `c·(u - g) ≤ -margin ‖c‖`.
    pub cone_margin: f64,
}

impl PreviewProblem {
    pub fn new(x0: ComState, x_target: ComState, n: usize, horizon: f64, eps: f64) -> Self {
        assert!(n >= 1, "preview needs at least one step");
        assert!(horizon > 0.0, "preview horizon must be positive");
        Self {
            x0,
            x_target,
            n,
            dt: horizon / n as f64,
            eps,
            segments: Vec::new(),
            g: gravity(),
            cone_margin: 0.0,
        }
    }

    pub fn with_segment(mut self, segment: PreviewSegment) -> Self {
        self.segments.push(segment);
        self
    }

    pub fn segment_for(&self, k: usize) -> Option<&PreviewSegment> {
        self.segments.iter().find(|s| s.k_range.contains(&k))
    }

    /// `Φ_k` and `Ψ_k` of `x(k) = Φ_k x0 + Ψ_k U`, as blocks acting on
    /// `(p, v)`.
    pub fn transition(&self, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let dt = self.dt;
        let n = self.n;
        let mut phi = DMatrix::identity(6, 6);
        for i in 0..3 {
            phi[(i, 3 + i)] = k as f64 * dt;
        }
        let mut psi = DMatrix::zeros(6, 3 * n);
        for j in 0..k.min(n) {
            let cp = dt * dt * (k as f64 - j as f64 - 0.5);
            for i in 0..3 {
                psi[(i, 3 * j + i)] = cp;
                psi[(3 + i, 3 * j + i)] = dt;
            }
        }
        (phi, psi)
    }
}

/// Dense QP `min ½UᵀHU + fᵀU, A U ≤ b`.
#[derive(Clone, Debug, PartialEq)]
pub struct QpData {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cone_rows: usize,
    pub tube_rows: usize,
}

pub fn assemble_qp(pp: &PreviewProblem) -> QpData {
    let n = pp.n;
    let dim = 3 * n;
    let (phi_n, psi_n) = pp.transition(n);
    let err0 = &phi_n * pp.x0.as_vector() - pp.x_target.as_vector();
    let h = (psi_n.tr_mul(&psi_n) + DMatrix::identity(dim, dim) * pp.eps) * 2.0;
    let f = psi_n.tr_mul(&err0) * 2.0;

    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut cone_rows = 0;
    for k in 0..n {
        if let Some(seg) = pp.segment_for(k) {
            for c in &seg.cone {
                let mut r = DVector::zeros(dim);
                for i in 0..3 {
                    r[3 * k + i] = c[i];
                }
                rows.push((r, c.dot(&pp.g) - pp.cone_margin * c.norm()));
                cone_rows += 1;
            }
        }
    }
    let mut tube_rows = 0;
    for k in 1..=n {
        let Some(seg) = pp.segment_for(k) else { continue };
        let (phi, psi) = pp.transition(k);
        let free = &phi * pp.x0.as_vector();
        let psi_p = psi.rows(0, 3);
        for i in 0..seg.tube.len() {
            let a = seg.tube.a.row(i);
            let r = (a * psi_p).transpose();
            let offset: f64 = (0..3).map(|j| a[j] * free[j]).sum();
            rows.push((r, seg.tube.b[i] - offset));
            tube_rows += 1;
        }
    }
    let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].0[j]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    QpData {
        h,
        f,
        a,
        b,
        cone_rows,
        tube_rows,
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PreviewError {
    #[error("preview QP is infeasible")]
    Infeasible,
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Optimal accelerations over the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSequence {
    pub u: Vec<Vec3>,
    pub states: Vec<ComState>,
    pub dt: f64,
    pub kkt_residual: f64,
    /// Smallest `b - A U` over all rows (non-negative up to tolerance).
    pub min_slack: f64,
    pub iterations: usize,
}

impl ControlSequence {
    pub fn first(&self) -> Vec3 {
        self.u[0]
    }
}

pub fn solve_preview(pp: &PreviewProblem) -> Result<ControlSequence, PreviewError> {
    let qp = assemble_qp(pp);
    if qp.a.nrows() == 0 {
        return Ok(unconstrained(pp));
    }
    let sol = match qp_solve(&qp.h, &qp.f, &qp.a, &qp.b)? {
        QpOutcome::Optimal(s) => s,
        QpOutcome::Infeasible => return Err(PreviewError::Infeasible),
    };
    let u: Vec<Vec3> = (0..pp.n)
        .map(|k| Vec3::new(sol.x[3 * k], sol.x[3 * k + 1], sol.x[3 * k + 2]))
        .collect();
    let states = propagate(&pp.x0, &u, pp.dt);
    let min_slack = if qp.a.nrows() > 0 {
        (&qp.b - &qp.a * &sol.x).min()
    } else {
        f64::INFINITY
    };
    Ok(ControlSequence {
        u,
        states,
        dt: pp.dt,
        kkt_residual: sol.kkt_residual,
        min_slack,
        iterations: sol.iterations,
    })
}

/// Closed form without constraints: `U = Ψᵀ (ΨΨᵀ + εI)⁻¹ (x_T - Φ x0)`,
/// the minimum-norm exact solution when `ε = 0`.
fn unconstrained(pp: &PreviewProblem) -> ControlSequence {
    let (phi, psi) = pp.transition(pp.n);
    let r = pp.x_target.as_vector() - phi * pp.x0.as_vector();
    let gram = &psi * psi.transpose() + DMatrix::identity(6, 6) * pp.eps;
    let y = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&r))
        .unwrap_or_else(|| gram.svd(true, true).solve(&r, 1e-14).expect("svd solve"));
    let x = psi.transpose() * y;
    let u: Vec<Vec3> = (0..pp.n)
        .map(|k| Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]))
        .collect();
    let states = propagate(&pp.x0, &u, pp.dt);
    ControlSequence {
        u,
        states,
        dt: pp.dt,
        kkt_residual: 0.0,
        min_slack: f64::INFINITY,
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{compute_cwc, ContactSet};
    use crate::tube::{build_tube, tube_cone};
    use crate::GRAVITY;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut impl Rng) -> Vec3 {
        Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn propagate_examples() {
        let x0 = ComState::at_rest(Vec3::new(0.1, 0.2, 0.8));
        for x in propagate(&x0, &[Vec3::zeros(); 5], 0.1) {
            assert_eq!(x, x0);
        }
        let fall = propagate(&x0, &[gravity()], 0.1);
        assert!((fall[0].p.z - (0.8 - GRAVITY * 0.01 / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn stacked_form_matches_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x0 = ComState::new(rand_vec(&mut rng), rand_vec(&mut rng));
            let n = 10;
            let pp = PreviewProblem::new(x0, x0, n, rng.gen_range(0.3..2.0), 1e-3);
            let u: Vec<Vec3> = (0..n).map(|_| rand_vec(&mut rng) * 5.0).collect();
            let uvec = DVector::from_iterator(3 * n, u.iter().flat_map(|v| [v.x, v.y, v.z]));
            let rec = propagate(&x0, &u, pp.dt);
            for k in 1..=n {
                let (phi, psi) = pp.transition(k);
                let x = phi * x0.as_vector() + psi * &uvec;
                let expect = rec[k - 1].as_vector();
                assert!((x - expect).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn hessian_is_symmetric_and_regularised() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let x0 = ComState::new(rand_vec(&mut rng), rand_vec(&mut rng));
            let xt = ComState::new(rand_vec(&mut rng), rand_vec(&mut rng));
            let eps = rng.gen_range(1e-4..1e-1);
            let qp = assemble_qp(&PreviewProblem::new(x0, xt, 10, 1.0, eps));
            assert!((&qp.h - qp.h.transpose()).amax() < 1e-15);
            let lmin = qp.h.clone().symmetric_eigen().eigenvalues.min();
            assert!(lmin >= 2.0 * eps * (1.0 - 1e-9));
        }
    }

    #[test]
    fn unconstrained_exact_tracking() {
        let x0 = ComState::at_rest(Vec3::new(0.0, 0.0, 0.8));
        let xt = ComState::new(Vec3::new(0.3, -0.1, 0.85), Vec3::new(0.4, 0.0, 0.0));
        let pp = PreviewProblem::new(x0, xt, 10, 1.0, 0.0);
        let sol = solve_preview(&pp).unwrap();
        let last = sol.states.last().unwrap();
        assert!((last.p - xt.p).norm() < 1e-8);
        assert!((last.v - xt.v).norm() < 1e-8);
    }

    fn foot() -> ContactSet {
        ContactSet::rectangle(Vec3::zeros(), &Matrix3::identity(), 0.24, 0.14, 0.7).unwrap()
    }

    fn segment(p0: Vec3, pt: Vec3, n: usize) -> PreviewSegment {
        let w = compute_cwc(&foot(), Vec3::zeros());
        let tube = build_tube(p0, pt, 0.05);
        let cone = tube_cone(&w, &tube).unwrap();
        PreviewSegment {
            k_range: 0..n + 1,
            cone: cone.reduced,
            tube: tube.hrep,
        }
    }

    #[test]
    fn standing_still_is_optimal_at_rest() {
        let p = Vec3::new(0.0, 0.0, 0.8);
        let x = ComState::at_rest(p);
        let pp = PreviewProblem::new(x, x, 10, 1.0, 1e-3).with_segment(segment(p, p, 10));
        let sol = solve_preview(&pp).unwrap();
        assert!(sol.u.iter().all(|u| u.norm() < 1e-12));
        assert!(sol.kkt_residual < 1e-7);
    }

    #[test]
    fn constraints_hold_on_a_short_move() {
        let p0 = Vec3::new(0.0, 0.0, 0.8);
        let pt = Vec3::new(0.05, 0.02, 0.8);
        let pp = PreviewProblem::new(ComState::at_rest(p0), ComState::at_rest(pt), 10, 1.0, 1e-3)
            .with_segment(segment(p0, pt, 10));
        let sol = solve_preview(&pp).unwrap();
        assert!(sol.kkt_residual < 1e-7);
        assert!(sol.min_slack >= -1e-7);
        let seg = &pp.segments[0];
        for (k, u) in sol.u.iter().enumerate() {
            for c in &seg.cone {
                assert!(c.dot(&(u - gravity())) <= 1e-7, "step {k}");
            }
        }
        for x in &sol.states {
            assert!(seg.tube.contains(x.p.as_slice(), 1e-7));
        }
    }

    #[test]
    fn target_outside_tube_binds() {
        let p0 = Vec3::new(0.0, 0.0, 0.8);
        let pt = Vec3::new(0.05, 0.0, 0.8);
        // Target beyond the tube end: the end cap constraint must bind.
        let pp = PreviewProblem::new(ComState::at_rest(p0), ComState::at_rest(Vec3::new(0.3, 0.0, 0.8)), 10, 1.0, 1e-3)
            .with_segment(segment(p0, pt, 10));
        match solve_preview(&pp) {
            Ok(sol) => {
                assert!(sol.min_slack.abs() < 1e-7);
                assert!(sol.states.last().unwrap().p.x <= pt.x + 0.05 + 1e-7);
            }
            Err(PreviewError::Infeasible) => {}
            Err(e) => panic!("{e}"),
        }
    }
}
