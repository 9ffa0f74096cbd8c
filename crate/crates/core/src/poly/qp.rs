//! Dual active-set QP solver (Goldfarb–Idnani) for small dense problems.
//!
//! Solves `min ½ xᵀHx + fᵀx  s.t.  A x ≤ b`. The method starts from the
//! unconstrained minimiser and adds violated constraints one at a time while
//! keeping dual feasibility, so the first point that satisfies every row is
//! optimal. Infeasibility is detected when a violated row cannot be
//! reached by any primal or dual step.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite QP data")]
    NonFinite,
    #[error("Hessian is not positive semidefinite")]
    NotConvex,
    #[error("active-set iteration limit reached after {0} steps")]
    IterationLimit(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub value: f64,
    /// One non-negative multiplier per inequality row.
    pub multipliers: DVector<f64>,
    pub active: Vec<usize>,
    /// Largest of the stationarity, feasibility, complementarity and dual
    /// sign violations.
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum QpOutcome {
    Optimal(QpSolution),
    Infeasible,
}

impl QpOutcome {
    pub fn solution(&self) -> Option<&QpSolution> {
        match self {
            QpOutcome::Optimal(s) => Some(s),
            QpOutcome::Infeasible => None,
        }
    }
}

const VIOLATION_TOL: f64 = 1e-11;

/// Relative size below which a new row counts as dependent on the active set.
const DEPENDENCE_TOL: f64 = 1e-10;

/// Factorisation of the active normals in the metric of `H`: with
/// `H = L Lᵀ` and `L⁻¹ N = Q R` (thin), primal and dual step directions for
/// a new normal `n` are `z = L⁻ᵀ (I - Q Qᵀ) L⁻¹ n` and `r = R⁻¹ Qᵀ L⁻¹ n`.
struct Projections {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl Projections {
    fn new(linv: &DMatrix<f64>, normals: &DMatrix<f64>, active: &[usize]) -> Self {
        let n = linv.nrows();
        if active.is_empty() {
            return Self {
                q: DMatrix::zeros(n, 0),
                r: DMatrix::zeros(0, 0),
            };
        }
        let nmat = DMatrix::from_fn(n, active.len(), |i, j| normals[(active[j], i)]);
        let qr = (linv * nmat).qr();
        Self { q: qr.q(), r: qr.r() }
    }

    /// `(z, r, dependent)` for the normal `np`.
    fn directions(&self, linv: &DMatrix<f64>, np: &DVector<f64>) -> (DVector<f64>, DVector<f64>, bool) {
        let w = linv * np;
        let d1 = self.q.tr_mul(&w);
        let w2 = &w - &self.q * &d1;
        let dependent = w2.norm() <= DEPENDENCE_TOL * w.norm().max(f64::MIN_POSITIVE);
        let z = if dependent {
            DVector::zeros(np.len())
        } else {
            linv.tr_mul(&w2)
        };
        let r = if d1.is_empty() {
            d1
        } else {
            self.r
                .solve_upper_triangular(&d1)
                .unwrap_or_else(|| DVector::zeros(d1.len()))
        };
        (z, r, dependent)
    }
}

/// Solve `min ½ xᵀHx + fᵀx  s.t.  A x ≤ b`.
///
/// `H` must be symmetric positive semidefinite; a singular `H` is
/// regularised by a tiny multiple of the identity.
pub fn qp_solve(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<QpOutcome, QpError> {
    let n = h.nrows();
    let m = a.nrows();
    if h.ncols() != n || f.len() != n || (m > 0 && a.ncols() != n) || b.len() != m {
        return Err(QpError::Dimension(format!(
            "H {}x{}, f {}, A {}x{}, b {}",
            h.nrows(),
            h.ncols(),
            f.len(),
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if h.iter().chain(f.iter()).chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(QpError::NonFinite);
    }

    let hs = (h + h.transpose()) * 0.5;
    let chol = match hs.clone().cholesky() {
        Some(c) => c,
        None => {
            let scale = hs.diagonal().amax().max(1.0);
            let reg = &hs + DMatrix::identity(n, n) * (1e-12 * scale);
            match reg.cholesky() {
                Some(c) => c,
                None => return Err(QpError::NotConvex),
            }
        }
    };
    let linv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotConvex)?;

    // Rows in "≥" form n_jᵀx ≥ -b_j with n_j = -a_j / ‖a_j‖.
    let mut norms = vec![1.0; m];
    let mut normals = DMatrix::zeros(m, n);
    let mut rhs = vec![0.0; m];
    for j in 0..m {
        let nr = a.row(j).norm();
        if nr == 0.0 {
            if b[j] < -VIOLATION_TOL {
                return Ok(QpOutcome::Infeasible);
            }
            norms[j] = 0.0;
            continue;
        }
        norms[j] = nr;
        for k in 0..n {
            normals[(j, k)] = -a[(j, k)] / nr;
        }
        rhs[j] = b[j] / nr;
    }
    // slack s_j(x) = rhs_j + n_jᵀx = (b_j - a_jᵀx) / ‖a_j‖
    let slack = |x: &DVector<f64>, j: usize| rhs[j] + normals.row(j).dot(&x.transpose());

    let mut x = -linv.tr_mul(&(&linv * f));
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut proj = Projections::new(&linv, &normals, &active);
    let max_iter = 50 * (n + m) + 100;
    let mut iterations = 0usize;

    loop {
        // Most violated row.
        let mut p = None;
        let mut worst = -VIOLATION_TOL;
        for j in 0..m {
            if norms[j] == 0.0 || active.contains(&j) {
                continue;
            }
            let s = slack(&x, j);
            if s < worst {
                worst = s;
                p = Some(j);
            }
        }
        let Some(p) = p else { break };
        let np = normals.row(p).transpose();
        let mut up = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit(iterations));
            }
            let (z, r, dependent) = proj.directions(&linv, &np);

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 1e-14 {
                    let t = u[k] / rk;
                    if t < t1 {
                        t1 = t;
                        drop = Some(k);
                    }
                }
            }
            let zn = z.dot(&np);
            let sp = slack(&x, p);
            let t2 = if dependent || zn <= 0.0 { f64::INFINITY } else { (-sp / zn).max(0.0) };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Ok(QpOutcome::Infeasible);
            }
            for (k, uk) in u.iter_mut().enumerate() {
                *uk -= t * r[k];
            }
            up += t;
            if t2.is_finite() {
                x += &z * t;
            }
            if t2 <= t1 {
                active.push(p);
                u.push(up);
                proj = Projections::new(&linv, &normals, &active);
                break;
            }
            let k = drop.expect("partial step has a row to drop");
            active.remove(k);
            u.remove(k);
            proj = Projections::new(&linv, &normals, &active);
        }
    }

    let mut multipliers = DVector::zeros(m);
    for (k, &j) in active.iter().enumerate() {
        multipliers[j] = u[k].max(0.0) / norms[j];
    }
    let value = 0.5 * x.dot(&(h * &x)) + f.dot(&x);
    let kkt_residual = kkt_residual(h, f, a, b, &x, &multipliers);
    Ok(QpOutcome::Optimal(QpSolution {
        x,
        value,
        multipliers,
        active,
        kkt_residual,
        iterations,
    }))
}

/// Largest KKT violation of `(x, λ)` for `min ½ xᵀHx + fᵀx, A x ≤ b`.
pub fn kkt_residual(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> f64 {
    let mut grad = h * x + f;
    if a.nrows() > 0 {
        grad += a.tr_mul(lambda);
    }
    let mut res = grad.amax();
    for i in 0..a.nrows() {
        let s = b[i] - a.row(i).dot(&x.transpose());
        res = res.max(-s).max((lambda[i] * s).abs()).max(-lambda[i]);
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_lower_bound() {
        // min x² s.t. x ≥ 1
        let h = DMatrix::from_element(1, 1, 2.0);
        let f = DVector::zeros(1);
        let a = DMatrix::from_element(1, 1, -1.0);
        let b = DVector::from_element(1, -1.0);
        let sol = qp_solve(&h, &f, &a, &b).unwrap();
        let sol = sol.solution().unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.multipliers[0] - 2.0).abs() < 1e-12);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn unconstrained_tracks_target() {
        let target = DVector::from_column_slice(&[1.0, -2.0, 3.5]);
        let h = DMatrix::identity(3, 3) * 2.0;
        let f = &target * -2.0;
        let out = qp_solve(&h, &f, &DMatrix::zeros(0, 3), &DVector::zeros(0)).unwrap();
        assert!((&out.solution().unwrap().x - target).amax() < 1e-12);
    }

    #[test]
    fn empty_feasible_set() {
        let h = DMatrix::identity(1, 1);
        let a = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_column_slice(&[-1.0, -1.0]);
        assert_eq!(qp_solve(&h, &DVector::zeros(1), &a, &b).unwrap(), QpOutcome::Infeasible);
    }

    fn random_spd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        m.transpose() * m + DMatrix::identity(n, n) * 0.1
    }

    // Oracle: projected gradient on a box, where projection is clipping.
    fn projected_gradient(h: &DMatrix<f64>, f: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
        let lmax = h.clone().symmetric_eigen().eigenvalues.max();
        let step = 1.0 / lmax;
        let mut x = DVector::zeros(f.len());
        for _ in 0..200_000 {
            let g = h * &x + f;
            let next = (&x - g * step).zip_zip_map(lo, hi, |v, l, u| v.clamp(l, u));
            let moved = (&next - &x).amax();
            x = next;
            if moved < 1e-15 {
                break;
            }
        }
        x
    }

    #[test]
    fn random_box_qps_match_projected_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let n = 10;
            let h = random_spd(&mut rng, n);
            let f = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
            let lo = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..-0.1));
            let hi = DVector::from_fn(n, |_, _| rng.gen_range(0.1..1.0));
            let mut a = DMatrix::zeros(2 * n, n);
            let mut b = DVector::zeros(2 * n);
            for i in 0..n {
                a[(i, i)] = 1.0;
                b[i] = hi[i];
                a[(n + i, i)] = -1.0;
                b[n + i] = -lo[i];
            }
            let out = qp_solve(&h, &f, &a, &b).unwrap();
            let sol = out.solution().unwrap();
            let oracle = projected_gradient(&h, &f, &lo, &hi);
            let oracle_value = 0.5 * oracle.dot(&(&h * &oracle)) + f.dot(&oracle);
            assert!((sol.value - oracle_value).abs() < 1e-6, "{} vs {}", sol.value, oracle_value);
            assert!(sol.kkt_residual < 1e-7);
        }
    }

    #[test]
    fn random_general_qps_satisfy_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..50 {
            let n = rng.gen_range(2..12);
            let m = rng.gen_range(1..40);
            let h = random_spd(&mut rng, n);
            let f = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
            let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            // Feasible by construction: x0 strictly satisfies every row.
            let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
            let b = &a * &x0 + DVector::from_fn(m, |_, _| rng.gen_range(0.01..0.5));
            let out = qp_solve(&h, &f, &a, &b).unwrap();
            let sol = out.solution().expect("feasible");
            assert!(sol.kkt_residual < 1e-7, "kkt {}", sol.kkt_residual);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = random_spd(&mut rng, 6);
        let f = DVector::from_fn(6, |_, _| rng.gen_range(-3.0..3.0));
        let a = DMatrix::from_fn(9, 6, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(9, |_, _| rng.gen_range(0.0..0.3));
        let first = qp_solve(&h, &f, &a, &b).unwrap();
        for _ in 0..3 {
            assert_eq!(qp_solve(&h, &f, &a, &b).unwrap(), first);
        }
    }

    #[test]
    fn dependent_rows_agree_with_lp_feasibility() {
        use crate::poly::lp::{lp_solve, LpOutcome};
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut feasible, mut infeasible) = (0, 0);
        for _ in 0..300 {
            let n = rng.gen_range(2..7);
            let base = rng.gen_range(2..8);
            let mut rows: Vec<(Vec<f64>, f64)> = (0..base)
                .map(|_| ((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(-1.0..1.0)))
                .collect();
            // scaled copies and combinations of existing rows
            for _ in 0..rng.gen_range(1..6) {
                let i = rng.gen_range(0..rows.len());
                let j = rng.gen_range(0..rows.len());
                let (a, b) = (rng.gen_range(0.01..3.0), rng.gen_range(0.0..2.0));
                let row: Vec<f64> = rows[i].0.iter().zip(&rows[j].0).map(|(x, y)| a * x + b * y).collect();
                let rhs = a * rows[i].1 + b * rows[j].1 + rng.gen_range(-0.2..0.2);
                rows.push((row, rhs));
            }
            let m = rows.len();
            let am = DMatrix::from_fn(m, n, |i, j| rows[i].0[j]);
            let bm = DVector::from_iterator(m, rows.iter().map(|r| r.1));
            let h = random_spd(&mut rng, n) * 1e-3;
            let f = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let lp = lp_solve(&vec![0.0; n], &am, bm.as_slice(), &DMatrix::zeros(0, n), &[]).unwrap();
            let qp = qp_solve(&h, &f, &am, &bm).unwrap();
            match (lp, qp) {
                (LpOutcome::Infeasible, QpOutcome::Infeasible) => infeasible += 1,
                (LpOutcome::Optimal(_), QpOutcome::Optimal(s)) => {
                    assert!(s.kkt_residual < 1e-7, "kkt {}", s.kkt_residual);
                    feasible += 1;
                }
                (l, q) => panic!("verdicts differ: {l:?} vs {:?}", q.solution().map(|s| s.kkt_residual)),
            }
        }
        assert!(feasible > 30 && infeasible > 30, "{feasible} / {infeasible}");
    }
}
