//! Dense revised simplex for the small LPs of the kernel.
//!
//! Everything is solved through one standard-form engine,
//! `min cᵀx  s.t.  A x = b, x ≥ 0`, with an explicit basis inverse. Pricing is
//! Dantzig's rule, switching to Bland's rule after a run of degenerate pivots
//! so the method cannot cycle. Ties are broken by index, so identical inputs
//! always follow the same pivot sequence.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite LP data")]
    NonFinite,
    #[error("simplex iteration limit reached after {0} pivots")]
    IterationLimit(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Simplex multipliers of the constraint rows.
    pub duals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal(_))
    }

    pub fn solution(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 30;
const HARRIS_SLACK: f64 = 1e-12;

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex {
    a: DMatrix<f64>,
    b: DVector<f64>,
    m: usize,
    n: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl Simplex {
    fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let (m, n) = a.shape();
        let mut in_basis = vec![false; n + m];
        for flag in in_basis.iter_mut().skip(n) {
            *flag = true;
        }
        Self {
            xb: b.clone(),
            a,
            b,
            m,
            n,
            basis: (n..n + m).collect(),
            in_basis,
            binv: DMatrix::identity(m, m),
            iterations: 0,
            max_iterations: 50 * (m + n) + 1000,
        }
    }

    fn binv_col(&self, j: usize) -> DVector<f64> {
        if j < self.n {
            &self.binv * self.a.column(j)
        } else {
            self.binv.column(j - self.n).into_owned()
        }
    }

    fn col_dot(&self, pi: &DVector<f64>, j: usize) -> f64 {
        if j < self.n {
            pi.dot(&self.a.column(j))
        } else {
            pi[j - self.n]
        }
    }

    fn duals(&self, cost: &[f64]) -> DVector<f64> {
        let cb = DVector::from_iterator(self.m, self.basis.iter().map(|&j| cost[j]));
        self.binv.tr_mul(&cb)
    }

    fn refactor(&mut self) {
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (k, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                bmat.set_column(k, &self.a.column(j));
            } else {
                bmat[(j - self.n, k)] = 1.0;
            }
        }
        if let Some(inv) = bmat.try_inverse() {
            self.binv = inv;
            self.xb = &self.binv * &self.b;
        }
    }

    fn pivot(&mut self, r: usize, q: usize, w: &DVector<f64>, theta: f64) {
        for i in 0..self.m {
            self.xb[i] -= theta * w[i];
        }
        self.xb[r] = theta;
        let piv = w[r];
        for k in 0..self.m {
            self.binv[(r, k)] /= piv;
        }
        for i in 0..self.m {
            if i != r && w[i] != 0.0 {
                let f = w[i];
                for k in 0..self.m {
                    let v = self.binv[(r, k)];
                    self.binv[(i, k)] -= f * v;
                }
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
    }

    /// Rows allowed to leave, with their ratio. An artificial still basic in
    /// phase 2 sits on a redundant row and leaves at zero step.
    fn candidates<'a>(&'a self, w: &'a DVector<f64>, phase2: bool) -> impl Iterator<Item = (usize, f64)> + 'a {
        let tol = PIVOT_TOL * w.amax().max(1.0);
        (0..self.m).filter_map(move |i| {
            if phase2 && self.basis[i] >= self.n {
                (w[i].abs() > tol).then_some((i, 0.0))
            } else if w[i] > tol {
                Some((i, self.xb[i].max(0.0) / w[i]))
            } else {
                None
            }
        })
    }

    /// Smallest ratio, ties to the lowest variable index.
    fn ratio_bland(&self, w: &DVector<f64>, phase2: bool) -> Option<(usize, f64)> {
        self.candidates(w, phase2).fold(None, |best, (i, ratio)| match best {
            Some((li, lr)) if !(ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])) => {
                Some((li, lr))
            }
            _ => Some((i, ratio)),
        })
    }

    /// Harris ratio test: among rows whose ratio is within a small
    /// feasibility slack of the minimum, pivot on the largest element.
    fn ratio_harris(&self, w: &DVector<f64>, phase2: bool) -> Option<(usize, f64)> {
        let slack = HARRIS_SLACK * self.xb.amax().max(1.0);
        let bound = self
            .candidates(w, phase2)
            .map(|(i, ratio)| if ratio == 0.0 { 0.0 } else { (self.xb[i].max(0.0) + slack) / w[i] })
            .fold(f64::INFINITY, f64::min);
        self.candidates(w, phase2)
            .filter(|&(_, ratio)| ratio <= bound)
            .fold(None, |best: Option<(usize, f64)>, (i, ratio)| match best {
                Some((li, _)) if w[li].abs() >= w[i].abs() => best,
                _ => Some((i, ratio)),
            })
    }

    fn run(&mut self, cost: &[f64], phase2: bool, opt_tol: f64) -> Result<PhaseEnd, LpError> {
        let mut degenerate = 0usize;
        loop {
            if self.iterations > 0 && self.iterations % REFACTOR_EVERY == 0 {
                self.refactor();
            }
            let pi = self.duals(cost);
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -opt_tol;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let d = cost[j] - self.col_dot(&pi, j);
                if bland {
                    if d < -opt_tol {
                        enter = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    enter = Some(j);
                }
            }
            let Some(q) = enter else {
                return Ok(PhaseEnd::Optimal);
            };
            let w = self.binv_col(q);

            let leave = if bland {
                self.ratio_bland(&w, phase2)
            } else {
                self.ratio_harris(&w, phase2)
            };
            let Some((r, theta)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            if theta <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &w, theta);
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
        }
    }
}

/// Solve `min cᵀx  s.t.  A x = b, x ≥ 0`.
///
/// `tol` is the feasibility tolerance, scaled by `max(1, ‖b‖∞)`. The returned
/// duals `y` satisfy `c - Aᵀy ≥ -tol` at an optimum.
pub fn solve_standard(
    a: &DMatrix<f64>,
    b: &[f64],
    c: &[f64],
    tol: f64,
) -> Result<LpOutcome, LpError> {
    let (m, n) = a.shape();
    if b.len() != m || c.len() != n {
        return Err(LpError::Dimension(format!(
            "A is {m}x{n}, b has {}, c has {}",
            b.len(),
            c.len()
        )));
    }
    if a.iter().chain(b).chain(c).any(|v| !v.is_finite()) {
        return Err(LpError::NonFinite);
    }
    if m == 0 {
        if c.iter().any(|&cj| cj < 0.0) {
            return Ok(LpOutcome::Unbounded);
        }
        return Ok(LpOutcome::Optimal(LpSolution {
            x: vec![0.0; n],
            value: 0.0,
            duals: Vec::new(),
        }));
    }

    let mut a = a.clone();
    let mut bv = DVector::from_column_slice(b);
    let mut sign = vec![1.0; m];
    for i in 0..m {
        if bv[i] < 0.0 {
            sign[i] = -1.0;
            bv[i] = -bv[i];
            a.row_mut(i).neg_mut();
        }
    }
    let b_scale = bv.amax().max(1.0);
    let c_scale = c.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

    let mut s = Simplex::new(a, bv);

    // Phase 1: minimise the sum of artificials.
    let mut cost1 = vec![0.0; n + m];
    for v in cost1.iter_mut().skip(n) {
        *v = 1.0;
    }
    s.run(&cost1, false, 1e-12)?;
    let infeasibility: f64 = s
        .basis
        .iter()
        .zip(s.xb.iter())
        .filter(|(&j, _)| j >= n)
        .map(|(_, &v)| v.max(0.0))
        .sum();
    if infeasibility > tol * b_scale {
        return Ok(LpOutcome::Infeasible);
    }

    // Pivot zero-level artificials out where the row allows it.
    for r in 0..m {
        if s.basis[r] < n {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if s.in_basis[j] {
                continue;
            }
            let v: f64 = s.binv.row(r).transpose().dot(&s.a.column(j));
            if v.abs() > 1e-9 && best.is_none_or(|(_, bv)| v.abs() > bv) {
                best = Some((j, v.abs()));
            }
        }
        if let Some((j, _)) = best {
            let w = s.binv_col(j);
            let theta = s.xb[r] / w[r];
            s.pivot(r, j, &w, theta);
        }
    }

    let mut cost2 = c.to_vec();
    cost2.extend(std::iter::repeat_n(0.0, m));
    match s.run(&cost2, true, 1e-10 * c_scale)? {
        PhaseEnd::Unbounded => Ok(LpOutcome::Unbounded),
        PhaseEnd::Optimal => {
                    let mut x = vec![0.0; n];
            for (i, &j) in s.basis.iter().enumerate() {
                if j < n {
                    x[j] = s.xb[i].max(0.0);
                }
            }
            let value = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
            let pi = s.duals(&cost2);
            let duals = (0..m).map(|i| pi[i] * sign[i]).collect();
            Ok(LpOutcome::Optimal(LpSolution { x, value, duals }))
        }
    }
}

/// Solve `min cᵀx  s.t.  A_ub x ≤ b_ub, A_eq x = b_eq` over free variables.
///
/// Either constraint block may have zero rows. The duals are reported per
/// row, inequality rows first.
pub fn lp_solve(
    c: &[f64],
    a_ub: &DMatrix<f64>,
    b_ub: &[f64],
    a_eq: &DMatrix<f64>,
    b_eq: &[f64],
) -> Result<LpOutcome, LpError> {
    let d = c.len();
    let (mu, mu_cols) = a_ub.shape();
    let (me, me_cols) = a_eq.shape();
    if (mu > 0 && mu_cols != d) || (me > 0 && me_cols != d) || b_ub.len() != mu || b_eq.len() != me
    {
        return Err(LpError::Dimension(format!(
            "{d} variables, A_ub {mu}x{mu_cols}, A_eq {me}x{me_cols}"
        )));
    }
    // x = x⁺ - x⁻ with one slack per inequality row.
    let m = mu + me;
    let n = 2 * d + mu;
    let mut a = DMatrix::zeros(m, n);
    let mut b = vec![0.0; m];
    for i in 0..mu {
        for j in 0..d {
            a[(i, j)] = a_ub[(i, j)];
            a[(i, d + j)] = -a_ub[(i, j)];
        }
        a[(i, 2 * d + i)] = 1.0;
        b[i] = b_ub[i];
    }
    for i in 0..me {
        for j in 0..d {
            a[(mu + i, j)] = a_eq[(i, j)];
            a[(mu + i, d + j)] = -a_eq[(i, j)];
        }
        b[mu + i] = b_eq[i];
    }
    let mut cost = vec![0.0; n];
    for j in 0..d {
        cost[j] = c[j];
        cost[d + j] = -c[j];
    }
    Ok(match solve_standard(&a, &b, &cost, 1e-9)? {
        LpOutcome::Optimal(sol) => {
            let x: Vec<f64> = (0..d).map(|j| sol.x[j] - sol.x[d + j]).collect();
            let value = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
            LpOutcome::Optimal(LpSolution {
                x,
                value,
                duals: sol.duals,
            })
        }
        other => other,
    })
}

/// Outcome of [`minimize_via_dual`].
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum DualRoute {
    Optimal { z: Vec<f64>, value: f64 },
    /// The primal system `G z ≤ β` is empty.
    PrimalInfeasible,
    /// The dual is infeasible: the primal is unbounded or empty.
    DualInfeasible,
}

/// Solve `min qᵀz  s.t.  G z ≤ β` (z free) through its standard-form dual
/// `min βᵀy  s.t.  Gᵀy = -q, y ≥ 0`.
///
/// The dual has only `dim z` rows, which makes this route much cheaper than
/// the primal one when there are many more constraints than variables. The
/// primal optimum is read back from the dual's simplex multipliers.
pub(crate) fn minimize_via_dual(
    q: &[f64],
    g: &DMatrix<f64>,
    beta: &[f64],
    tol: f64,
) -> Result<DualRoute, LpError> {
    let gt = g.transpose();
    let neg_q: Vec<f64> = q.iter().map(|v| -v).collect();
    Ok(match solve_standard(&gt, &neg_q, beta, tol)? {
        LpOutcome::Optimal(sol) => {
            let value = sol.duals.iter().zip(q).map(|(z, qi)| z * qi).sum();
            DualRoute::Optimal {
                z: sol.duals,
                value,
            }
        }
        LpOutcome::Unbounded => DualRoute::PrimalInfeasible,
        LpOutcome::Infeasible => DualRoute::DualInfeasible,
    })
}
