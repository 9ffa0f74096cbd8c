//! Double description: halfspace ↔ generator conversion for polyhedral cones.
//!
//! The conversion H→V uses Motzkin's incremental method on the pointed part
//! of the cone, after factoring out its lineality space. V→H goes through
//! polarity: the facets of `cone(R)` are the extreme rays of `{a : R a ≤ 0}`.

use nalgebra::{DMatrix, DVector};

use super::lp::{solve_standard, LpOutcome};
use crate::Vec2;

const ZERO_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;

/// `{x : A x ≤ b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HPolytope {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
}

impl HPolytope {
    pub fn new(a: DMatrix<f64>, b: Vec<f64>) -> Self {
        assert_eq!(a.nrows(), b.len(), "row count of A and b differ");
        Self { a, b }
    }

    pub fn from_rows2(rows: &[Vec2], rhs: &[f64]) -> Self {
        let a = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
        Self::new(a, rhs.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `b - A x`, non-negative inside.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.b[i] - (0..self.dim()).map(|j| self.a[(i, j)] * x[j]).sum::<f64>())
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.slacks(x).iter().all(|&s| s >= -tol)
    }

    /// Rescale so that every row of `A` has unit norm. Zero rows are kept.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            let n = self.a.row(i).norm();
            if n > 0.0 {
                out.a.row_mut(i).scale_mut(1.0 / n);
                out.b[i] /= n;
            }
        }
        out
    }
}

/// Convex hull of `vertices` plus the conic hull of `rays`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VPolytope {
    pub vertices: Vec<DVector<f64>>,
    pub rays: Vec<DVector<f64>>,
}

/// A homogeneous polyhedral cone in one of its two representations.
#[derive(Clone, Debug, PartialEq)]
pub enum PolyCone {
    /// `{x : A x ≤ 0}`.
    Halfspaces(DMatrix<f64>),
    /// Non-negative combinations of the rays.
    Rays { dim: usize, rays: Vec<DVector<f64>> },
}

impl PolyCone {
    pub fn from_halfspaces(a: DMatrix<f64>) -> Self {
        PolyCone::Halfspaces(a)
    }

    pub fn from_rays(dim: usize, rays: Vec<DVector<f64>>) -> Self {
        PolyCone::Rays { dim, rays }
    }

    pub fn dim(&self) -> usize {
        match self {
            PolyCone::Halfspaces(a) => a.ncols(),
            PolyCone::Rays { dim, .. } => *dim,
        }
    }

    /// Generators, empty for an H-representation.
    pub fn rays(&self) -> &[DVector<f64>] {
        match self {
            PolyCone::Rays { rays, .. } => rays,
            PolyCone::Halfspaces(_) => &[],
        }
    }

    pub fn halfspaces(&self) -> Option<&DMatrix<f64>> {
        match self {
            PolyCone::Halfspaces(a) => Some(a),
            PolyCone::Rays { .. } => None,
        }
    }

    /// Number of rows or rays.
    pub fn len(&self) -> usize {
        match self {
            PolyCone::Halfspaces(a) => a.nrows(),
            PolyCone::Rays { rays, .. } => rays.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Membership of `x`: a max-row test for H, a non-negative least-norm
    /// combination LP for V.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            PolyCone::Halfspaces(a) => (0..a.nrows()).all(|i| a.row(i).dot(&x.transpose()) <= tol),
            PolyCone::Rays { dim, rays } => {
                if rays.is_empty() {
                    return x.amax() <= tol;
                }
                // x = R λ + s⁺ - s⁻, minimise Σ s; zero optimum means member.
                let k = rays.len();
                let n = k + 2 * dim;
                let mut a = DMatrix::zeros(*dim, n);
                for (j, r) in rays.iter().enumerate() {
                    a.set_column(j, r);
                }
                for i in 0..*dim {
                    a[(i, k + i)] = 1.0;
                    a[(i, k + dim + i)] = -1.0;
                }
                let mut c = vec![0.0; n];
                for v in c.iter_mut().skip(k) {
                    *v = 1.0;
                }
                match solve_standard(&a, x.as_slice(), &c, 1e-12) {
                    Ok(LpOutcome::Optimal(sol)) => sol.value <= tol * (1.0 + x.norm()),
                    _ => false,
                }
            }
        }
    }
}

/// Numerical health of a conversion input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conditioning {
    /// Numerical rank of the input matrix.
    pub rank: usize,
    /// Dimension of the lineality space handled separately.
    pub lineality: usize,
    /// Smallest retained singular value over the largest.
    pub inverse_condition: f64,
    /// Set when a singular value sits close to the rank threshold.
    pub warning: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdOutput {
    pub cone: PolyCone,
    pub conditioning: Conditioning,
}

/// Convert a cone to its other representation.
///
/// H-input yields extreme rays, with the lineality space as `±` pairs.
/// V-input yields facet rows with unit norm, with implicit equalities as
/// `±` pairs. Outputs are deduplicated.
pub fn double_description(input: &PolyCone) -> DdOutput {
    match input {
        PolyCone::Halfspaces(a) => {
            let (rays, conditioning) = extreme_rays(a);
            DdOutput {
                cone: PolyCone::Rays { dim: a.ncols(), rays },
                conditioning,
            }
        }
        PolyCone::Rays { dim, rays } => {
            let r = DMatrix::from_fn(rays.len(), *dim, |i, j| rays[i][j]);
            let (facets, conditioning) = extreme_rays(&r);
            let a = DMatrix::from_fn(facets.len(), *dim, |i, j| facets[i][j]);
            DdOutput {
                cone: PolyCone::Halfspaces(a),
                conditioning,
            }
        }
    }
}

/// H-representation of the convex hull of points, via the homogenised cone
/// `{(v, 1)}`. Rows are normalised to unit `‖a‖`.
pub fn hpolytope_from_points(points: &[DVector<f64>]) -> HPolytope {
    let d = points.first().map_or(0, |p| p.len());
    let rays: Vec<DVector<f64>> = points
        .iter()
        .map(|p| {
            let mut v = DVector::zeros(d + 1);
            v.rows_mut(0, d).copy_from(p);
            v[d] = 1.0;
            v
        })
        .collect();
    let out = double_description(&PolyCone::from_rays(d + 1, rays));
    let h = out.cone.halfspaces().expect("V input gives H output");
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..h.nrows() {
        let a = h.row(i).columns(0, d).transpose();
        let n = a.norm();
        if n <= ZERO_TOL {
            continue;
        }
        rows.push(a / n);
        rhs.push(-h[(i, d)] / n);
    }
    let a = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    HPolytope::new(a, rhs)
}

/// Drop rays that are non-negative combinations of the others (one LP per
/// ray). Also usable on facet rows of an H-representation.
pub fn prune_redundant_rays(rays: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut kept: Vec<DVector<f64>> = dedup(rays.to_vec());
    let mut i = 0;
    while i < kept.len() {
        let others: Vec<DVector<f64>> = kept
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, r)| r.clone())
            .collect();
        let dim = kept[i].len();
        if !others.is_empty() && PolyCone::from_rays(dim, others).contains(&kept[i], 1e-9) {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept
}

fn normalize(v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

fn dedup(rays: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(rays.len());
    for r in rays.into_iter().map(normalize) {
        if r.norm() == 0.0 {
            continue;
        }
        if !out.iter().any(|o| (o - &r).amax() < 1e-9) {
            out.push(r);
        }
    }
    out
}

/// Extreme rays of `{x : A x ≤ 0}`, lineality included as `±` pairs.
fn extreme_rays(a: &DMatrix<f64>) -> (Vec<DVector<f64>>, Conditioning) {
    let (h, d) = a.shape();
    if h == 0 || a.amax() == 0.0 {
        let mut rays = Vec::with_capacity(2 * d);
        for i in 0..d {
            rays.push(DVector::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 }));
            rays.push(DVector::from_fn(d, |k, _| if k == i { -1.0 } else { 0.0 }));
        }
        let cond = Conditioning {
            rank: 0,
            lineality: d,
            inverse_condition: 1.0,
            warning: false,
        };
        return (rays, cond);
    }

    // Normalise rows so tolerances are relative.
    let mut an = a.clone();
    for i in 0..h {
        let n = an.row(i).norm();
        if n > 0.0 {
            an.row_mut(i).scale_mut(1.0 / n);
        }
    }

    // Row space / null space split.
    let svd = an.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let rank = order.iter().filter(|&&i| sv[i] > RANK_TOL * smax.max(1.0)).count();
    let smin_kept = order.get(rank.saturating_sub(1)).map_or(smax, |&i| sv[i]);
    let next = order.get(rank).map_or(0.0, |&i| sv[i]);
    let warning = smin_kept < 1e-7 * smax || (next > 0.0 && next > 1e-13 * smax);
    let row_basis: Vec<DVector<f64>> = order[..rank].iter().map(|&i| v_t.row(i).transpose()).collect();
    let mut null_basis: Vec<DVector<f64>> = Vec::new();
    {
        // Complete the row basis to R^d (Gram–Schmidt on unit vectors).
        let mut basis = row_basis.clone();
        for k in 0..d {
            let mut e = DVector::from_fn(d, |i, _| if i == k { 1.0 } else { 0.0 });
            for b in &basis {
                let c = b.dot(&e);
                e -= b * c;
            }
            for b in &basis {
                let c = b.dot(&e);
                e -= b * c;
            }
            if e.norm() > 1e-6 {
                let e = e.normalize();
                basis.push(e.clone());
                null_basis.push(e);
            }
            if basis.len() == d {
                break;
            }
        }
    }
    let conditioning = Conditioning {
        rank,
        lineality: null_basis.len(),
        inverse_condition: smin_kept / smax,
        warning,
    };

    let q = DMatrix::from_fn(d, rank, |i, j| row_basis[j][i]);
    let b = &an * &q;
    let pointed = motzkin(&b);

    let mut rays: Vec<DVector<f64>> = pointed.iter().map(|y| &q * y).collect();
    for l in null_basis {
        rays.push(-&l);
        rays.push(l);
    }
    (dedup(rays), conditioning)
}

struct Ray {
    v: DVector<f64>,
    zero: Vec<u64>,
}

fn bit_set(z: &mut [u64], i: usize) {
    z[i / 64] |= 1 << (i % 64);
}

fn bit_count_and(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum()
}

/// Rank of a small row set by Gaussian elimination with partial pivoting.
fn rank_of(rows: &mut [Vec<f64>], tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut rank = 0;
    for c in 0..cols {
        let mut piv = rank;
        let mut best = 0.0;
        for (r, row) in rows.iter().enumerate().skip(rank) {
            if row[c].abs() > best {
                best = row[c].abs();
                piv = r;
            }
        }
        if best <= tol {
            continue;
        }
        rows.swap(rank, piv);
        for r in rank + 1..rows.len() {
            let f = rows[r][c] / rows[rank][c];
            if f != 0.0 {
                for k in c..cols {
                    let v = rows[rank][k];
                    rows[r][k] -= f * v;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Extreme rays of the pointed cone `{y : B y ≤ 0}` with `B` of full column
/// rank and unit rows.
fn motzkin(b: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let (h, r) = b.shape();
    if r == 0 {
        return Vec::new();
    }
    let words = h.div_ceil(64);

    // Greedy independent initial rows.
    let mut init: Vec<usize> = Vec::with_capacity(r);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(r);
    for i in 0..h {
        let mut v = b.row(i).transpose();
        for o in &ortho {
            let c = o.dot(&v);
            v -= o * c;
        }
        if v.norm() > 1e-7 {
            ortho.push(v.normalize());
            init.push(i);
            if init.len() == r {
                break;
            }
        }
    }
    let b0 = DMatrix::from_fn(r, r, |i, j| b[(init[i], j)]);
    let inv = b0.try_inverse().expect("independent rows");
    let mut inserted = vec![false; h];
    for &i in &init {
        inserted[i] = true;
    }
    let mut rays: Vec<Ray> = (0..r)
        .map(|j| {
            let v = normalize(-inv.column(j).into_owned());
            let mut zero = vec![0u64; words];
            for (k, &row) in init.iter().enumerate() {
                if k != j {
                    bit_set(&mut zero, row);
                }
            }
            Ray { v, zero }
        })
        .collect();

    let mut scratch: Vec<Vec<f64>> = Vec::new();
    for i in 0..h {
        if inserted[i] {
            continue;
        }
        let row = b.row(i);
        let s: Vec<f64> = rays.iter().map(|ray| row.dot(&ray.v.transpose())).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| s[k] > ZERO_TOL).collect();
        inserted[i] = true;
        if pos.is_empty() {
            for (k, ray) in rays.iter_mut().enumerate() {
                if s[k].abs() <= ZERO_TOL {
                    bit_set(&mut ray.zero, i);
                }
            }
            continue;
        }
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| s[k] < -ZERO_TOL).collect();

        let mut fresh: Vec<Ray> = Vec::new();
        for &p in &pos {
            for &n in &neg {
                if bit_count_and(&rays[p].zero, &rays[n].zero) + 2 < r {
                    continue;
                }
                scratch.clear();
                for (w, (zp, zn)) in rays[p].zero.iter().zip(&rays[n].zero).enumerate() {
                    let mut bits = zp & zn;
                    while bits != 0 {
                        let t = bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        let idx = w * 64 + t;
                        scratch.push(b.row(idx).iter().copied().collect());
                    }
                }
                if rank_of(&mut scratch, 1e-8) + 2 != r {
                    continue;
                }
                let v = normalize(&rays[n].v * s[p] - &rays[p].v * s[n]);
                let mut zero = vec![0u64; words];
                for (k, &done) in inserted.iter().enumerate() {
                    if done && b.row(k).dot(&v.transpose()).abs() <= ZERO_TOL {
                        bit_set(&mut zero, k);
                    }
                }
                bit_set(&mut zero, i);
                fresh.push(Ray { v, zero });
            }
        }

        let mut next: Vec<Ray> = Vec::with_capacity(rays.len() + fresh.len());
        for (k, mut ray) in rays.into_iter().enumerate() {
            if s[k] > ZERO_TOL {
                continue;
            }
            if s[k] >= -ZERO_TOL {
                bit_set(&mut ray.zero, i);
            }
            next.push(ray);
        }
        next.extend(fresh);
        rays = next;
    }
    rays.into_iter().map(|r| r.v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn rand_dir(rng: &mut impl Rng, d: usize) -> DVector<f64> {
        DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn membership_agreement(h: &PolyCone, rays: &PolyCone, rng: &mut impl Rng, samples: usize) {
        let d = h.dim();
        for _ in 0..samples {
            let x = rand_dir(rng, d);
            let a = h.halfspaces().unwrap();
            let worst = (0..a.nrows()).map(|i| a.row(i).dot(&x.transpose())).fold(f64::MIN, f64::max);
            if worst.abs() <= 1e-8 {
                continue;
            }
            assert_eq!(worst < 0.0, rays.contains(&x, 1e-10), "sample {x:?}, worst {worst}");
        }
    }

    #[test]
    fn octant_rays_give_negative_orthant_rows() {
        let rays = vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])];
        let out = double_description(&PolyCone::from_rays(3, rays));
        let a = out.cone.halfspaces().unwrap().clone();
        assert_eq!(a.nrows(), 3);
        for i in 0..3 {
            let row = a.row(i);
            assert_eq!(row.iter().filter(|x| x.abs() > 1e-12).count(), 1);
            assert!(row.sum() < 0.0);
        }
        assert!(!out.conditioning.warning);
    }

    #[test]
    fn friction_pyramid_facets() {
        let mu = 0.7 / 2f64.sqrt();
        let rays: Vec<DVector<f64>> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|(a, b)| v(&[a * mu, b * mu, 1.0]))
            .collect();
        let vcone = PolyCone::from_rays(3, rays);
        let out = double_description(&vcone);
        assert_eq!(out.cone.len(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        membership_agreement(&out.cone, &vcone, &mut rng, 10_000);
    }

    #[test]
    fn lineality_is_reported_as_pairs() {
        // Halfspace z >= 0 in 3D: lineality x, y.
        let a = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, -1.0]);
        let out = double_description(&PolyCone::from_halfspaces(a));
        assert_eq!(out.conditioning.lineality, 2);
        assert_eq!(out.cone.len(), 5);
        assert!(out.cone.contains(&v(&[3.0, -2.0, 0.5]), 1e-9));
        assert!(!out.cone.contains(&v(&[0.0, 0.0, -0.5]), 1e-9));
    }

    #[test]
    fn random_cone_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let k = rng.gen_range(3..=8);
            // Random rays in the upper half space so the cone is pointed.
            let rays: Vec<DVector<f64>> = (0..k)
                .map(|_| {
                    let mut r = rand_dir(&mut rng, 3);
                    r[2] = rng.gen_range(0.3..1.0);
                    r
                })
                .collect();
            let vcone = PolyCone::from_rays(3, rays.clone());
            let hcone = double_description(&vcone).cone;
            let back = double_description(&hcone).cone;
            // Mutual containment via LP.
            for r in &rays {
                assert!(back.contains(r, 1e-9));
            }
            for r in back.rays() {
                assert!(vcone.contains(r, 1e-9));
            }
            membership_agreement(&hcone, &vcone, &mut rng, 500);
        }
    }

    #[test]
    fn six_dimensional_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rays: Vec<DVector<f64>> = (0..16)
            .map(|_| {
                let mut r = rand_dir(&mut rng, 6);
                r[5] = rng.gen_range(0.5..1.0);
                r
            })
            .collect();
        let vcone = PolyCone::from_rays(6, rays);
        let hcone = double_description(&vcone).cone;
        let back = double_description(&hcone).cone;
        membership_agreement(&hcone, &vcone, &mut rng, 2000);
        let pruned = prune_redundant_rays(back.rays());
        assert_eq!(pruned.len(), back.len());
    }

    #[test]
    fn prune_drops_interior_rays() {
        let rays = vec![
            v(&[1.0, 0.0]),
            v(&[0.0, 1.0]),
            v(&[1.0, 1.0]),
            v(&[2.0, 0.0]),
        ];
        let kept = prune_redundant_rays(&rays);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn cube_from_points() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(v(&[
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            ]));
        }
        let p = hpolytope_from_points(&pts);
        assert_eq!(p.len(), 6);
        assert!(p.b.iter().all(|b| (b - 1.0).abs() < 1e-12));
        assert!(p.contains(&[0.5, -0.5, 0.9], 0.0));
        assert!(!p.contains(&[1.1, 0.0, 0.0], 1e-9));
    }
}
