//! Planar convex hull (Andrew's monotone chain).

use super::{cross, Region2};
use crate::Vec2;

/// Convex hull of a planar point set, counter-clockwise from the lowest-left
/// vertex.
///
/// Points closer than `eps · scale` are merged and turns whose sine is below
/// `eps` are dropped, so no three returned vertices are collinear. Collinear
/// or coincident inputs come back as `Segment` or `Point`.
pub fn convex_hull_2d(points: &[Vec2], eps: f64) -> Region2 {
    let mut pts: Vec<Vec2> = points.iter().copied().filter(|p| p.x.is_finite() && p.y.is_finite()).collect();
    if pts.is_empty() {
        return Region2::Empty;
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let scale = pts
        .iter()
        .fold(0.0f64, |acc, p| acc.max(p.x.abs()).max(p.y.abs()))
        .max(1e-300);
    let merge = eps * scale;
    pts.dedup_by(|b, a| (*a - *b).norm() <= merge);

    let first = pts[0];
    let last = pts[pts.len() - 1];
    if pts.len() == 1 || (last - first).norm() <= merge {
        return Region2::Point(first);
    }

    // The chain uses the plain turn sign, so near-ties in the sort order
    // cannot drop a true corner; flat turns are removed afterwards.
    let left_turn = |o: &Vec2, a: &Vec2, b: &Vec2| cross(o, a, b) > 0.0;

    let mut lower: Vec<Vec2> = Vec::with_capacity(pts.len());
    for p in &pts {
        while lower.len() >= 2 && !left_turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vec2> = Vec::with_capacity(pts.len());
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !left_turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    drop_flat_turns(&mut lower, eps, merge);
    if let Some(start) = (0..lower.len()).min_by(|&i, &j| {
        let (a, b) = (lower[i], lower[j]);
        a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
    }) {
        lower.rotate_left(start);
    }

    match lower.len() {
        0 | 1 => Region2::Point(first),
        2 => Region2::Segment(lower[0], lower[1]),
        _ => Region2::Polygon(lower),
    }
}

/// Removes vertices whose turn sine is below `eps`, and vertices closer than
/// `merge` to their successor, until none is left.
fn drop_flat_turns(v: &mut Vec<Vec2>, eps: f64, merge: f64) {
    let mut changed = true;
    while changed && v.len() >= 3 {
        changed = false;
        let n = v.len();
        for i in 0..n {
            let (o, a, b) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
            let flat = cross(&o, &a, &b) <= eps * (a - o).norm() * (b - a).norm();
            if flat || (b - a).norm() <= merge {
                v.remove(i);
                changed = true;
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-10;

    // O(n³) oracle for points in general position: p is a hull vertex when
    // some q has every other point strictly on the left of p→q.
    fn brute_force_hull_vertices(pts: &[Vec2]) -> Vec<Vec2> {
        pts.iter()
            .enumerate()
            .filter(|(i, p)| {
                pts.iter().enumerate().any(|(j, q)| {
                    j != *i
                        && pts
                            .iter()
                            .enumerate()
                            .all(|(k, r)| k == *i || k == j || cross(p, q, r) > 0.0)
                })
            })
            .map(|(_, p)| *p)
            .collect()
    }

    #[test]
    fn interior_point_dropped() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.25, 0.25),
        ];
        assert_eq!(
            convex_hull_2d(&pts, EPS),
            Region2::Polygon(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)])
        );
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(convex_hull_2d(&[Vec2::zeros()], EPS), Region2::Point(Vec2::zeros()));
        assert_eq!(
            convex_hull_2d(&[Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)], EPS),
            Region2::Point(Vec2::new(1.0, 1.0))
        );
        let line = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 2.0), Vec2::new(1.0, 1.0)];
        assert_eq!(
            convex_hull_2d(&line, EPS),
            Region2::Segment(Vec2::new(0.0, 0.0), Vec2::new(2.0, 2.0))
        );
    }

    #[test]
    fn collinear_boundary_points_removed() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert_eq!(convex_hull_2d(&pts, EPS).vertices().len(), 4);
    }

    #[test]
    fn corner_survives_noisy_ties() {
        // Support points of a rectangle as an LP returns them: edge midpoints
        // and corners whose x differ in the last bits.
        let pts = [
            Vec2::new(3.4e-17, -1.5e-17),
            Vec2::new(4.2e-17, -0.1),
            Vec2::new(0.19999999999999998, -0.1),
            Vec2::new(0.20000000000000004, -0.05),
            Vec2::new(0.2, 3.8e-18),
            Vec2::new(0.1, 0.0),
        ];
        let v = convex_hull_2d(&pts, EPS).vertices();
        assert_eq!(v.len(), 4);
        assert!(v.iter().any(|p| (p - Vec2::new(0.2, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn random_disk_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec2> = (0..1000)
            .map(|_| loop {
                let p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if p.norm() <= 1.0 {
                    break p;
                }
            })
            .collect();
        let hull = convex_hull_2d(&pts, EPS).vertices();
        let mut oracle = brute_force_hull_vertices(&pts);
        let mut ours = hull.clone();
        let key = |a: &Vec2, b: &Vec2| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y));
        oracle.sort_by(key);
        ours.sort_by(key);
        assert_eq!(ours, oracle);
        // CCW orientation
        let n = hull.len();
        for i in 0..n {
            assert!(cross(&hull[i], &hull[(i + 1) % n], &hull[(i + 2) % n]) > 0.0);
        }
    }

    #[test]
    fn hull_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec2> = (0..200)
            .map(|_| Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let once = convex_hull_2d(&pts, EPS);
        let twice = convex_hull_2d(&once.vertices(), EPS);
        assert_eq!(once, twice);
    }
}
