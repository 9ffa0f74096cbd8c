//! Benchmarks on random stances and staircase tubes.
//!
//! Three measurements per run:
//! - the hull-based static polygon against the Bretl–Lall LP oracle, in time
//!   and in Hausdorff distance;
//! - region recomputation at a new COM position with the CWC reused ("hull
//!   only") against recomputing everything from the contacts;
//! - row counts of the stacked tube cone `C_T` against its reduction `C′_T`
//!   on staircase stances.

use std::time::Instant;

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact::{compute_cwc, ContactSet};
use crate::poly::{hausdorff, Region2};
use crate::regions::{accel_cone, bretl_lall_polygon, static_polygon, RegionError};
use crate::sim::scenario::{generate_staircase, StaircaseParams};
use crate::tube::{build_tube, tube_cone, DEFAULT_RADIUS};
use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    /// Stances per contact count (1, 2 and 3 contacts).
    pub stances_per_count: usize,
    /// Timed repetitions per measurement.
    pub reps: usize,
    pub mass: f64,
    pub friction: f64,
    pub max_tilt: f64,
    pub staircase: StaircaseParams,
    pub tube_radius: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            stances_per_count: 40,
            reps: 5,
            mass: 38.0,
            friction: 0.7,
            max_tilt: 0.5,
            staircase: StaircaseParams::default(),
            tube_radius: DEFAULT_RADIUS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StanceBench {
    pub id: usize,
    pub contacts: usize,
    /// CWC plus hull of the static polygon, from scratch.
    pub hull_ms: f64,
    pub bretl_lall_ms: f64,
    /// `None` when either method found no bounded polygon.
    pub hausdorff: Option<f64>,
    /// Both methods found that no COM position is in equilibrium.
    pub both_empty: bool,
    pub full_ms: f64,
    pub hull_only_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanceKind {
    Single,
    Double,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub step: usize,
    pub kind: StanceKind,
    pub raw_rows: usize,
    /// `None` when the tube cone is empty.
    pub reduced_rows: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Stat {
        let xs: Vec<f64> = xs.into_iter().collect();
        let n = xs.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        Stat { mean, std: var.sqrt(), n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub contacts: usize,
    pub hull_ms: Stat,
    pub bretl_lall_ms: Stat,
    pub full_ms: Stat,
    pub hull_only_ms: Stat,
    /// Mean full time over mean hull-only time.
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub stances: usize,
    pub compared: usize,
    pub both_empty: usize,
    /// Stances where one method found a polygon and the other did not.
    pub mismatched: usize,
    pub max_hausdorff: f64,
    pub timings: Vec<TimingRow>,
    pub double_raw_rows: Stat,
    pub double_reduced_rows: Stat,
    pub single_raw_rows: Stat,
    pub single_reduced_rows: Stat,
    /// Largest `|C′_T| / |C_T|` over double-support tubes with a cone.
    pub worst_double_ratio: f64,
    pub empty_cones: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub stances: Vec<StanceBench>,
    pub reductions: Vec<ReductionRow>,
    pub summary: BenchSummary,
}

impl BenchReport {
    pub fn speedup(&self, contacts: usize) -> Option<f64> {
        self.summary.timings.iter().find(|t| t.contacts == contacts).map(|t| t.speedup)
    }

    /// One JSON record per line: stances, reductions, then the summary.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        #[serde(tag = "record", rename_all = "snake_case")]
        enum Line<'a> {
            Stance(&'a StanceBench),
            Reduction(&'a ReductionRow),
            Summary(&'a BenchSummary),
        }
        let mut out = String::new();
        let lines = self
            .stances
            .iter()
            .map(Line::Stance)
            .chain(self.reductions.iter().map(Line::Reduction))
            .chain(std::iter::once(Line::Summary(&self.summary)));
        for l in lines {
            out.push_str(&serde_json::to_string(&l).expect("bench record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Rectangular feet scattered around the origin, tilted by at most
/// `max_tilt` in roll and pitch.
pub fn random_stance(rng: &mut impl Rng, contacts: usize, friction: f64, max_tilt: f64) -> ContactSet {
    let mut all = Vec::new();
    for _ in 0..contacts {
        let center = Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.1..0.1));
        let r = Rotation3::from_euler_angles(
            rng.gen_range(-max_tilt..=max_tilt),
            rng.gen_range(-max_tilt..=max_tilt),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let length = rng.gen_range(0.15..0.3);
        let width = rng.gen_range(0.08..0.16);
        let foot = ContactSet::rectangle(center, r.matrix(), length, width, friction).expect("positive friction");
        all.extend(foot.contacts);
    }
    ContactSet::new(all)
}

pub fn centroid(cs: &ContactSet) -> Vec3 {
    cs.contacts.iter().map(|c| c.position).sum::<Vec3>() / cs.len() as f64
}

fn time_ms<T>(reps: usize, mut f: impl FnMut() -> T) -> (f64, T) {
    let reps = reps.max(1);
    let start = Instant::now();
    let mut out = f();
    for _ in 1..reps {
        out = std::hint::black_box(f());
    }
    (start.elapsed().as_secs_f64() * 1e3 / reps as f64, out)
}

fn bench_stance(id: usize, cs: &ContactSet, cfg: &BenchConfig, rng: &mut impl Rng) -> StanceBench {
    let origin = centroid(cs);
    let (hull_ms, sp) = time_ms(cfg.reps, || static_polygon(&compute_cwc(cs, origin), cfg.mass));
    let (bretl_lall_ms, bl) = time_ms(cfg.reps, || bretl_lall_polygon(cs, cfg.mass));
    let hausdorff = match (&sp.polygon, &bl) {
        (Region2::Polygon(_), Ok(b @ Region2::Polygon(_))) => Some(hausdorff(&sp.polygon, b)),
        _ => None,
    };
    let both_empty = sp.polygon == Region2::Empty && matches!(bl, Err(RegionError::Infeasible));

    // A new COM position above the polygon; the CWC does not change.
    let xy = sp.chebyshev.unwrap_or_else(|| origin.xy());
    let com = Vec3::new(xy.x, xy.y, origin.z + 0.8) + Vec3::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), 0.0);
    let w = compute_cwc(cs, origin);
    let (full_ms, _) = time_ms(cfg.reps, || {
        let w = compute_cwc(cs, origin);
        (static_polygon(&w, cfg.mass), accel_cone(&w, com))
    });
    let (hull_only_ms, _) = time_ms(cfg.reps, || (static_polygon(&w, cfg.mass), accel_cone(&w, com)));
    StanceBench {
        id,
        contacts: cs.len() / 4,
        hull_ms,
        bretl_lall_ms,
        hausdorff,
        both_empty,
        full_ms,
        hull_only_ms,
    }
}

/// Cone sizes along the staircase: the double-support tube runs from
/// between the feet to above the next foot, the single-support tube is a
/// cube around the COM target.
pub fn staircase_reductions(params: &StaircaseParams, radius: f64) -> Vec<ReductionRow> {
    let s = generate_staircase(params);
    let lift = Vec3::new(0.0, 0.0, s.com_height);
    let mut rows = Vec::new();
    for j in 0..s.footsteps.len() - 1 {
        let (a, b) = (s.footsteps[j].center(), s.footsteps[j + 1].center());
        let ds = s.foot_contacts(j).union(&s.foot_contacts(j + 1));
        let tube = build_tube((a + b) * 0.5 + lift, b + lift, radius);
        rows.push(reduction_row(j, StanceKind::Double, &ds, &tube));
        let ss = s.foot_contacts(j + 1);
        let cube = build_tube(b + lift, b + lift, radius);
        rows.push(reduction_row(j + 1, StanceKind::Single, &ss, &cube));
    }
    rows
}

fn reduction_row(step: usize, kind: StanceKind, cs: &ContactSet, tube: &crate::tube::Tube) -> ReductionRow {
    let w = compute_cwc(cs, centroid(cs));
    let raw_rows = tube.vertices.len() * w.len();
    ReductionRow {
        step,
        kind,
        raw_rows,
        reduced_rows: tube_cone(&w, tube).ok().map(|c| c.reduced.len()),
    }
}

pub fn bench(cfg: &BenchConfig) -> BenchReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stances = Vec::new();
    for contacts in 1..=3 {
        for _ in 0..cfg.stances_per_count {
            let cs = random_stance(&mut rng, contacts, cfg.friction, cfg.max_tilt);
            stances.push(bench_stance(stances.len(), &cs, cfg, &mut rng));
        }
    }
    let reductions = staircase_reductions(&cfg.staircase, cfg.tube_radius);
    let summary = summarize(&stances, &reductions);
    BenchReport {
        config: cfg.clone(),
        stances,
        reductions,
        summary,
    }
}

fn summarize(stances: &[StanceBench], reductions: &[ReductionRow]) -> BenchSummary {
    let timings = (1..=3)
        .map(|k| {
            let of = |f: fn(&StanceBench) -> f64| Stat::of(stances.iter().filter(|s| s.contacts == k).map(f));
            let full_ms = of(|s| s.full_ms);
            let hull_only_ms = of(|s| s.hull_only_ms);
            TimingRow {
                contacts: k,
                hull_ms: of(|s| s.hull_ms),
                bretl_lall_ms: of(|s| s.bretl_lall_ms),
                speedup: full_ms.mean / hull_only_ms.mean,
                full_ms,
                hull_only_ms,
            }
        })
        .collect();
    let hd: Vec<f64> = stances.iter().filter_map(|s| s.hausdorff).collect();
    let rows = |kind: StanceKind| reductions.iter().filter(move |r| r.kind == kind && r.reduced_rows.is_some());
    BenchSummary {
        stances: stances.len(),
        compared: hd.len(),
        both_empty: stances.iter().filter(|s| s.both_empty).count(),
        mismatched: stances.iter().filter(|s| s.hausdorff.is_none() && !s.both_empty).count(),
        max_hausdorff: hd.iter().copied().fold(0.0, f64::max),
        timings,
        double_raw_rows: Stat::of(rows(StanceKind::Double).map(|r| r.raw_rows as f64)),
        double_reduced_rows: Stat::of(rows(StanceKind::Double).filter_map(|r| r.reduced_rows).map(|n| n as f64)),
        single_raw_rows: Stat::of(rows(StanceKind::Single).map(|r| r.raw_rows as f64)),
        single_reduced_rows: Stat::of(rows(StanceKind::Single).filter_map(|r| r.reduced_rows).map(|n| n as f64)),
        worst_double_ratio: rows(StanceKind::Double)
            .map(|r| r.reduced_rows.unwrap_or(0) as f64 / r.raw_rows as f64)
            .fold(0.0, f64::max),
        empty_cones: reductions.iter().filter(|r| r.reduced_rows.is_none()).count(),
    }
}
