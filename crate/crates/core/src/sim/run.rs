//! The closed loop: state machine → tubes → tube cones → preview QP → apply
//! `u(0)` → integrate → force-existence check.

use std::collections::HashMap;
use std::rc::Rc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contact::{compute_cwc, ContactSet, WrenchCone};
use crate::fsm::{condition_w_gate, fsm_preview_inputs, stance_of, FsmState, PreviewInputs, StepPlan, TimingCase, Transition};
use crate::poly::qp::{qp_solve, QpOutcome};
use crate::preview::{solve_preview, ComState, ControlSequence, PreviewError, PreviewProblem, PreviewSegment};
use crate::regions::{cone_rows_at, static_polygon, StaticPolygon};
use crate::sim::scenario::Scenario;
use crate::sim::trace::{
    EndRecord, EventKind, EventRecord, FailureCause, Outcome, QpStatus, TickRecord, Timing, Trace, TraceHeader,
};
use crate::sim::validate::{validate_tick, ForceCheck};
use crate::tube::{build_tube, build_tube_along, tube_cone, Tube, TubeCone};
use crate::{gravity, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Preview steps.
    pub n: usize,
    pub eps: f64,
    pub radius: f64,
    /// Control rate (Hz).
    pub rate: f64,
    pub mass: f64,
    pub target_speed: f64,
    /// Margin (m) of the double-support exit gate.
    pub w_margin: f64,
    pub arrive_tol: f64,
    pub arrive_speed: f64,
    /// Hard stop on simulated time, as a multiple of the nominal walk time.
    pub max_time_factor: f64,
    /// Factor applied to the last control when the QP fails.
    pub fallback_decay: f64,
    /// Interior margin (m/s²) on the cone rows, so that applied controls
    /// stay off the cone boundary.
    pub cone_margin: f64,
    /// Tube radius halvings tried when a tube cone is empty or the QP is
    /// infeasible.
    pub shrink_retries: usize,
    /// Record wall-clock timings; off gives bitwise-reproducible traces.
    pub timing: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 10,
            eps: 1e-3,
            radius: 0.05,
            rate: 100.0,
            mass: 38.0,
            target_speed: 0.4,
            w_margin: 0.0,
            arrive_tol: 0.02,
            arrive_speed: 0.05,
            max_time_factor: 4.0,
            fallback_decay: 0.5,
            cone_margin: 1e-6,
            shrink_retries: 3,
            timing: true,
        }
    }
}

/// Contacts and precomputed regions of one stance.
#[derive(Clone, Debug)]
pub struct Stance {
    pub feet: Vec<usize>,
    pub contacts: ContactSet,
    pub cwc: WrenchCone,
    pub polygon: StaticPolygon,
}

/// Stances are built once and reused for every tick of their phases.
pub struct StanceCache<'a> {
    scenario: &'a Scenario,
    mass: f64,
    map: HashMap<Vec<usize>, Rc<Stance>>,
}

impl<'a> StanceCache<'a> {
    pub fn new(scenario: &'a Scenario, mass: f64) -> Self {
        Self {
            scenario,
            mass,
            map: HashMap::new(),
        }
    }

    pub fn get(&mut self, feet: &[usize]) -> Rc<Stance> {
        if let Some(s) = self.map.get(feet) {
            return s.clone();
        }
        let mut contacts = ContactSet::new(Vec::new());
        for &i in feet {
            contacts = contacts.union(&self.scenario.foot_contacts(i));
        }
        let centroid = contacts.contacts.iter().map(|c| c.position).sum::<Vec3>() / contacts.len() as f64;
        let cwc = compute_cwc(&contacts, centroid);
        let polygon = static_polygon(&cwc, self.mass);
        let s = Rc::new(Stance {
            feet: feet.to_vec(),
            contacts,
            cwc,
            polygon,
        });
        self.map.insert(feet.to_vec(), s.clone());
        s
    }

    pub fn phase(&mut self, index: usize) -> Rc<Stance> {
        self.get(&stance_of(index))
    }
}

/// One tube with its cone, ready for the QP.
#[derive(Clone, Debug)]
pub struct TubeStage {
    pub tube: Tube,
    pub cone: TubeCone,
}

/// Tubes for a preview: `(phase index, tube, k_range)` per segment.
#[derive(Clone, Debug)]
pub struct PreviewPlan {
    pub inputs: PreviewInputs,
    pub k_rem: usize,
    pub stages: Vec<(usize, TubeStage, std::ops::Range<usize>)>,
    pub radius: f64,
}

impl PreviewPlan {
    pub fn raw_rows(&self) -> usize {
        self.stages.iter().map(|(_, s, _)| s.cone.raw.len()).sum()
    }

    pub fn reduced_rows(&self) -> usize {
        self.stages.iter().map(|(_, s, _)| s.cone.reduced.len()).sum()
    }
}

/// Parameter interval `[t0, t1] ⊆ [0, 1]` of the points of `p0 + t d` whose
/// ground projection lies inside `sp` by at least `margin`.
pub fn segment_inside(sp: &StaticPolygon, p0: &Vec3, d: &Vec3, margin: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (row, rhs) in sp.rows.iter().zip(&sp.rhs) {
        // row·(xy0 + t dxy) ≤ rhs - margin
        let c = row.dot(&p0.xy());
        let k = row.dot(&d.xy());
        let room = rhs - margin - c;
        if k.abs() < 1e-15 {
            if room < 0.0 {
                return None;
            }
        } else if k > 0.0 {
            hi = hi.min(room / k);
        } else {
            lo = lo.max(room / k);
        }
    }
    (lo <= hi && !sp.rows.is_empty()).then_some((lo, hi))
}

/// Tube geometry for the current inputs, before cones are attached.
///
/// The double-support tube covers the whole segment `[p0, p_T]`. The
/// single-support tube is the part of it above the single-support static
/// polygon shrunk by the radius: from `p0` onwards before a switch to
/// double support, up to `p_T` after a switch to single support.
fn tube_layout(
    inputs: &PreviewInputs,
    p0: Vec3,
    n: usize,
    radius: f64,
    stances: &mut StanceCache,
) -> (usize, Vec<(usize, Tube, std::ops::Range<usize>)>) {
    let pt = inputs.target.p;
    let axis = pt - p0;
    let full = build_tube(p0, pt, radius);
    let sub = |a: Vec3, b: Vec3| {
        if axis.norm() < 1e-9 {
            build_tube(a, b, radius)
        } else {
            build_tube_along(a, b, radius, &axis)
        }
    };
    let Some(second) = inputs.second_phase else {
        return (n, vec![(inputs.first_phase, full, 0..n + 1)]);
    };
    let k_rem = inputs.k_rem(n);
    let (first_tube, second_tube) = match inputs.case {
        // single support now, double support after the switch
        TimingCase::SsLate => {
            let sp = &stances.phase(inputs.first_phase).polygon;
            let t1 = match segment_inside(sp, &p0, &axis, radius) {
                Some((t0, t1)) if t0 <= 0.0 => t1,
                _ => 0.0,
            };
            (sub(p0, p0 + axis * t1), full)
        }
        // double support now, single support after the switch
        _ => {
            let sp = &stances.phase(second).polygon;
            let t0 = match segment_inside(sp, &p0, &axis, radius) {
                Some((t0, t1)) if t1 >= 1.0 => t0,
                _ => 1.0,
            };
            (full, sub(p0 + axis * t0, pt))
        }
    };
    let mut out = vec![(inputs.first_phase, first_tube, 0..k_rem + 1)];
    if k_rem < n {
        out.push((second, second_tube, k_rem + 1..n + 1));
    }
    (k_rem, out)
}

/// Back-to-back stage laps, so the stages of a tick add up to its total.
#[derive(Clone, Copy, Debug, Default)]
pub struct StageClock {
    last: Option<Instant>,
}

impl StageClock {
    pub fn start(enabled: bool) -> Self {
        Self {
            last: enabled.then(Instant::now),
        }
    }

    /// Milliseconds since the previous lap.
    pub fn lap(&mut self) -> f64 {
        match self.last {
            Some(t) => {
                let now = Instant::now();
                self.last = Some(now);
                (now - t).as_secs_f64() * 1e3
            }
            None => 0.0,
        }
    }
}

/// Projection of `u` onto the acceleration cone of `stance` at `p`.
fn project_to_cone(stance: &Stance, p: &Vec3, u: &Vec3) -> Option<Vec3> {
    let rows = cone_rows_at(&stance.cwc, p);
    let g = gravity();
    let a = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.dot(&g)));
    let h = DMatrix::identity(3, 3);
    let f = -DVector::from_column_slice(u.as_slice());
    match qp_solve(&h, &f, &a, &b) {
        Ok(QpOutcome::Optimal(s)) => Some(Vec3::new(s.x[0], s.x[1], s.x[2])),
        _ => None,
    }
}

/// Smallest normalised slack of `u` in the acceleration cone at `p`
/// (positive inside).
fn cone_slack(stance: &Stance, p: &Vec3, u: &Vec3) -> f64 {
    let rel = u - gravity();
    cone_rows_at(&stance.cwc, p)
        .iter()
        .filter(|c| c.norm() > 1e-12)
        .map(|c| -c.dot(&rel) / c.norm())
        .fold(f64::INFINITY, f64::min)
}

/// Tubes and cones for the current inputs at one radius. `None` when a
/// tube cone is empty.
pub fn plan_preview(
    inputs: &PreviewInputs,
    p0: Vec3,
    n: usize,
    radius: f64,
    stances: &mut StanceCache,
) -> Option<PreviewPlan> {
    let (k_rem, layout) = tube_layout(inputs, p0, n, radius, stances);
    let mut stages = Vec::with_capacity(layout.len());
    for (phase, tube, range) in layout {
        let st = stances.phase(phase);
        let cone = tube_cone(&st.cwc, &tube).ok()?;
        stages.push((phase, TubeStage { tube, cone }, range));
    }
    Some(PreviewPlan {
        inputs: inputs.clone(),
        k_rem,
        stages,
        radius,
    })
}

/// Plans and solves the preview, halving the tube radius when the tube cone
/// is empty or the QP infeasible. Returns the last plan tried on failure.
pub fn control_step(
    inputs: &PreviewInputs,
    x: ComState,
    cfg: &SimConfig,
    stances: &mut StanceCache,
    timing: &mut Timing,
    clock: &mut StageClock,
) -> (Option<PreviewPlan>, Result<ControlSequence, PreviewError>) {
    let mut radius = cfg.radius;
    let mut last = None;
    for attempt in 0..=cfg.shrink_retries {
        if attempt > 0 {
            radius *= 0.5;
        }
        let planned = plan_preview(inputs, x.p, cfg.n, radius, stances);
        timing.geometry += clock.lap();
        let Some(pl) = planned else { continue };
        let solved = solve_preview(&preview_problem(x, &pl, cfg));
        timing.qp += clock.lap();
        match solved {
            Ok(sol) => return (Some(pl), Ok(sol)),
            Err(PreviewError::Infeasible) => last = Some(pl),
            Err(e) => return (Some(pl), Err(e)),
        }
    }
    (last, Err(PreviewError::Infeasible))
}


/// Cones come from each stage's own tube. Positions are kept in the longest
/// tube throughout, which contains the others: the applied `u(0)` only needs
/// `p0` inside the first stage's tube.
pub fn preview_problem(x0: ComState, plan: &PreviewPlan, cfg: &SimConfig) -> PreviewProblem {
    let mut pp = PreviewProblem::new(x0, plan.inputs.target, cfg.n, plan.inputs.horizon, cfg.eps);
    pp.cone_margin = cfg.cone_margin;
    let full = plan
        .stages
        .iter()
        .map(|(_, s, _)| &s.tube)
        .max_by(|a, b| {
            let la = (a.segment.1 - a.segment.0).norm();
            let lb = (b.segment.1 - b.segment.0).norm();
            la.total_cmp(&lb)
        })
        .expect("a plan has stages");
    for (_, stage, range) in &plan.stages {
        pp = pp.with_segment(PreviewSegment {
            k_range: range.clone(),
            cone: stage.cone.reduced.clone(),
            tube: full.hrep.clone(),
        });
    }
    pp
}

fn start_state(plan: &StepPlan) -> ComState {
    let mid = (plan.centers[0] + plan.centers[1]) * 0.5;
    ComState::at_rest(mid + Vec3::new(0.0, 0.0, plan.com_height))
}

/// Runs a scenario to completion or to a declared failure.
pub fn run_simulation(scenario: &Scenario, cfg: &SimConfig) -> Trace {
    let plan = scenario.plan(cfg.target_speed);
    let mut stances = StanceCache::new(scenario, cfg.mass);
    let mut fsm = FsmState::start(&plan);
    let mut x = start_state(&plan);
    let dt = 1.0 / cfg.rate;
    let final_target = plan.target_state(plan.len() - 1);
    let nominal = (plan.len() - 1) as f64 * (plan.t_ss + plan.t_ds);
    let max_ticks = (cfg.max_time_factor * nominal * cfg.rate).ceil() as usize + 1;

    let header = TraceHeader::new(scenario, cfg);
    let mut ticks = Vec::new();
    let mut events = Vec::new();
    let mut last_u = Vec3::zeros();
    let mut qp_bad_time = 0.0;
    let mut fallbacks = 0;
    let mut extensions = 0;
    let mut infeasible_ticks = 0;

    let mut outcome = Outcome::Failed {
        tick: max_ticks,
        cause: FailureCause::Timeout,
    };
    for tick in 0..max_ticks {
        let t = tick as f64 * dt;
        if fsm.is_terminal(&plan)
            && (x.p - final_target.p).norm() < cfg.arrive_tol
            && x.v.norm() < cfg.arrive_speed
        {
            outcome = Outcome::Completed { tick };
            break;
        }
        let mut clock = StageClock::start(cfg.timing);
        let total_start = clock.last;
        let mut timing = Timing::default();

        let inputs = fsm_preview_inputs(&fsm, &plan);
        let stance = stances.phase(fsm.index);
        timing.fsm = clock.lap();

        let (planned, solved) = control_step(&inputs, x, cfg, &mut stances, &mut timing, &mut clock);
        if let (Some(pl), Ok(_)) = (&planned, &solved) {
            if pl.radius < cfg.radius {
                events.push(EventRecord::new(tick, t, &fsm, EventKind::TubeShrink, format!("radius {:.4}", pl.radius)));
            }
        }
        let solved = solved.map(|s| (s, planned.expect("solved previews have a plan")));

        let (u, qp_status, kkt, raw_rows, cone_rows, case) = match solved {
            Ok((sol, pl)) => {
                qp_bad_time = 0.0;
                (sol.u[0], QpStatus::Optimal, sol.kkt_residual, pl.raw_rows(), pl.reduced_rows(), inputs.case.number())
            }
            Err(e) => {
                qp_bad_time += dt;
                fallbacks += 1;
                if qp_bad_time > plan.t_ds + 1e-9 {
                    outcome = Outcome::Failed {
                        tick,
                        cause: FailureCause::QpInfeasible,
                    };
                    events.push(EventRecord::new(tick, t, &fsm, EventKind::Failure, "preview infeasible for longer than double support".into()));
                    break;
                }
                let decayed = last_u * cfg.fallback_decay;
                let u = if cone_slack(&stance, &x.p, &decayed) >= 0.0 {
                    decayed
                } else {
                    project_to_cone(&stance, &x.p, &decayed).unwrap_or(decayed)
                };
                events.push(EventRecord::new(tick, t, &fsm, EventKind::QpFallback, e.to_string()));
                (u, QpStatus::Fallback, 0.0, 0, 0, inputs.case.number())
            }
        };

        let check = validate_tick(&stance.contacts, cfg.mass, &x.p, &u);
        timing.validate = clock.lap();
        timing.total = match (total_start, clock.last) {
            (Some(a), Some(b)) => (b - a).as_secs_f64() * 1e3,
            _ => 0.0,
        };

        let feasible = check.is_feasible();
        ticks.push(TickRecord {
            tick,
            t,
            p: x.p.into(),
            v: x.v.into(),
            u: u.into(),
            phase: fsm.phase.to_string(),
            feet: stance.feet.clone(),
            case,
            t_rem: fsm.t_rem,
            qp_status,
            force_lp_status: check.status(),
            min_cone_slack: cone_slack(&stance, &x.p, &u),
            kkt_residual: kkt,
            raw_cone_rows: raw_rows,
            cone_rows,
            timing_ms: timing,
        });
        if let ForceCheck::Infeasible = check {
            infeasible_ticks += 1;
        }
        if !feasible {
            events.push(EventRecord::new(tick, t, &fsm, EventKind::Failure, "no contact forces for the applied control".into()));
            outcome = Outcome::Failed {
                tick,
                cause: FailureCause::ForceLpInfeasible,
            };
            break;
        }

        last_u = u;
        x = x.step(&u, dt);
        if qp_status == QpStatus::Fallback {
            // the phase clock stops while the controller recovers
            continue;
        }
        let next_ss = (fsm.is_double() && !fsm.is_terminal(&plan)).then(|| stances.phase(fsm.index + 1));
        let p_now = x.p;
        let from = fsm.phase;
        let tr = fsm.advance(&plan, dt, || match &next_ss {
            Some(ss) => condition_w_gate(&p_now, &ss.polygon, cfg.w_margin),
            None => true,
        });
        match tr {
            Transition::Extended if fsm.waited <= dt + 1e-12 => {
                extensions += 1;
                log::info!("t={t:.2}: holding {from} until the COM is above the next support");
                events.push(EventRecord::new(tick, t, &fsm, EventKind::WaitExtension, format!("{from} extended")));
            }
            Transition::Switched => {
                events.push(EventRecord::new(tick, t, &fsm, EventKind::PhaseSwitch, format!("{from} -> {}", fsm.phase)));
            }
            _ => {}
        }
    }

    let end = EndRecord {
        outcome,
        ticks: ticks.len(),
        duration: ticks.len() as f64 * dt,
        extensions,
        fallbacks,
        infeasible_ticks,
        final_error: (x.p - final_target.p).norm(),
        final_speed: x.v.norm(),
    };
    Trace {
        header,
        ticks,
        events,
        end,
    }
}
