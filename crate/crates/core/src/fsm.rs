//! Walking state machine: phase sequencing, preview timing rules and the
//! double-support exit gate.
//!
//! Footsteps `f_0..f_n` give the phase sequence
//! `DS(f_0→f_1), SS(f_1), DS(f_1→f_2), …, SS(f_n)`. Every phase ends on one
//! foot, and its COM target sits `com_height` above that foot.

use std::fmt;

use crate::preview::ComState;
use crate::regions::StaticPolygon;
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Side {
    pub fn letter(self) -> char {
        match self {
            Side::Left => 'L',
            Side::Right => 'R',
        }
    }
}

/// The four phases, named after the foot they end on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    SsL,
    DsR,
    SsR,
    DsL,
}

impl Phase {
    pub fn new(double: bool, side: Side) -> Self {
        match (double, side) {
            (false, Side::Left) => Phase::SsL,
            (true, Side::Right) => Phase::DsR,
            (false, Side::Right) => Phase::SsR,
            (true, Side::Left) => Phase::DsL,
        }
    }

    /// Successor in the cycle SS-L → DS-R → SS-R → DS-L → SS-L.
    pub fn next(self) -> Phase {
        match self {
            Phase::SsL => Phase::DsR,
            Phase::DsR => Phase::SsR,
            Phase::SsR => Phase::DsL,
            Phase::DsL => Phase::SsL,
        }
    }

    pub fn is_double(self) -> bool {
        matches!(self, Phase::DsR | Phase::DsL)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::SsL => "SS-L",
            Phase::DsR => "DS-R",
            Phase::SsR => "SS-R",
            Phase::DsL => "DS-L",
        })
    }
}

/// Footstep data the state machine needs.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPlan {
    pub sides: Vec<Side>,
    /// Foot centers.
    pub centers: Vec<Vec3>,
    pub t_ss: f64,
    pub t_ds: f64,
    pub com_height: f64,
    /// Speed of the target velocity along the direction of motion.
    pub target_speed: f64,
}

impl StepPlan {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Number of phases in the walk.
    pub fn phase_count(&self) -> usize {
        2 * (self.len() - 1)
    }

    /// COM target above foot `j`.
    pub fn com_target(&self, j: usize) -> Vec3 {
        self.centers[j] + Vec3::new(0.0, 0.0, self.com_height)
    }

    fn mid(&self, j: usize) -> Vec3 {
        (self.centers[j] + self.centers[j + 1]) * 0.5
    }

    /// Direction of motion through foot `j`, following the mid-feet path.
    pub fn direction(&self, j: usize) -> Vec3 {
        let n = self.len();
        let (a, b) = if n < 2 {
            return Vec3::zeros();
        } else if j == 0 {
            (self.centers[0], self.mid(0))
        } else if j + 1 >= n {
            (self.mid(n - 2), self.centers[n - 1])
        } else {
            (self.mid(j - 1), self.mid(j))
        };
        let d = b - a;
        if d.norm() < 1e-12 {
            Vec3::zeros()
        } else {
            d.normalize()
        }
    }

    /// Target state of a phase ending on foot `j`: zero velocity on the last
    /// foot.
    pub fn target_state(&self, j: usize) -> ComState {
        let v = if j + 1 >= self.len() {
            Vec3::zeros()
        } else {
            self.direction(j) * self.target_speed
        };
        ComState::new(self.com_target(j), v)
    }
}

/// Current position in the phase sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct FsmState {
    /// Index in the phase sequence: `2j` is `DS(f_j→f_{j+1})`, `2j+1` is
    /// `SS(f_{j+1})`.
    pub index: usize,
    pub phase: Phase,
    pub t_rem: f64,
    /// Time spent waiting at the end of double support.
    pub waited: f64,
    pub extensions: usize,
}

/// Result of advancing the clock by one tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    None,
    Switched,
    /// Double support extended because the gate refused the switch.
    Extended,
    /// Terminal phase clock ran out; the walk holds its final stance.
    Holding,
}

impl FsmState {
    /// Start of the walk: double support from `f_0` to `f_1`.
    pub fn start(plan: &StepPlan) -> Self {
        Self {
            index: 0,
            phase: Phase::new(true, plan.sides[1]),
            t_rem: plan.t_ds,
            waited: 0.0,
            extensions: 0,
        }
    }

    pub fn is_double(&self) -> bool {
        self.index % 2 == 0
    }

    pub fn is_terminal(&self, plan: &StepPlan) -> bool {
        self.index + 1 >= plan.phase_count()
    }

    /// Foot the current phase ends on.
    pub fn end_foot(&self) -> usize {
        self.index / 2 + 1
    }

    /// Feet in contact during the current phase.
    pub fn stance_feet(&self) -> Vec<usize> {
        stance_of(self.index)
    }

    pub fn duration(&self, plan: &StepPlan) -> f64 {
        if self.is_double() {
            plan.t_ds
        } else {
            plan.t_ss
        }
    }

    /// Advance by `dt`. At the end of double support, `gate` decides whether
    /// the switch may happen now.
    pub fn advance(&mut self, plan: &StepPlan, dt: f64, gate: impl FnOnce() -> bool) -> Transition {
        self.t_rem -= dt;
        if self.t_rem > 1e-12 {
            return Transition::None;
        }
        if self.is_terminal(plan) {
            self.t_rem = 0.0;
            return Transition::Holding;
        }
        if self.is_double() && !gate() {
            if self.t_rem > -dt + 1e-12 || self.waited == 0.0 {
                // first refused tick of this phase
                if self.waited == 0.0 {
                    self.extensions += 1;
                }
            }
            self.waited += dt;
            self.t_rem = 0.0;
            return Transition::Extended;
        }
        let carry = self.t_rem.min(0.0);
        self.index += 1;
        self.waited = 0.0;
        self.phase = self.phase.next();
        self.t_rem = self.duration(plan) + carry;
        Transition::Switched
    }
}

/// Feet in contact during phase `index`.
pub fn stance_of(index: usize) -> Vec<usize> {
    let j = index / 2;
    if index % 2 == 0 {
        vec![j, j + 1]
    } else {
        vec![j + 1]
    }
}

/// Which timing rule produced the preview inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimingCase {
    /// Single support past mid-phase: preview through the next double support.
    SsLate,
    /// Double support: preview into the next single support.
    Ds,
    /// Single support before mid-phase.
    SsEarly,
    /// Last single support of the walk.
    Terminal,
}

impl TimingCase {
    pub fn number(self) -> u8 {
        match self {
            TimingCase::SsLate => 1,
            TimingCase::Ds => 2,
            TimingCase::SsEarly => 3,
            TimingCase::Terminal => 4,
        }
    }
}

/// Inputs for one preview solve.
#[derive(Clone, Debug, PartialEq)]
pub struct PreviewInputs {
    pub case: TimingCase,
    pub horizon: f64,
    pub target: ComState,
    /// Phase indices whose stances apply before and after the switch.
    pub first_phase: usize,
    pub second_phase: Option<usize>,
    /// Time until the stance switch, when it falls inside the horizon.
    pub t_switch: Option<f64>,
}

impl PreviewInputs {
    /// `k_rem = ⌊t_rem / ΔT⌋`; steps `k ≤ k_rem` use the first stance.
    pub fn k_rem(&self, n: usize) -> usize {
        match self.t_switch {
            Some(t) => {
                let dt = self.horizon / n as f64;
                ((t / dt + 1e-9).floor().max(0.0) as usize).min(n)
            }
            None => n,
        }
    }
}

/// Horizon, target and stance switch for the current phase.
pub fn fsm_preview_inputs(fsm: &FsmState, plan: &StepPlan) -> PreviewInputs {
    let t_rem = fsm.t_rem.max(0.0);
    let j = fsm.end_foot();
    if fsm.is_terminal(plan) {
        return PreviewInputs {
            case: TimingCase::Terminal,
            horizon: t_rem.max(0.5 * plan.t_ss),
            target: plan.target_state(j),
            first_phase: fsm.index,
            second_phase: None,
            t_switch: None,
        };
    }
    if fsm.is_double() && fsm.waited > 0.0 {
        // held for condition W: the current stance stays until the gate opens
        return PreviewInputs {
            case: TimingCase::Ds,
            horizon: t_rem + 0.5 * plan.t_ss,
            target: plan.target_state(j),
            first_phase: fsm.index,
            second_phase: None,
            t_switch: None,
        };
    }
    if fsm.is_double() {
        return PreviewInputs {
            case: TimingCase::Ds,
            horizon: t_rem + 0.5 * plan.t_ss,
            target: plan.target_state(j),
            first_phase: fsm.index,
            second_phase: Some(fsm.index + 1),
            t_switch: Some(t_rem),
        };
    }
    if t_rem < 0.5 * plan.t_ss {
        PreviewInputs {
            case: TimingCase::SsLate,
            horizon: t_rem + plan.t_ds + 0.5 * plan.t_ss,
            target: plan.target_state(j + 1),
            first_phase: fsm.index,
            second_phase: Some(fsm.index + 1),
            t_switch: Some(t_rem),
        }
    } else {
        PreviewInputs {
            case: TimingCase::SsEarly,
            horizon: t_rem,
            target: plan.target_state(j),
            first_phase: fsm.index,
            second_phase: None,
            t_switch: None,
        }
    }
}

/// Whether double support may end: the COM must project strictly inside the
/// next single-support static polygon, by at least `margin` meters.
pub fn condition_w_gate(com: &Vec3, next_sp: &StaticPolygon, margin: f64) -> bool {
    next_sp.contains_strictly(&com.xy(), margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{compute_cwc, ContactSet};
    use crate::regions::static_polygon;
    use nalgebra::Matrix3;

    fn plan() -> StepPlan {
        StepPlan {
            sides: vec![Side::Left, Side::Right, Side::Left, Side::Right],
            centers: vec![
                Vec3::new(0.0, 0.1, 0.0),
                Vec3::new(0.2, -0.1, 0.0),
                Vec3::new(0.4, 0.1, 0.0),
                Vec3::new(0.6, -0.1, 0.0),
            ],
            t_ss: 1.0,
            t_ds: 0.5,
            com_height: 0.8,
            target_speed: 0.4,
        }
    }

    fn state(index: usize, t_rem: f64, plan: &StepPlan) -> FsmState {
        let mut s = FsmState::start(plan);
        for _ in 0..index {
            s.phase = s.phase.next();
        }
        s.index = index;
        s.t_rem = t_rem;
        s
    }

    #[test]
    fn timing_cases() {
        let p = plan();
        let late = fsm_preview_inputs(&state(1, 0.3, &p), &p);
        assert_eq!(late.case, TimingCase::SsLate);
        assert!((late.horizon - 1.3).abs() < 1e-12);
        assert_eq!(late.target.p, p.com_target(2));

        let ds = fsm_preview_inputs(&state(2, 0.2, &p), &p);
        assert_eq!(ds.case, TimingCase::Ds);
        assert!((ds.horizon - 0.7).abs() < 1e-12);
        assert_eq!(ds.target.p, p.com_target(2));

        let early = fsm_preview_inputs(&state(1, 0.8, &p), &p);
        assert_eq!(early.case, TimingCase::SsEarly);
        assert!((early.horizon - 0.8).abs() < 1e-12);
        assert_eq!(early.target.p, p.com_target(1));
    }

    #[test]
    fn k_rem_rounds_down() {
        let p = plan();
        let inputs = fsm_preview_inputs(&state(1, 0.3, &p), &p);
        // ΔT = 0.13, 0.3 / 0.13 = 2.3
        assert_eq!(inputs.k_rem(10), 2);
    }

    #[test]
    fn phase_cycle_and_stances() {
        let p = plan();
        let mut s = FsmState::start(&p);
        assert_eq!(s.phase, Phase::DsR);
        let mut seen = vec![s.phase];
        while !s.is_terminal(&p) {
            let stance_before = s.stance_feet();
            s.t_rem = 0.0;
            assert_eq!(s.advance(&p, 0.01, || true), Transition::Switched);
            seen.push(s.phase);
            let stance_after = s.stance_feet();
            if s.is_double() {
                assert_eq!(stance_after.len(), 2);
                assert_eq!(stance_after[0], stance_before[0]);
            } else {
                assert_eq!(stance_after, vec![*stance_before.last().unwrap()]);
            }
        }
        for w in seen.windows(2) {
            assert_eq!(w[0].next(), w[1]);
        }
        assert_eq!(seen.len(), p.phase_count());
        assert_eq!(seen.last().map(|p| p.to_string()), Some("SS-R".to_string()));
    }

    #[test]
    fn gate_extends_double_support() {
        let p = plan();
        let mut s = FsmState::start(&p);
        s.t_rem = 0.005;
        assert_eq!(s.advance(&p, 0.01, || false), Transition::Extended);
        assert_eq!(s.advance(&p, 0.01, || false), Transition::Extended);
        assert_eq!(s.extensions, 1);
        assert!(s.waited > 0.0);
        assert_eq!(s.advance(&p, 0.01, || true), Transition::Switched);
        assert_eq!(s.phase, Phase::SsR);
    }

    #[test]
    fn gate_examples() {
        let foot = ContactSet::rectangle(Vec3::new(0.2, -0.1, 0.0), &Matrix3::identity(), 0.24, 0.14, 0.7).unwrap();
        let sp = static_polygon(&compute_cwc(&foot, Vec3::zeros()), 38.0);
        assert!(condition_w_gate(&Vec3::new(0.2, -0.1, 0.8), &sp, 0.0));
        assert!(!condition_w_gate(&Vec3::new(0.1, 0.0, 0.8), &sp, 0.0));
    }
}
