//! Scenario files: a header line followed by one footstep per line.
//!
//! ```text
//! {"schema":"conewalk.scenario/1","name":"flat4","friction":0.7,"t_ss":1.0,"t_ds":0.5,"com_height":0.8,"seed":0}
//! {"foot":"L","position":[0.0,0.1,0.0],"rpy":[0.0,0.0,0.0],"length":0.24,"width":0.14}
//! ```
//!
//! `rpy` holds roll, pitch and yaw in radians; the sole normal is the third
//! column of the resulting rotation.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::contact::{ContactError, ContactSet};
use crate::fsm::{Side, StepPlan};
use crate::Vec3;

pub const SCENARIO_SCHEMA: &str = "conewalk.scenario/1";
pub const DEFAULT_FRICTION: f64 = 0.7;
pub const DEFAULT_COM_HEIGHT: f64 = 0.8;
pub const FOOT_LENGTH: f64 = 0.24;
pub const FOOT_WIDTH: f64 = 0.14;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}, field `{field}`: {msg}")]
    Field { line: usize, field: String, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footstep {
    pub foot: Side,
    pub position: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_length() -> f64 {
    FOOT_LENGTH
}

fn default_width() -> f64 {
    FOOT_WIDTH
}

impl Footstep {
    pub fn center(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let [r, p, y] = self.rpy;
        Rotation3::from_euler_angles(r, p, y).into_inner()
    }

    pub fn normal(&self) -> Vec3 {
        self.rotation().column(2).into_owned()
    }

    /// The four sole corners as contacts.
    pub fn contacts(&self, mu: f64) -> Result<ContactSet, ContactError> {
        ContactSet::rectangle(self.center(), &self.rotation(), self.length, self.width, mu)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    schema: String,
    #[serde(default)]
    name: String,
    friction: Option<f64>,
    #[serde(default = "default_t_ss")]
    t_ss: f64,
    #[serde(default = "default_t_ds")]
    t_ds: f64,
    #[serde(default = "default_com_height")]
    com_height: f64,
    #[serde(default)]
    seed: u64,
}

fn default_t_ss() -> f64 {
    1.0
}

fn default_t_ds() -> f64 {
    0.5
}

fn default_com_height() -> f64 {
    DEFAULT_COM_HEIGHT
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub friction: f64,
    pub t_ss: f64,
    pub t_ds: f64,
    pub com_height: f64,
    pub seed: u64,
    pub footsteps: Vec<Footstep>,
    /// Non-fatal notes from loading, e.g. defaulted fields.
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.footsteps.len() < 2 {
            return Err(ScenarioError::Invalid(format!("need at least 2 footsteps, got {}", self.footsteps.len())));
        }
        if !(self.friction > 0.0 && self.friction.is_finite()) {
            return Err(ScenarioError::Invalid(format!("friction must be positive, got {}", self.friction)));
        }
        if !(self.t_ss > 0.0 && self.t_ds > 0.0) {
            return Err(ScenarioError::Invalid("phase durations must be positive".into()));
        }
        if !(self.com_height > 0.0) {
            return Err(ScenarioError::Invalid("com_height must be positive".into()));
        }
        for (i, f) in self.footsteps.iter().enumerate() {
            let finite = f.position.iter().chain(&f.rpy).all(|x| x.is_finite());
            if !finite || !(f.length > 0.0 && f.width > 0.0) {
                return Err(ScenarioError::Invalid(format!("footstep {i} has a bad pose or shape")));
            }
        }
        Ok(())
    }

    pub fn with_friction(mut self, mu: f64) -> Self {
        self.friction = mu;
        self
    }

    /// Contact set of footstep `i`.
    pub fn foot_contacts(&self, i: usize) -> ContactSet {
        self.footsteps[i].contacts(self.friction).expect("validated footstep")
    }

    pub fn plan(&self, target_speed: f64) -> StepPlan {
        StepPlan {
            sides: self.footsteps.iter().map(|f| f.foot).collect(),
            centers: self.footsteps.iter().map(Footstep::center).collect(),
            t_ss: self.t_ss,
            t_ds: self.t_ds,
            com_height: self.com_height,
            target_speed,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            schema: SCENARIO_SCHEMA.into(),
            name: self.name.clone(),
            friction: Some(self.friction),
            t_ss: self.t_ss,
            t_ds: self.t_ds,
            com_height: self.com_height,
            seed: self.seed,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for f in &self.footsteps {
            out.push_str(&serde_json::to_string(f).expect("footstep serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        let mut file = fs::File::create(path)?;
        file.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    parse_scenario(&fs::read_to_string(path)?)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, htext) = lines.next().ok_or(ScenarioError::Parse {
        line: 1,
        msg: "empty scenario".into(),
    })?;
    let hvalue: Value = serde_json::from_str(htext).map_err(|e| ScenarioError::Parse {
        line: hline,
        msg: e.to_string(),
    })?;
    let header: Header = serde_json::from_value(hvalue).map_err(|e| field_error(hline, &e))?;
    if header.schema != SCENARIO_SCHEMA {
        return Err(ScenarioError::Field {
            line: hline,
            field: "schema".into(),
            msg: format!("expected {SCENARIO_SCHEMA}, got {}", header.schema),
        });
    }
    let mut warnings = Vec::new();
    let friction = match header.friction {
        Some(mu) => mu,
        None => {
            let w = format!("no friction given, using μ = {DEFAULT_FRICTION}");
            log::warn!("{w}");
            warnings.push(w);
            DEFAULT_FRICTION
        }
    };
    let mut footsteps = Vec::new();
    for (line, l) in lines {
        let v: Value = serde_json::from_str(l).map_err(|e| ScenarioError::Parse { line, msg: e.to_string() })?;
        footsteps.push(serde_json::from_value::<Footstep>(v).map_err(|e| field_error(line, &e))?);
    }
    let s = Scenario {
        name: header.name,
        friction,
        t_ss: header.t_ss,
        t_ds: header.t_ds,
        com_height: header.com_height,
        seed: header.seed,
        footsteps,
        warnings,
    };
    s.validate()?;
    Ok(s)
}

fn field_error(line: usize, e: &serde_json::Error) -> ScenarioError {
    let msg = e.to_string();
    let field = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "?".into());
    ScenarioError::Field { line, field, msg }
}

/// Straight flat walk with alternating feet `stride` apart, starting with a
/// left foot.
pub fn flat_walk(steps: usize, stride: f64) -> Scenario {
    let footsteps = (0..steps)
        .map(|i| {
            let side = if i % 2 == 0 { Side::Left } else { Side::Right };
            let y = if side == Side::Left { 0.1 } else { -0.1 };
            Footstep {
                foot: side,
                position: [i as f64 * stride, y, 0.0],
                rpy: [0.0; 3],
                length: FOOT_LENGTH,
                width: FOOT_WIDTH,
            }
        })
        .collect();
    Scenario {
        name: format!("flat{steps}"),
        friction: DEFAULT_FRICTION,
        t_ss: 1.0,
        t_ds: 0.5,
        com_height: DEFAULT_COM_HEIGHT,
        seed: 0,
        footsteps,
        warnings: Vec::new(),
    }
}

/// Parameters of the circular staircase generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaircaseParams {
    pub seed: u64,
    pub steps: usize,
    pub radius: f64,
    pub height: f64,
    pub tilt_range: f64,
    /// Arc length between consecutive footsteps along the mean circle.
    pub spacing: f64,
    /// Radial offset of each foot from the mean circle.
    pub half_width: f64,
}

impl Default for StaircaseParams {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 26,
            radius: 1.4,
            height: 1.4,
            tilt_range: 0.5,
            spacing: 0.2,
            half_width: 0.1,
        }
    }
}

/// Counter-clockwise circular staircase: left feet on the inner side, right
/// feet on the outer side, heights rising linearly to `height`. Each step is
/// rolled, pitched and yawed by independent uniform angles in
/// `±tilt_range`, on top of the tangent heading.
pub fn generate_staircase(p: &StaircaseParams) -> Scenario {
    assert!(p.steps >= 2, "a staircase needs at least 2 steps");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let dtheta = p.spacing / p.radius;
    let footsteps = (0..p.steps)
        .map(|i| {
            let side = if i % 2 == 0 { Side::Left } else { Side::Right };
            let theta = i as f64 * dtheta;
            let r = match side {
                Side::Left => p.radius - p.half_width,
                Side::Right => p.radius + p.half_width,
            };
            let z = p.height * i as f64 / (p.steps - 1) as f64;
            let mut tilt = || if p.tilt_range > 0.0 { rng.gen_range(-p.tilt_range..=p.tilt_range) } else { 0.0 };
            let (roll, pitch, yaw) = (tilt(), tilt(), tilt());
            Footstep {
                foot: side,
                position: [r * theta.cos(), r * theta.sin(), z],
                rpy: [roll, pitch, theta + std::f64::consts::FRAC_PI_2 + yaw],
                length: FOOT_LENGTH,
                width: FOOT_WIDTH,
            }
        })
        .collect();
    Scenario {
        name: format!("staircase-{}-{}", p.seed, p.steps),
        friction: DEFAULT_FRICTION,
        t_ss: 1.0,
        t_ds: 0.5,
        com_height: DEFAULT_COM_HEIGHT,
        seed: p.seed,
        footsteps,
        warnings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let s = generate_staircase(&StaircaseParams {
            seed: 3,
            steps: 6,
            ..Default::default()
        });
        let back = parse_scenario(&s.to_jsonl()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn missing_friction_warns() {
        let text = "{\"schema\":\"conewalk.scenario/1\"}\n\
                    {\"foot\":\"L\",\"position\":[0,0.1,0]}\n\
                    {\"foot\":\"R\",\"position\":[0.2,-0.1,0]}\n";
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.friction, DEFAULT_FRICTION);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn schema_errors_carry_line_and_field() {
        let text = "{\"schema\":\"conewalk.scenario/1\",\"friction\":0.7}\n\
                    {\"foot\":\"L\",\"position\":[0,0.1,0]}\n\
                    {\"foot\":\"X\",\"position\":[0.2,-0.1,0]}\n";
        match parse_scenario(text) {
            Err(ScenarioError::Field { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_scenario("{\"schema\":\"conewalk.scenario/1\"}\n{\"foot\":\"L\"}\n") {
            Err(ScenarioError::Field { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "position");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_scenario("{oops"), Err(ScenarioError::Parse { line: 1, .. })));
        let one = "{\"schema\":\"conewalk.scenario/1\"}\n{\"foot\":\"L\",\"position\":[0,0,0]}\n";
        assert!(matches!(parse_scenario(one), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn staircase_geometry() {
        let s = generate_staircase(&StaircaseParams::default());
        assert_eq!(s.footsteps.len(), 26);
        let dz = s.footsteps[25].position[2] - s.footsteps[0].position[2];
        assert!((dz - 1.4).abs() < 1e-12);
        let flat = generate_staircase(&StaircaseParams {
            tilt_range: 0.0,
            ..Default::default()
        });
        for f in &flat.footsteps {
            assert!((f.normal() - Vec3::z()).norm() < 1e-12);
        }
    }
}
