//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on a declared failure (the walk failed, the
//! trace has problems, a benchmark bound was missed), 3 on bad input.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use conewalk::regions::{accel_cone, static_polygon, zmp_area};
use conewalk::sim::bench::centroid;
use conewalk::sim::scenario::Scenario;
use conewalk::sim::trace::{audit_trace, Trace};
use conewalk::sim::{bench, generate_staircase, load_scenario, run_simulation, validate_tick, BenchConfig, SimConfig, StaircaseParams};
use conewalk::{compute_cwc, ContactSet, Region2, Vec2, Vec3};

const EXIT_FAILURE: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "conewalk",
    version,
    about = "Contact-stability cones and preview control for point-mass walking",
    allow_negative_numbers = true
)]
struct Cli {
    /// Log progress and warnings to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario and write its trace.
    Run {
        scenario: PathBuf,
        /// Trace file; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Override the friction coefficient of every contact.
        #[arg(long)]
        friction: Option<f64>,
        /// Leave wall-clock timings out, for byte-identical traces.
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        ctl: ControlArgs,
    },
    /// Write a random circular staircase scenario.
    GenStaircase {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 26)]
        steps: usize,
        /// Mean radius of the staircase (m).
        #[arg(long, default_value_t = 1.4)]
        stair_radius: f64,
        /// Altitude gained from first to last step (m).
        #[arg(long, default_value_t = 1.4)]
        height: f64,
        /// Roll, pitch and yaw perturbations are uniform in ±tilt (rad).
        #[arg(long, default_value_t = 0.5)]
        tilt: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Dump the support regions of a stance as JSON.
    Regions {
        scenario: PathBuf,
        /// Footstep indices in contact, e.g. `0,1`.
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        feet: Vec<usize>,
        /// COM position `x,y,z`; above the polygon center by default.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        com: Option<Vec<f64>>,
        #[arg(long, default_value_t = 38.0)]
        mass: f64,
    },
    /// Time region computations and count cone rows.
    Bench {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Random stances per contact count (1, 2, 3).
        #[arg(long, default_value_t = 40)]
        stances: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Tube radius for the row counts (m).
        #[arg(long, default_value_t = 0.05)]
        radius: f64,
        /// Report file (JSON lines); stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Audit a trace file.
    Validate {
        trace: PathBuf,
        /// Re-solve the force LP of every tick against this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ControlArgs {
    /// Preview steps.
    #[arg(short = 'n', long, default_value_t = 10)]
    horizon_steps: usize,
    /// Weight of the control effort in the preview cost.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Tube radius (m).
    #[arg(long, default_value_t = 0.05)]
    radius: f64,
    /// Control rate (Hz).
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    /// Recorded in the trace; overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ControlArgs {
    fn config(&self) -> Result<SimConfig, String> {
        if self.horizon_steps == 0 {
            return Err("the preview needs at least one step".into());
        }
        for (name, v) in [("eps", self.eps), ("radius", self.radius), ("rate", self.rate)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(SimConfig {
            n: self.horizon_steps,
            eps: self.eps,
            radius: self.radius,
            rate: self.rate,
            ..Default::default()
        })
    }
}

enum Fail {
    Declared(String),
    Input(String),
}

fn main() -> ExitCode {
    // Usage errors are input errors here; clap alone would exit with 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_target(false)
        .init();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Declared(msg)) => {
            eprintln!("failure: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Fail::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), Fail> {
    match cmd {
        Cmd::Run {
            scenario,
            out,
            friction,
            no_timing,
            ctl,
        } => run(&scenario, out.as_deref(), friction, no_timing, &ctl),
        Cmd::GenStaircase {
            seed,
            steps,
            stair_radius,
            height,
            tilt,
            out,
        } => {
            if steps < 2 {
                return Err(Fail::Input("a staircase needs at least 2 steps".into()));
            }
            if !(tilt >= 0.0 && stair_radius > 0.0 && height.is_finite()) {
                return Err(Fail::Input("tilt must be non-negative and the radius positive".into()));
            }
            let s = generate_staircase(&StaircaseParams {
                seed,
                steps,
                radius: stair_radius,
                height,
                tilt_range: tilt,
                ..Default::default()
            });
            emit(out.as_deref(), &s.to_jsonl())
        }
        Cmd::Regions {
            scenario,
            feet,
            com,
            mass,
        } => regions(&scenario, &feet, com, mass),
        Cmd::Bench {
            seed,
            stances,
            reps,
            radius,
            out,
        } => {
            if stances == 0 || !(radius > 0.0) {
                return Err(Fail::Input("need at least one stance and a positive radius".into()));
            }
            let report = bench(&BenchConfig {
                seed,
                stances_per_count: stances,
                reps,
                tube_radius: radius,
                ..Default::default()
            });
            emit(out.as_deref(), &report.to_jsonl())?;
            let s = &report.summary;
            eprintln!("contacts  hull ms  bretl-lall ms  full ms  hull-only ms  speedup");
            for t in &s.timings {
                eprintln!(
                    "{:>8}  {:>7.3}  {:>13.3}  {:>7.3}  {:>12.4}  {:>6.1}x",
                    t.contacts, t.hull_ms.mean, t.bretl_lall_ms.mean, t.full_ms.mean, t.hull_only_ms.mean, t.speedup
                );
            }
            eprintln!(
                "polygons: {} compared, {} empty for both, {} mismatched, max Hausdorff {:.2e} m",
                s.compared, s.both_empty, s.mismatched, s.max_hausdorff
            );
            eprintln!(
                "double-support rows: {:.0} ± {:.0} -> {:.1} ± {:.1} ({} tubes, {} empty cones)",
                s.double_raw_rows.mean, s.double_raw_rows.std, s.double_reduced_rows.mean, s.double_reduced_rows.std, s.double_raw_rows.n, s.empty_cones
            );
            if s.mismatched > 0 || s.max_hausdorff >= 1e-4 {
                return Err(Fail::Declared("hull polygon and LP oracle disagree".into()));
            }
            Ok(())
        }
        Cmd::Validate { trace, scenario } => validate(&trace, scenario.as_deref()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Fail> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Fail::Input(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Fail::Input(format!("cannot write to stdout: {e}"))),
    }
}

fn load(path: &Path) -> Result<Scenario, Fail> {
    let s = load_scenario(path).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))?;
    for w in &s.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(s)
}

fn run(path: &Path, out: Option<&Path>, friction: Option<f64>, no_timing: bool, ctl: &ControlArgs) -> Result<(), Fail> {
    let mut s = load(path)?;
    if let Some(mu) = friction {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Fail::Input(format!("friction must be positive, got {mu}")));
        }
        s = s.with_friction(mu);
    }
    if let Some(seed) = ctl.seed {
        s.seed = seed;
    }
    let mut cfg = ctl.config().map_err(Fail::Input)?;
    cfg.timing = !no_timing;
    let trace = run_simulation(&s, &cfg);
    emit(out, &trace.to_jsonl())?;
    let e = &trace.end;
    eprintln!(
        "{}: {:?} after {:.2} s, {} extensions, {} fallbacks, final error {:.4} m",
        s.name, e.outcome, e.duration, e.extensions, e.fallbacks, e.final_error
    );
    if e.outcome.is_completed() {
        Ok(())
    } else {
        Err(Fail::Declared(format!("{} did not complete", s.name)))
    }
}

fn points(r: &Region2) -> Vec<[f64; 2]> {
    r.vertices().iter().map(|v| [v.x, v.y]).collect()
}

fn kind(r: &Region2) -> &'static str {
    match r {
        Region2::Empty => "empty",
        Region2::Point(_) => "point",
        Region2::Segment(..) => "segment",
        Region2::Polygon(_) => "polygon",
        Region2::Unbounded { .. } => "unbounded",
    }
}

fn regions(path: &Path, feet: &[usize], com: Option<Vec<f64>>, mass: f64) -> Result<(), Fail> {
    let s = load(path)?;
    if feet.is_empty() || feet.iter().any(|&i| i >= s.footsteps.len()) {
        return Err(Fail::Input(format!("feet must index the {} footsteps", s.footsteps.len())));
    }
    if !(mass > 0.0) {
        return Err(Fail::Input("mass must be positive".into()));
    }
    let mut cs = ContactSet::new(Vec::new());
    for &i in feet {
        cs = cs.union(&s.foot_contacts(i));
    }
    let origin = centroid(&cs);
    let w = compute_cwc(&cs, origin);
    let sp = static_polygon(&w, mass);
    let com = match com {
        Some(c) => Vec3::new(c[0], c[1], c[2]),
        None => {
            let xy = sp.chebyshev.unwrap_or_else(|| Vec2::new(origin.x, origin.y));
            Vec3::new(xy.x, xy.y, origin.z + s.com_height)
        }
    };
    let zmp = zmp_area(&w, com, origin.z);
    let cone = accel_cone(&w, com);
    let doc = json!({
        "feet": feet,
        "com": [com.x, com.y, com.z],
        "cwc_rows": w.len(),
        "static_polygon": {
            "kind": kind(&sp.polygon),
            "vertices": points(&sp.polygon),
            "area": sp.polygon.area(),
            "chebyshev_center": sp.chebyshev.map(|c| [c.x, c.y]),
            "inscribed_radius": sp.inscribed_radius,
        },
        "zmp_area": match &zmp {
            Ok(z) => json!({
                "kind": kind(&z.polygon),
                "z_plane": z.z_plane,
                "vertices": points(&z.polygon),
                "area": z.polygon.area(),
            }),
            Err(e) => json!({ "error": e.to_string() }),
        },
        "accel_cone": {
            "apex": [cone.apex.x, cone.apex.y, cone.apex.z],
            "kind": kind(&cone.cross_section),
            "rays": cone.rays.iter().map(|r| [r.x, r.y, r.z]).collect::<Vec<_>>(),
            "rows": cone.hrep.len(),
            "rest_inside": cone.interior,
        },
    });
    emit(None, &format!("{}\n", serde_json::to_string_pretty(&doc).expect("json value serializes")))
}

fn validate(path: &Path, scenario: Option<&Path>) -> Result<(), Fail> {
    let trace = Trace::load(path).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))?;
    let audit = audit_trace(&trace);
    let mut problems = audit.problems.clone();
    if let Some(sp) = scenario {
        let s = load(sp)?.with_friction(trace.header.friction);
        if s.footsteps.len() != trace.header.footsteps {
            return Err(Fail::Input(format!(
                "trace has {} footsteps, scenario {}",
                trace.header.footsteps,
                s.footsteps.len()
            )));
        }
        let mut rejected = 0;
        for k in &trace.ticks {
            if k.feet.iter().any(|&i| i >= s.footsteps.len()) {
                return Err(Fail::Input(format!("tick {} names a missing footstep", k.tick)));
            }
            let mut cs = ContactSet::new(Vec::new());
            for &i in &k.feet {
                cs = cs.union(&s.foot_contacts(i));
            }
            let check = validate_tick(&cs, trace.header.config.mass, &Vec3::from(k.p), &Vec3::from(k.u));
            if !check.is_feasible() {
                rejected += 1;
            }
        }
        if rejected > 0 {
            problems.push(format!("{rejected} ticks rejected by the force LP on re-check"));
        }
        eprintln!("re-checked {} ticks against {}", trace.ticks.len(), sp.display());
    }
    println!(
        "{}: {} ticks, {:?}, worst timing gap {:.1}%, max KKT residual {:.2e}",
        path.display(),
        trace.ticks.len(),
        trace.end.outcome,
        100.0 * audit.worst_timing_gap,
        audit.max_kkt
    );
    for p in &problems {
        println!("  {p}");
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Fail::Declared(format!("{} problems in the trace", problems.len())))
    }
}
