//! Python bindings. Scenarios and traces cross the boundary as JSON-lines
//! text; geometry comes back as plain lists and dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use conewalk::regions::{accel_cone, static_polygon};
use conewalk::sim::bench::centroid;
use conewalk::sim::scenario::parse_scenario;
use conewalk::sim::trace::{audit_trace, Trace};
use conewalk::sim::{generate_staircase, run_simulation, Scenario, SimConfig, StaircaseParams};
use conewalk::{compute_cwc, ContactSet, Region2, Vec2, Vec3};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scenario(text: &str) -> PyResult<Scenario> {
    parse_scenario(text).map_err(value_error)
}

fn xy(r: &Region2) -> Vec<(f64, f64)> {
    r.vertices().iter().map(|v| (v.x, v.y)).collect()
}

/// Circular staircase scenario as JSON lines.
#[pyfunction]
#[pyo3(signature = (seed=42, steps=26, radius=1.4, height=1.4, tilt=0.5))]
fn staircase(seed: u64, steps: usize, radius: f64, height: f64, tilt: f64) -> PyResult<String> {
    if steps < 2 || radius <= 0.0 || tilt < 0.0 {
        return Err(PyValueError::new_err("need steps >= 2, radius > 0 and tilt >= 0"));
    }
    let s = generate_staircase(&StaircaseParams {
        seed,
        steps,
        radius,
        height,
        tilt_range: tilt,
        ..Default::default()
    });
    Ok(s.to_jsonl())
}

/// Simulates a scenario. Returns `(completed, trace_jsonl)`.
#[pyfunction]
#[pyo3(signature = (scenario_jsonl, n=10, eps=1e-3, radius=0.05, rate=100.0, friction=None, timing=false))]
fn simulate(
    py: Python<'_>,
    scenario_jsonl: &str,
    n: usize,
    eps: f64,
    radius: f64,
    rate: f64,
    friction: Option<f64>,
    timing: bool,
) -> PyResult<(bool, String)> {
    let mut s = scenario(scenario_jsonl)?;
    if let Some(mu) = friction {
        if !(mu > 0.0) {
            return Err(PyValueError::new_err("friction must be positive"));
        }
        s = s.with_friction(mu);
    }
    if n == 0 || !(eps > 0.0 && radius > 0.0 && rate > 0.0) {
        return Err(PyValueError::new_err("n, eps, radius and rate must be positive"));
    }
    let cfg = SimConfig {
        n,
        eps,
        radius,
        rate,
        timing,
        ..Default::default()
    };
    let trace = py.detach(|| run_simulation(&s, &cfg));
    Ok((trace.end.outcome.is_completed(), trace.to_jsonl()))
}

/// Support regions of the stance made of the listed footsteps.
#[pyfunction]
#[pyo3(signature = (scenario_jsonl, feet, com=None, mass=38.0))]
fn regions<'py>(
    py: Python<'py>,
    scenario_jsonl: &str,
    feet: Vec<usize>,
    com: Option<(f64, f64, f64)>,
    mass: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = scenario(scenario_jsonl)?;
    if feet.is_empty() || feet.iter().any(|&i| i >= s.footsteps.len()) {
        return Err(PyValueError::new_err("feet must index the footsteps"));
    }
    let cs = feet.iter().fold(ContactSet::new(Vec::new()), |acc, &i| acc.union(&s.foot_contacts(i)));
    let origin = centroid(&cs);
    let w = compute_cwc(&cs, origin);
    let sp = static_polygon(&w, mass);
    let com = match com {
        Some((x, y, z)) => Vec3::new(x, y, z),
        None => {
            let c = sp.chebyshev.unwrap_or_else(|| Vec2::new(origin.x, origin.y));
            Vec3::new(c.x, c.y, origin.z + s.com_height)
        }
    };
    let cone = accel_cone(&w, com);
    let d = PyDict::new(py);
    d.set_item("static_polygon", xy(&sp.polygon))?;
    d.set_item("area", sp.polygon.area())?;
    d.set_item("chebyshev_center", sp.chebyshev.map(|c| (c.x, c.y)))?;
    d.set_item("inscribed_radius", sp.inscribed_radius)?;
    d.set_item("com", (com.x, com.y, com.z))?;
    d.set_item("accel_rays", cone.rays.iter().map(|r| (r.x, r.y, r.z)).collect::<Vec<_>>())?;
    d.set_item("rest_inside", cone.interior)?;
    Ok(d)
}

/// Problems found in a trace; empty when it is clean.
#[pyfunction]
fn audit(trace_jsonl: &str) -> PyResult<Vec<String>> {
    let t = Trace::parse(trace_jsonl).map_err(value_error)?;
    Ok(audit_trace(&t).problems)
}

#[pymodule]
fn _conewalk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(staircase, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(regions, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    Ok(())
}
