//! Python bindings. Configs cross the boundary as JSON strings in the same
//! schema the CLI reads.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use entroflux::cli::{self, ModelChoice};
use entroflux::config::{self, RunConfig};
use entroflux::mc::substream;
use entroflux::thermo::{entropy_curve, spec_grid, CurveKind};

fn py_err(e: entroflux::Error) -> PyErr {
    match e {
        entroflux::Error::Config(_) | entroflux::Error::InvalidSpec(_) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse(config: &str) -> PyResult<RunConfig> {
    if config::PRESETS.contains(&config) {
        config::preset(config).map_err(py_err)
    } else {
        RunConfig::from_json(config).map_err(py_err)
    }
}

/// Names of the built-in presets.
#[pyfunction]
fn presets() -> Vec<&'static str> {
    config::PRESETS.to_vec()
}

/// Full JSON for a preset.
#[pyfunction]
fn preset_json(name: &str) -> PyResult<String> {
    Ok(config::preset(name).map_err(py_err)?.to_json())
}

/// Ideal total-entropy curve of the configured mixture and process.
#[pyfunction]
fn ideal_entropy_curve<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse(config)?;
    let p_d = cfg.data.mixture().map_err(py_err)?;
    let grid = spec_grid(&cfg.process, cfg.curve.grid_points);
    let c = entropy_curve(
        CurveKind::IdealTot,
        &p_d,
        &cfg.process,
        None,
        &grid,
        cfg.curve.samples,
        &mut substream(cfg.seed, 12),
    )
    .map_err(py_err)?;
    let total = c.total();
    let d = PyDict::new(py);
    d.set_item("s", c.s_grid)?;
    d.set_item("rate", c.rate)?;
    d.set_item("cumulative", c.cumulative)?;
    d.set_item("total", total.value)?;
    d.set_item("total_stderr", total.std_err)?;
    Ok(d)
}

/// Lattice refinement study; returns per-level totals and the observed order.
#[pyfunction]
fn lattice<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse(config)?;
    let s = cli::lattice_experiment(&cfg.lattice).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("ell", s.levels.iter().map(|l| l.ell).collect::<Vec<_>>())?;
    d.set_item("stot", s.levels.iter().map(|l| l.stot).collect::<Vec<_>>())?;
    d.set_item("continuum", s.levels.iter().map(|l| l.continuum).collect::<Vec<_>>())?;
    d.set_item("observed_order", s.observed_order)?;
    Ok(d)
}

/// Samples from the reverse SDE (or PF-ODE) driven by a checkpoint, or by
/// the exact model when `checkpoint` is None. Rows are points.
#[pyfunction]
#[pyo3(signature = (config, n, checkpoint=None, ode=false))]
fn sample(config: &str, n: usize, checkpoint: Option<String>, ode: bool) -> PyResult<Vec<Vec<f64>>> {
    let mut cfg = parse(config)?;
    cfg.samples = n;
    let model = checkpoint.map_or(ModelChoice::Exact, |p| ModelChoice::Checkpoint(p.into()));
    let p_d = cfg.data.mixture().map_err(py_err)?;
    let m = cli::load_model(&model, &p_d, &cfg.process).map_err(py_err)?;
    let mut rng = substream(cfg.seed, 30);
    let pts = if ode {
        entroflux::generate::pf_ode_sample(m.as_model(), &cfg.process, &cfg.sampler, n, &mut rng)
    } else {
        entroflux::generate::reverse_sde_sample(m.as_model(), &cfg.process, &cfg.sampler, n, &mut rng)
    }
    .map_err(py_err)?;
    Ok(pts.to_rows())
}

#[pymodule]
fn pyentroflux(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(preset_json, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_entropy_curve, m)?)?;
    m.add_function(wrap_pyfunction!(lattice, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}
