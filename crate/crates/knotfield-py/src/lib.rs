//! Python bindings: a `Knot` class wrapping the curve plus the field,
//! critical-point, flow, and report pipelines.
//!
//! Usage from Python:
//!
//!     import knotfield_py as kf
//!     trefoil = kf.Knot.torus(2, 3, 2.0, 1.0)
//!     sample = trefoil.eval(0.0, 0.0, 0.5)
//!     report = trefoil.report()
//!     assert report["bound_ok"]

use knotfield::critical::find_critical_points;
use knotfield::field::{field_sample, QuadratureConfig};
use knotfield::flow::descending_flow_census;
use knotfield::formats::{parse_knot_json, report_json, scan_export_json, RunMeta};
use knotfield::knot::{KnotCurve, TubeSpec};
use knotfield::pipeline::{run_report, PipelineConfig};
use knotfield::{oracle, Vec3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use std::sync::Arc;

fn value_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    match v {
        serde_json::Value::Null => py.None().into_py_any(py),
        serde_json::Value::Bool(b) => b.into_py_any(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        serde_json::Value::String(s) => s.into_py_any(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, value_to_py(py, val)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn json_str_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    value_to_py(py, &value)
}

fn val_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Closed-form potential of the unit circle on its axis.
#[pyfunction]
fn circle_axis_potential(z: f64) -> f64 {
    oracle::circle_axis_potential(z)
}

/// A charged knot: geometry plus the electrostatic pipelines.
#[pyclass]
struct Knot {
    inner: Arc<KnotCurve>,
}

#[pymethods]
impl Knot {
    /// Torus knot (p, q) on radii R > r; (1, 0) is the round unknot.
    #[staticmethod]
    fn torus(p: i64, q: i64, big_r: f64, small_r: f64) -> PyResult<Self> {
        Ok(Knot { inner: Arc::new(KnotCurve::torus(p, q, big_r, small_r).map_err(val_err)?) })
    }

    /// Curve from Fourier harmonics: rows [ax, bx, ay, by, az, bz].
    #[staticmethod]
    fn fourier(harmonics: Vec<[f64; 6]>) -> PyResult<Self> {
        Ok(Knot { inner: Arc::new(KnotCurve::fourier(harmonics).map_err(val_err)?) })
    }

    /// Closed periodic cubic spline through sample points.
    #[staticmethod]
    fn from_samples(points: Vec<[f64; 3]>) -> PyResult<Self> {
        Ok(Knot { inner: Arc::new(KnotCurve::from_samples(points).map_err(val_err)?) })
    }

    /// Load from a knot definition JSON string.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Knot { inner: Arc::new(parse_knot_json(text).map_err(val_err)?) })
    }

    /// Load from a knot definition file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(val_err)?;
        Self::from_json(&text)
    }

    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn arc_length(&self) -> f64 {
        self.inner.arc_length()
    }

    fn min_self_distance(&self) -> f64 {
        self.inner.min_self_distance()
    }

    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn search_region(&self) -> ([f64; 3], [f64; 3]) {
        let r = self.inner.search_region();
        ([r.min.x, r.min.y, r.min.z], [r.max.x, r.max.y, r.max.z])
    }

    /// Distance from a point to the curve.
    fn distance_to(&self, x: f64, y: f64, z: f64) -> f64 {
        self.inner.distance_to(&Vec3::new(x, y, z)).0
    }

    /// Transverse crossing count of the projection along `direction`
    /// (default z axis); an upper bound for the diagram crossing number.
    #[pyo3(signature = (direction=None))]
    fn crossing_upper_bound(&self, direction: Option<[f64; 3]>) -> PyResult<usize> {
        let d = direction.map_or(Vec3::z(), |d| Vec3::new(d[0], d[1], d[2]));
        self.inner.crossing_upper_bound(&d).map_err(val_err)
    }

    /// Potential, gradient, and Hessian at a point, as a dict.
    fn eval(&self, py: Python<'_>, x: f64, y: f64, z: f64) -> PyResult<Py<PyAny>> {
        let curve = Arc::clone(&self.inner);
        let sample = py
            .detach(|| field_sample(&curve, &Vec3::new(x, y, z), &QuadratureConfig::default()))
            .map_err(val_err)?;
        json_str_to_py(py, &knotfield::formats::field_sample_json(&sample))
    }

    /// Find and classify the finite critical points; list of dicts.
    #[pyo3(signature = (grid=None))]
    fn critical_points(&self, py: Python<'_>, grid: Option<usize>) -> PyResult<Py<PyAny>> {
        let curve = Arc::clone(&self.inner);
        let scan = py
            .detach(|| {
                let mut cfg = knotfield::critical::SearchConfig::default();
                if let Some(g) = grid {
                    cfg.n_grid = g;
                }
                let tube = TubeSpec::for_curve(&curve);
                find_critical_points(&curve, &cfg, &tube)
            })
            .map_err(run_err)?;
        json_str_to_py(py, &scan_export_json(&scan.points))
    }

    /// Full pipeline: scan, separatrix flow, invariants, bound verdict.
    #[pyo3(signature = (grid=None, seed=0))]
    fn report(&self, py: Python<'_>, grid: Option<usize>, seed: u64) -> PyResult<Py<PyAny>> {
        let curve = Arc::clone(&self.inner);
        let text = py
            .detach(|| {
                let mut cfg = PipelineConfig { seed, ..Default::default() };
                if let Some(g) = grid {
                    cfg.search.n_grid = g;
                }
                run_report(&curve, &cfg).map(|bundle| {
                    let meta =
                        RunMeta::new(&curve, &cfg.search, &cfg.flow, bundle.tube.rho, Some(seed));
                    report_json(&bundle, meta)
                })
            })
            .map_err(run_err)?;
        json_str_to_py(py, &text)
    }

    /// Backward-flow census from random starts; dict of outcome counts.
    #[pyo3(signature = (n=200, seed=0, grid=None))]
    fn census(&self, py: Python<'_>, n: usize, seed: u64, grid: Option<usize>) -> PyResult<Py<PyAny>> {
        let curve = Arc::clone(&self.inner);
        let stats = py
            .detach(|| -> Result<knotfield::flow::CensusStats, String> {
                let mut cfg = knotfield::critical::SearchConfig::default();
                if let Some(g) = grid {
                    cfg.n_grid = g;
                }
                let tube = TubeSpec::for_curve(&curve);
                let scan = find_critical_points(&curve, &cfg, &tube).map_err(|e| e.to_string())?;
                descending_flow_census(
                    &curve,
                    n,
                    seed,
                    &knotfield::flow::FlowConfig::default(),
                    &scan.points,
                    &tube,
                    &[],
                )
                .map_err(|e| e.to_string())
            })
            .map_err(run_err)?;
        let dict = PyDict::new(py);
        dict.set_item("sampled", stats.sampled)?;
        dict.set_item("far_field", stats.far_field)?;
        dict.set_item("near_critical", stats.near_critical)?;
        dict.set_item("max_steps", stats.max_steps)?;
        dict.set_item("knot_tube", stats.knot_tube)?;
        dict.into_py_any(py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Knot(label={:?}, arc_length={:.6}, d_min={:.6})",
            self.inner.label(),
            self.inner.arc_length(),
            self.inner.min_self_distance()
        )
    }
}

#[pymodule]
fn knotfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Knot>()?;
    m.add_function(wrap_pyfunction!(circle_axis_potential, m)?)?;
    Ok(())
}
