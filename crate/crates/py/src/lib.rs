//! Python bindings: protocols, experiments, the simulated world, reports,
//! conformance and the wire framing.

use std::path::PathBuf;

use manipbench_core::bus::{decode_frame as decode, encode_frame as encode, Envelope};
use manipbench_core::components::{default_registry, reference_component};
use manipbench_core::config::Experiment as CoreExperiment;
use manipbench_core::conformance::{run_conformance, Endpoint};
use manipbench_core::harness::{self, MemorySink, ProtocolDef, RunOptions, TrialRecord};
use manipbench_core::sim::{attempt_grasp, GraspAttempt, Scenario, World as CoreWorld};
use manipbench_core::types::{GraspCandidate, Pose6DoF, QualityKind};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value as Json;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

/// Encodes one envelope as a length-prefixed frame.
#[pyfunction]
fn encode_frame<'py>(
    py: Python<'py>,
    id: u64,
    op: &str,
    payload: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyBytes>> {
    let env = Envelope::from_json(id, op, from_py::<Json>(payload)?).map_err(value_err)?;
    let bytes = encode(&env).map_err(value_err)?;
    Ok(PyBytes::new(py, &bytes))
}

/// Decodes the first frame in `data`; returns `(id, op, payload, bytes_used)`.
#[pyfunction]
fn decode_frame<'py>(
    py: Python<'py>,
    data: &[u8],
) -> PyResult<(u64, String, Bound<'py, PyAny>, usize)> {
    let (env, used) = decode(data).map_err(value_err)?;
    let payload = to_py(py, &env.payload_json())?;
    Ok((env.id, env.op, payload, used))
}

/// A factorial protocol definition.
#[pyclass(module = "manipbench")]
struct Protocol {
    inner: ProtocolDef,
}

#[pymethods]
impl Protocol {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Protocol {
            inner: ProtocolDef::from_json_str(text).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Protocol {
            inner: ProtocolDef::load(&path).map_err(value_err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[setter]
    fn set_master_seed(&mut self, seed: u64) {
        self.inner.master_seed = seed;
    }

    fn planned_count(&self) -> PyResult<u64> {
        self.inner.planned_count().map_err(value_err)
    }

    /// Planned trials as dicts with `trial_id`, `condition`, `rep` and `seed`.
    fn plan<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &harness::plan_trials(&self.inner).map_err(value_err)?)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(value_err)
    }
}

/// A run config with its scenario, protocol and behaviors loaded.
#[pyclass(module = "manipbench")]
struct Experiment {
    inner: CoreExperiment,
}

#[pymethods]
impl Experiment {
    #[new]
    fn new(config_path: PathBuf) -> PyResult<Self> {
        Ok(Experiment {
            inner: CoreExperiment::load(&config_path)
                .map_err(|e| PyIOError::new_err(e.to_string()))?,
        })
    }

    /// Validation findings; empty when the config is clean.
    fn validate(&self) -> Vec<String> {
        self.inner
            .validate()
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    fn protocol(&self) -> Protocol {
        Protocol {
            inner: self.inner.protocol.clone(),
        }
    }

    /// Runs the protocol in memory and returns the trial records as dicts.
    #[pyo3(signature = (seed = None, timestamps = false))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        seed: Option<u64>,
        timestamps: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let bench = self.inner.bench().map_err(value_err)?;
        let protocol = self.inner.protocol_with_seed(seed);
        let options = RunOptions {
            timestamps,
            ..RunOptions::default()
        };
        let records = py
            .detach(|| bench.run_protocol(&protocol, &mut MemorySink::default(), &options))
            .map_err(value_err)?;
        to_py(py, &records)
    }
}

/// Comparison report over trial record dicts, as a dict.
#[pyfunction]
#[pyo3(signature = (records, by = Vec::new()))]
fn compare<'py>(
    py: Python<'py>,
    records: &Bound<'py, PyAny>,
    by: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<TrialRecord> = from_py(records)?;
    to_py(py, &harness::compare(&records, &by).map_err(value_err)?)
}

/// The aligned plain-text form of a comparison report.
#[pyfunction]
#[pyo3(signature = (records, by = Vec::new()))]
fn render_report(records: &Bound<'_, PyAny>, by: Vec<String>) -> PyResult<String> {
    let records: Vec<TrialRecord> = from_py(records)?;
    Ok(harness::compare(&records, &by)
        .map_err(value_err)?
        .render_text())
}

/// Trial records read from a JSONL log.
#[pyfunction]
fn read_records<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &harness::read_records(&path).map_err(value_err)?)
}

/// The simulated world of a scenario file.
#[pyclass(module = "manipbench")]
struct World {
    inner: CoreWorld,
}

#[pymethods]
impl World {
    #[staticmethod]
    fn from_scenario(path: PathBuf) -> PyResult<Self> {
        let s = Scenario::load(&path).map_err(value_err)?;
        Ok(World {
            inner: CoreWorld::from_scenario(&s).map_err(value_err)?,
        })
    }

    fn objects(&self) -> Vec<String> {
        self.inner.objects().map(|(n, _)| n.to_owned()).collect()
    }

    #[getter]
    fn embodiment(&self) -> String {
        self.inner.embodiment.name.clone()
    }

    /// Attempts a top-down grasp; returns `(success, failure_reason)`.
    fn attempt_grasp(
        &mut self,
        x: f64,
        y: f64,
        z: f64,
        yaw: f64,
        target: &str,
    ) -> PyResult<(bool, Option<String>)> {
        let pose = Pose6DoF::top_down(x, y, z, yaw).map_err(value_err)?;
        let candidate = GraspCandidate::new(pose, None, QualityKind::None).map_err(value_err)?;
        let attempt = GraspAttempt {
            candidate,
            embodiment: self.inner.embodiment.name.clone(),
            target: target.to_owned(),
        };
        let r = attempt_grasp(&mut self.inner, &attempt).map_err(value_err)?;
        Ok((r.success, r.failure_reason.map(str::to_owned)))
    }

    fn reset(&mut self) {
        self.inner.reset_objects();
        self.inner.reset_apparatus();
    }

    fn at_nominal(&self) -> bool {
        self.inner.at_nominal()
    }
}

/// Descriptors of the reference components.
#[pyfunction]
fn reference_components(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &default_registry().descriptors())
}

/// Runs the conformance suite on a reference component (`component_id`) or
/// on a socket endpoint described by `descriptor`. Returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (component_id = None, endpoint = None, descriptor = None))]
fn conformance(
    py: Python<'_>,
    component_id: Option<&str>,
    endpoint: Option<String>,
    descriptor: Option<&Bound<'_, PyAny>>,
) -> PyResult<(bool, String)> {
    let (d, target) = match (component_id, endpoint) {
        (Some(id), None) => {
            let c = reference_component(id)
                .ok_or_else(|| value_err(format!("unknown component `{id}`")))?;
            (c.descriptor().clone(), Endpoint::InProcess(c))
        }
        (None, Some(ep)) => {
            let d = descriptor.ok_or_else(|| value_err("an endpoint needs its descriptor"))?;
            (from_py(d)?, Endpoint::Socket(ep))
        }
        _ => return Err(value_err("give exactly one of component_id or endpoint")),
    };
    let report = py.detach(|| run_conformance(&d, &target));
    Ok((report.passed(), report.to_string()))
}

#[pymodule]
fn manipbench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Protocol>()?;
    m.add_class::<Experiment>()?;
    m.add_class::<World>()?;
    m.add_function(wrap_pyfunction!(encode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(decode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    m.add_function(wrap_pyfunction!(read_records, m)?)?;
    m.add_function(wrap_pyfunction!(reference_components, m)?)?;
    m.add_function(wrap_pyfunction!(conformance, m)?)?;
    Ok(())
}
