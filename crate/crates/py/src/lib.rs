//! Python bindings: scenarios, exploration, replay, traces and native stress.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use subjhist::explore::{self, Reduction};
use subjhist::native::{self, NativeObject};
use subjhist::pcm;
use subjhist::report::ExplorationReport;
use subjhist::scenarios::{self, format_outcome, ScenarioParams};
use subjhist::trace;
use subjhist::vm::{self, Status};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn outcome_strings(o: &[scenarios::OutVal]) -> Vec<String> {
    o.iter().map(|v| v.to_string()).collect()
}

#[pyclass(name = "Bounds", eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyBounds(vm::Bounds);

#[pymethods]
impl PyBounds {
    #[new]
    #[pyo3(signature = (max_steps = None, retry_bound = None, yield_count = None))]
    fn new(max_steps: Option<usize>, retry_bound: Option<u32>, yield_count: Option<u32>) -> Self {
        let d = vm::Bounds::default();
        PyBounds(vm::Bounds {
            max_steps: max_steps.unwrap_or(d.max_steps),
            retry_bound: retry_bound.unwrap_or(d.retry_bound),
            yield_count: yield_count.unwrap_or(d.yield_count),
        })
    }

    #[getter]
    fn max_steps(&self) -> usize {
        self.0.max_steps
    }

    #[getter]
    fn retry_bound(&self) -> u32 {
        self.0.retry_bound
    }

    #[getter]
    fn yield_count(&self) -> u32 {
        self.0.yield_count
    }

    fn __repr__(&self) -> String {
        format!(
            "Bounds(max_steps={}, retry_bound={}, yield_count={})",
            self.0.max_steps, self.0.retry_bound, self.0.yield_count
        )
    }
}

fn bounds_or_default(b: Option<PyRef<'_, PyBounds>>) -> vm::Bounds {
    b.map(|b| b.0).unwrap_or_default()
}

#[pyclass(name = "Scenario", eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyScenario(scenarios::Scenario);

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (name, n = None, k = None, vs1 = None, vs2 = None))]
    fn new(
        name: &str,
        n: Option<usize>,
        k: Option<usize>,
        vs1: Option<Vec<i64>>,
        vs2: Option<Vec<i64>>,
    ) -> PyResult<Self> {
        let p = ScenarioParams { n, k, vs1, vs2 };
        scenarios::Scenario::from_name(name, &p)
            .map(PyScenario)
            .map_err(value_error)
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    #[getter]
    fn params(&self) -> BTreeMap<&'static str, String> {
        self.0.params().into_iter().collect()
    }

    fn __repr__(&self) -> String {
        let p: Vec<String> = self
            .0
            .params()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("Scenario({} {})", self.0.name(), p.join(" "))
    }
}

#[pyclass(name = "Report", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyReport(ExplorationReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn passed(&self) -> bool {
        self.0.passed()
    }

    #[getter]
    fn executions(&self) -> usize {
        self.0.executions
    }

    #[getter]
    fn complete(&self) -> usize {
        self.0.complete
    }

    #[getter]
    fn pruned(&self) -> usize {
        self.0.pruned
    }

    #[getter]
    fn violation_count(&self) -> usize {
        self.0.violation_count
    }

    /// `[(outcome, count)]`, each outcome a tuple of rendered values.
    #[getter]
    fn outcomes(&self) -> Vec<(Vec<String>, usize)> {
        self.0
            .outcomes
            .iter()
            .map(|o| (outcome_strings(&o.tuple), o.count))
            .collect()
    }

    /// `[(clause, detail, step, schedule)]`.
    #[getter]
    fn violations(&self) -> Vec<(String, String, usize, Vec<usize>)> {
        self.0
            .violations
            .iter()
            .map(|v| {
                (
                    v.clause.clone(),
                    v.detail.clone(),
                    v.step,
                    v.schedule.clone(),
                )
            })
            .collect()
    }

    /// `{name: (outcome, schedule)}`.
    #[getter]
    fn witnesses(&self) -> BTreeMap<String, (Vec<String>, Vec<usize>)> {
        self.0
            .witnesses
            .iter()
            .map(|w| {
                (
                    w.name.clone(),
                    (outcome_strings(&w.outcome), w.schedule.clone()),
                )
            })
            .collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("report serializes")
    }

    fn render(&self) -> String {
        self.0.render()
    }

    fn __repr__(&self) -> String {
        format!(
            "Report({} executions={} violations={})",
            self.0.scenario, self.0.executions, self.0.violation_count
        )
    }
}

/// A scenario's step machine, driven one atomic step at a time.
#[pyclass(name = "World", skip_from_py_object)]
struct PyWorld {
    scenario: scenarios::Scenario,
    world: vm::World,
}

#[pymethods]
impl PyWorld {
    #[new]
    #[pyo3(signature = (scenario, bounds = None))]
    fn new(scenario: PyRef<'_, PyScenario>, bounds: Option<PyRef<'_, PyBounds>>) -> Self {
        let s = scenario.0.clone();
        let world = s.compile(bounds_or_default(bounds));
        PyWorld { scenario: s, world }
    }

    fn runnable(&self) -> Vec<usize> {
        self.world.runnable()
    }

    /// Executes one step of `thread` and returns its trace line.
    fn step(&mut self, thread: usize) -> PyResult<String> {
        self.world
            .step(thread)
            .map(|l| l.to_string())
            .map_err(value_error)
    }

    fn is_terminal(&self) -> bool {
        self.world.is_terminal()
    }

    /// One of `running`, `complete`, `pruned`, `aborted`.
    fn status(&self) -> &'static str {
        match self.world.status() {
            Status::Running => "running",
            Status::Complete => "complete",
            Status::Pruned(_) => "pruned",
            Status::Aborted(_) => "aborted",
        }
    }

    fn outcome(&self) -> Vec<String> {
        outcome_strings(&self.scenario.outcome(&self.world))
    }

    fn outcome_text(&self) -> String {
        format_outcome(&self.scenario.outcome(&self.world))
    }

    fn log(&self) -> Vec<String> {
        self.world.log().iter().map(|l| l.to_string()).collect()
    }

    /// `[(step, clause, detail)]` from step, call and final checks.
    fn violations(&self) -> Vec<(usize, String, String)> {
        let mut v: Vec<_> = self
            .world
            .violations()
            .map(|s| (s.step, s.violation.clause, s.violation.detail))
            .collect();
        if *self.world.status() == Status::Complete {
            v.extend(
                self.scenario
                    .final_check(&self.world)
                    .into_iter()
                    .map(|x| (self.world.steps(), x.clause, x.detail)),
            );
        }
        v
    }
}

#[pyclass(name = "Trace", skip_from_py_object)]
struct PyTrace(trace::Trace);

#[pymethods]
impl PyTrace {
    #[staticmethod]
    #[pyo3(signature = (scenario, schedule, bounds = None, seed = None))]
    fn record(
        scenario: PyRef<'_, PyScenario>,
        schedule: Vec<usize>,
        bounds: Option<PyRef<'_, PyBounds>>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        trace::Trace::record(&scenario.0, bounds_or_default(bounds), &schedule, seed)
            .map(PyTrace)
            .map_err(value_error)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        trace::Trace::parse(text).map(PyTrace).map_err(value_error)
    }

    fn format(&self) -> String {
        self.0.format()
    }

    fn schedule(&self) -> Vec<usize> {
        self.0.schedule()
    }

    fn replay(&self) -> PyResult<PyReport> {
        self.0
            .replay()
            .map(|(r, _)| PyReport(r))
            .map_err(value_error)
    }
}

/// Registered scenarios as `(name, params, assertion)`.
#[pyfunction]
fn scenario_registry() -> Vec<(&'static str, &'static str, &'static str)> {
    scenarios::registry()
        .into_iter()
        .map(|i| (i.name, i.params, i.assertion))
        .collect()
}

#[pyfunction]
#[pyo3(signature = (scenario, bounds = None, reduction = "auto"))]
fn explore_exhaustive(
    py: Python<'_>,
    scenario: PyRef<'_, PyScenario>,
    bounds: Option<PyRef<'_, PyBounds>>,
    reduction: &str,
) -> PyResult<PyReport> {
    let reduction = match reduction {
        "auto" => Reduction::Auto,
        "none" => Reduction::None,
        "state-cache" => Reduction::StateCache,
        other => return Err(value_error(format!("unknown reduction `{other}`"))),
    };
    let (s, b) = (scenario.0.clone(), bounds_or_default(bounds));
    py.detach(|| explore::explore_exhaustive_with(&s, b, reduction))
        .map(PyReport)
        .map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (scenario, runs, seed, bounds = None))]
fn run_random(
    py: Python<'_>,
    scenario: PyRef<'_, PyScenario>,
    runs: usize,
    seed: u64,
    bounds: Option<PyRef<'_, PyBounds>>,
) -> PyReport {
    let (s, b) = (scenario.0.clone(), bounds_or_default(bounds));
    PyReport(py.detach(|| explore::run_random(&s, runs, seed, b)))
}

#[pyfunction]
#[pyo3(signature = (scenario, schedule, bounds = None))]
fn replay(
    scenario: PyRef<'_, PyScenario>,
    schedule: Vec<usize>,
    bounds: Option<PyRef<'_, PyBounds>>,
) -> PyResult<PyReport> {
    explore::replay_trace(&scenario.0, bounds_or_default(bounds), &schedule)
        .map(PyReport)
        .map_err(value_error)
}

/// Runs the lock-free object on real threads; returns `(passed, counters, failures)`.
#[pyfunction]
fn native_stress(
    py: Python<'_>,
    object: &str,
    threads: usize,
    ops: usize,
    seed: u64,
) -> PyResult<(bool, BTreeMap<String, u64>, Vec<String>)> {
    let object = match object {
        "exchanger" => NativeObject::Exchanger,
        "network" => NativeObject::Network,
        other => return Err(value_error(format!("unknown native object `{other}`"))),
    };
    if threads == 0 {
        return Err(value_error("threads must be at least 1"));
    }
    let r = py.detach(|| native::run_native_stress(object, threads, ops, seed));
    Ok((r.passed(), r.counters.clone(), r.failures.clone()))
}

/// Partner timestamp of an exchange.
#[pyfunction]
fn twin(t: u64) -> PyResult<u64> {
    pcm::twin(t).map_err(value_error)
}

#[pymodule]
fn subjhist_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBounds>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyWorld>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(scenario_registry, m)?)?;
    m.add_function(wrap_pyfunction!(explore_exhaustive, m)?)?;
    m.add_function(wrap_pyfunction!(run_random, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(native_stress, m)?)?;
    m.add_function(wrap_pyfunction!(twin, m)?)?;
    Ok(())
}
