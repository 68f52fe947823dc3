//! Python bindings: load transition systems, run invariant inference,
//! verify candidate invariants, and round-trip formulas.

use std::sync::Arc;
use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qpdr::config::{Config, Mode};
use qpdr::events::{EngineStats, EventLog};
use qpdr::pdr::{validate_trace, verify_invariant, Engine, RunResult};
use qpdr::syntax::{parse_formula, parse_system, print_formula};

/// A parsed transition system.
#[pyclass(name = "TransitionSystem")]
struct PySystem {
    sys: Arc<qpdr::syntax::TransitionSystem>,
}

fn mode_from_str(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(PyValueError::new_err)
}

#[pymethods]
impl PySystem {
    /// Parse a system from `.fol` text.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<PySystem> {
        let sys = parse_system(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PySystem { sys: Arc::new(sys) })
    }

    /// Parse a system from a `.fol` file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<PySystem> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        let mut sys = parse_system(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        sys.name = std::path::Path::new(path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned());
        Ok(PySystem { sys: Arc::new(sys) })
    }

    #[getter]
    fn sorts(&self) -> Vec<String> {
        self.sys.sig.sorts().map(|(_, n)| n.to_string()).collect()
    }

    #[getter]
    fn transitions(&self) -> Vec<String> {
        self.sys.transitions.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Evaluate one formula against the .fol grammar and return its
    /// canonical printing.
    fn canonical_formula(&self, text: &str) -> PyResult<String> {
        let f = parse_formula(text, &self.sys.sig)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(print_formula(&f, &self.sys.sig))
    }

    /// Run invariant inference. Returns a dict with `status`
    /// ("invariant" | "unsafe" | "unknown"), `invariant` (list of formula
    /// strings), `trace` (list of state strings), and `stats`.
    #[pyo3(signature = (mode="fol", bound=3, threads=2, seed=0, timeout_s=600, sequential=false, max_depth=6))]
    #[allow(clippy::too_many_arguments)]
    fn infer(
        &self,
        py: Python<'_>,
        mode: &str,
        bound: usize,
        threads: usize,
        seed: u64,
        timeout_s: u64,
        sequential: bool,
        max_depth: usize,
    ) -> PyResult<Py<pyo3::types::PyDict>> {
        let cfg = Config {
            mode: mode_from_str(mode)?,
            bound,
            threads,
            seed,
            sequential,
            max_depth,
            timeout: (timeout_s > 0).then(|| Duration::from_secs(timeout_s)),
            ..Config::default()
        };
        let engine = Engine::new(self.sys.clone(), cfg, Arc::new(EventLog::disabled()))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let result = py.detach(|| engine.run());
        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("lemmas", EngineStats::get(&engine.stats.lemmas_learned))?;
        dict.set_item("ig_queries", EngineStats::get(&engine.stats.ig_queries))?;
        let out = pyo3::types::PyDict::new(py);
        out.set_item("stats", dict)?;
        match result {
            RunResult::Invariant(fs) => {
                out.set_item("status", "invariant")?;
                let printed: Vec<String> =
                    fs.iter().map(|f| print_formula(f, &self.sys.sig)).collect();
                out.set_item("invariant", printed)?;
            }
            RunResult::Unsafe(trace) => {
                out.set_item("status", "unsafe")?;
                validate_trace(&self.sys, &trace)
                    .map_err(|e| PyRuntimeError::new_err(format!("invalid trace: {e}")))?;
                let printed: Vec<String> = trace.iter().map(|m| m.to_string()).collect();
                out.set_item("trace", printed)?;
            }
            RunResult::Unknown(reason) => {
                out.set_item("status", "unknown")?;
                out.set_item("reason", reason)?;
            }
        }
        Ok(out.unbind())
    }

    /// Check the invariant conditions (initiation, consecution, safety)
    /// for the given formulas at a per-sort bound. Returns None on
    /// success, or a failure description.
    #[pyo3(signature = (formulas, bound=3))]
    fn verify(&self, py: Python<'_>, formulas: Vec<String>, bound: usize) -> PyResult<Option<String>> {
        let parsed = formulas
            .iter()
            .map(|t| parse_formula(t, &self.sys.sig))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let sys = self.sys.clone();
        let outcome = py.detach(move || verify_invariant(&sys, &parsed, bound, Some(2_000_000)));
        Ok(outcome.err())
    }
}

/// Canonical round-trip of a standalone formula over a fresh signature
/// parsed from `.fol` declarations.
#[pyfunction]
fn canonical_formula(declarations: &str, formula: &str) -> PyResult<String> {
    let sys = parse_system(declarations).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let f =
        parse_formula(formula, &sys.sig).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(print_formula(&f, &sys.sig))
}

#[pymodule]
fn qpdr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(canonical_formula, m)?)?;
    Ok(())
}
