//! Python bindings. Moment states cross the boundary as `(psi0, psi1_x, psi1_y)`
//! tuples and fields as lists of such tuples in node order (x fastest).

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use m1_mcl::low_order;
use m1_mcl::m1;
use m1_mcl::output;
use m1_mcl::scenarios::{Scenario, ScenarioKind, SourceKind};
use m1_mcl::time_loop::{self, RunState, Scheme, SteadyOptions, TransientOptions};
use m1_mcl::{M1Error, Mesh, MomentState};

type State = (f64, f64, f64);

fn py_err(e: M1Error) -> PyErr {
    match e {
        M1Error::Domain(_) | M1Error::Config(_) | M1Error::NotRealizable(_) => PyValueError::new_err(e.to_string()),
        M1Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_state(s: State) -> MomentState<2> {
    MomentState::new(s.0, [s.1, s.2])
}

fn from_state(u: &MomentState<2>) -> State {
    (u.psi0, u.psi1[0], u.psi1[1])
}

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    s.parse().map_err(py_err)
}

/// Eddington factor `χ(f)` for a flux ratio `f ∈ [0, 1]`.
#[pyfunction]
fn eddington_factor(f: f64) -> PyResult<f64> {
    m1::eddington_factor(f).map_err(py_err)
}

/// Eddington tensor `D(v)` for a normalized flux `v = ψ¹/ψ⁰`.
#[pyfunction]
fn eddington_tensor(v: (f64, f64)) -> PyResult<[[f64; 2]; 2]> {
    m1::eddington_tensor(&[v.0, v.1]).map_err(py_err)
}

/// Physical flux, one state-shaped row `(ψ¹_k, ψ²_kx, ψ²_ky)` per direction `k`.
#[pyfunction]
fn flux(u: State) -> PyResult<[State; 2]> {
    let f = m1::flux(&to_state(u)).map_err(py_err)?;
    Ok([0, 1].map(|k| from_state(&f.row(k))))
}

#[pyfunction]
#[pyo3(signature = (u, strict = false))]
fn is_realizable(u: State, strict: bool) -> bool {
    to_state(u).is_realizable(strict)
}

#[pyfunction]
fn flux_ratio(u: State) -> f64 {
    to_state(u).flux_ratio()
}

/// Low-order bar state `ū_ij` for the edge coefficient `c_ij` and viscosity `d_ij`.
#[pyfunction]
fn bar_state(ui: State, uj: State, c_ij: (f64, f64), d_ij: f64) -> PyResult<State> {
    low_order::bar_state(&to_state(ui), &to_state(uj), &[c_ij.0, c_ij.1], d_ij)
        .map(|b| from_state(&b))
        .map_err(py_err)
}

#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    ScenarioKind::NAMES.to_vec()
}

/// Outcome of a transient or steady run.
#[pyclass(frozen, get_all, module = "m1_mcl_py")]
pub struct RunResult {
    time: f64,
    steps: usize,
    dt: f64,
    fields: Vec<State>,
    converged: bool,
    residual_history: Vec<(usize, f64, f64)>,
    fields_checked: usize,
    min_psi0: f64,
    max_flux_ratio: f64,
}

impl From<RunState<2>> for RunResult {
    fn from(st: RunState<2>) -> Self {
        Self {
            time: st.t,
            steps: st.step,
            dt: st.dt,
            fields: st.u.iter().map(from_state).collect(),
            converged: st.converged,
            residual_history: st.residual_history.iter().map(|r| (r.step, r.pseudo_time, r.residual_l2)).collect(),
            fields_checked: st.stats.fields_checked,
            min_psi0: st.stats.min_psi0,
            max_flux_ratio: st.stats.max_flux_ratio,
        }
    }
}

#[pymethods]
impl RunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(time={}, steps={}, converged={}, min_psi0={:e}, max_flux_ratio={})",
            self.time, self.steps, self.converged, self.min_psi0, self.max_flux_ratio
        )
    }
}

/// A benchmark scenario discretized on a uniform grid of `nodes × nodes` points.
#[pyclass(frozen, module = "m1_mcl_py")]
pub struct Simulation {
    scenario: Scenario,
    nodes: usize,
    inner: time_loop::Simulation<2>,
}

impl Simulation {
    fn field(&self, u: Vec<State>) -> PyResult<Vec<MomentState<2>>> {
        if u.len() != self.inner.mesh.n_nodes() {
            return Err(PyValueError::new_err(format!(
                "field has {} entries, mesh has {} nodes",
                u.len(),
                self.inner.mesh.n_nodes()
            )));
        }
        Ok(u.into_iter().map(to_state).collect())
    }

    fn start(&self, u0: Option<Vec<State>>) -> PyResult<Vec<MomentState<2>>> {
        match u0 {
            Some(u) => self.field(u),
            None => Ok(self.inner.interpolate(|x| self.scenario.initial_state(x))),
        }
    }
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (scenario, nodes = 64, source = "isotropic", params = None))]
    fn new(scenario: &str, nodes: usize, source: &str, params: Option<HashMap<String, f64>>) -> PyResult<Self> {
        let source: SourceKind = source.parse().map_err(py_err)?;
        let mut sc = Scenario::from_kind(ScenarioKind::parse(scenario, source).map_err(py_err)?);
        let mut params: Vec<_> = params.unwrap_or_default().into_iter().collect();
        params.sort_by(|a, b| a.0.cmp(&b.0));
        for (key, value) in params {
            sc.set_param(&key, value).map_err(py_err)?;
        }
        sc.validate().map_err(py_err)?;
        let mesh = Mesh::with_nodes(sc.lower, sc.upper, [nodes, nodes]).map_err(py_err)?;
        let inner = time_loop::Simulation::new(mesh, &sc).map_err(py_err)?;
        Ok(Self { scenario: sc, nodes, inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.scenario.label()
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.nodes
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.mesh.n_nodes()
    }

    #[getter]
    fn default_cfl(&self) -> f64 {
        self.scenario.cfl
    }

    #[getter]
    fn default_t_final(&self) -> f64 {
        self.scenario.t_final
    }

    /// Node coordinates in field order.
    fn coordinates(&self) -> Vec<(f64, f64)> {
        (0..self.inner.mesh.n_nodes())
            .map(|i| {
                let x = self.inner.mesh.node_coords(i);
                (x[0], x[1])
            })
            .collect()
    }

    fn initial_state(&self) -> Vec<State> {
        self.inner.interpolate(|x| self.scenario.initial_state(x)).iter().map(from_state).collect()
    }

    /// Lumped-mass integral of each moment.
    fn total_mass(&self, u: Vec<State>) -> PyResult<State> {
        Ok(from_state(&self.inner.total_mass(&self.field(u)?)))
    }

    /// Largest stable step for the given CFL number.
    fn time_step(&self, cfl: f64) -> PyResult<f64> {
        time_loop::compute_dt(&self.inner.coeffs, cfl).map_err(py_err)
    }

    #[pyo3(signature = (t_final = None, cfl = None, scheme = "mcl", u0 = None))]
    fn run_transient(
        &self,
        py: Python<'_>,
        t_final: Option<f64>,
        cfl: Option<f64>,
        scheme: &str,
        u0: Option<Vec<State>>,
    ) -> PyResult<RunResult> {
        let opts = TransientOptions {
            t_final: t_final.unwrap_or(self.scenario.t_final),
            cfl: cfl.unwrap_or(self.scenario.cfl),
            scheme: parse_scheme(scheme)?,
        };
        let u0 = self.start(u0)?;
        py.detach(|| self.inner.run_transient(u0, &opts, |_| Ok(())))
            .map(RunResult::from)
            .map_err(py_err)
    }

    #[pyo3(signature = (cfl = None, tol = 1e-8, max_steps = 200_000, scheme = "mcl", u0 = None))]
    fn run_steady(
        &self,
        py: Python<'_>,
        cfl: Option<f64>,
        tol: f64,
        max_steps: usize,
        scheme: &str,
        u0: Option<Vec<State>>,
    ) -> PyResult<RunResult> {
        if !self.scenario.has_forcing() {
            return Err(PyValueError::new_err(format!(
                "scenario {} has no source, so there is no steady state to iterate to",
                self.scenario.label()
            )));
        }
        let opts = SteadyOptions {
            cfl: cfl.unwrap_or(self.scenario.steady_cfl),
            tol,
            max_steps,
            scheme: parse_scheme(scheme)?,
            ..SteadyOptions::default()
        };
        let u0 = self.start(u0)?;
        py.detach(|| self.inner.run_steady(u0, &opts, |_| Ok(())))
            .map(RunResult::from)
            .map_err(py_err)
    }

    /// Radial averages `(r, psi0, f)` about the domain center; `width` defaults
    /// to the grid spacing.
    #[pyo3(signature = (u, width = None))]
    fn radial_profile(&self, u: Vec<State>, width: Option<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
        let u = self.field(u)?;
        let (lo, hi) = (self.scenario.lower, self.scenario.upper);
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let width = width.unwrap_or_else(|| self.inner.mesh.min_spacing());
        Ok(output::radial_profile(&self.inner.mesh, &u, center, width)
            .into_iter()
            .map(|b| (b.r, b.psi0, b.flux_ratio))
            .collect())
    }

    /// Legacy ASCII VTK document for a field.
    #[pyo3(signature = (u, title = "m1"))]
    fn to_vtk(&self, u: Vec<State>, title: &str) -> PyResult<String> {
        output::render_vtk(&self.inner.mesh, &self.field(u)?, title).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Simulation({:?}, nodes={})", self.scenario.label(), self.nodes)
    }
}

#[pymodule]
fn m1_mcl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(eddington_factor, m)?)?;
    m.add_function(wrap_pyfunction!(eddington_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(flux, m)?)?;
    m.add_function(wrap_pyfunction!(is_realizable, m)?)?;
    m.add_function(wrap_pyfunction!(flux_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(bar_state, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_class::<Simulation>()?;
    m.add_class::<RunResult>()?;
    Ok(())
}
