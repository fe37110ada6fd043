//! Python bindings: `import clocknet`.
//!
//! String arguments name enum variants as they appear in scenario files
//! (`"x"`, `"total_over_m"`, ...). Records come back as plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use clocknet_core::epr::{self, CouplingRates, Eavesdropper, ProtocolSettings, RoundLimit};
use clocknet_core::network::{self, TransmissionConvention};
use clocknet_core::{optics, scenario, spin};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Parses a snake_case variant name through the type's serde form.
fn variant<T: DeserializeOwned>(name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(err)
}

/// Converts any serializable value into native Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "CollectiveSpin", module = "clocknet", frozen)]
struct PySpin(spin::CollectiveSpin);

#[pymethods]
impl PySpin {
    /// Coherent spin state of `n_atoms` along +x.
    #[staticmethod]
    fn css(n_atoms: u64) -> PyResult<Self> {
        spin::CollectiveSpin::new_css(n_atoms).map(Self).map_err(err)
    }

    #[getter]
    fn n_atoms(&self) -> u64 {
        self.0.n_atoms()
    }

    #[getter]
    fn j_len(&self) -> f64 {
        self.0.j_len()
    }

    #[getter]
    fn mean_spin(&self) -> [f64; 3] {
        self.0.mean_spin().into()
    }

    #[getter]
    fn cov(&self) -> [[f64; 2]; 2] {
        let c = self.0.cov();
        [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]]
    }

    fn squeezing_parameter(&self) -> PyResult<f64> {
        self.0.squeezing_parameter().map_err(err)
    }

    fn min_detectable_angle(&self) -> PyResult<f64> {
        self.0.min_detectable_angle().map_err(err)
    }

    fn projection_variance(&self, direction: [f64; 3]) -> f64 {
        self.0.projection_variance(&direction.into())
    }

    /// Exact right-handed rotation about `"x"`, `"y"` or `"z"`.
    fn rotate(&self, axis: &str, angle: f64) -> PyResult<Self> {
        Ok(Self(self.0.rotate_exact(variant(axis)?, angle)))
    }

    fn decohere(&self, eta: f64) -> PyResult<Self> {
        self.0.apply_decoherence(eta).map(Self).map_err(err)
    }

    /// One QND measurement of `J_z`; returns `(state, outcome)`.
    #[pyo3(signature = (kappa, eta, seed = 0))]
    fn qnd(&self, kappa: f64, eta: f64, seed: u64) -> PyResult<(Self, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, y) = optics::qnd_update(&self.0, kappa, eta, &mut rng).map_err(err)?;
        Ok((Self(s), y))
    }

    #[pyo3(signature = (ratio = spin::DEFAULT_HP_RATIO))]
    fn is_hp_valid(&self, ratio: f64) -> bool {
        self.0.is_hp_valid(ratio)
    }

    fn __repr__(&self) -> String {
        format!("CollectiveSpin(n_atoms={}, j_len={})", self.0.n_atoms(), self.0.j_len())
    }
}

#[pyclass(name = "CouplingRates", module = "clocknet", frozen, from_py_object)]
#[derive(Clone)]
struct PyRates(CouplingRates);

#[pymethods]
impl PyRates {
    #[new]
    #[pyo3(signature = (mu1, mu2, nu1, nu2, extra_loss = 0.0))]
    fn new(mu1: f64, mu2: f64, nu1: f64, nu2: f64, extra_loss: f64) -> PyResult<Self> {
        let r = CouplingRates {
            mu1,
            mu2,
            nu1,
            nu2,
            extra_loss,
        };
        r.validate().map_err(err)?;
        Ok(Self(r))
    }

    #[staticmethod]
    #[pyo3(signature = (mu, nu, extra_loss = 0.0))]
    fn matched(mu: f64, nu: f64, extra_loss: f64) -> PyResult<Self> {
        Self::new(mu, mu, nu, nu, extra_loss)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }
}

#[pyclass(name = "EprState", module = "clocknet", frozen)]
struct PyEpr(epr::EprState);

#[pymethods]
impl PyEpr {
    #[staticmethod]
    fn coherent_pair(j_len: f64) -> PyResult<Self> {
        epr::EprState::coherent_pair(j_len).map(Self).map_err(err)
    }

    #[staticmethod]
    fn two_mode_squeezed(j_len: f64, r: f64) -> PyResult<Self> {
        epr::EprState::two_mode_squeezed(j_len, r).map(Self).map_err(err)
    }

    /// Stationary state of the dissipative coupling.
    #[staticmethod]
    fn steady_state(rates: &PyRates, j_len: f64) -> PyResult<Self> {
        epr::steady_state(&rates.0, j_len).map(Self).map_err(err)
    }

    #[getter]
    fn cov(&self) -> [[f64; 4]; 4] {
        self.0.cov_rows()
    }

    #[getter]
    fn j_len(&self) -> f64 {
        self.0.j_len
    }

    /// `(value, bound, entangled)` of the EPR criterion.
    fn criterion(&self) -> PyResult<(f64, f64, bool)> {
        let c = epr::epr_criterion(&self.0).map_err(err)?;
        Ok((c.value, c.bound, c.entangled))
    }

    #[pyo3(signature = (tol = epr::PHYSICALITY_TOLERANCE))]
    fn is_physical(&self, tol: f64) -> bool {
        self.0.is_physical(tol)
    }

    #[pyo3(signature = (rates, dt, steps = 1))]
    fn evolve(&self, rates: &PyRates, dt: f64, steps: usize) -> PyResult<Self> {
        epr::evolve_for(&self.0, &rates.0, dt, steps).map(Self).map_err(err)
    }

    /// Runs the secret-time protocol and returns its summary; `rounds` is the
    /// total number of rounds unless `sifted` is set.
    #[pyo3(signature = (rounds, seed = 0, eavesdrop_fraction = None, alpha = 0.01, sifted = false))]
    fn protocol<'py>(
        &self,
        py: Python<'py>,
        rounds: usize,
        seed: u64,
        eavesdrop_fraction: Option<f64>,
        alpha: f64,
        sifted: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let limit = if sifted {
            RoundLimit::Sifted(rounds)
        } else {
            RoundLimit::Total(rounds)
        };
        let mut settings = ProtocolSettings::new(limit, seed);
        settings.alpha = alpha;
        settings.eavesdropper = eavesdrop_fraction.map(|fraction| Eavesdropper { fraction });
        let t = py
            .detach(|| epr::secret_time_protocol(&self.0, &settings))
            .map_err(err)?;
        to_py(py, &t.summary)
    }
}

#[pyfunction]
fn kappa_free(d: f64, eta: f64) -> PyResult<f64> {
    optics::kappa_free(d, eta).map_err(err)
}

#[pyfunction]
fn kappa_cavity(d: f64, finesse: f64, eta_cav: f64) -> PyResult<f64> {
    optics::kappa_cavity_substituted(d, finesse, eta_cav).map_err(err)
}

#[pyfunction]
fn xi_after_qnd(kappa: f64, eta: f64) -> f64 {
    optics::xi_after_qnd(kappa, eta)
}

#[pyfunction]
fn xi_min_free(d: f64) -> f64 {
    optics::xi_min_free(d)
}

#[pyfunction]
fn xi_min_cavity(d: f64, finesse: f64) -> f64 {
    optics::xi_min_cavity(d, finesse)
}

#[pyfunction]
fn xi_to_db(xi: f64) -> f64 {
    optics::xi_to_db(xi)
}

/// S/N gain of `m` chained clocks over the last one alone.
#[pyfunction]
#[pyo3(signature = (m, total_transmission, convention = "total_over_m"))]
fn chain_improvement(m: usize, total_transmission: f64, convention: &str) -> PyResult<f64> {
    let conv: TransmissionConvention = variant(convention)?;
    network::chain_improvement(m, total_transmission, conv).map_err(err)
}

/// Exact and dense-chain precision of `m` clocks at hop exponent `r`.
#[pyfunction]
fn chain_precision<'py>(
    py: Python<'py>,
    m: usize,
    r: f64,
    d: f64,
    n_atoms: u64,
    finesse: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &network::chain_precision(m, r, d, n_atoms, finesse).map_err(err)?)
}

#[pyfunction]
fn matched_criterion(j_len: f64, mu: f64, nu: f64) -> f64 {
    epr::matched_criterion(j_len, mu, nu)
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    scenario::preset_names()
}

/// TOML text of a built-in scenario.
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    scenario::preset(name)
        .map(|c| c.to_toml())
        .ok_or_else(|| PyValueError::new_err(format!("unknown preset `{name}`")))
}

/// Parses, validates and runs a TOML scenario; returns the result record.
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, toml: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = scenario::parse_scenario_str(toml).map_err(err)?;
    let (record, _) = py.detach(|| scenario::run(&cfg)).map_err(err)?;
    to_py(py, &record)
}

#[pymodule]
fn clocknet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySpin>()?;
    m.add_class::<PyRates>()?;
    m.add_class::<PyEpr>()?;
    m.add_function(wrap_pyfunction!(kappa_free, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_cavity, m)?)?;
    m.add_function(wrap_pyfunction!(xi_after_qnd, m)?)?;
    m.add_function(wrap_pyfunction!(xi_min_free, m)?)?;
    m.add_function(wrap_pyfunction!(xi_min_cavity, m)?)?;
    m.add_function(wrap_pyfunction!(xi_to_db, m)?)?;
    m.add_function(wrap_pyfunction!(chain_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(chain_precision, m)?)?;
    m.add_function(wrap_pyfunction!(matched_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
