//! Python bindings for crn-core.
//!
//! Compiled as the extension module `crn._native`; the pure-Python package
//! under `python/` locates the shared library and re-exports everything.
//! The surface mirrors the CLI: counting and enumeration at module level,
//! analysis / simulation / fitting as methods on `Mechanism`. Results come
//! back as plain dicts with the same keys the CLI emits as JSON, except
//! that "not applicable" is spelled `None` here.

use std::collections::HashMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use crn_core::analysis::{classify_db, summarize, DbClass};
use crn_core::data::{parse_named_values, resolve_data, time_grid, ObservationSet};
use crn_core::enumeration::{self, EnumerationFilter};
use crn_core::fitting::{self, FitProblem, FitResult, StartSpec, Weighting};
use crn_core::kinetics::{sample_with_noise, KineticSystem, NoiseSpec, RateSpec};
use crn_core::mechanism::{default_species_names, Mechanism as CoreMechanism};

fn pyerr(e: crn_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_db_class(text: &str) -> PyResult<DbClass> {
    match text.to_ascii_lowercase().as_str() {
        "udb" => Ok(DbClass::Udb),
        "cdb" => Ok(DbClass::Cdb),
        other => Err(PyValueError::new_err(format!(
            "unknown detailed-balance class {:?} (expected udb or cdb)",
            other
        ))),
    }
}

fn parse_weighting(text: &str) -> PyResult<Weighting> {
    match text.to_ascii_lowercase().as_str() {
        "unit" => Ok(Weighting::Unit),
        "relative" => Ok(Weighting::Relative),
        other => Err(PyValueError::new_err(format!(
            "unknown weighting {:?} (expected unit or relative)",
            other
        ))),
    }
}

/// Initial state vector from a name-keyed dict; every species must appear.
fn initial_state(mech: &CoreMechanism, init: &HashMap<String, f64>) -> PyResult<Vec<f64>> {
    let names = mech.species_names();
    let mut c0 = vec![0.0; mech.m()];
    let mut seen = vec![false; mech.m()];
    for (name, value) in init {
        let idx = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown species {:?} in init", name)))?;
        if value.is_sign_negative() || !value.is_finite() {
            return Err(PyValueError::new_err(format!(
                "initial concentration of {} must be finite and non-negative",
                name
            )));
        }
        c0[idx] = *value;
        seen[idx] = true;
    }
    for (idx, seen) in seen.iter().enumerate() {
        if !seen {
            return Err(PyValueError::new_err(format!(
                "missing initial concentration for {}",
                names[idx]
            )));
        }
    }
    Ok(c0)
}

fn observations_dict<'py>(py: Python<'py>, set: &ObservationSet) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("times", set.times.clone())?;
    d.set_item("species", set.species.clone())?;
    let values = PyDict::new(py);
    for (j, name) in set.species.iter().enumerate() {
        let col: Vec<Option<f64>> = set.values.iter().map(|row| row[j]).collect();
        values.set_item(name, col)?;
    }
    d.set_item("values", values)?;
    match &set.init {
        Some(pairs) => {
            let init = PyDict::new(py);
            for (name, value) in pairs {
                init.set_item(name, *value)?;
            }
            d.set_item("init", init)?;
        }
        None => d.set_item("init", py.None())?,
    }
    Ok(d)
}

fn fit_dict<'py>(py: Python<'py>, result: &FitResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("names", result.names.clone())?;
    d.set_item("estimates", result.estimates.clone())?;
    d.set_item("std_errors", result.std_errors.clone())?;
    d.set_item("correlation", result.correlation.clone())?;
    let rates = PyDict::new(py);
    rates.set_item("k_plus", result.rates.k_plus.clone())?;
    rates.set_item("k_minus", result.rates.k_minus.clone())?;
    d.set_item("rates", rates)?;
    let inits = PyList::empty(py);
    for (name, value) in &result.init_estimates {
        let entry = PyDict::new(py);
        entry.set_item("species", name)?;
        entry.set_item("value", *value)?;
        inits.append(entry)?;
    }
    d.set_item("init_estimates", inits)?;
    d.set_item("rss", result.rss)?;
    d.set_item("n", result.n)?;
    d.set_item("p", result.p)?;
    d.set_item("aic", result.aic)?;
    d.set_item("bic", result.bic)?;
    d.set_item("converged", result.converged)?;
    d.set_item("iterations", result.iterations)?;
    d.set_item("n_starts", result.n_starts)?;
    d.set_item("start_index", result.start_index)?;
    d.set_item("rank_deficient", result.rank_deficient)?;
    d.set_item("db_violation", result.db_violation)?;
    Ok(d)
}

/// A reaction mechanism: an ordered list of mass-action steps.
#[pyclass(module = "crn", frozen)]
struct Mechanism {
    inner: CoreMechanism,
}

#[pymethods]
impl Mechanism {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        CoreMechanism::parse(text)
            .map(|inner| Mechanism { inner })
            .map_err(pyerr)
    }

    /// Normalized text form, steps joined by "; ".
    #[getter]
    fn text(&self) -> String {
        self.inner.serialize()
    }

    /// Order-independent identity: equal ids mean the same chemistry.
    #[getter]
    fn canonical_id(&self) -> String {
        self.inner.canonical_id()
    }

    #[getter]
    fn species(&self) -> Vec<String> {
        self.inner.species_names().to_vec()
    }

    #[getter]
    fn steps(&self) -> Vec<String> {
        let names = self.inner.species_names();
        self.inner.steps().iter().map(|s| s.render(names)).collect()
    }

    /// Number of species.
    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    /// Number of steps.
    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    fn __str__(&self) -> String {
        self.inner.serialize()
    }

    fn __repr__(&self) -> String {
        format!("Mechanism({:?})", self.inner.serialize())
    }

    /// Network structure summary: complexes N, linkage classes L, rank S,
    /// deficiency, reversibility, mass conservation, and the
    /// detailed-balance class with its conditions ("UDB", "CDB", or None
    /// when some step is irreversible).
    fn analyze<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let summary = summarize(&self.inner);
        let conditions = if summary.db_class.is_some() {
            classify_db(&self.inner).map_err(pyerr)?.1
        } else {
            Vec::new()
        };
        let d = PyDict::new(py);
        d.set_item("id", self.inner.canonical_id())?;
        d.set_item("M", self.inner.m())?;
        d.set_item("R", self.inner.r())?;
        d.set_item("N", summary.n)?;
        d.set_item("L", summary.l)?;
        d.set_item("S", summary.s)?;
        d.set_item("deficiency", summary.deficiency)?;
        d.set_item("reversible", summary.reversible)?;
        d.set_item("weakly_reversible", summary.weakly_reversible)?;
        d.set_item("mass_conserving", summary.mass_conserving)?;
        d.set_item("db_class", summary.db_class.map(|c| c.to_string()))?;
        let conds = PyList::empty(py);
        for c in &conditions {
            let entry = PyDict::new(py);
            entry.set_item("kind", c.kind.to_string())?;
            entry.set_item("exponents", c.exponents.clone())?;
            entry.set_item("rendered", c.render())?;
            conds.append(entry)?;
        }
        d.set_item("conditions", conds)?;
        Ok(d)
    }

    /// Integer basis of the attainable log equilibrium-constant vectors,
    /// rank(gamma) rows of length R.
    fn equilibrium_basis(&self) -> Vec<Vec<i64>> {
        fitting::equilibrium_basis(&self.inner)
    }

    /// Completes a detailed-balanced rate assignment from a partial spec
    /// such as "k1=1,k-1=2,k2=3": all forward coefficients plus enough
    /// backward ones to pin the equilibrium constants; the rest follow
    /// from the Wegscheider conditions. Returns {"k_plus", "k_minus"}.
    fn db_complete<'py>(&self, py: Python<'py>, rates: &str) -> PyResult<Bound<'py, PyDict>> {
        let spec = RateSpec::parse(&self.inner, rates).map_err(pyerr)?;
        let assignment = fitting::db_complete(&self.inner, &spec).map_err(pyerr)?;
        let d = PyDict::new(py);
        d.set_item("k_plus", assignment.k_plus)?;
        d.set_item("k_minus", assignment.k_minus)?;
        Ok(d)
    }

    /// Integrates the induced mass-action ODE on the grid 0, dt, ..., t_end.
    ///
    /// `rates` uses the CLI syntax ("k1=0.1,k-1=0.1,..."), `init` maps every
    /// species name to its initial concentration. With `noise` set, applies
    /// multiplicative Gaussian observation noise at the given relative sigma
    /// and seed, clipped at zero. Returns {"times", "species", "values",
    /// "init"} with name-keyed value columns.
    #[pyo3(signature = (rates, init, t_end, dt, noise=None, seed=0, db_complete=false))]
    #[allow(clippy::too_many_arguments)]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        rates: &str,
        init: HashMap<String, f64>,
        t_end: f64,
        dt: f64,
        noise: Option<f64>,
        seed: u64,
        db_complete: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let spec = RateSpec::parse(&self.inner, rates).map_err(pyerr)?;
        let assignment = if db_complete {
            fitting::db_complete(&self.inner, &spec).map_err(pyerr)?
        } else {
            spec.complete(&self.inner).map_err(pyerr)?
        };
        let c0 = initial_state(&self.inner, &init)?;
        let grid = time_grid(t_end, dt).map_err(pyerr)?;
        let system = KineticSystem::new(&self.inner, &assignment).map_err(pyerr)?;
        let traj = system
            .integrate(&c0, t_end, &grid, &Default::default())
            .map_err(pyerr)?;
        let set = match noise {
            Some(sigma) => {
                let noise = NoiseSpec::new(sigma, seed).map_err(pyerr)?;
                sample_with_noise(&traj, &noise)
            }
            None => ObservationSet {
                times: traj.times.clone(),
                species: traj.names.clone(),
                values: traj
                    .states
                    .iter()
                    .map(|row| row.iter().copied().map(Some).collect())
                    .collect(),
                init: None,
                time_label: None,
                value_label: None,
            },
        };
        observations_dict(py, &set)
    }

    /// Least-squares fit of the rate coefficients to observed time series.
    ///
    /// `values` maps observed species names to columns aligned with `times`;
    /// entries may be None for missing samples. `init` pins known initial
    /// concentrations; species observed at t = 0 need no pin, and
    /// `fit_init=True` estimates any that remain unknown. `start` is a full
    /// rate spec in CLI syntax for the first start point (all coefficients 1
    /// when absent); additional random starts are drawn from `seed`. Returns
    /// the fit report dict (estimates, standard errors, correlation, AIC,
    /// BIC, ...).
    #[pyo3(signature = (times, values, init=None, db_constrained=false, weights="unit",
                        start=None, n_starts=1, seed=0, fit_init=false, allow_negative=false))]
    #[allow(clippy::too_many_arguments)]
    fn fit<'py>(
        &self,
        py: Python<'py>,
        times: Vec<f64>,
        values: &Bound<'py, PyDict>,
        init: Option<&Bound<'py, PyDict>>,
        db_constrained: bool,
        weights: &str,
        start: Option<&str>,
        n_starts: usize,
        seed: u64,
        fit_init: bool,
        allow_negative: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut species = Vec::with_capacity(values.len());
        let mut columns: Vec<Vec<Option<f64>>> = Vec::with_capacity(values.len());
        for (key, value) in values.iter() {
            species.push(key.extract::<String>()?);
            columns.push(value.extract::<Vec<Option<f64>>>()?);
        }
        let rows = times.len();
        for (name, col) in species.iter().zip(&columns) {
            if col.len() != rows {
                return Err(PyValueError::new_err(format!(
                    "column {} has {} entries but times has {}",
                    name,
                    col.len(),
                    rows
                )));
            }
        }
        let data = ObservationSet {
            times,
            species,
            values: (0..rows)
                .map(|i| columns.iter().map(|col| col[i]).collect())
                .collect(),
            init: init
                .map(|d| {
                    d.iter()
                        .map(|(k, v)| Ok((k.extract::<String>()?, v.extract::<f64>()?)))
                        .collect::<PyResult<Vec<_>>>()
                })
                .transpose()?,
            time_label: None,
            value_label: None,
        };
        data.validate().map_err(pyerr)?;

        let start_rates = start
            .map(|text| {
                RateSpec::parse(&self.inner, text)
                    .and_then(|s| s.complete(&self.inner))
                    .map_err(pyerr)
            })
            .transpose()?;
        let problem = FitProblem {
            mechanism: self.inner.clone(),
            data,
            weighting: parse_weighting(weights)?,
            db_constrained,
            fit_init,
            allow_negative,
            ode: Default::default(),
            lm: Default::default(),
        };
        let starts = StartSpec {
            rates: start_rates,
            n_starts,
            seed,
        };
        let result = fitting::fit(&problem, &starts).map_err(pyerr)?;
        fit_dict(py, &result)
    }
}

/// Number of admissible steps on at most `m` species.
#[pyfunction]
fn count_steps(m: u64) -> u64 {
    if m == 0 {
        return 0;
    }
    enumeration::count_steps(m)
}

/// Step counts by template type, in the order X<=>Y, X<=>2Y, 2X<=>X+Y,
/// X+Y<=>Z, X+Y<=>2Z, X+Y<=>X+Z, X+Y<=>Z+A.
#[pyfunction]
fn step_type_census(m: u64) -> Vec<u64> {
    if m == 0 {
        return vec![0; 7];
    }
    enumeration::step_type_census(m).to_vec()
}

/// Number of R-step mechanisms on `m` species; `exact_species` demands all
/// `m` species actually appear. Exact for any size (Python int).
#[pyfunction]
#[pyo3(signature = (m, r, exact_species=false))]
fn count_mechanisms(py: Python<'_>, m: u64, r: u64, exact_species: bool) -> PyResult<Py<PyAny>> {
    let count = enumeration::count_mechanisms(m, r, exact_species).to_string();
    let obj = py.import("builtins")?.getattr("int")?.call1((count,))?;
    Ok(obj.unbind())
}

/// All admissible steps on at most `m` species, rendered with the default
/// species names.
#[pyfunction]
fn enumerate_steps(m: usize) -> Vec<String> {
    let names = default_species_names(m);
    enumeration::enumerate_steps(m)
        .iter()
        .map(|s| s.render(&names))
        .collect()
}

/// Streams the mechanism catalog into a list, with the same filters the
/// CLI offers; `limit` truncates the output, not the search.
#[pyfunction]
#[pyo3(signature = (m, r, exact_species=false, mass_conserving=false, db_class=None, limit=None))]
fn enumerate_mechanisms(
    m: usize,
    r: usize,
    exact_species: bool,
    mass_conserving: bool,
    db_class: Option<&str>,
    limit: Option<usize>,
) -> PyResult<Vec<Mechanism>> {
    let filter = EnumerationFilter {
        exact_species,
        mass_conserving,
        db_class: db_class.map(parse_db_class).transpose()?,
    };
    let iter = enumeration::enumerate_mechanisms(m, r, filter).map_err(pyerr)?;
    let wrap = |inner: CoreMechanism| Mechanism { inner };
    Ok(match limit {
        Some(n) => iter.take(n).map(wrap).collect(),
        None => iter.map(wrap).collect(),
    })
}

/// Loads a data source by CLI spec: `fixture:salicylic`, `fixture:sim-m2r2`,
/// or a CSV path. Returns {"times", "species", "values", "init"}.
#[pyfunction]
fn load_data<'py>(py: Python<'py>, spec: &str) -> PyResult<Bound<'py, PyDict>> {
    let set = resolve_data(spec).map_err(pyerr)?;
    observations_dict(py, &set)
}

/// Parses "name=value,..." the way the CLI does; returns a dict.
#[pyfunction]
fn parse_values<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (name, value) in parse_named_values(text).map_err(pyerr)? {
        d.set_item(name, value)?;
    }
    Ok(d)
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Mechanism>()?;
    m.add_function(wrap_pyfunction!(count_steps, m)?)?;
    m.add_function(wrap_pyfunction!(step_type_census, m)?)?;
    m.add_function(wrap_pyfunction!(count_mechanisms, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_steps, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_mechanisms, m)?)?;
    m.add_function(wrap_pyfunction!(load_data, m)?)?;
    m.add_function(wrap_pyfunction!(parse_values, m)?)?;
    Ok(())
}
