//! Python bindings: the main types and operations of the droplet-polymer
//! engine, exposed in-process. Build the cdylib and import it as `dropoly`
//! (see python/smoke_test.py for the loading recipe).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dropoly::kernel::{ratio_growth_check, WalkKernel};
use dropoly::model::{Disorder, ModelParams};
use dropoly::partition::{free_energy_estimate, PartitionTables};
use dropoly::rng::{rng_stream, tag};
use dropoly::sampler::{exact_endpoint_law_1d, no_return_probability, sample_path};

fn to_py_err(e: dropoly::Error) -> PyErr {
    match e {
        dropoly::Error::InvalidParams(_) | dropoly::Error::IndexOutOfRange { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Model parameters: interaction strength `lam`, asymmetry `h`, droplet
/// density `p`, transverse dimension `d`, horizon `n`.
#[pyclass(name = "Params", skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: ModelParams,
}

#[pymethods]
impl PyParams {
    #[new]
    fn new(lam: f64, h: f64, p: f64, d: u32, n: usize) -> PyResult<Self> {
        Ok(PyParams {
            inner: ModelParams::new(lam, h, p, d, n).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn d(&self) -> u32 {
        self.inner.d
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn with_n(&self, n: usize) -> PyParams {
        PyParams {
            inner: self.inner.with_n(n),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(lam={}, h={}, p={}, d={}, n={})",
            self.inner.lambda, self.inner.h, self.inner.p, self.inner.d, self.inner.n
        )
    }
}

/// Walk tables: return probabilities p_k, first-return law b_k, survival
/// probabilities a_m and the escape probability.
#[pyclass(name = "Kernel")]
struct PyKernel {
    inner: WalkKernel,
}

#[pymethods]
impl PyKernel {
    #[new]
    fn new(d: u32, n_max: usize) -> PyResult<Self> {
        if d < 1 || n_max < 1 {
            return Err(PyValueError::new_err("need d >= 1 and n_max >= 1"));
        }
        Ok(PyKernel {
            inner: WalkKernel::build(d, n_max),
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn alpha_error(&self) -> f64 {
        self.inner.alpha_error()
    }

    fn p(&self, k: usize) -> PyResult<f64> {
        if k > self.inner.n_max() {
            return Err(PyValueError::new_err(format!("k {k} beyond table")));
        }
        Ok(self.inner.p(k))
    }

    fn b(&self, k: usize) -> PyResult<f64> {
        if k > self.inner.n_max() {
            return Err(PyValueError::new_err(format!("k {k} beyond table")));
        }
        Ok(self.inner.b(k))
    }

    fn a(&self, m: usize) -> PyResult<f64> {
        if m > self.inner.max_steps() {
            return Err(PyValueError::new_err(format!("m {m} beyond table")));
        }
        Ok(self.inner.a(m))
    }

    /// (fitted growth exponent, smallest polynomial constant) of the
    /// survival/first-return ratio.
    fn ratio_growth(&self, k_max: usize) -> (f64, f64) {
        let growth = ratio_growth_check(&self.inner, k_max);
        (growth.slope, growth.c1)
    }

    fn renewal_error(&self, k_max: usize) -> f64 {
        self.inner.renewal_reconstruction_error(k_max)
    }
}

/// One quenched disorder realization.
#[pyclass(name = "Disorder")]
struct PyDisorder {
    inner: Disorder,
}

#[pymethods]
impl PyDisorder {
    /// Draw a realization for `params` from `seed` (bit-reproducible).
    #[staticmethod]
    fn sample(params: &PyParams, seed: u64) -> PyDisorder {
        PyDisorder {
            inner: Disorder::sample(&params.inner, seed),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyDisorder> {
        Ok(PyDisorder {
            inner: Disorder::from_json(text).map_err(to_py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn omega(&self) -> Vec<i8> {
        self.inner.omega_slice().to_vec()
    }

    #[getter]
    fn eta(&self) -> Vec<i8> {
        self.inner.eta_slice().to_vec()
    }

    /// Sign field at time i (1-based): -1 on occupied droplet sites when
    /// the walk sits on the axis, +1 otherwise.
    fn delta(&self, i: usize, at_origin: bool) -> PyResult<i8> {
        self.inner.delta(i, at_origin).map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Log-space partition sums for one disorder realization.
#[pyclass(name = "Tables")]
struct PyTables {
    inner: PartitionTables,
}

#[pymethods]
impl PyTables {
    #[new]
    fn new(disorder: &PyDisorder, params: &PyParams, kernel: &PyKernel) -> PyResult<Self> {
        Ok(PyTables {
            inner: PartitionTables::build(&disorder.inner, &params.inner, &kernel.inner)
                .map_err(to_py_err)?,
        })
    }

    /// log Z^m for m = 0..=n.
    fn log_z(&self) -> Vec<f64> {
        self.inner.log_z().to_vec()
    }

    /// log of the pinned sum at an even time.
    fn log_zhat_at(&self, time: usize) -> PyResult<f64> {
        if !time.is_multiple_of(2) || time > self.inner.n() {
            return Err(PyValueError::new_err("pinned sums exist at even times <= n"));
        }
        Ok(self.inner.log_zhat_at(time))
    }

    /// log of the normalized sum for m = 0..=n.
    fn log_psi(&self) -> Vec<f64> {
        self.inner.log_psi().to_vec()
    }

    /// Gibbs probability that the walk never touches the axis.
    fn no_return_probability(&self, kernel: &PyKernel) -> f64 {
        no_return_probability(&self.inner, &kernel.inner)
    }
}

/// Replica estimate of the free energy; returns a dict with phi_hat,
/// stderr, psi_p_hat, phi_pinned_hat, replicas and n.
#[pyfunction]
fn free_energy(
    py: Python<'_>,
    params: &PyParams,
    kernel: &PyKernel,
    replicas: usize,
    base_seed: u64,
) -> PyResult<Py<PyDict>> {
    let est = free_energy_estimate(&params.inner, &kernel.inner, replicas, base_seed)
        .map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("phi_hat", est.phi_hat)?;
    dict.set_item("stderr", est.stderr)?;
    dict.set_item("psi_p_hat", est.psi_p_hat)?;
    dict.set_item("phi_pinned_hat", est.phi_pinned_hat)?;
    dict.set_item("replicas", est.replicas)?;
    dict.set_item("n", est.n)?;
    Ok(dict.into())
}

/// Guaranteed-localized asymmetry bound.
#[pyfunction]
fn bound_localized(lam: f64, p: f64, d: u32) -> PyResult<f64> {
    dropoly::phase::bound_localized(lam, p, d).map_err(to_py_err)
}

/// Guaranteed-delocalized asymmetry bound; returns (h, at_lambda_zero).
#[pyfunction]
fn bound_delocalized(lam: f64) -> (f64, bool) {
    let b = dropoly::phase::bound_delocalized(lam);
    (b.h, b.at_lambda_zero)
}

/// Diffusive-regime threshold for transient dimensions (d >= 3).
#[pyfunction]
fn diffusive_threshold(lam: f64, d: u32, kernel: &PyKernel) -> PyResult<f64> {
    dropoly::phase::diffusive_threshold(lam, d, &kernel.inner).map_err(to_py_err)
}

/// Classify a parameter point; returns a dict with the verdict and the
/// excess free-energy estimates at both horizons.
#[pyfunction]
#[pyo3(signature = (params, kernel, replicas, base_seed, kappa = 3.0))]
fn classify(
    py: Python<'_>,
    params: &PyParams,
    kernel: &PyKernel,
    replicas: usize,
    base_seed: u64,
    kappa: f64,
) -> PyResult<Py<PyDict>> {
    let pt = dropoly::phase::classify_point(&params.inner, &kernel.inner, replicas, kappa, base_seed)
        .map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("verdict", pt.verdict.to_string())?;
    dict.set_item("psi_p_hat", pt.psi_p_hat)?;
    dict.set_item("stderr", pt.stderr)?;
    dict.set_item("psi_base", pt.psi_base)?;
    dict.set_item("stderr_base", pt.stderr_base)?;
    dict.set_item("n", pt.n)?;
    Ok(dict.into())
}

/// Draw one exact Gibbs path; returns a dict with the return skeleton, the
/// flattened path (row-major, d coordinates per time) and observables.
#[pyfunction]
fn draw_path(
    py: Python<'_>,
    disorder: &PyDisorder,
    params: &PyParams,
    kernel: &PyKernel,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let tables = PartitionTables::build(&disorder.inner, &params.inner, &kernel.inner)
        .map_err(to_py_err)?;
    let mut rng = rng_stream(seed, &[tag::SKELETON]);
    let sample = sample_path(&tables, &disorder.inner, &params.inner, &kernel.inner, &mut rng)
        .map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("returns", sample.returns().to_vec())?;
    let d = params.inner.d as usize;
    let flat: Vec<i32> = (0..=params.inner.n)
        .flat_map(|t| (0..d).map(move |c| (t, c)))
        .map(|(t, c)| sample.coord(t, c))
        .collect();
    dict.set_item("path", flat)?;
    dict.set_item("endpoint", sample.endpoint().to_vec())?;
    dict.set_item("n_returns", sample.n_returns())?;
    dict.set_item("last_hit", sample.last_hit())?;
    Ok(dict.into())
}

/// Exact endpoint law for d = 1: probabilities for z = -n..n.
#[pyfunction]
fn endpoint_law_1d(disorder: &PyDisorder, params: &PyParams) -> PyResult<Vec<f64>> {
    Ok(exact_endpoint_law_1d(&disorder.inner, &params.inner)
        .map_err(to_py_err)?
        .probs)
}

#[pymodule]
fn dropoly_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyDisorder>()?;
    m.add_class::<PyTables>()?;
    m.add_function(wrap_pyfunction!(free_energy, m)?)?;
    m.add_function(wrap_pyfunction!(bound_localized, m)?)?;
    m.add_function(wrap_pyfunction!(bound_delocalized, m)?)?;
    m.add_function(wrap_pyfunction!(diffusive_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(draw_path, m)?)?;
    m.add_function(wrap_pyfunction!(endpoint_law_1d, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
