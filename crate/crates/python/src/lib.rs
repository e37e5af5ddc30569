//! Python module `fracdim`: systems, measures, dimension formulas, the
//! moment equation, sampling and estimators from `fracdim-core`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fracdim_core::cli::{self, Kind};
use fracdim_core::estimate::{self, DimensionEstimate};
use fracdim_core::formulas::{self, DimensionReport};
use fracdim_core::sample::{self, Points};
use fracdim_core::separation::separation_report_any;
use fracdim_core::{lq, AnyIfs, Literal, SymbolicMeasure, Word};

type LevelRow = (usize, f64, String, Option<(Vec<usize>, Vec<usize>)>);

create_exception!(fracdim, FracdimError, PyValueError);

fn err(e: impl std::fmt::Display) -> PyErr {
    FracdimError::new_err(e.to_string())
}

fn literal(text: &str) -> PyResult<Literal> {
    text.parse().map_err(err)
}

fn report_dict<'py>(py: Python<'py>, r: &DimensionReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &r.name)?;
    d.set_item("predicted", r.predicted)?;
    let inputs = PyDict::new(py);
    for (k, v) in &r.inputs {
        inputs.set_item(k, v)?;
    }
    d.set_item("inputs", inputs)?;
    let flags = PyDict::new(py);
    for (k, v) in &r.flags {
        flags.set_item(k, v.to_string())?;
    }
    d.set_item("flags", flags)?;
    d.set_item("warnings", r.warnings.clone())?;
    Ok(d)
}

fn estimate_dict<'py>(py: Python<'py>, e: &DimensionEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", e.method.to_string())?;
    d.set_item("estimate", e.estimate)?;
    d.set_item("standard_error", e.standard_error)?;
    d.set_item("finest", e.finest)?;
    d.set_item("coarsest", e.coarsest)?;
    d.set_item("iqr", e.iqr)?;
    d.set_item("dropped_centers", e.dropped_centers)?;
    d.set_item("samples_used", e.samples_used)?;
    let per_scale: Vec<(f64, f64, u64)> = e.per_scale.iter().map(|s| (s.scale, s.value, s.count)).collect();
    d.set_item("per_scale", per_scale)?;
    Ok(d)
}

/// One-dimensional IFS from `(ratio, offset)` string pairs such as `("1/3", "0")`.
#[pyclass(name = "Ifs", module = "fracdim", frozen)]
#[derive(Clone)]
struct PyIfs {
    inner: AnyIfs,
}

#[pymethods]
impl PyIfs {
    #[new]
    fn new(maps: Vec<(String, String)>) -> PyResult<Self> {
        Ok(PyIfs { inner: AnyIfs::parse(&maps).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Ifs({:?}, mode={})", self.inner.to_f64_maps(), self.inner.mode())
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode().to_string()
    }

    fn ratios(&self) -> Vec<f64> {
        self.inner.ratios_f64()
    }

    fn maps(&self) -> Vec<(f64, f64)> {
        self.inner.to_f64_maps()
    }

    fn attractor_bound(&self) -> (f64, f64) {
        let b = self.inner.attractor_bound();
        (b.lo, b.hi)
    }

    fn similarity_dimension(&self) -> PyResult<f64> {
        formulas::similarity_dimension(&self.inner).map_err(err)
    }

    /// Per-level minimal gaps as `(level, gap, exact_text, witness)` rows plus the overall finding.
    #[pyo3(signature = (max_level, budget = None))]
    fn separation<'py>(&self, py: Python<'py>, max_level: usize, budget: Option<u128>) -> PyResult<Bound<'py, PyDict>> {
        let budget = budget.unwrap_or(fracdim_core::ifs::DEFAULT_WORD_BUDGET);
        let rep = separation_report_any(&self.inner, max_level, budget).map_err(err)?;
        let d = PyDict::new(py);
        let levels: Vec<LevelRow> = rep
            .per_level
            .iter()
            .map(|r| {
                let w = r.witness.clone().map(|(a, b)| (a.into_inner(), b.into_inner()));
                (r.level, r.min_gap, r.min_gap_text.clone(), w)
            })
            .collect();
        d.set_item("levels", levels)?;
        d.set_item("c_estimate", rep.c_estimate)?;
        d.set_item(
            "exact_overlap",
            rep.exact_overlap.clone().map(|(n, a, b)| (n, a.into_inner(), b.into_inner())),
        )?;
        d.set_item("separated_evidence", rep.separated_evidence())?;
        d.set_item("notes", rep.notes.clone())?;
        Ok(d)
    }
}

/// Bernoulli or Markov measure on sequences.
#[pyclass(name = "Measure", module = "fracdim", frozen)]
#[derive(Clone)]
struct PyMeasure {
    inner: SymbolicMeasure,
}

#[pymethods]
impl PyMeasure {
    #[staticmethod]
    fn bernoulli(p: Vec<f64>) -> PyResult<Self> {
        Ok(PyMeasure { inner: SymbolicMeasure::bernoulli(p).map_err(err)? })
    }

    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        Ok(PyMeasure { inner: SymbolicMeasure::uniform(n).map_err(err)? })
    }

    #[staticmethod]
    fn markov(transition: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyMeasure { inner: SymbolicMeasure::markov(transition).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn marginals(&self) -> Vec<f64> {
        self.inner.marginals().to_vec()
    }

    /// Entropy in bits per symbol.
    fn entropy(&self) -> f64 {
        self.inner.entropy()
    }

    /// Lyapunov exponent in bits (negative) for the given ratios.
    fn lyapunov(&self, ratios: Vec<f64>) -> PyResult<f64> {
        self.inner.lyapunov(&ratios).map_err(err)
    }

    fn cylinder_mass(&self, word: Vec<usize>) -> PyResult<f64> {
        self.inner.cylinder_mass(&Word::new(word)).map_err(err)
    }
}

/// Monte Carlo samples with their truncation error bound.
#[pyclass(name = "SampleSet", module = "fracdim", frozen)]
struct PySampleSet {
    inner: sample::SampleSet,
}

#[pymethods]
impl PySampleSet {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn error_bound(&self) -> f64 {
        self.inner.error_bound
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Line samples as floats, planar samples as `(x, y)` tuples.
    fn points(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        Ok(match &self.inner.points {
            Points::Line(v) => v.clone().into_pyobject(py)?.into_any().unbind(),
            Points::Plane(v) => v.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>().into_pyobject(py)?.into_any().unbind(),
        })
    }

    fn mean(&self) -> Vec<f64> {
        self.inner.mean()
    }

    /// Estimates over the dyadic scales `2^-coarsest ..= 2^-finest`.
    #[pyo3(signature = (method = "coarse-entropy", coarsest = 6, finest = 12))]
    fn estimate<'py>(&self, py: Python<'py>, method: &str, coarsest: i32, finest: i32) -> PyResult<Bound<'py, PyDict>> {
        let scales = estimate::dyadic_scales(coarsest..=finest);
        let e = match method {
            "coarse-entropy" => estimate::coarse_entropy_dimension(&self.inner, &scales),
            "local-dimension" => estimate::local_dimension_stats(&self.inner, &scales),
            "correlation" => estimate::correlation_dimension(&self.inner, &scales),
            other => return Err(err(format!("unknown method '{other}'"))),
        }
        .map_err(err)?;
        estimate_dict(py, &e)
    }
}

#[pyfunction]
fn push_samples(measure: &PyMeasure, ifs: &PyIfs, depth: usize, count: usize, seed: u64) -> PyResult<PySampleSet> {
    Ok(PySampleSet { inner: sample::push_samples(&measure.inner, &ifs.inner, depth, count, seed).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (measure1, ifs1, measure2, ifs2, t, depth, count, seed))]
#[allow(clippy::too_many_arguments)]
fn convolution_samples(
    measure1: &PyMeasure,
    ifs1: &PyIfs,
    measure2: &PyMeasure,
    ifs2: &PyIfs,
    t: f64,
    depth: usize,
    count: usize,
    seed: u64,
) -> PyResult<PySampleSet> {
    let s = sample::convolution_samples(&measure1.inner, &ifs1.inner, &measure2.inner, &ifs2.inner, t, depth, count, seed)
        .map_err(err)?;
    Ok(PySampleSet { inner: s })
}

#[pyfunction]
fn uniform_samples(dim: usize, count: usize, seed: u64) -> PyResult<PySampleSet> {
    Ok(PySampleSet { inner: sample::uniform_samples(dim, count, seed).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (measure, ratio, angle, translations, z_angle, depth, count, seed, reflect = false))]
#[allow(clippy::too_many_arguments)]
fn planar_projection_samples(
    measure: &PyMeasure,
    ratio: f64,
    angle: f64,
    translations: Vec<(f64, f64)>,
    z_angle: f64,
    depth: usize,
    count: usize,
    seed: u64,
    reflect: bool,
) -> PyResult<PySampleSet> {
    let pifs = sample::PlanarIfs::new(ratio, angle, reflect, translations.into_iter().map(|(x, y)| [x, y]).collect())
        .map_err(err)?;
    let s = sample::planar_projection_samples(&measure.inner, &pifs, z_angle, depth, count, seed).map_err(err)?;
    Ok(PySampleSet { inner: s })
}

/// Maps are `(a, b, s, t)` for `(x, y) -> (a x + s, b y + t)`.
#[pyfunction]
fn diagonal_affine_samples(
    measure: &PyMeasure,
    maps: Vec<(f64, f64, f64, f64)>,
    depth: usize,
    count: usize,
    seed: u64,
) -> PyResult<PySampleSet> {
    let difs = sample::DiagonalAffineIfs::new(
        maps.into_iter().map(|(a, b, s, t)| sample::DiagonalMap { a, b, s, t }).collect(),
    )
    .map_err(err)?;
    let s = sample::diagonal_affine_samples(&measure.inner, &difs, depth, count, seed).map_err(err)?;
    Ok(PySampleSet { inner: s })
}

#[pyfunction]
fn projection_dimension(h: f64, chi: f64) -> PyResult<f64> {
    formulas::projection_dimension(h, chi).map_err(err)
}

#[pyfunction]
fn orthogonal_projection_dimension(h: f64, r: f64) -> PyResult<f64> {
    formulas::orthogonal_projection_dimension(h, r).map_err(err)
}

#[pyfunction]
fn similarity_dimension(ratios: Vec<f64>) -> PyResult<f64> {
    formulas::similarity_dimension_ratios(&ratios).map_err(err)
}

/// Ratios are number strings so exact rationals keep the dependence test decidable.
#[pyfunction]
fn convolution_dimension<'py>(py: Python<'py>, h1: f64, r1: &str, h2: f64, r2: &str) -> PyResult<Bound<'py, PyDict>> {
    let rep = formulas::convolution_dimension(h1, &literal(r1)?, h2, &literal(r2)?).map_err(err)?;
    report_dict(py, &rep)
}

#[pyfunction]
fn multiplicative_dependence(r1: &str, r2: &str) -> PyResult<String> {
    Ok(formulas::multiplicative_dependence(&literal(r1)?, &literal(r2)?).map_err(err)?.to_string())
}

/// Exponents are positive bits with `chi1 <= chi2`.
#[pyfunction]
fn lyapunov_dimension_diagonal<'py>(py: Python<'py>, h: f64, chi1: f64, chi2: f64) -> PyResult<Bound<'py, PyDict>> {
    let dd = formulas::lyapunov_dimension_diagonal(h, chi1, chi2).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("value", dd.value)?;
    d.set_item("branch", format!("{:?}", dd.branch))?;
    d.set_item("feng_hu", dd.feng_hu)?;
    d.set_item("capped", dd.capped)?;
    Ok(d)
}

#[pyfunction]
fn lq_lower_bound(h: f64, chi: f64, s: f64, alpha_min: f64) -> PyResult<(f64, f64)> {
    let lb = formulas::lq_lower_bound(h, chi, s, alpha_min).map_err(err)?;
    Ok((lb.bound, lb.upper))
}

/// Solution of `sum p^q |r|^(-tau) = 1`.
#[pyfunction]
fn solve_tau<'py>(py: Python<'py>, p: Vec<f64>, ratios: Vec<f64>, q: f64) -> PyResult<Bound<'py, PyDict>> {
    let pt = lq::solve_tau(&p, &ratios, q).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("q", pt.q)?;
    d.set_item("tau", pt.tau)?;
    d.set_item("lq_dim", pt.lq_dim)?;
    d.set_item("residual", pt.residual)?;
    d.set_item("norm_q", pt.norm_q)?;
    d.set_item("norm_inf", pt.norm_inf)?;
    d.set_item("dropped", pt.dropped)?;
    Ok(d)
}

#[pyfunction]
fn alpha_min(p: Vec<f64>, ratios: Vec<f64>) -> PyResult<f64> {
    Ok(lq::alpha_min(&p, &ratios).map_err(err)?.value)
}

/// Runs a config file like the `fracdim` binary and returns the output directory.
#[pyfunction]
#[pyo3(signature = (kind, config, out = None))]
fn run_experiment(kind: &str, config: PathBuf, out: Option<PathBuf>) -> PyResult<String> {
    let kind = Kind::ALL
        .into_iter()
        .find(|k| k.name() == kind)
        .ok_or_else(|| err(format!("unknown experiment kind '{kind}'")))?;
    let dir = cli::run(kind, &config, out.as_deref()).map_err(|e| err(e.record()))?;
    Ok(dir.display().to_string())
}

#[pymodule]
fn fracdim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FracdimError", m.py().get_type::<FracdimError>())?;
    m.add_class::<PyIfs>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PySampleSet>()?;
    m.add_function(wrap_pyfunction!(push_samples, m)?)?;
    m.add_function(wrap_pyfunction!(convolution_samples, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_samples, m)?)?;
    m.add_function(wrap_pyfunction!(planar_projection_samples, m)?)?;
    m.add_function(wrap_pyfunction!(diagonal_affine_samples, m)?)?;
    m.add_function(wrap_pyfunction!(projection_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(orthogonal_projection_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(convolution_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(multiplicative_dependence, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_dimension_diagonal, m)?)?;
    m.add_function(wrap_pyfunction!(lq_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tau, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_min, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
