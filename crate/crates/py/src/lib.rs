//! Python bindings: quantizer, codebooks, encode/decode, network simulation,
//! rate bounds and the experiment harness.

use dsq_core::codec::{encode_sequence, Codebook, CodebookHeader, Codeword, QuantizerSpec};
use dsq_core::decoder::decode as core_decode;
use dsq_core::harness::{self, ExperimentConfig, Scheme};
use dsq_core::network::{connectivity_report, simulate_network as core_simulate, LinkFailureProcess, NetworkTopology};
use dsq_core::ratebound::{self, RateQuery};
use dsq_core::{Error, SparsityModel};
use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Divergence(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// Dead-zone scalar quantizer with `l` nonzero levels over `[-gamma, gamma]`.
#[pyclass(name = "Quantizer", frozen)]
struct PyQuantizer(QuantizerSpec);

#[pymethods]
impl PyQuantizer {
    #[new]
    #[pyo3(signature = (l, gamma = 2.0))]
    fn new(l: usize, gamma: f64) -> PyResult<Self> {
        QuantizerSpec::new(l, gamma).map(Self).map_err(py_err)
    }

    #[getter]
    fn l(&self) -> usize {
        self.0.l()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta()
    }

    /// Reproduction levels; index 0 is the zero level.
    #[getter]
    fn levels(&self) -> Vec<f64> {
        self.0.levels().to_vec()
    }

    fn quantize(&self, s: f64) -> (usize, f64) {
        self.0.quantize(s)
    }

    fn __repr__(&self) -> String {
        format!("Quantizer(l={}, gamma={})", self.0.l(), self.0.gamma())
    }
}

/// The per-encoder codebooks regenerated from a header.
#[pyclass(name = "Codebooks", frozen)]
struct PyCodebooks {
    header: CodebookHeader,
    books: Vec<Codebook>,
}

impl PyCodebooks {
    fn book(&self, m: usize) -> PyResult<&Codebook> {
        self.books
            .get(m)
            .ok_or_else(|| PyValueError::new_err(format!("encoder {m} out of range (n = {})", self.books.len())))
    }
}

#[pymethods]
impl PyCodebooks {
    #[new]
    #[pyo3(signature = (n, t, l, b, k, master_seed))]
    fn new(n: usize, t: usize, l: usize, b: usize, k: usize, master_seed: u64) -> PyResult<Self> {
        let header = CodebookHeader::new(n, t, l, b, k, master_seed);
        let books = header.regenerate().map_err(py_err)?;
        Ok(Self { header, books })
    }

    #[staticmethod]
    fn from_header(text: &str) -> PyResult<Self> {
        let header = CodebookHeader::from_toml(text).map_err(py_err)?;
        let books = header.regenerate().map_err(py_err)?;
        Ok(Self { header, books })
    }

    fn header(&self) -> String {
        self.header.to_toml()
    }

    #[getter]
    fn n(&self) -> usize {
        self.header.n
    }

    #[getter]
    fn t(&self) -> usize {
        self.header.t
    }

    #[getter]
    fn l(&self) -> usize {
        self.header.l
    }

    #[getter]
    fn b(&self) -> usize {
        self.header.b
    }

    /// Codeword of encoder `m` for time `i` and level `j` as a bit string.
    fn codeword(&self, m: usize, i: usize, j: usize) -> PyResult<String> {
        let book = self.book(m)?;
        if i >= book.t() || j == 0 || j > book.l() {
            return Err(PyValueError::new_err(format!("no codeword at i={i}, j={j}")));
        }
        Ok(book.codeword(i, j).to_string())
    }

    /// Fraction of ones over all codebooks.
    fn density(&self) -> f64 {
        let ones: u64 = self.books.iter().map(Codebook::count_ones).sum();
        let bits: u64 = self.books.iter().map(Codebook::bit_count).sum();
        ones as f64 / bits as f64
    }

    #[pyo3(signature = (m, samples, gamma = 2.0))]
    fn encode(&self, m: usize, samples: Vec<f64>, gamma: f64) -> PyResult<String> {
        let q = QuantizerSpec::new(self.header.l, gamma).map_err(py_err)?;
        encode_sequence(self.book(m)?, &q, &samples).map(|c| c.to_string()).map_err(py_err)
    }

    /// ML decode of a fused register. Returns a dict with `status`, `covers`,
    /// `triples` (m, i, j) and the `estimate` rows.
    #[pyo3(signature = (y, model, gamma = 2.0, unreachable = None))]
    fn decode<'py>(
        &self,
        py: Python<'py>,
        y: &str,
        model: &str,
        gamma: f64,
        unreachable: Option<Vec<usize>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let y: Codeword = parse(y)?;
        let model: SparsityModel = parse(model)?;
        let q = QuantizerSpec::new(self.header.l, gamma).map_err(py_err)?;
        let mut reach = vec![true; self.books.len()];
        for m in unreachable.unwrap_or_default() {
            *reach.get_mut(m).ok_or_else(|| PyValueError::new_err(format!("encoder {m} out of range")))? = false;
        }
        let (outcome, result) = core_decode(&y, &self.books, &model, &q, reach).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("status", outcome.status.as_str())?;
        d.set_item("covers", outcome.covers)?;
        d.set_item("triples", outcome.hypothesis.triples())?;
        d.set_item("estimate", rows(&result.estimate))?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let h = &self.header;
        format!("Codebooks(n={}, t={}, l={}, b={}, k={}, master_seed={})", h.n, h.t, h.l, h.b, h.k, h.master_seed)
    }
}

/// Runs bit strings through an OR-relay network. `topology` is `src dst` text
/// or `None` for single-hop; `failures` uses the CLI failure-file syntax.
#[pyfunction]
#[pyo3(signature = (inputs, topology = None, failures = None))]
fn simulate_network<'py>(
    py: Python<'py>,
    inputs: Vec<String>,
    topology: Option<&str>,
    failures: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let inputs = inputs.iter().map(|s| parse::<Codeword>(s)).collect::<PyResult<Vec<_>>>()?;
    let topo = match topology {
        Some(text) => NetworkTopology::parse(text).map_err(py_err)?,
        None => NetworkTopology::single_hop(inputs.len()).map_err(py_err)?,
    };
    let process = match failures {
        Some(text) => LinkFailureProcess::parse(text).map_err(py_err)?,
        None => LinkFailureProcess::None,
    };
    let state = process.realize(&topo).map_err(py_err)?;
    let out = core_simulate(&topo, &state, &inputs).map_err(py_err)?;
    let report = connectivity_report(&topo, &state).map_err(py_err)?;
    let b = inputs.first().map_or(0, Codeword::len);
    let y = dsq_core::decoder::fuse_outputs(b, &out.outputs).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("outputs", out.outputs.iter().map(|c| c.to_string()).collect::<Vec<_>>())?;
    d.set_item("y", y.to_string())?;
    d.set_item("reachable", out.reachable)?;
    d.set_item("min_cut", report.min_cut)?;
    Ok(d)
}

/// `(R, u)`: the rate threshold at resolution `l` and its maximizing `u`.
#[pyfunction]
#[pyo3(signature = (l, n, t, model, epsilon = 1.0))]
fn rate_threshold(l: usize, n: usize, t: usize, model: &str, epsilon: f64) -> PyResult<(f64, usize)> {
    let query = RateQuery::new(n, t, parse(model)?, epsilon).map_err(py_err)?;
    let th = ratebound::rate_threshold(&query, l).map_err(py_err)?;
    Ok((th.rate, th.u))
}

#[pyfunction]
#[pyo3(signature = (rate, n, t, k, epsilon = 1.0))]
fn resolution_for_rate(rate: f64, n: usize, t: usize, k: usize, epsilon: f64) -> PyResult<usize> {
    ratebound::resolution_for_rate(rate, n, t, k, epsilon).map_err(py_err)
}

fn config(overrides: Option<Vec<String>>) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_overrides(&overrides.unwrap_or_default()).map_err(py_err)
}

/// One end-to-end trial. `overrides` are `section.key=value` strings.
#[pyfunction]
#[pyo3(signature = (seed, scheme = "proposed", overrides = None))]
fn run_trial<'py>(
    py: Python<'py>,
    seed: u64,
    scheme: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(overrides)?.with_scheme(parse::<Scheme>(scheme)?);
    let out = harness::run_trial_detailed(&cfg, seed).map_err(py_err)?;
    let r = &out.record;
    let d = PyDict::new(py);
    d.set_item("seed", r.seed)?;
    d.set_item("scheme", r.scheme.as_str())?;
    d.set_item("R", r.rate)?;
    d.set_item("b", r.b)?;
    d.set_item("l", r.l)?;
    d.set_item("epsilon", r.epsilon)?;
    d.set_item("mse", r.mse)?;
    d.set_item("status", r.status.as_str())?;
    d.set_item("ms", r.ms)?;
    d.set_item("signals", rows(out.signals.values()))?;
    d.set_item("estimate", rows(&out.estimate))?;
    d.set_item("reachable", out.reachable)?;
    Ok(d)
}

/// Rate sweep; returns `(trial_csv, summary_csv)`.
#[pyfunction]
#[pyo3(signature = (rates, trials, overrides = None))]
fn sweep_rate(rates: Vec<f64>, trials: usize, overrides: Option<Vec<String>>) -> PyResult<(String, String)> {
    let cfg = config(overrides)?;
    let sweep = harness::sweep_rate(&cfg, &rates, trials).map_err(py_err)?;
    let trials = harness::trial_csv(&sweep.records).map_err(py_err)?;
    let summary = harness::summary_csv(&sweep.summary).map_err(py_err)?;
    Ok((trials, summary))
}

/// Threshold curves as CSV text with columns `model,k,k_s,k_t,n,T,epsilon,l,R,u`.
#[pyfunction]
#[pyo3(signature = (n, t, models, l_grid, epsilon = 1.0))]
fn sweep_resolution(n: usize, t: usize, models: Vec<String>, l_grid: Vec<usize>, epsilon: f64) -> PyResult<String> {
    let models = models.iter().map(|s| parse::<SparsityModel>(s)).collect::<PyResult<Vec<_>>>()?;
    let rows = harness::sweep_resolution(n, t, &models, epsilon, &l_grid).map_err(py_err)?;
    harness::resolution_csv(&rows).map_err(py_err)
}

#[pymodule]
fn dsq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuantizer>()?;
    m.add_class::<PyCodebooks>()?;
    m.add_function(wrap_pyfunction!(simulate_network, m)?)?;
    m.add_function(wrap_pyfunction!(rate_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(resolution_for_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_rate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_resolution, m)?)?;
    Ok(())
}
