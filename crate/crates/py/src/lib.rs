//! Python bindings for the sorted-huber library: weight sequences, prox and
//! loss evaluations, synthetic datasets, fitting, and tuning defaults.
//!
//! The surface sticks to plain Python types: matrices cross the boundary as
//! nested lists (row major), enums as the same SCREAMING_SNAKE_CASE strings
//! the CLI uses, and errors become ValueError.

use ndarray::{Array1, Array2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sorted_huber::datagen::{self, GroundTruthSpec, TruthKind};
use sorted_huber::norms::{self, NormTag, WeightSequence};
use sorted_huber::prox;
use sorted_huber::rates::{self, DecompRate, DimCase, RateConstants, TuningCase};
use sorted_huber::solvers::{self, Problem, SolveMode, SolverOptions};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_to_lists(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix_from_lists(rows: &[Vec<f64>], what: &str) -> PyResult<Array2<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(err(format!("{what} must be a non-empty list of non-empty rows")));
    }
    let mut flat = Vec::with_capacity(nrows * ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(err(format!("{what} row {i} has length {}, expected {ncols}", row.len())));
        }
        flat.extend_from_slice(row);
    }
    Array2::from_shape_vec((nrows, ncols), flat).map_err(err)
}

fn truth_kind(kind: &str) -> PyResult<TruthKind> {
    match kind {
        "SPARSE_VECTOR" => Ok(TruthKind::SparseVector),
        "LOW_RANK" => Ok(TruthKind::LowRank),
        "LOW_RANK_PLUS_SPARSE" => Ok(TruthKind::LowRankPlusSparse),
        other => Err(err(format!(
            "unknown truth kind {other:?}; expected SPARSE_VECTOR, LOW_RANK or LOW_RANK_PLUS_SPARSE"
        ))),
    }
}

fn solve_mode(mode: &str) -> PyResult<SolveMode> {
    match mode {
        "DECOMP_Q2" => Ok(SolveMode::DecompQ2),
        "SINGLE_Q2" => Ok(SolveMode::SingleQ2),
        "SINGLE_Q1" => Ok(SolveMode::SingleQ1),
        other => Err(err(format!(
            "unknown mode {other:?}; expected DECOMP_Q2, SINGLE_Q2 or SINGLE_Q1"
        ))),
    }
}

fn reg_tag(reg: &str, p: usize, weight_const: f64) -> PyResult<NormTag> {
    match reg {
        "NUCLEAR" => Ok(NormTag::Nuclear),
        "L1" => Ok(NormTag::L1),
        "SLOPE_P" => Ok(NormTag::SlopeP(norms::slope_weights(p, weight_const).map_err(err)?)),
        other => Err(err(format!(
            "unknown regularizer {other:?}; expected NUCLEAR, L1 or SLOPE_P"
        ))),
    }
}

/// Nonincreasing positive weight sequence for sorted-l1 penalties.
#[pyclass(module = "sorted_huber_py", skip_from_py_object)]
#[derive(Clone)]
struct Weights {
    inner: WeightSequence,
}

#[pymethods]
impl Weights {
    /// Logarithmic sequence `sqrt(ln(a_const * n / i))`, i = 1..n.
    #[staticmethod]
    fn slope(n: usize, a_const: f64) -> PyResult<Self> {
        Ok(Self { inner: norms::slope_weights(n, a_const).map_err(err)? })
    }

    /// All weights equal to `value`.
    #[staticmethod]
    fn constant(n: usize, value: f64) -> PyResult<Self> {
        Ok(Self { inner: WeightSequence::constant(n, value).map_err(err)? })
    }

    /// Wraps an explicit nonincreasing positive sequence.
    #[staticmethod]
    fn from_values(values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: WeightSequence::from_weights(values).map_err(err)? })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    /// Same length with every weight set to the largest one.
    fn flattened(&self) -> Self {
        Self { inner: self.inner.flattened() }
    }

    fn scaled(&self, c: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.scaled(c).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Weights(n={}, first={:.6})", self.inner.len(), self.inner.weights()[0])
    }
}

/// One synthetic regression dataset, optionally carrying its ground truth.
#[pyclass(module = "sorted_huber_py", skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: datagen::Dataset,
}

#[pymethods]
impl Dataset {
    /// Wraps an externally supplied design matrix (n x (d1*d2), row major
    /// per observation) and response vector; no ground truth attached.
    #[staticmethod]
    #[pyo3(signature = (design, y, d1, d2))]
    fn from_arrays(design: Vec<Vec<f64>>, y: Vec<f64>, d1: usize, d2: usize) -> PyResult<Self> {
        let design = matrix_from_lists(&design, "design")?;
        if design.ncols() != d1 * d2 {
            return Err(err(format!(
                "design has {} columns, expected d1*d2 = {}",
                design.ncols(),
                d1 * d2
            )));
        }
        if y.len() != design.nrows() {
            return Err(err(format!(
                "y has length {}, design has {} rows",
                y.len(),
                design.nrows()
            )));
        }
        Ok(Self {
            inner: datagen::Dataset { d1, d2, design, y: Array1::from_vec(y), truth: None },
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn d1(&self) -> usize {
        self.inner.d1
    }

    #[getter]
    fn d2(&self) -> usize {
        self.inner.d2
    }

    fn design(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(&self.inner.design)
    }

    fn y(&self) -> Vec<f64> {
        self.inner.y.to_vec()
    }

    /// True low-rank part as a d1 x d2 matrix, if the truth is known.
    fn truth_b(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.truth.as_ref().map(|t| matrix_to_lists(&t.b_star))
    }

    /// True sparse part as a d1 x d2 matrix, if the truth is known.
    fn truth_gamma(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.truth.as_ref().map(|t| matrix_to_lists(&t.gamma_star))
    }

    /// True per-observation corruptions, if the truth is known.
    fn truth_theta(&self) -> Option<Vec<f64>> {
        self.inner.truth.as_ref().map(|t| t.theta_star.to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, d1={}, d2={}, truth={})",
            self.inner.n(),
            self.inner.d1,
            self.inner.d2,
            self.inner.truth.is_some()
        )
    }
}

/// Output of `fit`: estimate blocks plus solver diagnostics.
#[pyclass(module = "sorted_huber_py")]
struct FitResult {
    #[pyo3(get)]
    b_hat: Vec<Vec<f64>>,
    #[pyo3(get)]
    gamma_hat: Vec<Vec<f64>>,
    #[pyo3(get)]
    theta_hat: Vec<f64>,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    sweeps: usize,
    #[pyo3(get)]
    kkt: f64,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl FitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(objective={:.6e}, sweeps={}, kkt={:.3e}, converged={})",
            self.objective, self.sweeps, self.kkt, self.converged
        )
    }
}

/// Slope norm of `u` under the given weights.
#[pyfunction]
fn slope_norm(u: Vec<f64>, w: &Weights) -> PyResult<f64> {
    norms::slope_norm(&u, &w.inner).map_err(err)
}

/// Prox of the slope penalty at `v` (unit step).
#[pyfunction]
fn prox_sorted_l1(v: Vec<f64>, w: &Weights) -> PyResult<Vec<f64>> {
    prox::prox_sorted_l1(&v, &w.inner).map_err(err)
}

/// Sorted Huber loss with quadratic base, `(value, minimizing shift)`.
#[pyfunction]
fn sorted_huber_q2(u: Vec<f64>, w: &Weights, tau: f64) -> PyResult<(f64, Vec<f64>)> {
    let out = prox::sorted_huber_q2(&u, &w.inner, tau).map_err(err)?;
    Ok((out.value, out.z))
}

/// Sorted Huber loss with root-mean-square base, `(value, minimizing shift)`.
#[pyfunction]
fn sorted_huber_q1(u: Vec<f64>, w: &Weights, tau: f64) -> PyResult<(f64, Vec<f64>)> {
    let out = prox::sorted_huber_q1(&u, &w.inner, tau).map_err(err)?;
    Ok((out.value, out.z))
}

/// Synthesizes a contaminated regression dataset with known ground truth.
///
/// `kind` is SPARSE_VECTOR, LOW_RANK or LOW_RANK_PLUS_SPARSE; `epsilon` is
/// the fraction of corrupted responses.
#[pyfunction]
#[pyo3(signature = (kind, d1, d2, n, epsilon, seed, s=0, r=0,
                    entry_value=1.0, spikeness_a=1.0, outlier_value=10.0, sigma=1.0))]
#[allow(clippy::too_many_arguments)]
fn make_dataset(
    kind: &str,
    d1: usize,
    d2: usize,
    n: usize,
    epsilon: f64,
    seed: u64,
    s: usize,
    r: usize,
    entry_value: f64,
    spikeness_a: f64,
    outlier_value: f64,
    sigma: f64,
) -> PyResult<Dataset> {
    let spec = GroundTruthSpec {
        kind: truth_kind(kind)?,
        s,
        r,
        entry_value,
        spikeness_a,
        outlier_value,
        sigma,
    };
    let inner = datagen::make_dataset(&spec, d1, d2, n, epsilon, seed).map_err(err)?;
    Ok(Dataset { inner })
}

/// Fits one robust estimator by proximal block descent.
///
/// `mode` is DECOMP_Q2, SINGLE_Q2 or SINGLE_Q1 and `regularizer` is NUCLEAR,
/// L1 or SLOPE_P. `tau = 0` disables the corruption block. `box_a = None`
/// means no entrywise bound on B; `flatten_weights` turns the sorted Huber
/// loss into the plain Huber loss.
#[pyfunction]
#[pyo3(signature = (dataset, mode, regularizer, lam, tau, chi=0.0, box_a=None,
                    weight_const=10.0, flatten_weights=false,
                    max_sweeps=None, tol_kkt=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    dataset: &Dataset,
    mode: &str,
    regularizer: &str,
    lam: f64,
    tau: f64,
    chi: f64,
    box_a: Option<f64>,
    weight_const: f64,
    flatten_weights: bool,
    max_sweeps: Option<usize>,
    tol_kkt: Option<f64>,
) -> PyResult<FitResult> {
    let data = dataset.inner.clone();
    let mode = solve_mode(mode)?;
    let reg = reg_tag(regularizer, data.p(), weight_const)?;
    let omega = norms::slope_weights(data.n(), weight_const).map_err(err)?;
    let omega = if flatten_weights { omega.flattened() } else { omega };
    let problem = Problem::new(
        data,
        mode,
        reg,
        lam,
        chi,
        tau,
        box_a.unwrap_or(f64::INFINITY),
        omega,
    )
    .map_err(err)?;
    let mut options = SolverOptions::default();
    if let Some(ms) = max_sweeps {
        options.max_sweeps = ms;
    }
    if let Some(tk) = tol_kkt {
        options.tol_kkt = tk;
    }
    let (est, report) = solvers::fit(&problem, &options, None).map_err(err)?;
    let objective = solvers::objective(&problem, &est).map_err(err)?;
    Ok(FitResult {
        b_hat: matrix_to_lists(&est.b_hat),
        gamma_hat: matrix_to_lists(&est.gamma_hat),
        theta_hat: est.theta_hat.to_vec(),
        objective,
        sweeps: report.sweeps_used,
        kkt: report.kkt_residual,
        converged: report.converged,
    })
}

fn dim_case(regularizer: &str, s: usize, r: usize, d1: usize, d2: usize) -> PyResult<DimCase> {
    Ok(match regularizer {
        "L1" => DimCase::SparseL1 { s, p: d1 * d2 },
        "SLOPE_P" => DimCase::SparseSlope { s, p: d1 * d2 },
        "NUCLEAR" => DimCase::Trace { r, d1, d2 },
        other => Err(err(format!(
            "unknown regularizer {other:?}; expected NUCLEAR, L1 or SLOPE_P"
        )))?,
    })
}

/// Theory-driven regularization levels `(lambda, chi, tau)`.
///
/// For the single-parameter modes `regularizer` picks the penalty geometry
/// and `chi` comes back as 0; the decomposition mode also needs the peak
/// size `a_star` of the low-rank part.
#[pyfunction]
#[pyo3(signature = (mode, n, sigma, d1, d2, regularizer="NUCLEAR", s=0, r=0, a_star=1.0, l=1.0))]
#[allow(clippy::too_many_arguments)]
fn default_tuning(
    mode: &str,
    n: usize,
    sigma: f64,
    d1: usize,
    d2: usize,
    regularizer: &str,
    s: usize,
    r: usize,
    a_star: f64,
    l: f64,
) -> PyResult<(f64, f64, f64)> {
    let case = match solve_mode(mode)? {
        SolveMode::DecompQ2 => TuningCase::Decomp { d1, d2, p: d1 * d2, a_star },
        SolveMode::SingleQ2 => TuningCase::SingleQ2 { dim: dim_case(regularizer, s, r, d1, d2)? },
        SolveMode::SingleQ1 => TuningCase::SingleQ1 { dim: dim_case(regularizer, s, r, d1, d2)? },
    };
    let t = rates::default_tuning(&case, n, sigma, l, &RateConstants::default()).map_err(err)?;
    Ok((t.lambda, t.chi, t.tau))
}

/// Effective dimension of one structure class.
#[pyfunction]
#[pyo3(signature = (regularizer, d1, d2, s=0, r=0))]
fn effective_dim(regularizer: &str, d1: usize, d2: usize, s: usize, r: usize) -> PyResult<f64> {
    rates::effective_dim(&dim_case(regularizer, s, r, d1, d2)?).map_err(err)
}

/// Predicted estimation-error rate for a single-parameter estimator.
#[pyfunction]
#[pyo3(signature = (n, d_eff, delta=0.36787944117144233, rho=1.0, mu=1.0, l=1.0))]
fn rate_single(n: usize, d_eff: f64, delta: f64, rho: f64, mu: f64, l: f64) -> PyResult<f64> {
    rates::rate_single(n, d_eff, delta, rho, mu, l).map_err(err)
}

/// Predicted estimation-error rate for the additive decomposition estimator.
#[pyfunction]
#[pyo3(signature = (n, r, s, d1, d2, sigma, a_star=1.0,
                    delta=0.36787944117144233, c1=1.0, l=1.0))]
#[allow(clippy::too_many_arguments)]
fn rate_decomp(
    n: usize,
    r: usize,
    s: usize,
    d1: usize,
    d2: usize,
    sigma: f64,
    a_star: f64,
    delta: f64,
    c1: f64,
    l: f64,
) -> PyResult<f64> {
    let params = DecompRate { n, r, s, d1, d2, p: d1 * d2, delta, a_star, c1, l, sigma };
    rates::rate_decomp(&params).map_err(err)
}

/// Contamination term `eps * ln(1/eps)` appearing in the error rates.
#[pyfunction]
fn omega_eps(eps: f64) -> PyResult<f64> {
    rates::omega_eps(eps).map_err(err)
}

#[pymodule]
fn sorted_huber_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Weights>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(slope_norm, m)?)?;
    m.add_function(wrap_pyfunction!(prox_sorted_l1, m)?)?;
    m.add_function(wrap_pyfunction!(sorted_huber_q2, m)?)?;
    m.add_function(wrap_pyfunction!(sorted_huber_q1, m)?)?;
    m.add_function(wrap_pyfunction!(make_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(default_tuning, m)?)?;
    m.add_function(wrap_pyfunction!(effective_dim, m)?)?;
    m.add_function(wrap_pyfunction!(rate_single, m)?)?;
    m.add_function(wrap_pyfunction!(rate_decomp, m)?)?;
    m.add_function(wrap_pyfunction!(omega_eps, m)?)?;
    Ok(())
}
