//! Python bindings: datasets, the simulation generator, nonparametric
//! estimators, penalized Fine–Gray fits, boosting, forests, DeepHit and the
//! evaluation metrics.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cmprisk::coxboost::{boost_fit, choose_steps_cv, default_penalty, BoostConfig};
use cmprisk::deephit::{fit_network, DeepHitModel, NetConfig};
use cmprisk::finegray::{fit_path as core_fit_path, select_bic as core_select_bic, PenaltyKind};
use cmprisk::forest::{fit_forest, minimal_depth, variable_importance, ForestConfig};
use cmprisk::metrics::{auc_t, cindex as core_cindex, ibs_t, tpr_fdr as core_tpr_fdr, DEFAULT_HORIZON};
use cmprisk::nonparam::{aalen_johansen_cif, censoring_survival as core_censoring, km_event_free_survival, nelson_aalen_csh};
use cmprisk::psdh::PsdhModel;
use cmprisk::simgen::{generate, ScenarioSpec};
use cmprisk::{CsvSchema, Error, SubjectRecord};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) | Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        Error::Io(_) => pyo3::exceptions::PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Right-censored competing-risk data. Status 0 is censoring.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: cmprisk::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (times, status, covariates, n_causes = None))]
    fn new(times: Vec<f64>, status: Vec<u32>, covariates: Vec<Vec<f64>>, n_causes: Option<u32>) -> PyResult<Self> {
        if times.len() != status.len() || times.len() != covariates.len() {
            return Err(PyValueError::new_err("times, status and covariates must have equal length"));
        }
        let k = n_causes.unwrap_or_else(|| status.iter().copied().max().unwrap_or(1).max(1));
        let records = times
            .into_iter()
            .zip(status)
            .zip(covariates)
            .map(|((t, s), x)| SubjectRecord::new(t, s, x))
            .collect();
        Ok(Self { inner: cmprisk::Dataset::from_records(records, k).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (path, time = "time", status = "status"))]
    fn read_csv(path: &str, time: &str, status: &str) -> PyResult<Self> {
        let schema = CsvSchema { time: time.into(), status: status.into(), ..CsvSchema::default() };
        Ok(Self { inner: cmprisk::Dataset::load_csv(path, &schema).map_err(to_py)? })
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        self.inner.save_csv(path).map_err(to_py)
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
    fn n_causes(&self) -> u32 {
        self.inner.n_causes()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.inner.covariate_names().to_vec()
    }

    fn times(&self) -> Vec<f64> {
        (0..self.inner.n()).map(|i| self.inner.time(i)).collect()
    }

    fn status(&self) -> Vec<u32> {
        (0..self.inner.n()).map(|i| self.inner.status(i)).collect()
    }

    fn covariates(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n()).map(|i| self.inner.x(i).to_vec()).collect()
    }

    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        if indices.iter().any(|&i| i >= self.inner.n()) {
            return Err(PyValueError::new_err("row index out of range"));
        }
        Ok(Self { inner: self.inner.subset(&indices) })
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={}, n_causes={})", self.inner.n(), self.inner.p(), self.inner.n_causes())
    }
}

/// Right-continuous step function.
#[pyclass(name = "StepFunction", frozen)]
struct PyStep {
    inner: cmprisk::StepFunction,
}

#[pymethods]
impl PyStep {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn value_before_first(&self) -> f64 {
        self.inner.value_before_first()
    }

    fn __call__(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    fn __repr__(&self) -> String {
        format!("StepFunction({} jumps)", self.inner.len())
    }
}

fn step(inner: cmprisk::StepFunction) -> PyStep {
    PyStep { inner }
}

#[pyfunction]
#[pyo3(signature = (n, p, seed = 1, cortype = "independent", r = 0.0, r_b = 0.0, model = "linear"))]
fn simulate(n: usize, p: usize, seed: u64, cortype: &str, r: f64, r_b: f64, model: &str) -> PyResult<PyDataset> {
    let spec = ScenarioSpec {
        cortype: cortype.parse().map_err(to_py)?,
        model: model.parse().map_err(to_py)?,
        r,
        r_b,
        ..ScenarioSpec::new(n, p, seed)
    };
    Ok(PyDataset { inner: generate(&spec).map_err(to_py)? })
}

/// Kaplan–Meier estimate of event-free survival.
#[pyfunction]
fn kaplan_meier(data: &PyDataset) -> PyStep {
    step(km_event_free_survival(&data.inner))
}

#[pyfunction]
fn censoring_survival(data: &PyDataset) -> PyStep {
    step(core_censoring(&data.inner))
}

#[pyfunction]
#[pyo3(signature = (data, cause = 1))]
fn aalen_johansen(data: &PyDataset, cause: u32) -> PyResult<PyStep> {
    Ok(step(aalen_johansen_cif(&data.inner, cause).map_err(to_py)?))
}

#[pyfunction]
#[pyo3(signature = (data, cause = 1))]
fn nelson_aalen(data: &PyDataset, cause: u32) -> PyResult<PyStep> {
    Ok(step(nelson_aalen_csh(&data.inner, cause).map_err(to_py)?))
}

/// One penalized Fine–Gray fit on a regularization path.
#[pyclass(name = "PenalizedFit", frozen)]
struct PyFit {
    inner: cmprisk::finegray::FitResult,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn penalty(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }

    #[getter]
    fn selected(&self) -> Vec<usize> {
        self.inner.selected.clone()
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn bic(&self) -> f64 {
        self.inner.bic
    }

    #[getter]
    fn log_likelihood(&self) -> f64 {
        self.inner.log_partial_likelihood
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    /// Event-1 CIF for covariates `x`, with the baseline refitted on `data`.
    fn predict_cif(&self, data: &PyDataset, x: Vec<f64>) -> PyResult<PyStep> {
        let model = self.inner.model(&data.inner).map_err(to_py)?;
        psdh_predict(&model, &x)
    }

    fn __repr__(&self) -> String {
        format!("PenalizedFit({}, lambda={}, nonzero={})", self.inner.kind.name(), self.inner.lambda, self.inner.df())
    }
}

fn psdh_predict(model: &PsdhModel, x: &[f64]) -> PyResult<PyStep> {
    if x.len() != model.beta.len() {
        return Err(PyValueError::new_err(format!("expected {} covariates", model.beta.len())));
    }
    Ok(step(model.predict_cif(x)))
}

/// Warm-started path for `penalty` in {"lasso", "scad", "mcp"}. Failed
/// lambdas are skipped.
#[pyfunction]
#[pyo3(signature = (data, penalty = "lasso", n_lambda = 20))]
fn fit_path(py: Python<'_>, data: &PyDataset, penalty: &str, n_lambda: usize) -> PyResult<Vec<PyFit>> {
    let kind: PenaltyKind = penalty.parse().map_err(to_py)?;
    let path = py.detach(|| core_fit_path(&data.inner, kind, n_lambda)).map_err(to_py)?;
    Ok(path.into_iter().filter_map(|f| f.ok()).map(|inner| PyFit { inner }).collect())
}

/// Path entry with the smallest BIC among converged fits.
#[pyfunction]
fn select_bic(path: Vec<PyRef<'_, PyFit>>, n: usize) -> PyResult<PyFit> {
    let fits: Vec<_> = path.iter().map(|f| f.inner.clone()).filter(|f| f.converged).collect();
    Ok(PyFit { inner: core_select_bic(&fits, n).map_err(to_py)? })
}

#[pyclass(name = "BoostFit", frozen)]
struct PyBoost {
    inner: cmprisk::coxboost::BoostTrace,
    model: PsdhModel,
}

#[pymethods]
impl PyBoost {
    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }

    #[getter]
    fn selected(&self) -> Vec<usize> {
        self.inner.selected.clone()
    }

    #[getter]
    fn selected_by_step(&self) -> Vec<usize> {
        self.inner.selected_by_step.clone()
    }

    #[getter]
    fn log_likelihood(&self) -> Vec<f64> {
        self.inner.loglik_by_step.clone()
    }

    fn predict_cif(&self, x: Vec<f64>) -> PyResult<PyStep> {
        psdh_predict(&self.model, &x)
    }
}

/// Componentwise likelihood boosting. `penalty` defaults to nine times the
/// number of type-1 events.
#[pyfunction]
#[pyo3(signature = (data, steps = 100, penalty = None))]
fn boost(py: Python<'_>, data: &PyDataset, steps: usize, penalty: Option<f64>) -> PyResult<PyBoost> {
    let ds = &data.inner;
    let mut config = BoostConfig::for_dataset(ds, steps);
    if let Some(l) = penalty {
        config.lambda = l;
    }
    let trace = py.detach(|| boost_fit(ds, &config)).map_err(to_py)?;
    let model = trace.model(ds).map_err(to_py)?;
    Ok(PyBoost { inner: trace, model })
}

/// Number of boosting steps chosen by K-fold cross-validation.
#[pyfunction]
#[pyo3(signature = (data, folds = 10, max_steps = 100, seed = 1))]
fn choose_boost_steps(py: Python<'_>, data: &PyDataset, folds: usize, max_steps: usize, seed: u64) -> PyResult<usize> {
    let ds = &data.inner;
    py.detach(|| choose_steps_cv(ds, folds, max_steps, default_penalty(ds), seed)).map_err(to_py)
}

#[pyclass(name = "Forest", frozen)]
struct PyForest {
    inner: cmprisk::forest::Forest,
}

#[pymethods]
impl PyForest {
    #[new]
    #[pyo3(signature = (data, n_trees = 100, seed = 0, rule = "gray", min_node_size = 6, cause = 1, horizon = DEFAULT_HORIZON))]
    fn new(
        py: Python<'_>,
        data: &PyDataset,
        n_trees: usize,
        seed: u64,
        rule: &str,
        min_node_size: usize,
        cause: u32,
        horizon: f64,
    ) -> PyResult<Self> {
        let ds = &data.inner;
        let config = ForestConfig {
            n_trees,
            rule: rule.parse().map_err(to_py)?,
            min_node_size,
            cause,
            horizon,
            ..ForestConfig::for_dataset(ds, seed)
        };
        Ok(Self { inner: py.detach(|| fit_forest(ds, &config)).map_err(to_py)? })
    }

    #[pyo3(signature = (x, cause = 1))]
    fn predict_cif(&self, x: Vec<f64>, cause: u32) -> PyResult<PyStep> {
        Ok(step(self.inner.predict_cif(&x, cause).map_err(to_py)?))
    }

    /// Permutation importance on the training data: `(vimp, degenerate_trees)`.
    fn importance(&self, py: Python<'_>, data: &PyDataset) -> PyResult<(Vec<f64>, usize)> {
        let imp = py.detach(|| variable_importance(&self.inner, &data.inner)).map_err(to_py)?;
        Ok((imp.vimp, imp.degenerate))
    }

    fn minimal_depth(&self) -> Vec<f64> {
        minimal_depth(&self.inner)
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.trees.len()
    }
}

#[pyclass(name = "DeepHit", frozen)]
struct PyDeepHit {
    inner: DeepHitModel,
}

#[pymethods]
impl PyDeepHit {
    #[new]
    #[pyo3(signature = (
        data, epochs = 200, bins = 50, alpha = 0.1, sigma = 0.1, learning_rate = 1e-3,
        batch_size = 32, seed = 0, shared_layers = vec![128, 128], cause_layers = vec![64]
    ))]
    fn new(
        py: Python<'_>,
        data: &PyDataset,
        epochs: usize,
        bins: usize,
        alpha: f64,
        sigma: f64,
        learning_rate: f64,
        batch_size: usize,
        seed: u64,
        shared_layers: Vec<usize>,
        cause_layers: Vec<usize>,
    ) -> PyResult<Self> {
        let config = NetConfig {
            bins,
            shared_layers,
            cause_layers,
            alpha,
            sigma,
            learning_rate,
            epochs,
            batch_size,
            seed,
            ..NetConfig::default()
        };
        Ok(Self { inner: py.detach(|| fit_network(&data.inner, &config)).map_err(to_py)? })
    }

    /// Joint pmf as a `causes x bins` nested list.
    fn predict_pmf(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let pmf = self.inner.predict_pmf(&x).map_err(to_py)?;
        Ok(pmf.values.chunks(pmf.bins).map(<[f64]>::to_vec).collect())
    }

    #[pyo3(signature = (x, cause = 1))]
    fn predict_cif(&self, x: Vec<f64>, cause: usize) -> PyResult<PyStep> {
        Ok(step(self.inner.predict_cif(&x, cause).map_err(to_py)?))
    }

    #[getter]
    fn edges(&self) -> Vec<f64> {
        self.inner.edges.clone()
    }

    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.inner.loss_history.clone()
    }
}

#[pyfunction]
#[pyo3(signature = (risks, data, cause = 1, horizon = DEFAULT_HORIZON))]
fn cindex(risks: Vec<f64>, data: &PyDataset, cause: u32, horizon: f64) -> PyResult<Option<f64>> {
    core_cindex(&risks, &data.inner, cause, horizon).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (risks, data, cause = 1, horizon = DEFAULT_HORIZON))]
fn auc(risks: Vec<f64>, data: &PyDataset, cause: u32, horizon: f64) -> PyResult<Option<f64>> {
    let g = core_censoring(&data.inner);
    auc_t(&risks, &data.inner, cause, horizon, &g).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (cifs, data, cause = 1, horizon = DEFAULT_HORIZON))]
fn ibs(cifs: Vec<PyRef<'_, PyStep>>, data: &PyDataset, cause: u32, horizon: f64) -> PyResult<f64> {
    let curves: Vec<cmprisk::StepFunction> = cifs.iter().map(|c| c.inner.clone()).collect();
    ibs_t(&curves, &data.inner, cause, horizon).map_err(to_py)
}

#[pyfunction]
fn tpr_fdr(selected: Vec<usize>, true_set: Vec<usize>) -> PyResult<(f64, f64)> {
    core_tpr_fdr(&selected, &true_set).map_err(to_py)
}

#[pymodule]
fn cmprisk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyStep>()?;
    m.add_class::<PyFit>()?;
    m.add_class::<PyBoost>()?;
    m.add_class::<PyForest>()?;
    m.add_class::<PyDeepHit>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(kaplan_meier, m)?)?;
    m.add_function(wrap_pyfunction!(censoring_survival, m)?)?;
    m.add_function(wrap_pyfunction!(aalen_johansen, m)?)?;
    m.add_function(wrap_pyfunction!(nelson_aalen, m)?)?;
    m.add_function(wrap_pyfunction!(fit_path, m)?)?;
    m.add_function(wrap_pyfunction!(select_bic, m)?)?;
    m.add_function(wrap_pyfunction!(boost, m)?)?;
    m.add_function(wrap_pyfunction!(choose_boost_steps, m)?)?;
    m.add_function(wrap_pyfunction!(cindex, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(ibs, m)?)?;
    m.add_function(wrap_pyfunction!(tpr_fdr, m)?)?;
    Ok(())
}
