//! Python bindings: panels, simulation from TOML configs, estimators,
//! the MSE-difference theory and the design advisor.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use switchback::design::DesignSpec;
use switchback::estimators::{run_estimator, EstimatorId, EstimatorOptions};
use switchback::harness::{residual_correlation, run_experiment, simulate_from_config, ExperimentConfig, SimulationConfig};
use switchback::theory::{
    recommend_design, AdvisorThresholds, CarryoverEvidence, CorrelationEvidence, WorkflowInput,
};
use switchback::{DesignKind, ErrorCovSpec};

fn err(e: switchback::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Days × intervals panel of states, actions and rewards.
#[pyclass(name = "Panel", module = "switchback_py")]
struct PyPanel {
    inner: switchback::Panel,
}

#[pymethods]
impl PyPanel {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(PyPanel {
            inner: switchback::Panel::read_csv(text.as_bytes()).map_err(err)?,
        })
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Rewards as a list of days, each a list over intervals.
    fn rewards(&self) -> Vec<Vec<f64>> {
        let r = &self.inner.rewards;
        (0..r.nrows()).map(|i| r.row(i).iter().copied().collect()).collect()
    }

    fn actions(&self) -> Vec<Vec<u8>> {
        let a = &self.inner.actions;
        (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Panel(n={}, horizon={}, dim={})", self.inner.n(), self.inner.horizon(), self.inner.dim())
    }
}

fn design_kind(kind: &str, block: Option<usize>) -> PyResult<DesignKind> {
    let need = || block.ok_or_else(|| PyValueError::new_err(format!("design {kind:?} needs a block length")));
    Ok(match kind {
        "switchback" => DesignKind::Switchback { block: need()? },
        "regular_bernoulli" => DesignKind::RegularBernoulli { block: need()? },
        "alternating_day" => DesignKind::AlternatingDay,
        other => return Err(PyValueError::new_err(format!("unknown design {other:?}"))),
    })
}

/// Simulates one panel from a simulation config; returns `(panel, true_ate)`.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn simulate(config: &str, seed: Option<u64>) -> PyResult<(PyPanel, f64)> {
    let mut cfg = SimulationConfig::from_toml(config).map_err(err)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    let out = simulate_from_config(&cfg).map_err(err)?;
    Ok((PyPanel { inner: out.panel }, out.true_ate))
}

/// Runs estimator `estimator` ("ols", "lstd", "drl", ...) on a panel
/// collected under the given design.
#[pyfunction]
#[pyo3(signature = (estimator, panel, design, block=None))]
fn estimate(estimator: &str, panel: &PyPanel, design: &str, block: Option<usize>) -> PyResult<f64> {
    let id: EstimatorId = estimator.parse().map_err(err)?;
    let spec = DesignSpec::new(design_kind(design, block)?, panel.inner.horizon()).map_err(err)?;
    run_estimator(id, &panel.inner, &spec, &EstimatorOptions::default()).map_err(err)
}

fn cov_spec(family: &str, rho: Option<f64>, window: Option<usize>, variance: f64) -> PyResult<ErrorCovSpec> {
    let rho = || rho.ok_or_else(|| PyValueError::new_err(format!("family {family:?} needs rho")));
    Ok(match family {
        "autoregressive" => ErrorCovSpec::Autoregressive { rho: rho()?, variance },
        "exchangeable" => ErrorCovSpec::Exchangeable { rho: rho()?, variance },
        "moving_average" => ErrorCovSpec::MovingAverage {
            window: window.ok_or_else(|| PyValueError::new_err("moving_average needs window"))?,
            variance,
        },
        "uncorrelated" => ErrorCovSpec::Uncorrelated { variance },
        other => return Err(PyValueError::new_err(format!("unknown covariance family {other:?}"))),
    })
}

/// Autocorrelation term of the MSE difference between alternating days and
/// an `m`-switchback; positive values favour the switchback.
#[pyfunction]
#[pyo3(signature = (family, horizon, m, rho=None, window=None, variance=1.0))]
fn autocorr_term(
    family: &str,
    horizon: usize,
    m: usize,
    rho: Option<f64>,
    window: Option<usize>,
    variance: f64,
) -> PyResult<f64> {
    let spec = cov_spec(family, rho, window, variance)?;
    switchback::theory::autocorr_term(&spec, horizon, m).map_err(err)
}

/// Correlation matrix of fitted reward residuals; `None` where undefined.
#[pyfunction]
fn residual_correlations(panel: &PyPanel) -> PyResult<Vec<Vec<Option<f64>>>> {
    let corr = residual_correlation(&panel.inner).map_err(err)?;
    let t_len = corr.matrix.nrows();
    Ok((0..t_len).map(|a| (0..t_len).map(|b| corr.get(a, b)).collect()).collect())
}

/// Returns `(recommendation, rationale)`. `carryover` is "weak", "strong"
/// or a discrepancy value; `residuals` is "positive", "uncorrelated",
/// "negative" or a mean correlation.
#[pyfunction]
#[pyo3(signature = (carryover, residuals, markov_ok=true))]
fn advise(carryover: &Bound<'_, PyAny>, residuals: &Bound<'_, PyAny>, markov_ok: bool) -> PyResult<(String, String)> {
    let carryover = if let Ok(d) = carryover.extract::<f64>() {
        CarryoverEvidence::Delta(d)
    } else {
        match carryover.extract::<String>()?.as_str() {
            "weak" => CarryoverEvidence::Weak,
            "strong" => CarryoverEvidence::Strong,
            other => return Err(PyValueError::new_err(format!("unknown carryover evidence {other:?}"))),
        }
    };
    let residuals = if let Ok(c) = residuals.extract::<f64>() {
        CorrelationEvidence::Mean(c)
    } else {
        match residuals.extract::<String>()?.as_str() {
            "positive" => CorrelationEvidence::Positive,
            "uncorrelated" => CorrelationEvidence::Uncorrelated,
            "negative" => CorrelationEvidence::Negative,
            other => return Err(PyValueError::new_err(format!("unknown residual evidence {other:?}"))),
        }
    };
    let advice = recommend_design(
        &WorkflowInput {
            markov_ok,
            carryover,
            residuals,
        },
        &AdvisorThresholds::default(),
    );
    Ok((advice.recommendation.to_string(), advice.rationale))
}

/// Runs an experiment grid and returns one dict per cell.
#[pyfunction]
#[pyo3(signature = (config, seed=None, jobs=None))]
fn experiment<'py>(
    py: Python<'py>,
    config: &str,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = ExperimentConfig::from_toml(config).map_err(err)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    if cfg.seed.is_none() {
        return Err(PyKeyError::new_err("seed"));
    }
    let report = py.detach(|| run_experiment(&cfg, jobs)).map_err(err)?;
    report
        .cells
        .iter()
        .map(|cell| {
            let d = PyDict::new(py);
            d.set_item("cov", &cell.cov_label)?;
            d.set_item("n", cell.key.n)?;
            d.set_item("m", cell.key.m)?;
            d.set_item("estimator", cell.key.estimator.as_str())?;
            d.set_item("excluded", cell.excluded)?;
            if let Some(m) = &cell.metrics {
                d.set_item("reps", m.reps)?;
                d.set_item("rmse", m.rmse)?;
                d.set_item("bias", m.bias)?;
                d.set_item("sd", m.sd)?;
                d.set_item("log_mse", m.log_mse)?;
            }
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn switchback_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPanel>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(autocorr_term, m)?)?;
    m.add_function(wrap_pyfunction!(residual_correlations, m)?)?;
    m.add_function(wrap_pyfunction!(advise, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    Ok(())
}
