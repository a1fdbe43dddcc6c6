//! Python bindings for the uiprune pipeline and its scoring helpers.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use uiprune::evaluation::{prf1 as prf1_core, tlo_one, ConfusionMatrix, IntrusionJudgment};
use uiprune::pipeline::{run_all, PipelineConfig, Step};
use uiprune::textprep::{preprocess as preprocess_core, LemmaTable, StopList};
use uiprune::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Lowercased, lemmatized tokens of a review with stopwords removed.
#[pyfunction]
fn preprocess(text: &str) -> Vec<String> {
    preprocess_core(text, LemmaTable::bundled(), StopList::bundled())
}

/// Precision, recall and F1 of a confusion matrix.
#[pyfunction]
#[pyo3(signature = (tp, fp, fn_, tn))]
fn prf1(tp: u64, fp: u64, fn_: u64, tn: u64) -> PyResult<(f64, f64, f64)> {
    let m = prf1_core(&ConfusionMatrix::new(tp, fp, fn_, tn)).map_err(py_err)?;
    Ok((m.precision, m.recall, m.f1))
}

/// Topic log odds of one intrusion judgment.
#[pyfunction]
fn tlo(theta: HashMap<String, f64>, intruder: String, selected: Vec<String>) -> PyResult<f64> {
    let judgment = IntrusionJudgment { doc: String::new(), theta: theta.into_iter().collect(), intruder, selected };
    tlo_one(&judgment).map_err(py_err)
}

/// Runs one pipeline step, or every step with `step="all"`.
///
/// `overrides` takes the same keys as the configuration file and wins over it.
#[pyfunction]
#[pyo3(signature = (config=None, step="all", overrides=None))]
fn run(py: Python<'_>, config: Option<PathBuf>, step: &str, overrides: Option<HashMap<String, String>>) -> PyResult<()> {
    let flags: BTreeMap<String, String> = overrides.unwrap_or_default().into_iter().collect();
    let cfg = PipelineConfig::load(config.as_deref(), &flags).map_err(py_err)?;
    let step = if step == "all" {
        None
    } else {
        let found = Step::ALL.into_iter().find(|s| s.name() == step);
        Some(found.ok_or_else(|| PyValueError::new_err(format!("unknown step {step:?}")))?)
    };
    py.detach(|| match step {
        None => run_all(&cfg),
        Some(s) => s.run(&cfg),
    })
    .map_err(py_err)
}

/// Names of the pipeline steps in execution order.
#[pyfunction]
fn steps() -> Vec<&'static str> {
    Step::ALL.iter().map(|s| s.name()).collect()
}

#[pymodule]
#[pyo3(name = "uiprune")]
fn uiprune_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(prf1, m)?)?;
    m.add_function(wrap_pyfunction!(tlo, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(steps, m)?)?;
    Ok(())
}
