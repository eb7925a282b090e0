use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gqf_core::density::{PredictParams, DEFAULT_BUDGET};
use gqf_core::descent::{DescendedJson, DescendedSystem};
use gqf_core::field::FieldDescription;
use gqf_core::form::{Gqf, GqfJson};
use gqf_core::ideal::Ideal;
use gqf_core::{Error, Field, FieldExt, NumberField};

/// A builtin name ("Qsqrt:2", "cubic7") or a JSON field description.
pub fn field(spec: &str) -> Result<Field, Error> {
    if spec.trim_start().starts_with('{') {
        let desc: FieldDescription = serde_json::from_str(spec).map_err(|e| Error::invalid(format!("field: {e}")))?;
        return desc.build();
    }
    NumberField::builtin(spec)
}

fn form(k: &Field, json: &str) -> Result<Gqf, Error> {
    let j: GqfJson = serde_json::from_str(json).map_err(|e| Error::invalid(format!("form: {e}")))?;
    Gqf::from_json(k, &j)
}

fn to_string<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("report serializes")
}

pub fn descend_json(field_spec: &str, form_json: &str, shift: Option<&str>) -> Result<String, Error> {
    let k = field(field_spec)?;
    let mut s = gqf_core::descent::descend(&form(&k, form_json)?);
    if let Some(nn) = shift {
        s = s.shift(&k.parse_element(nn)?)?;
    }
    Ok(to_string(&s.to_json()))
}

pub fn lift_json(field_spec: &str, system_json: &str) -> Result<String, Error> {
    let k = field(field_spec)?;
    let j: DescendedJson = serde_json::from_str(system_json).map_err(|e| Error::invalid(format!("system: {e}")))?;
    let s = DescendedSystem::from_json(&k, &j)?;
    Ok(to_string(&gqf_core::descent::lift(&s)?.to_json()))
}

pub fn diagonal_json(field_spec: &str, a: &[String], b: &[String], tau: usize) -> Result<String, Error> {
    let k = field(field_spec)?;
    let parse = |v: &[String]| v.iter().map(|x| k.parse_element(x)).collect::<Result<Vec<_>, _>>();
    Ok(to_string(&Gqf::make_diagonal(&k, &parse(a)?, &parse(b)?, tau)?.to_json()))
}

pub fn s_sum_value(field_spec: &str, form_json: &str, ideal: &[String], nn: &str, m: &[String], moebius: bool) -> Result<Complex64, Error> {
    let k = field(field_spec)?;
    let f = form(&k, form_json)?;
    let gens = ideal.iter().map(|x| k.parse_element(x)).collect::<Result<Vec<_>, _>>()?;
    let b = Ideal::generated_by(&k, &gens)?;
    let m = m.iter().map(|x| k.parse_element(x)).collect::<Result<Vec<_>, _>>()?;
    let nn = k.parse_element(nn)?;
    if moebius {
        gqf_core::expsum::s_sum_moebius(&f, &b, &nn, &m)
    } else {
        gqf_core::expsum::s_sum(&f, &b, &nn, &m)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn predict_json(field_spec: &str, form_json: &str, nn: &str, p: f64, p_max: u64, l_max: u32, samples: u64, seed: u64) -> Result<String, Error> {
    let k = field(field_spec)?;
    let f = form(&k, form_json)?;
    let params = PredictParams { p, p_max, l_max, samples, seed, budget: DEFAULT_BUDGET, ..Default::default() };
    Ok(to_string(&gqf_core::density::predict(&f, &k.parse_element(nn)?, &params)?))
}

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Budget { .. } | Error::SearchBound { .. } | Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Descended system of a GQF, as JSON.
#[pyfunction]
#[pyo3(signature = (form, field = "Qsqrt:2", shift = None))]
fn descend(form: &str, field: &str, shift: Option<&str>) -> PyResult<String> {
    descend_json(field, form, shift).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (system, field = "Qsqrt:2"))]
fn lift(system: &str, field: &str) -> PyResult<String> {
    lift_json(field, system).map_err(py_err)
}

/// Σ aᵢxᵢ² + Σ bᵢ(xᵢ^τ)² as GQF JSON.
#[pyfunction]
#[pyo3(signature = (a, b, tau = 1, field = "Qsqrt:2"))]
fn diagonal(a: Vec<String>, b: Vec<String>, tau: usize, field: &str) -> PyResult<String> {
    diagonal_json(field, &a, &b, tau).map_err(py_err)
}

/// S_𝔟(N; m) with 𝔟 generated by `ideal`.
#[pyfunction]
#[pyo3(signature = (form, ideal, n, m, field = "Qsqrt:2", moebius = false))]
fn s_sum(form: &str, ideal: Vec<String>, n: &str, m: Vec<String>, field: &str, moebius: bool) -> PyResult<Complex64> {
    s_sum_value(field, form, &ideal, n, &m, moebius).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (form, n, p, field = "Qsqrt:2", p_max = 50, l_max = 3, samples = 400_000, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn predict(form: &str, n: &str, p: f64, field: &str, p_max: u64, l_max: u32, samples: u64, seed: u64) -> PyResult<String> {
    predict_json(field, form, n, p, p_max, l_max, samples, seed).map_err(py_err)
}

#[pymodule]
fn gqf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(descend, m)?)?;
    m.add_function(wrap_pyfunction!(lift, m)?)?;
    m.add_function(wrap_pyfunction!(diagonal, m)?)?;
    m.add_function(wrap_pyfunction!(s_sum, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    Ok(())
}
