//! Python module `bdhk_py`.

use std::collections::BTreeMap;

use bdhk::dirichlet_constants::{constant_set, default_fit_grid, euler_h, ConstantSet};
use bdhk::galois_image::{base_data, gq_by_generation, phi_k_by_formula, BaseData};
use bdhk::ideal_stream::theta_total;
use bdhk::variance_engine::{predicted_s, VarianceEngine};
use bdhk::FieldSpec;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: bdhk::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn constants_dict(c: &ConstantSet) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("c1".into(), c.c1.value),
        ("c2".into(), c.c2.value),
        ("c3".into(), c.c3.value),
        ("c4".into(), c.c4.value),
        ("C1".into(), c.big_c1.value),
        ("C2".into(), c.big_c2.value),
        ("ratio_mK".into(), c.ratio_mk as f64),
        ("h1".into(), c.h1),
    ])
}

/// A Galois number field from a descriptor such as `"Q(i)"` or `"cyc:5"`.
#[pyclass(frozen, module = "bdhk_py")]
pub struct Field {
    spec: FieldSpec,
    base: BaseData,
}

#[pymethods]
impl Field {
    #[new]
    fn new(descriptor: &str) -> PyResult<Self> {
        let spec: FieldSpec = descriptor.parse().map_err(py_err)?;
        let base = base_data(&spec).map_err(py_err)?;
        Ok(Self { spec, base })
    }

    #[getter]
    fn descriptor(&self) -> String {
        self.spec.to_string()
    }

    #[getter]
    fn degree(&self) -> u32 {
        self.spec.degree()
    }

    #[getter]
    fn m_k(&self) -> u64 {
        self.spec.m_k()
    }

    #[getter]
    fn ramified(&self) -> Vec<u64> {
        self.spec.ramified_primes().iter().copied().collect()
    }

    #[getter]
    fn abelian(&self) -> bool {
        self.spec.is_abelian()
    }

    /// `(e, f, g)` above the prime `p`.
    fn splitting(&self, p: u64) -> PyResult<(u32, u32, u32)> {
        let s = self.spec.splitting(p).map_err(py_err)?;
        Ok((s.e, s.f, s.g))
    }

    fn phi_k(&self, q: u64) -> PyResult<u64> {
        if q == 0 {
            return Err(PyValueError::new_err("modulus must be positive"));
        }
        Ok(self.base.phi_k(q))
    }

    /// `phi_K(q)` by the local product formula.
    fn phi_k_formula(&self, q: u64) -> PyResult<u64> {
        phi_k_by_formula(&self.base, q).map_err(py_err)
    }

    /// Members of `G_q`, generated from prime ideal norms.
    fn gq(&self, q: u64) -> PyResult<Vec<u64>> {
        Ok(gq_by_generation(&self.spec, q).map_err(py_err)?.members())
    }

    fn ratio_mk(&self) -> u64 {
        self.base.ratio_mk()
    }

    fn theta(&self, x: u64) -> f64 {
        theta_total(&self.spec, x)
    }

    /// Closed-form constants, or fitted `c2, c3, c4` when `fit_xs` is given
    /// (an empty list selects the default grid).
    #[pyo3(signature = (fit_xs=None))]
    fn constants(&self, fit_xs: Option<Vec<u64>>) -> PyResult<BTreeMap<String, f64>> {
        let set = match fit_xs {
            None => ConstantSet::closed_form(&self.spec, &self.base),
            Some(xs) => {
                let xs = if xs.is_empty() {
                    default_fit_grid()
                } else {
                    xs
                };
                constant_set(&self.spec, &self.base, &xs)
            }
        }
        .map_err(py_err)?;
        Ok(constants_dict(&set))
    }

    /// `[(a, theta_K(x; q, a)) for a in G_q]`.
    fn theta_table(&self, py: Python<'_>, x: u64, q: u64) -> PyResult<Vec<(u64, f64)>> {
        py.detach(|| {
            let engine = VarianceEngine::new(&self.spec, &self.base, x)?;
            Ok(engine.theta_table(q)?.values)
        })
        .map_err(py_err)
    }

    /// `S(x; q1, q2)`.
    fn variance(&self, py: Python<'_>, x: u64, q1: u64, q2: u64) -> PyResult<f64> {
        py.detach(|| VarianceEngine::new(&self.spec, &self.base, x)?.variance(q1, q2))
            .map_err(py_err)
    }

    /// Predicted `S(x; 0, Q)` with closed-form constants, and the form used.
    fn predicted(&self, x: u64, q: u64) -> PyResult<(f64, &'static str)> {
        let constants = ConstantSet::closed_form(&self.spec, &self.base).map_err(py_err)?;
        let p = predicted_s(&self.spec, x, q, &constants).map_err(py_err)?;
        Ok((p.value, p.form.as_str()))
    }

    fn __repr__(&self) -> String {
        format!("Field('{}')", self.spec)
    }
}

/// The Euler product `h(s)`.
#[pyfunction]
fn h(s: f64) -> PyResult<f64> {
    euler_h(s).map_err(py_err)
}

/// Descriptors of the built-in catalog.
#[pyfunction]
fn catalog() -> Vec<&'static str> {
    bdhk::field_catalog::CATALOG.to_vec()
}

#[pymodule]
pub fn bdhk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Field>()?;
    m.add_function(wrap_pyfunction!(h, m)?)?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    Ok(())
}
