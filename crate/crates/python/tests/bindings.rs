use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

fn with_module<F: FnOnce(&Bound<'_, PyModule>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(coirlq_py::coirlq_py)(py);
        f(module.bind(py));
    });
}

#[test]
fn theory_values_cross_the_boundary() {
    with_module(|m| {
        let c: (f64, f64) = m
            .getattr("theorem1_constants")
            .unwrap()
            .call1((0.0, 0.0, 9.0, 1.0))
            .unwrap()
            .extract()
            .unwrap();
        assert_eq!(c, (3.0, 4.0));
        let t: f64 = m.getattr("strong_threshold").unwrap().call1((1.0, 9.0)).unwrap().extract().unwrap();
        assert_eq!(t, 0.6);
    });
}

#[test]
fn problem_round_trip_and_solve() {
    with_module(|m| {
        let py = m.py();
        let kwargs = PyDict::new(py);
        kwargs.set_item("seed", 7).unwrap();
        let problem = m
            .getattr("Problem")
            .unwrap()
            .call_method("generate", (20, 20, 24, 10), Some(&kwargs))
            .unwrap();
        let kw = PyDict::new(py);
        kw.set_item("lam", 1e-6).unwrap();
        let result = problem.call_method("solve", (), Some(&kw)).unwrap();
        let x_hat: Vec<f64> = result.getattr("x_hat").unwrap().extract().unwrap();
        let x_true: Vec<f64> = problem.getattr("x_true").unwrap().extract().unwrap();
        let err: f64 = m
            .getattr("relative_error")
            .unwrap()
            .call1((x_hat, x_true))
            .unwrap()
            .extract()
            .unwrap();
        assert!(err < 1e-4, "{err}");

        let dir = tempfile::tempdir().unwrap();
        problem.call_method1("save", (dir.path(),)).unwrap();
        let back = m.getattr("Problem").unwrap().call_method1("load", (dir.path(),)).unwrap();
        let cos: Vec<usize> = back.getattr("cosupport").unwrap().extract().unwrap();
        assert_eq!(cos.len(), 10);
    });
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(|m| {
        let py = m.py();
        let err = m.getattr("preset").unwrap().call1(("nope",)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let ragged = vec![vec![1.0, 2.0], vec![3.0]];
        let err = m
            .getattr("solve")
            .unwrap()
            .call1((ragged, vec![1.0, 2.0], vec![vec![1.0, 0.0]]))
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
