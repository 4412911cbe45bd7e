use pyo3::prelude::*;
#[pymodule]
fn _qsmin(_m: &Bound<'_, PyModule>) -> PyResult<()> { Ok(()) }
