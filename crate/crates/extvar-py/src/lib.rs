use pyo3::prelude::*;

#[pymodule]
fn extvar_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
