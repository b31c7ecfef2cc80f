use std::ffi::CString;

use plap_py::plap_py;
use pyo3::prelude::*;

fn with_module(code: &str) {
    pyo3::append_to_inittab!(plap_py);
    Python::attach(|py| {
        let code = CString::new(format!("import plap_py as pl\n{code}")).unwrap();
        py.run(&code, None, None).unwrap_or_else(|e| panic!("{e}"));
    });
}

#[test]
fn module_round_trip() {
    with_module(
        r#"
k = pl.KernelMatrix([[1.0, 1.0], [1.0, 1.0]])
assert pl.apply_plaplacian(k, [0.0, 1.0], 3.0) == [-0.5, 0.5]
t = pl.backward_euler(k, [0.0, 1.0], 2.0, 0.5, 1.0)
w = t.final_state()
# Each implicit step divides the gap by 1 + tau.
assert abs((w[1] - w[0]) - 1.0 / 2.25) < 1e-9, w
assert t.times == [0.0, 0.5, 1.0]
assert pl.GraphonSpec("halfplane").is_indicator()
try:
    pl.KernelMatrix([[1.0, 0.0], [1.0, 1.0]])
    raise AssertionError("asymmetric kernel accepted")
except ValueError:
    pass
try:
    pl.forward_euler(pl.KernelMatrix([[5.0, 5.0], [5.0, 5.0]]), [0.0, 1.0], 3.0, 10.0, tau=5.0)
    raise AssertionError("unstable run accepted")
except RuntimeError:
    pass
"#,
    );
}
