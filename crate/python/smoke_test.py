"""Smoke test for the plap_py extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`.
"""

import sys

import plap_py as pl


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    spec = pl.GraphonSpec("mean")
    assert spec.kind == "mean" and not spec.is_indicator()
    assert close(spec.eval(0.2, 0.6), 0.4, 1e-15)
    assert "halfplane" in pl.kernels()

    k = pl.KernelMatrix.from_graphon(spec, 16)
    assert k.n == 16
    rows = k.to_list()
    assert all(rows[i][j] == rows[j][i] for i in range(16) for j in range(16))

    # Two nodes, p = 3: the gap solves w' = -w^2, so w(1) = 1/2.
    two = pl.KernelMatrix([[1.0, 1.0], [1.0, 1.0]])
    lap = pl.apply_plaplacian(two, [0.0, 1.0], 3.0)
    assert close(lap[0], -0.5, 1e-15) and close(lap[1], 0.5, 1e-15)
    fw = pl.forward_euler(two, [0.0, 1.0], 3.0, 1.0, tau=1e-3)
    bw = pl.backward_euler(two, [0.0, 1.0], 3.0, 1e-3, 1.0)
    for traj in (fw, bw):
        w = traj.final_state()
        assert close(w[1] - w[0], 0.5, 5e-3), (traj, w)
    assert bw.scheme == "backward" and len(bw.inner_iterations) == len(bw) - 1
    mid = bw.linear(0.5)
    assert close(sum(mid) / 2, 0.5, 1e-9)

    proj = pl.project_sinf(two, [-3.0, 3.0])
    assert close(proj[0], -0.5, 1e-10) and close(proj[1], 0.5, 1e-10)

    rho, counts = pl.boundary_dimension(pl.GraphonSpec("halfplane"), [16, 32, 64, 128])
    assert close(rho, 1.0, 0.1), rho

    slope, _, r2 = pl.fit_rate([1.0, 2.0, 4.0, 8.0], [1.0, 0.5, 0.25, 0.125])
    assert close(slope, -1.0, 1e-12) and close(r2, 1.0, 1e-12)

    rows = pl.p_sweep(k, [0.1 * (i % 3) for i in range(16)], [4.0, 8.0], 0.5)
    assert rows[0]["sup_deviation"] >= rows[1]["sup_deviation"]

    passed, table = pl.verify(0)
    assert passed, table

    try:
        pl.GraphonSpec("moon")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown kernel kind accepted")
    print(f"plap_py {pl.__version__}: smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
