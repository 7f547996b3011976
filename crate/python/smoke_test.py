"""Exercise the compiled extension end to end.

Build first with `maturin develop -m crates/py/Cargo.toml` (or pip install
crates/py --no-build-isolation), then run `python python/smoke_test.py`.
"""
import math

import phasect_py as pc


def main():
    a = pc.SensingMatrix.fanbeam(16, 4)
    assert (a.m, a.n) == (128, pc.disk_pixel_count(16))
    assert len(a.apply([1.0] * a.n)) == a.m

    g = pc.SensingMatrix.gaussian(30, 60, 3)
    x0 = [0.0] * 60
    x0[5], x0[17], x0[40] = 0.7, -0.3, 1.0
    b = g.apply(x0)
    exact = pc.solve(g, b, "p1", oracle=True)
    rel, ok = pc.check_recovery(exact["x"], x0, 1e-4)
    assert ok, rel
    cp = pc.solve(g, b, "p1", lambda_=1e-2, max_iter=50000)
    assert abs(cp["objective"] - exact["objective"]) < 1e-5 * exact["objective"]

    img = pc.phantom("altprojisotv", 16, 40, 1)
    assert pc.gradient_sparsity(img, 16) <= 40
    tv = pc.solve(pc.SensingMatrix.fanbeam(16, 8), pc.SensingMatrix.fanbeam(16, 8).apply(img),
                  "tv", lambda_=1e-3, n_side=16, reference=img)
    assert tv["history"] and tv["iterations_run"] > 0

    assert pc.psi_l1(1.0) == 1.0
    assert pc.psi_l1_nonneg(0.3) <= pc.psi_l1(0.3)
    dt = pc.dt_curve([0.1 * k for k in range(1, 10)])
    almt = pc.convert_coords(dt, "dt", "almt")
    for beta, delta in almt:
        assert math.isclose(delta, pc.psi_l1(beta), abs_tol=1e-5)

    beta = 45074 / 823592
    views = pc.predict_views([(0.0, 0.0), (beta, 0.17829), (0.5, 0.8)], "almt", 45074, 823592, 2048)
    assert abs(views - 71.7) < 0.05, views

    rows, grid = pc.run_diagram("almt", "gaussian", "signedspikes", "p1", 8,
                                sampling=[16, 32, 48], sparsity=[0.1, 0.5, 0.9], realizations=4)
    assert len(rows) == 36 and {"relative_error", "success"} <= rows[0].keys()
    assert len(grid.rates()) == 3 and all(0.0 <= r <= 1.0 for line in grid.rates() for r in line)
    grid.contour(0.5)
    print("smoke test passed")


if __name__ == "__main__":
    main()
