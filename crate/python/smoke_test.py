"""Smoke test for the qsb Python module.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import math

import qsb


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    return ok


def main():
    results = []
    g = qsb.SphereGrid(6)
    results.append(check("grid size", g.node_count == 8 * 7 * 7, repr(g)))

    # Round sphere, H of the m = 1/4 Schwarzschild sphere: bound = 1/4.
    round_metric = qsb.ConformalMetric.round(g, 1.0)
    b = qsb.BoundaryData(round_metric, qsb.ScalarField.constant(g, math.sqrt(2.0)))
    table = qsb.PathTable(round_metric, nodes=9)
    thm = qsb.bound_theorem(table, b)
    results.append(check("round theorem bound", abs(thm - 0.25) < 1e-12, f"{thm!r}"))
    report = qsb.mass_bound_report(b, table, family="affine_density", budget=50)
    results.append(check("round zeta", report["zeta_upper"] == 0.0))
    results.append(check("report keys", "bound_best" in report and "calH" in report))

    # Perturbed metric: the optimized bound never exceeds the closed forms.
    phi = qsb.ScalarField.from_harmonics(g, [(2, 0, 0.08, 0.0), (2, 2, 0.05, 0.02)])
    m = qsb.ConformalMetric(phi, 1.0)
    bp = qsb.BoundaryData(m, qsb.ScalarField.constant(g, 1.5))
    tp = qsb.PathTable(m)
    rep = qsb.mass_bound_report(bp, tp, budget=60)
    results.append(check("dominance", rep["bound_best"] <= min(rep["bound_theorem"], rep["bound_half_r"]) + 1e-12))

    ext = qsb.extend(bp, tp)
    results.append(check("extension below bound", ext["mass"] <= rep["bound_best"], f"{ext['mass']:.8f}"))

    # Uniformization recovers the curvature of a known metric.
    k = m.gauss_curvature()
    phi_s, res, _ = qsb.solve_conformal_factor(k, tol=1e-11)
    k_s = qsb.ConformalMetric(phi_s, 1.0).gauss_curvature()
    err = max(abs(x - y) for x, y in zip(k.values(), k_s.values()))
    results.append(check("uniformization round trip", err < 1e-9, f"{err:.2e}"))

    results.append(check("fill-in", qsb.lambda_lower(3, 1.0, 2.0) == 1.0))
    try:
        qsb.BoundaryData(round_metric, qsb.ScalarField.constant(g, -1.0))
        results.append(check("error mapping", False))
    except qsb.QsbError as e:
        results.append(check("error mapping", "ContractViolation" in str(e)))

    if not all(results):
        raise SystemExit(1)
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
