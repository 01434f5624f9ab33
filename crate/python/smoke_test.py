"""Smoke test for the Python bindings.

Build and install first:
    pip install --no-build-isolation -e crates/py
"""

import json
import math

import sigchange


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    e = sigchange.Expression("t*x", ["t", "x"])
    value, grad = e.gradient([3.0, 5.0])
    assert (value, grad) == (15.0, [5.0, 3.0])
    assert sigchange.Expression("abs(t)^(1/2)", ["t"]).evaluate([-4.0]) == 2.0

    toy = sigchange.Metric.preset("toy")
    m = toy.metric_at([-1.0, 0.0])
    assert m["signature"] == "lorentzian" and m["det"] == -1.0

    gamma = sigchange.classify_curve(
        toy, "t", (-1.0, 0.0), ["t", "arctan((2/3)*sqrt(abs(t)^3)*sgn(t))"]
    )
    assert gamma["verdict"] == "asymptotically-lightlike", gamma["verdict"]
    alpha = sigchange.classify_curve(toy, "t", (-1.0, 0.0), ["t", "0"])
    assert alpha["verdict"] == "pseudo-timelike"
    assert all(close(q, -1.0, 1e-8) for _, q in alpha["q_samples"])

    normal = sigchange.Metric.preset("toy-normal")
    crossings = sigchange.null_fan(normal, [1.0, 0.0])
    assert sorted(round(c[1], 6) for c in crossings) == [-0.666667, 0.666667]

    cert = sigchange.local_loop(normal, [0.0, 0.0])
    assert cert["validation"]["passed"]
    report = sigchange.validate(normal, json.dumps(cert))
    assert report["passed"]

    for p in ([0.5, 0.0], [0.0, 0.2], [-0.3, 0.0]):
        g = sigchange.global_loop(normal, p, globally_hyperbolic=True)
        assert math.dist(g["self_intersection"], p) < 1e-8

    try:
        sigchange.local_loop(sigchange.Metric.preset("tangent-radical"), [0.0, 0.0])
    except sigchange.InputError as err:
        assert "not transverse" in str(err)
    else:
        raise AssertionError("tangent radical accepted")

    suites = sigchange.check(seed=42, cases=10)
    assert all(s["passed"] for s in suites)

    print("smoke test passed")


if __name__ == "__main__":
    main()
