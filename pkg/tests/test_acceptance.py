"""Acceptance criteria 1 to 11, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
Each criterion runs the relevant suite and compares the named residuals
against fixed bounds, independent of the suite's own pass tiers.
"""
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from rackoid.suites import SUITES, SuiteConfig, convergence_study, report_json, run_suite


def worst(report, names):
    """Largest value of each named residual across trials."""
    return {k: max(tr["residuals"][k] for tr in report.trials) for k in names}


def suite(name, trials, **kw):
    kw.setdefault("geometry", SUITES[name].geometry or "torus")
    return run_suite(SuiteConfig(name, trials=trials, **kw))


def within(vals, bounds):
    return all(np.isfinite(vals[k]) and vals[k] <= b for k, b in bounds.items())


def fmt(vals):
    return ", ".join(f"{k}={v:.2e}" for k, v in vals.items())


def c1():
    r = suite("selfdist", 100, grid_n=64, amplitude=0.3)
    vals = worst(r, ["selfdist", "rack_selfdist"])
    secs = r.wall_time_ms / 1000
    return within(vals, {"selfdist": 1e-7, "rack_selfdist": 1e-7}) and secs <= 300, f"{fmt(vals)}, {secs:.1f} s"


def c2():
    r = suite("homotopy", 100)
    slope = convergence_study("homotopy", [8, 16, 32, 64])["slope"]
    vals = worst(r, ["homotopy"])
    return vals["homotopy"] <= 1e-7 and slope is not None and slope >= 3.8, f"{fmt(vals)}, slope={slope:.3f}"


def c3():
    vals = worst(suite("leibniz", 50), ["leibniz"])
    return vals["leibniz"] <= 1e-8, fmt(vals)


def c4():
    bounds = {"morphism": 1e-8, "ideal_generator": 1e-10, "left_center": 1e-10, "squares": 1e-8}
    vals = worst(suite("quotient", 20), bounds)
    return within(vals, bounds), fmt(vals)


def c5():
    bounds = {"ad_power": 1e-9, "exp_flow": 1e-6}
    vals = worst(suite("expad", 5, amplitude=0.2), bounds)
    return within(vals, bounds), fmt(vals)


def c6():
    bounds = dict.fromkeys(["c_invariance", "beta_law", "dbeta_law", "pullback_lambda_source",
                            "pullback_lambda_target", "isotropic_subrack"], 1e-7)
    vals = {}
    for dim in (2, 3):
        for k, v in worst(suite("symplectic", 10, dim=dim), bounds).items():
            vals[k] = max(vals.get(k, 0.0), v)
    return within(vals, bounds), fmt(vals)


def c7():
    bounds = {"poisson_involutivity": 1e-8, "AD_closure": 1e-7, "quotient_in_D": 1e-8}
    r = suite("dirac", 10)
    vals = worst(r, bounds)
    neg = min(tr["residuals"]["negative_control"] for tr in r.trials)
    return within(vals, bounds) and neg >= 1e-2, f"{fmt(vals)}, negative_control(min)={neg:.2e}"


def c8():
    bounds = {"formulation_gap": 1e-6, "rest_to_show": 1e-6, "cone_roundtrip": 1e-8, "dbeta_constancy": 1e-6}
    vals = worst(suite("congruence", 10), bounds)
    return within(vals, bounds), fmt(vals)


def c9():
    bounds = {"act_trivial": 1e-12, "I_invariance": 1e-12, "classification": 1e-6}
    vals = {}
    for dim in (2, 3):
        for k, v in worst(suite("integrate_zero", 20, dim=dim), bounds).items():
            vals[k] = max(vals.get(k, 0.0), v)
    return within(vals, bounds), fmt(vals)


def c10():
    b1 = {"subrackoid": 1e-6, "endpoint_law": 1e-8}
    b2 = {"reduction_form": 1e-4, "coisotropy": 1e-4}
    vals = {**worst(suite("descent", 10), b1), **worst(suite("reduction", 10), b2)}
    return within(vals, {**b1, **b2}), fmt(vals)


def _kernel_identities():
    from rackoid.kernel import (
        ManifoldSpec, evaluate_at, exterior_d, interior, lie_bracket, lie_derivative, sup_norm,
    )
    from rackoid.randomfields import random_one_form, random_two_form, random_vector_field
    rng = np.random.default_rng(5)
    M = ManifoldSpec.torus(3)
    pts = M.random_points(rng, 64)

    def gap(a, b):
        return sup_norm([u - v for u, v in zip(evaluate_at(a.exprs(), pts, M), evaluate_at(b.exprs(), pts, M))])

    out = {"cartan": 0.0, "dd": 0.0, "L_i": 0.0}
    for _ in range(5):
        X, Y = random_vector_field(rng, 3, 0.3), random_vector_field(rng, 3, 0.3)
        w, W = random_one_form(rng, 3, 0.3), random_two_form(rng, 3, 0.3)
        out["cartan"] = max(out["cartan"], gap(lie_derivative(X, w),
                                               interior(X, exterior_d(w)) + exterior_d(interior(X, w))))
        dd = exterior_d(exterior_d(w))
        out["dd"] = max(out["dd"], sup_norm(evaluate_at(dd.exprs(), pts, M)))
        out["L_i"] = max(out["L_i"], gap(lie_derivative(X, interior(Y, W)) - interior(Y, lie_derivative(X, W)),
                                         interior(lie_bracket(X, Y), W)))
    return out


def c11():
    vals = _kernel_identities()
    slopes = {op: convergence_study(op, [8, 16, 32, 64])["slope"] for op in ("simpson", "rk4")}
    cfg = SuiteConfig("selfdist", trials=3, seed=123)
    a, b = report_json(run_suite(cfg), include_time=False), report_json(run_suite(cfg), include_time=False)
    ok = within(vals, dict.fromkeys(vals, 1e-10)) and all(s is not None and s >= 3.8 for s in slopes.values())
    cmd = [sys.executable, "-m", "rackoid.cli", "verify", "--suite", "selfdist", "--trials", "3", "--seed", "123"]
    outs = [json.loads(subprocess.run(cmd, capture_output=True, text=True).stdout) for _ in range(2)]
    for o in outs:
        o.pop("wall_time_ms")
    same = a == b and outs[0] == outs[1]
    ok = ok and same
    detail = f"{fmt(vals)}, " + ", ".join(f"{k}_order={v:.3f}" for k, v in slopes.items())
    return ok, detail + f", byte-identical={same}"


CRITERIA = [
    (1, "self-distributivity", c1),
    (2, "homotopy formula", c2),
    (3, "Leibniz identity", c3),
    (4, "quotient morphism", c4),
    (5, "exponential series", c5),
    (6, "symplectic laws", c6),
    (7, "Dirac structures", c7),
    (8, "congruence machinery", c8),
    (9, "integration, zero Poisson", c9),
    (10, "integration, symplectic plane", c10),
    (11, "numerics floor", c11),
]


def line(num, title, fn):
    start = time.perf_counter()
    ok, detail = fn()
    return ok, f"{'PASS' if ok else 'FAIL'} criterion {num:2d} ({title}): {detail} [{time.perf_counter() - start:.1f} s]"


@pytest.mark.parametrize("num,title,fn", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(num, title, fn, capsys):
    ok, text = line(num, title, fn)
    with capsys.disabled():
        print("\n" + text)
    assert ok, text


if __name__ == "__main__":
    results = [line(*c) for c in CRITERIA]
    for _, text in results:
        print(text)
    print(json.dumps({"passed": sum(ok for ok, _ in results), "total": len(results)}))
