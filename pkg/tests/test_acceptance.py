"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary table is
printed at the end of the session.
"""
import json
import math
import time

import numpy as np
import pytest

from fidstring.cli import main
from fidstring.engine import Scenario, normalize
from fidstring.expr import parse
from fidstring.oracle import ks_distance, slab_oracle, tube_oracle
from fidstring.priors import Condition, Jeffreys, Linear, Shift
from fidstring.scenarios import (
    circle_scenario,
    line_scenario,
    seidenfeld,
    seidenfeld_slab_inverse,
)

from exprgen import random_expression

R_BOUND = 1.2879097507041273  # r + r^3/3 = 2


def test_01_seidenfeld_duality(acceptance):
    start = time.perf_counter()
    t = np.linspace(-2, 2, 1001)
    worst = 0.0
    for x in [(0, 0), (1, 1), (-2, 0.5)]:
        case = seidenfeld(x, 2.0)
        a = normalize(case.scenario, Shift((1, 0))).pdf(t)
        b = normalize(case.scenario, Shift((0, 1))).pdf(t)
        worst = max(worst, np.max(np.abs(a - case.uniform_t.pdf(t))), np.max(np.abs(b - case.uniform_t3.pdf(t))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1.0
    acceptance(1, "Seidenfeld duality", ok, f"sup|diff|={worst:.2e} (tol 1e-10), {elapsed:.2f}s (< 1s)")
    assert ok


def test_02_pushforward_consistency(acceptance):
    start = time.perf_counter()
    case = seidenfeld((0, 0))
    rf = normalize(case.scenario, Shift((0, 1)))
    y = np.linspace(0.001, 7.9, 2001)
    # y-space posterior under a uniform prior on y = t^3, normalized over [-8, 8] (even kernel)
    ys = np.linspace(0.0, 8.0, 400_001)
    g = np.exp(-(ys ** 2 + np.cbrt(ys) ** 2) / 2)
    h = ys[1] - ys[0]
    z = 2 * h / 3 * (g[0] + g[-1] + 4 * g[1:-1:2].sum() + 2 * g[2:-1:2].sum())
    expected = np.exp(-(y ** 2 + np.cbrt(y) ** 2) / 2) / z
    worst = float(np.max(np.abs(rf.pushforward_pdf("t^3", y) - expected)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 1.0
    acceptance(2, "pushforward through t^3", ok, f"sup|diff|={worst:.2e} (tol 1e-6), {elapsed:.2f}s (< 1s)")
    assert ok


@pytest.mark.slow
def test_03_tube_oracle_jeffreys(acceptance):
    start = time.perf_counter()
    case = seidenfeld((0, 0))
    rf = normalize(case.scenario, Jeffreys())
    res = tube_oracle(case.scenario, 0.01, 13_000_000, 7, reference=rf)
    elapsed = time.perf_counter() - start
    ok = res.n_accepted >= 100_000 and res.ks_distance <= 0.015 and elapsed < 60
    acceptance(3, "tube oracle vs Jeffreys", ok,
               f"KS={res.ks_distance:.4f} (tol 0.015), accepted={res.n_accepted}, {elapsed:.1f}s (< 60s)")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("d", [(1, 0), (0, 1)])
def test_04_slab_oracle_shift(acceptance, d):
    start = time.perf_counter()
    case = seidenfeld((0, 0))
    rf = normalize(case.scenario, Shift(d))
    res = slab_oracle(case.scenario, d, 0.01, 22_000_000, 42, inverse=seidenfeld_slab_inverse(d), reference=rf)
    elapsed = time.perf_counter() - start
    ok = res.n_accepted >= 100_000 and res.ks_distance <= 0.015 and elapsed < 60
    acceptance(4, f"slab oracle vs Shift d={d}", ok,
               f"KS={res.ks_distance:.4f} (tol 0.015), accepted={res.n_accepted}, {elapsed:.1f}s (< 60s)")
    assert ok


@pytest.mark.slow
def test_05_contradiction_is_real(acceptance):
    case = seidenfeld((1, 1))
    shift = normalize(case.scenario, Shift((1, 0)))
    res = tube_oracle(case.scenario, 0.01, 13_000_000, 7)
    ks = ks_distance(res.accepted_t, shift)
    ok = res.n_accepted >= 100_000 and ks >= 0.05
    acceptance(5, "tube samples vs Shift (1,0) at x=(1,1)", ok, f"KS={ks:.4f} (>= 0.05), accepted={res.n_accepted}")
    assert ok


def test_06_fisher_line(acceptance):
    sc, ref = line_scenario((0, 0), (1, 0), (-10, 10), (1, 1))
    rf = normalize(sc, Jeffreys())
    p = np.round(np.arange(1, 20) * 0.05, 2)
    worst = float(np.max(np.abs(rf.quantile(p) - ref.quantile(p))))
    ok = worst <= 1e-7
    acceptance(6, "Fisher line quantiles", ok, f"max|dt|={worst:.2e} (tol 1e-7)")
    assert ok


def test_07_fisher_circle(acceptance):
    worst = 0.0
    t = np.linspace(0, 2 * math.pi, 2001)
    for r, x in [(1.0, (2, 0)), (1.0, (0, 3)), (2.0, (1, 1))]:
        sc, ref = circle_scenario(r, x)
        rf = normalize(sc, Jeffreys())
        worst = max(worst, float(np.max(np.abs(rf.pdf(t) - ref.pdf(t)))))
    ok = worst <= 1e-8
    acceptance(7, "Fisher circle vs von Mises", ok, f"sup|diff|={worst:.2e} (tol 1e-8)")
    assert ok


def test_08_reparameterization(acceptance):
    worst = 0.0
    p = np.round(np.arange(1, 20) * 0.05, 2)
    for x in [(0, 0), (1, 1), (-2, 0.5)]:
        sc = seidenfeld(x).scenario
        curve_r = sc.curve.reparameterize("r + r^3/3", (-R_BOUND, R_BOUND))
        q_t = normalize(sc, Jeffreys()).quantile(p)
        q_r = normalize(Scenario(curve_r, sc.noise, sc.x), Jeffreys()).quantile(p)
        worst = max(worst, float(np.max(np.abs(q_r + q_r ** 3 / 3 - q_t))))
    ok = worst <= 1e-6
    acceptance(8, "Jeffreys reparameterization", ok, f"max|phi(q_r) - q_t|={worst:.2e} (tol 1e-6)")
    assert ok


def test_09_condition_prior(acceptance):
    sc, _ = line_scenario((0, 0), (1, 0), (-10, 10), (1, 1))
    t = np.linspace(-10, 10, 1001)
    jeff_w = Jeffreys().weight(sc.curve, t)
    jeff_pdf = normalize(sc, Jeffreys()).pdf(t)
    worst = 0.0
    for mode in ("as_paper", "coarea"):
        prior = Condition("theta2", mode)
        worst = max(worst, float(np.max(np.abs(prior.weight(sc.curve, t) - jeff_w))),
                    float(np.max(np.abs(normalize(sc, prior).pdf(t) - jeff_pdf))))
    ok = worst <= 1e-12
    acceptance(9, "Condition theta2 equals Jeffreys", ok, f"max diff={worst:.2e} (tol 1e-12)")
    assert ok


def test_10_properness(acceptance):
    cases = []
    for x in [(0, 0), (1, 1), (-2, 0.5)]:
        sc = seidenfeld(x).scenario
        for prior in (Jeffreys(), Shift((1, 0)), Shift((0, 1)), Linear((1, 2)),
                      Condition("theta1^2 + theta2^2", "as_paper"), Condition("theta1 + theta2^3", "coarea")):
            cases.append((sc, prior))
    line, _ = line_scenario((0, 0), (1, 0), (-10, 10), (1, 1))
    cases += [(line, Jeffreys()), (line, Shift((0.3, 1)))]
    for r, x in [(1.0, (2, 0)), (1.0, (0, 3)), (2.0, (1, 1))]:
        cases += [(circle_scenario(r, x)[0], Jeffreys()), (circle_scenario(r, x)[0], Linear((1, 0)))]
    worst, all_finite = 0.0, True
    for sc, prior in cases:
        rf = normalize(sc, prior)
        all_finite &= math.isfinite(rf.Z) and rf.Z > 0
        worst = max(worst, abs(rf.total_mass() - 1.0))
    ok = all_finite and worst <= 1e-8
    acceptance(10, "properness", ok, f"{len(cases)} cases, Z finite>0: {all_finite}, max|mass-1|={worst:.2e} (tol 1e-8)")
    assert ok


def test_11_autodiff(acceptance):
    rng = np.random.default_rng(20240611)
    h = 1e-5
    worst, n = 0.0, 0
    for _ in range(100):
        e = parse(random_expression(rng, depth=4), ["t"])
        for t in rng.uniform(-1.5, 1.5, size=10):
            _, d = e.eval_dual({"t": t}, "t")
            fd = (e.eval({"t": t + h}) - e.eval({"t": t - h})) / (2 * h)
            worst = max(worst, abs(d - fd) / max(1.0, abs(d)))
            n += 1
    ok = worst <= 1e-6
    acceptance(11, "dual numbers vs central differences", ok, f"{n} points, max rel err={worst:.2e} (tol 1e-6)")
    assert ok


def test_12_cli_determinism(acceptance, tmp_path):
    cfg = {
        "curve": {"mu1": "t^3", "mu2": "t", "t_min": -2.0, "t_max": 2.0},
        "noise": {"cov": [[1.0, 0.0], [0.0, 1.0]]},
        "observation": [1.0, 1.0],
        "prior": {"type": "shift", "d": [0.0, 1.0]},
        "output": {"grid_points": 201, "quantiles": [0.05, 0.5, 0.95], "n_samples": 2000, "seed": 11},
        "oracle": {"kind": "tube", "epsilon": 0.02, "n_proposed": 300000, "seed": 5},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = []
    for out in outs:
        codes.append(main(["run", "--config", str(path), "--out", str(out)]))
        codes.append(main(["oracle", "--config", str(path), "--out", str(out)]))
    names = sorted(p.name for p in outs[0].iterdir())
    same = all((outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names)
    ok = codes == [0, 0, 0, 0] and same and len(names) == 6
    acceptance(12, "CLI determinism", ok, f"{len(names)} artifacts byte-identical: {same}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
