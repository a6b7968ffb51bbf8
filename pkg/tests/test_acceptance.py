"""One test per acceptance criterion, each at the stated tolerance.

Every test records a ``CRITERION n: PASS/FAIL`` line (printed at the end of
the session by the hook in ``conftest.py``).
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from nonlocal_kpp import cli, dynamics as dyn, env, fronts as fr, kernel as kn, speed as sp, verify as vf

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
RECORD_EVERY = 1.0


def dense_grid_c_star(kernel, lmu, hi=6.0, n=100_000):
    lam = np.linspace(hi / n, hi, n)
    vals = (np.asarray(kn.big_L(kernel, lam)) + lmu) / lam
    return float(vals.min())


def simulate(name):
    """Run a scenario file with front tracking and the upper-envelope tail monitor."""
    sc = cli.load_scenario(str(SCENARIOS / f"{name}.json"))
    est = env.least_mean(sc.coefficient)
    curve = sp.minimize_speed(sc.kernel, est.value)
    eta = 0.1 * curve.c_star
    tracker = fr.FrontTracker((0.1, 0.5, 0.9))
    tails = []

    def tail_watch(f):
        if f.t >= 20.0 - 1e-9:
            U = fr.theoretical_envelope(curve, sc.coefficient, sc.lambda_init, [f.t]).upper[0]
            tails.append((f.t, fr.tail_max(f, U + eta * f.t)))

    t0 = time.perf_counter()
    stride = int(round(RECORD_EVERY / sc.dt))
    traj = dyn.run(sc.kernel, sc.nonlinearity, sc.initial, sc.grid, sc.t_end, sc.dt,
                   [tracker, tail_watch], stride=stride)
    elapsed = time.perf_counter() - t0
    fit = fr.fit_speed(tracker.traces[0.5], tuple(sc.cfg["fit_window"]), kbar=kn.mass(sc.kernel))
    return {"sc": sc, "curve": curve, "est": est, "traj": traj, "tracker": tracker, "fit": fit,
            "tails": tails, "elapsed": elapsed}


@pytest.fixture(scope="module")
def reference_run():
    return simulate("reference")


@pytest.fixture(scope="module")
def slow_run():
    return simulate("slow_decay")


@pytest.fixture(scope="module")
def periodic_run():
    return simulate("periodic")


def test_criterion_01_speed_identity(record_criterion):
    worst, slowest = 0.0, 0.0
    for kernel in (kn.gaussian(1.0), kn.tent(1.0)):
        for mu in (1.5, 2.0, 3.0):
            t0 = time.perf_counter()
            curve = sp.minimize_speed(kernel, mu)
            rel = abs(curve.c_star - kn.mgf_derivative(kernel, curve.lambda_star)) / curve.c_star
            slowest = max(slowest, time.perf_counter() - t0)
            worst = max(worst, rel)
    ok = worst <= 1e-6 and slowest < 1.0
    record_criterion("CRITERION 1", ok, f"max rel identity residual {worst:.2e}, slowest {slowest:.3f}s")
    assert ok


def test_criterion_02_homogeneous_spreading(reference_run, record_criterion):
    r = reference_run
    c_oracle = dense_grid_c_star(r["sc"].kernel, 2.0)
    slope = r["fit"].slope
    rel = abs(slope - c_oracle) / c_oracle
    x_hi = 0.9 * slope * r["sc"].t_end
    inner = fr.inner_min(r["traj"].final, x_hi)
    ok = rel <= 0.05 and inner >= 0.95 and r["elapsed"] <= 120
    record_criterion("CRITERION 2", ok, f"slope {slope:.4f} vs c* {c_oracle:.4f} ({100 * rel:.2f}%), "
                     f"inner min {inner:.4f}, {r['elapsed']:.1f}s")
    assert ok


def test_criterion_03_slow_decay(slow_run, record_criterion):
    r = slow_run
    lam = r["sc"].initial.params["lambda"]
    assert lam == pytest.approx(0.5 * r["curve"].lambda_star, rel=1e-12)
    target = sp.least_mean_speed(r["sc"].kernel, 2.0, lam)
    slope = r["fit"].slope
    rel = abs(slope - target) / target
    ok = rel <= 0.05 and slope >= 1.1 * r["curve"].c_star and r["elapsed"] <= 120
    record_criterion("CRITERION 3", ok, f"slope {slope:.4f} vs floor c(lam) {target:.4f} ({100 * rel:.2f}%), "
                     f"ratio to c* {slope / r['curve'].c_star:.3f}, {r['elapsed']:.1f}s")
    assert ok


def test_criterion_04_upper_bound(reference_run, slow_run, record_criterion):
    worst = max(v for r in (reference_run, slow_run) for _, v in r["tails"])
    n = sum(len(r["tails"]) for r in (reference_run, slow_run))
    ok = worst <= 1e-3 and n > 0
    record_criterion("CRITERION 4", ok, f"max u beyond U(t) + eta t over {n} recorded times: {worst:.2e}")
    assert ok


def test_criterion_05_periodic(periodic_run, record_criterion):
    r = periodic_run
    lm = r["est"].value
    c_star = sp.minimize_speed(r["sc"].kernel, 2.0).c_star
    rel = abs(r["fit"].slope - c_star) / c_star
    ok = abs(lm - 2.0) <= 1e-3 and rel <= 0.05 and r["elapsed"] <= 180
    record_criterion("CRITERION 5", ok, f"least mean {lm:.6f}, slope {r['fit'].slope:.4f} vs c* {c_star:.4f} "
                     f"({100 * rel:.2f}%), {r['elapsed']:.1f}s")
    assert ok


def test_criterion_06_comparison(record_criterion):
    sc = cli.load_scenario(str(SCENARIOS / "reference.json"))
    rng = np.random.default_rng(sc.cfg["seed"])
    grid = dyn.Grid(-50.0, 150.0, 1024)
    t0 = time.perf_counter()
    worst = -math.inf
    for _ in range(20):
        low, high = vf.random_ordered_pair(rng)
        rep = vf.comparison_test(sc.kernel, sc.nonlinearity, low, high, 20.0, grid, sc.dt)
        worst = max(worst, rep["max_violation"])
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed <= 120
    record_criterion("CRITERION 6", ok, f"max ordering violation {worst:.2e} over 20 pairs, {elapsed:.1f}s")
    assert ok


def test_criterion_07_positivity(record_criterion):
    sc = cli.load_scenario(str(SCENARIOS / "reference.json"))
    rep = vf.positivity_test(sc.kernel, sc.nonlinearity, sc.initial, 1.0, sc.grid, sc.dt)
    ok = rep["passed"] and rep["n_nonpositive"] == 0 and rep["n_cells"] > 0
    record_criterion("CRITERION 7", ok, f"{rep['n_nonpositive']} non-positive cells of {rep['n_cells']}, "
                     f"min u {rep['min_value']:.2e}")
    assert ok


def test_criterion_08_supersolution(record_criterion):
    sc = cli.load_scenario(str(SCENARIOS / "reference.json"))
    curve = sp.minimize_speed(sc.kernel, 2.0)
    A = vf.fit_supersolution_amplitude(dyn.make_initial(sc.initial, sc.grid), curve.lambda_star)
    cand = vf.supersolution_exp(curve, sc.coefficient, A)
    rep = vf.residual(sc.kernel, sc.nonlinearity, cand, (0.0, sc.t_end), (sc.grid.x_min, sc.grid.x_max),
                      n_t=200, n_x=200, tol=1e-8 * A)
    ok = rep.extremum >= -1e-8 * A and rep.status == "pass"
    record_criterion("CRITERION 8", ok, f"min residual {rep.extremum:.2e} (A = {A:.3e}), status {rep.status}")
    assert ok


def test_criterion_09_subsolutions(record_criterion):
    sc = cli.load_scenario(str(SCENARIOS / "reference.json"))
    curve = sp.minimize_speed(sc.kernel, 2.0)
    cos = vf.certify_cosine(sc.kernel, sc.nonlinearity, curve)
    lam = 0.5 * curve.lambda_star
    two = vf.certify_two_exp(sc.kernel, sc.nonlinearity, curve, lam)
    bad = vf.perturbed_two_exp(sc.kernel, sc.nonlinearity, curve, lam)
    ok = (cos.status == "certified" and cos.report.extremum <= 1e-6 * cos.candidate.scale
          and two.status == "certified" and two.report.extremum <= 1e-6 * two.candidate.scale
          and bad.status == "violated" and bad.report.extremum > bad.report.tolerance)
    w = bad.report.to_dict()["witness"]
    record_criterion("CRITERION 9", ok,
                     f"cosine max {cos.report.extremum:.2e} / scale {cos.candidate.scale:.2e}; "
                     f"two-exp max {two.report.extremum:.2e} / scale {two.candidate.scale:.2e}; "
                     f"perturbed B1={bad.candidate.params['B1']:g} violated at t={w['t']:.3g}, x={w['x']:.3g}")
    assert ok


def test_criterion_10_numerical_hygiene(reference_run, record_criterion):
    sc = reference_run["sc"]
    grid = dyn.Grid(-50.0, 150.0, 2048)
    finals = [dyn.run(sc.kernel, sc.nonlinearity, sc.initial, grid, 10.0, dt, guard=False).final.values
              for dt in (0.1, 0.05, 0.025)]
    order = math.log2(np.max(np.abs(finals[0] - finals[1])) / np.max(np.abs(finals[1] - finals[2])))
    overshoot = reference_run["traj"].max_overshoot
    rng = np.random.default_rng(0)
    f = dyn.Field(sc.grid, 0.0, rng.random(sc.grid.n))
    diff = float(np.max(np.abs(dyn.convolve(sc.kernel, f, "direct") - dyn.convolve(sc.kernel, f, "spectral"))))
    ok = order >= 3.5 and overshoot <= 1e-12 and diff <= 1e-10
    record_criterion("CRITERION 10", ok, f"RK4 order {order:.2f}, max pre-projection excursion {overshoot:.1e}, "
                     f"direct vs spectral {diff:.1e}")
    assert ok


def test_criterion_11_least_mean_strictness(record_criterion):
    T = 4.0**6
    c = env.dyadic_on_off(7)
    est = env.least_mean(c, T_max=T, s_max=T)
    ces = env.cesaro_mean(c, T)
    ok = est.value <= 1.1 and ces >= 1.5
    record_criterion("CRITERION 11", ok, f"ladder estimate {est.value:.4f}, Cesaro mean {ces:.4f}")
    assert ok
