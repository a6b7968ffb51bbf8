import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_kpp import dynamics as dyn, env, kernel as kn
from nonlocal_kpp.errors import DomainExhaustedError, InvalidParametersError, ResolutionError, StabilityError

G = kn.gaussian(1.0)
MU2 = env.constant(2.0)
SMALL = dyn.Grid(-20.0, 40.0, 601)
RUN_GRID = dyn.Grid(-20.0, 80.0, 1001)  # guard zone starts near x = 40 for the unit gaussian


def test_grid():
    g = dyn.Grid(0.0, 10.0, 101)
    assert g.dx == pytest.approx(0.1)
    assert g.x[0] == 0.0 and g.x[-1] == 10.0 and g.x.size == 101
    with pytest.raises(InvalidParametersError):
        dyn.Grid(0.0, 1.0, 8)
    with pytest.raises(InvalidParametersError):
        dyn.Grid(1.0, 1.0, 100)


def test_initial_examples():
    bump = dyn.InitialData("compact_bump", {"A": 10.0, "p": 0.5})
    assert bump.profile(5.0) == pytest.approx(0.5)
    assert bump.profile(-1.0) == 0.0 and bump.profile(10.5) == 0.0
    xs = np.linspace(0.01, 9.99, 500)
    assert np.all((bump.profile(xs) > 0) & (bump.profile(xs) < 1))
    pt = dyn.InitialData("plateau_tail", {"alpha": 1.0, "A": 5.0, "p": 0.5, "lambda": 0.4})
    assert pt.beta == pytest.approx(0.5 * math.exp(-2.0))
    assert pt.profile(3.0) == pytest.approx(pt.beta)
    assert pt.profile(7.0) == pytest.approx(0.5 * math.exp(-2.8))
    assert pt.profile(-1.0) == 0.0
    xr = np.linspace(0.0, 1.0, 50)
    assert np.all(np.diff(pt.profile(xr)) > 0)
    pe = dyn.InitialData("pure_exponential", {"p": 0.5, "lambda": 0.3})
    assert pe.profile(-1.0) == 0.0 and pe.profile(4.0) == pytest.approx(0.5 * math.exp(-1.2))
    shifted = dyn.InitialData("compact_bump", {"A": 10.0, "p": 0.5}, shift=3.0)
    assert shifted.profile(8.0) == pytest.approx(0.5)


@pytest.mark.parametrize("kind,params", [
    ("plateau_tail", {"alpha": 5.0, "A": 5.0, "p": 0.5, "lambda": 0.4}),
    ("plateau_tail", {"alpha": 1.0, "A": 5.0, "p": 1.0, "lambda": 0.4}),
    ("compact_bump", {"A": 10.0, "p": 1.5}),
    ("pure_exponential", {"p": 0.5, "lambda": -1.0}),
    ("custom", {"x": [0.0, 1.0], "values": [0.5, 1.5]}),
    ("custom", {"x": [1.0, 0.0], "values": [0.5, 0.5]}),
    ("nope", {}),
])
def test_invalid_initial_data(kind, params):
    with pytest.raises(InvalidParametersError):
        dyn.InitialData(kind, params)


def test_initial_round_trip():
    d = dyn.InitialData("custom", {"x": [0.0, 1.0, 2.0], "values": [0.0, 0.5, 0.0]}, shift=1.5)
    back = dyn.InitialData.from_dict(d.to_dict())
    assert np.allclose(back.profile(SMALL.x), d.profile(SMALL.x))


def test_nonlinearity_properties():
    mu = env.periodic(2.0, [(1.0, 2 * math.pi, 0.0)])
    nl = dyn.logistic(mu)
    t = np.linspace(0, 3, 31)
    assert np.allclose([nl.f(s, 1.0) for s in t], 0.0)
    assert nl.h0 == 1.0 and nl.C == pytest.approx(3.0) and nl.H_ratio == pytest.approx(3.0)
    checks = nl.check_kpp(t, np.linspace(0, 1, 41))
    assert all(checks.values())
    nh = dyn.logistic_H(mu, 2.5)
    assert np.allclose([nh.f(s, 0.4) for s in t], 0.0)
    assert nh.carrying == pytest.approx(0.4)
    assert all(nh.check_kpp(t, np.linspace(0, 1, 41)).values())
    with pytest.raises(InvalidParametersError):
        dyn.logistic_H(mu, 0.5)


def test_convolve_constant_in_periodic_mode():
    grid = dyn.Grid(0.0, 40.0, 801)
    f = dyn.Field(grid, 0.0, np.ones(grid.n))
    for method in ("direct", "spectral"):
        out = dyn.convolve(G, f, method, boundary="periodic")
        conv = dyn.Convolution(G, grid, method, "periodic")
        assert np.allclose(out, conv.mass, rtol=0, atol=1e-14)
        assert conv.mass == pytest.approx(1.0, abs=1e-10)


def test_impulse_response():
    grid = SMALL
    v = np.zeros(grid.n)
    i = 300
    v[i] = 1.0
    out = dyn.convolve(G, dyn.Field(grid, 0.0, v))
    expected = np.asarray(kn.evaluate(G, grid.x - grid.x[i])) * grid.dx
    expected[np.abs(grid.x - grid.x[i]) > kn.support(G)[1] + 1e-9] = 0.0
    assert np.allclose(out, expected, rtol=0, atol=1e-15)


def test_impulse_response_asymmetric_kernel():
    k = kn.laplace(1.0, 3.0)
    grid = SMALL
    v = np.zeros(grid.n)
    v[300] = 1.0
    out = dyn.convolve(k, dyn.Field(grid, 0.0, v))
    # (K*u)(x_i) = K(x_i - x_300) dx: the kernel sits to the right of the impulse where K(y>0) is
    y = grid.x - grid.x[300]
    conv = dyn.Convolution(k, grid)
    m = (y >= -conv.j_left * grid.dx - 1e-9) & (y <= conv.j_right * grid.dx + 1e-9)
    assert np.allclose(out[m], np.asarray(kn.evaluate(k, y[m])) * grid.dx, atol=1e-15)


@pytest.mark.parametrize("boundary", ["zero", "periodic"])
@pytest.mark.parametrize("kernel", [G, kn.tent(2.0), kn.laplace(1.0, 3.0)])
def test_direct_matches_spectral(kernel, boundary):
    rng = np.random.default_rng(3)
    f = dyn.Field(SMALL, 0.0, rng.random(SMALL.n))
    a = dyn.convolve(kernel, f, "direct", boundary)
    b = dyn.convolve(kernel, f, "spectral", boundary)
    assert np.max(np.abs(a - b)) <= 1e-10


def test_resolution_error():
    with pytest.raises(ResolutionError):
        dyn.Convolution(kn.tent(0.1), SMALL)


def test_rhs_equilibria():
    nl = dyn.logistic(MU2)
    grid = dyn.Grid(0.0, 40.0, 401)
    zero = dyn.Field(grid, 0.0, np.zeros(grid.n))
    one = dyn.Field(grid, 0.0, np.ones(grid.n))
    assert np.all(dyn.rhs(G, nl, zero) == 0.0)
    assert np.max(np.abs(dyn.rhs(G, nl, one, boundary="periodic"))) <= 1e-14
    z = dyn.step(G, nl, zero, 0.1)
    assert np.all(z.values == 0.0) and z.t == pytest.approx(0.1)
    o = dyn.step(G, nl, one, 0.1, boundary="periodic")
    assert np.max(np.abs(o.values - 1.0)) <= 1e-14


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_rhs_bound(seed):
    rng = np.random.default_rng(seed)
    mu = env.periodic(2.0, [(1.0, 2 * math.pi, 0.0)])
    nl = dyn.logistic(mu)
    f = dyn.Field(SMALL, float(rng.uniform(0, 5)), rng.random(SMALL.n))
    r = dyn.rhs(G, nl, f)
    assert np.max(np.abs(r)) <= 2 * kn.mass(G) + env.sup_norm(mu) + 1e-12


def test_stability_error():
    nl = dyn.logistic(MU2)
    f = dyn.Field(SMALL, 0.0, np.zeros(SMALL.n))
    with pytest.raises(StabilityError):
        dyn.step(G, nl, f, 0.5)


def logistic_exact(c0, mu, t):
    return c0 * math.exp(mu * t) / (1 - c0 + c0 * math.exp(mu * t))


def test_constant_state_follows_logistic_ode():
    grid = dyn.Grid(0.0, 40.0, 401)
    nl = dyn.logistic(MU2)
    c0, T = 0.1, 2.0
    errs = []
    for dt in (0.1, 0.05, 0.025):
        init = dyn.Field(grid, 0.0, np.full(grid.n, c0))
        tr = dyn.run(G, nl, init, grid, T, dt, boundary="periodic", guard=False)
        errs.append(np.max(np.abs(tr.final.values - logistic_exact(c0, 2.0, T))))
    assert errs[0] < 1e-5
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 3.7


def test_self_convergence_order_four():
    grid = dyn.Grid(-20.0, 60.0, 801)
    nl = dyn.logistic(MU2)
    init = dyn.InitialData("compact_bump", {"A": 10.0, "p": 0.5})
    finals = [dyn.run(G, nl, init, grid, 4.0, dt, guard=False).final.values for dt in (0.1, 0.05, 0.025, 0.0125)]
    e = [np.max(np.abs(a - finals[-1])) for a in finals[:-1]]
    assert math.log2(e[0] / e[1]) >= 3.5


def test_time_lipschitz_bound():
    mu = env.periodic(2.0, [(1.0, 2 * math.pi, 0.0)])
    nl = dyn.logistic(mu)
    rec = dyn.SnapshotRecorder()
    dyn.run(G, nl, dyn.InitialData("compact_bump", {"A": 10.0, "p": 0.9}), RUN_GRID, 3.0, 0.05, [rec])
    m = rec.matrix()
    rate = np.max(np.abs(np.diff(m, axis=0))) / 0.05
    assert rate <= 2 * kn.mass(G) + env.sup_norm(mu) + 0.05 * 10


@settings(max_examples=10, deadline=None)
@given(k=st.integers(1, 40))
def test_translation_equivariance(k):
    grid = dyn.Grid(-30.0, 50.0, 801)
    nl = dyn.logistic(MU2)
    base = dyn.InitialData("compact_bump", {"A": 8.0, "p": 0.6})
    moved = dyn.InitialData("compact_bump", {"A": 8.0, "p": 0.6}, shift=k * grid.dx)
    a = dyn.run(G, nl, base, grid, 1.0, 0.05, guard=False).final.values
    b = dyn.run(G, nl, moved, grid, 1.0, 0.05, guard=False).final.values
    # away from the boundary the shifted run is the same solution moved by k cells
    inner = slice(200, 600)
    assert np.max(np.abs(b[inner.start + k:inner.stop + k] - a[inner])) <= 1e-12


def test_invariant_region_and_overshoot():
    nl = dyn.logistic(MU2)
    init = dyn.InitialData("compact_bump", {"A": 10.0, "p": 0.99})
    tr = dyn.run(G, nl, init, SMALL, 5.0, 0.1, guard=False)
    assert tr.max_overshoot <= 1e-12
    assert tr.final.check_bounds()
    assert tr.final.values.min() >= 0 and tr.final.values.max() <= 1


def test_run_t_end_zero_returns_initial():
    init = dyn.InitialData("compact_bump", {"A": 10.0, "p": 0.5})
    tr = dyn.run(G, dyn.logistic(MU2), init, RUN_GRID, 0.0, 0.1)
    assert tr.n_steps == 0 and tr.final.t == 0.0
    assert np.array_equal(tr.final.values, init.profile(RUN_GRID.x))


def test_run_observer_stride():
    rec = dyn.SnapshotRecorder()
    tr = dyn.run(G, dyn.logistic(MU2), dyn.InitialData("compact_bump", {"A": 5.0, "p": 0.5}),
                 RUN_GRID, 1.0, 0.1, [rec], stride=3)
    assert tr.n_steps == 10
    assert np.allclose(rec.times, [0.0, 0.3, 0.6, 0.9, 1.0])


def test_domain_exhausted():
    grid = dyn.Grid(-10.0, 60.0, 701)
    with pytest.raises(DomainExhaustedError) as err:
        dyn.run(G, dyn.logistic(MU2), dyn.InitialData("compact_bump", {"A": 5.0, "p": 0.5}), grid, 20.0, 0.1)
    assert 0 < err.value.t < 20.0


def test_snapshot_writers(tmp_path):
    rec = dyn.SnapshotRecorder()
    dyn.run(G, dyn.logistic(MU2), dyn.InitialData("compact_bump", {"A": 5.0, "p": 0.5}), RUN_GRID, 0.2, 0.1, [rec])
    p = tmp_path / "s.csv"
    dyn.write_snapshots_csv(str(p), rec.fields)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,x,u" and len(lines) == 1 + 3 * RUN_GRID.n
    q = tmp_path / "s.npz"
    dyn.write_snapshots_npz(str(q), rec.fields, {"dt": 0.1})
    data = np.load(q)
    assert data["u"].shape == (3, RUN_GRID.n)
    assert (tmp_path / "s.npz.json").exists()
