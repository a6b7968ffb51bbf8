import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nonlocal_kpp import kernel as kn
from nonlocal_kpp.errors import AssumptionViolation, DomainError, InvalidKernelError, NoMinorantError

TAB = kn.tabulated(np.linspace(-2, 3, 11), [0, 0.1, 0.3, 0.5, 0.4, 0.35, 0.3, 0.2, 0.1, 0.05, 0])
KERNELS = {
    "gaussian": kn.gaussian(1.0),
    "gaussian_wide": kn.gaussian(2.5, scale=1.5),
    "laplace": kn.laplace(2.0, 3.0),
    "tent": kn.tent(1.0),
    "tabulated": TAB,
}


def quad_moment(k, lam, order=0):
    lo, hi = kn.support(k, rel=1e-18, tilt=lam)
    pts = [p for p in kn.kinks(k) + (list(k.params["y"]) if k.family == "tabulated" else []) if lo < p < hi]
    val, _ = integrate.quad(lambda y: kn.evaluate(k, y) * y**order * math.exp(lam * y), lo, hi,
                            points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=500)
    return val


def test_evaluate_examples():
    assert kn.evaluate(kn.tent(1.0), 0.0) == 1.0
    assert kn.evaluate(kn.tent(1.0, scale=3.0), 0.0) == 3.0
    assert kn.evaluate(kn.tent(1.0), 2.0) == 0.0
    assert kn.evaluate(kn.gaussian(1.0), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


def test_tabulated_outside_range_is_zero():
    assert kn.evaluate(TAB, -5.0) == 0.0 and kn.evaluate(TAB, 7.0) == 0.0


@pytest.mark.parametrize("name", list(KERNELS))
def test_mass_matches_quadrature(name):
    k = KERNELS[name]
    assert kn.mass(k) == pytest.approx(quad_moment(k, 0.0), rel=1e-10)


@pytest.mark.parametrize("name", list(KERNELS))
@pytest.mark.parametrize("lam", [0.0, 0.3, 1.0, 2.2])
def test_mgf_and_derivative_match_quadrature(name, lam):
    k = KERNELS[name]
    if lam >= kn.abscissa(k):
        pytest.skip("beyond abscissa")
    assert kn.mgf(k, lam) == pytest.approx(quad_moment(k, lam), rel=1e-10)
    assert kn.mgf_derivative(k, lam) == pytest.approx(quad_moment(k, lam, 1), rel=1e-9, abs=1e-12)
    assert kn.big_L(k, lam) == pytest.approx(kn.mgf(k, lam) - kn.mass(k), rel=1e-10, abs=1e-14)


def test_closed_form_examples():
    g = kn.gaussian(1.0)
    assert kn.mgf(g, 1.0) == pytest.approx(math.exp(0.5), rel=1e-14)
    assert kn.big_L(g, 1.0) == pytest.approx(math.exp(0.5) - 1, rel=1e-14)
    assert kn.mgf_derivative(g, 1.0) == pytest.approx(math.exp(0.5), rel=1e-14)
    t = kn.tent(1.0)
    for lam in (1e-3, 0.5, 3.0, 10.0):
        assert kn.mgf(t, lam) == pytest.approx(2 * (math.cosh(lam) - 1) / lam**2, rel=1e-9)


@pytest.mark.parametrize("name", list(KERNELS))
def test_L_zero_and_mgf_zero(name):
    k = KERNELS[name]
    assert kn.big_L(k, 0.0) == 0.0
    assert kn.mgf(k, 0.0) == pytest.approx(kn.mass(k), rel=1e-13)


@pytest.mark.parametrize("name", ["gaussian", "tent"])
def test_symmetric_kernel_properties(name):
    k = KERNELS[name]
    assert kn.mgf_derivative(k, 0.0) == pytest.approx(0.0, abs=1e-14)
    assert all(kn.big_L(k, lam) > 0 for lam in (0.01, 0.5, 2.0))


@pytest.mark.parametrize("name", list(KERNELS))
def test_derivative_matches_central_differences(name):
    k = KERNELS[name]
    h = 1e-4
    for lam in (0.4, 1.3):
        if lam + h >= kn.abscissa(k):
            continue
        fd = (kn.mgf(k, lam + h) - kn.mgf(k, lam - h)) / (2 * h)
        assert kn.mgf_derivative(k, lam) == pytest.approx(fd, rel=1e-6)


def test_abscissa():
    assert kn.abscissa(kn.gaussian(1.0)) == math.inf
    assert kn.abscissa(kn.tent(1.0)) == math.inf
    assert kn.abscissa(TAB) == math.inf
    assert kn.abscissa(kn.laplace(1.0, 3.0)) == 3.0


def test_lambda_domain_errors():
    lap = kn.laplace(1.0, 3.0)
    with pytest.raises(DomainError):
        kn.mgf(lap, 3.0)
    with pytest.raises(DomainError):
        kn.mgf(lap, 3.0 * (1 - 1e-7))
    with pytest.raises(DomainError):
        kn.mgf(kn.gaussian(1.0), -0.1)


@pytest.mark.parametrize("bad", [
    dict(family="gaussian", params={"variance": -1.0}),
    dict(family="tent", params={"halfwidth": 0.0}),
    dict(family="laplace", params={"rate_left": 1.0, "rate_right": 0.0}),
    dict(family="tabulated", params={"y": [1.0, 2.0, 3.0], "values": [1.0, 1.0, 1.0]}),
    dict(family="tabulated", params={"y": [-1.0, 0.0, 2.0], "values": [1.0, 1.0, 1.0]}),
    dict(family="tabulated", params={"y": [-1.0, 0.0, 1.0], "values": [1.0, -1.0, 1.0]}),
    dict(family="nope", params={}),
])
def test_invalid_kernels(bad):
    with pytest.raises(InvalidKernelError):
        kn.KernelSpec(**bad)


def test_laplace_with_zero_right_abscissa_is_rejected():
    with pytest.raises((InvalidKernelError, AssumptionViolation)):
        kn.abscissa(kn.KernelSpec("laplace", {"rate_left": 1.0, "rate_right": 0.0}))


@pytest.mark.parametrize("name", list(KERNELS))
def test_scale_homogeneity(name):
    k = KERNELS[name]
    k2 = kn.KernelSpec(k.family, k.params, 2.0 * k.scale)
    for f in (kn.mgf, kn.big_L, kn.mgf_derivative):
        assert f(k2, 0.7) == pytest.approx(2.0 * f(k, 0.7), rel=1e-13)
    assert kn.mass(k2) == pytest.approx(2 * kn.mass(k))


@pytest.mark.parametrize("name", list(KERNELS))
def test_serialisation_round_trip(name, tmp_path):
    k = KERNELS[name]
    assert kn.KernelSpec.from_dict(k.to_dict()) == k


def test_tabulated_from_csv(tmp_path):
    path = tmp_path / "k.csv"
    kn.write_two_column_csv(str(path), TAB.params["y"], TAB.params["values"])
    k = kn.KernelSpec.from_dict({"family": "tabulated", "params": {"csv": "k.csv"}}, str(tmp_path))
    assert k.params == TAB.params


def test_reflection():
    lap = kn.laplace(2.0, 3.0)
    ref = lap.reflected()
    ys = np.linspace(-4, 4, 101)
    assert np.allclose(kn.evaluate(ref, ys), kn.evaluate(lap, -ys))
    assert np.allclose(kn.evaluate(TAB.reflected(), ys), kn.evaluate(TAB, -ys))


@pytest.mark.parametrize("name", list(KERNELS))
def test_minorant_below_kernel(name):
    k = KERNELS[name]
    delta = kn.default_minorant_delta(k)
    m = kn.minorant(k, delta)
    y = np.linspace(-2 * delta, 2 * delta, 20001)
    assert np.all(m.evaluate(y) <= kn.evaluate(k, y) + 1e-15)
    assert np.allclose(m.evaluate(y), m.evaluate(-y))
    inner = y[np.abs(y) < delta]
    assert np.all(m.evaluate(inner) > 0)
    assert m.evaluate(delta) == 0.0 and m.evaluate(-delta) == 0.0
    assert m.evaluate(0.0) == pytest.approx(m.height)


def test_minorant_examples():
    g = kn.gaussian(1.0)
    m = kn.minorant(g, 1.0)
    assert m.height == pytest.approx(kn.evaluate(g, 1.0), rel=1e-14)
    q, _ = integrate.quad(m.evaluate, -1, 1)
    assert m.mass == pytest.approx(q, rel=1e-12)
    for lam in (0.0, 0.5, 2.0):
        q, _ = integrate.quad(lambda y: m.evaluate(y) * math.exp(lam * y), -1, 1, epsrel=1e-13)
        assert m.mgf(lam) == pytest.approx(q, rel=1e-11)
    with pytest.raises(NoMinorantError):
        kn.minorant(kn.tent(1.0), 1.5)


@settings(max_examples=40, deadline=None)
@given(l1=st.floats(0.0, 3.0), l2=st.floats(0.0, 3.0), w=st.floats(0.0, 1.0),
       name=st.sampled_from(["gaussian", "tent", "tabulated", "laplace"]))
def test_mgf_convex(l1, l2, w, name):
    k = KERNELS[name]
    sigma = kn.abscissa(k)
    l1, l2 = min(l1, 0.9 * sigma), min(l2, 0.9 * sigma)
    mid = w * l1 + (1 - w) * l2
    bound = w * kn.mgf(k, l1) + (1 - w) * kn.mgf(k, l2)
    assert kn.mgf(k, mid) <= bound * (1 + 1e-12) + 1e-14


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(1e-6, 8.0), hw=st.floats(0.2, 5.0))
def test_tent_mgf_stable_small_and_large(lam, hw):
    k = kn.tent(hw)
    z = lam * hw
    expected = 2 * (math.cosh(z) - 1) / z**2 if z > 1e-3 else 1 + z**2 / 12
    assert kn.mgf(k, lam) == pytest.approx(expected, rel=1e-7)
