"""Residual certificates for sub- and super-solutions, plus comparison, positivity
and persistence checks run on the solver.

For a candidate ``w`` the residual is
``N[w] = d_t w - (K*w - Kbar w) - w f(t, w)``; a super-solution needs
``N >= 0`` and a sub-solution ``N <= 0``.  ``d_t w`` is taken in closed form and
``K*w`` by adaptive quadrature, so the check does not depend on the time
integrator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from . import dynamics as dy
from . import env
from . import kernel as kn
from . import speed as sp
from .errors import InvalidParametersError, UnsupportedError

TRUNCATION_LIMIT = 1e-8
R_CAP = 1e3
DEFAULT_B1_GRID = tuple(0.125 * 2.0**k for k in range(10))
PERTURBED_B1 = (0.0, -0.5, -1.0, -2.0, -4.0)


@dataclass(eq=False)
class CandidateSolution:
    """Closed-form candidate ``w(t, x)`` with its time derivative.

    ``support(t)`` returns the ``x`` interval outside which ``w`` vanishes and
    ``envelope(t, x)`` a bound ``E`` with ``|w(t, x - y)| <= E e^{tilt y}``,
    used to bound the part of ``K*w`` cut off by the quadrature window.
    """

    kind: str
    direction: str  # "super" or "sub"
    params: dict
    scale: float
    tilt: float
    value: Callable
    time_derivative: Callable
    support: Callable
    envelope: Callable
    active: Callable | None = None  # points where the inequality is asserted

    def __call__(self, t, x):
        return self.value(t, x)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "direction": self.direction, "scale": self.scale, "params": self.params}


def _unbounded(t):
    t = np.asarray(t, dtype=float)
    return np.full(t.shape, -np.inf), np.full(t.shape, np.inf)


def zero_candidate() -> CandidateSolution:
    zero = lambda t, x: np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)
    return CandidateSolution("zero", "sub", {}, 1.0, 0.0, zero, zero, _unbounded, zero)


def supersolution_exp(curve: sp.SpeedCurve, mu: env.Coefficient, A: float, lam: float | None = None) -> CandidateSolution:
    """``A exp(-lam (x - int_0^t c(lam)(s) ds))`` with ``lam`` defaulting to ``lambda_star``.

    Points where ``w >= 1`` are left out: there ``min(w, 1) = 1`` is itself a solution.
    """
    sp.require_interior(curve)
    lam = curve.lambda_star if lam is None else float(lam)
    L = float(kn.big_L(curve.kernel, lam))

    def shift(t):
        return (L * np.asarray(t, dtype=float) + np.asarray(env.integral_mu(mu, 0.0, t))) / lam

    def value(t, x):
        with np.errstate(over="ignore"):
            return A * np.exp(-lam * (np.asarray(x) - shift(t)))

    def dt(t, x):
        return (L + np.asarray(env.eval_mu(mu, t))) * value(t, x)

    return CandidateSolution("supersolution_exp", "super", {"A": A, "lambda": lam}, A, lam,
                             value, dt, _unbounded, value, active=lambda t, x: value(t, x) < 1.0)


def fit_supersolution_amplitude(u0: dy.Field, lam: float) -> float:
    """Smallest ``A`` with ``A e^{-lam x} >= u0`` on the grid (tiny safety factor)."""
    with np.errstate(over="ignore"):
        a = np.max(u0.values * np.exp(lam * u0.grid.x))
    return float(a) * (1.0 + 1e-12)


def _cos_profile_sup(gamma: float, R: float) -> float:
    # maximiser of e^{-gamma z} cos(pi z / 2R) on (-R, R)
    k = 0.5 * math.pi / R
    z = math.atan(-gamma / k) / k
    return math.exp(-gamma * z) * math.cos(k * z)


def subsolution_cosine(kernel: kn.KernelSpec, mu: env.Coefficient, gamma: float, R: float, B: float, eta: float,
                       adjuster=None) -> CandidateSolution:
    """``eta e^{a(t)} phi(x - X(t))`` with ``phi = e^{-gamma z} cos(pi z / 2R) / sup`` on ``|z| <= R``.

    ``X(t) = c_{R,B}(gamma) t`` and ``adjuster = (a, a', sup|a|)`` (zero by default).
    The profile is normalised so that ``0 <= w <= eta e^{sup|a|}``.
    """
    if B > 2.0 * R:
        raise InvalidParametersError("need B <= 2R")
    a, a_prime, a_bound = adjuster or (lambda t: np.zeros_like(np.asarray(t, dtype=float)),) * 2 + (0.0,)
    c = sp.c_truncated(kernel, gamma, R, B)
    k = 0.5 * math.pi / R
    norm = _cos_profile_sup(gamma, R)

    def parts(t, x):
        z = np.asarray(x, dtype=float) - c * np.asarray(t, dtype=float)
        inside = np.abs(z) <= R
        zc = np.where(inside, z, 0.0)
        amp = eta * np.exp(np.asarray(a(t))) / norm
        return z, inside, zc, amp

    def value(t, x):
        _, inside, zc, amp = parts(t, x)
        return np.where(inside, amp * np.exp(-gamma * zc) * np.cos(k * zc), 0.0)

    def dt(t, x):
        _, inside, zc, amp = parts(t, x)
        e = np.exp(-gamma * zc)
        phi = e * np.cos(k * zc)
        dphi = -gamma * phi - k * e * np.sin(k * zc)
        return np.where(inside, amp * (np.asarray(a_prime(t)) * phi - c * dphi), 0.0)

    def support(t):
        t = np.asarray(t, dtype=float)
        return c * t - R, c * t + R

    def envelope(t, x):
        z = np.asarray(x, dtype=float) - c * np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return eta * math.exp(a_bound) / norm * np.exp(-gamma * z)

    params = {"gamma": gamma, "R": R, "B": B, "eta": eta, "speed": c, "a_bound": a_bound}
    return CandidateSolution("subsolution_cosine", "sub", params, eta, gamma, value, dt, support, envelope)


def _two_exp_adjuster(mu: env.Coefficient, lam: float):
    """``a = (lmu t - int_0^t mu) / lam`` so that ``c_{lam,a}`` is the constant ``floor c(lam)``."""
    if env.mean_value(mu) is None:
        raise UnsupportedError("two-exponential sub-solution needs a constant or periodic coefficient")
    a0, a0p, bound = env.dual_adjuster(mu)
    return (lambda t: np.asarray(a0(t)) / lam, lambda t: np.asarray(a0p(t)) / lam, bound / lam)


def subsolution_two_exp(kernel: kn.KernelSpec, mu: env.Coefficient, lam: float, h: float, B1: float,
                        adjuster=None) -> CandidateSolution:
    """``max{0, e^{-lam (xi + a)} - e^{-lam a + B0 + B1} e^{-(lam + h) xi}}``, ``xi = x - int c_{lam,a}``.

    ``c_{lam,a} = (L(lam) + mu) / lam + a'`` and
    ``B0 = -h a - (h / lam)(int_0^t mu - lmu t)``, which cancels the time
    dependence of the second exponential's growth (zero for the default ``a``).
    """
    lmu = env.mean_value(mu)
    if lmu is None:
        raise UnsupportedError("two-exponential sub-solution needs a constant or periodic coefficient")
    a, a_prime, a_bound = adjuster or _two_exp_adjuster(mu, lam)
    L = float(kn.big_L(kernel, lam))

    def I(t):
        return np.asarray(env.integral_mu(mu, 0.0, t))

    def P(t):  # int_0^t c_{lam,a}
        t = np.asarray(t, dtype=float)
        return (L * t + I(t)) / lam + np.asarray(a(t)) - np.asarray(a(0.0))

    def B0(t):
        t = np.asarray(t, dtype=float)
        return -h * np.asarray(a(t)) - (h / lam) * (I(t) - lmu * t)

    def B0p(t):
        return -h * np.asarray(a_prime(t)) - (h / lam) * (np.asarray(env.eval_mu(mu, t)) - lmu)

    def terms(t, x):
        t = np.asarray(t, dtype=float)
        xi = np.asarray(x, dtype=float) - P(t)
        at = np.asarray(a(t))
        with np.errstate(over="ignore", under="ignore"):
            e1 = np.exp(-lam * (xi + at))
            e2 = np.exp(-lam * at + B0(t) + B1 - (lam + h) * xi)
        return t, e1, e2

    def value(t, x):
        _, e1, e2 = terms(t, x)
        return np.maximum(e1 - e2, 0.0)

    def dt(t, x):
        t, e1, e2 = terms(t, x)
        p = (L + np.asarray(env.eval_mu(mu, t))) / lam + np.asarray(a_prime(t))
        ap = np.asarray(a_prime(t))
        d = lam * (p - ap) * e1 - (-lam * ap + B0p(t) + (lam + h) * p) * e2
        return np.where(e1 > e2, d, 0.0)

    def support(t):
        lo = P(t) + (B0(t) + B1) / h
        return lo, np.full(np.shape(lo), np.inf)

    def envelope(t, x):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(-lam * (np.asarray(x) - P(t)) + lam * a_bound)

    # sup over xi of e1 - e2 (B0 vanishes for the default adjuster)
    xi_star = (B1 + math.log((lam + h) / lam)) / h
    scale = math.exp(lam * a_bound - lam * xi_star) * h / (lam + h)
    delta0 = (lam + h) * (sp.least_mean_speed(kernel, lmu, lam) - sp.least_mean_speed(kernel, lmu, lam + h))
    params = {"lambda": lam, "h": h, "B1": B1, "a_bound": a_bound, "delta0": float(delta0),
              "speed": (L + lmu) / lam}
    return CandidateSolution("subsolution_two_exp", "sub", params, scale, lam, value, dt, support, envelope)


# -- residual ---------------------------------------------------------------

@dataclass
class ResidualReport:
    kind: str
    direction: str
    t_range: tuple[float, float]
    x_range: tuple[float, float]
    n_samples: int
    extremum: float  # min for super-solutions, max for sub-solutions
    location: tuple[float, float]
    tolerance: float
    truncation_bound: float
    status: str  # "pass", "violated" or "inconclusive"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "direction": self.direction,
            "t_range": list(self.t_range), "x_range": list(self.x_range),
            "n_samples": self.n_samples, "max_signed_residual": self.extremum,
            "witness": {"t": self.location[0], "x": self.location[1], "residual": self.extremum},
            "tolerance": self.tolerance, "truncation_bound": self.truncation_bound, "status": self.status,
        }


def _window_tail(kernel: kn.KernelSpec, tilt: float, lo: float, hi: float) -> float:
    inside, _ = integrate.quad(lambda y: kn.evaluate(kernel, y) * math.exp(tilt * y), lo, hi,
                               points=[p for p in kn.kinks(kernel) if lo < p < hi] or None,
                               epsabs=0.0, epsrel=1e-13, limit=200)
    return max(float(kn.mgf(kernel, tilt)) - inside, 0.0)


def convolve_candidate(kernel: kn.KernelSpec, cand: CandidateSolution, t, x) -> tuple[np.ndarray, float]:
    """``(K*w)(t, x)`` by adaptive quadrature, with a bound on the truncated part."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    lo, hi = kn.support(kernel, rel=1e-16, tilt=cand.tilt)
    s_lo, s_hi = cand.support(t)
    z_lo = np.maximum(np.broadcast_to(s_lo, x.shape), x - hi)
    z_hi = np.minimum(np.broadcast_to(s_hi, x.shape), x - lo)
    width = np.maximum(z_hi - z_lo, 0.0)

    def integrand(s):
        z = z_lo + s * width
        return kn.evaluate(kernel, x - z) * cand.value(t, z) * width

    scale = max(float(np.max(np.abs(cand.value(t, x)), initial=0.0)), cand.scale, 1e-300)
    val, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-13 * scale, epsrel=1e-12, norm="max", limit=2000)
    tail = _window_tail(kernel, cand.tilt, lo, hi)
    env_ = np.where(width > 0, cand.envelope(t, x), 0.0)
    bound = float(np.max(env_, initial=0.0)) * tail
    return np.asarray(val), bound


def residual(kernel: kn.KernelSpec, nl: dy.Nonlinearity, cand: CandidateSolution, t_range, x_range,
             n_t: int = 200, n_x: int = 200, tol: float | None = None) -> ResidualReport:
    """Sample ``N[w]`` on an ``n_t x n_x`` grid and test its sign.

    The default tolerance is ``1e-6 * cand.scale``.  A truncation bound above
    ``1e-8 * cand.scale`` makes the report inconclusive.
    """
    if n_t * n_x < 10_000:
        raise InvalidParametersError("residual sampling needs at least 1e4 points")
    tol = 1e-6 * cand.scale if tol is None else tol
    tt, xx = np.meshgrid(np.linspace(*t_range, n_t), np.linspace(*x_range, n_x), indexing="ij")
    t, x = tt.ravel(), xx.ravel()
    mask = np.ones(t.shape, bool) if cand.active is None else np.asarray(cand.active(t, x), bool)
    res = np.zeros(t.shape)
    bound = 0.0
    if mask.any():
        ta, xa = t[mask], x[mask]
        w = cand.value(ta, xa)
        conv, bound = convolve_candidate(kernel, cand, ta, xa)
        res[mask] = cand.time_derivative(ta, xa) - (conv - kn.mass(kernel) * w) - w * nl.f(ta, w)
    if cand.direction == "super":
        i = int(np.argmin(res))
        ok = res[i] >= -tol
    else:
        i = int(np.argmax(res))
        ok = res[i] <= tol
    if bound > TRUNCATION_LIMIT * cand.scale:
        status = "inconclusive"
    else:
        status = "pass" if ok else "violated"
    return ResidualReport(cand.kind, cand.direction, tuple(map(float, t_range)), tuple(map(float, x_range)),
                          int(t.size), float(res[i]), (float(t[i]), float(x[i])), float(tol), bound, status)


# -- witness searches -------------------------------------------------------

@dataclass
class CertificateResult:
    status: str  # "certified", "not certified" or "violated"
    candidate: CandidateSolution | None
    report: ResidualReport | None
    attempts: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "candidate": None if self.candidate is None else self.candidate.to_dict(),
            "report": None if self.report is None else self.report.to_dict(),
            "attempts": self.attempts,
        }


def _cosine_adjuster(mu: env.Coefficient):
    if mu.form == "constant":
        return None, mu.params["value"]
    if env.mean_value(mu) is None:
        raise UnsupportedError("cosine sub-solution search needs a constant or periodic coefficient")
    return env.dual_adjuster(mu), env.mean_value(mu)


def certify_cosine(kernel: kn.KernelSpec, nl: dy.Nonlinearity, curve: sp.SpeedCurve, gamma_frac: float = 0.9,
                   B_start: float = 4.0, R_cap: float = R_CAP, horizon: float = 10.0) -> CertificateResult:
    """Search for a compactly supported cosine sub-solution.

    ``gamma = gamma_frac * lambda_star`` and ``R = 2B``.  For each ``B`` the
    growth margin ``m = C_B - gamma c_{R,B} - Kbar + <mu>`` (``C_B`` the
    cosine moment of the truncated tilted kernel) gives the slack
    ``theta = m / 2`` and amplitude ``eta = theta / (C e^{sup|a|})``.  ``B``
    doubles until the residual certificate passes or ``R`` exceeds the cap.
    """
    sp.require_interior(curve)
    gamma = gamma_frac * curve.lambda_star
    adjuster, mean_mu = _cosine_adjuster(nl.mu)
    a_bound = 0.0 if adjuster is None else adjuster[2]
    kbar = kn.mass(kernel)
    lo, hi = kn.support(kernel)
    attempts = []
    B = B_start
    last = None
    while 2.0 * B <= R_cap:
        R = 2.0 * B
        c = sp.c_truncated(kernel, gamma, R, B)
        cos_moment, _ = integrate.quad(
            lambda z: kn.evaluate(kernel, z) * math.exp(gamma * z) * math.cos(0.5 * math.pi * z / R),
            max(-B, lo), min(B, hi), epsabs=1e-13, epsrel=1e-12, limit=200)
        margin = cos_moment - gamma * c - kbar + mean_mu
        entry = {"B": B, "R": R, "speed": c, "margin": margin}
        if margin > 0:
            theta = 0.5 * margin
            eta = theta / (nl.C * math.exp(a_bound))
            cand = subsolution_cosine(kernel, nl.mu, gamma, R, B, eta, adjuster)
            rep = residual(kernel, nl, cand, (0.0, horizon), (-R - hi, c * horizon + R - lo))
            entry.update(theta=theta, eta=eta, status=rep.status, max_residual=rep.extremum)
            attempts.append(entry)
            last = (cand, rep)
            if rep.passed:
                return CertificateResult("certified", cand, rep, attempts)
        else:
            attempts.append(entry)
        B *= 2.0
    return CertificateResult("not certified", *(last or (None, None)), attempts)


def default_h(curve: sp.SpeedCurve, lam: float) -> float:
    sigma = kn.abscissa(curve.kernel)
    return 0.5 * min(lam, sigma - lam, curve.lambda_star - lam)


def _two_exp_report(kernel, nl, cand: CandidateSolution, horizon: float) -> ResidualReport:
    lo_edge, _ = cand.support(np.array([0.0, horizon]))
    lam, h = cand.params["lambda"], cand.params["h"]
    # past the profile maximum the candidate is a decaying exponential pair; 40/lam covers e^{-40}
    x_lo = float(np.min(lo_edge)) - 5.0
    x_hi = float(np.max(lo_edge)) + (math.log((lam + h) / lam) + 40.0) / h
    return residual(kernel, nl, cand, (0.0, horizon), (x_lo, x_hi))


def certify_two_exp(kernel: kn.KernelSpec, nl: dy.Nonlinearity, curve: sp.SpeedCurve, lam: float,
                    h: float | None = None, B1_grid=DEFAULT_B1_GRID, horizon: float = 10.0) -> CertificateResult:
    """First ``B1`` on the grid for which the two-exponential candidate passes."""
    sp.require_interior(curve)
    if not 0 < lam < curve.lambda_star:
        raise InvalidParametersError("two-exponential sub-solution needs 0 < lam < lambda_star")
    h = default_h(curve, lam) if h is None else h
    attempts = []
    last = None
    for B1 in B1_grid:
        cand = subsolution_two_exp(kernel, nl.mu, lam, h, B1)
        rep = _two_exp_report(kernel, nl, cand, horizon)
        attempts.append({"B1": B1, "h": h, "status": rep.status, "max_residual": rep.extremum})
        last = (cand, rep)
        if rep.passed:
            return CertificateResult("certified", cand, rep, attempts)
    return CertificateResult("not certified", *(last or (None, None)), attempts)


def perturbed_two_exp(kernel: kn.KernelSpec, nl: dy.Nonlinearity, curve: sp.SpeedCurve, lam: float,
                      h: float | None = None, B1_values=PERTURBED_B1, horizon: float = 10.0) -> CertificateResult:
    """Negative control: lower ``B1`` until the candidate's residual changes sign.

    Returns "violated" with the witness point of the first failing value, or
    "certified" if every value still passes.
    """
    h = default_h(curve, lam) if h is None else h
    attempts = []
    last = None
    for B1 in B1_values:
        cand = subsolution_two_exp(kernel, nl.mu, lam, h, B1)
        rep = _two_exp_report(kernel, nl, cand, horizon)
        attempts.append({"B1": B1, "h": h, "status": rep.status, "max_residual": rep.extremum})
        last = (cand, rep)
        if rep.status == "violated":
            return CertificateResult("violated", cand, rep, attempts)
    return CertificateResult("certified", *last, attempts)


# -- solver-level checks ----------------------------------------------------

def comparison_test(kernel: kn.KernelSpec, nl: dy.Nonlinearity, u0_low: dy.InitialData, u0_high: dy.InitialData,
                    t_end: float, grid: dy.Grid, dt: float, method: str = "direct",
                    atol: float = 1e-10) -> dict:
    """Evolve both data side by side and record ``max_x (u_low - u_high)`` after every step."""
    lo = dy.make_initial(u0_low, grid)
    hi = dy.make_initial(u0_high, grid)
    if np.any(lo.values > hi.values):
        raise InvalidParametersError("comparison_test needs u0_low <= u0_high on the grid")
    model = dy.Model(kernel, nl, grid, method)
    n_steps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / n_steps if n_steps else dt
    worst, where = float(np.max(lo.values - hi.values)), (0.0, float(grid.x[0]))
    for _ in range(n_steps):
        lo, hi = model.step(lo, h), model.step(hi, h)
        d = lo.values - hi.values
        i = int(np.argmax(d))
        if d[i] > worst:
            worst, where = float(d[i]), (lo.t, float(grid.x[i]))
    return {"max_violation": worst, "witness": {"t": where[0], "x": where[1]}, "n_steps": n_steps,
            "tolerance": atol, "passed": bool(worst <= atol)}


def random_ordered_pair(rng: np.random.Generator, x_lo: float = -20.0, x_hi: float = 20.0, n_nodes: int = 12):
    """Two piecewise-linear profiles ``low <= high`` with random nodes and values in ``[0, 1]``."""
    x = np.sort(rng.uniform(x_lo, x_hi, n_nodes))
    x = np.unique(np.round(x, 6))
    high = rng.uniform(0.0, 1.0, x.size)
    high[0] = high[-1] = 0.0
    low = high * rng.uniform(0.0, 1.0, x.size)
    return (dy.InitialData("custom", {"x": x.tolist(), "values": low.tolist()}),
            dy.InitialData("custom", {"x": x.tolist(), "values": high.tolist()}))


def positivity_test(kernel: kn.KernelSpec, nl: dy.Nonlinearity, init: dy.InitialData, t_probe: float,
                    grid: dy.Grid, dt: float) -> dict:
    """Strict positivity at ``t_probe`` on the region reachable from ``supp(u0)``.

    The region is ``supp(u0)`` widened by ``ceil(t_probe * Kbar)`` kernel
    reaches on each side (the kernel's effective support, one reach per unit
    of jump rate).  Cells further away are exempt.
    """
    u0 = dy.make_initial(init, grid)
    pos = np.flatnonzero(u0.values > 0)
    if pos.size == 0:
        return {"skipped": True, "reason": "initial data identically zero", "passed": True}
    model = dy.Model(kernel, nl, grid, "direct")
    hops = int(math.ceil(t_probe * model.kbar - 1e-12)) if t_probe > 0 else 0
    i0 = max(0, int(pos[0]) - hops * model.conv.j_left)
    i1 = min(grid.n - 1, int(pos[-1]) + hops * model.conv.j_right)
    if t_probe > 0:
        u = dy.run(kernel, nl, u0, grid, t_probe, dt, guard=False).final
    else:
        u = u0
        i0, i1 = int(pos[0]), int(pos[-1])
    region = u.values[i0:i1 + 1]
    bad = np.flatnonzero(region <= 0)
    return {
        "t_probe": t_probe, "hops": hops,
        "region": [float(grid.x[i0]), float(grid.x[i1])],
        "initial_support": [float(grid.x[pos[0]]), float(grid.x[pos[-1]])],
        "n_cells": int(region.size), "n_nonpositive": int(bad.size),
        "min_value": float(region.min()),
        "passed": bool(bad.size == 0),
    }


def persistence_diagnostics(fields: list[dy.Field], trace, eps0: float = 0.0, ks=(0.5, 0.9)) -> dict:
    """Liminf proxies over the last half of the recorded run.

    ``h1 = min_t u(t, 0)``, ``h3 = min_t u(t, X(t))`` and, for each ``k``,
    ``min_t min_{x in [0, k X(t)]} u(t, x)``.
    """
    t_last = fields[-1].t
    t_from = 0.5 * t_last
    trace_t, trace_x = trace.arrays()
    h1 = math.inf
    h3 = math.inf
    inner = {float(k): math.inf for k in ks}
    for f in fields:
        if f.t < t_from - 1e-12:
            continue
        x = f.grid.x
        h1 = min(h1, float(np.interp(0.0, x, f.values)))
        j = np.flatnonzero(np.abs(trace_t - f.t) <= 1e-9 * max(1.0, f.t))
        if j.size == 0:
            continue
        X = float(trace_x[j[0]])
        h3 = min(h3, float(np.interp(X, x, f.values)))
        for k in inner:
            m = (x >= 0.0) & (x <= k * X)
            v = float(f.values[m].min()) if m.any() else float(np.interp(0.0, x, f.values))
            inner[k] = min(inner[k], v)
    numbers = {"h1": h1, "h3": h3, **{f"inner_k{k:g}": v for k, v in inner.items()}}
    return {"window": [t_from, t_last], "theta": trace.theta, "eps0": eps0, **numbers,
            "all_above_eps0": bool(all(v >= eps0 for v in numbers.values()))}
