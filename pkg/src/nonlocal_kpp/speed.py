"""Speed functionals of the nonlocal KPP problem.

For ``0 < lam < sigma(K)`` the instantaneous speed is
``c(lam)(t) = (L(lam) + mu(t)) / lam`` and its least mean is
``(L(lam) + lmu) / lam`` where ``lmu`` is the least mean of ``mu``.  The
minimal value of the latter is the rightward spreading speed ``c_star``,
reached at ``lambda_star``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import env
from . import kernel as kn
from .errors import AssumptionViolation, DomainError, NonlocalKPPError, UnsupportedError

SCAN_POINTS = 64
SCAN_LO = 1e-4
SCAN_HI = 50.0
INTERIOR_GAP = 1e-4
IDENTITY_RTOL = 1e-6


class SpeedIdentityError(NonlocalKPPError):
    """The interior minimiser failed ``c_star = M'(lambda_star)``."""


@dataclass
class SpeedCurve:
    kernel: kn.KernelSpec
    mu_least_mean: float
    samples: list[tuple[float, float]]
    lambda_star: float
    c_star: float
    star_interior: bool
    scan_edge: float = math.inf
    identity_residual: float = math.nan
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "c_star": self.c_star,
            "star_interior": self.star_interior,
            "identity_residual": self.identity_residual,
        }


def _check_open(kernel: kn.KernelSpec, lam) -> None:
    lam_a = np.asarray(lam, dtype=float)
    if np.any(lam_a <= 0):
        raise DomainError("lambda must be positive")
    # remaining checks (finite, below the abscissa) happen in the kernel module


def c_lambda_t(kernel: kn.KernelSpec, mu: env.Coefficient, lam, t):
    """Instantaneous speed ``(L(lam) + mu(t)) / lam``."""
    _check_open(kernel, lam)
    return (np.asarray(kn.big_L(kernel, lam)) + np.asarray(env.eval_mu(mu, t))) / np.asarray(lam)


def check_f4(kernel: kn.KernelSpec, mu_least_mean: float) -> None:
    kbar = kn.mass(kernel)
    if not mu_least_mean > kbar:
        raise AssumptionViolation(
            f"least mean of mu must exceed the kernel mass: {mu_least_mean:.6g} <= {kbar:.6g} "
            "(condition lmu > Kbar fails)"
        )


def least_mean_speed(kernel: kn.KernelSpec, mu_least_mean: float, lam):
    """Least mean of the speed, ``(L(lam) + lmu) / lam``."""
    check_f4(kernel, mu_least_mean)
    _check_open(kernel, lam)
    out = (np.asarray(kn.big_L(kernel, lam)) + mu_least_mean) / np.asarray(lam)
    return float(out) if np.ndim(out) == 0 else out


def _scan_edge(kernel: kn.KernelSpec, hi: float = SCAN_HI) -> float:
    sigma = kn.abscissa(kernel)
    return min(sigma * (1.0 - 2.0 * kn.NEAR_ABSCISSA), hi) if math.isfinite(sigma) else hi


def _minimize_on_scan(f, edge: float) -> tuple[float, float, np.ndarray, np.ndarray]:
    lam = np.geomspace(SCAN_LO, edge, SCAN_POINTS)
    vals = np.asarray(f(lam), dtype=float)
    i = int(np.argmin(vals))
    if i == SCAN_POINTS - 1:
        return float(lam[-1]), float(vals[-1]), lam, vals
    if i == 0:
        res = optimize.minimize_scalar(f, bounds=(SCAN_LO * 1e-3, lam[1]), method="bounded",
                                       options={"xatol": 1e-12})
        return float(res.x), float(res.fun), lam, vals
    res = optimize.minimize_scalar(f, bracket=(lam[i - 1], lam[i], lam[i + 1]), method="golden",
                                   options={"xtol": 1e-8 / max(lam[i], 1.0)})
    return float(res.x), float(res.fun), lam, vals


def minimize_speed(kernel: kn.KernelSpec, mu_least_mean: float) -> SpeedCurve:
    """Locate ``lambda_star`` and ``c_star`` (log scan, then golden section).

    If the scan minimum sits on the right edge while ``sigma(K)`` is infinite
    the edge is moved outwards; with a finite abscissa this is the
    degenerate boundary case and ``star_interior`` is reported false.
    """
    check_f4(kernel, mu_least_mean)

    def f(lam):
        return least_mean_speed(kernel, mu_least_mean, lam)

    sigma = kn.abscissa(kernel)
    edge = _scan_edge(kernel)
    while True:
        lam_star, c_star, lam, vals = _minimize_on_scan(f, edge)
        interior = edge - lam_star > INTERIOR_GAP
        if interior or math.isfinite(sigma) or edge >= 1e4:
            break
        edge *= 4.0
    curve = SpeedCurve(
        kernel=kernel,
        mu_least_mean=mu_least_mean,
        samples=list(zip(lam.tolist(), vals.tolist())),
        lambda_star=lam_star,
        c_star=c_star,
        star_interior=interior,
        scan_edge=edge,
    )
    if interior:
        deriv = kn.mgf_derivative(kernel, lam_star)
        curve.identity_residual = abs(c_star - deriv) / c_star
        if curve.identity_residual > IDENTITY_RTOL:
            raise SpeedIdentityError(
                f"|c_star - M'(lambda_star)| / c_star = {curve.identity_residual:.3e} exceeds {IDENTITY_RTOL:g}"
            )
    else:
        curve.notes.append(
            "minimiser reached the right edge of the admissible range; lambda_star = sigma(K) "
            "and no spreading prediction is made"
        )
    return curve


def require_interior(curve: SpeedCurve) -> None:
    if not curve.star_interior:
        raise UnsupportedError("lambda_star is not below sigma(K); speed predictions are unavailable")


def sample_curve(curve: SpeedCurve, n: int, lam_max: float | None = None) -> np.ndarray:
    """``n`` rows ``(lam, speed)`` on a log grid up to ``lam_max`` (default ``4*lambda_star``)."""
    edge = _scan_edge(curve.kernel, math.inf)
    hi = min(lam_max or 4.0 * curve.lambda_star, edge)
    lam = np.geomspace(max(1e-3, hi * 1e-3), hi, n)
    return np.column_stack([lam, least_mean_speed(curve.kernel, curve.mu_least_mean, lam)])


def write_curve_csv(path: str, rows: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "speed"])
        for lam, c in rows:
            w.writerow([repr(float(lam)), repr(float(c))])


def c_plus(curve: SpeedCurve, mu: env.Coefficient, lam: float, t):
    """Upper envelope speed: ``c(lambda_star)(t)`` if ``lam >= lambda_star`` else ``c(lam)(t)``."""
    require_interior(curve)
    branch = curve.lambda_star if lam >= curve.lambda_star else lam
    return c_lambda_t(curve.kernel, mu, branch, t)


def c_truncated(kernel: kn.KernelSpec, gamma: float, R: float, B: float) -> float:
    """``(2R/pi) int_{-B}^{B} K(z) e^{gamma z} sin(pi z / 2R) dz``."""
    if gamma < 0 or not (R > 0 and B > 0):
        raise DomainError("need gamma >= 0 and R, B > 0")
    kn._check_lambda(kernel, gamma)
    lo, hi = kn.support(kernel, rel=1e-16, tilt=gamma)
    a, b = max(-B, lo), min(B, hi)
    if a >= b:
        return 0.0
    pts = [p for p in kn.kinks(kernel) if a < p < b]
    val, _ = integrate.quad(
        lambda z: kn.evaluate(kernel, z) * math.exp(gamma * z) * math.sin(0.5 * math.pi * z / R),
        a, b, points=pts or None, epsabs=1e-12, epsrel=1e-12, limit=200,
    )
    return 2.0 * R / math.pi * val


def c_autonomous(minor: kn.MinorantKernel, m: float) -> float:
    """``inf_{lam > 0} (M_k(lam) - kbar + m) / lam`` for a symmetric minorant kernel."""
    if not m > 0:
        raise ValueError("m must be positive")
    kbar = minor.mass

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        return (np.asarray(minor.mgf(lam)) - kbar + m) / lam

    edge = SCAN_HI / minor.delta
    while True:
        lam_star, value, _, _ = _minimize_on_scan(f, edge)
        if edge - lam_star > INTERIOR_GAP or edge > 1e6:
            return value
        edge *= 4.0


def truncated_ladder(curve: SpeedCurve, levels=(2.0, 4.0, 8.0, 16.0, 32.0)) -> list[dict]:
    """``c_{R,B}(lambda_star)`` for ``B`` doubling and ``R = 2B``."""
    out = []
    for B in levels:
        out.append({"R": 2.0 * B, "B": B, "value": c_truncated(curve.kernel, curve.lambda_star, 2.0 * B, B)})
    return out


def check_assumptions(kernel: kn.KernelSpec, mu: env.Coefficient, estimate: env.LeastMeanEstimate) -> dict:
    """Pass/fail report for the kernel, KPP and speed hypotheses (never raises)."""
    checks = []

    def add(name, passed, **measured):
        checks.append({"name": name, "passed": bool(passed), "measured": measured})

    kbar = kn.mass(kernel)
    lo, hi = kn.support(kernel)
    grid = np.linspace(lo, hi, 20001)
    add("kernel nonnegative, continuous, integrable", np.all(kn.evaluate(kernel, grid) >= 0)
        and math.isfinite(kbar) and kbar > 0, mass=kbar)
    sigma = kn.abscissa(kernel)
    add("kernel thin-tailed on the right (sigma(K) > 0)", sigma > 0, sigma=_json_float(sigma))
    add("K(0) > 0", kn.evaluate(kernel, 0.0) > 0, K0=kn.evaluate(kernel, 0.0))
    mu_lo, mu_hi = env.value_range(mu)
    add("mu bounded, uniformly continuous, inf mu > 0",
        env.is_continuous(mu) and mu_lo > 0, inf_mu=mu_lo, sup_mu=mu_hi, continuous=env.is_continuous(mu))
    lmu = estimate.value
    f4 = lmu > kbar
    add("floor(mu) > Kbar (least mean of mu exceeds the kernel mass)", f4, least_mean=lmu, Kbar=kbar, converged=estimate.converged)
    if f4:
        curve = minimize_speed(kernel, lmu)
        add("lambda_star < sigma(K)", curve.star_interior, lambda_star=curve.lambda_star,
            sigma=_json_float(sigma), c_star=curve.c_star)
    else:
        checks.append({"name": "lambda_star < sigma(K)", "passed": False, "skipped": True,
                       "measured": {"reason": "least-mean condition failed"}})
    return {"checks": checks, "pass": all(c["passed"] for c in checks)}


def _json_float(x: float):
    return x if math.isfinite(x) else "inf"
