"""Level-set front positions, fitted speeds and comparison with the predicted envelopes."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import env
from . import kernel as kn
from . import speed as sp
from .dynamics import Field
from .errors import InsufficientDataError, UnsupportedError

MIN_FIT_POINTS = 8


@dataclass
class FrontTrace:
    theta: float
    times: list[float] = field(default_factory=list)
    positions: list[float] = field(default_factory=list)

    def add(self, t: float, x: float) -> None:
        self.times.append(float(t))
        self.positions.append(float(x))

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.positions))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.times), np.asarray(self.positions)

    def at(self, t: float) -> float | None:
        for s, x in zip(self.times, self.positions):
            if abs(s - t) <= 1e-9 * max(1.0, abs(t)):
                return x
        return None


@dataclass
class SpeedFit:
    window: tuple[float, float]
    slope: float
    intercept: float
    residual_rms: float
    n_points: int

    def to_dict(self) -> dict:
        return {"window": list(self.window), "slope": self.slope, "intercept": self.intercept,
                "residual_rms": self.residual_rms, "n_points": self.n_points}


def track_front(field: Field, theta: float) -> float | None:
    """Rightmost ``x`` with ``u >= theta``, linearly interpolated; ``None`` if there is none."""
    v = field.values
    idx = np.flatnonzero(v >= theta)
    if idx.size == 0:
        return None
    i = int(idx[-1])
    x = field.grid.x
    if i == v.size - 1:
        return float(x[i])
    return float(x[i] + field.grid.dx * (v[i] - theta) / (v[i] - v[i + 1]))


class FrontTracker:
    """Observer recording ``X_theta(t)`` for several thresholds.

    Positions inside the guard zone (``x >= x_guard``) are not recorded.
    """

    def __init__(self, thetas=(0.5,), x_guard: float = math.inf):
        self.traces = {float(th): FrontTrace(float(th)) for th in thetas}
        self.x_guard = x_guard

    def __call__(self, f: Field) -> None:
        for th, trace in self.traces.items():
            x = track_front(f, th)
            if x is not None and x < self.x_guard:
                trace.add(f.t, x)


def burn_in(kbar: float, t_end: float) -> float:
    return max(10.0 / kbar, 0.2 * t_end)


def fit_speed(trace: FrontTrace, window: tuple[float, float], kbar: float | None = None) -> SpeedFit:
    """Least-squares line through the trace points with ``t`` in ``window``.

    With ``kbar`` given, windows shorter than ``10 / kbar`` are refused.
    """
    t_lo, t_hi = window
    if kbar is not None and t_hi - t_lo < 10.0 / kbar:
        raise InsufficientDataError(f"fit window {t_hi - t_lo:g} is shorter than 10/Kbar = {10.0 / kbar:g}")
    t, x = trace.arrays()
    m = (t >= t_lo) & (t <= t_hi) if t.size else np.zeros(0, bool)
    if m.sum() < MIN_FIT_POINTS:
        raise InsufficientDataError(f"{int(m.sum())} front points in [{t_lo:g}, {t_hi:g}], need {MIN_FIT_POINTS}")
    slope, intercept = np.polyfit(t[m], x[m], 1)
    resid = x[m] - (slope * t[m] + intercept)
    return SpeedFit((float(t_lo), float(t_hi)), float(slope), float(intercept),
                    float(np.sqrt(np.mean(resid**2))), int(m.sum()))


@dataclass
class Envelopes:
    t: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    lower_slope: float
    lam_branch: float  # decay rate used for the upper envelope

    def upper_mean_slope(self, t_lo: float, t_hi: float) -> float:
        u = np.interp([t_lo, t_hi], self.t, self.upper)
        return float((u[1] - u[0]) / (t_hi - t_lo))


def theoretical_envelope(curve: sp.SpeedCurve, mu: env.Coefficient, lambda_init, t_grid) -> Envelopes:
    """Upper ``U(t) = int_0^t c+(lam)(s) ds`` and lower ``c_low t``.

    ``lambda_init`` is the decay rate of the initial data or ``"compact"``.
    Data decaying at ``lam < lambda_star`` gives both the ``c(lam)`` branch on
    top and ``floor c(lam)`` below; otherwise both use ``lambda_star``.
    """
    if not curve.star_interior:
        raise UnsupportedError("lambda_star is not below sigma(K); no envelope is available")
    t = np.asarray(t_grid, dtype=float)
    slow = lambda_init != "compact" and float(lambda_init) < curve.lambda_star
    lam = float(lambda_init) if slow else curve.lambda_star
    L = float(kn.big_L(curve.kernel, lam))
    upper = (L * t + np.asarray(env.integral_mu(mu, 0.0, t))) / lam
    lower_slope = (L + curve.mu_least_mean) / lam if slow else curve.c_star
    return Envelopes(t, upper, lower_slope * t, lower_slope, lam)


def tail_max(f: Field, x0: float) -> float:
    """``max u(t, x)`` over grid points ``x >= x0`` (0 if there are none)."""
    m = f.grid.x >= x0
    return float(f.values[m].max()) if m.any() else 0.0


def inner_min(f: Field, x_hi: float) -> float:
    """``min u(t, x)`` over grid points in ``[0, x_hi]``."""
    x = f.grid.x
    m = (x >= 0.0) & (x <= x_hi)
    return float(f.values[m].min()) if m.any() else math.nan


def verdict(trace: FrontTrace, envelopes: Envelopes, eta: float, tolerance: float, *,
            t_burn: float, final: Field | None = None, logistic: bool = True,
            inner_tolerance: float = 0.05, inner_reference: str = "lower",
            t_fit: tuple[float, float] | None = None) -> dict:
    """Compare a front trace against the envelopes.

    (a) ``X(t) <= U(t) + eta t + tolerance`` past burn-in (skipped when
    ``eta <= 0``); (b) fitted slope within ``[L_slope - tol, U_slope + eta + tol]``;
    (c) for logistic runs ``min u`` on ``[0, 0.9 c t_final] >= 1 - inner_tolerance``
    where ``c`` is the lower slope or, with ``inner_reference="fit"``, the fitted slope.
    """
    checks = []
    numbers: dict = {"theta": trace.theta, "eta": eta, "tolerance": tolerance, "burn_in": t_burn,
                     "lower_slope": envelopes.lower_slope, "lambda_branch": envelopes.lam_branch}
    t, x = trace.arrays()
    if eta > 0:
        m = t >= t_burn
        excess = x[m] - (np.interp(t[m], envelopes.t, envelopes.upper) + eta * t[m])
        worst = float(excess.max()) if excess.size else -math.inf
        checks.append({"name": "front below upper envelope", "passed": bool(worst <= tolerance),
                       "max_excess": worst if math.isfinite(worst) else None})
    else:
        checks.append({"name": "front below upper envelope", "passed": True, "skipped": True,
                       "reason": "eta = 0 is not covered by the upper bound"})
    if t_fit is None:
        t_fit = (t_burn, float(t[-1]) if t.size else t_burn)
    try:
        fit = fit_speed(trace, t_fit)
    except InsufficientDataError as exc:
        checks.append({"name": "fitted slope inside envelope band", "passed": False, "error": str(exc)})
        fit = None
    if fit is not None:
        hi = envelopes.upper_mean_slope(*t_fit) + eta + tolerance
        lo = envelopes.lower_slope - tolerance
        numbers["fit"] = fit.to_dict()
        numbers["upper_mean_slope"] = envelopes.upper_mean_slope(*t_fit)
        checks.append({"name": "fitted slope inside envelope band", "passed": bool(lo <= fit.slope <= hi),
                       "slope": fit.slope, "band": [lo, hi]})
    if logistic and final is not None:
        c_ref = fit.slope if (inner_reference == "fit" and fit is not None) else envelopes.lower_slope
        x_hi = 0.9 * c_ref * final.t
        v = inner_min(final, x_hi)
        checks.append({"name": "solution near 1 behind the front", "passed": bool(v >= 1.0 - inner_tolerance),
                       "min_u": v, "x_range": [0.0, x_hi], "t": final.t})
    return {"checks": checks, "pass": all(c["passed"] for c in checks), "numbers": numbers}


def write_traces_csv(path: str, traces) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "X"])
        for tr in traces:
            for t, x in tr.points:
                w.writerow([repr(t), repr(tr.theta), repr(x)])


def write_envelope_csv(path: str, env_: Envelopes, trace: FrontTrace | None = None) -> None:
    """Plot-ready columns ``t, U, L`` (and ``X`` where the trace has a point)."""
    lookup = dict(trace.points) if trace is not None else {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "U", "L", "X"])
        for t, u, l in zip(env_.t, env_.upper, env_.lower):
            xv = lookup.get(float(t))
            w.writerow([repr(float(t)), repr(float(u)), repr(float(l)), "" if xv is None else repr(xv)])


def write_json(path: str, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
