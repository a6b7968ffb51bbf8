"""Time-heterogeneous coefficients and their least means.

A :class:`Coefficient` describes a bounded growth rate ``mu(t)``, ``t >= 0``.
Supported forms::

    constant       {"value": v}
    periodic       {"offset": m, "terms": [[amplitude, omega, phase], ...]}
    quasiperiodic  same shape as periodic, frequencies need not be commensurate
    piecewise      {"breakpoints": [0, b1, ...], "values": [v0, v1, ...], "ramp": r}
    tabulated      {"t0": 0, "dt": h, "values": [...]}

Sinusoidal forms evaluate ``offset + sum a sin(omega t + phase)``.  A
piecewise coefficient is right-continuous; with ``ramp > 0`` every jump is
replaced by a linear ramp of that width ending at the breakpoint, so the
function becomes uniformly continuous.

The least mean is ``lim_T inf_s (1/T) int_0^T mu(t + s) dt``; it is estimated
on a finite ladder of window lengths (see :func:`least_mean`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Any, Callable, Mapping

import numpy as np

from .errors import AssumptionViolation, DomainError, InsufficientHorizonError, UnsupportedError
from .kernel import read_two_column_csv

FORMS = ("constant", "periodic", "quasiperiodic", "piecewise", "tabulated")


@dataclass(frozen=True, eq=False)
class Coefficient:
    form: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown coefficient form {self.form!r}")
        p = dict(self.params)
        if self.form == "constant":
            p = {"value": float(p["value"])}
        elif self.form in ("periodic", "quasiperiodic"):
            terms = tuple(tuple(float(x) for x in term) for term in p.get("terms", ()))
            for term in terms:
                if len(term) != 3 or not term[1] > 0:
                    raise ValueError("each sinusoid term is (amplitude, omega > 0, phase)")
            p = {"offset": float(p["offset"]), "terms": terms}
        elif self.form == "piecewise":
            b = tuple(float(x) for x in p["breakpoints"])
            v = tuple(float(x) for x in p["values"])
            ramp = float(p.get("ramp", 0.0))
            if len(b) != len(v) or not b:
                raise ValueError("piecewise needs as many values as breakpoints")
            if b[0] != 0.0 or any(y <= x for x, y in zip(b, b[1:])):
                raise ValueError("breakpoints must start at 0 and increase strictly")
            if ramp < 0 or (len(b) > 1 and ramp >= min(y - x for x, y in zip(b, b[1:]))):
                raise ValueError("ramp must be >= 0 and shorter than every piece")
            p = {"breakpoints": b, "values": v, "ramp": ramp}
        else:
            v = tuple(float(x) for x in p["values"])
            if len(v) < 2 or not float(p["dt"]) > 0:
                raise ValueError("tabulated coefficient needs dt > 0 and >= 2 values")
            p = {"t0": float(p.get("t0", 0.0)), "dt": float(p["dt"]), "values": v}
            if p["t0"] != 0.0:
                raise ValueError("tabulated coefficient must start at t0 = 0")
        if not all(np.isfinite(x) for x in _flat_numbers(p)):
            raise ValueError("coefficient parameters must be finite")
        object.__setattr__(self, "params", p)

    # -- basic properties ----------------------------------------------
    @property
    def horizon(self) -> float:
        if self.form == "tabulated":
            return self.params["dt"] * (len(self.params["values"]) - 1)
        return math.inf

    @property
    def period(self) -> float | None:
        """Fundamental period (constant and periodic forms only)."""
        if self.form == "periodic":
            return _fundamental_period([t[1] for t in self.params["terms"]])
        return None

    @cached_property
    def _segments(self):
        """Piecewise-linear representation ``(starts, ends, v_start, v_end, cum)``."""
        p = self.params
        if self.form == "piecewise":
            b, v, r = p["breakpoints"], p["values"], p["ramp"]
            starts, ends, vs, ve = [], [], [], []
            for i, (bi, vi) in enumerate(zip(b, v)):
                end = b[i + 1] if i + 1 < len(b) else math.inf
                if i + 1 < len(b) and r > 0:
                    starts += [bi, end - r]
                    ends += [end - r, end]
                    vs += [vi, vi]
                    ve += [vi, v[i + 1]]
                else:
                    starts.append(bi)
                    ends.append(end)
                    vs.append(vi)
                    ve.append(vi)
        elif self.form == "tabulated":
            vals = np.asarray(p["values"])
            t = np.arange(vals.size) * p["dt"]
            starts, ends, vs, ve = list(t[:-1]), list(t[1:]), list(vals[:-1]), list(vals[1:])
        else:
            return None
        starts, ends, vs, ve = (np.asarray(a, dtype=float) for a in (starts, ends, vs, ve))
        lengths = np.where(np.isfinite(ends), ends - starts, 0.0)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * lengths * (vs + ve))[:-1]])
        return starts, ends, vs, ve, cum

    def _check_t(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.size and (np.min(t) < 0 or np.max(t) > self.horizon * (1 + 1e-12)):
            raise DomainError(f"t must lie in [0, {self.horizon}]")
        return t

    def __call__(self, t):
        return eval_mu(self, t)

    # -- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        p = {k: (list(map(list, v)) if k == "terms" else list(v) if isinstance(v, tuple) else v)
             for k, v in self.params.items()}
        h = self.horizon
        return {"form": self.form, "params": p, "horizon": h if math.isfinite(h) else None}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | None = None) -> "Coefficient":
        params = dict(data.get("params", {}))
        if data["form"] == "tabulated" and "csv" in params:
            path = params.pop("csv")
            if base_dir is not None and not path.startswith("/"):
                path = f"{base_dir}/{path}"
            t, v = read_two_column_csv(path)
            t = np.asarray(t)
            dt = float(t[1] - t[0])
            if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0) or t[0] != 0:
                raise ValueError("tabulated coefficient CSV must start at t = 0 on a uniform grid")
            params = {"t0": 0.0, "dt": dt, "values": v}
        return cls(data["form"], params)

    # -- derived coefficients --------------------------------------------
    def with_offset(self, kappa: float) -> "Coefficient":
        p = dict(self.params)
        if self.form == "constant":
            p["value"] += kappa
        elif self.form in ("periodic", "quasiperiodic"):
            p["offset"] += kappa
        else:
            p["values"] = tuple(v + kappa for v in p["values"])
        return Coefficient(self.form, p)

    def shifted(self, s0: float) -> "Coefficient":
        """Coefficient ``t -> mu(t + s0)``."""
        if s0 < 0:
            raise DomainError("shift must be non-negative")
        p = dict(self.params)
        if self.form == "constant":
            return self
        if self.form in ("periodic", "quasiperiodic"):
            p["terms"] = tuple((a, w, ph + w * s0) for a, w, ph in p["terms"])
            return Coefficient(self.form, p)
        if self.form == "piecewise":
            b = np.asarray(p["breakpoints"]) - s0
            r = p["ramp"]
            if r > 0 and np.any((b > 0) & (b - r < 0)):
                raise UnsupportedError("shift falls inside a ramp")
            keep = b > 0
            first = float(eval_mu(self, s0))
            return Coefficient("piecewise", {
                "breakpoints": [0.0] + list(b[keep]),
                "values": [first] + list(np.asarray(p["values"])[keep]),
                "ramp": r,
            })
        dt = p["dt"]
        k = s0 / dt
        if abs(k - round(k)) > 1e-9:
            raise UnsupportedError("tabulated coefficients shift by whole samples only")
        return Coefficient("tabulated", {"dt": dt, "values": p["values"][int(round(k)):]})


def _flat_numbers(p):
    for v in p.values():
        if isinstance(v, tuple):
            for x in v:
                yield from (x if isinstance(x, tuple) else (x,))
        else:
            yield v


def _fundamental_period(omegas) -> float:
    w1 = omegas[0]
    fracs = [Fraction(w / w1).limit_denominator(10_000) for w in omegas]
    for w, fr in zip(omegas, fracs):
        if abs(float(fr) * w1 - w) > 1e-9 * w:
            raise ValueError("periodic coefficient needs commensurate frequencies; use 'quasiperiodic'")
    lcm_den = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fracs), 1)
    nums = [f.numerator * (lcm_den // f.denominator) for f in fracs]
    g = reduce(math.gcd, nums)
    return 2.0 * math.pi / (w1 * g / lcm_den)


# -- constructors ---------------------------------------------------------

def constant(value: float) -> Coefficient:
    return Coefficient("constant", {"value": value})


def periodic(offset: float, terms) -> Coefficient:
    c = Coefficient("periodic", {"offset": offset, "terms": terms})
    c.period  # validates commensurability
    return c


def quasiperiodic(offset: float, terms) -> Coefficient:
    return Coefficient("quasiperiodic", {"offset": offset, "terms": terms})


def piecewise(breakpoints, values, ramp: float = 0.0) -> Coefficient:
    return Coefficient("piecewise", {"breakpoints": breakpoints, "values": values, "ramp": ramp})


def tabulated(dt: float, values) -> Coefficient:
    return Coefficient("tabulated", {"t0": 0.0, "dt": dt, "values": values})


def dyadic_on_off(k_max: int, low: float = 1.0, high: float = 2.0) -> Coefficient:
    """``mu = low`` on ``[4^k, 2*4^k)`` for ``k = 0..k_max`` and ``high`` elsewhere (raw jumps)."""
    breakpoints = [0.0]
    values = [high]
    for k in range(k_max + 1):
        breakpoints += [4.0**k, 2.0 * 4.0**k]
        values += [low, high]
    return piecewise(breakpoints, values)


# -- evaluation -------------------------------------------------------------

def eval_mu(c: Coefficient, t):
    """Return ``mu(t)``; vectorised over ``t``."""
    t = c._check_t(t)
    p = c.params
    if c.form == "constant":
        out = np.full(t.shape, p["value"])
    elif c.form in ("periodic", "quasiperiodic"):
        out = np.full(t.shape, p["offset"])
        for a, w, ph in p["terms"]:
            out = out + a * np.sin(w * t + ph)
    else:
        starts, ends, vs, ve, _ = c._segments
        i = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, starts.size - 1)
        length = ends[i] - starts[i]
        frac = np.where(np.isfinite(length), (t - starts[i]) / np.where(np.isfinite(length), length, 1.0), 0.0)
        out = vs[i] + (ve[i] - vs[i]) * frac
    return float(out) if out.ndim == 0 else out


def antiderivative(c: Coefficient, t):
    """A primitive ``F`` of ``mu`` with ``F(0)`` finite (not necessarily zero)."""
    t = c._check_t(t)
    p = c.params
    if c.form == "constant":
        out = p["value"] * t
    elif c.form in ("periodic", "quasiperiodic"):
        out = p["offset"] * t
        for a, w, ph in p["terms"]:
            out = out - (a / w) * np.cos(w * t + ph)
    else:
        starts, ends, vs, ve, cum = c._segments
        i = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, starts.size - 1)
        val = np.asarray(eval_mu(c, t))
        out = cum[i] + 0.5 * (t - starts[i]) * (vs[i] + val)
    return float(out) if np.ndim(out) == 0 else out


def integral_mu(c: Coefficient, t0, t1):
    """``int_{t0}^{t1} mu(s) ds`` (closed form for every supported form)."""
    t0 = np.asarray(t0, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    if np.any(t1 < t0):
        raise DomainError("integral_mu needs t0 <= t1")
    out = np.where(t1 == t0, 0.0, np.asarray(antiderivative(c, t1)) - np.asarray(antiderivative(c, t0)))
    return float(out) if out.ndim == 0 else out


def value_range(c: Coefficient) -> tuple[float, float]:
    """Bounds ``(inf mu, sup mu)``; exact except for multi-term sinusoids (outer bounds)."""
    p = c.params
    if c.form == "constant":
        return p["value"], p["value"]
    if c.form in ("periodic", "quasiperiodic"):
        amp = sum(abs(a) for a, _, _ in p["terms"])
        return p["offset"] - amp, p["offset"] + amp
    v = p["values"]
    return min(v), max(v)


def sup_norm(c: Coefficient) -> float:
    lo, hi = value_range(c)
    return max(abs(lo), abs(hi))


def is_continuous(c: Coefficient) -> bool:
    if c.form != "piecewise" or c.params["ramp"] > 0:
        return True
    v = c.params["values"]
    return all(a == b for a, b in zip(v, v[1:]))


def require_growth_rate(c: Coefficient) -> None:
    """Lint a coefficient before it is used as a KPP growth rate."""
    if not is_continuous(c):
        raise AssumptionViolation(
            "piecewise coefficient has raw jumps; give it a ramp > 0 before using it as a growth rate"
        )
    lo, _ = value_range(c)
    if not lo > 0:
        raise AssumptionViolation(f"growth rate must satisfy inf mu > 0 (inf mu = {lo:g})")


# -- least mean -------------------------------------------------------------

@dataclass
class LeastMeanEstimate:
    value: float
    window_sequence: list[tuple[float, float]]
    converged: bool
    tolerance_achieved: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "window_sequence": [list(w) for w in self.window_sequence],
            "converged": self.converged,
            "tolerance_achieved": self.tolerance_achieved,
        }


def shift_spacing(c: Coefficient) -> float:
    per = c.period
    return min(0.01, per / 100.0) if per is not None else 0.01


def window_inf(c: Coefficient, T: float, s_max: float) -> float:
    """``min_s (1/T) int_s^{s+T} mu`` over a uniform shift grid of ``[0, s_max]``."""
    h = shift_spacing(c)
    s = np.linspace(0.0, s_max, int(math.ceil(s_max / h)) + 1)
    avg = (np.asarray(antiderivative(c, s + T)) - np.asarray(antiderivative(c, s))) / T
    return float(np.min(avg))


def least_mean(c: Coefficient, T_max: float = 1024.0, s_max: float = 64.0, n_ladder: int = 8) -> LeastMeanEstimate:
    """Estimate the least mean of ``c`` on the window ladder ``T_max / 2^k``.

    The reported value belongs to the largest window; ``converged`` is set
    when the two largest windows agree to ``1e-3 * (sup - inf + 1)``.
    """
    if not (T_max > 0 and s_max >= 0):
        raise ValueError("T_max must be positive and s_max non-negative")
    if c.horizon < T_max + s_max:
        raise InsufficientHorizonError(
            f"coefficient defined up to t = {c.horizon:g} but the estimator needs T_max + s_max = {T_max + s_max:g}"
        )
    lo, hi = value_range(c)
    ladder = []
    for k in range(n_ladder - 1, -1, -1):
        T = T_max / 2.0**k
        avg = window_inf(c, T, s_max)
        # rounding in F(s+T) - F(s) must not leave the range of mu
        ladder.append((T, min(max(avg, lo), hi)))
    value = ladder[-1][1]
    gap = abs(ladder[-1][1] - ladder[-2][1]) if len(ladder) > 1 else math.inf
    return LeastMeanEstimate(
        value=value,
        window_sequence=ladder,
        converged=gap < 1e-3 * (hi - lo + 1.0),
        tolerance_achieved=gap,
    )


def cesaro_mean(c: Coefficient, T: float) -> float:
    return integral_mu(c, 0.0, T) / T


def mean_value(c: Coefficient) -> float | None:
    """Uniform mean value for analytic forms; ``None`` where it is not available."""
    if c.form == "constant":
        return c.params["value"]
    if c.form in ("periodic", "quasiperiodic"):
        return c.params["offset"]
    return None


def dual_adjuster(c: Coefficient) -> tuple[Callable, Callable, float]:
    """Bounded ``a`` with ``a' = <mu> - mu``; returns ``(a, a_prime, sup|a|)``.

    Only forms with an explicit mean value are supported.
    """
    mean = mean_value(c)
    if mean is None:
        raise UnsupportedError(f"no explicit adjuster for {c.form!r} coefficients")
    if c.form == "constant":
        return (lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                lambda t: np.zeros_like(np.asarray(t, dtype=float)), 0.0)
    f0 = antiderivative(c, 0.0)

    def a(t):
        t = np.asarray(t, dtype=float)
        return mean * t - (np.asarray(antiderivative(c, t)) - f0)

    def a_prime(t):
        return mean - np.asarray(eval_mu(c, t))

    bound = sum(2.0 * abs(amp) / w for amp, w, _ in c.params["terms"])
    return a, a_prime, bound


def dual_least_mean_check(c: Coefficient, a_slope_bound: float = math.inf, n_grid: int = 20001) -> float:
    """Dual value ``inf_t (a' + mu)(t)`` with ``a' = <mu> - mu`` clipped to ``|a'| <= a_slope_bound``.

    Defined for constant and periodic coefficients, where the choice of ``a``
    is optimal when the slope bound is not active.
    """
    if c.form == "constant":
        return c.params["value"]
    if c.form != "periodic":
        raise UnsupportedError("dual check needs a periodic coefficient")
    t = np.linspace(0.0, c.period, n_grid)
    mu = np.asarray(eval_mu(c, t))
    slope = np.clip(mean_value(c) - mu, -a_slope_bound, a_slope_bound)
    return float(np.min(slope + mu))
