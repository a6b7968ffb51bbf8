"""Dispersal kernels and their exponential transforms.

A kernel ``K`` is stored as a normalised profile of unit mass times a
positive ``scale``; every transform is therefore homogeneous of degree one
in ``scale``.  Four families are supported:

``gaussian(variance)``
    Centred normal density.
``laplace(rate_left, rate_right)``
    Two-sided exponential, ``exp(-rate_right*y)`` for ``y >= 0`` and
    ``exp(rate_left*y)`` for ``y < 0``.
``tent(halfwidth)``
    Triangle of height ``1/halfwidth`` supported on ``[-halfwidth, halfwidth]``.
``tabulated(y, values)``
    Samples on a uniform grid, linearly interpolated and zero outside.

The moment generating function ``M(lam) = int K(y) exp(lam*y) dy`` and its
derivative are computed in closed form for every family (the tabulated
family is integrated exactly segment by segment).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import AssumptionViolation, DomainError, InvalidKernelError, NoMinorantError

FAMILIES = ("gaussian", "laplace", "tent", "tabulated")

# lambda closer than this (relative) to a finite abscissa is rejected
NEAR_ABSCISSA = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    family: str
    params: Mapping[str, Any] = field(default_factory=dict)
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidKernelError(f"unknown kernel family {self.family!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidKernelError("scale must be a positive finite number")
        p = self.params
        if self.family == "gaussian":
            if not p.get("variance", 0) > 0:
                raise InvalidKernelError("gaussian kernel needs variance > 0")
        elif self.family == "laplace":
            if not (p.get("rate_left", 0) > 0 and p.get("rate_right", 0) > 0):
                raise InvalidKernelError("laplace kernel needs rate_left > 0 and rate_right > 0")
        elif self.family == "tent":
            if not p.get("halfwidth", 0) > 0:
                raise InvalidKernelError("tent kernel needs halfwidth > 0")
        else:
            y = np.asarray(p.get("y", ()), dtype=float)
            v = np.asarray(p.get("values", ()), dtype=float)
            if y.ndim != 1 or y.shape != v.shape or y.size < 3:
                raise InvalidKernelError("tabulated kernel needs matching y/values arrays (>= 3 samples)")
            if not (np.all(np.isfinite(y)) and np.all(np.isfinite(v))):
                raise InvalidKernelError("tabulated kernel samples must be finite")
            step = np.diff(y)
            if not (step[0] > 0 and np.allclose(step, step[0], rtol=1e-9, atol=0.0)):
                raise InvalidKernelError("tabulated kernel grid must be uniform and increasing")
            if np.any(v < 0):
                raise InvalidKernelError("tabulated kernel values must be non-negative")
            if not (y[0] <= 0.0 <= y[-1]):
                raise InvalidKernelError("tabulated kernel must cover y = 0")
            if np.trapezoid(v, y) <= 0:
                raise InvalidKernelError("tabulated kernel has zero mass")
            # freeze the arrays so the kernel description is immutable
            object.__setattr__(self, "params", {"y": tuple(y.tolist()), "values": tuple(v.tolist())})
        if self.family != "tabulated":
            object.__setattr__(self, "params", {k: float(val) for k, val in p.items()})
        if not evaluate(self, 0.0) > 0:
            raise InvalidKernelError("kernel must satisfy K(0) > 0")

    # -- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        params = dict(self.params)
        if self.family == "tabulated":
            params = {"y": list(params["y"]), "values": list(params["values"])}
        return {"family": self.family, "params": params, "scale": self.scale}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | None = None) -> "KernelSpec":
        params = dict(data.get("params", {}))
        if data["family"] == "tabulated" and "csv" in params:
            path = params.pop("csv")
            if base_dir is not None and not path.startswith("/"):
                path = f"{base_dir}/{path}"
            y, v = read_two_column_csv(path)
            params = {"y": y, "values": v}
        return cls(data["family"], params, float(data.get("scale", 1.0)))

    def reflected(self) -> "KernelSpec":
        """Kernel ``y -> K(-y)``, used to study leftward propagation."""
        if self.family == "laplace":
            p = self.params
            return KernelSpec("laplace", {"rate_left": p["rate_right"], "rate_right": p["rate_left"]}, self.scale)
        if self.family == "tabulated":
            y = -np.asarray(self.params["y"])[::-1]
            v = np.asarray(self.params["values"])[::-1]
            return KernelSpec("tabulated", {"y": y, "values": v}, self.scale)
        return self


def gaussian(variance: float = 1.0, scale: float = 1.0) -> KernelSpec:
    return KernelSpec("gaussian", {"variance": variance}, scale)


def laplace(rate_left: float, rate_right: float, scale: float = 1.0) -> KernelSpec:
    return KernelSpec("laplace", {"rate_left": rate_left, "rate_right": rate_right}, scale)


def tent(halfwidth: float = 1.0, scale: float = 1.0) -> KernelSpec:
    return KernelSpec("tent", {"halfwidth": halfwidth}, scale)


def tabulated(y, values, scale: float = 1.0) -> KernelSpec:
    return KernelSpec("tabulated", {"y": y, "values": values}, scale)


def read_two_column_csv(path: str) -> tuple[list[float], list[float]]:
    a, b = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                continue  # header line
            a.append(x)
            b.append(y)
    return a, b


def write_two_column_csv(path: str, first, second, header=("y", "value")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x, y in zip(first, second):
            w.writerow([repr(float(x)), repr(float(y))])


# -- evaluation ---------------------------------------------------------

def evaluate(kernel: KernelSpec, y):
    """Return ``K(y)``; vectorised over ``y``."""
    y = np.asarray(y, dtype=float)
    p = kernel.params
    fam = kernel.family
    if fam == "gaussian":
        v = p["variance"]
        out = np.exp(-0.5 * y * y / v) / math.sqrt(2.0 * math.pi * v)
    elif fam == "laplace":
        rl, rr = p["rate_left"], p["rate_right"]
        c = rl * rr / (rl + rr)
        out = c * np.where(y >= 0, np.exp(-rr * np.abs(y)), np.exp(-rl * np.abs(y)))
    elif fam == "tent":
        w = p["halfwidth"]
        out = np.maximum(0.0, 1.0 - np.abs(y) / w) / w
    else:
        ys = np.asarray(p["y"])
        out = np.interp(y, ys, np.asarray(p["values"]), left=0.0, right=0.0)
    out = kernel.scale * out
    return float(out) if out.ndim == 0 else out


def mass(kernel: KernelSpec) -> float:
    if kernel.family == "tabulated":
        p = kernel.params
        return kernel.scale * float(np.trapezoid(p["values"], p["y"]))
    return kernel.scale


def abscissa(kernel: KernelSpec) -> float:
    """Abscissa of convergence ``sup{g > 0 : int K e^{g y} < inf}``."""
    if kernel.family == "laplace":
        sigma = kernel.params["rate_right"]
    else:
        sigma = math.inf
    if not sigma > 0:
        raise AssumptionViolation("kernel has no finite exponential moment (sigma(K) = 0)")
    return sigma


def _check_lambda(kernel: KernelSpec, lam) -> None:
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0:
        return
    if np.any(~np.isfinite(lam)) or np.min(lam) < 0:
        raise DomainError(f"lambda must be finite and >= 0, got {lam.min() if lam.size else lam}")
    sigma = abscissa(kernel)
    if math.isfinite(sigma) and np.max(lam) >= sigma * (1.0 - NEAR_ABSCISSA):
        raise DomainError(
            f"lambda = {np.max(lam):.8g} is not below the abscissa sigma(K) = {sigma:.8g} "
            f"(values within {NEAR_ABSCISSA:g}*sigma are rejected)"
        )


def _expint_series(z, k, n_terms=40):
    # int_0^1 s^k e^{z s} ds = sum_n z^n / (n! (n + k + 1))
    out = np.zeros_like(z)
    term = np.ones_like(z)
    for n in range(n_terms):
        out = out + term / (n + k + 1)
        term = term * z / (n + 1)
    return out


def _expint(z, k):
    """``int_0^1 s^k exp(z s) ds`` for k in {0, 1, 2}, stable for all z."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1.0
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        ez = np.exp(zs)
        val = np.expm1(zs) / zs
        for j in range(1, k + 1):
            val = (ez - j * val) / zs
    return np.where(small, _expint_series(np.where(small, z, 0.0), k), val)


def _tabulated_moments(kernel: KernelSpec, lam, order: int):
    """Exact ``int K(y) y^order e^{lam y} dy`` for the piecewise-linear profile."""
    y = np.asarray(kernel.params["y"])
    v = np.asarray(kernel.params["values"])
    a, fa, fb = y[:-1], v[:-1], v[1:]
    h = y[1] - y[0]
    lam = np.atleast_1d(np.asarray(lam, dtype=float))[:, None]
    z = lam * h
    # on a segment f(a + s h) = fa + (fb - fa) s
    e0, e1, e2 = _expint(z, 0), _expint(z, 1), _expint(z, 2)
    base = np.exp(lam * a) * h
    m0 = fa * e0 + (fb - fa) * e1
    if order == 0:
        seg = base * m0
    else:
        # y = a + s h
        m1 = fa * e1 + (fb - fa) * e2
        seg = base * (a * m0 + h * m1)
    return kernel.scale * seg.sum(axis=1)


def _scalar_or_array(out, lam):
    return float(out) if np.ndim(lam) == 0 else out


def mgf(kernel: KernelSpec, lam):
    """Moment generating function ``M(lam) = int K(y) e^{lam y} dy`` for ``0 <= lam < sigma(K)``."""
    _check_lambda(kernel, lam)
    lam_a = np.asarray(lam, dtype=float)
    p = kernel.params
    fam = kernel.family
    if fam == "gaussian":
        out = np.exp(0.5 * p["variance"] * lam_a**2)
    elif fam == "laplace":
        rl, rr = p["rate_left"], p["rate_right"]
        c = rl * rr / (rl + rr)
        out = c * (1.0 / (rr - lam_a) + 1.0 / (rl + lam_a))
    elif fam == "tent":
        out = 1.0 + _tent_excess(lam_a * p["halfwidth"])
    else:
        return _scalar_or_array(_tabulated_moments(kernel, lam_a, 0).reshape(lam_a.shape), lam)
    return _scalar_or_array(kernel.scale * out, lam)


def _tent_excess(z):
    # 2 (cosh z - 1) / z^2 - 1 = sum_{n >= 1} 2 z^{2n} / (2n + 2)!
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1.0
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore"):
        closed = 2.0 * (np.cosh(zs) - 1.0) / zs**2 - 1.0
    zz = np.where(small, z, 0.0) ** 2
    series = np.zeros_like(zz)
    term = zz / 12.0  # n = 1
    for n in range(1, 20):
        series = series + term
        term = term * zz / ((2 * n + 3) * (2 * n + 4))
    return np.where(small, series, closed)


def _tent_excess_derivative(z):
    # d/dz [2 (cosh z - 1) / z^2] = sum_{n >= 1} 4 n z^{2n-1} / (2n + 2)!
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1.0
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        closed = 2.0 * np.sinh(zs) / zs**2 - 4.0 * (np.cosh(zs) - 1.0) / zs**3
    zz = np.where(small, z, 0.0)
    series = np.zeros_like(zz)
    fact = 24.0  # (2n + 2)! for n = 1
    for n in range(1, 20):
        series = series + 4.0 * n * zz ** (2 * n - 1) / fact
        fact *= (2 * n + 3) * (2 * n + 4)
    return np.where(small, series, closed)


def big_L(kernel: KernelSpec, lam):
    """``L(lam) = int K(y) (e^{lam y} - 1) dy = M(lam) - Kbar``; exactly 0 at lam = 0."""
    _check_lambda(kernel, lam)
    lam_a = np.asarray(lam, dtype=float)
    p = kernel.params
    fam = kernel.family
    if fam == "gaussian":
        with np.errstate(over="ignore"):
            out = kernel.scale * np.expm1(0.5 * p["variance"] * lam_a**2)
    elif fam == "laplace":
        rl, rr = p["rate_left"], p["rate_right"]
        c = rl * rr / (rl + rr)
        out = kernel.scale * c * lam_a * (1.0 / (rr * (rr - lam_a)) - 1.0 / (rl * (rl + lam_a)))
    elif fam == "tent":
        out = kernel.scale * _tent_excess(lam_a * p["halfwidth"])
    else:
        out = np.asarray(mgf(kernel, lam_a)) - mass(kernel)
    out = np.where(lam_a == 0.0, 0.0, out)
    return _scalar_or_array(out, lam)


def mgf_derivative(kernel: KernelSpec, lam):
    """``M'(lam) = int K(y) y e^{lam y} dy``."""
    _check_lambda(kernel, lam)
    lam_a = np.asarray(lam, dtype=float)
    p = kernel.params
    fam = kernel.family
    if fam == "gaussian":
        v = p["variance"]
        out = v * lam_a * np.exp(0.5 * v * lam_a**2)
    elif fam == "laplace":
        rl, rr = p["rate_left"], p["rate_right"]
        c = rl * rr / (rl + rr)
        out = c * (1.0 / (rr - lam_a) ** 2 - 1.0 / (rl + lam_a) ** 2)
    elif fam == "tent":
        w = p["halfwidth"]
        out = w * _tent_excess_derivative(lam_a * w)
    else:
        return _scalar_or_array(_tabulated_moments(kernel, lam_a, 1).reshape(lam_a.shape), lam)
    return _scalar_or_array(kernel.scale * out, lam)


def support(kernel: KernelSpec, rel: float = 1e-14, tilt: float = 0.0) -> tuple[float, float]:
    """Interval outside which ``K(y) e^{tilt y}`` is below ``rel`` times its peak."""
    p = kernel.params
    fam = kernel.family
    log_r = math.log(1.0 / rel)
    if fam == "gaussian":
        v = p["variance"]
        half = math.sqrt(2.0 * v * log_r)
        return v * tilt - half, v * tilt + half
    if fam == "laplace":
        rl, rr = p["rate_left"], p["rate_right"]
        if not -rl < tilt < rr:
            raise DomainError(f"tilt {tilt} outside (-rate_left, rate_right)")
        return -log_r / (rl + tilt), log_r / (rr - tilt)
    if fam == "tent":
        w = p["halfwidth"]
        return -w, w
    y = p["y"]
    return float(y[0]), float(y[-1])


def kinks(kernel: KernelSpec) -> list[float]:
    """Points where the kernel is not smooth (useful quadrature break points)."""
    if kernel.family == "laplace":
        return [0.0]
    if kernel.family == "tent":
        w = kernel.params["halfwidth"]
        return [-w, 0.0, w]
    return []


# -- minorant -----------------------------------------------------------

@dataclass(frozen=True)
class MinorantKernel:
    """Symmetric cosine bump ``height * cos(pi y / (2 delta))`` on ``[-delta, delta]``."""

    delta: float
    height: float

    @property
    def mass(self) -> float:
        return 4.0 * self.delta * self.height / math.pi

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        out = np.where(np.abs(y) < self.delta, self.height * np.cos(0.5 * math.pi * y / self.delta), 0.0)
        return float(out) if out.ndim == 0 else out

    def mgf(self, lam):
        """Closed form ``int k(y) e^{lam y} dy = 2 a h cosh(lam delta) / (lam^2 + a^2)``, ``a = pi/(2 delta)``."""
        lam = np.asarray(lam, dtype=float)
        a = 0.5 * math.pi / self.delta
        out = 2.0 * a * self.height * np.cosh(lam * self.delta) / (lam**2 + a**2)
        return float(out) if out.ndim == 0 else out


def minorant(kernel: KernelSpec, delta: float, n_grid: int = 10001) -> MinorantKernel:
    """Build ``k <= K`` supported on ``[-delta, delta]`` with a cosine profile.

    The height is the minimum of ``K`` over a dense grid of ``[-delta, delta]``
    that includes the endpoints and, for tabulated kernels, every sample node
    inside the interval (so the minimum of the piecewise-linear profile is
    exact).
    """
    if not delta > 0:
        raise NoMinorantError("delta must be positive")
    grid = np.linspace(-delta, delta, n_grid)
    if kernel.family == "tabulated":
        ys = np.asarray(kernel.params["y"])
        grid = np.union1d(grid, ys[(ys > -delta) & (ys < delta)])
    m = float(np.min(evaluate(kernel, grid)))
    if not m > 0:
        raise NoMinorantError(f"K vanishes inside [-{delta}, {delta}]; shrink delta")
    return MinorantKernel(delta=float(delta), height=m)


def default_minorant_delta(kernel: KernelSpec) -> float:
    lo, hi = support(kernel, rel=1e-14)
    if kernel.family in ("tent", "tabulated"):
        # stay strictly inside the region where K > 0
        ys = np.linspace(lo, hi, 4001)
        pos = evaluate(kernel, ys) > 0
        i0 = int(np.argmin(np.abs(ys)))
        left = i0
        while left > 0 and pos[left - 1]:
            left -= 1
        right = i0
        while right < ys.size - 1 and pos[right + 1]:
            right += 1
        return 0.5 * min(-ys[left], ys[right]) if min(-ys[left], ys[right]) > 0 else 0.5 * (ys[1] - ys[0])
    return 1.0
