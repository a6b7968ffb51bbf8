"""Semi-discrete solver for ``u_t = K*u - Kbar u + u f(t, u)`` on a truncated line.

The kernel is sampled at the grid offsets ``j*dx`` inside its effective
support (where ``K > 1e-14 * peak``) and the convolution is a discrete sum
with weights ``K(j dx) dx``.  Outside ``[x_min, x_max]`` the solution is
taken to be zero, which can only lower it; the right end carries a guard
zone that the solution is not allowed to reach.  The ``-Kbar u`` term uses
the discrete kernel mass so that constant states are preserved exactly.

Time stepping is classical RK4 with a fixed step, followed by a projection
onto ``[0, 1]`` whose size is recorded.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Iterable, Mapping

import numpy as np
from scipy import fft as sfft

from . import env
from . import kernel as kn
from .errors import DomainExhaustedError, InvalidParametersError, ResolutionError, StabilityError

GUARD_SUPPORTS = 5
GUARD_LEVEL = 1e-10
INVARIANT_SLACK = 1e-12


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 16 or not self.x_max > self.x_min:
            raise InvalidParametersError("grid needs n >= 16 and x_max > x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n}


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    t: float
    values: np.ndarray
    overshoot: float = 0.0  # size of the last projection onto [0, 1]

    def check_bounds(self, slack: float = INVARIANT_SLACK) -> bool:
        return bool(np.min(self.values) >= -slack and np.max(self.values) <= 1.0 + slack)


# -- nonlinearities ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """KPP reaction ``u f(t, u)``.

    ``logistic`` is ``f = mu(t) (1 - u)``, ``logistic_H`` is
    ``f = mu(t) (1 - H u)`` and ``general`` wraps a user callable together
    with its Lipschitz constant ``C`` (``f >= mu - C u``).
    """

    form: str
    mu: env.Coefficient
    H: float = 1.0
    func: Callable | None = None
    lipschitz: float | None = None

    def __post_init__(self):
        if self.form not in ("logistic", "logistic_H", "general"):
            raise InvalidParametersError(f"unknown nonlinearity {self.form!r}")
        if self.form == "logistic_H" and not self.H >= 1:
            raise InvalidParametersError("logistic_H needs H >= 1")
        if self.form == "general" and (self.func is None or self.lipschitz is None):
            raise InvalidParametersError("general nonlinearity needs func and lipschitz")

    def f(self, t, u):
        u = np.asarray(u, dtype=float)
        if self.form == "general":
            return self.func(t, u)
        mu = np.asarray(env.eval_mu(self.mu, t))
        if self.form == "logistic":
            return mu * (1.0 - u)
        return mu * (1.0 - self.H * u)

    @property
    def h0(self) -> float:
        return env.value_range(self.mu)[0]

    @property
    def C(self) -> float:
        if self.form == "general":
            return float(self.lipschitz)
        return (1.0 if self.form == "logistic" else self.H) * env.sup_norm(self.mu)

    @property
    def H_ratio(self) -> float:
        """``C / h0``: the logistic-H sub-problem bounds the general one from below."""
        return self.C / self.h0

    @property
    def carrying(self) -> float:
        return 1.0 / self.H if self.form == "logistic_H" else 1.0

    def check_kpp(self, t_samples, u_samples, atol: float = 1e-12) -> dict:
        """Sample the KPP structure: ``mu >= f >= mu - C u`` and ``f`` nonincreasing in ``u``."""
        t = np.asarray(t_samples, dtype=float)[:, None]
        u = np.sort(np.asarray(u_samples, dtype=float))[None, :]
        fv = np.asarray(self.f(t, u))
        mu = np.asarray(env.eval_mu(self.mu, t))
        return {
            "upper": bool(np.all(fv <= mu + atol)),
            "lower": bool(np.all(fv >= mu - self.C * u - atol)),
            "monotone": bool(np.all(np.diff(fv, axis=1) <= atol)),
        }

    def to_dict(self) -> dict:
        d = {"form": self.form, "mu": self.mu.to_dict()}
        if self.form == "logistic_H":
            d["H"] = self.H
        if self.form == "general":
            d["lipschitz"] = self.lipschitz
        return d


def logistic(mu: env.Coefficient) -> Nonlinearity:
    return Nonlinearity("logistic", mu)


def logistic_H(mu: env.Coefficient, H: float) -> Nonlinearity:
    return Nonlinearity("logistic_H", mu, H=H)


# -- initial data -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial profile; the ``shift`` moves it to the right by that distance.

    ``compact_bump(A, p)``
        Tent with apex ``p`` at ``A/2``, positive exactly on ``(0, A)``.
    ``plateau_tail(alpha, A, p, lambda)``
        Linear rise on ``[0, alpha]`` to ``beta = p exp(-lambda A)``, flat up
        to ``A``, then ``p exp(-lambda x)``.
    ``pure_exponential(p, lambda)``
        ``p min(1, x) exp(-lambda x)`` for ``x >= 0`` (unit ramp keeps it continuous).
    ``custom(x, values)``
        Linear interpolation of samples, zero outside.
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    shift: float = 0.0

    def __post_init__(self):
        p = self.params
        if self.kind == "compact_bump":
            if not (p["A"] > 0 and 0 < p["p"] < 1):
                raise InvalidParametersError("compact_bump needs A > 0 and 0 < p < 1")
        elif self.kind == "plateau_tail":
            if not (0 < p["alpha"] < p["A"]):
                raise InvalidParametersError("plateau_tail needs 0 < alpha < A")
            if not (0 < p["p"] < 1 and p["lambda"] > 0):
                raise InvalidParametersError("plateau_tail needs 0 < p < 1 and lambda > 0")
        elif self.kind == "pure_exponential":
            if not (0 < p["p"] < 1 and p["lambda"] > 0):
                raise InvalidParametersError("pure_exponential needs 0 < p < 1 and lambda > 0")
        elif self.kind == "custom":
            x = np.asarray(p["x"], dtype=float)
            v = np.asarray(p["values"], dtype=float)
            if x.shape != v.shape or x.ndim != 1 or np.any(np.diff(x) <= 0):
                raise InvalidParametersError("custom data needs increasing x and matching values")
            if np.any(v < 0) or np.any(v > 1):
                raise InvalidParametersError("custom data must take values in [0, 1]")
        else:
            raise InvalidParametersError(f"unknown initial data kind {self.kind!r}")

    @property
    def beta(self) -> float:
        p = self.params
        return p["p"] * math.exp(-p["lambda"] * p["A"])

    def profile(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float) - self.shift
        p = self.params
        if self.kind == "compact_bump":
            half = 0.5 * p["A"]
            return p["p"] * np.maximum(0.0, 1.0 - np.abs(x - half) / half)
        if self.kind == "plateau_tail":
            lam, A, alpha, beta = p["lambda"], p["A"], p["alpha"], self.beta
            with np.errstate(over="ignore", under="ignore"):
                tail = p["p"] * np.exp(-lam * np.maximum(x, A))
            return np.where(x <= 0, 0.0, np.where(x < alpha, beta * x / alpha, np.where(x < A, beta, tail)))
        if self.kind == "pure_exponential":
            with np.errstate(under="ignore"):
                return np.where(x <= 0, 0.0, p["p"] * np.minimum(1.0, x) * np.exp(-p["lambda"] * np.maximum(x, 0.0)))
        return np.interp(x, np.asarray(p["x"]), np.asarray(p["values"]), left=0.0, right=0.0)

    def to_dict(self) -> dict:
        params = {k: (list(map(float, v)) if isinstance(v, (list, tuple, np.ndarray)) else v)
                  for k, v in self.params.items()}
        return {"kind": self.kind, "params": params, "shift": self.shift}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InitialData":
        return cls(data["kind"], dict(data.get("params", {})), float(data.get("shift", 0.0)))


def make_initial(init: InitialData, grid: Grid) -> Field:
    return Field(grid, 0.0, init.profile(grid.x))


# -- convolution ------------------------------------------------------------

class Convolution:
    """Discrete ``(K*u)(x_i) = sum_j K(j dx) u(x_i - j dx) dx`` on a fixed grid.

    ``method`` is ``"direct"`` (summation over the kernel support) or
    ``"spectral"`` (FFT with zero padding).  ``boundary="zero"`` treats ``u``
    as zero outside the grid, ``"periodic"`` wraps it around (test mode).
    """

    def __init__(self, kernel: kn.KernelSpec, grid: Grid, method: str = "direct", boundary: str = "zero"):
        if method not in ("direct", "spectral"):
            raise ValueError(f"unknown convolution method {method!r}")
        if boundary not in ("zero", "periodic"):
            raise ValueError(f"unknown boundary mode {boundary!r}")
        self.kernel, self.grid, self.method, self.boundary = kernel, grid, method, boundary
        dx = grid.dx
        lo, hi = kn.support(kernel, rel=1e-14)
        if (hi - lo) / dx < 8:
            raise ResolutionError(
                f"kernel support [{lo:.3g}, {hi:.3g}] spans fewer than 8 cells of width {dx:.3g}; refine the grid"
            )
        self.j_left = int(math.ceil(-lo / dx - 1e-9))
        self.j_right = int(math.ceil(hi / dx - 1e-9))
        offsets = np.arange(-self.j_left, self.j_right + 1) * dx
        self.weights = np.asarray(kn.evaluate(kernel, offsets)) * dx
        self.mass = float(self.weights.sum())
        self.reach = hi  # right radius of the effective support
        n = grid.n
        if boundary == "periodic" and max(self.j_left, self.j_right) >= n:
            raise ResolutionError("kernel support wider than the periodic domain")
        if method == "spectral":
            if boundary == "zero":
                self._nfft = sfft.next_fast_len(n + self.weights.size - 1, real=True)
                self._wk = sfft.rfft(self.weights, self._nfft)
            else:
                wrapped = np.zeros(n)
                np.add.at(wrapped, np.arange(-self.j_left, self.j_right + 1) % n, self.weights)
                self._wk = sfft.rfft(wrapped)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        n = self.grid.n
        if self.method == "direct":
            if self.boundary == "zero":
                return np.convolve(u, self.weights)[self.j_left:self.j_left + n]
            ext = np.concatenate([u[n - self.j_right:], u, u[:self.j_left]]) if self.j_right else np.concatenate([u, u[:self.j_left]])
            return np.convolve(ext, self.weights, mode="valid")
        if self.boundary == "zero":
            full = sfft.irfft(sfft.rfft(u, self._nfft) * self._wk, self._nfft)
            return full[self.j_left:self.j_left + n]
        return sfft.irfft(sfft.rfft(u) * self._wk, n)


def convolve(kernel: kn.KernelSpec, field: Field, method: str = "direct", boundary: str = "zero") -> np.ndarray:
    return Convolution(kernel, field.grid, method, boundary)(field.values)


# -- right-hand side and time stepping -------------------------------------

class Model:
    """Kernel, nonlinearity and grid bundled with a prepared convolution."""

    def __init__(self, kernel: kn.KernelSpec, nl: Nonlinearity, grid: Grid,
                 method: str = "direct", boundary: str = "zero"):
        self.kernel, self.nl, self.grid = kernel, nl, grid
        self.conv = Convolution(kernel, grid, method, boundary)
        self.kbar = kn.mass(kernel)

    @property
    def dt_stable(self) -> float:
        return 0.5 / (self.kbar + env.sup_norm(self.nl.mu))

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        return self.conv(u) - self.conv.mass * u + u * self.nl.f(t, u)

    def step(self, field: Field, dt: float) -> Field:
        if dt > self.dt_stable * (1 + 1e-12):
            raise StabilityError(f"dt = {dt:g} exceeds the stable step {self.dt_stable:.6g}; reduce dt")
        t, u = field.t, field.values
        k1 = self.rhs(t, u)
        k2 = self.rhs(t + 0.5 * dt, u + 0.5 * dt * k1)
        k3 = self.rhs(t + 0.5 * dt, u + 0.5 * dt * k2)
        k4 = self.rhs(t + dt, u + dt * k3)
        new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        overshoot = max(0.0, -float(new.min()), float(new.max()) - 1.0)
        return Field(field.grid, t + dt, np.clip(new, 0.0, 1.0), overshoot)


def rhs(kernel: kn.KernelSpec, nl: Nonlinearity, field: Field, method: str = "direct",
        boundary: str = "zero") -> np.ndarray:
    return Model(kernel, nl, field.grid, method, boundary).rhs(field.t, field.values)


def step(kernel: kn.KernelSpec, nl: Nonlinearity, field: Field, dt: float, method: str = "direct",
         boundary: str = "zero") -> Field:
    return Model(kernel, nl, field.grid, method, boundary).step(field, dt)


@dataclass
class Trajectory:
    final: Field
    n_steps: int
    dt: float
    max_overshoot: float
    max_guard_value: float
    guard_start: float


def guard_start(model: Model) -> float:
    return model.grid.x_max - GUARD_SUPPORTS * model.conv.reach


def run(kernel: kn.KernelSpec, nl: Nonlinearity, init: InitialData | Field, grid: Grid, t_end: float,
        dt: float, observers: Iterable[Callable[[Field], Any]] = (), stride: int = 1,
        method: str = "direct", boundary: str = "zero", guard: bool = True) -> Trajectory:
    """Advance from ``init`` to ``t_end``; observers see the field every ``stride`` steps.

    Raises :class:`DomainExhaustedError` as soon as ``u`` exceeds ``1e-10``
    within five kernel reaches of the right boundary.
    """
    model = Model(kernel, nl, grid, method, boundary)
    field = init if isinstance(init, Field) else make_initial(init, grid)
    observers = list(observers)
    n_steps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / n_steps if n_steps else dt
    x_guard = guard_start(model)
    gmask = grid.x >= x_guard
    max_guard = 0.0
    max_over = 0.0

    def watch(f: Field):
        nonlocal max_guard
        if guard and gmask.any():
            g = float(f.values[gmask].max())
            max_guard = max(max_guard, g)
            if g > GUARD_LEVEL:
                raise DomainExhaustedError(f.t, g)

    watch(field)
    for obs in observers:
        obs(field)
    for k in range(1, n_steps + 1):
        field = model.step(field, h)
        max_over = max(max_over, field.overshoot)
        watch(field)
        if k % stride == 0 or k == n_steps:
            for obs in observers:
                obs(field)
    return Trajectory(field, n_steps, h, max_over, max_guard, x_guard)


# -- snapshots --------------------------------------------------------------

class SnapshotRecorder:
    """Observer keeping copies of every field it is shown."""

    def __init__(self):
        self.fields: list[Field] = []

    def __call__(self, field: Field) -> None:
        self.fields.append(field)

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.fields])

    def matrix(self) -> np.ndarray:
        return np.vstack([f.values for f in self.fields])


def write_snapshots_csv(path: str, fields: list[Field]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u"])
        for f in fields:
            for x, u in zip(f.grid.x, f.values):
                w.writerow([repr(float(f.t)), repr(float(x)), repr(float(u))])


def write_snapshots_npz(path: str, fields: list[Field], meta: Mapping[str, Any]) -> None:
    """Columnar dump (``t``, ``x``, ``u[t, x]``) plus a JSON sidecar ``<path>.json``."""
    np.savez(path, t=np.array([f.t for f in fields]), x=fields[0].grid.x,
             u=np.vstack([f.values for f in fields]))
    with open(f"{path}.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
