"""Shared numerical machinery: ODEs, memory-kernel equations, quadrature, RNG."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError, StiffnessError, ToleranceNotMetError
from .linops import Superoperator, unvec, vec

DEFAULT_ODE_TOL = 1e-10
DEFAULT_DERIVATIVE_STEP = 1e-5
DEFAULT_HORIZON = 40.0


@dataclass(frozen=True)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise InvalidArgumentError("time grid must be a non-empty 1-d array")
        if not np.all(np.isfinite(pts)) or pts[0] < 0:
            raise InvalidArgumentError("time grid must be finite and start at t >= 0")
        if np.any(np.diff(pts) <= 0):
            raise InvalidArgumentError("time grid must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, t0: float, t1: float, n: int) -> "TimeGrid":
        return cls(np.linspace(t0, t1, n))

    @property
    def t0(self) -> float:
        return float(self.points[0])

    @property
    def t1(self) -> float:
        return float(self.points[-1])

    def __len__(self):
        return self.points.size


def _as_grid(grid) -> TimeGrid:
    return grid if isinstance(grid, TimeGrid) else TimeGrid(grid)


def integrate_ode(rhs: Callable, y0, grid, tol: float = DEFAULT_ODE_TOL) -> np.ndarray:
    """Solve y' = rhs(t, y) and sample the solution on `grid`.

    Uses the embedded 8(5,3) Dormand-Prince pair with dense output. Returns an
    array of shape (len(grid), *y0.shape). Complex states are supported.
    """
    grid = _as_grid(grid)
    y0 = np.asarray(y0)
    shape = y0.shape
    cplx = np.iscomplexobj(y0)
    flat0 = y0.astype(complex if cplx else float).ravel()
    if grid.points.size == 1:
        return flat0.reshape((1, *shape))

    def f(t, y):
        return np.asarray(rhs(t, y.reshape(shape))).ravel()

    sol = integrate.solve_ivp(
        f, (grid.t0, grid.t1), flat0, method="DOP853", t_eval=grid.points,
        rtol=tol, atol=tol * 1e-2,
    )
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else grid.t0
        raise StiffnessError(f"integration failed near t={t_fail:.6g}: {sol.message}", t=t_fail)
    return sol.y.T.reshape((grid.points.size, *shape))


@dataclass(frozen=True)
class KernelSpec:
    """Memory kernel k(t) = local_weight * delta(t) + nonlocal(t)."""

    local_weight: float
    nonlocal_part: Callable[[np.ndarray], np.ndarray] = field(default=lambda t: np.zeros_like(np.asarray(t, float)))


def volterra_solve(kernel: KernelSpec, dissipator: Superoperator, rho0, h: float, t_end: float):
    """Solve d rho/dt = (1/2) int_0^t k(t - t') D[rho_t'] dt' on a uniform grid.

    The delta part of the kernel contributes the local term
    (local_weight / 2) D[rho_t] exactly; the nonlocal history integral uses
    trapezoidal convolution weights and the time step is the (implicit)
    trapezoidal rule, giving second-order convergence in h.

    Returns (times, states) with states of shape (len(times), d, d).
    """
    if not h > 0:
        raise InvalidArgumentError("step h must be positive")
    n_steps = int(round(t_end / h))
    if n_steps < 1 or abs(n_steps * h - t_end) > 1e-9 * max(1.0, t_end):
        raise InvalidArgumentError("t_end must be a positive multiple of h")
    d = dissipator.dim
    dmat = dissipator.matrix
    times = h * np.arange(n_steps + 1)
    kvals = np.asarray(kernel.nonlocal_part(times), dtype=float)
    if not np.all(np.isfinite(kvals)):
        raise InvalidArgumentError("kernel is not finite on the grid")

    # y_n = vec(rho_n), g_n = D y_n
    y = np.zeros((n_steps + 1, d * d), dtype=complex)
    g = np.zeros_like(y)
    y[0] = vec(np.asarray(rho0, dtype=complex))
    g[0] = dmat @ y[0]
    eye = np.eye(d * d)
    a = 0.5 * kernel.local_weight
    # f_n = a g_n + (1/2) h sum'' k(t_n - t_j) g_j
    lhs = eye - 0.5 * h * (a * dmat + 0.25 * h * kvals[0] * dmat)
    lhs_inv = np.linalg.inv(lhs)

    def history(n):
        # trapezoid over j = 0..n of k(t_n - t_j) g_j, without the j = n term
        if n == 0:
            return np.zeros(d * d, dtype=complex)
        w = kvals[n:0:-1]  # k(t_n - t_j) for j = 0..n-1
        s = w @ g[:n]
        s -= 0.5 * kvals[n] * g[0]
        return h * s

    f_prev = a * g[0]
    for n in range(n_steps):
        hist = history(n + 1)
        rhs = y[n] + 0.5 * h * (f_prev + 0.5 * hist)
        y[n + 1] = lhs_inv @ rhs
        g[n + 1] = dmat @ y[n + 1]
        f_prev = a * g[n + 1] + 0.5 * (hist + 0.5 * h * kvals[0] * g[n + 1])
    states = np.stack([unvec(v, d) for v in y])
    return times, states


def quadrature(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12,
               points=None, limit: int = 500) -> float:
    """Adaptive Gauss-Kronrod quadrature with absolute error target `tol`."""
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=limit, points=points)
    if not err <= tol:
        raise ToleranceNotMetError(
            f"quadrature on [{a}, {b}] reached error {err:.3g} > {tol:.3g}", estimate=val, error=err)
    return float(val)


def numeric_derivative(f: Callable[[float], float], t: float, h: float = DEFAULT_DERIVATIVE_STEP) -> float:
    return (f(t + h) - f(t - h)) / (2 * h)


def forward_derivative(f: Callable[[float], float], t: float, h: float = DEFAULT_DERIVATIVE_STEP) -> float:
    """Second-order one-sided difference for points at the left boundary."""
    return (-3 * f(t) + 4 * f(t + h) - f(t + 2 * h)) / (2 * h)


class RngStream:
    """Reproducible random stream keyed by (master_seed, stream_id).

    Backed by the counter-based Philox generator seeded through
    ``SeedSequence(master_seed, spawn_key=(stream_id,))``, so a stream's
    contents depend only on its key and not on the order streams are used.
    Gaussian draws use numpy's ziggurat sampler.
    """

    __slots__ = ("master_seed", "stream_id", "_gen")

    def __init__(self, master_seed: int, stream_id: int):
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def uniform(self, size=None):
        return self._gen.random(size)

    def gaussian(self, size=None):
        return self._gen.standard_normal(size)

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


def rng_stream(master_seed: int, stream_id: int) -> RngStream:
    return RngStream(master_seed, stream_id)


def draw_exponential(stream: RngStream, rate: float, size=None):
    """Inverse-CDF exponential sample with mean 1/rate."""
    if not rate > 0:
        raise InvalidArgumentError("rate must be positive")
    u = stream.uniform(size)
    return -np.log1p(-u) / rate


def draw_gaussian(stream: RngStream, size=None):
    return stream.gaussian(size)


def erlang_log_density(t, n: int, rate: float):
    """log of rate * exp(-rate t) (rate t)^(n-1) / (n-1)!, for t > 0."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return math.log(rate) - rate * t + (n - 1) * np.log(rate * t) - math.lgamma(n)
