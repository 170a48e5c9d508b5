"""Maximally non-Markovian qubit dephasing and its n-collision generalization.

Time is measured in the same units as 1/gamma. All closed forms are
vectorized over t.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError, RateUndefinedError
from .linops import Superoperator, pauli, sandwich_superop
from .numerics import (DEFAULT_DERIVATIVE_STEP, KernelSpec, erlang_log_density,
                       forward_derivative, numeric_derivative, quadrature)

# e^x - 2x >= 2 - 2 ln 2 on x >= 0; checked once so rate_gamma can skip it.
_x = np.linspace(0.0, 60.0, 60001)
assert np.min(np.exp(_x) - 2 * _x) > 0.6
del _x


def _check(t, gamma):
    if not gamma > 0:
        raise InvalidArgumentError("gamma must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidArgumentError("t must be non-negative")
    return t


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def rate_gamma(t, gamma: float = 1.0):
    """gamma(t) = 2 g (1 - g t) / (e^{g t} - 2 g t)."""
    t = _check(t, gamma)
    x = gamma * t
    return _out(2 * gamma * (1 - x) / (np.exp(x) - 2 * x))


def big_gamma(t, gamma: float = 1.0):
    """Integrated rate Gamma(t) = ln[1 / (1 - 2 g t e^{-g t})]."""
    t = _check(t, gamma)
    x = gamma * t
    return _out(-np.log1p(-2 * x * np.exp(-x)))


def coherence_factor(t, gamma: float = 1.0):
    """e^{-Gamma(t)} = 1 - 2 g t e^{-g t}."""
    t = _check(t, gamma)
    x = gamma * t
    return _out(1 - 2 * x * np.exp(-x))


def dephasing_superop(factor) -> Superoperator:
    """Map keeping populations and multiplying coherences by `factor`."""
    return Superoperator(np.diag([1.0, factor, np.conj(factor), 1.0]))


def dephasing_map(t: float, gamma: float = 1.0) -> Superoperator:
    return dephasing_superop(coherence_factor(t, gamma))


def sigma_z_dissipator() -> Superoperator:
    """rho -> sigma_z rho sigma_z - rho."""
    sz = pauli(3)
    return Superoperator(sandwich_superop(sz, sz).matrix - np.eye(4))


def kernel(gamma: float = 1.0) -> KernelSpec:
    """Memory kernel k(t) = 2 g [delta(t) - g sin(g t)]."""
    if not gamma > 0:
        raise InvalidArgumentError("gamma must be positive")
    return KernelSpec(local_weight=2 * gamma,
                      nonlocal_part=lambda t: -2 * gamma ** 2 * np.sin(gamma * np.asarray(t, float)))


def kernel_laplace(z, gamma: float = 1.0):
    """Laplace transform 2 g z^2 / (z^2 + g^2) of `kernel`."""
    return 2 * gamma * z ** 2 / (z ** 2 + gamma ** 2)


def _check_n(n):
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise InvalidArgumentError(f"number of collisions must be an even integer >= 2, got {n!r}")


def _cn_scalar(t: float, n: int, gamma: float, tol: float) -> float:
    if t == 0:
        return 1.0
    # inner integral over t2 done analytically: 1 - exp(-2 g (t - t1))
    def integrand(t1):
        if t1 <= 0:
            return 0.0
        return -math.expm1(-2 * gamma * (t - t1)) * math.exp(erlang_log_density(t1, n, gamma))

    peak = (n - 1) / gamma
    points = [peak] if 0 < peak < t else None
    return math.exp(-2 * gamma * t) + quadrature(integrand, 0.0, t, tol=tol, points=points)


def coherence_cn(t, n: int, gamma: float = 1.0, tol: float = 1e-13):
    """Coherence c_n(t) after an even number n of sigma_z collisions.

    The collisions happen at the jumps of a unidirectional (n+1)-state chain
    with uniform rate gamma; c_2(t) = 1 - 2 g t e^{-g t}.
    """
    _check_n(n)
    t = _check(t, gamma)
    if t.ndim == 0:
        return _cn_scalar(float(t), n, gamma, tol)
    return np.array([_cn_scalar(float(s), n, gamma, tol) for s in t.ravel()]).reshape(t.shape)


def exponential_waiting_laplace(z, gamma: float = 1.0):
    return gamma / (z + gamma)


def coherence_cn_laplace(z, n: int, w_z):
    """Laplace-domain coherence for an arbitrary waiting-time transform w_z."""
    _check_n(n)
    return (1 - w_z) / z * (1 - w_z ** n) / (1 + w_z) + w_z ** n / z


def rate_from_cn(t: float, n: int, gamma: float = 1.0, h: float | None = None) -> float:
    """gamma_n(t) = d/dt ln[1 / c_n(t)] by central differences."""
    _check_n(n)
    t = float(_check(t, gamma))
    h = DEFAULT_DERIVATIVE_STEP / gamma if h is None else h

    def log_inv_c(s):
        c = coherence_cn(s, n, gamma)
        if c <= 0:
            raise RateUndefinedError(f"c_{n}({s:.6g}) = {c:.3g} is not positive")
        return -math.log(c)

    log_inv_c(t)
    if t - h < 0:
        return forward_derivative(log_inv_c, t, h)
    return numeric_derivative(log_inv_c, t, h)
