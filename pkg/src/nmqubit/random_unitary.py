"""Random-unitary (Pauli) qubit channels with time-dependent rates.

A Pauli channel rho -> sum_a p_a sigma_a rho sigma_a has Pauli-basis
eigenvalues lambda = H p, with H the 4x4 Hadamard matrix below. The rates of
the equivalent time-local master equation

    d rho/dt = (1/2) sum_k gamma_k(t) (sigma_k rho sigma_k - rho)

are gamma_a = (1/2) sum_b H_ab d/dt ln lambda_b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, KernelPoleError, RateUndefinedError
from .linops import Superoperator, pauli, pauli_channel
from .numerics import DEFAULT_DERIVATIVE_STEP, DEFAULT_HORIZON, forward_derivative, quadrature

HADAMARD = np.array([[1, 1, 1, 1],
                     [1, 1, -1, -1],
                     [1, -1, 1, -1],
                     [1, -1, -1, 1]], dtype=np.int64)


@dataclass(frozen=True)
class MixtureParams:
    r: float
    gamma: float = 1.0

    def __post_init__(self):
        if not 0 <= self.r <= 1:
            raise InvalidArgumentError(f"mixture weight r must lie in [0, 1], got {self.r}")
        if not self.gamma > 0:
            raise InvalidArgumentError("gamma must be positive")


def _t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidArgumentError("t must be non-negative")
    return t


# -- probability families ---------------------------------------------------

def dephasing_probs(t, gamma: float = 1.0) -> np.ndarray:
    """Weights of the three-state sigma_z chain: p0 = 1 - x, p3 = x, x = g t e^{-g t}."""
    t = _t(t)
    x = gamma * t * np.exp(-gamma * t)
    zero = np.zeros_like(x)
    return np.array([1 - x, zero, zero, x])


def markov_x_probs(t, gamma: float = 1.0) -> np.ndarray:
    """Weights of the Markovian sigma_x dephasing channel."""
    t = _t(t)
    e = np.exp(-gamma * t)
    zero = np.zeros_like(e)
    return np.array([0.5 * (1 + e), 0.5 * (1 - e), zero, zero])


def example_probs(t, gamma: float = 1.0) -> np.ndarray:
    """Probabilities whose Pauli channel is maximally non-Markovian."""
    t = _t(t)
    x = gamma * t
    e = np.exp(-x)
    return np.array([0.75 + 0.25 * e * (1 - 2 * x),
                     0.25 * (1 - e),
                     np.zeros_like(e),
                     0.5 * x * e])


def mixture_probs(t, params: MixtureParams) -> np.ndarray:
    """(1 - r) * sigma_z chain + r * Markovian sigma_x channel."""
    r, g = params.r, params.gamma
    return (1 - r) * dephasing_probs(t, g) + r * markov_x_probs(t, g)


def check_probability_vector(p, atol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[0] != 4:
        raise InvalidArgumentError("probability vector must have 4 entries")
    if np.any(p < -atol) or np.any(p > 1 + atol) or np.any(np.abs(p.sum(axis=0) - 1) > atol):
        raise InvalidArgumentError("invalid probability vector")
    return p


def pauli_eigenvalues(p) -> np.ndarray:
    """lambda_a = sum_b H_ab p_b (works on stacked vectors along axis 0)."""
    return np.tensordot(HADAMARD, np.asarray(p), axes=1)


def random_unitary_map(p) -> Superoperator:
    p = check_probability_vector(p)
    return pauli_channel(p)


# -- rates -----------------------------------------------------------------

def rates_from_probs(probs: Callable, t: float, dprobs: Callable | None = None,
                     h: float = DEFAULT_DERIVATIVE_STEP) -> np.ndarray:
    """Rates (gamma_0, gamma_1, gamma_2, gamma_3) of a Pauli-channel family.

    `probs(t)` returns the 4 weights; `dprobs(t)`, if given, their exact time
    derivative. Otherwise d/dt ln lambda is taken by central differences
    (one-sided at t < h). gamma_0 = -(gamma_1 + gamma_2 + gamma_3).
    """
    lam = pauli_eigenvalues(probs(t))
    if np.any(lam <= 0):
        raise RateUndefinedError(f"Pauli eigenvalue not positive at t={t:.6g}: map not invertible")
    if dprobs is not None:
        dlog = pauli_eigenvalues(dprobs(t)) / lam
    else:
        def loglam(s):
            return np.log(pauli_eigenvalues(probs(s)))
        if t - h < 0:
            dlog = forward_derivative(loglam, t, h)
        else:
            dlog = (loglam(t + h) - loglam(t - h)) / (2 * h)
    return 0.5 * HADAMARD @ dlog


def _g_a(x):
    return (1 - x) / (np.exp(x) - x)


def _g_b(x):
    return (3 - 2 * x) / (1 + np.exp(x) - 2 * x)


def _g_c(x):
    return 1 / (1 + np.exp(x))


def g_functions(t, gamma: float = 1.0):
    x = gamma * _t(t)
    return _g_a(x), _g_b(x), _g_c(x)


def example_rates(t, gamma: float = 1.0) -> np.ndarray:
    """Closed-form (gamma_1, gamma_2, gamma_3) for `example_probs`."""
    ga, gb, gc = g_functions(t, gamma)
    return 0.5 * gamma * np.array([-ga + gb + gc, ga - gb + gc, ga + gb - gc])


def mixture_ga(t, r: float, gamma: float = 1.0):
    """g_a(r, t) with gamma_2 + gamma_3 = gamma * g_a(r, t) for the mixture."""
    MixtureParams(r, gamma)
    x = gamma * _t(t)
    return 2 * (1 - r) * (1 - x) / (np.exp(x) - 2 * (1 - r) * x)


def mixture_dprobs(t, params: MixtureParams) -> np.ndarray:
    """Exact time derivative of `mixture_probs`."""
    r, g = params.r, params.gamma
    t = _t(t)
    e = np.exp(-g * t)
    dx = g * e * (1 - g * t)
    zero = np.zeros_like(e)
    chain = np.array([-dx, zero, zero, dx])
    xch = np.array([-0.5 * g * e, 0.5 * g * e, zero, zero])
    return (1 - r) * chain + r * xch


def mixture_eigenvalues(t, params: MixtureParams):
    """Pauli eigenvalues of the mixture map and their time derivatives.

    Evaluated from closed forms rather than H @ p, which loses lambda_2 and
    lambda_3 to cancellation once e^{-g t} drops below machine epsilon.
    """
    r, g = params.r, params.gamma
    t = _t(t)
    e = np.exp(-g * t)
    x = g * t * e
    dx = g * e * (1 - g * t)
    one = np.ones_like(e)
    lam = np.array([one, (1 - r) * (1 - 2 * x) + r, (1 - r) * (1 - 2 * x) + r * e, (1 - r) + r * e])
    dlam = np.array([0 * one, -2 * (1 - r) * dx, -2 * (1 - r) * dx - r * g * e, -r * g * e])
    return lam, dlam


def mixture_rates(t: float, params: MixtureParams) -> np.ndarray:
    """(gamma_1, gamma_2, gamma_3) of the mixture family, analytic derivatives."""
    lam, dlam = mixture_eigenvalues(t, params)
    if np.any(lam <= 0):
        raise RateUndefinedError(f"Pauli eigenvalue not positive at t={t:.6g}: map not invertible")
    return (0.5 * HADAMARD @ (dlam / lam))[1:]


def _rate_integral(rate_k: Callable[[float], float], horizon: float, tol: float) -> float:
    # split at gamma t = 1 where the sign structure changes
    pts = [p for p in (0.5, 1.0, 2.0, 5.0) if p < horizon]
    return quadrature(rate_k, 0.0, horizon, tol=tol, points=pts)


def gamma_integrals(rates: Callable[[float], np.ndarray], horizon: float = DEFAULT_HORIZON,
                    tol: float = 1e-10) -> tuple[float, float, float]:
    """Integrated rates (Gamma_1, Gamma_2, Gamma_3) at `horizon`."""
    return tuple(_rate_integral(lambda s, k=k: float(rates(s)[k]), horizon, tol) for k in range(3))


def markov_x_solution(t: float, gamma: float, rho0) -> np.ndarray:
    e = math.exp(-gamma * float(_t(t)))
    sx = pauli(1)
    rho0 = np.asarray(rho0, dtype=complex)
    return 0.5 * ((1 + e) * rho0 + (1 - e) * sx @ rho0 @ sx)


# -- Laplace-domain memory kernels ----------------------------------------

def dephasing_probs_laplace(z, gamma: float = 1.0) -> np.ndarray:
    """Laplace transform of `dephasing_probs`."""
    q = gamma / (z + gamma) ** 2
    return np.array([1 / z - q, 0 * q, 0 * q, q])


def markov_x_probs_laplace(z, gamma: float = 1.0) -> np.ndarray:
    a = 1 / z
    b = 1 / (z + gamma)
    return np.array([0.5 * (a + b), 0.5 * (a - b), 0 * a, 0 * a])


def mixture_probs_laplace(z, params: MixtureParams) -> np.ndarray:
    r, g = params.r, params.gamma
    return (1 - r) * dephasing_probs_laplace(z, g) + r * markov_x_probs_laplace(z, g)


def example_probs_laplace(z, gamma: float = 1.0) -> np.ndarray:
    return mixture_probs_laplace(z, MixtureParams(0.5, gamma))


@dataclass(frozen=True)
class MemoryKernels:
    k: np.ndarray          # (k_0, k_1, k_2, k_3)
    mu: np.ndarray         # (mu_0, ..., mu_3)
    lam: np.ndarray        # Laplace eigenvalues lambda_a(z)

    @property
    def k123(self):
        return self.k[1:]


def memory_kernels_laplace(p_z, z) -> MemoryKernels:
    """Memory functions k_a(z) of the convolution master equation.

    mu_a = (z lambda_a - 1) / lambda_a and k_a = (1/2) sum_b H_ab mu_b.
    """
    lam = pauli_eigenvalues(np.asarray(p_z, dtype=complex if np.iscomplexobj(p_z) else float))
    if np.any(lam == 0):
        raise KernelPoleError(f"Laplace eigenvalue vanishes at z={z}")
    mu = (z * lam - 1) / lam
    k = 0.5 * HADAMARD @ mu
    return MemoryKernels(k=k, mu=mu, lam=lam)


# -- maximal non-Markovianity conditions -----------------------------------

@dataclass(frozen=True)
class MaxNonMarkovVerdict:
    negative_sum_found: bool
    min_sum: float
    gamma_inf: tuple[float, float, float]
    gamma1_ok: bool
    gamma23_ok: bool

    @property
    def verdict(self) -> bool:
        return self.negative_sum_found and self.gamma1_ok and self.gamma23_ok

    def __bool__(self):
        return self.verdict


def check_max_nonmarkov_conditions(rates: Callable[[float], np.ndarray],
                                   horizon: float = DEFAULT_HORIZON,
                                   n_scan: int = 4001) -> MaxNonMarkovVerdict:
    """Sufficient conditions for a maximally non-Markovian Pauli channel.

    (a) gamma_2 + gamma_3 < 0 somewhere, (b) Gamma_1(inf) >= 0,
    (c) Gamma_2(inf) = Gamma_3(inf) = 0.
    """
    ts = np.linspace(0.0, horizon, n_scan)
    sums = np.array([float(rates(s)[1] + rates(s)[2]) for s in ts])
    g = gamma_integrals(rates, horizon)
    return MaxNonMarkovVerdict(
        negative_sum_found=bool(sums.min() < -1e-8),
        min_sum=float(sums.min()),
        gamma_inf=g,
        gamma1_ok=g[0] >= -1e-8,
        gamma23_ok=abs(g[1]) <= 1e-6 and abs(g[2]) <= 1e-6,
    )


def coherence_factors(t, params: MixtureParams) -> np.ndarray:
    """Pauli eigenvalues (lambda_1, lambda_2, lambda_3) of the mixture map."""
    return pauli_eigenvalues(mixture_probs(t, params))[1:]

