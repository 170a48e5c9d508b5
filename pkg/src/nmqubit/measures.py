"""Divisibility-based non-Markovianity measures for qubit dynamical maps.

For a family Lambda_t and a Hermitian witness X on C^k (x) C^d,

    lambda_k(X; t) = d/dt || (I_k (x) Lambda_t)[X] ||_1,

N+ and N- integrate its positive and negative lobes over [0, horizon], and
M_k = max over witnesses of N+ / |N-|, clipped to [0, 1]. The witness list is
finite, so M_k is a lower bound on the supremum over all Hermitian X.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from . import dephasing, random_unitary
from .errors import InvalidArgumentError, SingularPropagatorError, ToleranceNotMetError
from .linops import (Superoperator, apply_extended, choi_of, compose, identity_superop, invert,
                     pauli, pauli_diagonal_superop, trace_norm)
from .numerics import DEFAULT_DERIVATIVE_STEP, DEFAULT_HORIZON, forward_derivative, quadrature

VIOLATION_THRESHOLD = -1e-4
ROUNDOFF_THRESHOLD = -1e-10
NOISE_FLOOR = 1e-9
SCAN_COND_BOUND = 1e8   # beyond this, inverting Lambda_s amplifies round-off past the round-off threshold


@dataclass(frozen=True)
class PropagatorFamily:
    propagator: Callable[[float], Superoperator]
    name: str = "family"
    dim: int = 2
    closed_form: bool = True

    def __call__(self, t: float) -> Superoperator:
        return self.propagator(t)


def dephasing_family(gamma: float = 1.0) -> PropagatorFamily:
    return PropagatorFamily(lambda t: dephasing.dephasing_map(t, gamma), "dephasing")


def mixture_family(r: float, gamma: float = 1.0) -> PropagatorFamily:
    params = random_unitary.MixtureParams(r, gamma)
    return PropagatorFamily(
        lambda t: pauli_diagonal_superop(random_unitary.mixture_eigenvalues(t, params)[0]),
        f"mixture(r={r:g})")


def random_unitary_family(gamma: float = 1.0) -> PropagatorFamily:
    """The maximally non-Markovian Pauli channel (the r = 1/2 mixture)."""
    fam = mixture_family(0.5, gamma)
    return PropagatorFamily(fam.propagator, "random-unitary")


def markov_x_family(gamma: float = 1.0) -> PropagatorFamily:
    return PropagatorFamily(
        lambda t: pauli_diagonal_superop([1.0, 1.0, np.exp(-gamma * t), np.exp(-gamma * t)]), "markov-x")


def identity_family(dim: int = 2) -> PropagatorFamily:
    return PropagatorFamily(lambda t: identity_superop(dim), "identity", dim)


def pauli_probability_family(probs: Callable[[float], np.ndarray], name: str = "pauli") -> PropagatorFamily:
    return PropagatorFamily(lambda t: random_unitary.random_unitary_map(probs(t)), name)


FAMILIES = {
    "dephasing": lambda gamma, r: dephasing_family(gamma),
    "random-unitary": lambda gamma, r: random_unitary_family(gamma),
    "mixture": lambda gamma, r: mixture_family(r, gamma),
    "markov-x": lambda gamma, r: markov_x_family(gamma),
    "identity": lambda gamma, r: identity_family(),
}


def intermediate_propagator(family: PropagatorFamily, t: float, s: float) -> Superoperator:
    """V_{t,s} = Lambda_t Lambda_s^{-1}."""
    if not t >= s >= 0:
        raise InvalidArgumentError("need t >= s >= 0")
    return compose(family(t), invert(family(s)))


# -- lambda_k and the lobe integrals ---------------------------------------

def _norm_curve(family, x, k):
    x = np.asarray(x, dtype=complex)
    return lambda t: trace_norm(apply_extended(family(t), x, k))


def lambda_k(family: PropagatorFamily, x, t: float, k: int = 1, h: float = DEFAULT_DERIVATIVE_STEP,
             return_flag: bool = False):
    """Time derivative of ||(I_k (x) Lambda_t)[X]||_1 by central differences.

    For t < h a second-order one-sided difference is used; with
    ``return_flag=True`` the result is ``(value, one_sided)``.
    """
    f = _norm_curve(family, x, k)
    one_sided = t - h < 0
    val = forward_derivative(f, t, h) if one_sided else (f(t + h) - f(t - h)) / (2 * h)
    return (val, one_sided) if return_flag else val


def _lam_fn(family, x, k, h):
    f = _norm_curve(family, x, k)

    def lam(t):
        if t - h < 0:
            return forward_derivative(f, t, h)
        return (f(t + h) - f(t - h)) / (2 * h)
    return lam


def sign_changes(fn: Callable[[float], float], a: float, b: float, n_scan: int = 2001,
                 xtol: float = 1e-10, floor: float = NOISE_FLOOR) -> list[float]:
    """Roots of fn on [a, b] isolated on a scan grid and refined by bisection.

    Sign flips where both bracketing samples are below `floor` in magnitude
    are treated as round-off and skipped.
    """
    ts = np.linspace(a, b, n_scan)
    vals = np.array([fn(t) for t in ts])
    roots = []
    for i in range(n_scan - 1):
        v0, v1 = vals[i], vals[i + 1]
        if v0 == 0.0 and abs(v1) > floor:
            roots.append(float(ts[i]))
        elif v0 * v1 < 0 and max(abs(v0), abs(v1)) > floor:
            roots.append(float(bisect(fn, ts[i], ts[i + 1], xtol=xtol)))
    return roots


def n_plus_minus(family: PropagatorFamily, x, k: int = 1, horizon: float = DEFAULT_HORIZON,
                 h: float = DEFAULT_DERIVATIVE_STEP, tol: float = 1e-9,
                 n_scan: int = 2001) -> tuple[float, float]:
    """(N+, N-): integrals of lambda_k over its positive and negative lobes.

    N- is returned with its sign (<= 0). Lobes are separated at bisected sign
    changes before quadrature so the two parts never cancel inside one
    integral.
    """
    lam = _lam_fn(family, x, k, h)
    cuts = [0.0] + sign_changes(lam, 0.0, horizon, n_scan=n_scan) + [horizon]
    n_plus = n_minus = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        # sub-split long lobes so quad sees a few scale lengths at a time
        inner = list(np.linspace(a, b, int(np.ceil((b - a) / 2.0)) + 1)[1:-1])
        try:
            piece = quadrature(lam, a, b, tol=tol, points=inner or None)
        except ToleranceNotMetError as exc:
            if exc.error is not None and exc.error < 1e3 * tol:
                piece = exc.estimate
            else:
                raise
        if piece > 0:
            n_plus += piece
        else:
            n_minus += piece
    return n_plus, n_minus


# -- M_k --------------------------------------------------------------------

def lift_witness(x, k: int) -> np.ndarray:
    """Embed a system operator X as |0><0| (x) X on C^k (x) C^d."""
    e = np.zeros((k, k))
    e[0, 0] = 1.0
    return np.kron(e, np.asarray(x, dtype=complex))


def default_witnesses(k: int = 1) -> list[np.ndarray]:
    base = [pauli(1), pauli(2), pauli(3)]
    if k == 1:
        return base
    out = [lift_witness(x, k) for x in base]
    if k == 2:
        out += [np.kron(x, x) for x in base]
    return out


@dataclass(frozen=True)
class WitnessResult:
    witness: np.ndarray
    n_plus: float
    n_minus: float

    @property
    def ratio(self) -> float | None:
        """N+/|N-| clipped to [0, 1]; None when both parts vanish."""
        np_, nm = max(self.n_plus, 0.0), abs(self.n_minus)
        if np_ < NOISE_FLOOR and nm < NOISE_FLOOR:
            return None
        if np_ < NOISE_FLOOR:
            return 0.0
        if nm < NOISE_FLOOR:
            return 1.0
        return float(min(1.0, np_ / nm))


@dataclass(frozen=True)
class MeasureReport:
    k: int
    family: str
    horizon: float
    witnesses: list = field(default_factory=list)

    @property
    def M(self) -> float:
        ratios = [w.ratio for w in self.witnesses if w.ratio is not None]
        return max(ratios) if ratios else 0.0

    @property
    def best(self) -> WitnessResult | None:
        scored = [w for w in self.witnesses if w.ratio is not None]
        return max(scored, key=lambda w: w.ratio) if scored else None


def measure_Mk(family: PropagatorFamily, k: int = 1, witnesses=None,
               horizon: float = DEFAULT_HORIZON) -> MeasureReport:
    """Largest N+/|N-| over the witnesses (a lower bound on M_k)."""
    ws = default_witnesses(k) if witnesses is None else list(witnesses)
    if not ws:
        raise InvalidArgumentError("need at least one witness")
    results = []
    for x in ws:
        x = np.asarray(x, dtype=complex)
        if x.shape != (k * family.dim, k * family.dim):
            raise InvalidArgumentError(f"witness must be {k * family.dim}x{k * family.dim}")
        n_p, n_m = n_plus_minus(family, x, k, horizon)
        results.append(WitnessResult(x, n_p, n_m))
    return MeasureReport(k, family.name, horizon, results)


# -- divisibility scans -----------------------------------------------------

def fibonacci_sphere(n: int = 200) -> np.ndarray:
    """n nearly uniform unit vectors (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    rad = np.sqrt(1 - z ** 2)
    phi = np.pi * (3 - np.sqrt(5)) * i
    return np.stack([rad * np.cos(phi), rad * np.sin(phi), z], axis=1)


def _pure_states(n: int) -> np.ndarray:
    bloch = fibonacci_sphere(n)
    sig = np.stack([pauli(1), pauli(2), pauli(3)])
    return 0.5 * (np.eye(2)[None] + np.einsum("ni,ijk->njk", bloch, sig))


@dataclass(frozen=True)
class DivisibilityScan:
    times: np.ndarray
    k: int
    min_eig: np.ndarray       # [i, j] for t = times[i] > s = times[j]; NaN elsewhere
    singular: np.ndarray      # bool, cells where Lambda_s could not be inverted

    @property
    def min_value(self) -> float:
        return float(np.nanmin(self.min_eig))

    @property
    def violated(self) -> bool:
        return self.min_value < VIOLATION_THRESHOLD

    @property
    def passed(self) -> bool:
        return self.min_value >= ROUNDOFF_THRESHOLD

    @property
    def indeterminate(self) -> bool:
        return not (self.violated or self.passed)


def divisibility_scan(family: PropagatorFamily, k: int, times, n_states: int = 200,
                      cond_bound: float = SCAN_COND_BOUND) -> DivisibilityScan:
    """Positivity of I_k (x) V_{t,s} over all pairs s < t of `times`.

    k = d checks complete positivity via the Choi matrix; k = 1 checks
    positivity on a Fibonacci-sphere sample of pure input states. Cells whose
    Lambda_s has condition number above `cond_bound` are flagged singular.
    """
    d = family.dim
    if k not in (1, d):
        raise InvalidArgumentError(f"only k = 1 and k = {d} are supported")
    times = np.asarray(times, dtype=float)
    n = times.size
    props = [family(t) for t in times]
    invs = []
    for p in props:
        try:
            invs.append(invert(p, cond_bound))
        except SingularPropagatorError:
            invs.append(None)
    pure = _pure_states(n_states) if k == 1 else None
    vecs = pure.transpose(0, 2, 1).reshape(n_states, d * d).T if k == 1 else None
    out = np.full((n, n), np.nan)
    sing = np.zeros((n, n), dtype=bool)
    for j in range(n):
        if invs[j] is None:
            sing[j + 1:, j] = True
            continue
        for i in range(j + 1, n):
            v = compose(props[i], invs[j])
            if k == d:
                ch = choi_of(v)
                out[i, j] = float(np.linalg.eigvalsh(0.5 * (ch + ch.conj().T))[0])
            else:
                imgs = (v.matrix @ vecs).T.reshape(n_states, d, d).transpose(0, 2, 1)
                imgs = 0.5 * (imgs + imgs.conj().transpose(0, 2, 1))
                out[i, j] = float(np.linalg.eigvalsh(imgs)[:, 0].min())
    return DivisibilityScan(times, k, out, sing)


@dataclass(frozen=True)
class NMDResult:
    degree: int | None
    cp_scan: DivisibilityScan
    p_scan: DivisibilityScan | None
    diagnostics: str

    @property
    def indeterminate(self) -> bool:
        return self.degree is None


def nmd_classify(family: PropagatorFamily, horizon: float = 10.0, n_times: int = 41) -> NMDResult:
    """Non-Markovianity degree of a qubit family from divisibility scans.

    0: CP-divisible (Markovian); 1: positive- but not CP-divisible;
    2: not even positive-divisible (essentially non-Markovian). A scan whose
    most negative value sits between round-off and the violation threshold
    gives degree None.
    """
    if family.dim != 2:
        raise InvalidArgumentError("NMD classification is implemented for qubits only")
    times = np.linspace(0.0, horizon, n_times)
    cp = divisibility_scan(family, 2, times)
    if cp.passed:
        return NMDResult(0, cp, None, f"CP-divisible on grid (min Choi eigenvalue {cp.min_value:.3g})")
    if cp.indeterminate:
        return NMDResult(None, cp, None, f"inconclusive CP scan (min {cp.min_value:.3g})")
    p = divisibility_scan(family, 1, times)
    if p.violated:
        return NMDResult(2, cp, p, f"not P-divisible (min output eigenvalue {p.min_value:.3g})")
    if p.passed:
        return NMDResult(1, cp, p, f"P-divisible but not CP-divisible (min Choi {cp.min_value:.3g})")
    return NMDResult(None, cp, p, f"inconclusive P scan (min {p.min_value:.3g})")
