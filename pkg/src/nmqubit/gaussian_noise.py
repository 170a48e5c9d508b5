"""Qubit driven by H + eta(t) dH with an Ornstein-Uhlenbeck eta(t).

The Langevin route averages unitary conditional evolutions over sampled OU
paths; the Fokker-Planck route propagates eta-resolved auxiliary states on a
grid and serves as a small-scale cross-check. hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, sparse

from .errors import InvalidArgumentError, StabilityError
from .linops import commutator_superop, is_hermitian, pauli, unvec, vec
from .numerics import _as_grid, rng_stream


@dataclass(frozen=True)
class OUParams:
    gamma: float
    D: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.D > 0):
            raise InvalidArgumentError("OU relaxation rate and diffusion must be positive")

    @property
    def stationary_variance(self) -> float:
        return self.D / (2 * self.gamma)

    def correlation(self, lag):
        """Stationary <eta(t) eta(t + lag)>."""
        return self.stationary_variance * np.exp(-self.gamma * np.abs(lag))


@dataclass(frozen=True)
class NoiseHamiltonianModel:
    H: np.ndarray
    dH: np.ndarray
    ou: OUParams
    eta0: float | None = None    # None: draw from the stationary law

    def __post_init__(self):
        h, dh = np.asarray(self.H, complex), np.asarray(self.dH, complex)
        if not (is_hermitian(h) and is_hermitian(dh)) or h.shape != dh.shape:
            raise InvalidArgumentError("H and dH must be Hermitian of equal shape")
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "dH", dh)

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def pure_dephasing_model(ou: OUParams, coupling: float = 1.0, eta0=None) -> NoiseHamiltonianModel:
    """H = 0, dH = coupling * sigma_z / 2."""
    return NoiseHamiltonianModel(np.zeros((2, 2)), 0.5 * coupling * pauli(3), ou, eta0)


def _ou_recursion(z: np.ndarray, params: OUParams, dt: float, eta0) -> np.ndarray:
    """Exact OU update applied to standard normals z[..., 0..n]; z[..., 0] seeds eta0."""
    a = math.exp(-params.gamma * dt)
    s = math.sqrt(params.stationary_variance * -math.expm1(-2 * params.gamma * dt))
    eta = np.empty_like(z)
    eta[..., 0] = z[..., 0] * math.sqrt(params.stationary_variance) if eta0 is None else eta0
    for k in range(1, z.shape[-1]):
        eta[..., k] = a * eta[..., k - 1] + s * z[..., k]
    return eta


def ou_path(params: OUParams, dt: float, n_steps: int, stream, eta0=None) -> np.ndarray:
    """OU values at t_k = k dt, k = 0..n_steps, by exact discretization.

    eta_{k+1} = eta_k e^{-g dt} + N(0, (D/2g)(1 - e^{-2g dt})). With eta0=None
    the start is drawn from the stationary law N(0, D/2g).
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    z = stream.gaussian(n_steps + 1)
    return _ou_recursion(z, params, dt, eta0)


def _path_normals(master_seed: int, n_paths: int, n_points: int, first_id: int = 0) -> np.ndarray:
    return np.stack([rng_stream(master_seed, first_id + i).gaussian(n_points) for i in range(n_paths)])


def ou_paths(params: OUParams, dt: float, n_steps: int, n_paths: int, master_seed: int,
             eta0=None) -> np.ndarray:
    """Path i equals ``ou_path(params, dt, n_steps, rng_stream(master_seed, i), eta0)``."""
    return _ou_recursion(_path_normals(master_seed, n_paths, n_steps + 1), params, dt, eta0)


def _step_unitaries(h, dh, eta_bar, dt):
    """exp(-i (H + eta dH) dt) for a batch of frozen eta values."""
    hs = h[None] + eta_bar[:, None, None] * dh[None]
    if h.shape == (2, 2):
        # H = a0 I + a.sigma  =>  U = e^{-i a0 dt} (cos|a|dt I - i sin|a|dt a.sigma/|a|)
        a0 = 0.5 * (hs[:, 0, 0] + hs[:, 1, 1]).real
        az = 0.5 * (hs[:, 0, 0] - hs[:, 1, 1]).real
        ax = hs[:, 1, 0].real
        ay = hs[:, 1, 0].imag
        norm = np.sqrt(ax ** 2 + ay ** 2 + az ** 2)
        c = np.cos(norm * dt)
        sinc = dt * np.sinc(norm * dt / np.pi)     # sin(|a| dt) / |a|
        u = np.empty_like(hs)
        u[:, 0, 0] = c - 1j * sinc * az
        u[:, 1, 1] = c + 1j * sinc * az
        u[:, 0, 1] = -1j * sinc * (ax - 1j * ay)
        u[:, 1, 0] = -1j * sinc * (ax + 1j * ay)
        return u * np.exp(-1j * a0 * dt)[:, None, None]
    w, v = np.linalg.eigh(hs)
    return (v * np.exp(-1j * w * dt)[:, None, :]) @ v.conj().transpose(0, 2, 1)


def _uniform_step(times) -> float:
    dts = np.diff(times)
    if dts.size == 0 or not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise InvalidArgumentError("stochastic solves need a uniform time grid with at least two points")
    return float(dts[0])


def stochastic_unitary_solve(model: NoiseHamiltonianModel, path, rho0, dt: float) -> np.ndarray:
    """Conditional states along one sampled path, shape (len(path), d, d).

    Each step applies the exact unitary of the Hamiltonian frozen at the
    midpoint value (eta_k + eta_{k+1}) / 2.
    """
    path = np.asarray(path, dtype=float)
    rho = np.asarray(rho0, dtype=complex)
    out = np.empty((path.size, *rho.shape), dtype=complex)
    out[0] = rho
    us = _step_unitaries(model.H, model.dH, 0.5 * (path[1:] + path[:-1]), dt)
    for k, u in enumerate(us):
        rho = u @ rho @ u.conj().T
        out[k + 1] = rho
    return out


@dataclass(frozen=True)
class NoiseEnsemble:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray        # complex; real/imag parts are standard errors of Re/Im
    purity: np.ndarray        # purity of the ensemble-mean state
    n_paths: int

    def coherence(self, i: int = 0, j: int = 1):
        return self.mean[:, i, j], self.stderr[:, i, j]


def ensemble_average(model: NoiseHamiltonianModel, rho0, times, n_paths: int, master_seed: int,
                     chunk: int = 20000) -> NoiseEnsemble:
    """Average of the conditional unitary evolution over n_paths OU realizations.

    Path i uses ``rng_stream(master_seed, i)`` and chunks are reduced in path
    order, so a fixed (seed, chunk) pair gives bit-identical output.
    """
    if n_paths < 1:
        raise InvalidArgumentError("need at least one path")
    times = _as_grid(times).points
    dt = _uniform_step(times)
    n_steps = times.size - 1
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    s1 = np.zeros((times.size, d, d), dtype=complex)
    s2r = np.zeros((times.size, d, d))
    s2i = np.zeros((times.size, d, d))
    for start in range(0, n_paths, chunk):
        m = min(chunk, n_paths - start)
        z = _path_normals(master_seed, m, n_steps + 1, first_id=start)
        eta = _ou_recursion(z, model.ou, dt, model.eta0)
        rho = np.broadcast_to(rho0, (m, d, d)).copy()
        for k in range(times.size):
            if k > 0:
                u = _step_unitaries(model.H, model.dH, 0.5 * (eta[:, k] + eta[:, k - 1]), dt)
                rho = u @ rho @ u.conj().transpose(0, 2, 1)
            s1[k] += rho.sum(axis=0)
            s2r[k] += (rho.real ** 2).sum(axis=0)
            s2i[k] += (rho.imag ** 2).sum(axis=0)
    mean = s1 / n_paths
    if n_paths > 1:
        vr = np.maximum(s2r - n_paths * mean.real ** 2, 0) / (n_paths - 1)
        vi = np.maximum(s2i - n_paths * mean.imag ** 2, 0) / (n_paths - 1)
        se = np.sqrt(vr / n_paths) + 1j * np.sqrt(vi / n_paths)
    else:
        se = np.zeros_like(mean)
    purity = np.real(np.einsum("tij,tji->t", mean, mean))
    return NoiseEnsemble(times, mean, se, purity, n_paths)


# -- oracles ----------------------------------------------------------------

def phase_variance(t, params: OUParams):
    """Var of int_0^t eta for a stationary OU process, in closed form."""
    x = params.gamma * np.asarray(t, dtype=float)
    return params.D * (x - 1 + np.exp(-x)) / params.gamma ** 3


def phase_variance_quadrature(t: float, params: OUParams) -> float:
    """Same quantity by double quadrature of the stationary correlation.

    The square is folded onto the triangle t2 < t1, where the integrand is smooth.
    """
    if t == 0:
        return 0.0
    val, _ = integrate.dblquad(lambda t2, t1: params.correlation(t1 - t2), 0, t, 0, lambda t1: t1,
                               epsabs=1e-13, epsrel=1e-12)
    return 2.0 * float(val)


def gaussian_dephasing_coherence(t, params: OUParams, coupling: float = 1.0, quadrature: bool = True):
    """Ensemble coherence factor exp(-coupling^2 Var / 2) for dH = coupling sigma_z / 2."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if quadrature:
        var = np.array([phase_variance_quadrature(float(s), params) for s in t])
    else:
        var = phase_variance(t, params)
    return np.exp(-0.5 * coupling ** 2 * var)


@dataclass(frozen=True)
class OUStatistics:
    variance: float
    variance_se: float
    lag_correlation: float
    lag_correlation_se: float


def ou_statistics(params: OUParams, dt: float, t_obs: float, lag: float, n_paths: int,
                  master_seed: int) -> OUStatistics:
    """Sample variance at t_obs and correlation at (t_obs, t_obs + lag) over stationary paths."""
    k0 = int(round(t_obs / dt))
    k1 = int(round((t_obs + lag) / dt))
    eta = ou_paths(params, dt, k1, n_paths, master_seed)
    a, b = eta[:, k0], eta[:, k1]
    var = float(np.var(a, ddof=1))
    var_se = var * math.sqrt(2.0 / (n_paths - 1))
    prod = a * b
    return OUStatistics(var, var_se, float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(n_paths)))


def ou_lag_correlations(params: OUParams, dt: float, lags, n_paths: int, master_seed: int):
    """Sample <eta(0) eta(lag)> over stationary paths; returns (estimates, standard errors)."""
    ks = np.rint(np.asarray(lags, dtype=float) / dt).astype(int)
    if np.any(ks < 0):
        raise InvalidArgumentError("lags must be non-negative")
    eta = ou_paths(params, dt, int(ks.max()), n_paths, master_seed)
    prods = eta[:, :1] * eta[:, ks]
    return prods.mean(axis=0), prods.std(axis=0, ddof=1) / math.sqrt(n_paths)


# -- Fokker-Planck grid -----------------------------------------------------

@dataclass(frozen=True)
class FokkerPlanckSolution:
    times: np.ndarray
    eta: np.ndarray
    P: np.ndarray         # (len(times), M) probability mass per cell
    rho: np.ndarray       # (len(times), d, d) system state, sum over cells


def _bernoulli(x):
    """x / (e^x - 1), with the removable singularity at 0 filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - 0.5 * x, safe / np.expm1(safe))


def _transport_matrix(eta: np.ndarray, params: OUParams) -> sparse.csr_matrix:
    """Finite-volume OU transport on cell masses with zero-flux walls.

    Face fluxes use exponential fitting (Scharfetter-Gummel): an upwind
    weighting that is exact for the local drift-diffusion balance, so the
    stationary Gaussian is reproduced to second order in the cell width.
    """
    m = eta.size
    de = eta[1] - eta[0]
    faces = 0.5 * (eta[1:] + eta[:-1])
    half_d = 0.5 * params.D
    pe = -params.gamma * faces * de / half_d
    # flux j -> j+1 = (half_d / de^2) [B(-pe) m_j - B(pe) m_{j+1}]
    a_left = half_d / de ** 2 * _bernoulli(-pe)
    a_right = half_d / de ** 2 * _bernoulli(pe)
    j = np.arange(m - 1)
    rows = np.concatenate([j, j + 1, j + 1, j])
    cols = np.concatenate([j, j, j + 1, j + 1])
    vals = np.concatenate([-a_left, a_left, -a_right, a_right])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, m))


def fokker_planck_grid_solve(model: NoiseHamiltonianModel, rho0, eta_grid, times,
                             dt: float | None = None) -> FokkerPlanckSolution:
    """Propagate eta-resolved states rho_eta(t) with classical RK4 steps.

    `eta_grid` holds uniformly spaced cell centres. The start is
    P_eta(0) rho0 with P_eta(0) the stationary Gaussian (or the cell nearest
    the model's fixed eta0). Raises StabilityError if `dt` exceeds the
    explicit stability bound.
    """
    eta = np.asarray(eta_grid, dtype=float)
    de = np.diff(eta)
    if eta.size < 3 or not np.allclose(de, de[0], rtol=1e-9, atol=0) or not np.isclose(eta[0], -eta[-1]):
        raise InvalidArgumentError("eta grid must be uniform and symmetric about 0")
    de = float(de[0])
    times = _as_grid(times).points
    ou = model.ou
    d = model.dim
    d2 = d * d
    m = eta.size

    trans = _transport_matrix(eta, ou)
    blocks = [commutator_superop(model.H + e * model.dH).matrix for e in eta]
    gen = sparse.kron(trans, sparse.identity(d2), format="csr") + sparse.block_diag(blocks, format="csr")

    spectral_bound = (2 * ou.D / de ** 2 + 2 * ou.gamma * np.abs(eta).max() / de
            + 2 * max(np.linalg.norm(model.H + e * model.dH, 2) for e in (eta[0], eta[-1])))
    dt_max = 2.5 / spectral_bound
    if dt is None:
        dt = 0.5 * dt_max
    elif dt > dt_max:
        raise StabilityError(f"dt={dt:.3g} exceeds the explicit stability bound {dt_max:.3g}; refine dt")

    if model.eta0 is None:
        p0 = np.exp(-0.5 * eta ** 2 / ou.stationary_variance)
    else:
        p0 = np.zeros(m)
        p0[int(np.argmin(np.abs(eta - model.eta0)))] = 1.0
    p0 /= p0.sum()
    y = np.kron(p0, vec(np.asarray(rho0, dtype=complex)))

    def f(x):
        return gen @ x

    ys = [y.copy()]
    t_now = times[0]
    for t_next in times[1:]:
        n_sub = max(1, int(math.ceil((t_next - t_now) / dt - 1e-12)))
        h = (t_next - t_now) / n_sub
        for _ in range(n_sub):
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys.append(y.copy())
        t_now = t_next
    ys = np.array(ys).reshape(len(times), m, d2)
    vid = vec(np.eye(d))
    P = np.real(ys @ vid)
    rho = np.stack([unvec(v, d) for v in ys.sum(axis=1)])
    return FokkerPlanckSolution(times, eta, P, rho)


def stationary_eta_grid(params: OUParams, n_cells: int = 121, n_sd: float = 6.0) -> np.ndarray:
    half = n_sd * math.sqrt(params.stationary_variance)
    return np.linspace(-half, half, n_cells)
