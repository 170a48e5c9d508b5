"""Quantum-classical hybrid dynamics driven by a classical Markov environment.

The system state is split into unnormalized conditional states rho_R, one per
classical state R, evolving as

    d rho_R/dt = -i[H_R, rho_R] + L_R[rho_R]
                 - sum_R' g_{R'R} rho_R + sum_R' g_{RR'} E_{RR'}[rho_R'],

with g_{RR'} the rate of the classical transition R' -> R and E_{RR'} the CP
trace-preserving map applied to the system when it happens. The traces
P_R = Tr rho_R obey the classical master equation for the rates alone, so
the environment never feels the system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import expm

from .errors import InvalidArgumentError, UnsupportedModelError
from .linops import (Superoperator, commutator_superop, conjugation_superop, dissipator_superop,
                     identity_superop, is_hermitian, kraus_of, min_eigenvalue, choi_of, pauli,
                     unvec, vec)
from .numerics import TimeGrid, _as_grid, draw_exponential, integrate_ode, rng_stream

HYBRID_ODE_TOL = 1e-12


@dataclass(frozen=True)
class HybridModel:
    """Classical states 0..n-1 with rates, collision maps and conditional generators.

    ``rates[R, Rp]`` is the rate of the transition Rp -> R. A transition
    without an entry in ``collisions`` leaves the system untouched.
    """

    rates: np.ndarray
    collisions: Mapping[tuple[int, int], Superoperator] = field(default_factory=dict)
    hamiltonians: Mapping[int, np.ndarray] = field(default_factory=dict)
    dissipators: Mapping[int, Superoperator] = field(default_factory=dict)
    dim: int = 2

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        if rates.ndim != 2 or rates.shape[0] != rates.shape[1]:
            raise InvalidArgumentError("rates must be a square matrix")
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise InvalidArgumentError("rates must be finite and non-negative")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        n, d = rates.shape[0], self.dim
        for (r, rp), e in self.collisions.items():
            if not (0 <= r < n and 0 <= rp < n):
                raise InvalidArgumentError(f"collision index {(r, rp)} out of range")
            if e.dim != d:
                raise InvalidArgumentError("collision map has the wrong dimension")
            if not e.is_trace_preserving():
                raise InvalidArgumentError(f"collision map {(r, rp)} is not trace preserving")
            if min_eigenvalue(choi_of(e)) < -1e-10:
                raise InvalidArgumentError(f"collision map {(r, rp)} is not completely positive")
        for r, h in self.hamiltonians.items():
            if not 0 <= r < n or not is_hermitian(h) or np.shape(h) != (d, d):
                raise InvalidArgumentError(f"conditional Hamiltonian {r} is invalid")
        vid = vec(np.eye(d))
        for r, lgen in self.dissipators.items():
            if not 0 <= r < n or lgen.dim != d:
                raise InvalidArgumentError(f"conditional dissipator {r} is invalid")
            if not np.allclose(vid @ lgen.matrix, 0, atol=1e-10):
                raise InvalidArgumentError(f"conditional dissipator {r} does not preserve trace")
        object.__setattr__(self, "collisions", dict(self.collisions))
        object.__setattr__(self, "hamiltonians", {k: np.asarray(v, complex) for k, v in self.hamiltonians.items()})
        object.__setattr__(self, "dissipators", dict(self.dissipators))

    @property
    def n_states(self) -> int:
        return self.rates.shape[0]

    def collision(self, r: int, rp: int) -> Superoperator:
        return self.collisions.get((r, rp)) or identity_superop(self.dim)

    def exit_rates(self) -> np.ndarray:
        """Total rate out of each state, sum_R' g_{R'R}."""
        return self.rates.sum(axis=0)

    def conditional_generator(self, r: int) -> np.ndarray:
        d2 = self.dim ** 2
        g = np.zeros((d2, d2), dtype=complex)
        if r in self.hamiltonians:
            g += commutator_superop(self.hamiltonians[r]).matrix
        if r in self.dissipators:
            g += self.dissipators[r].matrix
        return g

    def classical_generator(self) -> np.ndarray:
        q = self.rates.copy()
        q[np.diag_indices_from(q)] -= self.exit_rates()
        return q

    def generator(self) -> np.ndarray:
        """Generator of the stacked vector (vec rho_0, ..., vec rho_{n-1})."""
        n, d2 = self.n_states, self.dim ** 2
        big = np.zeros((n * d2, n * d2), dtype=complex)
        exits = self.exit_rates()
        for r in range(n):
            blk = slice(r * d2, (r + 1) * d2)
            big[blk, blk] += self.conditional_generator(r) - exits[r] * np.eye(d2)
            for rp in range(n):
                if self.rates[r, rp] > 0:
                    big[blk, rp * d2:(rp + 1) * d2] += self.rates[r, rp] * self.collision(r, rp).matrix
        return big


def _probability_vector(p0, n):
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (n,) or np.any(p0 < 0) or abs(p0.sum() - 1) > 1e-12:
        raise InvalidArgumentError("initial populations must be a probability vector over the classical states")
    return p0


def _default_p0(model, p0):
    if p0 is None:
        p0 = np.zeros(model.n_states)
        p0[0] = 1.0
    return _probability_vector(p0, model.n_states)


def classical_master_solve(model: HybridModel, p0, grid, tol: float = HYBRID_ODE_TOL) -> np.ndarray:
    """Populations P_R(t) on `grid`, shape (len(grid), n_states)."""
    p0 = _probability_vector(p0, model.n_states)
    q = model.classical_generator()
    return integrate_ode(lambda t, p: q @ p, p0, grid, tol=tol)


@dataclass(frozen=True)
class HybridSolution:
    times: np.ndarray
    conditional: np.ndarray   # (len(times), n_states, d, d)

    @property
    def rho(self) -> np.ndarray:
        return self.conditional.sum(axis=1)

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.trace(self.conditional, axis1=2, axis2=3))


def lindblad_rate_solve(model: HybridModel, rho0, p0=None, grid=None,
                        tol: float = HYBRID_ODE_TOL) -> HybridSolution:
    """Integrate the conditional states from rho_R(0) = P_R(0) rho0."""
    p0 = _default_p0(model, p0)
    grid = _as_grid(grid)
    rho0 = np.asarray(rho0, dtype=complex)
    d2 = model.dim ** 2
    y0 = np.concatenate([p * vec(rho0) for p in p0])
    big = model.generator()
    ys = integrate_ode(lambda t, y: big @ y, y0, grid, tol=tol)
    cond = np.stack([[unvec(y[r * d2:(r + 1) * d2], model.dim) for r in range(model.n_states)] for y in ys])
    return HybridSolution(times=grid.points, conditional=cond)


# -- model builders ---------------------------------------------------------

def _check_even(n):
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise InvalidArgumentError(f"number of collisions must be an even integer >= 2, got {n!r}")


def chain_model(rates_along_chain, collision: Superoperator, dim: int = 2) -> HybridModel:
    """Unidirectional chain 0 -> 1 -> ... with the same collision on every link."""
    k = len(rates_along_chain)
    rates = np.zeros((k + 1, k + 1))
    for i, g in enumerate(rates_along_chain):
        rates[i + 1, i] = g
    return HybridModel(rates, collisions={(i + 1, i): collision for i in range(k)}, dim=dim)


def dephasing_chain_model(gamma: float, n: int = 2) -> HybridModel:
    """(n+1)-state chain with uniform rate gamma; every jump applies sigma_z conjugation."""
    _check_even(n)
    if not gamma > 0:
        raise InvalidArgumentError("gamma must be positive")
    return chain_model([gamma] * n, conjugation_superop(pauli(3)))


def mixture_model(gamma: float):
    """Three-state sigma_z chain plus an uncoupled state with Markovian sigma_x dephasing.

    Start it with populations ``mixture_populations(r)``.
    """
    base = dephasing_chain_model(gamma, 2)
    rates = np.zeros((4, 4))
    rates[:3, :3] = base.rates
    lx = Superoperator(0.5 * gamma * dissipator_superop(pauli(1)).matrix)
    return HybridModel(rates, collisions=base.collisions, dissipators={3: lx})


def mixture_populations(r: float) -> np.ndarray:
    if not 0 <= r <= 1:
        raise InvalidArgumentError("r must lie in [0, 1]")
    return np.array([1 - r, 0.0, 0.0, r])


def random_model(seed: int, n_states: int = 4, dim: int = 2, density: float = 0.6) -> HybridModel:
    """Random member of the model class, for property tests."""
    rng = np.random.default_rng(seed)
    rates = rng.uniform(0.1, 2.0, (n_states, n_states)) * (rng.random((n_states, n_states)) < density)
    np.fill_diagonal(rates, 0.0)
    collisions = {}
    for r, rp in zip(*np.nonzero(rates)):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        q, _ = np.linalg.qr(a)
        collisions[(int(r), int(rp))] = conjugation_superop(q)
    hams, diss = {}, {}
    for r in range(n_states):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        hams[r] = 0.5 * (a + a.conj().T)
        op = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        diss[r] = Superoperator(rng.uniform(0.05, 0.5) * dissipator_superop(op).matrix)
    return HybridModel(rates, collisions, hams, diss, dim=dim)


# -- bipartite embedding ----------------------------------------------------

@dataclass(frozen=True)
class BipartiteEmbedding:
    """Lindblad generator on system (x) ancilla, system factor first."""

    generator: Superoperator
    jump_operators: list          # unscaled V's
    jump_rates: list              # rate multiplying each D[V]
    hamiltonian: np.ndarray
    dim: int
    n_ancilla: int

    def initial_state(self, rho0, p0=None) -> np.ndarray:
        p0 = np.eye(self.n_ancilla)[0] if p0 is None else np.asarray(p0, float)
        return np.kron(np.asarray(rho0, complex), np.diag(p0))

    def solve(self, rho0, p0=None, grid=None, tol: float = HYBRID_ODE_TOL) -> np.ndarray:
        """rho_sa(t) on `grid`, shape (len(grid), d*n, d*n)."""
        x0 = vec(self.initial_state(rho0, p0))
        g = self.generator.matrix
        ys = integrate_ode(lambda t, y: g @ y, x0, grid, tol=tol)
        return np.stack([unvec(y, self.dim * self.n_ancilla) for y in ys])

    def ancilla_block(self, rho_sa: np.ndarray, i: int) -> np.ndarray:
        """<i| rho_sa |i>, the conditional system state for ancilla level i."""
        d, n = self.dim, self.n_ancilla
        return rho_sa.reshape(d, n, d, n)[:, i, :, i]

    def system_state(self, rho_sa: np.ndarray) -> np.ndarray:
        d, n = self.dim, self.n_ancilla
        return np.trace(rho_sa.reshape(d, n, d, n), axis1=1, axis2=3)


def _fix_phase(k: np.ndarray) -> np.ndarray:
    flat = k.ravel()
    idx = np.flatnonzero(np.abs(flat) > 1e-12)[0]
    return k * (abs(flat[idx]) / flat[idx])


def bipartite_embedding(model: HybridModel) -> BipartiteEmbedding:
    """Embed a unidirectional chain model into a Lindblad equation with a quantum ancilla.

    Each link i-1 -> i with rate g and collision Kraus operators {K} gives jump
    operators K (x) |i><i-1| at rate g; conditional Hamiltonians become
    sum_R H_R (x) |R><R|.
    """
    n, d = model.n_states, model.dim
    off_chain = model.rates.copy()
    off_chain[np.arange(1, n), np.arange(n - 1)] = 0.0
    if np.any(off_chain > 0):
        raise UnsupportedModelError("bipartite embedding supports unidirectional chains only")
    if any(np.any(lg.matrix != 0) for lg in model.dissipators.values()):
        raise UnsupportedModelError("bipartite embedding does not support conditional dissipators")
    ops, rates = [], []
    for i in range(1, n):
        g = model.rates[i, i - 1]
        if g == 0:
            continue
        ket_bra = np.zeros((n, n))
        ket_bra[i, i - 1] = 1.0
        for k in kraus_of(model.collision(i, i - 1)):
            ops.append(np.kron(_fix_phase(k), ket_bra))
            rates.append(float(g))
    ham = np.zeros((d * n, d * n), dtype=complex)
    for r, h in model.hamiltonians.items():
        proj = np.zeros((n, n))
        proj[r, r] = 1.0
        ham += np.kron(h, proj)
    gen = commutator_superop(ham).matrix
    for v, g in zip(ops, rates):
        gen = gen + g * dissipator_superop(v).matrix
    return BipartiteEmbedding(Superoperator(gen), ops, rates, ham, d, n)


# -- stochastic collisional trajectories ------------------------------------

@dataclass(frozen=True)
class TrajectoryRecord:
    master_seed: int
    stream_id: int
    jump_times: tuple
    states: tuple             # classical states visited, starting with the initial one
    final_state: np.ndarray   # conditional system state at the last grid time

    def jumps_by(self, t: float) -> int:
        return int(np.searchsorted(self.jump_times, t, side="right"))


@dataclass(frozen=True)
class TrajectoryEnsemble:
    times: np.ndarray
    mean: np.ndarray          # (len(times), d, d)
    stderr: np.ndarray        # complex: real/imag parts are standard errors of Re/Im
    n_traj: int
    records: list

    def coherence(self, i: int = 0, j: int = 1):
        return self.mean[:, i, j], self.stderr[:, i, j]

    def jump_count_fraction(self, t: float, k: int) -> float:
        return float(np.mean([rec.jumps_by(t) == k for rec in self.records]))


def _propagate(gen: np.ndarray, vec_state: np.ndarray, dts: np.ndarray) -> np.ndarray:
    if not np.any(gen):
        return np.broadcast_to(vec_state, (dts.size, vec_state.size)).copy()
    props = expm(gen[None, :, :] * dts[:, None, None])
    return props @ vec_state


def simulate_trajectories(model: HybridModel, rho0, grid, n_traj: int, master_seed: int,
                          p0=None, keep_records: bool = True) -> TrajectoryEnsemble:
    """Gillespie unraveling of the hybrid dynamics.

    Trajectory i draws from ``rng_stream(master_seed, i)`` only, and the
    ensemble sums are accumulated in trajectory order, so results are
    reproducible for a fixed seed.
    """
    if n_traj < 1:
        raise InvalidArgumentError("need at least one trajectory")
    grid = _as_grid(grid)
    times = grid.points
    t_end = times[-1]
    p0 = _default_p0(model, p0)
    cum_p0 = np.cumsum(p0)
    d, d2 = model.dim, model.dim ** 2
    v0 = vec(np.asarray(rho0, dtype=complex))
    gens = [model.conditional_generator(r) for r in range(model.n_states)]
    exits = model.exit_rates()
    cum_rates = [np.cumsum(model.rates[:, r]) for r in range(model.n_states)]
    colls = {key: e.matrix for key, e in model.collisions.items()}

    s1 = np.zeros((times.size, d2), dtype=complex)
    s2_re = np.zeros((times.size, d2))
    s2_im = np.zeros((times.size, d2))
    records = []
    traj = np.empty((times.size, d2), dtype=complex)
    for i in range(n_traj):
        stream = rng_stream(master_seed, i)
        r = int(min(np.searchsorted(cum_p0, stream.uniform() * cum_p0[-1], side="right"), model.n_states - 1))
        t, v = 0.0, v0.copy()
        jump_times, visited = [], [r]
        k = 0  # next grid index to fill
        while True:
            q = exits[r]
            t_next = t + float(draw_exponential(stream, q)) if q > 0 else np.inf
            stop = min(t_next, t_end)
            k_end = int(np.searchsorted(times, stop, side="right")) if t_next <= t_end else times.size
            if k_end > k:
                traj[k:k_end] = _propagate(gens[r], v, times[k:k_end] - t)
                k = k_end
            if t_next > t_end:
                break
            v = _propagate(gens[r], v, np.array([t_next - t]))[0]
            u = stream.uniform() * q
            r_new = int(min(np.searchsorted(cum_rates[r], u, side="right"), model.n_states - 1))
            m = colls.get((r_new, r))
            if m is not None:
                v = m @ v
            t, r = t_next, r_new
            jump_times.append(t)
            visited.append(r)
        s1 += traj
        s2_re += traj.real ** 2
        s2_im += traj.imag ** 2
        if keep_records:
            records.append(TrajectoryRecord(master_seed, i, tuple(jump_times), tuple(visited),
                                            unvec(traj[-1].copy(), d)))
    mean = s1 / n_traj
    if n_traj > 1:
        var_re = np.maximum(s2_re - n_traj * mean.real ** 2, 0) / (n_traj - 1)
        var_im = np.maximum(s2_im - n_traj * mean.imag ** 2, 0) / (n_traj - 1)
        se = np.sqrt(var_re / n_traj) + 1j * np.sqrt(var_im / n_traj)
    else:
        se = np.zeros_like(mean)
    return TrajectoryEnsemble(
        times=times,
        mean=np.stack([unvec(m, d) for m in mean]),
        stderr=np.stack([unvec(s, d) for s in se]),
        n_traj=n_traj,
        records=records,
    )


def spectator_check(model: HybridModel, rho_a, rho_b, grid, p0=None) -> float:
    """Largest difference between the classical populations under two initial system states."""
    pa = lindblad_rate_solve(model, rho_a, p0, grid).populations
    pb = lindblad_rate_solve(model, rho_b, p0, grid).populations
    return float(np.max(np.abs(pa - pb)))


__all__ = [
    "HybridModel", "HybridSolution", "BipartiteEmbedding", "TrajectoryRecord", "TrajectoryEnsemble",
    "classical_master_solve", "lindblad_rate_solve", "chain_model", "dephasing_chain_model",
    "mixture_model", "mixture_populations", "random_model", "bipartite_embedding",
    "simulate_trajectories", "spectator_check", "TimeGrid",
]
