"""Acceptance checks shared by the ``validate`` command and the test suite.

Each check returns a :class:`CriterionResult`. ``scale`` multiplies every
numerical tolerance (statistical bands included); values below 1 tighten the
checks and 0 makes any inexact quantity fail, which is how the CLI's
tolerance-corruption test mode is exercised.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from . import dephasing, gaussian_noise, hybrid, measures, random_unitary
from .linops import choi_of, min_eigenvalue, pauli
from .numerics import integrate_ode, quadrature, volterra_solve

PLUS = 0.5 * np.ones((2, 2), dtype=complex)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    checks: dict = field(default_factory=dict)   # label -> (ok, detail)
    runtime: float = 0.0
    budget: float = 0.0

    @property
    def within_budget(self) -> bool:
        return self.runtime <= self.budget

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [k for k, (ok, _) in self.checks.items() if not ok]
        extra = f" failed: {', '.join(failed)}" if failed else ""
        return (f"criterion {self.number:2d} {status} {self.name} "
                f"runtime={self.runtime:.2f}s budget={self.budget:g}s{extra}")


class _Checks:
    def __init__(self):
        self.items = {}

    def add(self, label: str, ok, detail: str = ""):
        self.items[label] = (bool(ok), detail)

    @property
    def ok(self) -> bool:
        return all(ok for ok, _ in self.items.values())


def _run(number: int, name: str, budget: float, body: Callable[[_Checks], None]) -> CriterionResult:
    checks = _Checks()
    t0 = time.perf_counter()
    body(checks)
    runtime = time.perf_counter() - t0
    checks.add("runtime", runtime <= budget, f"{runtime:.2f}s of {budget:g}s")
    return CriterionResult(number, name, checks.ok, checks.items, runtime, budget)


# -- 1..3: closed-form rates -------------------------------------------------

def criterion_1(scale: float = 1.0, gamma: float = 1.0) -> CriterionResult:
    def body(c):
        horizon = 40.0 / gamma
        total = quadrature(lambda s: dephasing.rate_gamma(s, gamma), 0.0, horizon, tol=1e-13,
                           points=[1.0 / gamma, 5.0 / gamma])
        c.add("Gamma(horizon) by quadrature", abs(total) < 1e-10 * scale, f"{total:.3e}")
        ts = np.linspace(0.0, horizon, 1000)
        steps = [quadrature(lambda s: dephasing.rate_gamma(s, gamma), a, b, tol=1e-14)
                 for a, b in zip(ts[:-1], ts[1:])]
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        err = float(np.max(np.abs(cum - dephasing.big_gamma(ts, gamma))))
        c.add("closed form vs quadrature", err <= 1e-8 * scale, f"{err:.3e}")
    return _run(1, "maximality: Gamma vanishes at long times", 1.0, body)


def criterion_2(scale: float = 1.0, gamma: float = 1.0) -> CriterionResult:
    def body(c):
        root = bisect(lambda s: dephasing.rate_gamma(s, gamma), 0.5 / gamma, 2.0 / gamma, xtol=1e-13)
        c.add("zero crossing at gamma t = 1", abs(gamma * root - 1) <= 1e-8 * scale, f"{gamma * root:.12f}")
        oracle = math.log(1 / (1 - 2 * math.exp(-1)))
        closed = dephasing.big_gamma(root, gamma)
        quad = quadrature(lambda s: dephasing.rate_gamma(s, gamma), 0.0, root, tol=1e-13)
        ts = np.linspace(0.0, 10.0 / gamma, 10001)
        grid_max = float(np.max(dephasing.big_gamma(ts, gamma)))
        c.add("max Gamma (closed form)", abs(closed - oracle) <= 1e-6 * scale, f"{closed:.9f}")
        c.add("max Gamma (quadrature)", abs(quad - oracle) <= 1e-6 * scale, f"{quad:.9f}")
        c.add("grid maximum not above peak", grid_max <= oracle + 1e-12, f"{grid_max:.9f}")
    return _run(2, "rate gamma(t) and its integral", 1.0, body)


def criterion_3(scale: float = 1.0, gamma: float = 1.0) -> CriterionResult:
    def body(c):
        g1, g2, g3 = random_unitary.gamma_integrals(lambda s: random_unitary.example_rates(s, gamma),
                                                    horizon=40.0 / gamma)
        c.add("Gamma_1(inf) = ln 2", abs(g1 - math.log(2)) <= 1e-6 * scale, f"{g1:.10f}")
        c.add("Gamma_2(inf) = 0", abs(g2) <= 1e-6 * scale, f"{g2:.3e}")
        c.add("Gamma_3(inf) = 0", abs(g3) <= 1e-6 * scale, f"{g3:.3e}")
        after = np.linspace(1.0, 20.0, 400)[1:] / gamma
        before = np.linspace(0.0, 1.0, 100)[:-1] / gamma
        s_after = random_unitary.example_rates(after, gamma)[1:].sum(axis=0)
        s_before = random_unitary.example_rates(before, gamma)[1:].sum(axis=0)
        c.add("gamma_2 + gamma_3 < 0 for gamma t > 1", np.all(s_after < 0), f"max {s_after.max():.3e}")
        c.add("gamma_2 + gamma_3 > 0 for gamma t < 1", np.all(s_before > 0), f"min {s_before.min():.3e}")
    return _run(3, "random-unitary integrated rates", 1.0, body)


# -- 4: measures ---------------------------------------------------------------

def criterion_4(scale: float = 1.0, gamma: float = 1.0) -> CriterionResult:
    def body(c):
        sx = [pauli(1)]
        for label, fam in (("dephasing", measures.dephasing_family(gamma)),
                           ("random-unitary", measures.random_unitary_family(gamma))):
            m = measures.measure_Mk(fam, 1, sx, horizon=40.0 / gamma).M
            c.add(f"M1 {label}", abs(m - 1) <= 1e-3 * scale, f"{m:.8f}")
        m = measures.measure_Mk(measures.markov_x_family(gamma), 1, horizon=40.0 / gamma).M
        c.add("M1 markov-x", abs(m) <= 1e-12 * scale, f"{m:.3e}")
        for r in (0.0, 0.25, 0.5, 0.75):
            m = measures.measure_Mk(measures.mixture_family(r, gamma), 1, sx, horizon=40.0 / gamma).M
            c.add(f"M1 mixture r={r:g}", abs(m - 1) <= 1e-3 * scale, f"{m:.8f}")
        nmd = measures.nmd_classify(measures.mixture_family(1.0, gamma), horizon=10.0 / gamma)
        c.add("NMD mixture r=1", nmd.degree == 0, nmd.diagnostics)
    return _run(4, "measure saturation", 30.0, body)


# -- 5: representation equivalence ---------------------------------------------

def representation_states(gamma: float = 1.0, rho0=PLUS, t_end: float = 10.0, n_points: int = 101,
                          volterra_step: float = 1e-3) -> dict:
    """System state on a common grid from each of the five descriptions."""
    ts = np.linspace(0.0, t_end / gamma, n_points)
    rho0 = np.asarray(rho0, dtype=complex)
    out = {"closed form": np.stack([dephasing.dephasing_map(t, gamma).apply(rho0) for t in ts])}

    dz = dephasing.sigma_z_dissipator().matrix
    local = integrate_ode(lambda t, y: 0.5 * dephasing.rate_gamma(t, gamma) * (dz @ y),
                          rho0.reshape(-1, order="F"), ts, tol=1e-12)
    out["local master equation"] = np.stack([y.reshape(2, 2, order="F") for y in local])

    h = volterra_step / gamma
    vt, vs = volterra_solve(dephasing.kernel(gamma), dephasing.sigma_z_dissipator(), rho0, h, ts[-1])
    stride = int(round((ts[1] - ts[0]) / h))
    out["Volterra"] = vs[::stride][:n_points]

    model = hybrid.dephasing_chain_model(gamma, 2)
    out["rate equation"] = hybrid.lindblad_rate_solve(model, rho0, grid=ts).rho
    emb = hybrid.bipartite_embedding(model)
    out["bipartite"] = np.stack([emb.system_state(x) for x in emb.solve(rho0, grid=ts)])
    return out


def criterion_5(scale: float = 1.0, gamma: float = 1.0) -> CriterionResult:
    def body(c):
        states = representation_states(gamma)
        names = list(states)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                err = float(np.max(np.abs(states[a] - states[b])))
                tol = 1e-4 if "Volterra" in (a, b) else 1e-8
                c.add(f"{a} vs {b}", err <= tol * scale, f"{err:.2e}")
    return _run(5, "representation equivalence", 10.0, body)


# -- 6: Monte Carlo --------------------------------------------------------------

def poisson_chain_probability(k: int, t: float, gamma: float, n: int) -> float:
    """P(k jumps by t) on an n-link chain with uniform rate gamma."""
    if k < n:
        return math.exp(-gamma * t) * (gamma * t) ** k / math.factorial(k)
    return 1.0 - sum(poisson_chain_probability(j, t, gamma, n) for j in range(n))


def criterion_6(scale: float = 1.0, gamma: float = 1.0, n_traj: int = 100_000, seed: int = 42) -> CriterionResult:
    def body(c):
        ts = np.linspace(0.0, 10.0 / gamma, 21)
        model = hybrid.dephasing_chain_model(gamma, 2)
        ens = hybrid.simulate_trajectories(model, PLUS, ts, n_traj, seed)
        coh, se = ens.coherence(0, 1)
        exact = 0.5 * dephasing.coherence_factor(ts, gamma)
        z = np.abs(coh[1:].real - exact[1:]) <= 3 * se[1:].real * scale
        c.add("coherence within 3 SE", z.sum() >= 19, f"{int(z.sum())}/20 checkpoints")
        bad = []
        for t in (0.5, 1.0, 2.0, 5.0):
            for k in range(3):
                p = poisson_chain_probability(k, t / gamma, gamma, 2)
                f = ens.jump_count_fraction(t / gamma, k)
                sig = math.sqrt(p * (1 - p) / n_traj)
                if abs(f - p) > 3 * sig * scale:
                    bad.append(f"t={t:g},k={k}")
        c.add("jump counts within 3 sigma", not bad, ", ".join(bad) or "12/12")
    return _run(6, "Monte Carlo consistency", 60.0, body)


# -- 7: recoherence ---------------------------------------------------------------

def criterion_7(scale: float = 1.0, gamma: float = 1.0) -> CriterionResult:
    def body(c):
        for n in (2, 10, 20):
            v = dephasing.coherence_cn(40.0 / gamma, n, gamma)
            c.add(f"c_{n}(40) = 1", abs(v - 1) <= 1e-6 * scale, f"1 - c = {1 - v:.3e}")
        ts = np.linspace(0.0, 40.0 / gamma, 401)
        m10 = float(np.min(dephasing.coherence_cn(ts, 10, gamma)))
        c.add("min c_10 < 0.05", m10 < 0.05, f"{m10:.4f}")
        ts = np.linspace(0.0, 3.0 / gamma, 61)
        dev = float(np.max(np.abs(dephasing.coherence_cn(ts, 200, gamma) - np.exp(-2 * gamma * ts))))
        c.add("c_200 Markov limit", dev <= 0.01 * scale, f"{dev:.3e}")
    return _run(7, "recoherence family", 10.0, body)


# -- 8: Laplace kernels -------------------------------------------------------------

def criterion_8(scale: float = 1.0, gamma: float = 1.0) -> CriterionResult:
    def body(c):
        zs = gamma * np.logspace(-2, 2, 20)
        rel, total, side = 0.0, 0.0, 0.0
        for z in zs:
            kern = random_unitary.memory_kernels_laplace(random_unitary.dephasing_probs_laplace(z, gamma), z)
            target = 2 * z ** 2 * gamma / (z ** 2 + gamma ** 2)
            rel = max(rel, abs(kern.k[3] - target) / abs(target))
            total = max(total, abs(kern.k.sum()) / max(1.0, float(np.abs(kern.k).max())))
            side = max(side, float(np.abs(kern.k[1:3]).max()))
        c.add("k_3(z) closed form", rel <= 1e-10 * scale, f"max rel {rel:.2e}")
        c.add("k_1 = k_2 = 0", side <= 1e-12 * scale, f"{side:.2e}")
        c.add("sum of kernels vanishes", total <= 1e-12 * scale, f"{total:.2e}")
    return _run(8, "Laplace-domain kernel identity", 1.0, body)


# -- 9: spectator environment ---------------------------------------------------------

def criterion_9(scale: float = 1.0, seed: int = 42) -> CriterionResult:
    def body(c):
        up = np.diag([1.0, 0.0]).astype(complex)
        worst = 0.0
        for i in range(5):
            model = hybrid.random_model(seed + i, n_states=4)
            p0 = np.full(4, 0.25)
            worst = max(worst, hybrid.spectator_check(model, up, PLUS, np.linspace(0, 5, 51), p0))
        c.add("discrete environment", worst <= 1e-10 * scale, f"{worst:.2e}")
        ou = gaussian_noise.OUParams(1.0, 1.0)
        model = gaussian_noise.NoiseHamiltonianModel(pauli(1), 0.5 * pauli(3), ou)
        eta = gaussian_noise.stationary_eta_grid(ou, n_cells=41)
        ts = np.linspace(0.0, 2.0, 11)
        pa = gaussian_noise.fokker_planck_grid_solve(model, up, eta, ts).P
        pb = gaussian_noise.fokker_planck_grid_solve(model, PLUS, eta, ts).P
        diff = float(np.max(np.abs(pa - pb)))
        c.add("continuous environment", diff <= 1e-10 * scale, f"{diff:.2e}")
    return _run(9, "spectator environment", 10.0, body)


# -- 10: OU statistics ----------------------------------------------------------------

def criterion_10(scale: float = 1.0, gamma: float = 1.0, diffusion: float = 1.0, n_paths: int = 100_000,
                 seed: int = 42) -> CriterionResult:
    def body(c):
        ou = gaussian_noise.OUParams(gamma, diffusion)
        st = gaussian_noise.ou_statistics(ou, 0.01 / gamma, 2.0 / gamma, 1.0 / gamma, n_paths, seed)
        var = ou.stationary_variance
        corr = var * math.exp(-1)
        c.add("stationary variance", abs(st.variance - var) <= 3 * st.variance_se * scale,
              f"{st.variance:.5f} +- {st.variance_se:.5f} vs {var:.5f}")
        c.add("lag correlation", abs(st.lag_correlation - corr) <= 3 * st.lag_correlation_se * scale,
              f"{st.lag_correlation:.5f} +- {st.lag_correlation_se:.5f} vs {corr:.5f}")
        ts = np.linspace(0.0, 5.0 / gamma, 101)
        ens = gaussian_noise.ensemble_average(gaussian_noise.pure_dephasing_model(ou), PLUS, ts,
                                              n_paths, seed + 1)
        coh, se = ens.coherence(0, 1)
        idx = np.arange(10, 101, 10)
        oracle = 0.5 * gaussian_noise.gaussian_dephasing_coherence(ts[idx], ou)
        ok = np.abs(coh[idx].real - oracle) <= 3 * se[idx].real * scale
        c.add("ensemble coherence vs cumulant oracle", np.all(ok), f"{int(ok.sum())}/10 checkpoints")
    return _run(10, "Ornstein-Uhlenbeck statistics", 90.0, body)


# -- 11: divisibility ------------------------------------------------------------------

def criterion_11(scale: float = 1.0, gamma: float = 1.0) -> CriterionResult:
    def body(c):
        fam = measures.dephasing_family(gamma)
        ts = np.linspace(0.0, 10.0 / gamma, 41)
        scan = measures.divisibility_scan(fam, 2, ts)
        g = dephasing.big_gamma(ts, gamma)
        growth = g[:, None] < g[None, :] - 1e-12
        growth &= np.tril(np.ones_like(growth), -1).astype(bool)
        neg = float(np.nanmin(np.where(growth, scan.min_eig, np.nan)))
        c.add("V_{t,s} Choi negativity", neg <= measures.VIOLATION_THRESHOLD, f"{neg:.3e}")
        worst = min(min_eigenvalue(choi_of(fam(t))) for t in np.linspace(0.0, 10.0 / gamma, 1000))
        c.add("Lambda_t completely positive", worst >= -1e-10 * scale, f"{worst:.3e}")
    return _run(11, "divisibility scans", 10.0, body)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def run_all(scale: float = 1.0, seed: int = 42, only=None, echo: Callable[[str], None] | None = None):
    """Run the criteria in order; returns the list of results."""
    results = []
    for i, fn in CRITERIA.items():
        if only and i not in only:
            continue
        kwargs = {"seed": seed} if "seed" in fn.__code__.co_varnames else {}
        res = fn(scale=scale, **kwargs)
        results.append(res)
        if echo is not None:
            echo(res.summary())
    return results
