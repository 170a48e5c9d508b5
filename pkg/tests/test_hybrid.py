import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmqubit import dephasing, hybrid
from nmqubit import random_unitary as ru
from nmqubit.errors import InvalidArgumentError, UnsupportedModelError
from nmqubit.linops import Superoperator, conjugation_superop, identity_superop, pauli, vec

from conftest import random_density

SZ = conjugation_superop(pauli(3))


def test_three_state_populations():
    model = hybrid.dephasing_chain_model(1.0, 2)
    ts = np.linspace(0, 10, 51)
    p = hybrid.classical_master_solve(model, [1, 0, 0], ts)
    e = np.exp(-ts)
    assert np.max(np.abs(p - np.stack([e, ts * e, 1 - (1 + ts) * e], axis=1))) <= 1e-10
    assert np.allclose(p[:, 1], ru.dephasing_probs(ts)[3], atol=1e-10)


def test_zero_rates_keep_populations():
    model = hybrid.HybridModel(np.zeros((3, 3)))
    p = hybrid.classical_master_solve(model, [0.2, 0.3, 0.5], np.linspace(0, 4, 5))
    assert np.allclose(p, [0.2, 0.3, 0.5])


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        hybrid.HybridModel(np.array([[0, -1.0], [1.0, 0]]))
    with pytest.raises(InvalidArgumentError):
        hybrid.HybridModel(np.ones((2, 3)))
    not_tp = Superoperator(0.5 * np.eye(4))
    with pytest.raises(InvalidArgumentError):
        hybrid.HybridModel(np.array([[0, 1.0], [0, 0]]), collisions={(0, 1): not_tp})
    transpose = Superoperator(np.eye(4)[[0, 2, 1, 3]])   # positive and trace preserving but not CP
    with pytest.raises(InvalidArgumentError):
        hybrid.HybridModel(np.array([[0, 1.0], [0, 0]]), collisions={(0, 1): transpose})
    with pytest.raises(InvalidArgumentError):
        hybrid.HybridModel(np.zeros((2, 2)), collisions={(0, 5): SZ})
    with pytest.raises(InvalidArgumentError):
        hybrid.HybridModel(np.zeros((2, 2)), hamiltonians={0: np.array([[0, 1], [0, 0]])})
    with pytest.raises(InvalidArgumentError):
        hybrid.HybridModel(np.zeros((2, 2)), dissipators={0: Superoperator(-np.eye(4))})


def test_initial_populations_checked():
    model = hybrid.dephasing_chain_model(1.0, 2)
    with pytest.raises(InvalidArgumentError):
        hybrid.classical_master_solve(model, [0.5, 0.6, 0], [0, 1])
    with pytest.raises(InvalidArgumentError):
        hybrid.lindblad_rate_solve(model, np.eye(2) / 2, [1, 0], [0, 1])


def test_chain_matches_closed_form(plus):
    ts = np.linspace(0, 10, 101)
    sol = hybrid.lindblad_rate_solve(hybrid.dephasing_chain_model(1.0, 2), plus, grid=ts)
    want = np.stack([dephasing.dephasing_map(t).apply(plus) for t in ts])
    assert np.max(np.abs(sol.rho - want)) <= 1e-8


def test_identity_collisions_freeze_state():
    rng = np.random.default_rng(5)
    rho = random_density(rng, 2)
    model = hybrid.chain_model([1.0, 2.0, 0.5], identity_superop())
    sol = hybrid.lindblad_rate_solve(model, rho, grid=np.linspace(0, 5, 11))
    assert np.allclose(sol.rho, rho, atol=1e-10)


def test_mixture_model_matches_pauli_mixture(plus):
    ts = np.linspace(0, 10, 41)
    for r in (0.5, 0.2):
        sol = hybrid.lindblad_rate_solve(hybrid.mixture_model(1.0), plus, hybrid.mixture_populations(r), ts)
        p = ru.MixtureParams(r)
        want = np.stack([ru.random_unitary_map(ru.mixture_probs(t, p)).apply(plus) for t in ts])
        assert np.max(np.abs(sol.rho - want)) <= 1e-8


def test_chain_builder_checks():
    for n in (1, 3, 2.0):
        with pytest.raises(InvalidArgumentError):
            hybrid.dephasing_chain_model(1.0, n)
    with pytest.raises(InvalidArgumentError):
        hybrid.dephasing_chain_model(0.0, 2)
    m = hybrid.dephasing_chain_model(2.0, 2)
    assert m.n_states == 3
    assert np.array_equal(m.rates, [[0, 0, 0], [2, 0, 0], [0, 2, 0]])


def test_n10_chain_matches_quadrature(plus):
    ts = np.linspace(0, 20, 41)
    sol = hybrid.lindblad_rate_solve(hybrid.dephasing_chain_model(1.0, 10), plus, grid=ts)
    assert np.max(np.abs(2 * sol.rho[:, 0, 1].real - dephasing.coherence_cn(ts, 10))) <= 1e-6


@given(st.integers(0, 10**6))
def test_random_model_bookkeeping(seed):
    model = hybrid.random_model(seed)
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 2)
    p0 = rng.dirichlet(np.ones(model.n_states))
    ts = np.linspace(0, 3, 13)
    sol = hybrid.lindblad_rate_solve(model, rho, p0, ts)
    pops = hybrid.classical_master_solve(model, p0, ts)
    assert np.max(np.abs(sol.populations - pops)) <= 1e-10
    assert np.allclose(pops.sum(axis=1), 1, atol=1e-10)
    for cond in sol.conditional.reshape(-1, 2, 2):
        assert np.linalg.eigvalsh(0.5 * (cond + cond.conj().T))[0] >= -1e-10


@given(st.integers(0, 10**6))
def test_spectator_invariance(seed):
    model = hybrid.random_model(seed, n_states=3)
    rng = np.random.default_rng(seed + 1)
    p0 = rng.dirichlet(np.ones(3))
    ts = np.linspace(0, 4, 9)
    assert hybrid.spectator_check(model, random_density(rng, 2), random_density(rng, 2), ts, p0) <= 1e-10


def test_spectator_examples(plus):
    model = hybrid.dephasing_chain_model(1.0, 2)
    ts = np.linspace(0, 10, 21)
    assert hybrid.spectator_check(model, plus, plus, ts) == 0
    assert hybrid.spectator_check(model, plus, np.eye(2) / 2, ts) <= 1e-10


def test_bipartite_jump_operators():
    emb = hybrid.bipartite_embedding(hybrid.dephasing_chain_model(1.0, 2))
    k10 = np.zeros((3, 3))
    k10[1, 0] = 1
    k21 = np.zeros((3, 3))
    k21[2, 1] = 1
    assert len(emb.jump_operators) == 2
    assert np.allclose(emb.jump_operators[0], np.kron(pauli(3), k10))
    assert np.allclose(emb.jump_operators[1], np.kron(pauli(3), k21))
    assert emb.jump_rates == [1.0, 1.0]
    rho0 = np.eye(2) / 2
    assert np.allclose(emb.initial_state(rho0), np.kron(rho0, np.diag([1, 0, 0])))


def test_bipartite_blocks_match_rate_equation(plus):
    model = hybrid.dephasing_chain_model(1.0, 2)
    ts = np.linspace(0, 10, 51)
    emb = hybrid.bipartite_embedding(model)
    big = emb.solve(plus, grid=ts)
    sol = hybrid.lindblad_rate_solve(model, plus, grid=ts)
    for i in range(3):
        blocks = np.stack([emb.ancilla_block(x, i) for x in big])
        assert np.max(np.abs(blocks - sol.conditional[:, i])) <= 1e-8
    sys_state = np.stack([emb.system_state(x) for x in big])
    want = np.stack([dephasing.dephasing_map(t).apply(plus) for t in ts])
    assert np.max(np.abs(sys_state - want)) <= 1e-8


def test_bipartite_rejects_non_chain():
    with pytest.raises(UnsupportedModelError):
        hybrid.bipartite_embedding(hybrid.random_model(1))
    with pytest.raises(UnsupportedModelError):
        hybrid.bipartite_embedding(hybrid.mixture_model(1.0))


def test_conditional_hamiltonian_in_embedding(plus):
    h = 0.7 * pauli(1)
    base = hybrid.dephasing_chain_model(1.0, 2)
    model = hybrid.HybridModel(base.rates, base.collisions, hamiltonians={0: h, 2: -h})
    ts = np.linspace(0, 5, 11)
    emb = hybrid.bipartite_embedding(model)
    sys_state = np.stack([emb.system_state(x) for x in emb.solve(plus, grid=ts)])
    assert np.max(np.abs(sys_state - hybrid.lindblad_rate_solve(model, plus, grid=ts).rho)) <= 1e-8


def test_trajectories_are_reproducible(plus):
    model = hybrid.dephasing_chain_model(1.0, 2)
    ts = np.linspace(0, 5, 6)
    a = hybrid.simulate_trajectories(model, plus, ts, 50, master_seed=9)
    b = hybrid.simulate_trajectories(model, plus, ts, 50, master_seed=9)
    assert np.array_equal(a.mean, b.mean)
    assert [r.jump_times for r in a.records] == [r.jump_times for r in b.records]
    one = hybrid.simulate_trajectories(model, plus, ts, 1, master_seed=9)
    assert np.array_equal(one.mean, hybrid.simulate_trajectories(model, plus, ts, 1, master_seed=9).mean)
    # trajectory i depends on stream i only
    assert a.records[0].jump_times == one.records[0].jump_times


def test_trajectory_records(plus):
    model = hybrid.dephasing_chain_model(1.0, 2)
    ens = hybrid.simulate_trajectories(model, plus, np.linspace(0, 60, 7), 200, master_seed=1)
    for rec in ens.records:
        assert len(rec.jump_times) <= 2
        assert np.all(np.diff(rec.jump_times) > 0)
        assert list(rec.states) == list(range(len(rec.jump_times) + 1))
        if len(rec.jump_times) == 2:
            assert np.allclose(rec.final_state, plus)
    with pytest.raises(InvalidArgumentError):
        hybrid.simulate_trajectories(model, plus, [0, 1], 0, master_seed=1)


def test_trajectory_ensemble_statistics(plus):
    model = hybrid.dephasing_chain_model(1.0, 2)
    ts = np.linspace(0, 10, 21)
    n = 20000
    ens = hybrid.simulate_trajectories(model, plus, ts, n, master_seed=123)
    coh, se = ens.coherence()
    exact = 0.5 * dephasing.coherence_factor(ts)
    assert np.sum(np.abs(coh[1:].real - exact[1:]) <= 3 * se[1:].real) >= 19
    for t in (0.5, 1.0, 3.0):
        p1 = t * math.exp(-t)
        sig = math.sqrt(p1 * (1 - p1) / n)
        assert abs(ens.jump_count_fraction(t, 1) - p1) <= 3 * sig


def test_trajectories_with_conditional_dynamics(plus):
    model = hybrid.mixture_model(1.0)
    ts = np.linspace(0, 4, 9)
    n = 4000
    ens = hybrid.simulate_trajectories(model, plus, ts, n, 5, p0=hybrid.mixture_populations(0.5))
    want = hybrid.lindblad_rate_solve(model, plus, hybrid.mixture_populations(0.5), ts).rho
    err = np.abs(ens.mean - want)
    band = 4 * (np.abs(ens.stderr.real) + np.abs(ens.stderr.imag)) + 1e-12
    assert np.all(err <= band)
