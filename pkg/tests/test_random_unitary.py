import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmqubit import dephasing
from nmqubit import random_unitary as ru
from nmqubit.errors import InvalidArgumentError, KernelPoleError, RateUndefinedError
from nmqubit.linops import choi_of, min_eigenvalue, pauli
from nmqubit.numerics import forward_derivative, integrate_ode, quadrature


def test_hadamard_involution():
    assert np.array_equal(ru.HADAMARD @ ru.HADAMARD, 4 * np.eye(4, dtype=np.int64))


def test_example_probs_limits():
    assert np.allclose(ru.example_probs(0.0), [1, 0, 0, 0])
    assert np.allclose(ru.example_probs(40.0), [0.75, 0.25, 0, 0], atol=1e-12)
    t = np.linspace(0, 40, 4001)
    p = ru.example_probs(t)
    assert np.all(p >= 0) and np.all(p <= 1)
    assert np.allclose(p.sum(axis=0), 1, atol=1e-12)


def test_example_rates_at_zero():
    assert np.allclose(ru.example_rates(0.0), [0.5, 0.0, 1.0])
    assert np.allclose(ru.example_rates(0.0, 2.0), [1.0, 0.0, 2.0])


def test_example_rates_vanish_and_sign():
    assert np.all(np.abs(ru.example_rates(40.0)) < 1e-6)
    ga = ru.g_functions(np.linspace(0, 10, 101))[0]
    s = ru.example_rates(np.linspace(0, 10, 101))[1:].sum(axis=0)
    assert np.allclose(s, ga, atol=1e-14)
    t = np.linspace(1.01, 10, 50)
    assert np.all(ru.example_rates(t)[1:].sum(axis=0) < 0)


def test_g_denominators_positive():
    x = np.linspace(0, 60, 60001)
    assert np.min(np.exp(x) - x) > 0 and np.min(1 + np.exp(x) - 2 * x) > 0


def test_rates_from_probs_matches_closed_form():
    for t in np.linspace(0, 10, 41):
        got = ru.rates_from_probs(ru.example_probs, float(t))
        assert np.allclose(got[1:], ru.example_rates(t), atol=1e-6)
        assert got[0] == pytest.approx(-got[1:].sum(), abs=1e-10)


def test_rates_from_probs_dephasing_family():
    for t in (0.0, 0.3, 1.0, 2.5, 7.0):
        g = ru.rates_from_probs(ru.dephasing_probs, t)
        assert g[1] == pytest.approx(0, abs=1e-9) and g[2] == pytest.approx(0, abs=1e-9)
        # the sigma_z rate of this family is the single-channel rate itself
        assert g[3] == pytest.approx(dephasing.rate_gamma(t), abs=1e-6)


def test_rates_from_constant_probs_are_zero():
    assert np.allclose(ru.rates_from_probs(lambda t: np.array([1.0, 0, 0, 0]), 1.0), 0)


def test_rates_with_analytic_derivative():
    p = ru.MixtureParams(0.3)
    for t in (0.0, 0.5, 2.0):
        a = ru.rates_from_probs(lambda s: ru.mixture_probs(s, p), t, dprobs=lambda s: ru.mixture_dprobs(s, p))
        n = ru.rates_from_probs(lambda s: ru.mixture_probs(s, p), t)
        assert np.allclose(a, n, atol=1e-6)
        assert np.allclose(a[1:], ru.mixture_rates(t, p), atol=1e-12)


def test_rates_undefined_for_singular_map():
    with pytest.raises(RateUndefinedError):
        ru.rates_from_probs(lambda t: np.array([0.5, 0.5, 0, 0]), 1.0)


def test_round_trip_through_master_equation():
    ts = np.linspace(0, 10, 21)
    sig = [np.kron(pauli(k).conj(), pauli(k)) - np.eye(4) for k in range(1, 4)]

    def rhs(t, y):
        g = ru.example_rates(t)
        gen = 0.5 * sum(gk * s for gk, s in zip(g, sig))
        return gen @ y.reshape(4, 4)

    maps = integrate_ode(lambda t, y: rhs(t, y).ravel(), np.eye(4, dtype=complex).ravel(), ts, tol=1e-12)
    for t, m in zip(ts, maps):
        want = ru.random_unitary_map(ru.example_probs(t)).matrix
        assert np.max(np.abs(m.reshape(4, 4) - want)) <= 1e-6


def test_gamma_integrals():
    g1, g2, g3 = ru.gamma_integrals(ru.example_rates)
    assert g1 == pytest.approx(math.log(2), abs=1e-6)
    assert abs(g2) <= 1e-6 and abs(g3) <= 1e-6


@pytest.mark.parametrize("r", [0.25, 0.5, 0.75])
def test_mixture_gamma_integrals(r):
    p = ru.MixtureParams(r)
    g1, g2, g3 = ru.gamma_integrals(lambda s: ru.mixture_rates(s, p))
    assert g1 == pytest.approx(math.log(1 / (1 - r)), abs=1e-6)
    assert abs(g2) <= 1e-6 and abs(g3) <= 1e-6


def test_random_unitary_map_examples():
    assert np.allclose(ru.random_unitary_map([1, 0, 0, 0]).matrix, np.eye(4))
    m = ru.random_unitary_map(ru.example_probs(40.0))
    # sigma_x is left alone; sigma_y and sigma_z are halved
    assert np.allclose(m.apply(pauli(1)), pauli(1), atol=1e-12)
    assert np.allclose(m.apply(pauli(2)), 0.5 * pauli(2), atol=1e-12)
    assert np.allclose(m.apply(pauli(3)), 0.5 * pauli(3), atol=1e-12)
    for t in np.linspace(0, 40, 81):
        assert min_eigenvalue(choi_of(ru.random_unitary_map(ru.example_probs(t)))) >= -1e-10


@pytest.mark.parametrize("p", [[0.5, 0.5, 0.1, -0.1], [1.1, -0.1, 0, 0], [0.5, 0.4, 0, 0], [1, 0, 0]])
def test_random_unitary_map_rejects_bad_probs(p):
    with pytest.raises(InvalidArgumentError):
        ru.random_unitary_map(p)


def test_markov_x_solution():
    rho = np.array([[0.8, 0.3 - 0.2j], [0.3 + 0.2j, 0.2]])
    sx = pauli(1)
    assert np.allclose(ru.markov_x_solution(0.0, 1.0, rho), rho)
    assert np.allclose(ru.markov_x_solution(60.0, 1.0, rho), 0.5 * (rho + sx @ rho @ sx))
    g = 1.3
    want = 0.5 * g * (sx @ rho @ sx - rho)
    deriv = np.array([[forward_derivative(lambda t: ru.markov_x_solution(t, g, rho)[i, j], 0.0)
                       for j in range(2)] for i in range(2)])
    assert np.max(np.abs(deriv - want)) <= 1e-8


def test_mixture_probs_examples():
    t = np.linspace(0, 20, 101)
    assert np.allclose(ru.mixture_probs(t, ru.MixtureParams(0.5)), ru.example_probs(t), atol=1e-12)
    p0 = ru.mixture_probs(t, ru.MixtureParams(0.0))
    assert np.all(p0[1] == 0) and np.all(p0[2] == 0)
    p1 = ru.mixture_probs(t, ru.MixtureParams(1.0))
    assert np.all(p1[2] == 0) and np.all(p1[3] == 0)
    with pytest.raises(InvalidArgumentError):
        ru.MixtureParams(1.5)


@given(st.floats(0, 1), st.floats(0, 20))
def test_mixture_map_is_convex_combination(r, t):
    p = ru.MixtureParams(r)
    chain = ru.random_unitary_map(ru.dephasing_probs(t)).matrix
    xch = ru.random_unitary_map(ru.markov_x_probs(t)).matrix
    mix = ru.random_unitary_map(ru.mixture_probs(t, p)).matrix
    assert np.allclose(mix, (1 - r) * chain + r * xch, atol=1e-12)


@pytest.mark.parametrize("r", [0, 0.25, 0.5, 0.75, 1])
def test_mixture_maps_cp(r):
    p = ru.MixtureParams(r)
    for t in np.linspace(0, 20, 41):
        assert min_eigenvalue(choi_of(ru.random_unitary_map(ru.mixture_probs(t, p)))) >= -1e-10


def test_mixture_eigenvalues_match_hadamard():
    p = ru.MixtureParams(0.4, 1.5)
    t = np.linspace(0, 10, 51)
    lam, dlam = ru.mixture_eigenvalues(t, p)
    assert np.allclose(lam, ru.pauli_eigenvalues(ru.mixture_probs(t, p)), atol=1e-14)
    assert np.allclose(dlam, ru.pauli_eigenvalues(ru.mixture_dprobs(t, p)), atol=1e-14)


def test_mixture_ga():
    t = np.linspace(0, 10, 101)
    assert np.allclose(ru.mixture_ga(t, 0.0), dephasing.rate_gamma(t), atol=1e-14)
    assert np.all(ru.mixture_ga(t, 1.0) == 0)
    half = ru.mixture_ga(t, 0.5)
    assert np.allclose(half, ru.g_functions(t)[0])
    assert np.all(half[t < 1] > 0) and np.all(half[t > 1] < 0)
    for r in (0.2, 0.6):
        rates = np.array([ru.mixture_rates(s, ru.MixtureParams(r)) for s in t[1:]])
        assert np.allclose(rates[:, 1] + rates[:, 2], ru.mixture_ga(t[1:], r), atol=1e-12)


def test_dephasing_memory_kernels():
    for g in (0.5, 1.0, 2.0):
        for z in np.logspace(-2, 2, 9):
            k = ru.memory_kernels_laplace(ru.dephasing_probs_laplace(z, g), z)
            assert k.k[1] == pytest.approx(0, abs=1e-12) and k.k[2] == pytest.approx(0, abs=1e-12)
            assert k.k[3] == pytest.approx(2 * z ** 2 * g / (z ** 2 + g ** 2), rel=1e-10)
            assert k.mu[0] == pytest.approx(0, abs=1e-12)
            assert abs(k.k.sum()) <= 1e-12 * max(1, np.abs(k.k).max())


def test_identity_kernels_vanish():
    z = 0.7
    k = ru.memory_kernels_laplace(np.array([1 / z, 0, 0, 0]), z)
    assert np.allclose(k.k, 0, atol=1e-14)


def test_kernel_pole():
    with pytest.raises(KernelPoleError):
        ru.memory_kernels_laplace(np.array([0.5, 0.5, 0, 0]), 1.0)


def test_example_kernels_against_numeric_laplace_transform():
    z = 1.0
    numeric = np.array([quadrature(lambda t, a=a: math.exp(-z * t) * ru.example_probs(t)[a], 0, 80,
                                   tol=1e-13, points=[1, 5, 10, 20]) for a in range(4)])
    got = ru.memory_kernels_laplace(ru.example_probs_laplace(z), z)
    want = ru.memory_kernels_laplace(numeric, z)
    assert np.allclose(got.k, want.k, atol=1e-8)


def test_max_nonmarkov_conditions():
    assert ru.check_max_nonmarkov_conditions(ru.example_rates)
    v = ru.check_max_nonmarkov_conditions(lambda t: ru.mixture_rates(t, ru.MixtureParams(1.0)))
    assert not v and not v.negative_sum_found
    assert not ru.check_max_nonmarkov_conditions(lambda t: np.zeros(3))


def test_coherence_factors():
    p = ru.MixtureParams(0.0)
    t = np.linspace(0, 5, 11)
    f = ru.coherence_factors(t, p)
    assert np.allclose(f[0], dephasing.coherence_factor(t))
    assert np.allclose(f[2], 1)
