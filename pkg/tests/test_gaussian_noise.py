import numpy as np
import pytest

from nmqubit import gaussian_noise as gn
from nmqubit.errors import InvalidArgumentError, StabilityError
from nmqubit.linops import pauli
from nmqubit.numerics import rng_stream

OU = gn.OUParams(gamma=1.0, D=1.0)


def test_params_validation():
    for g, d in ((0, 1), (1, 0), (-1, 1)):
        with pytest.raises(InvalidArgumentError):
            gn.OUParams(g, d)
    assert OU.stationary_variance == 0.5
    assert np.isclose(OU.correlation(2.0), 0.5 * np.exp(-2.0))


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        gn.NoiseHamiltonianModel(np.array([[0, 1], [0, 0]]), pauli(3), OU)
    with pytest.raises(InvalidArgumentError):
        gn.NoiseHamiltonianModel(np.zeros((3, 3)), pauli(3), OU)


def test_single_path_matches_batch():
    batch = gn.ou_paths(OU, 0.1, 50, 3, master_seed=4)
    for i in range(3):
        assert np.array_equal(gn.ou_path(OU, 0.1, 50, rng_stream(4, i)), batch[i])
    with pytest.raises(InvalidArgumentError):
        gn.ou_path(OU, 0.0, 5, rng_stream(4, 0))


def test_fixed_start():
    eta = gn.ou_paths(OU, 0.1, 10, 4, master_seed=1, eta0=0.3)
    assert np.all(eta[:, 0] == 0.3)


def test_ou_stationary_statistics():
    n = 40000
    st = gn.ou_statistics(OU, 0.05, t_obs=2.0, lag=0.5, n_paths=n, master_seed=11)
    assert abs(st.variance - 0.5) <= 4 * st.variance_se
    assert abs(st.lag_correlation - OU.correlation(0.5)) <= 4 * st.lag_correlation_se


def test_lag_correlations():
    lags = np.array([0.0, 0.5, 1.0, 2.0])
    est, se = gn.ou_lag_correlations(OU, 0.1, lags, 40000, master_seed=2)
    assert np.all(np.abs(est - OU.correlation(lags)) <= 4 * se)
    with pytest.raises(InvalidArgumentError):
        gn.ou_lag_correlations(OU, 0.1, [-1.0], 10, 0)


@pytest.mark.parametrize("gamma,D", [(1.0, 1.0), (0.3, 2.0), (5.0, 0.5)])
def test_variance_closed_form_matches_quadrature(gamma, D):
    p = gn.OUParams(gamma, D)
    for t in (0.0, 0.1, 1.0, 7.5):
        assert abs(gn.phase_variance(t, p) - gn.phase_variance_quadrature(t, p)) <= 1e-10 * max(1, gn.phase_variance(t, p))


def test_variance_limits():
    t = 1e-3
    assert np.isclose(gn.phase_variance(t, OU), OU.stationary_variance * t ** 2, rtol=1e-3)
    t = 200.0
    assert np.isclose(gn.phase_variance(t, OU), OU.D * (t - 1), rtol=1e-12)


def test_oracle_variants_agree():
    ts = np.linspace(0, 5, 11)
    a = gn.gaussian_dephasing_coherence(ts, OU)
    b = gn.gaussian_dephasing_coherence(ts, OU, quadrature=False)
    assert np.max(np.abs(a - b)) <= 1e-10
    assert a[0] == 1.0


def test_single_path_evolution_is_unitary(plus):
    model = gn.NoiseHamiltonianModel(0.4 * pauli(1), 0.5 * pauli(3), OU)
    path = gn.ou_path(OU, 0.01, 200, rng_stream(0, 0))
    states = gn.stochastic_unitary_solve(model, path, plus, 0.01)
    for rho in states:
        assert np.isclose(np.trace(rho).real, 1)
        assert np.isclose(np.trace(rho @ rho).real, 1)


def test_constant_path_is_exact_rotation(plus):
    model = gn.pure_dephasing_model(OU)
    eta = 0.7
    states = gn.stochastic_unitary_solve(model, np.full(101, eta), plus, 0.05)
    t = 5.0
    assert np.isclose(states[-1][0, 1], 0.5 * np.exp(-1j * eta * t), atol=1e-12)


def test_general_dimension_unitaries():
    h = np.diag([0.0, 1.0, 2.0]).astype(complex)
    dh = np.zeros((3, 3), complex)
    dh[0, 1] = dh[1, 0] = 1
    model = gn.NoiseHamiltonianModel(h, dh, OU)
    rho = np.diag([1.0, 0, 0]).astype(complex)
    out = gn.stochastic_unitary_solve(model, np.zeros(11), rho, 0.1)
    assert np.allclose(out[-1], rho)


def test_ensemble_matches_oracle(plus):
    model = gn.pure_dephasing_model(OU)
    ts = np.linspace(0, 4, 41)
    ens = gn.ensemble_average(model, plus, ts, 20000, master_seed=3, chunk=5000)
    coh, se = ens.coherence()
    exact = 0.5 * gn.gaussian_dephasing_coherence(ts, OU, quadrature=False)
    assert np.all(np.abs(coh.real - exact) <= 4 * se.real + 1e-12)
    assert np.all(np.abs(coh.imag) <= 4 * se.imag + 1e-12)
    assert np.all(ens.purity <= 1 + 1e-12)


def test_ensemble_is_chunk_independent_and_reproducible(plus):
    model = gn.pure_dephasing_model(OU)
    ts = np.linspace(0, 1, 11)
    a = gn.ensemble_average(model, plus, ts, 300, master_seed=8, chunk=100)
    b = gn.ensemble_average(model, plus, ts, 300, master_seed=8, chunk=100)
    c = gn.ensemble_average(model, plus, ts, 300, master_seed=8, chunk=300)
    assert np.array_equal(a.mean, b.mean)
    assert np.allclose(a.mean, c.mean, atol=1e-14)


def test_ensemble_argument_checks(plus):
    model = gn.pure_dephasing_model(OU)
    with pytest.raises(InvalidArgumentError):
        gn.ensemble_average(model, plus, [0, 0.1, 0.3], 10, 0)
    with pytest.raises(InvalidArgumentError):
        gn.ensemble_average(model, plus, [0, 0.1], 0, 0)


def test_small_diffusion_keeps_coherence(plus):
    p = gn.OUParams(1.0, 1e-6)
    model = gn.pure_dephasing_model(p, eta0=0.0)
    ens = gn.ensemble_average(model, plus, np.linspace(0, 5, 51), 200, master_seed=0)
    assert np.all(np.abs(2 * ens.mean[:, 0, 1]) >= 1 - 1e-5)


def test_fokker_planck_stationary():
    grid = gn.stationary_eta_grid(OU)
    model = gn.NoiseHamiltonianModel(np.zeros((2, 2)), np.zeros((2, 2)), OU)
    sol = gn.fokker_planck_grid_solve(model, np.eye(2) / 2, grid, np.linspace(0, 3, 4))
    assert np.allclose(sol.P.sum(axis=1), 1, atol=1e-12)
    var = sol.P @ grid ** 2
    assert np.max(np.abs(var - OU.stationary_variance)) <= 1e-3 * OU.stationary_variance


def test_fokker_planck_relaxes_to_stationary():
    grid = gn.stationary_eta_grid(OU)
    model = gn.NoiseHamiltonianModel(np.zeros((2, 2)), np.zeros((2, 2)), OU, eta0=1.5)
    sol = gn.fokker_planck_grid_solve(model, np.eye(2) / 2, grid, [0, 10])
    assert abs(sol.P[-1] @ grid ** 2 - OU.stationary_variance) <= 5e-3
    assert np.all(sol.P >= -1e-12)


def test_fokker_planck_coherence_matches_oracle(plus):
    model = gn.pure_dephasing_model(OU)
    ts = np.linspace(0, 3, 7)
    sol = gn.fokker_planck_grid_solve(model, plus, gn.stationary_eta_grid(OU), ts)
    exact = 0.5 * gn.gaussian_dephasing_coherence(ts, OU, quadrature=False)
    assert np.max(np.abs(sol.rho[:, 0, 1] - exact)) <= 2e-3


def test_fokker_planck_rejects_large_step(plus):
    model = gn.pure_dephasing_model(OU)
    with pytest.raises(StabilityError):
        gn.fokker_planck_grid_solve(model, plus, gn.stationary_eta_grid(OU), [0, 1], dt=1.0)
    with pytest.raises(InvalidArgumentError):
        gn.fokker_planck_grid_solve(model, plus, np.array([0.0, 1.0, 3.0]), [0, 1])
