import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wienerclt import equilibrium as E
from wienerclt import fluctuations as F
from wienerclt import profiles as P
from wienerclt import simulator as S

from conftest import GOLDEN, random_profile


def _zero_interference(N=5, K=5):
    grid = np.zeros((N, K + 1))
    grid[:, 0] = 1.0
    return P.build_general(grid)


def _omega2_golden_mp():
    mpmath.mp.dps = 50
    delta = (mpmath.sqrt(5) - 1) / 2
    g = delta ** 2
    return g * (1 + g * g / (1 - g * g))


def test_clt_matrices_zero_interference():
    prof = _zero_interference()
    A, Delta, g = F.clt_matrices(prof, E.solve_general(prof, 1.0))
    assert not A.any() and np.all(Delta == 1.0) and not g.any()


def test_clt_matrices_constant(constant_profile):
    K = 12
    prof = constant_profile(K, K)
    A, Delta, g = F.clt_matrices(prof, E.solve_general(prof, 1.0))
    np.testing.assert_allclose(Delta, (1 + GOLDEN) ** 2, rtol=1e-11)
    np.testing.assert_allclose(g, GOLDEN ** 2, rtol=1e-11)
    np.testing.assert_allclose(A, GOLDEN ** 2 / (1 + GOLDEN) ** 2 / K, rtol=1e-11)
    assert F.spectral_radius(A) == pytest.approx(GOLDEN ** 2 / (1 + GOLDEN) ** 2, rel=1e-9)


def test_clt_matrices_against_explicit_traces():
    rng = np.random.default_rng(2)
    prof = random_profile(rng, 12)
    sol = E.solve_general(prof, 0.4)
    A, Delta, g = F.clt_matrices(prof, sol)
    K, T = prof.K, np.diag(sol.t)
    D = [np.diag(prof.sigma2[:, k]) for k in range(K + 1)]
    for l in range(1, K + 1):
        load = 1 + np.trace(D[l] @ T) / K
        assert Delta[l - 1] == pytest.approx(load ** 2, rel=1e-12)
        assert g[l - 1] == pytest.approx(np.trace(D[0] @ D[l] @ T @ T) / K, rel=1e-12, abs=1e-300)
        for m in range(1, K + 1):
            expect = np.trace(D[l] @ D[m] @ T @ T) / K / load ** 2 / K
            assert A[l - 1, m - 1] == pytest.approx(expect, rel=1e-12, abs=1e-300)


def test_theta_qpsk_zero_interference():
    prof = _zero_interference()
    q = F.theta_squared(prof, E.solve_general(prof, 1.0), 0.0)
    assert q.theta2 == 0.0


def test_theta_gaussian_zero_interference():
    rho = 0.5
    prof = _zero_interference(7, 7)
    q = F.theta_squared(prof, E.solve_general(prof, rho), 1.0)
    assert q.theta2 == pytest.approx(1 / rho ** 2, rel=1e-14)


def test_theta_constant_matches_omega(constant_profile):
    prof = constant_profile(20, 20)
    sol = E.solve_general(prof, 1.0)
    q = F.theta_squared(prof, sol, 1.0)
    om = F.omega_squared(E.solve_profile_separable(prof, 1.0), 1.0)
    assert q.theta2 == pytest.approx(om, rel=1e-10)
    assert q.theta2 == pytest.approx(float(_omega2_golden_mp()), rel=1e-10)


def test_omega_golden_high_precision():
    sep = E.solve_separable(np.ones(16), np.ones(16), 1.0)
    om = F.omega_squared(sep, 1.0)
    assert abs(om - float(_omega2_golden_mp())) <= 1e-12
    assert om == pytest.approx(0.4472, abs=1e-4)


def test_omega_no_interference():
    sep = E.solve_separable(np.array([1.0, 2.0]), np.zeros(3), 1.0)
    assert F.omega_squared(sep, 1.0) == pytest.approx(sep.gamma)


def test_omega_linear_in_kappa():
    sep = E.solve_separable(np.linspace(0.5, 2, 9), np.linspace(0.1, 3, 13), 0.3)
    assert F.omega_squared(sep, 0.0) == pytest.approx(F.omega_squared(sep, 1.0) - sep.gamma, rel=1e-13)


def test_omega_ill_posed():
    sep = E.SeparableSolution(1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1)
    with pytest.raises(E.WellPosednessError):
        F.omega_squared(sep, 1.0)


def test_theta_rejects_negative_kappa(constant_profile):
    prof = constant_profile(3, 3)
    with pytest.raises(ValueError):
        F.theta_squared(prof, E.solve_general(prof, 1.0), -0.1)


def test_theta_rejects_large_spectral_radius(monkeypatch, constant_profile):
    prof = constant_profile(3, 3)
    monkeypatch.setattr(F, "spectral_radius", lambda A: 1.0)
    with pytest.raises(E.WellPosednessError, match="spectral radius"):
        F.theta_squared(prof, E.solve_general(prof, 1.0), 1.0)


def test_fourth_moment_tags():
    assert F.fourth_moment("qpsk") == 0.0
    assert F.fourth_moment("complex-gaussian") == 1.0
    with pytest.raises(ValueError):
        F.fourth_moment("16qam")


@pytest.mark.parametrize("law,expected,tol", [("complex-gaussian", 2.0, 0.01), ("qpsk", 1.0, 1e-12)])
def test_fourth_moment_monte_carlo(law, expected, tol):
    W = S.sample_entries(law, 1000, 1000, np.random.default_rng(4))
    m4 = np.mean(np.abs(W) ** 4)
    assert abs(m4 - expected) <= tol
    assert F.fourth_moment(law) == pytest.approx(m4 - 1, abs=tol)


def test_spectral_radius_known():
    A = np.array([[0.2, 0.3], [0.1, 0.4]])
    assert F.spectral_radius(A) == pytest.approx(max(abs(np.linalg.eigvals(A))), rel=1e-8)
    assert F.spectral_radius(np.zeros((3, 3))) == 0.0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_variance_ordering_and_gap(seed):
    rng = np.random.default_rng(seed)
    prof = random_profile(rng, 30)
    sol = E.solve_general(prof, float(rng.uniform(0.1, 2)))
    q0 = F.theta_squared(prof, sol, 0.0)
    q1 = F.theta_squared(prof, sol, 1.0)
    gap = np.sum(prof.d0 ** 2 * sol.t ** 2) / prof.K
    assert q0.theta2 <= q1.theta2
    assert q1.theta2 - q0.theta2 == pytest.approx(gap, abs=1e-10)
    assert q0.term_interference >= 0
    assert np.all(q1.A >= 0) and np.all(q1.Delta >= 1)
    assert q1.theta2 > 0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_separable_theta_equals_scaled_omega(seed):
    rng = np.random.default_rng(seed)
    prof = random_profile(rng, 40, separable=True)
    rho = float(rng.uniform(0.1, 3))
    kappa = float(rng.choice([0.0, 1.0, 0.37]))
    q = F.theta_squared(prof, E.solve_general(prof, rho), kappa)
    sep = E.solve_profile_separable(prof, rho)
    dt0 = prof.separable[1][0]
    assert q.theta2 == pytest.approx(dt0 ** 2 * F.omega_squared(sep, kappa), rel=1e-8)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_linear_solve_residual(seed):
    rng = np.random.default_rng(seed)
    prof = random_profile(rng, 60)
    q = F.theta_squared(prof, E.solve_general(prof, 0.5), 1.0)
    assert q.solve_residual <= 1e-12 * max(np.linalg.norm(q.g / q.Delta), 1e-300) or not q.g.any()


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0, 10.0]))
@settings(max_examples=20, deadline=None)
def test_theta_scale_invariance(seed, c):
    prof = random_profile(np.random.default_rng(seed), 30)
    a = F.theta_squared(prof, E.solve_general(prof, 0.6), 1.0).theta2
    pc = prof.scaled(c)
    b = F.theta_squared(pc, E.solve_general(pc, 0.6 * c), 1.0).theta2
    assert b == pytest.approx(a, rel=1e-10)


def test_theta_bounded_across_k():
    # the user-of-interest channel is redrawn per K, so compare channel averages
    from wienerclt.cli import analyze
    from wienerclt.scenario import uplink_experiment_config
    means = [np.mean([analyze(uplink_experiment_config(K, s)).clt.theta2 for s in range(20)])
             for K in (8, 16, 32, 64)]
    assert min(means) > 0
    assert max(means) / min(means) < 2.0
