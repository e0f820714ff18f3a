import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wienerclt import equilibrium as E
from wienerclt import profiles as P

from conftest import GOLDEN, random_profile


def test_zero_interference_exact():
    grid = np.zeros((5, 4))
    grid[:, 0] = 1.0
    prof = P.build_general(grid)
    sol = E.solve_general(prof, rho=2.0)
    assert np.all(sol.t == 0.5) and np.all(sol.ttilde == 0.5)
    assert sol.iterations == 1 and sol.residual == 0.0


def test_constant_profile_golden(constant_profile):
    prof = constant_profile(16, 16)
    sol = E.solve_general(prof, rho=1.0)
    np.testing.assert_allclose(sol.t, GOLDEN, rtol=0, atol=1e-11)
    np.testing.assert_allclose(sol.ttilde, GOLDEN, rtol=0, atol=1e-11)
    assert sol.residual <= 1e-12


def test_general_matches_separable_identity():
    rng = np.random.default_rng(11)
    d, dt = rng.uniform(0.1, 3, 20), rng.uniform(0.1, 3, 31)
    prof = P.build_separable(d, dt)
    rho = 0.7
    sol = E.solve_general(prof, rho)
    sep = E.solve_separable(d, dt[1:], rho)
    np.testing.assert_allclose(sol.t, 1 / (rho * (1 + sep.deltatilde * d)), rtol=1e-8)
    np.testing.assert_allclose(sol.ttilde, 1 / (rho * (1 + sep.delta * dt[1:])), rtol=1e-8)


def test_rho_validation(constant_profile):
    for rho in (0.0, -1.0, np.nan):
        with pytest.raises(ValueError):
            E.solve_general(constant_profile(3, 3), rho)


def test_nonconvergence_reports_residual(constant_profile):
    with pytest.raises(E.ConvergenceError) as info:
        E.solve_general(constant_profile(8, 8), 1.0, tol=1e-14, max_iter=3)
    assert info.value.residual > 1e-14 and info.value.iterations == 3


def test_separable_golden():
    sep = E.solve_separable(np.ones(12), np.ones(12), 1.0)
    assert sep.delta == pytest.approx(GOLDEN, abs=1e-11)
    assert sep.deltatilde == pytest.approx(GOLDEN, abs=1e-11)
    # gamma = (N/K) / (rho^2 (1 + deltatilde)^2) = delta^2
    assert sep.gamma == pytest.approx(GOLDEN ** 2, abs=1e-11)
    assert sep.gammatilde == pytest.approx(0.3819660113, abs=1e-10)


def test_separable_no_interference():
    d = np.array([1.0, 2.0, 3.0])
    sep = E.solve_separable(d, np.zeros(4), rho=0.5)
    assert sep.delta == pytest.approx(d.sum() / (4 * 0.5))
    assert sep.deltatilde == 0.0


def test_separable_scaling():
    # (d, rho) -> (c d, c rho): delta is invariant, deltatilde -> deltatilde / c
    dt = np.ones(10)
    a = E.solve_separable(np.ones(10), dt, 1.0)
    b = E.solve_separable(2.0 * np.ones(10), dt, 2.0)
    assert b.delta == pytest.approx(a.delta, rel=1e-11)
    assert b.deltatilde == pytest.approx(a.deltatilde / 2.0, rel=1e-11)


def test_deterministic_snr_no_interference():
    K = N = 6
    grid = np.zeros((N, K + 1))
    grid[:, 0] = 1.0
    prof = P.build_general(grid)
    sol = E.solve_general(prof, 0.25)
    assert E.deterministic_snr(sol, prof) == pytest.approx(1 / 0.25, rel=1e-15)


def test_deterministic_snr_golden(constant_profile):
    prof = constant_profile(10, 10)
    assert E.deterministic_snr(E.solve_general(prof, 1.0), prof) == pytest.approx(GOLDEN, abs=1e-11)


def test_deterministic_snr_decreasing_in_rho(constant_profile):
    prof = constant_profile(10, 10)
    b1 = E.deterministic_snr(E.solve_general(prof, 1.0), prof)
    b2 = E.deterministic_snr(E.solve_general(prof, 2.0), prof)
    assert b1 > b2


def test_residual_zero_at_exact_solution():
    grid = np.zeros((3, 3))
    grid[:, 0] = 1.0
    prof = P.build_general(grid)
    assert E.residual(np.full(3, 0.5), np.full(2, 0.5), prof, 2.0) == 0.0


def test_residual_lipschitz(constant_profile):
    prof = constant_profile(6, 6)
    sol = E.solve_general(prof, 1.0)
    for eps in (1e-3, 1e-5):
        t = sol.t.copy()
        t[2] += eps
        r = E.residual(t, sol.ttilde, prof, 1.0)
        assert 0.5 * eps < r < 2.0 * eps


def test_residual_certifies_solution(constant_profile):
    prof = constant_profile(9, 7)
    sol = E.solve_general(prof, 1.0, tol=1e-12)
    assert E.residual(sol.t, sol.ttilde, prof, 1.0) <= 1e-12


def test_damping_converges_to_same_point():
    rng = np.random.default_rng(5)
    prof = random_profile(rng, 40)
    a = E.solve_general(prof, 0.3)
    b = E.solve_general(prof, 0.3, damping=0.6)
    np.testing.assert_allclose(a.t, b.t, rtol=1e-10)
    assert b.damping == 0.6


def test_determinism():
    prof = random_profile(np.random.default_rng(9), 50)
    a, b = E.solve_general(prof, 0.5), E.solve_general(prof, 0.5)
    assert np.array_equal(a.t, b.t) and np.array_equal(a.ttilde, b.ttilde)


def test_report_rows(constant_profile):
    prof = constant_profile(4, 3)
    sol = E.solve_general(prof, 1.0)
    sep = E.solve_profile_separable(prof, 1.0)
    rows = dict(E.solution_rows(sol, prof, sep))
    assert rows["N"] == 4 and rows["K"] == 3 and "t[4]" in rows and "ttilde[3]" in rows
    assert rows["delta"] == sep.delta


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 5.0))
@settings(max_examples=30, deadline=None)
def test_positivity_and_bounds(seed, rho):
    prof = random_profile(np.random.default_rng(seed), 30)
    sol = E.solve_general(prof, rho)
    assert np.all(sol.t > 0) and np.all(sol.t <= 1 / rho)
    assert np.all(sol.ttilde > 0) and np.all(sol.ttilde <= 1 / rho)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0, 10.0]))
@settings(max_examples=20, deadline=None)
def test_scale_invariance_beta_bar(seed, c):
    prof = random_profile(np.random.default_rng(seed), 30)
    b = E.deterministic_snr(E.solve_general(prof, 0.8), prof)
    bc = E.deterministic_snr(E.solve_general(prof.scaled(c), 0.8 * c), prof.scaled(c))
    assert bc == pytest.approx(b, rel=1e-10)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_beta_bar_monotone_in_rho(seed):
    prof = random_profile(np.random.default_rng(seed), 20)
    rhos = np.geomspace(0.05, 20, 12)
    vals = [E.deterministic_snr(E.solve_general(prof, r), prof) for r in rhos]
    assert np.all(np.diff(vals) < 0)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_separable_consistency_property(seed):
    rng = np.random.default_rng(seed)
    prof = random_profile(rng, 40, separable=True)
    rho = float(rng.uniform(0.1, 3))
    sol = E.solve_general(prof, rho)
    sep = E.solve_profile_separable(prof, rho)
    t, tt = E.separable_to_general(prof, sep)
    np.testing.assert_allclose(sol.t, t, rtol=1e-8)
    np.testing.assert_allclose(sol.ttilde, tt, rtol=1e-8)


def test_oscillation_triggers_fallback_damping():
    # slope -1.5 diverges undamped; half damping gives slope -0.25
    F = lambda x: 2.0 - 1.5 * x
    x, res, it, damping, ok = E._picard(F, np.array([0.0]), 1e-12, 500, 0.0)
    assert ok and damping == E.FALLBACK_DAMPING
    assert x[0] == pytest.approx(0.8, abs=1e-11)
