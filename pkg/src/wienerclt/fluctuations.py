"""
Asymptotic variance of ``sqrt(K) (beta - beta_bar)``.

For a general profile the variance is::

    theta2 = kappa * (1/K) tr D0^2 T^2 + (1/K) g^T (I - A)^-1 Delta^-1 g

and for a separable profile it reduces to ``dtilde_0^2 * omega2`` with
``omega2 = gamma * (kappa + rho^2 gamma gammatilde / (1 - rho^2 gamma gammatilde))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import FixedPointSolution, SeparableSolution, WellPosednessError
from .profiles import VarianceProfile

RADIUS_MARGIN = 1e-8

FOURTH_MOMENT_EXCESS = {
    "complex-gaussian": 1.0,  # E|W|^4 = 2 for CN(0, 1)
    "qpsk": 0.0,              # |W| = 1 almost surely
}


@dataclass(frozen=True)
class CltQuantities:
    A: np.ndarray
    Delta: np.ndarray
    g: np.ndarray
    kappa: float
    theta2: float
    term_fourth: float
    term_interference: float
    spectral_radius: float
    solve_residual: float


def fourth_moment(law: str) -> float:
    """``E|W|^4 - 1`` for a supported entry law."""
    try:
        return FOURTH_MOMENT_EXCESS[law]
    except KeyError:
        raise ValueError(
            f"unknown entry law {law!r}; expected one of {sorted(FOURTH_MOMENT_EXCESS)}") from None


def spectral_radius(A: np.ndarray, iterations: int = 50, tol: float = 1e-10) -> float:
    """Power-iteration estimate of the Perron root of a nonnegative matrix."""
    A = np.asarray(A, dtype=float)
    if A.size == 0 or not A.any():
        return 0.0
    x = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    est = 0.0
    for _ in range(iterations):
        y = A @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        new = float(norm)
        x = y / norm
        if abs(new - est) <= tol * max(new, 1.0):
            est = new
            break
        est = new
    return est


def clt_matrices(profile: VarianceProfile, sol: FixedPointSolution):
    """Return ``(A, Delta, g)`` with ``Delta`` as the diagonal vector.

    Indices run over the interferers 1..K only.
    """
    if not sol.converged:
        raise ValueError("solution did not converge")
    K = profile.K
    if K < 1:
        raise ValueError("need K >= 1")
    S = profile.interferers
    t = sol.t
    load = 1.0 + S.T @ t / K                 # 1 + (1/K) tr D_l T
    Delta = load ** 2
    M = (S * (t ** 2)[:, None]).T @ S / K    # (1/K) tr D_l D_m T^2
    A = M / Delta[:, None] / K
    g = (profile.d0 * t ** 2) @ S / K
    return A, Delta, g


def theta_squared(profile: VarianceProfile, sol: FixedPointSolution,
                  kappa: float) -> CltQuantities:
    """Variance of the Gaussian fluctuations for a general profile."""
    if not (np.isfinite(kappa) and kappa >= 0):
        raise ValueError(f"kappa = E|W|^4 - 1 must be >= 0, got {kappa!r}")
    A, Delta, g = clt_matrices(profile, sol)
    K = profile.K
    radius = spectral_radius(A)
    if radius >= 1.0 - RADIUS_MARGIN:
        raise WellPosednessError(f"spectral radius of A is {radius!r} >= 1; I - A not invertible")
    rhs = g / Delta
    x = np.linalg.solve(np.eye(K) - A, rhs)
    solve_res = float(np.max(np.abs(x - A @ x - rhs), initial=0.0))
    term_fourth = float(kappa * np.sum(profile.d0 ** 2 * sol.t ** 2) / K)
    term_interf = float(g @ x / K)
    return CltQuantities(A, Delta, g, float(kappa), term_fourth + term_interf,
                         term_fourth, term_interf, radius, solve_res)


def omega_squared(sep: SeparableSolution, kappa: float) -> float:
    """Separable-profile variance, normalized by the user's power."""
    if not (np.isfinite(kappa) and kappa >= 0):
        raise ValueError(f"kappa must be >= 0, got {kappa!r}")
    s = sep.stability
    if s >= 1.0:
        raise WellPosednessError(f"rho^2 gamma gammatilde = {s!r} >= 1")
    return sep.gamma * (kappa + s / (1.0 - s))


def variance_rows(q: CltQuantities, sep: SeparableSolution | None = None,
                  omega2: float | None = None) -> list[tuple[str, object]]:
    rows = [
        ("kappa", q.kappa),
        ("theta2", q.theta2),
        ("term_fourth", q.term_fourth),
        ("term_interference", q.term_interference),
        ("spectral_radius", q.spectral_radius),
    ]
    if sep is not None:
        rows += [("gamma", sep.gamma), ("gammatilde", sep.gammatilde), ("omega2", omega2)]
    return rows
