"""
Deterministic equivalents at ``z = -rho``.

The general system couples ``t`` (length N) and ``ttilde`` (length K, the
interferer columns only)::

    t_n      = 1 / (rho * (1 + (1/K) sum_k sigma2[n, k] ttilde_k))
    ttilde_k = 1 / (rho * (1 + (1/K) sum_n sigma2[n, k] t_n))

and is solved by damped Picard iteration from ``t = ttilde = 1/rho``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profiles import VarianceProfile

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000
FALLBACK_DAMPING = 0.5


class ConvergenceError(RuntimeError):
    """The fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class WellPosednessError(ArithmeticError):
    """A quantity required to be finite/invertible is not."""


@dataclass(frozen=True)
class FixedPointSolution:
    rho: float
    t: np.ndarray
    ttilde: np.ndarray
    residual: float
    iterations: int
    tol: float
    damping: float = 0.0
    converged: bool = True


@dataclass(frozen=True)
class SeparableSolution:
    rho: float
    delta: float
    deltatilde: float
    gamma: float
    gammatilde: float
    residual: float
    iterations: int

    @property
    def stability(self) -> float:
        """``rho^2 * gamma * gammatilde``; must stay below 1."""
        return self.rho ** 2 * self.gamma * self.gammatilde


def _check_rho(rho):
    if not (np.isfinite(rho) and rho > 0):
        raise ValueError(f"rho must be a positive finite number, got {rho!r}")


def _general_map(S: np.ndarray, rho: float, t, tt):
    K = S.shape[1]
    new_t = 1.0 / (rho * (1.0 + S @ tt / K))
    new_tt = 1.0 / (rho * (1.0 + S.T @ t / K))
    return new_t, new_tt


def residual(t, ttilde, profile: VarianceProfile, rho: float) -> float:
    """Sup-norm defect of both equation families at ``(t, ttilde)``."""
    t = np.asarray(t, dtype=float)
    tt = np.asarray(ttilde, dtype=float)
    S = profile.interferers
    if t.shape != (S.shape[0],) or tt.shape != (S.shape[1],):
        raise ValueError("t and ttilde lengths must be N and K")
    ft, ftt = _general_map(S, rho, t, tt)
    return float(max(np.max(np.abs(ft - t), initial=0.0),
                     np.max(np.abs(ftt - tt), initial=0.0)))


def _picard(F, x0, tol, max_iter, damping):
    """Damped Picard iteration on a flat vector.

    Returns ``(x, residual, iterations, damping_used, converged)``. The
    residual is measured as ``|F(x) - x|`` for the returned ``x``.
    """
    x = x0
    prev = np.inf
    rises = 0
    res = np.inf
    for it in range(1, max_iter + 1):
        fx = F(x)
        res = float(np.max(np.abs(fx - x)))
        if not np.isfinite(res):
            return x, res, it, damping, False
        if res <= tol:
            return x, res, it, damping, True
        rises = rises + 1 if res > prev else 0
        if rises >= 2 and damping == 0.0:
            damping = FALLBACK_DAMPING
            rises = 0
        prev = res
        x = (1.0 - damping) * fx + damping * x if damping else fx
    return x, res, max_iter, damping, False


def solve_general(profile: VarianceProfile, rho: float, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, damping: float = 0.0) -> FixedPointSolution:
    """Solve for ``t_n(-rho)`` and ``ttilde_k(-rho)`` on an arbitrary profile.

    Raises
    ------
    ConvergenceError
        If the sup-norm defect is still above ``tol`` after ``max_iter`` maps.
    """
    _check_rho(rho)
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must lie in [0, 1)")
    if profile.K < 1:
        raise ValueError("the fixed-point system needs at least one interferer (K >= 1)")
    S = profile.interferers
    N, K = S.shape

    def F(x):
        a, b = _general_map(S, rho, x[:N], x[N:])
        return np.concatenate([a, b])

    x0 = np.full(N + K, 1.0 / rho)
    x, res, it, damp, ok = _picard(F, x0, tol, max_iter, damping)
    if not ok:
        raise ConvergenceError("general fixed point did not converge", res, it)
    return FixedPointSolution(float(rho), x[:N].copy(), x[N:].copy(), res, it, tol, damp)


def solve_separable(d, dtilde_interf, rho: float, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, damping: float = 0.0) -> SeparableSolution:
    """Solve the two-equation system for ``(delta, deltatilde)`` and derive ``gamma``, ``gammatilde``.

    ``dtilde_interf`` holds the interferer factors only (user 0 excluded).
    """
    _check_rho(rho)
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must lie in [0, 1)")
    d = np.asarray(d, dtype=float)
    dt = np.asarray(dtilde_interf, dtype=float)
    K = dt.size
    if K < 1:
        raise ValueError("need at least one interferer")

    def F(x):
        delta, deltat = x
        return np.array([
            np.sum(d / (rho * (1.0 + deltat * d))) / K,
            np.sum(dt / (rho * (1.0 + delta * dt))) / K,
        ])

    # start from the t = 1/rho point of the general iteration
    x0 = np.array([d.sum() / (rho * K), dt.sum() / (rho * K)])
    x, res, it, _, ok = _picard(F, x0, tol, max_iter, damping)
    if not ok:
        raise ConvergenceError("separable fixed point did not converge", res, it)
    delta, deltat = (float(v) for v in x)
    gamma = float(np.sum((d / (rho * (1.0 + deltat * d))) ** 2) / K)
    gammat = float(np.sum((dt / (rho * (1.0 + delta * dt))) ** 2) / K)
    sol = SeparableSolution(float(rho), delta, deltat, gamma, gammat, res, it)
    if sol.stability >= 1.0:
        raise WellPosednessError(
            f"rho^2 * gamma * gammatilde = {sol.stability!r} >= 1; variance formula undefined")
    return sol


def separable_to_general(profile: VarianceProfile, sep: SeparableSolution):
    """Map a separable solution to ``(t, ttilde)`` vectors.

    ``t = (1/rho) (1 + deltatilde d)^-1`` and ``ttilde = (1/rho) (1 + delta dtilde)^-1``.
    """
    if profile.separable is None:
        raise ValueError("profile is not separable")
    d, dt = profile.separable
    t = 1.0 / (sep.rho * (1.0 + sep.deltatilde * d))
    tt = 1.0 / (sep.rho * (1.0 + sep.delta * dt[1:]))
    return t, tt


def solve_profile_separable(profile: VarianceProfile, rho: float, **kw) -> SeparableSolution:
    """Convenience wrapper: run :func:`solve_separable` on a profile's stored factors."""
    if profile.separable is None:
        raise ValueError("profile is not separable")
    d, dt = profile.separable
    return solve_separable(d, dt[1:], rho, **kw)


def deterministic_snr(solution: FixedPointSolution, profile: VarianceProfile) -> float:
    """First-order SNR approximation ``(1/K) sum_n sigma2[n, 0] t_n``."""
    if not solution.converged:
        raise ValueError("solution did not converge")
    if solution.t.shape != (profile.N,):
        raise ValueError("solution does not belong to this profile")
    return float(profile.d0 @ solution.t / profile.K)


def solution_rows(sol: FixedPointSolution, profile: VarianceProfile,
                  sep: SeparableSolution | None = None) -> list[tuple[str, object]]:
    """Flatten a solution into ``(quantity, value)`` rows for the CSV report."""
    rows = [
        ("rho", sol.rho),
        ("N", profile.N),
        ("K", profile.K),
        ("iterations", sol.iterations),
        ("residual", sol.residual),
        ("damping", sol.damping),
        ("beta_bar", deterministic_snr(sol, profile)),
    ]
    if sep is not None:
        rows += [("delta", sep.delta), ("deltatilde", sep.deltatilde),
                 ("gamma", sep.gamma), ("gammatilde", sep.gammatilde)]
    rows += [(f"t[{n}]", v) for n, v in enumerate(sol.t, 1)]
    rows += [(f"ttilde[{k}]", v) for k, v in enumerate(sol.ttilde, 1)]
    return rows
