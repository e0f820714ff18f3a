"""
Monte Carlo evaluation of the Wiener receiver SNR ``y^* (Y Y^* + rho I)^-1 y``.

Every trial draws its own entry matrix ``W`` from a stream derived from
``(seed, trial index)``, so campaign results do not depend on how trials are
distributed over workers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import erfc

from .profiles import VarianceProfile

LAWS = ("complex-gaussian", "qpsk")
STREAM_RULE = "PCG64(SeedSequence(seed, spawn_key=(0, trial)))"
_TRIAL_KEY = 0
_CHANNEL_KEY = 1
_CHUNK = 256


class SimulationError(RuntimeError):
    pass


def trial_stream(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial."""
    ss = np.random.SeedSequence(seed, spawn_key=(_TRIAL_KEY, trial))
    return np.random.Generator(np.random.PCG64(ss))


def channel_stream(seed: int) -> np.random.Generator:
    """Generator reserved for drawing scenario channels; disjoint from trial streams."""
    ss = np.random.SeedSequence(seed, spawn_key=(_CHANNEL_KEY,))
    return np.random.Generator(np.random.PCG64(ss))


def sample_entries(law: str, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Draw iid entries with ``E W = 0``, ``E W^2 = 0`` and ``E|W|^2 = 1``."""
    if law == "complex-gaussian":
        z = rng.standard_normal((2, rows, cols))
        return (z[0] + 1j * z[1]) * math.sqrt(0.5)
    if law == "qpsk":
        b = 2.0 * rng.integers(0, 2, size=(2, rows, cols)) - 1.0
        return (b[0] + 1j * b[1]) * math.sqrt(0.5)
    raise ValueError(f"unknown entry law {law!r}; expected one of {LAWS}")


def assemble_sigma(profile: VarianceProfile, W: np.ndarray):
    """Form ``Sigma = [sigma_nk W_nk / sqrt(K)]`` and split it into ``(y, Y)``."""
    W = np.asarray(W)
    if W.shape != profile.sigma2.shape:
        raise ValueError(f"W has shape {W.shape}, profile needs {profile.sigma2.shape}")
    Sigma = _amplitudes(profile) * W
    return Sigma[:, 0], Sigma[:, 1:]


def _amplitudes(profile: VarianceProfile) -> np.ndarray:
    return np.sqrt(profile.sigma2) / math.sqrt(profile.K)


def snr_quadratic_form(y, Y, rho: float) -> float:
    """``Re(y^* x)`` where ``(Y Y^* + rho I) x = y``, via a Cholesky factorization."""
    if not rho > 0:
        raise ValueError("rho must be > 0")
    y = np.asarray(y, dtype=complex)
    Y = np.asarray(Y, dtype=complex).reshape(y.size, -1)
    G = Y @ Y.conj().T
    G[np.diag_indices_from(G)] += rho
    try:
        c = cho_factor(G, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SimulationError(f"resolvent factorization failed: {exc}") from exc
    v = np.vdot(y, cho_solve(c, y, check_finite=False))
    beta = float(v.real)
    if abs(v.imag) > 1e-10 * max(abs(beta), np.finfo(float).tiny):
        raise SimulationError(f"quadratic form has non-negligible imaginary part {v.imag!r}")
    return beta


@dataclass
class TrialSet:
    betas: np.ndarray
    scenario_fingerprint: str
    R: int
    seed: int
    rho: float
    law: str
    K: int
    per_trial_streams: str = STREAM_RULE
    norms: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "beta"])
            for r, b in enumerate(self.betas):
                w.writerow([r, repr(float(b))])


def fingerprint(profile: VarianceProfile, rho: float, law: str, seed: int) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(profile.sigma2, dtype="<f8").tobytes())
    h.update(f"|{profile.N}|{profile.K}|{float(rho)!r}|{law}|{int(seed)}".encode())
    return h.hexdigest()


def _run_chunk(amp, rho, law, seed, start, stop):
    betas = np.empty(stop - start)
    norms = np.empty(stop - start)
    N, cols = amp.shape
    for i, r in enumerate(range(start, stop)):
        W = sample_entries(law, N, cols, trial_stream(seed, r))
        Sigma = amp * W
        y = Sigma[:, 0]
        betas[i] = snr_quadratic_form(y, Sigma[:, 1:], rho)
        norms[i] = float(np.vdot(y, y).real)
    return betas, norms


def run_trials(profile: VarianceProfile, rho: float, law: str, R: int, seed: int,
               workers: int = 1) -> TrialSet:
    """Run ``R`` independent SNR evaluations on a fixed profile.

    Trial ``r`` uses :func:`trial_stream(seed, r) <trial_stream>`, hence the
    betas are bit-identical for any ``workers``.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if law not in LAWS:
        raise ValueError(f"unknown entry law {law!r}")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if profile.K < 1:
        raise ValueError("need at least one interferer")
    amp = _amplitudes(profile)
    bounds = [(s, min(s + _CHUNK, R)) for s in range(0, R, _CHUNK)]
    if workers == 1:
        parts = [_run_chunk(amp, rho, law, seed, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda ab: _run_chunk(amp, rho, law, seed, *ab), bounds))
    betas = np.concatenate([p[0] for p in parts])
    norms = np.concatenate([p[1] for p in parts])
    return TrialSet(betas, fingerprint(profile, rho, law, seed), R, int(seed), float(rho),
                    law, profile.K, norms=norms)


def standardize(trials, beta_bar: float, theta: float, K: int | None = None) -> np.ndarray:
    """Map each sample to ``sqrt(K) (beta - beta_bar) / theta``.

    ``trials`` is a :class:`TrialSet` (``K`` then optional) or an array of betas.
    """
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if isinstance(trials, TrialSet):
        betas, K = trials.betas, trials.K if K is None else K
    else:
        betas = np.asarray(trials, dtype=float)
    if K is None:
        raise ValueError("K is required to standardize a bare array")
    return math.sqrt(K) * (betas - beta_bar) / theta


@dataclass
class NormalityReport:
    mean: float
    variance: float
    ks_statistic: float
    ks_pvalue: float
    histogram: list[tuple[float, float, int]]
    normal_overlay: list[tuple[float, float]]

    def histogram_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_left", "bin_right", "count", "bin_center", "normal_density"])
            for (lo, hi, c), (mid, dens) in zip(self.histogram, self.normal_overlay):
                w.writerow([repr(lo), repr(hi), c, repr(mid), repr(dens)])


def normal_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def kolmogorov_sf(lam: float, eps: float = 1e-12) -> float:
    """Survival function of the Kolmogorov distribution at ``lam``."""
    if lam <= 0:
        return 1.0
    total = 0.0
    if lam < 1.18:
        # Jacobi-transformed series converges fast for small arguments
        c = math.pi ** 2 / (8.0 * lam * lam)
        k = 1
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * c)
            total += term
            if term < eps:
                break
            k += 1
        p = 1.0 - math.sqrt(2.0 * math.pi) / lam * total
    else:
        k = 1
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            total += term if k % 2 else -term
            if term < eps:
                break
            k += 1
        p = 2.0 * total
    return min(1.0, max(0.0, p))


def ks_statistic(samples) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = normal_cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def _fd_edges(x: np.ndarray) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    q75, q25 = np.percentile(x, [75, 25])
    width = 2.0 * (q75 - q25) * x.size ** (-1.0 / 3.0)
    if hi == lo or width <= 0:
        return np.array([lo - 0.5, hi + 0.5]) if hi == lo else np.array([lo, hi])
    nbins = max(1, min(int(math.ceil((hi - lo) / width)), 10_000))
    return np.linspace(lo, hi, nbins + 1)


def ks_normality(samples) -> NormalityReport:
    """One-sample KS test against N(0, 1) plus a Freedman-Diaconis histogram."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise ValueError(f"normality test needs at least 100 samples, got {x.size}")
    D = ks_statistic(x)
    p = kolmogorov_sf(math.sqrt(x.size) * D)
    edges = _fd_edges(x)
    counts, _ = np.histogram(x, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    dens = np.exp(-0.5 * centers ** 2) / math.sqrt(2.0 * math.pi)
    hist = [(float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]
    overlay = [(float(c), float(v)) for c, v in zip(centers, dens)]
    return NormalityReport(float(x.mean()), float(x.var(ddof=1)), D, p, hist, overlay)


def empirical_moments(trials, beta_bar: float):
    """Return ``(mean, unbiased variance, mean of (beta - beta_bar)^2)``."""
    b = trials.betas if isinstance(trials, TrialSet) else np.asarray(trials, dtype=float)
    if b.size < 2:
        raise ValueError("need at least 2 trials")
    return float(b.mean()), float(b.var(ddof=1)), float(np.mean((b - beta_bar) ** 2))


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
