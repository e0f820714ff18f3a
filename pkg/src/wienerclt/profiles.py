"""
Variance profiles for the channel models and the random channel ingredients
of the MC-CDMA uplink scenario.

A profile is an ``N x (K+1)`` grid of entry variances. Column 0 belongs to
the user of interest; columns ``1..K`` are the interferers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


class ProfileError(ValueError):
    """Raised for invalid variance profiles or scenario ingredients."""


@dataclass(frozen=True)
class VarianceProfile:
    """Grid of variances ``sigma2[n, k]``, optionally with its separable factors.

    Attributes
    ----------
    sigma2 : ndarray, shape (N, K+1)
        Nonnegative finite entries. Column 0 is the user of interest.
    separable : tuple of ndarray or None
        ``(d, dtilde)`` such that ``sigma2 == outer(d, dtilde)``, stored verbatim.
    """

    sigma2: np.ndarray
    separable: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        s = np.array(self.sigma2, dtype=float)
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ProfileError(f"sigma2 must be a non-empty 2-D grid, got shape {s.shape}")
        _check_entries(s)
        s.setflags(write=False)
        object.__setattr__(self, "sigma2", s)
        if self.separable is not None:
            d = np.array(self.separable[0], dtype=float)
            dt = np.array(self.separable[1], dtype=float)
            if d.shape != (s.shape[0],) or dt.shape != (s.shape[1],):
                raise ProfileError("separable factors do not match the grid shape")
            d.setflags(write=False)
            dt.setflags(write=False)
            object.__setattr__(self, "separable", (d, dt))

    @property
    def N(self) -> int:
        return self.sigma2.shape[0]

    @property
    def K(self) -> int:
        return self.sigma2.shape[1] - 1

    @property
    def is_separable(self) -> bool:
        return self.separable is not None

    @property
    def d0(self) -> np.ndarray:
        """Diagonal of D_0, the variances of the user-of-interest column."""
        return self.sigma2[:, 0]

    @property
    def interferers(self) -> np.ndarray:
        """The ``N x K`` block of interferer variances (columns 1..K)."""
        return self.sigma2[:, 1:]

    def scaled(self, c: float) -> "VarianceProfile":
        """Return the profile with every variance multiplied by ``c > 0``."""
        if not c > 0:
            raise ProfileError("scale factor must be positive")
        sep = None
        if self.separable is not None:
            sep = (c * self.separable[0], self.separable[1].copy())
        return VarianceProfile(c * self.sigma2, sep)

    def to_text(self) -> str:
        """Serialize to the plain-text profile document."""
        lines = [
            "# variance profile",
            f"N {self.N}",
            f"K {self.K}",
            f"separable {int(self.is_separable)}",
        ]
        if self.separable is not None:
            lines.append("d " + " ".join(_fmt(v) for v in self.separable[0]))
            lines.append("dtilde " + " ".join(_fmt(v) for v in self.separable[1]))
        else:
            lines.append("grid")
            for row in self.sigma2:
                lines.append(" ".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "VarianceProfile":
        """Parse a document written by :meth:`to_text`."""
        header = {}
        rows = []
        d = dt = None
        in_grid = False
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if in_grid:
                rows.append([float(v) for v in line.split()])
                continue
            key, _, rest = line.partition(" ")
            if key in ("N", "K", "separable"):
                header[key] = int(rest)
            elif key == "d":
                d = [float(v) for v in rest.split()]
            elif key == "dtilde":
                dt = [float(v) for v in rest.split()]
            elif key == "grid":
                in_grid = True
            else:
                raise ProfileError(f"line {lineno}: unexpected key {key!r}")
        missing = {"N", "K", "separable"} - header.keys()
        if missing:
            raise ProfileError(f"profile header missing {sorted(missing)}")
        N, K = header["N"], header["K"]
        if header["separable"]:
            if d is None or dt is None:
                raise ProfileError("separable profile needs 'd' and 'dtilde' lines")
            prof = build_separable(d, dt)
        else:
            prof = VarianceProfile(np.array(rows, dtype=float))
        if prof.sigma2.shape != (N, K + 1):
            raise ProfileError(
                f"header says N={N}, K={K} but data has shape {prof.sigma2.shape}")
        return prof

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "VarianceProfile":
        return cls.from_text(Path(path).read_text())


def _fmt(v: float) -> str:
    return repr(float(v))


def _check_entries(s: np.ndarray) -> None:
    bad = ~np.isfinite(s) | (s < 0)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ProfileError(f"entry {idx} is {s[idx]!r}; variances must be finite and >= 0")


def build_general(sigma2) -> VarianceProfile:
    """Build a non-separable profile from an ``N x (K+1)`` grid.

    Column 0 must contain at least one strictly positive entry.
    """
    s = np.array(sigma2, dtype=float)
    if s.ndim != 2:
        raise ProfileError(f"sigma2 must be 2-D, got {s.ndim}-D")
    _check_entries(s)
    if not (s[:, 0] > 0).any():
        raise ProfileError("column 0 (user of interest) is identically zero")
    return VarianceProfile(s)


def build_separable(d, dtilde) -> VarianceProfile:
    """Build the separable profile ``sigma2[n, k] = d[n] * dtilde[k]``."""
    d = np.asarray(d, dtype=float)
    dt = np.asarray(dtilde, dtype=float)
    if d.ndim != 1 or dt.ndim != 1 or d.size == 0 or dt.size == 0:
        raise ProfileError("d and dtilde must be non-empty vectors")
    for name, v in (("d", d), ("dtilde", dt)):
        bad = ~np.isfinite(v) | (v < 0)
        if bad.any():
            i = int(np.argmax(bad))
            raise ProfileError(f"{name}[{i}] = {v[i]!r}; factors must be finite and >= 0")
    if not (d > 0).any():
        raise ProfileError("d is identically zero")
    if not dt[0] > 0:
        raise ProfileError("dtilde[0] must be > 0: the user of interest has no power")
    return VarianceProfile(np.outer(d, dt), (d, dt))


def sample_continuous(func: Callable, N: int, K: int) -> VarianceProfile:
    """Sample a nonnegative function on ``[0, 1]^2`` at ``(n/N, k/(K+1))``.

    ``n`` runs over ``1..N`` and ``k`` over ``0..K``. ``func`` is called once
    with broadcastable coordinate arrays.
    """
    if N < 1 or K < 0:
        raise ProfileError("need N >= 1 and K >= 0")
    x = (np.arange(1, N + 1) / N)[:, None]
    y = (np.arange(K + 1) / (K + 1))[None, :]
    grid = np.broadcast_to(np.asarray(func(x, y), dtype=float), (N, K + 1))
    return build_general(grid)


def cdma_flat_profile(N: int, powers) -> VarianceProfile:
    """CDMA on a flat channel: ``d_n = 1`` and ``dtilde_k = (K/N) p_k``."""
    p = np.asarray(powers, dtype=float)
    K = p.size - 1
    return build_separable(np.ones(N), (K / N) * p)


def mccdma_downlink_profile(freq_response, powers) -> VarianceProfile:
    """Downlink MC-CDMA: ``d_n = (K/N)|h_n|^2`` and ``dtilde_k = p_k``."""
    h = np.asarray(freq_response)
    p = np.asarray(powers, dtype=float)
    N, K = h.size, p.size - 1
    return build_separable((K / N) * np.abs(h) ** 2, p)


def mccdma_uplink_profile(freq_responses, powers) -> VarianceProfile:
    """Uplink MC-CDMA profile ``sigma2[n, k] = (K p_k / N) |h_k(n)|^2``.

    Parameters
    ----------
    freq_responses : sequence of K+1 complex vectors of length N
        Per-user channel transfer function at the N DFT points.
    powers : sequence of K+1 positive reals
    """
    H = np.asarray(freq_responses)
    p = np.asarray(powers, dtype=float)
    if H.ndim != 2:
        raise ProfileError("freq_responses must be (K+1) vectors of equal length N")
    if H.shape[0] != p.size:
        raise ProfileError(
            f"{H.shape[0]} frequency responses but {p.size} powers")
    if not (p > 0).all():
        raise ProfileError("powers must be > 0")
    K, N = p.size - 1, H.shape[1]
    sigma2 = (K / N) * (np.abs(H) ** 2).T * p[None, :]
    return VarianceProfile(sigma2)


def load_csv(path) -> VarianceProfile:
    """Read a general profile from CSV: N rows, K+1 columns, no header."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ProfileError(f"{path}: expected a rectangular numeric table")
    return build_general(rows)


# --- channel ingredients ---------------------------------------------------

@dataclass(frozen=True)
class ChannelRealization:
    """Impulse response of one user and its transfer function at the DFT points."""

    taps: np.ndarray
    freq_response: np.ndarray


def dft_points(N: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(N) / N)


def frequency_response(taps, N: int) -> np.ndarray:
    """Evaluate ``h(z) = sum_l taps[l] z^l`` at ``z = exp(2i pi (n-1)/N)``."""
    taps = np.asarray(taps, dtype=complex)
    # exponent reduced mod N keeps the phase exact for long responses
    expo = np.outer(np.arange(N), np.arange(taps.size)) % N
    return np.exp(2j * np.pi * expo / N) @ taps


def sample_rayleigh_taps(L: int, users: int, N: int, rng) -> list[ChannelRealization]:
    """Draw ``users`` independent impulse responses of ``L`` CN(0, 1/L) taps.

    ``rng`` is a :class:`numpy.random.Generator` or anything accepted by
    :func:`numpy.random.default_rng`.
    """
    if L < 1 or users < 1 or N < 1:
        raise ProfileError("L, users and N must be positive")
    rng = np.random.default_rng(rng)
    scale = math.sqrt(1.0 / (2 * L))
    taps = scale * (rng.standard_normal((users, L)) + 1j * rng.standard_normal((users, L)))
    return [ChannelRealization(t, frequency_response(t, N)) for t in taps]


# --- power classes ---------------------------------------------------------

@dataclass(frozen=True)
class PowerClassTable:
    """User classes as ``(multiplier, proportion)`` pairs relative to ``base_power``."""

    base_power: float
    classes: tuple[tuple[float, Fraction], ...] = field(default=())

    def __post_init__(self):
        if not self.base_power > 0:
            raise ProfileError("base_power must be > 0")
        classes = tuple((float(m), Fraction(q)) for m, q in self.classes)
        if not classes:
            raise ProfileError("power class table is empty")
        if any(m <= 0 for m, _ in classes):
            raise ProfileError("class multipliers must be > 0")
        if any(q < 0 or q > 1 for _, q in classes):
            raise ProfileError("class proportions must lie in [0, 1]")
        if sum(q for _, q in classes) != 1:
            raise ProfileError("class proportions must sum to exactly 1")
        object.__setattr__(self, "classes", classes)

    @classmethod
    def five_classes(cls, base_power: float = 1.0) -> "PowerClassTable":
        """Five classes P, 2P, 4P, 8P, 16P in proportions 1/8, 1/4, 1/4, 1/8, 1/4."""
        return cls(base_power, (
            (1, Fraction(1, 8)),
            (2, Fraction(1, 4)),
            (4, Fraction(1, 4)),
            (8, Fraction(1, 8)),
            (16, Fraction(1, 4)),
        ))


def class_counts(table: PowerClassTable, K: int) -> list[int]:
    """Number of interferers per class; nearest-integer rounding, residue to the last class."""
    if K < 0:
        raise ProfileError("K must be >= 0")
    counts = [math.floor(K * q + Fraction(1, 2)) for _, q in table.classes]
    residue = K - sum(counts)
    counts[-1] += residue
    # an over-full rounding can push the last class negative; borrow backwards
    i = len(counts) - 1
    while counts[i] < 0:
        counts[i - 1] += counts[i]
        counts[i] = 0
        i -= 1
    return counts


def expand_power_classes(table: PowerClassTable, K: int) -> np.ndarray:
    """Per-user powers, length K+1: user 0 gets ``base_power``, then class blocks in order."""
    counts = class_counts(table, K)
    powers = [table.base_power]
    for (mult, _), c in zip(table.classes, counts):
        powers.extend([table.base_power * mult] * c)
    return np.array(powers, dtype=float)


def mccdma_uplink_scenario(N: int, K: int, table: PowerClassTable, L: int, rng,
                           ) -> tuple[VarianceProfile, list[ChannelRealization], np.ndarray]:
    """Draw per-user Rayleigh channels and build the uplink profile.

    Returns the profile, the channel draws and the power vector.
    """
    powers = expand_power_classes(table, K)
    channels = sample_rayleigh_taps(L, K + 1, N, rng)
    profile = mccdma_uplink_profile([c.freq_response for c in channels], powers)
    return profile, channels, powers


def as_vector(values: Sequence[float] | str) -> np.ndarray:
    """Parse a comma/space separated list of floats (fractions allowed)."""
    if isinstance(values, str):
        values = [v for v in values.replace(",", " ").split() if v]
    return np.array([float(Fraction(v)) if isinstance(v, str) else float(v) for v in values])
