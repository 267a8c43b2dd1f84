"""Nearest-neighbour spacing statistics and comparison with Poisson / Wigner-Dyson."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

__all__ = [
    "SpacingSample",
    "SpacingHistogram",
    "unfold",
    "histogram",
    "reference_poisson",
    "reference_wigner",
    "poisson_cdf",
    "wigner_cdf",
    "ks_distance",
    "sample_wigner",
]


@dataclass(frozen=True)
class SpacingSample:
    spacings: np.ndarray
    # (lambda, D_c, K) of the window the sample was drawn from, if any
    source: tuple | None = None

    def __len__(self) -> int:
        return self.spacings.shape[0]


@dataclass(frozen=True)
class SpacingHistogram:
    bin_edges: np.ndarray
    densities: np.ndarray
    count: int
    s_max: float

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def unfold(eigenvalues, window: int = 25, source: tuple | None = None) -> SpacingSample:
    """Spacings divided by a local mean spacing, then rescaled to unit mean.

    The local mean at spacing ``i`` is the average of ``window`` consecutive
    raw spacings centred on ``i``; near the ends the window is shifted
    (not shrunk) to stay inside the spectrum.
    """
    e = np.asarray(eigenvalues, dtype=float)
    if e.ndim != 1 or e.size < 3:
        raise ValueError("need at least 3 levels to form spacings")
    if window < 1:
        raise ValueError("window must be >= 1")
    if e.size < window + 2:
        raise ValueError(f"need at least window+2={window + 2} levels, got {e.size}")
    if np.any(np.diff(e) < 0):
        raise ValueError("eigenvalues must be ascending")
    raw = np.diff(e)
    n = raw.size
    csum = np.concatenate([[0.0], np.cumsum(raw)])
    lo = np.clip(np.arange(n) - window // 2, 0, n - window)
    local = (csum[lo + window] - csum[lo]) / window
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(local > 0, raw / local, 0.0)
    mean = s.mean()
    if mean > 0:
        s = s / mean
    return SpacingSample(s, source)


def histogram(sample: SpacingSample, bins: int = 25, s_max: float = 4.0) -> SpacingHistogram:
    """Density histogram on ``[0, s_max]``; overflow is folded into the last bin."""
    s = np.asarray(sample.spacings, dtype=float)
    if s.size == 0:
        raise ValueError("empty spacing sample")
    if bins < 4:
        raise ValueError("need at least 4 bins")
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    edges = np.linspace(0.0, s_max, bins + 1)
    idx = np.minimum(np.searchsorted(edges, s, side="right") - 1, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    dens = counts / (s.size * np.diff(edges))
    return SpacingHistogram(edges, dens, int(s.size), float(s_max))


def _check_nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("spacing must be non-negative")
    return s


def reference_poisson(s):
    return np.exp(-_check_nonneg(s))


def reference_wigner(s):
    s = _check_nonneg(s)
    return 0.5 * np.pi * s * np.exp(-0.25 * np.pi * s * s)


def poisson_cdf(s):
    return -np.expm1(-np.maximum(s, 0.0))


def wigner_cdf(s):
    s = np.maximum(s, 0.0)
    return -np.expm1(-0.25 * np.pi * s * s)


_CDFS: dict[str, Callable] = {"poisson": poisson_cdf, "wigner": wigner_cdf}


def ks_distance(sample: SpacingSample | np.ndarray, reference: str | Callable) -> float:
    """Kolmogorov-Smirnov sup distance between the sample's empirical CDF and a reference."""
    s = sample.spacings if isinstance(sample, SpacingSample) else np.asarray(sample, float)
    if s.size == 0:
        raise ValueError("empty spacing sample")
    cdf = _CDFS[reference] if isinstance(reference, str) else reference
    return float(stats.kstest(s, cdf).statistic)


def sample_wigner(rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw from the Wigner surmise by inverting its CDF."""
    u = rng.random(size)
    return np.sqrt(-4.0 / np.pi * np.log1p(-u))
