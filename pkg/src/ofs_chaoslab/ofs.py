"""Operator fidelity susceptibility: the eigenvector term chi1 and eigenvalue term chi2.

For a state ``rho`` diagonal in the energy eigenbasis,

    chi1 = 2 pi t sum_n rho_n sum_{m != n} |V_nm|^2 G_t(E_n - E_m)
    chi2 = t^2 (sum_n rho_n V_nn^2 - (sum_n rho_n V_nn)^2)

with the gap filter ``G_t(x) = 2 sin^2(t x / 2) / (pi t x^2)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import HamiltonianFamily
from .spectral import (
    ConvergedWindow,
    EigenbasisPerturbation,
    SpectralError,
    Spectrum,
    convergence_filter,
    diagonalize,
    diagonalize_grid,
    transform_perturbation,
)

log = logging.getLogger(__name__)

__all__ = [
    "StateWeights",
    "WeightMode",
    "OfsPoint",
    "PartialSumCurve",
    "SweepResult",
    "g_kernel",
    "make_weights",
    "chi1",
    "chi2",
    "chi1_partial_sums",
    "sweep",
    "parse_temperature",
    "moving_average",
    "chi1_shape",
    "chi2_trend",
]


def g_kernel(x, t: float):
    """``2 sin^2(t x/2) / (pi t x^2)``, with the limit ``t / (2 pi)`` at ``x = 0``."""
    if not t > 0:
        raise ValueError(f"time must be > 0, got {t}")
    x = np.asarray(x, dtype=float)
    # sinc form: exact at x = 0 and no underflow for tiny gaps
    out = t / (2.0 * np.pi) * np.sinc(t * x / (2.0 * np.pi)) ** 2
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WeightMode:
    """``gibbs`` at inverse temperature ``beta``, or uniform ``infinite`` temperature."""

    kind: str
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gibbs", "infinite"):
            raise ValueError(f"unknown weight mode {self.kind!r}")
        if self.kind == "gibbs" and not self.beta > 0:
            raise ValueError(f"gibbs weights need beta > 0, got {self.beta}")

    @classmethod
    def gibbs(cls, beta: float) -> "WeightMode":
        return cls("gibbs", float(beta))

    @classmethod
    def infinite(cls) -> "WeightMode":
        return cls("infinite", 0.0)

    @classmethod
    def from_temperature(cls, T: float) -> "WeightMode":
        if math.isinf(T):
            return cls.infinite()
        if not T > 0:
            raise ValueError(f"temperature must be > 0, got {T}")
        return cls.gibbs(1.0 / T)

    @property
    def temperature(self) -> float:
        return math.inf if self.kind == "infinite" else 1.0 / self.beta

    @property
    def label(self) -> str:
        return "T=inf" if self.kind == "infinite" else f"T={self.temperature:g}"


def parse_temperature(tok: str | float) -> float:
    if isinstance(tok, str) and tok.strip().lower() in ("inf", "infinity", "∞"):
        return math.inf
    return float(tok)


@dataclass(frozen=True)
class StateWeights:
    mode: WeightMode
    weights: np.ndarray
    # Z(D_c, beta) relative to exp(-beta E_0); D_c for infinite temperature
    partition: float


def _boltzmann(energies: np.ndarray, mode: WeightMode) -> np.ndarray:
    if mode.kind == "infinite":
        return np.ones_like(energies)
    # shift by the lowest level to avoid overflow
    return np.exp(-mode.beta * (energies - energies.min()))


def make_weights(spectrum: Spectrum | np.ndarray, D_c: int, mode: WeightMode) -> StateWeights:
    """Normalized weights over the lowest ``D_c`` levels only."""
    e = spectrum.eigenvalues if isinstance(spectrum, Spectrum) else np.asarray(spectrum, float)
    if D_c < 1:
        raise ValueError("D_c must be >= 1")
    if D_c > e.size:
        raise ValueError(f"D_c={D_c} exceeds number of levels {e.size}")
    e = e[:D_c]
    if mode.kind == "infinite":
        return StateWeights(mode, np.full(D_c, 1.0 / D_c), float(D_c))
    b = _boltzmann(e, mode)
    z = math.fsum(b)
    return StateWeights(mode, b / z, z)


def _gap_matrix(energies: np.ndarray, t: float) -> np.ndarray:
    gaps = energies[:, None] - energies[None, :]
    g = g_kernel(gaps, t)
    np.fill_diagonal(g, 0.0)
    return g


def chi1(
    spec: Spectrum | np.ndarray,
    vp: EigenbasisPerturbation | np.ndarray,
    w: StateWeights,
    t: float,
    D_c: int | None = None,
) -> float:
    """Eigenvector term of the susceptibility over the lowest ``D_c`` levels.

    The double sum is accumulated with ``math.fsum`` (exactly rounded).
    """
    e = spec.eigenvalues if isinstance(spec, Spectrum) else np.asarray(spec, float)
    vm = vp.entries if isinstance(vp, EigenbasisPerturbation) else np.asarray(vp, float)
    d = D_c if D_c is not None else w.weights.size
    if not (vm.shape[0] >= d and w.weights.size == d and e.size >= d):
        raise ValueError("dimension mismatch between spectrum, perturbation and weights")
    e, vm = e[:d], vm[:d, :d]
    terms = (w.weights[:, None] * vm * vm) * _gap_matrix(e, t)
    return 2.0 * np.pi * t * math.fsum(terms.ravel())


def chi2(
    spec: Spectrum | np.ndarray | None,
    vp: EigenbasisPerturbation | np.ndarray,
    w: StateWeights,
    t: float,
) -> float:
    """Eigenvalue term: ``t^2`` times the rho-variance of the diagonal of V."""
    if not t > 0:
        raise ValueError(f"time must be > 0, got {t}")
    if isinstance(vp, EigenbasisPerturbation):
        vd = vp.diag
    else:
        vd = np.asarray(vp, float)
        vd = np.diagonal(vd) if vd.ndim == 2 else vd
    vd = vd[: w.weights.size]
    mean = math.fsum(w.weights * vd)
    # centred form keeps the variance non-negative in floating point
    var = math.fsum(w.weights * (vd - mean) ** 2)
    return t * t * var


def chi1_partial_sums(
    energies: np.ndarray, vp: EigenbasisPerturbation | np.ndarray, mode: WeightMode, t: float
) -> np.ndarray:
    """``chi1(D)`` for ``D = 1..len(energies)``, each with weights renormalized over ``D`` levels."""
    e = np.asarray(energies, dtype=float)
    vm = vp.entries if isinstance(vp, EigenbasisPerturbation) else np.asarray(vp, float)
    d = e.size
    vm = vm[:d, :d]
    b = _boltzmann(e, mode)
    a = (b[:, None] * vm * vm) * _gap_matrix(e, t)
    # S(D) = sum of the leading D x D block of a
    block = np.cumsum(np.cumsum(a, axis=0), axis=1)
    s = np.diagonal(block)
    z = np.cumsum(b)
    return 2.0 * np.pi * t * s / z


@dataclass(frozen=True)
class OfsPoint:
    lam: float
    t: float
    mode: WeightMode
    chi1: float
    chi2: float
    D_c: int
    K: int


@dataclass(frozen=True)
class PartialSumCurve:
    lam: float
    t: float
    mode: WeightMode
    values: np.ndarray


@dataclass
class SweepResult:
    points: list[OfsPoint]
    curves: list[PartialSumCurve]
    window: ConvergedWindow
    failures: list[tuple[float, str]] = field(default_factory=list)
    # lambda -> lowest D_c eigenvalues, kept for level statistics
    eigenvalues: dict[float, np.ndarray] = field(default_factory=dict)

    def select(self, t: float, mode: WeightMode) -> list[OfsPoint]:
        return [p for p in self.points if p.t == t and p.mode == mode]


def evaluate_lambda(
    family: HamiltonianFamily,
    lam: float,
    D_c: int,
    t_list: Sequence[float],
    modes: Sequence[WeightMode],
    partial_modes: Sequence[WeightMode] = (),
) -> tuple[list[OfsPoint], list[PartialSumCurve], np.ndarray]:
    spec = diagonalize(family, lam, vectors=True)
    vp = transform_perturbation(spec, family.v, D_c)
    e = spec.eigenvalues[:D_c]
    points, curves = [], []
    for t in t_list:
        for mode in modes:
            w = make_weights(e, D_c, mode)
            points.append(OfsPoint(lam, t, mode, chi1(e, vp, w, t), chi2(e, vp, w, t), D_c, family.K))
        for mode in partial_modes:
            curves.append(PartialSumCurve(lam, t, mode, chi1_partial_sums(e, vp, mode, t)))
    return points, curves, e


def sweep(
    family: HamiltonianFamily,
    family_prime: HamiltonianFamily | None,
    grid: Sequence[float],
    tol: float,
    t_list: Sequence[float],
    modes: Sequence[WeightMode],
    dc_policy: str | int = "auto",
    partial_lambdas: Iterable[float] = (),
    jobs: int | None = 1,
    window: ConvergedWindow | None = None,
    partial_modes: Sequence[WeightMode] | None = None,
) -> SweepResult:
    """Evaluate chi1 and chi2 at every ``(lambda, t, mode)``.

    With ``dc_policy='auto'`` a single worst-case converged window over the
    whole grid is used at every point. Per-lambda failures are recorded and
    the remaining points are still evaluated. Partial-sum curves are produced
    at ``partial_lambdas`` for ``partial_modes`` (default: all modes).
    """
    grid = [float(x) for x in grid]
    if window is None:
        if family_prime is None:
            raise ValueError("need family_prime (or a precomputed window) to find the converged window")
        spectra = diagonalize_grid(family, grid, vectors=False, jobs=jobs)
        spectra_p = diagonalize_grid(family_prime, grid, vectors=False, jobs=jobs)
        window = convergence_filter(spectra, spectra_p, tol)
    D_c = window.D_c if dc_policy == "auto" else int(dc_policy)
    if D_c < 1:
        raise ValueError(f"converged window is empty (D_c={D_c}); loosen tol or raise K")
    partial_set = {float(x) for x in partial_lambdas}
    result = SweepResult([], [], window)

    def job(lam):
        try:
            return lam, evaluate_lambda(
                family, lam, D_c, t_list, modes,
                partial_modes=(modes if partial_modes is None else partial_modes) if lam in partial_set else (),
            ), None
        except (SpectralError, np.linalg.LinAlgError, ValueError) as exc:
            return lam, None, str(exc)

    lams = sorted(set(grid) | partial_set)
    if jobs is not None and jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(job, lams))
    else:
        outcomes = [job(lam) for lam in lams]
    for lam, res, err in outcomes:
        if err is not None:
            log.error("lambda=%r failed: %s", lam, err)
            result.failures.append((lam, err))
            continue
        pts, curves, e = res
        if lam in set(grid):
            result.points.extend(pts)
        result.curves.extend(curves)
        result.eigenvalues[lam] = e
    order = {(t, m): i for i, (t, m) in enumerate((t, m) for t in t_list for m in modes)}
    result.points.sort(key=lambda p: (p.lam, order[(p.t, p.mode)]))
    return result


def moving_average(values: np.ndarray, width: int = 5) -> np.ndarray:
    """Centred moving average; the window is shifted (not shrunk) at the ends."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < width:
        return np.full(n, v.mean())
    csum = np.concatenate([[0.0], np.cumsum(v)])
    lo = np.clip(np.arange(n) - width // 2, 0, n - width)
    return (csum[lo + width] - csum[lo]) / width


def chi1_shape(lams: np.ndarray, values: np.ndarray, width: int = 5) -> dict:
    """Locate the dip and the global peak of a chi1(lambda) curve.

    Works on the moving average. The peak is its global maximum. The dip is
    the deepest valley before the peak: the point ``i`` maximizing
    ``min(max(sm[:i]), sm[peak]) - sm[i]``. A positive depth means a local
    minimum precedes the global maximum. ``drop_after_peak`` is the relative
    decrease of the moving average from the peak to the last grid point.
    """
    lams = np.asarray(lams, dtype=float)
    order = np.argsort(lams)
    lams, raw = lams[order], np.asarray(values, dtype=float)[order]
    sm = moving_average(raw, width)
    i_max = int(np.argmax(sm))
    i_min, depth = 0, 0.0
    if i_max >= 2:
        lead = np.maximum.accumulate(sm)[: i_max - 1]  # max(sm[:i]) for i = 1..i_max-1
        d = np.minimum(lead, sm[i_max]) - sm[1:i_max]
        i_min = 1 + int(np.argmax(d))
        depth = float(d[i_min - 1])
    return {
        "lambda_max": float(lams[i_max]),
        "value_max": float(sm[i_max]),
        "lambda_min": float(lams[i_min]),
        "value_min": float(sm[i_min]),
        "dip_depth": depth / float(sm[i_max]) if sm[i_max] > 0 else 0.0,
        "lambda_raw_max": float(lams[int(np.argmax(raw))]),
        "has_min_then_max": bool(depth > 0 and i_min < i_max),
        "drop_after_peak": float(1.0 - sm[-1] / sm[i_max]) if sm[i_max] > 0 else 0.0,
        "smoothing_width": width,
    }


def chi2_trend(lams: np.ndarray, chi2_values: np.ndarray, chi1_values: np.ndarray | None = None) -> dict:
    lams = np.asarray(lams, dtype=float)
    order = np.argsort(lams)
    c2 = np.asarray(chi2_values, dtype=float)[order]
    out = {
        "strictly_positive": bool(np.all(c2 > 0)),
        "monotone_decreasing": bool(np.all(np.diff(c2) < 0)),
        "n_increases": int(np.sum(np.diff(c2) >= 0)),
    }
    if chi1_values is not None:
        c1 = np.asarray(chi1_values, dtype=float)[order]
        out["ratio_max_chi2_to_max_chi1"] = float(c2.max() / c1.max()) if c1.max() > 0 else math.inf
    return out
