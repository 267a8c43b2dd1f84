"""Dense diagonalization of H(lam) over a coupling grid and truncation-convergence control."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import HamiltonianFamily, OperatorMatrix

log = logging.getLogger(__name__)

__all__ = [
    "SpectralError",
    "Spectrum",
    "ConvergedWindow",
    "EigenbasisPerturbation",
    "diagonalize",
    "diagonalize_grid",
    "convergence_filter",
    "transform_perturbation",
    "lambda_grid",
    "fix_signs",
]


class SpectralError(RuntimeError):
    """Eigensolver failure at a specific coupling and truncation."""

    def __init__(self, lam: float, K: int, cause: Exception | str):
        self.lam = lam
        self.K = K
        super().__init__(f"diagonalization failed at lambda={lam!r}, K={K}: {cause}")


@dataclass(frozen=True)
class Spectrum:
    lam: float
    K: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def lowest(self, d: int) -> "Spectrum":
        vecs = None if self.eigenvectors is None else self.eigenvectors[:, :d]
        return Spectrum(self.lam, self.K, self.eigenvalues[:d], vecs)


@dataclass(frozen=True)
class ConvergedWindow:
    D_c: int
    tol: float
    K_pair: tuple[int, int]
    lambda_grid: tuple[float, ...]
    # per-lambda count of leading levels within tol, before taking the minimum
    per_lambda: tuple[int, ...] = ()
    warning: str | None = None

    @property
    def indices(self) -> range:
        return range(self.D_c)


@dataclass(frozen=True)
class EigenbasisPerturbation:
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def diag(self) -> np.ndarray:
        return np.diagonal(self.entries).copy()


def fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude component is positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def diagonalize(h: HamiltonianFamily, lam: float, vectors: bool = True) -> Spectrum:
    """Full spectrum of ``H0 + lam V`` (ascending), optionally with eigenvectors."""
    if not lam >= 0:
        raise ValueError(f"coupling must be >= 0, got {lam}")
    mat = h.matrix(lam)
    try:
        if vectors:
            vals, vecs = np.linalg.eigh(mat)
            vecs = fix_signs(vecs)
        else:
            vals, vecs = np.linalg.eigvalsh(mat), None
    except np.linalg.LinAlgError as exc:
        raise SpectralError(lam, h.K, exc) from exc
    if not np.all(np.isfinite(vals)):
        raise SpectralError(lam, h.K, "non-finite eigenvalues")
    return Spectrum(float(lam), h.K, vals, vecs)


def diagonalize_grid(
    h: HamiltonianFamily,
    grid: Sequence[float],
    vectors: bool = False,
    jobs: int | None = 1,
    keep: int | None = None,
) -> list[Spectrum]:
    """Diagonalize at every grid point; results are returned in grid order.

    ``keep`` trims each spectrum to its lowest levels to bound memory.
    """

    def one(lam):
        spec = diagonalize(h, lam, vectors=vectors)
        return spec.lowest(keep) if keep is not None else spec

    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1:
        return [one(lam) for lam in grid]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, grid))


def convergence_filter(
    spectra_K: Sequence[Spectrum],
    spectra_Kp: Sequence[Spectrum],
    tol: float,
) -> ConvergedWindow:
    """Largest ``d`` such that the lowest ``d`` levels agree within ``tol`` at every grid point.

    Levels are matched by sorted index.
    """
    if len(spectra_K) == 0:
        raise ValueError("empty coupling grid")
    if len(spectra_K) != len(spectra_Kp):
        raise ValueError("spectra lists cover different grids")
    K, Kp = spectra_K[0].K, spectra_Kp[0].K
    if not Kp > K:
        raise ValueError(f"need K' > K, got K={K}, K'={Kp}")
    per = []
    for a, b in zip(spectra_K, spectra_Kp):
        if a.lam != b.lam:
            raise ValueError(f"grid mismatch: {a.lam} vs {b.lam}")
        n = min(a.dim, b.dim)
        dev = np.abs(a.eigenvalues[:n] - b.eigenvalues[:n])
        bad = np.flatnonzero(~(dev <= tol))
        per.append(int(bad[0]) if bad.size else n)
    d_c = min(per)
    warning = None
    if d_c == 0:
        warning = f"no level converged within tol={tol} between K={K} and K'={Kp}"
        log.warning(warning)
    return ConvergedWindow(
        D_c=d_c,
        tol=tol,
        K_pair=(K, Kp),
        lambda_grid=tuple(s.lam for s in spectra_K),
        per_lambda=tuple(per),
        warning=warning,
    )


def transform_perturbation(spec: Spectrum, v: OperatorMatrix, D_c: int) -> EigenbasisPerturbation:
    """``V_nm = <n|V|m>`` for the lowest ``D_c`` eigenvectors."""
    if spec.eigenvectors is None:
        raise ValueError("spectrum was computed without eigenvectors")
    if D_c > spec.dim:
        raise ValueError(f"D_c={D_c} exceeds dimension {spec.dim}")
    w = spec.eigenvectors[:, :D_c]
    vn = w.T @ (v.entries @ w)
    vn = 0.5 * (vn + vn.T)
    return EigenbasisPerturbation(vn)


def lambda_grid(
    lam_min: float,
    lam_max: float,
    count: int,
    spacing: str = "composite",
    anchors: Sequence[float] = (),
) -> np.ndarray:
    """Coupling grid on ``[lam_min, lam_max]``.

    ``composite`` takes half the points geometric and half linear, which
    resolves both the small-coupling region and the large-coupling tail.
    Both endpoints and any anchors inside the interval are always kept;
    generated points within 1% (relative) of a kept point are dropped.
    """
    if not 0 < lam_min < lam_max:
        raise ValueError(f"need 0 < lam_min < lam_max, got {lam_min}, {lam_max}")
    if count < 2:
        raise ValueError("grid needs at least 2 points")
    if spacing == "linear":
        pts = np.linspace(lam_min, lam_max, count)
    elif spacing == "geometric":
        pts = np.geomspace(lam_min, lam_max, count)
    elif spacing == "composite":
        n_geo, n_lin = max(count - count // 2, 2), max(count // 2, 2)
        pts = np.concatenate(
            [np.geomspace(lam_min, lam_max, n_geo), np.linspace(lam_min, lam_max, n_lin)]
        )
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    # endpoints and anchors replace generated points within 1%; generated near-duplicates merge
    kept = sorted({lam_min, lam_max, *(float(a) for a in anchors if lam_min <= a <= lam_max)})
    for p in np.sort(pts):
        if all(abs(p - k) > 0.01 * max(p, k) for k in kept):
            kept.append(float(p))
    pts = np.array(sorted(kept))
    return pts
