"""Independent check of the chi1 + chi2 decomposition from the fidelity itself.

Here the fidelity ``|Tr(rho U(lam)^dag U(lam + dlam))|`` is computed from
explicit propagators, and ``2 (1 - F) / dlam^2`` is extrapolated to
``dlam -> 0``. This path only ever sees matrix exponentials and the
density matrix, never the eigenbasis sums of :mod:`ofs_chaoslab.ofs`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import HamiltonianFamily
from .ofs import WeightMode, chi1, chi2, make_weights
from .spectral import diagonalize, transform_perturbation

__all__ = [
    "ORACLE_DIM_CAP",
    "OracleRow",
    "propagate",
    "density_matrix",
    "operator_fidelity",
    "fd_susceptibility",
    "richardson",
    "check_decomposition",
    "oracle_suite",
]

ORACLE_DIM_CAP = 256
# (t * dlam)^2 << 1 is required for the second-order expansion of F
TIME_STEP_GUARD = 1e-2


def _check_cap(dim: int, cap: int):
    if dim > cap:
        raise ValueError(f"oracle is small-scale only: dim {dim} exceeds cap {cap}")


def propagate(h: np.ndarray, t: float, cap: int = ORACLE_DIM_CAP) -> np.ndarray:
    """``exp(-i H t)`` through the spectral decomposition of the symmetric matrix ``h``."""
    h = np.asarray(h)
    _check_cap(h.shape[0], cap)
    if t == 0:
        return np.eye(h.shape[0], dtype=complex)
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T


def density_matrix(h: np.ndarray, mode: WeightMode) -> np.ndarray:
    """Gibbs (or maximally mixed) state of ``h``; commutes with ``h`` by construction."""
    vals, vecs = np.linalg.eigh(np.asarray(h))
    w = make_weights(vals, vals.size, mode).weights
    return (vecs * w) @ vecs.T


def operator_fidelity(rho: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> float:
    """``|Tr(rho U1^dag U2)|``."""
    rho, u1, u2 = np.asarray(rho), np.asarray(u1), np.asarray(u2)
    if not (rho.shape == u1.shape == u2.shape):
        raise ValueError(f"shape mismatch: rho {rho.shape}, U1 {u1.shape}, U2 {u2.shape}")
    # Tr(A B) = sum_ij A_ij B_ji
    return float(abs(np.sum(rho * (u1.conj().T @ u2).T)))


def fd_susceptibility(
    family: HamiltonianFamily,
    lam: float,
    delta_lambda: float,
    t: float,
    mode: WeightMode,
) -> tuple[float, float]:
    """Return ``(F, 2 (1 - F) / dlam^2)``; the estimate carries an O(dlam) error."""
    if t * delta_lambda > TIME_STEP_GUARD:
        raise ValueError(
            f"t*delta_lambda = {t}*{delta_lambda} = {t * delta_lambda:g} violates the "
            f"small-perturbation guard (<= {TIME_STEP_GUARD})"
        )
    h1 = family.matrix(lam)
    h2 = family.matrix(lam + delta_lambda)
    rho = density_matrix(h1, mode)
    f = operator_fidelity(rho, propagate(h1, t), propagate(h2, t))
    return f, 2.0 * (1.0 - f) / delta_lambda**2


def richardson(coarse: float, fine: float, ratio: float = 2.0, order: int = 1) -> float:
    """Eliminate the leading ``h**order`` error from estimates at ``h`` and ``h / ratio``."""
    k = ratio**order
    return (k * fine - coarse) / (k - 1.0)


@dataclass(frozen=True)
class OracleRow:
    K: int
    lam: float
    delta_lambda: float
    t: float
    mode: WeightMode
    F: float
    fd_chi: float
    chi1: float
    chi2: float

    @property
    def mismatch(self) -> float:
        total = self.chi1 + self.chi2
        return abs(self.fd_chi - total) / abs(total) if total else abs(self.fd_chi)


def check_decomposition(
    family: HamiltonianFamily,
    lam: float,
    t: float,
    mode: WeightMode,
    delta_lambda: float = 1e-6,
) -> list[OracleRow]:
    """Rows at ``dlam``, ``dlam/2`` and the extrapolated limit (``delta_lambda = 0``, ``F = 1``).

    chi1 and chi2 use the full basis as the converged window.
    """
    _check_cap(family.dim, ORACLE_DIM_CAP)
    spec = diagonalize(family, lam, vectors=True)
    d = spec.dim
    vp = transform_perturbation(spec, family.v, d)
    w = make_weights(spec, d, mode)
    c1, c2 = chi1(spec, vp, w, t, d), chi2(spec, vp, w, t)
    rows = []
    for h in (delta_lambda, delta_lambda / 2):
        f, est = fd_susceptibility(family, lam, h, t, mode)
        rows.append(OracleRow(family.K, lam, h, t, mode, f, est, c1, c2))
    extrap = richardson(rows[0].fd_chi, rows[1].fd_chi)
    rows.append(OracleRow(family.K, lam, 0.0, t, mode, 1.0, extrap, c1, c2))
    return rows


def oracle_suite(
    Ks: Sequence[int],
    lambdas: Sequence[float],
    times: Sequence[float],
    modes: Sequence[WeightMode],
    delta_lambda: float = 1e-6,
) -> list[OracleRow]:
    from .model import build_family

    rows = []
    for K in Ks:
        fam = build_family(K)
        for lam in lambdas:
            for t in times:
                for mode in modes:
                    rows.extend(check_decomposition(fam, lam, t, mode, delta_lambda))
    return rows
