"""Truncated even-parity basis and the coupled-oscillator Hamiltonian family.

Each two-dimensional oscillator is represented through the so(2,1) generators
acting on the number states ``|n>``::

    S_z |n> = (n + 1/2) |n>
    S+  |n> = (n + 1)   |n+1>
    S-  |n> = n         |n-1>

and the pair is coupled through ``Sigma = S_x + S_z``::

    H(lam) = S_z x 1 + 1 x S_z + lam * V
    V      = 1/2 [Sigma^2 x Sigma + Sigma x Sigma^2]

Only the swap-symmetric (even) sector is built. States are labelled by
unordered occupation pairs ``n <= m`` with ``n + m <= K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "OccupationPair",
    "ParityBasis",
    "OperatorMatrix",
    "HamiltonianFamily",
    "HydrogenMap",
    "even_dimension",
    "build_basis",
    "s_z",
    "s_plus",
    "s_minus",
    "s_x",
    "s_y",
    "sigma_single_mode",
    "build_h0",
    "build_v",
    "build_family",
    "product_space_v",
    "even_projector",
    "hydrogen_map",
    "coupling_from_hydrogen",
]


@dataclass(frozen=True, order=True)
class OccupationPair:
    n: int
    m: int

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise ValueError(f"occupations must be non-negative, got ({self.n}, {self.m})")
        if self.n > self.m:
            raise ValueError(f"pair must be canonical n <= m, got ({self.n}, {self.m})")

    @property
    def total(self) -> int:
        return self.n + self.m


def even_dimension(K: int) -> int:
    """Closed-form size of the even sector for truncation ``n + m <= K``."""
    if K < 0:
        raise ValueError("K must be non-negative")
    if K % 2 == 0:
        return (K // 2 + 1) ** 2
    h = (K + 1) // 2
    return h * (h + 1)


@dataclass(frozen=True)
class ParityBasis:
    K: int
    states: tuple[OccupationPair, ...]
    parity: str = "even"

    def __len__(self) -> int:
        return len(self.states)

    @property
    def tag(self) -> str:
        return f"{self.parity}-K{self.K}"

    @property
    def n(self) -> np.ndarray:
        return np.array([s.n for s in self.states], dtype=np.int64)

    @property
    def m(self) -> np.ndarray:
        return np.array([s.m for s in self.states], dtype=np.int64)

    def index(self, n: int, m: int) -> int:
        return self.states.index(OccupationPair(min(n, m), max(n, m)))


def build_basis(K: int, parity: str = "even") -> ParityBasis:
    """Even-parity states ``(n, m)``, ``n <= m``, ``n + m <= K``, sorted by ``(n + m, n)``."""
    if parity != "even":
        raise NotImplementedError(
            f"parity {parity!r} is out of scope: only the even sector is supported"
        )
    if K < 0:
        raise ValueError(f"truncation K must be >= 0, got {K}")
    states = tuple(
        OccupationPair(n, total - n)
        for total in range(K + 1)
        for n in range(total // 2 + 1)
    )
    return ParityBasis(K=K, states=states, parity=parity)


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray
    basis_tag: str

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))


# single-mode generators, truncated to n = 0..n_max


def s_z(n_max: int) -> np.ndarray:
    return np.diag(np.arange(n_max + 1) + 0.5)


def s_plus(n_max: int) -> np.ndarray:
    # <n+1|S+|n> = n + 1
    return np.diag(np.arange(1, n_max + 1, dtype=float), -1)


def s_minus(n_max: int) -> np.ndarray:
    # <n-1|S-|n> = n
    return np.diag(np.arange(1, n_max + 1, dtype=float), 1)


def s_x(n_max: int) -> np.ndarray:
    return 0.5 * (s_plus(n_max) + s_minus(n_max))


def s_y(n_max: int) -> np.ndarray:
    return (s_plus(n_max) - s_minus(n_max)) / 2j


def sigma_single_mode(n_max: int) -> OperatorMatrix:
    """Tridiagonal ``Sigma = S_z + (S+ + S-)/2`` on ``n = 0..n_max``."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    diag = np.arange(n_max + 1) + 0.5
    off = np.arange(1, n_max + 1) / 2.0
    sig = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return OperatorMatrix(sig, basis_tag=f"mode-n{n_max}")


def build_h0(basis: ParityBasis) -> OperatorMatrix:
    return OperatorMatrix(np.diag((basis.n + basis.m + 1).astype(float)), basis.tag)


def build_v(basis: ParityBasis) -> OperatorMatrix:
    """Exact matrix elements of V between retained even-parity states.

    ``Sigma`` is built to ``K + 2`` so that every ``(Sigma^2)_{ac}`` with
    ``a, c <= K`` includes its full set of intermediate states.
    """
    K = basis.K
    sig = sigma_single_mode(K + 2).entries
    sig2 = sig @ sig
    a, b = basis.n, basis.m
    tot = a + b
    # c_i = 1/2 for n == m (the 4-term sum below counts it twice), 1/sqrt2 otherwise
    coef = np.where(a == b, 0.5, 1.0 / math.sqrt(2.0))
    dim = len(basis)
    v = np.zeros((dim, dim))

    def prod(i, j, k, l):
        return 0.5 * (sig2[i, k] * sig[j, l] + sig[i, k] * sig2[j, l])

    # V couples totals differing by <= 3; use the band when states are sorted by total
    banded = bool(np.all(np.diff(tot) >= 0))
    starts = np.searchsorted(tot, np.arange(K + 2), side="left")
    for i in range(dim):
        if banded:
            lo = starts[max(tot[i] - 3, 0)]
            hi = starts[min(tot[i] + 4, K + 1)]
        else:
            lo, hi = 0, dim
        c, d = a[lo:hi], b[lo:hi]
        s4 = (
            prod(a[i], b[i], c, d)
            + prod(a[i], b[i], d, c)
            + prod(b[i], a[i], c, d)
            + prod(b[i], a[i], d, c)
        )
        v[i, lo:hi] = coef[i] * coef[lo:hi] * s4
    # each (i, j) was evaluated independently; enforce bitwise symmetry
    v = np.triu(v) + np.triu(v, 1).T
    return OperatorMatrix(v, basis.tag)


@dataclass(frozen=True)
class HamiltonianFamily:
    h0: OperatorMatrix
    v: OperatorMatrix
    basis: ParityBasis

    def __post_init__(self):
        if not (self.h0.dim == self.v.dim == len(self.basis)):
            raise ValueError("h0, v and basis dimensions disagree")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def K(self) -> int:
        return self.basis.K

    def matrix(self, lam: float) -> np.ndarray:
        return self.h0.entries + lam * self.v.entries


def build_family(K: int) -> HamiltonianFamily:
    basis = build_basis(K)
    return HamiltonianFamily(h0=build_h0(basis), v=build_v(basis), basis=basis)


def product_space_v(n_max: int) -> np.ndarray:
    """Dense V on the full product space ``n, m <= n_max`` (row index ``n*(n_max+1)+m``)."""
    sig = sigma_single_mode(n_max).entries
    sig2 = sig @ sig
    return 0.5 * (np.kron(sig2, sig) + np.kron(sig, sig2))


def even_projector(basis: ParityBasis, n_max: int) -> np.ndarray:
    """Isometry whose columns are the even states ``|e_{n,m}>`` in the product space."""
    size = n_max + 1
    q = np.zeros((size * size, len(basis)))
    for j, st in enumerate(basis.states):
        if st.n == st.m:
            q[st.n * size + st.m, j] = 1.0
        else:
            q[st.n * size + st.m, j] = 1.0 / math.sqrt(2.0)
            q[st.m * size + st.n, j] = 1.0 / math.sqrt(2.0)
    return q


@dataclass(frozen=True)
class HydrogenMap:
    """Correspondence between oscillator variables and hydrogen in a field B.

    ``lam = gamma**2 / (-2E)**2``, ``epsilon = (-2E)**-0.5`` and the classical
    chaos parameter ``eta = lam * epsilon**2``.
    """

    lam: float
    epsilon: float
    E: float = field(init=False)
    gamma: float = field(init=False)
    eta: float = field(init=False)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.lam < 0:
            raise ValueError(f"coupling must be >= 0, got {self.lam}")
        E = -1.0 / (2.0 * self.epsilon**2)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "gamma", math.sqrt(self.lam) * (-2.0 * E))
        object.__setattr__(self, "eta", self.lam * self.epsilon**2)


def hydrogen_map(lam: float, epsilon: float) -> HydrogenMap:
    return HydrogenMap(lam, epsilon)


def coupling_from_hydrogen(gamma: float, E: float) -> float:
    if E >= 0:
        raise ValueError("bound-state energy E must be negative")
    return gamma**2 / (-2.0 * E) ** 2


def states_from_pairs(K: int, pairs: Iterable[Sequence[int]]) -> ParityBasis:
    """Basis over an explicit list of pairs (any order); used to check ordering independence."""
    states = tuple(OccupationPair(min(p), max(p)) for p in pairs)
    return ParityBasis(K=K, states=states)
