from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ofs_chaoslab.model import build_basis, build_family, build_h0, build_v
from ofs_chaoslab.spectral import (
    Spectrum,
    convergence_filter,
    diagonalize,
    diagonalize_grid,
    fix_signs,
    lambda_grid,
    transform_perturbation,
)


def test_zero_coupling_k2():
    spec = diagonalize(build_family(2), 0.0)
    np.testing.assert_array_equal(spec.eigenvalues, [1.0, 2.0, 3.0, 3.0])


@pytest.mark.parametrize("K", [0, 1, 5, 12, 20])
def test_zero_coupling_multiplicities(K):
    vals = diagonalize(build_family(K), 0.0, vectors=False).eigenvalues
    rounded = np.rint(vals)
    assert np.max(np.abs(vals - rounded)) <= 1e-10
    counts = Counter(int(x) for x in rounded)
    for N, c in counts.items():
        assert c == (N - 1) // 2 + 1
    assert set(counts) == set(range(1, K + 2))


def test_negative_coupling_rejected():
    with pytest.raises(ValueError):
        diagonalize(build_family(2), -1e-3)


def test_truncation_convergence_low_levels():
    a = diagonalize(build_family(60), 1e-3, vectors=False).eigenvalues[:100]
    b = diagonalize(build_family(64), 1e-3, vectors=False).eigenvalues[:100]
    assert np.max(np.abs(a - b)) <= 1e-8


def test_ground_level_decreases_toward_truncation_limit():
    # adding states can only lower the lowest eigenvalue (Cauchy interlacing)
    lows = [diagonalize(build_family(K), 5e-3, vectors=False).eigenvalues[0] for K in (10, 14, 18, 22)]
    assert all(x >= y - 1e-12 for x, y in zip(lows, lows[1:]))


def test_diagonalize_is_deterministic_with_fixed_signs():
    fam = build_family(10)
    s1, s2 = diagonalize(fam, 2e-3), diagonalize(fam, 2e-3)
    assert np.array_equal(s1.eigenvalues, s2.eigenvalues)
    assert np.array_equal(s1.eigenvectors, s2.eigenvectors)
    vecs = s1.eigenvectors
    idx = np.argmax(np.abs(vecs), axis=0)
    assert np.all(vecs[idx, np.arange(vecs.shape[1])] > 0)


def test_fix_signs_is_idempotent():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    once = fix_signs(q)
    assert np.array_equal(fix_signs(once), once)


def test_grid_diagonalization_keeps_order_and_trims():
    fam = build_family(8)
    grid = [3e-3, 1e-4, 2e-3]
    specs = diagonalize_grid(fam, grid, jobs=2, keep=5)
    assert [s.lam for s in specs] == grid
    assert all(s.dim == 5 for s in specs)


def _spectra(K, grid):
    fam = build_family(K)
    return [diagonalize(fam, lam, vectors=False) for lam in grid]


def test_filter_infinite_tolerance_gives_full_dimension():
    grid = [1e-4, 1e-3]
    w = convergence_filter(_spectra(8, grid), _spectra(10, grid), math.inf)
    assert w.D_c == len(build_basis(8))
    assert w.warning is None


def test_filter_zero_grid_exact():
    w = convergence_filter(_spectra(8, [0.0]), _spectra(12, [0.0]), 0.0)
    assert w.D_c == len(build_basis(8))


def test_filter_empty_grid_and_warning():
    with pytest.raises(ValueError):
        convergence_filter([], [], 1e-6)
    a = [Spectrum(1e-3, 4, np.array([1.0, 2.0]))]
    b = [Spectrum(1e-3, 6, np.array([1.5, 2.0]))]
    w = convergence_filter(a, b, 1e-6)
    assert w.D_c == 0 and w.warning


def test_filter_counts_leading_agreement_only():
    a = [Spectrum(0.1, 4, np.array([1.0, 2.0, 3.0, 4.0]))]
    b = [Spectrum(0.1, 6, np.array([1.0, 2.0, 3.5, 4.0, 5.0]))]
    assert convergence_filter(a, b, 1e-9).D_c == 2


def test_transform_invariants_full_window():
    fam = build_family(8)
    spec = diagonalize(fam, 1e-3)
    vp = transform_perturbation(spec, fam.v, spec.dim)
    v = fam.v.entries
    assert np.max(np.abs(vp.entries - vp.entries.T)) <= 1e-10
    assert math.isclose(np.trace(vp.entries), np.trace(v), rel_tol=1e-9)
    assert math.isclose(np.linalg.norm(vp.entries), np.linalg.norm(v), rel_tol=1e-9)


def test_transform_zero_coupling_matches_direct_elements():
    b = build_basis(6)
    fam = build_family(6)
    spec = diagonalize(fam, 0.0)
    vp = transform_perturbation(spec, fam.v, spec.dim).entries
    levels = np.diag(build_h0(b).entries)
    values, counts = np.unique(levels, return_counts=True)
    # nondegenerate levels keep basis-state eigenvectors (sorted order matches the basis)
    single = np.flatnonzero(np.isin(levels, values[counts == 1]))
    v = build_v(b).entries
    np.testing.assert_allclose(vp[np.ix_(single, single)], v[np.ix_(single, single)], atol=1e-12)


def test_transform_requires_vectors():
    fam = build_family(4)
    with pytest.raises(ValueError):
        transform_perturbation(diagonalize(fam, 1e-3, vectors=False), fam.v, 3)


def test_lambda_grid_anchors_and_dedup():
    g = lambda_grid(1e-5, 1e-2, 48, "composite", anchors=(2.5e-4, 1.75e-3))
    assert g[0] == 1e-5 and g[-1] == 1e-2
    assert 2.5e-4 in g and 1.75e-3 in g
    assert np.all(np.diff(g) > 0)
    assert np.all(np.diff(g) / g[1:] > 0.01)


@pytest.mark.parametrize("spacing", ["linear", "geometric", "composite"])
def test_lambda_grid_two_points_spans_interval(spacing):
    np.testing.assert_allclose(lambda_grid(1e-4, 1e-2, 2, spacing), [1e-4, 1e-2])


def test_lambda_grid_errors():
    with pytest.raises(ValueError):
        lambda_grid(0.0, 1.0, 10)
    with pytest.raises(ValueError):
        lambda_grid(1e-3, 1e-2, 1)
    with pytest.raises(ValueError):
        lambda_grid(1e-3, 1e-2, 10, "cubic")


@settings(max_examples=40, deadline=None)
@given(
    lo=st.floats(min_value=1e-7, max_value=1e-3),
    ratio=st.floats(min_value=2.0, max_value=1e4),
    count=st.integers(min_value=2, max_value=80),
    spacing=st.sampled_from(["linear", "geometric", "composite"]),
)
def test_lambda_grid_properties(lo, ratio, count, spacing):
    g = lambda_grid(lo, lo * ratio, count, spacing)
    assert g[0] == pytest.approx(lo) and g[-1] == pytest.approx(lo * ratio)
    assert np.all(np.diff(g) > 0)
    assert g.size <= count
