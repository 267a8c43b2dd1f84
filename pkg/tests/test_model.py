from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ofs_chaoslab.model import (
    HamiltonianFamily,
    OccupationPair,
    build_basis,
    build_family,
    build_h0,
    build_v,
    coupling_from_hydrogen,
    even_dimension,
    even_projector,
    hydrogen_map,
    product_space_v,
    s_minus,
    s_plus,
    s_x,
    s_y,
    s_z,
    sigma_single_mode,
    states_from_pairs,
)


def test_basis_k2_enumeration():
    b = build_basis(2)
    assert [(s.n, s.m) for s in b.states] == [(0, 0), (0, 1), (0, 2), (1, 1)]
    assert len(b) == 4


def test_basis_k1_length():
    assert len(build_basis(1)) == 2 == even_dimension(1)


def test_basis_k120_length():
    assert len(build_basis(120)) == 3721


@pytest.mark.parametrize("K", range(0, 41))
def test_dimension_formula_matches_enumeration(K):
    assert len(build_basis(K)) == even_dimension(K)


def test_basis_errors():
    with pytest.raises(ValueError):
        build_basis(-1)
    with pytest.raises(NotImplementedError):
        build_basis(4, parity="odd")
    with pytest.raises(ValueError):
        OccupationPair(2, 1)
    with pytest.raises(ValueError):
        OccupationPair(-1, 0)


def test_basis_index_is_symmetric_in_arguments():
    b = build_basis(6)
    assert b.index(1, 3) == b.index(3, 1)
    assert b.states[b.index(2, 2)] == OccupationPair(2, 2)


def test_sigma_entries():
    sig = sigma_single_mode(5).entries
    assert sig[0, 0] == 0.5 and sig[1, 1] == 1.5
    assert sig[0, 1] == sig[1, 0] == 0.5
    assert sig[2, 1] == 1.0
    assert np.count_nonzero(np.triu(sig, 2)) == 0
    assert np.array_equal(sig, sig.T)


def test_sigma_matches_ladder_operators():
    n = 12
    expected = s_z(n) + 0.5 * (s_plus(n) + s_minus(n))
    np.testing.assert_allclose(sigma_single_mode(n).entries, expected, atol=1e-15)


def _comm(a, b):
    return a @ b - b @ a


def test_so21_commutators_interior_block():
    n = 40
    sx, sy, sz = s_x(n), s_y(n), s_z(n)
    sp, sm = s_plus(n), s_minus(n)
    inner = slice(0, n - 1)  # truncation corrupts only the last row/column
    checks = [
        (_comm(sz, sp), sp),
        (_comm(sz, sm), -sm),
        (_comm(sp, sm), -2 * sz),
        (_comm(sx, sy), -1j * sz),
        (_comm(sy, sz), 1j * sx),
        (_comm(sz, sx), 1j * sy),
    ]
    for lhs, rhs in checks:
        assert np.array_equal(lhs[inner, inner], rhs[inner, inner])


def test_h0_entries_and_trace():
    b = build_basis(2)
    h0 = build_h0(b).entries
    assert h0[b.index(0, 0), b.index(0, 0)] == 1
    assert h0[b.index(0, 2), b.index(0, 2)] == 3
    assert np.trace(h0) == 9
    assert np.count_nonzero(h0 - np.diag(np.diag(h0))) == 0


def test_v_ground_element():
    assert build_v(build_basis(4)).entries[0, 0] == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("K", [2, 4, 7])
def test_v_matches_product_space_projection(K):
    b = build_basis(K)
    n_max = K + 2
    q = even_projector(b, n_max)
    dense = q.T @ product_space_v(n_max) @ q
    assert np.max(np.abs(build_v(b).entries - dense)) <= 1e-13


def test_v_band_structure_and_symmetry():
    b = build_basis(12)
    v = build_v(b)
    tot = b.n + b.m
    far = np.abs(tot[:, None] - tot[None, :]) > 3
    assert np.all(v.entries[far] == 0)
    assert v.is_symmetric()
    assert np.array_equal(v.entries, v.entries.T)


def test_v_independent_of_state_order():
    b = build_basis(6)
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(b))
    shuffled = states_from_pairs(6, [(b.states[i].n, b.states[i].m) for i in perm])
    v_ref = build_v(b).entries
    v_perm = build_v(shuffled).entries
    np.testing.assert_allclose(v_perm, v_ref[np.ix_(perm, perm)], atol=1e-13)


def test_operator_matrix_is_read_only():
    v = build_v(build_basis(3))
    with pytest.raises(ValueError):
        v.entries[0, 0] = 1.0


def test_family_dimension_check():
    b = build_basis(3)
    with pytest.raises(ValueError):
        HamiltonianFamily(build_h0(b), build_v(build_basis(4)), b)


def test_family_matrix_is_linear_in_coupling():
    fam = build_family(5)
    np.testing.assert_allclose(fam.matrix(2e-3) - fam.matrix(1e-3), 1e-3 * fam.v.entries, atol=1e-15)


def test_hydrogen_map_examples():
    h = hydrogen_map(0.0, 1.0)
    assert (h.gamma, h.E, h.eta) == (0.0, -0.5, 0.0)
    assert hydrogen_map(1e-2, 30.0).eta == pytest.approx(9.0, rel=1e-14)
    with pytest.raises(ValueError):
        hydrogen_map(1e-3, 0.0)
    with pytest.raises(ValueError):
        hydrogen_map(1e-3, -2.0)


@settings(max_examples=60, deadline=None)
@given(
    lam=st.floats(min_value=1e-8, max_value=10.0),
    eps=st.floats(min_value=1e-2, max_value=1e3),
)
def test_hydrogen_round_trip(lam, eps):
    h = hydrogen_map(lam, eps)
    assert math.isclose(coupling_from_hydrogen(h.gamma, h.E), lam, rel_tol=1e-12)
