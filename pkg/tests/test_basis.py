from fractions import Fraction

import numpy as np
import pytest

from ionscat.basis import (
    DEFAULT_THRESHOLDS,
    asymptotes,
    channel_table_rows,
    enumerate_case_a,
    enumerate_case_e,
    frame_transform,
    symmetrized_case_a_basis,
)
from ionscat.units import hartree_to_cm1

# channel counts for J = 0, 1, 2, 3 read off the Fig. 6 caption
FIG6 = {1: (4, 8, 12, 12), -1: (3, 9, 11, 13)}


def brute_force_count(J, parity):
    """Count (ja, jb, j, l) by explicit triangle loops, independent of the package."""
    levels = [(0.5, 0.5, 0), (0.0, 0.0, 0), (0.5, 1.5, 2), (0.5, 2.5, 2)]
    n = 0
    for ja, jb, L in levels:
        for j2 in range(int(2 * abs(ja - jb)), int(2 * (ja + jb)) + 1, 2):
            j = j2 // 2
            for ell in range(0, J + j + 1):
                if abs(J - j) <= ell <= J + j and (-1) ** (L + ell) == parity:
                    n += 1
    return n


def test_asymptote_levels():
    a = asymptotes()
    assert set(a) == {"S+S", "Ion+S", "S+D"}
    thr = DEFAULT_THRESHOLDS
    (ss,) = a["S+S"].fine_structure_channels(thr)
    assert ss == (Fraction(1, 2), Fraction(1, 2), 0.0)
    (ion,) = a["Ion+S"].fine_structure_channels(thr)
    sd = a["S+D"].fine_structure_channels(thr)
    assert ion[:2] == (0, 0)
    assert 0 < ion[2] < min(e for *_, e in sd)
    assert hartree_to_cm1(sd[1][2] - sd[0][2]) == pytest.approx(800.955, abs=1e-9)


def test_sixteen_states_and_blocks():
    states = enumerate_case_a()
    assert [s.index for s in states] == list(range(1, 17))
    sizes = {}
    for s in states:
        sizes[s.omega] = sizes.get(s.omega, 0) + 1
    assert sizes == {"0+": 4, "0-": 3, "1": 5, "2": 3, "3": 1}
    assert states[10].term_label == "3Pi_1" and states[10].asymptote == "S+D"
    assert [s.term_label for s in states if s.omega == "3"] == ["3Delta_3"]
    assert [s.asymptote for s in states[:4]] == ["S+S", "Ion+S", "S+D", "S+D"]
    for s in states:
        assert abs(s.Lambda + s.Sigma) == s.omega_abs


def test_j0_plus_channels():
    ch = enumerate_case_e(0, 1)
    got = [(c.asymptote, c.ja, c.jb, c.j, c.ell) for c in ch]
    h, t, f = Fraction(1, 2), Fraction(3, 2), Fraction(5, 2)
    assert got == [
        ("S+S", h, h, 0, 0),
        ("Ion+S", 0, 0, 0, 0),
        ("S+D", h, t, 2, 2),
        ("S+D", h, f, 2, 2),
    ]


@pytest.mark.parametrize("J", range(13))
@pytest.mark.parametrize("parity", [1, -1])
def test_channel_counts(J, parity):
    n = len(enumerate_case_e(J, parity))
    assert n == brute_force_count(J, parity)
    if J <= 3:
        assert n == FIG6[parity][J]
    else:
        # 12 for (odd J, +) and (even J, -); 13 for (even J, +) and (odd J, -)
        assert n == (13 if (J % 2 == 0) == (parity == 1) else 12)
    assert len(symmetrized_case_a_basis(J, parity)) == n


@pytest.mark.parametrize("J", range(6))
@pytest.mark.parametrize("parity", [1, -1])
def test_channel_invariants(J, parity):
    chans = enumerate_case_e(J, parity)
    allowed_j = {(0.5, 0.5): {0, 1}, (0, 0): {0}, (0.5, 1.5): {1, 2}, (0.5, 2.5): {2, 3}}
    for c in chans:
        assert (-1) ** c.ell == parity
        assert abs(J - c.j) <= c.ell <= J + c.j
        assert c.j in allowed_j[(float(c.ja), float(c.jb))]
    keys = [(c.threshold, c.j, c.ell) for c in chans]
    assert keys == sorted(keys)
    assert len(set((c.level, c.j, c.ell) for c in chans)) == len(chans)


def test_symmetrized_examples():
    k0p = symmetrized_case_a_basis(0, 1)
    labels = {(k.state.index, k.state.term_label) for k in k0p}
    assert labels == {(1, "1Sigma+"), (2, "1Sigma+"), (3, "1Sigma+"), (4, "3Pi_0+")}
    k1p = [k.state for k in symmetrized_case_a_basis(1, 1)]
    assert all(s.omega != "0+" for s in k1p)
    assert {5, 6, 7} <= {s.index for s in k1p}
    k0m = symmetrized_case_a_basis(0, -1)
    assert len(k0m) == 3
    assert all(k.state.asymptote != "Ion+S" for k in k0m)


def test_ket_components_normalized():
    for J in range(4):
        for p in (1, -1):
            for k in symmetrized_case_a_basis(J, p):
                assert sum(c[0] ** 2 for c in k.components) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("J", range(9))
@pytest.mark.parametrize("parity", [1, -1])
def test_frame_transform_orthogonal(J, parity):
    T = frame_transform(J, parity).matrix
    assert T.shape[0] == T.shape[1]
    n = T.shape[0]
    assert np.max(np.abs(T.T @ T - np.eye(n))) < 1e-12
    assert np.max(np.abs(T @ T.T - np.eye(n))) < 1e-12


def test_row_norms_j2_plus():
    T = frame_transform(2, 1).matrix
    for row in T:
        assert sum(x * x for x in row) == pytest.approx(1.0, abs=1e-12)


def test_ion_row_unit_overlap():
    for J in range(5):
        ft = frame_transform(J, (-1) ** J)
        r = [i for i, c in enumerate(ft.rows) if c.asymptote == "Ion+S"]
        assert len(r) == 1
        c = ft.state_indices.index(2)
        row = ft.matrix[r[0]]
        assert abs(row[c]) == pytest.approx(1.0, abs=1e-14)
        assert np.max(np.abs(np.delete(row, c))) == 0.0


def test_no_ion_channel_in_unnatural_parity():
    for J in range(5):
        chans = enumerate_case_e(J, -((-1) ** J))
        assert not any(c.asymptote == "Ion+S" for c in chans)


@pytest.mark.parametrize("J,parity", [(0, 1), (1, -1), (2, 1), (3, -1), (4, 1), (5, 1)])
def test_asymptotic_matrix_diagonal_in_case_e(surface, J, parity):
    """Far out the case (a) matrix rotated to case (e) is the diagonal of thresholds."""
    ft = frame_transform(J, parity, surface.thresholds)
    cols = np.array(ft.state_indices) - 1
    M = surface.matrix(np.array([1.0e4]))[0][np.ix_(cols, cols)]
    E = ft.matrix @ M @ ft.matrix.T
    thr = np.array([c.threshold for c in ft.rows])
    assert np.max(np.abs(E - np.diag(thr))) < 1e-6
    w = np.linalg.eigvalsh(M)
    assert np.allclose(np.sort(w), np.sort(thr), atol=1e-6)


def test_similarity_invariance(rng):
    for J, p in [(2, 1), (3, -1), (6, 1)]:
        T = frame_transform(J, p).matrix
        d = rng.normal(size=T.shape[0])
        w = np.linalg.eigvalsh(T.T @ np.diag(d) @ T)
        assert np.allclose(w, np.sort(d), atol=1e-12)


@pytest.mark.parametrize("J", range(8))
def test_union_over_parities(J):
    """Both parities together give every (level, j, l) triangle combination once."""
    both = enumerate_case_e(J, 1) + enumerate_case_e(J, -1)
    keys = {(c.level, c.j, c.ell) for c in both}
    assert len(keys) == len(both)
    expected = set()
    for lev, (ja, jb) in {"S+S": (0.5, 0.5), "Ion+S": (0, 0), "S+D(3/2)": (0.5, 1.5), "S+D(5/2)": (0.5, 2.5)}.items():
        for j in range(int(abs(ja - jb)), int(ja + jb) + 1):
            for ell in range(abs(J - j), J + j + 1):
                expected.add((lev, j, ell))
    assert keys == expected


def test_invalid_arguments():
    with pytest.raises(ValueError):
        enumerate_case_e(-1, 1)
    with pytest.raises(ValueError):
        enumerate_case_e(0, 0)
    with pytest.raises(ValueError):
        symmetrized_case_a_basis(-2, 1)


def test_channel_table_rows():
    rows = list(channel_table_rows(0, 1))
    assert len(rows) == 4
    assert rows[0][:3] == (0, "+", "S+S")
