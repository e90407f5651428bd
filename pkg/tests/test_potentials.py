import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionscat.basis import enumerate_case_a, frame_transform
from ionscat.potentials import (
    OMEGA_BLOCKS,
    CurveConstants,
    IngestionError,
    ModelFitError,
    SocModel,
    adiabats_case_c,
    adiabats_case_e,
    assemble_bf_matrix,
    build_pec,
    centrifugal,
    crossing_diagnostics,
    diabatize_swap,
    find_crossing,
    load_tabulated,
    soc_value,
    x1_gaussian,
    x3_avoided_gap,
)
from ionscat.units import cm1_to_hartree, hartree_to_cm1

BLOCK_OF = {i - 1: n for n, idx in OMEGA_BLOCKS.items() for i in idx}


def morse_pecs(surface):
    return [p for p in surface.pecs if p.form == "morse-longrange"]


def test_ground_state_minimum(surface):
    p1 = surface.pecs[0]
    assert hartree_to_cm1(p1(6.60) - p1.threshold) == pytest.approx(-12189.0, abs=1e-4)
    assert p1.derivative(6.60) == pytest.approx(0.0, abs=1e-12)


def test_c6_and_shared_c4(surface):
    p3 = surface.pecs[2]
    assert p3.c6 == -2327.73
    assert p3.c4 == 82.2


def test_minimum_at_re(surface):
    for p in morse_pecs(surface):
        assert abs(p(p.re) - (p.threshold - p.de)) < 1e-6


def test_long_range_tail(surface):
    for p in surface.pecs:
        want = -p.c4 / 500.0**4 - p.c6 / 500.0**6
        assert (p(500.0) - p.threshold) == pytest.approx(want, rel=1e-3)


def test_c1_at_switch(surface):
    h = 1e-5
    for p in morse_pecs(surface):
        r = p.switch_radius
        left = (p(r) - p(r - h)) / h
        right = (p(r + h) - p(r)) / h
        # one-sided differences carry O(h V'') error on each side
        assert abs(p(r - 1e-12) - p(r + 1e-12)) < 1e-12
        assert abs(left - right) < 1e-8
        assert abs(p.derivative(r) - p.derivative(r + 1e-12)) < 1e-12


def test_derivative_matches_finite_difference(surface):
    R = np.linspace(4.5, 40.0, 50)
    h = 1e-6
    for p in surface.pecs:
        fd = (p(R + h) - p(R - h)) / (2 * h)
        assert np.allclose(p.derivative(R), fd, atol=1e-8)


def test_no_match_raises():
    rec = CurveConstants.from_cm1(7.0, 1000.0, -2000.0)
    with pytest.raises(ModelFitError, match="R_sw"):
        build_pec(1, rec, 0.0, 82.2, switch_radius=6.0)
    with pytest.raises(ModelFitError):
        build_pec(1, CurveConstants(7.0, -1.0, 0.0), 0.0, 82.2)


def test_x1_gaussian_values():
    assert x1_gaussian(11.06) == pytest.approx(0.001795, rel=1e-15)
    assert x1_gaussian(1e3) == 0.0
    half = math.sqrt(2 * math.log(2)) * 0.75
    assert half == pytest.approx(0.8831, abs=1e-4)
    for r in (11.06 - half, 11.06 + half):
        assert x1_gaussian(r) == pytest.approx(0.001795 / 2, rel=1e-12)
    assert x1_gaussian(12.0, w=2.0, rc=12.0, delta=0.1) == 2.0


def test_soc_constant_and_swap():
    a = SocModel((3, 4), 0.3)
    b = SocModel((2, 4), -0.7)
    assert soc_value(a, 200.0) == 0.3
    sa, sb = diabatize_swap(a, b, 11.0, 0.5)
    assert soc_value(sa, -50.0) == pytest.approx(-0.7, abs=1e-15)
    assert soc_value(sb, -50.0) == pytest.approx(0.3, abs=1e-15)
    assert soc_value(sa, 100.0) == pytest.approx(0.3, abs=1e-15)
    assert soc_value(sb, 100.0) == pytest.approx(-0.7, abs=1e-15)
    assert soc_value(sa, 11.0) == pytest.approx(-0.2, abs=1e-15)
    assert soc_value(sb, 11.0) == pytest.approx(-0.2, abs=1e-15)
    R = np.linspace(5, 17, 200)
    assert np.all(np.diff(soc_value(sa, R)) >= 0)
    assert sa.pair == (3, 4) and sb.pair == (2, 4)


def test_inter_asymptote_soc_vanishes(surface):
    states = {s.index: s for s in enumerate_case_a()}
    for soc in surface.socs:
        i, j = soc.pair
        far = float(soc(1e4))
        if states[i].asymptote != states[j].asymptote:
            assert far == 0.0
        elif soc.partner is None:
            assert far == soc.asymptotic_value


def test_matrix_symmetric_and_block_diagonal(surface, rng):
    R = rng.uniform(3.0, 80.0, 100)
    M = assemble_bf_matrix(surface, R)
    assert np.array_equal(M, np.transpose(M, (0, 2, 1)))
    outside = np.array([[BLOCK_OF[i] != BLOCK_OF[j] for j in range(16)] for i in range(16)])
    assert np.all(M[:, outside] == 0.0)
    assert np.all(M[:, 0, 15] == 0.0)
    assert np.allclose(M[:, 1, 2], x1_gaussian(R), rtol=0, atol=1e-18)
    a811 = [s for s in surface.socs if s.pair == (8, 11)][0]
    assert np.array_equal(M[:, 7, 10], a811(R))


def test_scalar_and_vector_agree(surface):
    M = surface.matrix(np.array([7.3, 9.1]))
    assert np.array_equal(surface.matrix(9.1), M[1])


def test_asymptotic_clusters(surface):
    w = np.linalg.eigvalsh(surface.matrix(60.0))
    thr = surface.thresholds
    near = lambda e: np.sum(np.abs(w - e) < cm1_to_hartree(5.0))  # noqa: E731
    # S+S: states 1, 5, 8; S+D: 12 states split 5 (j=3/2) + 7 (j=5/2)
    assert near(thr.ss) == 3
    assert near(thr.ion_s) == 1
    assert (near(thr.d32), near(thr.d52)) == (5, 7)
    sd = np.sort(w[w > thr.ion_s + cm1_to_hartree(100)])
    gaps = np.diff(sd)
    k = int(np.argmax(gaps))
    lo, hi = sd[: k + 1].mean(), sd[k + 1 :].mean()
    assert hartree_to_cm1(hi - lo) == pytest.approx(800.955, abs=1.0)


def test_permutation_similarity(surface, rng):
    for r in rng.uniform(5, 20, 5):
        M = surface.matrix(r)
        perm = rng.permutation(16)
        assert np.allclose(
            np.linalg.eigvalsh(M), np.linalg.eigvalsh(M[np.ix_(perm, perm)]), atol=1e-13
        )


def test_tail_coefficients(surface):
    A0, A4, A6 = surface.tail_coefficients()
    r = surface.tail_start + 5.0
    M = surface.matrix(r)
    assert np.allclose(M, A0 + A4 / r**4 + A6 / r**6, rtol=0, atol=1e-14)


def test_decoupled_adiabats_equal_pecs(surface):
    bare = surface.with_couplings(soc=0.0, G=0.0)
    R = np.linspace(4.0, 30.0, 80)
    ad = adiabats_case_c(bare, R)
    V = np.array([p(R) for p in bare.pecs]).T
    for name, idx in OMEGA_BLOCKS.items():
        want = np.sort(V[:, np.array(idx) - 1], axis=1)
        assert np.max(np.abs(ad[name] - want)) < 1e-12


def test_x1_splitting_is_twice_gaussian(surface):
    s = surface.with_couplings(soc=0.0)
    rc, _ = find_crossing(s.pecs[1], s.pecs[2], (8.0, 14.0))
    w = np.linalg.eigvalsh(s.block(rc, "0+"))
    d = np.abs(w[:, None] - w[None, :])
    assert np.min(np.abs(d - 2 * x1_gaussian(rc))) < 1e-12


def test_crossing_diagnostics_within_five_percent(surface):
    reps = {r.name: r for r in crossing_diagnostics(surface)}
    assert reps["X1"].miss < 0.05
    assert reps["X3"].miss < 0.05
    assert reps["X1"].r_model == pytest.approx(11.06, abs=0.01)
    assert "E measured below S+D" in reps["X1"].alternatives
    assert "X3" in reps["X3"].describe()


def test_case_e_j0_equals_case_c_plus_centrifugal(surface):
    R = np.linspace(5.0, 40.0, 60)
    e = adiabats_case_e(surface, 0, 1, R)
    M = surface.block(R, "0+")
    mu = surface.reduced_mass
    M[:, 2, 2] += centrifugal(2, R, mu)
    M[:, 3, 3] += centrifugal(2, R, mu)
    assert np.allclose(e, np.linalg.eigvalsh(M), atol=1e-13)


@pytest.mark.parametrize("J,parity", [(0, 1), (2, -1), (5, 1), (8, -1)])
def test_case_e_asymptotes(surface, J, parity):
    e = adiabats_case_e(surface, J, parity, np.array([999.0, 1000.0]))
    thr = np.sort([c.threshold for c in frame_transform(J, parity, surface.thresholds).rows])
    assert np.max(np.abs(e[-1] - thr)) < 1e-6


def test_tracking_keeps_values(surface):
    R = np.linspace(5.5, 7.0, 40)
    a = adiabats_case_e(surface, 3, 1, R)
    b = adiabats_case_e(surface, 3, 1, R, track=True)
    assert np.allclose(np.sort(b, axis=1), a)


def test_x3_gap(surface):
    for J in (3, 4, 6):
        r, gap = x3_avoided_gap(surface, J, 1)
        assert 5.6 <= r <= 6.8
        assert gap > 0
    # A8_11 and rotational coupling are the only routes across X3
    _, g0 = x3_avoided_gap(surface.with_couplings(A8_11=0.0), 3, 1, coriolis=False)
    _, g1 = x3_avoided_gap(surface, 3, 1)
    assert g0 < 1e-6 * g1
    _, g2 = x3_avoided_gap(surface.with_couplings(A8_11=0.0), 3, 1)
    assert g0 < g2 < g1
    with pytest.raises(ValueError):
        x3_avoided_gap(surface, 0, 1)


def test_adiabats_reject_bad_grid(surface):
    with pytest.raises(ValueError):
        adiabats_case_c(surface, [5.0, 4.0])
    with pytest.raises(ValueError):
        adiabats_case_e(surface, 1, 1, [5.0, 5.0])


def test_with_couplings_scales(surface):
    R = np.array([8.0, 10.5, 12.0])
    half = surface.with_couplings(A8_11=0.5, G=0.0)
    assert np.allclose(half.matrix(R)[:, 7, 10], 0.5 * surface.matrix(R)[:, 7, 10])
    assert np.all(half.matrix(R)[:, 1, 2] == 0.0)
    assert np.array_equal(half.matrix(R)[:, 8, 9], surface.matrix(R)[:, 8, 9])


# ------------------------------------------------------------ ingestion


def _morse(r, d=0.02, a=0.6, re=6.0):
    return d * (1 - np.exp(-a * (r - re))) ** 2 - d


def test_tabulated_reproduces_morse(tmp_path):
    R = np.arange(4.0, 25.0 + 1e-9, 0.05)
    f = tmp_path / "morse.dat"
    f.write_text("# R V\n" + "\n".join(f"{r:.6f} {_morse(r):.17e}" for r in R))
    pec = load_tabulated(f, "pec", state=1, threshold=0.0)
    # natural end conditions perturb the first and last bohr
    mid = R[20:-21] + 0.025
    assert np.max(np.abs(pec(mid) - _morse(mid))) < 1e-8
    # tail matches value and slope at the last sample
    rl = R[-1]
    h = 1e-6
    assert pec(rl + h) == pytest.approx(float(pec(rl - h)), abs=1e-10)
    assert pec(1e4) == pytest.approx(0.0, abs=1e-12)


def test_tabulated_soc(tmp_path):
    R = np.linspace(5, 15, 12)
    f = tmp_path / "soc.dat"
    f.write_text("\n".join(f"{r} {0.001 * r}" for r in R))
    soc = load_tabulated(f, "soc", pair=(3, 4), asymptotic_value=0.5)
    assert soc(10.0) == pytest.approx(0.01, abs=1e-12)
    assert soc(100.0) == 0.5


def test_ingestion_errors(tmp_path):
    one = tmp_path / "one.dat"
    one.write_text("5.0 0.1\n")
    with pytest.raises(IngestionError, match="at least 8"):
        load_tabulated(one)
    desc = tmp_path / "desc.dat"
    desc.write_text("# header\n" + "\n".join(f"{r} 0.0" for r in (1, 2, 3, 4, 3.5, 6, 7, 8, 9)))
    with pytest.raises(IngestionError, match=r"desc.dat:6"):
        load_tabulated(desc)
    bad = tmp_path / "bad.dat"
    bad.write_text("1 0\n2 x\n")
    with pytest.raises(IngestionError, match=r"bad.dat:2"):
        load_tabulated(bad)
    with pytest.raises(IngestionError):
        load_tabulated(tmp_path / "missing.dat")


@settings(max_examples=30, deadline=None)
@given(r=st.floats(3.0, 200.0))
def test_matrix_reentrant_symmetric(r):
    from ionscat.potentials import default_surface

    M = default_surface().matrix(r)
    assert np.array_equal(M, M.T)
