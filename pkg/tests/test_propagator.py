import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionscat.propagator import (
    BelowThresholdError,
    ChannelInfo,
    ConfigurationError,
    CoupledProblem,
    Grid,
    fcqs_problem,
    k_to_s,
    logderiv_propagate,
    match_asymptotic,
    mcqs_problem,
    riccati_bessel,
    solve_block,
)
from ionscat.units import kelvin_to_hartree


def make_problem(vfun, thresholds, ells, mu=1.0, tail_start=1.0):
    n = len(thresholds)
    ch = tuple(ChannelInfo(f"c{i}", f"c{i}", float(t), int(l)) for i, (t, l) in enumerate(zip(thresholds, ells)))
    z = np.zeros((n, n))
    return CoupledProblem(ch, vfun, (np.diag(np.asarray(thresholds, float)), z, z), tail_start, mu)


def well(matrix, a):
    """Constant matrix for R < a, zero beyond (mean value on the edge)."""
    m = np.asarray(matrix, dtype=float)

    def v(R):
        R = np.atleast_1d(R)
        f = np.where(R < a, 1.0, np.where(R == a, 0.5, 0.0))
        return f[:, None, None] * m[None]

    return v


def square_well_phase(E, V0, a, mu=1.0):
    k = math.sqrt(2 * mu * E)
    q = math.sqrt(2 * mu * (E + V0))
    return math.atan(k / q * math.tan(q * a)) - k * a


def phase_diff(x, y):
    return abs((x - y + math.pi / 2) % math.pi - math.pi / 2)


def k_matrix(problem, E, r0, r1, h):
    Y = logderiv_propagate(problem, E, r0, r1, h, y0="hard-wall", check_inner=False)
    return match_asymptotic(Y, problem, E, r1)[0]


# ------------------------------------------------------------ Riccati-Bessel


def test_riccati_bessel_closed_forms():
    x = np.linspace(0.1, 30, 50)
    j, n, jp, np_ = riccati_bessel(0, x)
    assert np.allclose(j, np.sin(x), atol=1e-14)
    assert np.allclose(n, -np.cos(x), atol=1e-14)
    j1 = riccati_bessel(1, 1.0)[0]
    assert j1 == pytest.approx(math.sin(1) - math.cos(1), abs=1e-15)
    assert float(j1) == pytest.approx(0.301169, abs=5e-7)
    xs = 1e-3
    assert riccati_bessel(2, xs)[0] == pytest.approx(xs**3 / 15, rel=1e-5)


@settings(max_examples=100, deadline=None)
@given(ell=st.integers(0, 40), x=st.floats(1e-2, 1e5))
def test_riccati_wronskian(ell, x):
    j, n, jp, np_ = riccati_bessel(ell, x)
    # convention: jhat nhat' - jhat' nhat = 1
    w = j * np_ - jp * n
    if np.isfinite(w):
        assert w == pytest.approx(1.0, rel=1e-10)


def test_riccati_rejects_bad_input():
    with pytest.raises(ValueError):
        riccati_bessel(-1, 1.0)
    with pytest.raises(ValueError):
        riccati_bessel(0, 0.0)


# ------------------------------------------------------------ K to S


def test_k_to_s():
    assert np.allclose(k_to_s(np.zeros((3, 3))), np.eye(3), atol=0)
    assert k_to_s(np.array([[1.0]]))[0, 0] == pytest.approx(1j, abs=1e-15)
    d = 0.37
    assert k_to_s(np.array([[math.tan(d)]]))[0, 0] == pytest.approx(np.exp(2j * d), abs=1e-15)


def test_k_to_s_random_unitary(rng):
    for _ in range(20):
        A = rng.normal(size=(5, 5)) * 3
        S = k_to_s(A + A.T)
        assert np.max(np.abs(S.conj().T @ S - np.eye(5))) < 1e-12
        assert np.max(np.abs(S - S.T)) < 1e-12


# ------------------------------------------------------------ analytic oracles


def test_free_particle_zero_phase():
    p = make_problem(well([[0.0]], 1.0), [0.0], [0])
    for E in (0.01, 0.3, 2.0):
        K = k_matrix(p, E, 0.0, 4.0, 0.005)
        assert abs(K[0, 0]) < 1e-8


def test_square_well_phase_shifts():
    V0, a = 2.0, 1.0
    p = make_problem(well([[-V0]], a), [0.0], [0], tail_start=a)
    for E in np.linspace(0.05, 5.0, 20):
        K = k_matrix(p, E, 0.0, 3.0, 0.005)
        assert phase_diff(math.atan(K[0, 0]), square_well_phase(E, V0, a)) < 1e-6


@pytest.mark.parametrize("ell", [0, 1, 2, 3])
def test_hard_sphere(ell):
    a = 1.0
    p = make_problem(well([[0.0]], a), [0.0], [ell])
    for E in np.linspace(0.1, 5.0, 7):
        k = math.sqrt(2 * E)
        jh, nh, _, _ = riccati_bessel(ell, k * a)
        K = k_matrix(p, E, a, a + 4.0, 0.0025)
        want = jh / nh
        assert abs(K[0, 0] - want) < 1e-8 * max(1.0, abs(want))


def test_two_channel_constant_rotation():
    """Equal thresholds: the rotation that diagonalizes the well also diagonalizes S."""
    a = 1.0
    th = 0.4
    U = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    lam = np.array([-2.5, -0.8])
    V = U @ np.diag(lam) @ U.T
    p = make_problem(well(V, a), [0.0, 0.0], [0, 0], tail_start=a)
    for E in np.linspace(0.1, 3.0, 8):
        K = k_matrix(p, E, 0.0, 3.0, 0.005)
        S = k_to_s(K)
        d = [square_well_phase(E, -l, a) for l in lam]
        S_ref = U @ np.diag(np.exp(2j * np.array(d))) @ U.T
        assert np.max(np.abs(S - S_ref)) < 1e-6


def test_k_permutation_covariance():
    a = 1.0
    V = np.array([[-1.0, 0.3, 0.1], [0.3, -2.0, 0.2], [0.1, 0.2, 0.5]])
    thr = [0.0, 0.05, 0.1]
    perm = [2, 0, 1]
    p = make_problem(well(V, a), thr, [0, 1, 0], tail_start=a)
    q = make_problem(well(V[np.ix_(perm, perm)], a), [thr[i] for i in perm], [[0, 1, 0][i] for i in perm], tail_start=a)
    E = 0.7
    K1 = k_matrix(p, E, 0.2, 6.2, 0.005)
    K2 = k_matrix(q, E, 0.2, 6.2, 0.005)
    assert np.allclose(K2, K1[np.ix_(perm, perm)], atol=1e-10)
    assert np.allclose(K1, K1.T, atol=1e-8)


def test_closed_channel_eliminated():
    a = 1.0
    V = np.array([[-1.0, 0.4], [0.4, -3.0]])
    p = make_problem(well(V, a), [0.0, 1.5], [0, 0], tail_start=a)
    Y = logderiv_propagate(p, 0.6, 0.0, 6.0, 0.005, y0="hard-wall", check_inner=False)
    K, oi = match_asymptotic(Y, p, 0.6, 6.0)
    assert K.shape == (1, 1) and list(oi) == [0]
    # matching radius deep in the closed-channel decay region: result stable
    Y2 = logderiv_propagate(p, 0.6, 0.0, 9.0, 0.005, y0="hard-wall", check_inner=False)
    K2, _ = match_asymptotic(Y2, p, 0.6, 9.0)
    assert K2[0, 0] == pytest.approx(K[0, 0], rel=1e-8)


# ------------------------------------------------------------ errors


def test_errors(surface):
    p = fcqs_problem(surface, 0)
    with pytest.raises(BelowThresholdError):
        solve_block(p, -1e-3, Grid(4.0, 100.0, 0.01))
    with pytest.raises(ConfigurationError, match="even"):
        logderiv_propagate(p, 1e-9, 4.0, 4.03, 0.01)
    with pytest.raises(ConfigurationError, match="repulsive wall"):
        logderiv_propagate(p, 1e-9, 8.0, 10.0, 0.01)
    with pytest.raises(ValueError):
        logderiv_propagate(p, 1e-9, 4.0, 10.0, 0.01, y0="nonsense")


def test_auto_extend(surface):
    p = fcqs_problem(surface, 0)
    g = Grid(4.0, 1000.0, 0.01)
    E = kelvin_to_hartree(1e-8)
    r = g.end_for(p, E)
    assert r > 1000.0
    assert 82.2 / r**4 <= 1e-3 * E * 1.0001
    assert g.n_steps(r) % 2 == 0
    assert Grid(4.0, 1000.0, 0.01, auto_extend=False).end_for(p, E) == 1000.0


# ------------------------------------------------------------ model blocks


@pytest.mark.parametrize("J,parity", [(0, 1), (1, -1), (3, 1), (4, -1)])
def test_model_block_unitary_symmetric(surface, reduced_grid, J, parity):
    E = kelvin_to_hartree(1e-4) + surface.thresholds.d52
    b = solve_block(mcqs_problem(surface, J, parity), E, reduced_grid)
    assert b.unitarity_error < 1e-8
    assert b.symmetry_error < 1e-8
    assert np.allclose(b.K, b.K.T, atol=1e-8)
    P = b.probabilities()
    assert np.allclose(P.sum(axis=0), 1.0, atol=1e-8)
    assert np.allclose(P, P.T, atol=1e-8)


def test_fcqs_grid_halving(surface):
    """Halving the step changes no |S|^2 by more than 1e-4."""
    rng = np.random.default_rng(7)
    p = fcqs_problem(surface, 1)
    for e_k in 10 ** rng.uniform(-5, -3, 10):
        E = kelvin_to_hartree(e_k) + surface.thresholds.d52
        a = solve_block(p, E, Grid(4.0, 1000.0, 0.005)).probabilities()
        b = solve_block(p, E, Grid(4.0, 1000.0, 0.0025)).probabilities()
        assert np.max(np.abs(a - b)) < 1e-4


def test_rmin_insensitivity(surface):
    p = fcqs_problem(surface, 0)
    E = kelvin_to_hartree(1e-3) + surface.thresholds.d52
    k1 = solve_block(p, E, Grid(4.0, 2000.0, 0.005)).K
    k2 = solve_block(p, E, Grid(3.5, 2000.0, 0.005)).K
    assert np.max(np.abs(k1 - k2)) < 1e-6 * np.max(np.abs(k1))


def test_mcqs_channel_layout(surface):
    p = mcqs_problem(surface, 2, 1)
    assert p.n == 12
    assert list(p.thresholds) == sorted(p.thresholds)
    W = p.coupling_matrix(np.array([6.0, 9.0]), 0.0)
    assert np.allclose(W, np.transpose(W, (0, 2, 1)), atol=1e-12)


def test_extrapolation_beats_plain_steps(surface):
    """Extrapolating from h and h/2 lands much closer to a fine reference than h/2 alone."""
    p = fcqs_problem(surface, 1)
    E = kelvin_to_hartree(1e-4) + surface.thresholds.d52
    g = Grid(4.0, 400.0, 0.005, auto_extend=False, extrapolate=False)
    ref = solve_block(p, E, replace(g, step=0.0003125)).S
    half = solve_block(p, E, replace(g, step=0.0025)).S
    ext = solve_block(p, E, replace(g, extrapolate=True))
    assert np.abs(ext.S - ref).max() < 0.01 * np.abs(half - ref).max()
    assert ext.unitarity_error < 1e-12 and ext.symmetry_error < 1e-12
    assert np.allclose(k_to_s(ext.K), ext.S, atol=1e-10)
