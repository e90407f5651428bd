"""Log-derivative solution of the coupled radial equations and S-matrix extraction.

The radial equations are written as ``psi'' = W psi`` with

    W(R) = 2 mu (V(R) - E) + diag(l_i (l_i + 1)) / R**2

and propagated with Johnson's log-derivative method on a uniform grid.
Open channels are matched to Riccati-Bessel functions

    jhat_l(x) = x j_l(x),   nhat_l(x) = x y_l(x)   (nhat_0 = -cos x),

for which ``jhat nhat' - jhat' nhat = 1``.  The wavefunction is
``Psi = J - N K`` with flux-normalized ``J = k**-1/2 jhat``, so a single
channel has ``K = tan(delta)`` and ``S = exp(2 i delta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ive, kve, spherical_jn, spherical_yn

from ._kernels import propagate
from .basis import frame_transform
from .potentials import OMEGA_BLOCKS, PotentialSurfaceSet

__all__ = [
    "ConfigurationError",
    "PropagationError",
    "BelowThresholdError",
    "ChannelInfo",
    "CoupledProblem",
    "Grid",
    "SMatrixBlock",
    "riccati_bessel",
    "logderiv_propagate",
    "match_asymptotic",
    "k_to_s",
    "solve_block",
    "mcqs_problem",
    "fcqs_problem",
]


class ConfigurationError(ValueError):
    """Invalid grid or violated propagation precondition."""


class PropagationError(ArithmeticError):
    """Singular matrix met during propagation."""


class BelowThresholdError(ValueError):
    """No channel is open at the requested energy."""


def riccati_bessel(ell: int, x):
    """Riccati-Bessel functions and their derivatives.

    Returns
    -------
    (jhat, nhat, jhat', nhat')
        With ``jhat = x j_l(x)`` and ``nhat = x y_l(x)``.
    """
    if ell < 0:
        raise ValueError("ell must be >= 0")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    j = spherical_jn(ell, x)
    jp = spherical_jn(ell, x, derivative=True)
    y = spherical_yn(ell, x)
    yp = spherical_yn(ell, x, derivative=True)
    return x * j, x * y, j + x * jp, y + x * yp


def _closed_logderivs(ell: int, x: float) -> tuple[float, float]:
    """d/dx log of x^1/2 I_{l+1/2}(x) and x^1/2 K_{l+1/2}(x)."""
    nu = ell + 0.5
    i0, im, ip = ive(nu, x), ive(nu - 1.0, x), ive(nu + 1.0, x)
    k0, km, kp = kve(nu, x), kve(nu - 1.0, x), kve(nu + 1.0, x)
    grow = 0.5 / x + 0.5 * (im + ip) / i0
    decay = 0.5 / x - 0.5 * (km + kp) / k0
    return grow, decay


@dataclass(frozen=True)
class ChannelInfo:
    label: str
    level: str
    threshold: float
    ell: int
    j: int = -1


@dataclass(frozen=True)
class CoupledProblem:
    """Coupled radial problem in a fixed channel basis.

    ``potential(R)`` returns V for an array of R with shape (m, n, n),
    centrifugal terms excluded.  For ``R >= tail_start`` the potential must
    equal ``A0 + A4/R^4 + A6/R^6`` with ``tail = (A0, A4, A6)``.
    """

    channels: tuple[ChannelInfo, ...]
    potential: Callable[[np.ndarray], np.ndarray]
    tail: tuple[np.ndarray, np.ndarray, np.ndarray]
    tail_start: float
    reduced_mass: float
    block: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.channels)

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([c.threshold for c in self.channels])

    @property
    def ells(self) -> np.ndarray:
        return np.array([c.ell for c in self.channels])

    def coupling_matrix(self, R, energy: float) -> np.ndarray:
        """W(R) for an array of R, shape (m, n, n)."""
        R = np.atleast_1d(np.asarray(R, dtype=float))
        mu2 = 2.0 * self.reduced_mass
        V = self.potential(R)
        lf = self.ells * (self.ells + 1.0)
        W = mu2 * V
        idx = np.arange(self.n)
        with np.errstate(divide="ignore", invalid="ignore"):
            cf = np.where(lf[None, :] > 0, lf[None, :] / R[:, None] ** 2, 0.0)
        W[:, idx, idx] += cf - mu2 * energy
        return W

    def short_range_table(self, r_min: float, step: float) -> np.ndarray:
        """``2 mu V + l(l+1)/R^2`` on grid points ``r_min + k step`` up to ``tail_start``."""
        key = (r_min, step)
        if key not in self._cache:
            n_sr = max(int(math.floor((self.tail_start - r_min) / step + 1e-9)) + 1, 1)
            R = r_min + step * np.arange(n_sr)
            self._cache[key] = np.ascontiguousarray(self.coupling_matrix(R, 0.0))
        return self._cache[key]


@dataclass(frozen=True)
class Grid:
    """Radial grid of the propagation.

    With ``extrapolate`` :func:`solve_block` propagates at ``step`` and
    ``step / 2`` and Richardson-extrapolates the S matrix, removing the
    leading h^4 error of the log-derivative recursion.
    """

    r_min: float = 4.0
    r_max: float = 10000.0
    step: float = 0.005
    auto_extend: bool = True
    residual_ratio: float = 1e-3
    extrapolate: bool = True

    def n_steps(self, r_end: float) -> int:
        span = r_end - self.r_min
        n = span / self.step
        nr = int(round(n))
        if abs(n - nr) > 1e-6 or nr % 2:
            raise ConfigurationError(
                f"step {self.step} must divide [{self.r_min}, {r_end}] into an even number of intervals"
            )
        return nr

    def end_for(self, problem: CoupledProblem, energy: float) -> float:
        """Matching radius: r_max, extended so the residual tail is small."""
        r_end = self.r_max
        if self.auto_extend:
            e_open = energy - problem.thresholds
            e_open = e_open[e_open > 0]
            if e_open.size:
                _, a4, a6 = problem.tail
                c4 = np.abs(a4).max()
                c6 = np.abs(a6).max()
                e_min = self.residual_ratio * e_open.min()
                need = (c4 / e_min) ** 0.25 if c4 > 0 else 0.0
                if c6 > 0:
                    need = max(need, (c6 / e_min) ** (1.0 / 6.0))
                if need > r_end:
                    # keep an even number of steps
                    k = math.ceil((need - self.r_min) / (2.0 * self.step))
                    r_end = self.r_min + 2.0 * k * self.step
        return r_end


def logderiv_propagate(
    problem: CoupledProblem,
    energy: float,
    r_min: float,
    r_max: float,
    step: float,
    y0: str | np.ndarray = "wkb",
    check_inner: bool = True,
) -> np.ndarray:
    """Log-derivative matrix ``Y = Psi' Psi^-1`` at ``r_max``.

    Parameters
    ----------
    y0 : {"wkb", "hard-wall"} or ndarray
        Start value at ``r_min``; "wkb" uses ``sqrt(diag W)``, "hard-wall"
        imposes ``Psi(r_min) = 0``.
    check_inner : bool
        Require every diagonal potential at ``r_min`` to exceed the energy by
        0.05 hartree.

    Raises
    ------
    ConfigurationError
        Odd number of steps or an inner-wall precondition violation.
    PropagationError
        Singular matrix inside the grid.
    """
    grid = Grid(r_min, r_max, step, auto_extend=False)
    n_steps = grid.n_steps(r_max)
    w_sr = problem.short_range_table(r_min, step)
    if check_inner:
        v0 = np.diagonal(problem.potential(np.array([r_min]))[0])
        if np.any(v0 < energy + 0.05):
            bad = [c.label for c, v in zip(problem.channels, v0) if v < energy + 0.05]
            raise ConfigurationError(
                f"r_min={r_min} is not deep enough in the repulsive wall for {bad}"
            )
    n = problem.n
    if isinstance(y0, str):
        if y0 == "hard-wall":
            y_init = np.eye(n) * 1e30
        elif y0 == "wkb":
            w0 = np.diagonal(problem.coupling_matrix(np.array([r_min]), energy)[0])
            y_init = np.diag(np.sqrt(np.maximum(w0, 0.0)))
        else:
            raise ValueError(f"unknown y0 {y0!r}")
    else:
        y_init = np.asarray(y0, dtype=float)
    a0, a4, a6 = (np.ascontiguousarray(a, dtype=float) for a in problem.tail)
    lfac = problem.ells * (problem.ells + 1.0)
    Y, status = propagate(
        w_sr, float(r_min), float(step), n_steps, a0, a4, a6,
        lfac.astype(float), 2.0 * problem.reduced_mass, float(energy), y_init,
    )
    if status >= 0:
        raise PropagationError(
            f"singular matrix at R={r_min + status * step:.4f} bohr (E={energy:.6e})"
        )
    return Y


def match_asymptotic(Y: np.ndarray, problem: CoupledProblem, energy: float, r: float):
    """K matrix over open channels from the log-derivative at ``r``.

    Closed channels are matched to exponentially decaying modified spherical
    Bessel functions and drop out of the open block.

    Returns
    -------
    (K, open_index)
    """
    thr = problem.thresholds
    ells = problem.ells
    mu2 = 2.0 * problem.reduced_mass
    is_open = energy > thr
    if not is_open.any():
        raise BelowThresholdError(f"no open channel at E={energy:.6e}")
    n = problem.n
    J = np.zeros(n)
    Jp = np.zeros(n)
    N = np.zeros(n)
    Np = np.zeros(n)
    for i in range(n):
        if is_open[i]:
            k = math.sqrt(mu2 * (energy - thr[i]))
            jh, nh, jhp, nhp = riccati_bessel(int(ells[i]), k * r)
            s = 1.0 / math.sqrt(k)
            J[i], Jp[i] = s * jh, s * k * jhp
            N[i], Np[i] = s * nh, s * k * nhp
        else:
            kap = math.sqrt(mu2 * (thr[i] - energy))
            grow, decay = _closed_logderivs(int(ells[i]), kap * r)
            J[i], Jp[i] = 1.0, kap * grow
            N[i], Np[i] = 1.0, kap * decay
    A = Y * N[None, :] - np.diag(Np)
    B = Y * J[None, :] - np.diag(Jp)
    K = np.linalg.solve(A, B)
    oi = np.nonzero(is_open)[0]
    Koo = K[np.ix_(oi, oi)]
    return 0.5 * (Koo + Koo.T), oi


def k_to_s(K: np.ndarray) -> np.ndarray:
    """S = (I + iK)(I - iK)^-1."""
    K = np.asarray(K, dtype=float)
    I = np.eye(K.shape[0])
    # (I - iK) and (I + iK) commute, so solve from the right-hand side
    return np.linalg.solve(I - 1j * K, I + 1j * K)


@dataclass(frozen=True)
class SMatrixBlock:
    energy: float
    block: tuple
    channels: tuple[ChannelInfo, ...]
    S: np.ndarray
    K: np.ndarray
    r_max: float = math.nan

    @property
    def unitarity_error(self) -> float:
        n = self.S.shape[0]
        return float(np.abs(self.S.conj().T @ self.S - np.eye(n)).max())

    @property
    def symmetry_error(self) -> float:
        return float(np.abs(self.S - self.S.T).max())

    def probabilities(self) -> np.ndarray:
        """|S_fi|^2 with rows f (exit) and columns i (entrance)."""
        return np.abs(self.S) ** 2

    def wavenumbers(self, reduced_mass: float) -> np.ndarray:
        return np.sqrt(2.0 * reduced_mass * (self.energy - np.array([c.threshold for c in self.channels])))


def _nearest_unitary(S: np.ndarray) -> np.ndarray:
    # polar factor S (S^+ S)^(-1/2); keeps a symmetric S symmetric
    w, V = np.linalg.eigh(S.conj().T @ S)
    return S @ (V * w ** -0.5) @ V.conj().T


def _s_to_k(S: np.ndarray) -> np.ndarray:
    """K = i (I + S)^-1 (I - S) for a symmetric unitary S."""
    I = np.eye(S.shape[0])
    K = (1j * np.linalg.solve(I + S, I - S)).real
    return 0.5 * (K + K.T)


def solve_block(problem: CoupledProblem, energy: float, grid: Grid = Grid(), y0="wkb", check_inner=True) -> SMatrixBlock:
    """Propagate, match and return the S-matrix block at total energy ``energy``.

    With ``grid.extrapolate`` the block combines the S matrices at ``step``
    and ``step / 2`` as ``(16 S_{h/2} - S_h) / 15`` and restores exact
    unitarity with the nearest unitary matrix.
    """
    if not (energy > problem.thresholds).any():
        raise BelowThresholdError(f"no open channel at E={energy:.6e}")
    r_end = grid.end_for(problem, energy)
    Y = logderiv_propagate(problem, energy, grid.r_min, r_end, grid.step, y0, check_inner)
    K, oi = match_asymptotic(Y, problem, energy, r_end)
    S = k_to_s(K)
    if grid.extrapolate:
        Y2 = logderiv_propagate(problem, energy, grid.r_min, r_end, grid.step / 2, y0, check_inner)
        K2, _ = match_asymptotic(Y2, problem, energy, r_end)
        S = _nearest_unitary((16.0 * k_to_s(K2) - S) / 15.0)
        try:
            K = _s_to_k(S)
        except np.linalg.LinAlgError:
            K = K2
    chans = tuple(problem.channels[i] for i in oi)
    return SMatrixBlock(energy, problem.block, chans, S, K, r_end)


# ------------------------------------------------------------ model problems


def _level(ch) -> str:
    return ch.level


def mcqs_problem(surface: PotentialSurfaceSet, J: int, parity: int) -> CoupledProblem:
    """Case (e) problem of one (J, parity) block."""
    ft = frame_transform(J, parity, surface.thresholds)
    T = np.ascontiguousarray(ft.matrix)
    idx = np.array(ft.state_indices) - 1

    def potential(R):
        Va = surface.matrix(np.atleast_1d(R))[:, idx[:, None], idx[None, :]]
        return np.einsum("ea,rab,fb->ref", T, Va, T, optimize=True)

    A0, A4, A6 = surface.tail_coefficients()
    tail = tuple(T @ A[np.ix_(idx, idx)] @ T.T for A in (A0, A4, A6))
    # the asymptotic matrix is diagonal in the case (e) basis up to round-off
    a0 = np.diag(np.diag(tail[0]))
    chans = tuple(
        ChannelInfo(c.label, c.level, c.threshold, c.ell, c.j) for c in ft.rows
    )
    return CoupledProblem(
        chans, _with_exact_asymptote(potential, a0 - tail[0]),
        (a0, tail[1], tail[2]), surface.tail_start, surface.reduced_mass, (J, parity),
    )


def _with_exact_asymptote(potential, correction):
    if not np.any(correction):
        return potential

    def fixed(R):
        return potential(R) + correction[None, :, :]

    return fixed


FCQS_LEVELS = ("S+S", "Ion+S", "S+D(3/2)", "S+D(5/2)")


def fcqs_rotation(surface: PotentialSurfaceSet) -> np.ndarray:
    """Eigenvectors (columns) of the asymptotic 0+ block, ordered by threshold."""
    A0 = surface.tail_coefficients()[0]
    ii = np.array(OMEGA_BLOCKS["0+"]) - 1
    w, U = np.linalg.eigh(A0[np.ix_(ii, ii)])
    order = np.argsort(w)
    U = U[:, order]
    # fix signs: largest component positive
    for c in range(U.shape[1]):
        if U[np.argmax(np.abs(U[:, c])), c] < 0:
            U[:, c] = -U[:, c]
    return U


def fcqs_problem(surface: PotentialSurfaceSet, ell: int) -> CoupledProblem:
    """Four-channel 0+ problem with one partial wave shared by all channels."""
    ii = np.array(OMEGA_BLOCKS["0+"]) - 1
    U = fcqs_rotation(surface)

    def potential(R):
        V = surface.matrix(np.atleast_1d(R))[:, ii[:, None], ii[None, :]]
        return np.einsum("ai,rab,bj->rij", U, V, U, optimize=True)

    A0, A4, A6 = (U.T @ A[np.ix_(ii, ii)] @ U for A in surface.tail_coefficients())
    a0 = np.diag(np.diag(A0))
    thr = np.diag(a0)
    chans = tuple(
        ChannelInfo(f"{lev} l={ell}", lev, float(t), ell) for lev, t in zip(FCQS_LEVELS, thr)
    )
    return CoupledProblem(
        chans, _with_exact_asymptote(potential, a0 - A0), (a0, A4, A6),
        surface.tail_start, surface.reduced_mass, ("l", ell),
    )
