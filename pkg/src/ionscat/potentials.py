"""Body-frame potential matrix: model PECs, spin-orbit couplings and the X1
gaussian coupling, assembled into the 16x16 Hund's case (a) matrix.

All energies are in hartree and all distances in bohr.  Every evaluation
routine accepts scalars or numpy arrays of R.

PEC model
---------
``morse-longrange`` curves use a Morse branch that keeps the tabulated
minimum ``V(Re) = threshold - De`` exactly,

    V(R) = threshold - De + D' (1 - exp(-a (R - Re)))**2,     R <= R_sw

and the long-range form ``threshold - C4/R**4 - C6/R**6`` beyond ``R_sw``.
The steepness ``a`` and the branch height ``D'`` are solved from value and
slope matching at ``R_sw``, so the curve is C1.  ``longrange`` curves use the
long-range form everywhere (the repulsive Ion+S diabat), and
``tabulated-spline`` curves come from :func:`load_tabulated`.
"""

from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .angular import clebsch_gordan
from .basis import (
    DEFAULT_THRESHOLDS,
    Thresholds,
    enumerate_case_a,
    frame_transform,
)
from .units import cm1_to_hartree, hartree_to_cm1

__all__ = [
    "ModelFitError",
    "IngestionError",
    "CrossingWarning",
    "CurveConstants",
    "PecModel",
    "SocModel",
    "X1Coupling",
    "PotentialSurfaceSet",
    "CrossingReport",
    "OMEGA_BLOCKS",
    "build_pec",
    "default_switch_radius",
    "calibrate_switch_radius",
    "x1_gaussian",
    "soc_value",
    "diabatize_swap",
    "atomic_soc_matrix",
    "assemble_bf_matrix",
    "load_tabulated",
    "load_surface",
    "surface_from_config",
    "default_surface",
    "adiabats_case_c",
    "adiabats_case_e",
    "rotational_matrix_case_a",
    "find_crossing",
    "crossing_diagnostics",
    "x3_avoided_gap",
]

N_STATES = 16
# 1-based state indices of each Omega block
OMEGA_BLOCKS = {
    "0+": (1, 2, 3, 4),
    "0-": (5, 6, 7),
    "1": (8, 9, 10, 11, 12),
    "2": (13, 14, 15),
    "3": (16,),
}
_BLOCK_OF = {i: name for name, idx in OMEGA_BLOCKS.items() for i in idx}


class ModelFitError(ValueError):
    """No Morse/long-range matching exists for the requested parameters."""


class IngestionError(ValueError):
    """A tabulated curve file could not be read."""


class CrossingWarning(UserWarning):
    """Model crossing location or energy deviates from the reference."""


def _tail(R, c4, c6):
    return -c4 / R**4 - c6 / R**6


def _tail_slope(R, c4, c6):
    return 4.0 * c4 / R**5 + 6.0 * c6 / R**7


@dataclass(frozen=True)
class CurveConstants:
    """Equilibrium distance (bohr), well depth and C6 (both a.u.) of one curve."""

    re: float
    de: float
    c6: float

    @classmethod
    def from_cm1(cls, re: float, de_cm1: float, c6: float) -> "CurveConstants":
        return cls(re, cm1_to_hartree(de_cm1), c6)


@dataclass(frozen=True)
class PecModel:
    state: int
    form: str
    threshold: float
    c4: float
    c6: float
    re: float = math.nan
    de: float = math.nan
    morse_a: float = math.nan
    morse_d: float = math.nan
    switch_radius: float = 0.0
    spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    def __call__(self, R):
        R = np.asarray(R, dtype=float)
        tail = self.threshold + _tail(R, self.c4, self.c6)
        if self.form == "longrange":
            return tail
        if self.form == "morse-longrange":
            u = np.exp(-self.morse_a * (R - self.re))
            inner = self.threshold - self.de + self.morse_d * (1.0 - u) ** 2
            return np.where(R <= self.switch_radius, inner, tail)
        # tabulated-spline: spline inside, linear continuation below, tail above
        r0 = self.spline.x[0]
        v0 = self.spline(r0)
        d0 = self.spline(r0, 1)
        inside = self.spline(np.clip(R, r0, self.switch_radius))
        below = v0 + d0 * (R - r0)
        return np.where(R < r0, below, np.where(R <= self.switch_radius, inside, tail))

    def derivative(self, R):
        R = np.asarray(R, dtype=float)
        tail = _tail_slope(R, self.c4, self.c6)
        if self.form == "longrange":
            return tail
        if self.form == "morse-longrange":
            u = np.exp(-self.morse_a * (R - self.re))
            inner = 2.0 * self.morse_d * self.morse_a * u * (1.0 - u)
            return np.where(R <= self.switch_radius, inner, tail)
        r0 = self.spline.x[0]
        inside = self.spline(np.clip(R, r0, self.switch_radius), 1)
        return np.where(R < r0, self.spline(r0, 1), np.where(R <= self.switch_radius, inside, tail))

    @property
    def tail_start(self) -> float:
        """Radius beyond which the curve is exactly threshold - C4/R^4 - C6/R^6."""
        return 0.0 if self.form == "longrange" else self.switch_radius


def _solve_morse(record: CurveConstants, c4: float, r_sw: float):
    """Return (a, D') matching value and slope at r_sw, or None."""
    x = r_sw - record.re
    if x <= 0:
        return None
    height = _tail(r_sw, c4, record.c6) + record.de
    slope = _tail_slope(r_sw, c4, record.c6)
    if height <= 0 or slope <= 0:
        return None
    q = slope / height
    # g(a) = 2a/(exp(a x) - 1) falls monotonically from 2/x to 0
    if q >= 2.0 / x:
        return None

    def g(a):
        return 2.0 * a / math.expm1(a * x) - q

    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e3:
            return None
    a = brentq(g, 1e-12, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    u = math.exp(-a * x)
    return a, height / (1.0 - u) ** 2


DEFAULT_SWITCH_RADIUS = 20.0


def default_switch_radius(record: CurveConstants, c4: float) -> float:
    """Default Morse/long-range junction, a fixed 20 bohr.

    At this radius every curve of the model has a C1 match with a Morse
    steepness between roughly 0.4 and 0.6 per bohr.
    """
    if _solve_morse(record, c4, DEFAULT_SWITCH_RADIUS) is None:
        raise ModelFitError(
            f"no Morse/long-range match at R={DEFAULT_SWITCH_RADIUS} (Re={record.re}, "
            f"De={hartree_to_cm1(record.de):.1f} cm-1, C4={c4}, C6={record.c6})"
        )
    return DEFAULT_SWITCH_RADIUS


def build_pec(
    state: int,
    record: CurveConstants | None,
    threshold: float,
    c4: float,
    switch_radius: float | None = None,
    form: str = "morse-longrange",
    c6: float | None = None,
) -> PecModel:
    """Build an analytic PEC from tabulated spectroscopic constants.

    Parameters
    ----------
    state : int
        1-based case (a) state index.
    record : CurveConstants or None
        ``Re``, ``De`` and ``C6``.  Only ``C6`` is used by ``form="longrange"``,
        which may also pass ``c6`` directly.
    threshold : float
        Asymptotic energy of the curve (hartree).
    switch_radius : float, optional
        Junction between the Morse and long-range branches.  Defaults to
        :func:`default_switch_radius`.

    Raises
    ------
    ModelFitError
        When no C1 junction exists at the requested radius.
    """
    if form == "longrange":
        c6v = c6 if c6 is not None else record.c6
        return PecModel(state, "longrange", threshold, c4, c6v)
    if form != "morse-longrange":
        raise ValueError(f"unknown PEC form {form!r}")
    if record is None or record.de <= 0 or record.re <= 0:
        raise ModelFitError(f"state {state}: Re and De must be positive")
    if switch_radius is None:
        switch_radius = default_switch_radius(record, c4)
    sol = _solve_morse(record, c4, switch_radius)
    if sol is None:
        L = _tail(switch_radius, c4, record.c6)
        raise ModelFitError(
            f"state {state}: no (a, D') matching at R_sw={switch_radius} "
            f"(tail {hartree_to_cm1(L):.2f} cm-1, slope {_tail_slope(switch_radius, c4, record.c6):.3e}, "
            f"Re={record.re}, De={hartree_to_cm1(record.de):.1f} cm-1)"
        )
    a, dprime = sol
    return PecModel(
        state,
        "morse-longrange",
        threshold,
        c4,
        record.c6,
        re=record.re,
        de=record.de,
        morse_a=a,
        morse_d=dprime,
        switch_radius=float(switch_radius),
    )


def calibrate_switch_radius(
    record: CurveConstants,
    threshold: float,
    c4: float,
    target,
    r_range: tuple[float, float],
) -> float:
    """Switch radius for which ``target(pec)`` vanishes.

    ``target`` receives a trial :class:`PecModel`; the root is bracketed on a
    grid of ``r_range`` (only radii that admit a C1 match are used).
    """
    grid = np.linspace(*r_range, 400)
    vals = []
    for r in grid:
        if _solve_morse(record, c4, r) is None:
            vals.append(np.nan)
        else:
            vals.append(target(build_pec(0, record, threshold, c4, r)))
    vals = np.array(vals)
    for k in range(len(grid) - 1):
        if np.isfinite(vals[k]) and np.isfinite(vals[k + 1]) and vals[k] * vals[k + 1] <= 0:
            return float(
                brentq(
                    lambda r: target(build_pec(0, record, threshold, c4, r)),
                    grid[k],
                    grid[k + 1],
                    xtol=1e-10,
                )
            )
    raise ModelFitError(f"calibration target has no root in {r_range}")


@dataclass(frozen=True)
class X1Coupling:
    w: float = 0.001795
    rc: float = 11.06
    delta: float = 0.75

    def __call__(self, R):
        R = np.asarray(R, dtype=float)
        return self.w * np.exp(-((R - self.rc) ** 2) / (2.0 * self.delta**2))

    @property
    def negligible_beyond(self) -> float:
        return self.rc + 13.0 * self.delta


def x1_gaussian(R, w: float = 0.001795, rc: float = 11.06, delta: float = 0.75):
    """Gaussian X1 coupling ``w exp(-(R-rc)^2 / (2 delta^2))``."""
    return X1Coupling(w, rc, delta)(R)


def _blend(R, center, width):
    return 0.5 * (1.0 + np.tanh((R - center) / width))


@dataclass(frozen=True)
class SocModel:
    """One spin-orbit matrix element A_{i,j}(R).

    ``tanh-switch`` goes from ``amplitude`` at short range to
    ``asymptotic_value`` at long range around ``switch_center``.  A swapped
    model returns its partner's raw curve for R << r_swap and its own raw
    curve for R >> r_swap.
    """

    pair: tuple[int, int]
    asymptotic_value: float
    shape: str = "constant"
    amplitude: float = 0.0
    switch_center: float = 10.0
    switch_width: float = 1.0
    spline: CubicSpline | None = field(default=None, repr=False, compare=False)
    partner: "SocModel | None" = None
    swap_radius: float = math.nan
    blend_width: float = math.nan

    def raw(self, R):
        R = np.asarray(R, dtype=float)
        if self.shape == "constant":
            return np.full_like(R, self.asymptotic_value)
        if self.shape == "tanh-switch":
            s = _blend(R, self.switch_center, self.switch_width)
            return self.amplitude + (self.asymptotic_value - self.amplitude) * s
        if self.shape == "tabulated":
            x = self.spline.x
            inside = self.spline(np.clip(R, x[0], x[-1]))
            return np.where(R > x[-1], self.asymptotic_value, inside)
        raise ValueError(f"unknown SOC shape {self.shape!r}")

    def __call__(self, R):
        if self.partner is None:
            return self.raw(R)
        s = _blend(np.asarray(R, dtype=float), self.swap_radius, self.blend_width)
        return s * self.raw(R) + (1.0 - s) * self.partner.raw(R)

    @property
    def tail_start(self) -> float:
        """Radius beyond which the value equals the asymptote to machine precision."""
        r = 0.0
        if self.shape == "tanh-switch":
            r = self.switch_center + 20.0 * self.switch_width
        elif self.shape == "tabulated":
            r = float(self.spline.x[-1])
        if self.partner is not None:
            r = max(r, self.partner.tail_start, self.swap_radius + 20.0 * self.blend_width)
        return r


def soc_value(soc: SocModel, R):
    return soc(R)


def diabatize_swap(
    soc_a: SocModel, soc_b: SocModel, r_swap: float, blend_width: float
) -> tuple[SocModel, SocModel]:
    """Exchange the inner branches of two SOC curves.

    The returned pair keeps the labels of ``soc_a`` and ``soc_b``; for
    R << r_swap they give ``(b_raw, a_raw)`` and for R >> r_swap
    ``(a_raw, b_raw)``.
    """
    a = replace(soc_a, partner=None, swap_radius=math.nan, blend_width=math.nan)
    b = replace(soc_b, partner=None, swap_radius=math.nan, blend_width=math.nan)
    return (
        replace(a, partner=b, swap_radius=r_swap, blend_width=blend_width),
        replace(b, partner=a, swap_radius=r_swap, blend_width=blend_width),
    )


# ---------------------------------------------------------------- atomic SOC


def _sd_component_vector(lam: int, S: int, sig: int) -> np.ndarray:
    """|m_l=lam> (x) |S sig> in the product basis (m_l, m_sa, m_sb)."""
    v = np.zeros((5, 2, 2))
    for ia, ma in enumerate((0.5, -0.5)):
        for ib, mb in enumerate((0.5, -0.5)):
            v[lam + 2, ia, ib] = clebsch_gordan(0.5, ma, 0.5, mb, S, sig)
    return v.ravel()


def _ls_b_operator() -> np.ndarray:
    """l.s_b for a d electron (l=2) and spin b, identity on spin a."""
    ml = np.arange(-2, 3)
    lz = np.diag(ml.astype(float))
    lp = np.zeros((5, 5))
    for k, m in enumerate(ml[:-1]):
        lp[k + 1, k] = math.sqrt(2 * 3 - m * (m + 1))
    lm = lp.T
    sz = np.diag([0.5, -0.5])
    sp = np.array([[0.0, 1.0], [0.0, 0.0]])  # basis order (+1/2, -1/2)
    sm = sp.T
    ia = np.eye(2)
    ls = np.kron(lz, np.kron(ia, sz)) + 0.5 * (
        np.kron(lp, np.kron(ia, sm)) + np.kron(lm, np.kron(ia, sp))
    )
    return ls


def atomic_soc_matrix(zeta: float) -> np.ndarray:
    """Separated-atom ``zeta l.s`` of Ba+(5d) among the S+D states (16x16).

    The symmetrized kets are evaluated for the smallest (J, parity) that
    contains each Omega block; the result does not depend on that choice.
    """
    ls = _ls_b_operator()
    out = np.zeros((N_STATES, N_STATES))
    states = [s for s in enumerate_case_a() if s.asymptote == "S+D"]
    vecs = {}
    for st in states:
        lam, sig = st.Lambda, st.Sigma
        if lam == 0 and sig == 0:
            vecs[st.index] = _sd_component_vector(0, st.S, 0)
        elif st.omega == "0+" or st.omega == "0-":
            # eta = -1 for 0+ and +1 for 0- (triplet states, see basis)
            eta = -1.0 if st.omega == "0+" else 1.0
            vecs[st.index] = (
                _sd_component_vector(lam, st.S, sig) + eta * _sd_component_vector(-lam, st.S, -sig)
            ) / math.sqrt(2.0)
        else:
            vecs[st.index] = _sd_component_vector(lam, st.S, sig)
    for a in states:
        for b in states:
            if a.omega != b.omega:
                continue
            out[a.index - 1, b.index - 1] = zeta * vecs[a.index] @ ls @ vecs[b.index]
    out[np.abs(out) < 1e-15 * max(1.0, abs(zeta))] = 0.0
    return out


# ------------------------------------------------------------ surface set


@dataclass(frozen=True)
class PotentialSurfaceSet:
    pecs: tuple[PecModel, ...]
    socs: tuple[SocModel, ...]
    x1: X1Coupling
    thresholds: Thresholds = DEFAULT_THRESHOLDS
    reduced_mass: float = 10481.62
    c4: float = 82.2

    def __post_init__(self):
        if len(self.pecs) != N_STATES:
            raise ValueError("exactly 16 PECs are required")
        for soc in self.socs:
            i, j = soc.pair
            if _BLOCK_OF[i] != _BLOCK_OF[j]:
                raise ValueError(f"SOC {soc.pair} couples different Omega blocks")

    def matrix(self, R) -> np.ndarray:
        """16x16 body-frame matrix; shape (16, 16) for scalar R, else (n, 16, 16)."""
        R = np.asarray(R, dtype=float)
        scalar = R.ndim == 0
        Rv = np.atleast_1d(R)
        out = np.zeros((Rv.size, N_STATES, N_STATES))
        for k, pec in enumerate(self.pecs):
            out[:, k, k] = pec(Rv)
        for soc in self.socs:
            i, j = soc.pair[0] - 1, soc.pair[1] - 1
            v = soc(Rv)
            out[:, i, j] += v
            if i != j:
                out[:, j, i] += v
        g = self.x1(Rv)
        out[:, 1, 2] += g
        out[:, 2, 1] += g
        return out[0] if scalar else out

    def block(self, R, omega: str) -> np.ndarray:
        idx = np.array(OMEGA_BLOCKS[omega]) - 1
        M = self.matrix(R)
        return M[..., idx[:, None], idx[None, :]]

    @property
    def tail_start(self) -> float:
        """Radius beyond which ``matrix(R) == A0 + A4/R^4 + A6/R^6`` exactly."""
        r = max(p.tail_start for p in self.pecs)
        r = max([r, self.x1.negligible_beyond] + [s.tail_start for s in self.socs])
        return float(r)

    def tail_coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        A0 = np.zeros((N_STATES, N_STATES))
        A4 = np.zeros((N_STATES, N_STATES))
        A6 = np.zeros((N_STATES, N_STATES))
        for k, pec in enumerate(self.pecs):
            A0[k, k] = pec.threshold
            A4[k, k] = -pec.c4
            A6[k, k] = -pec.c6
        for soc in self.socs:
            i, j = soc.pair[0] - 1, soc.pair[1] - 1
            v = soc.asymptotic_value
            if soc.partner is not None:
                v = soc.raw(1e6)
            A0[i, j] += v
            if i != j:
                A0[j, i] += v
        return A0, A4, A6

    def with_couplings(self, **scales: float) -> "PotentialSurfaceSet":
        """Copy with selected couplings scaled, e.g. ``with_couplings(A8_11=0, G=0)``."""
        socs = []
        for soc in self.socs:
            f = scales.get(f"A{soc.pair[0]}_{soc.pair[1]}", scales.get("soc", 1.0))
            socs.append(_scale_soc(soc, f))
        x1 = replace(self.x1, w=self.x1.w * scales.get("G", 1.0))
        return replace(self, socs=tuple(socs), x1=x1)


def _scale_soc(soc: SocModel, f: float) -> SocModel:
    if f == 1.0:
        return soc
    partner = _scale_soc(soc.partner, f) if soc.partner is not None else None
    return replace(
        soc,
        asymptotic_value=soc.asymptotic_value * f,
        amplitude=soc.amplitude * f,
        spline=None if soc.spline is None else CubicSpline(soc.spline.x, f * soc.spline(soc.spline.x), bc_type="natural"),
        partner=partner,
    )


def assemble_bf_matrix(surface: PotentialSurfaceSet, R) -> np.ndarray:
    return surface.matrix(R)


# ---------------------------------------------------------------- ingestion


def _read_table(path) -> np.ndarray:
    path = Path(path)
    rows, prev = [], None
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) < 2:
            raise IngestionError(f"{path}:{lineno}: expected two columns, got {s!r}")
        try:
            r, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise IngestionError(f"{path}:{lineno}: cannot parse {s!r}") from None
        if prev is not None and r <= prev:
            raise IngestionError(f"{path}:{lineno}: R={r} is not larger than previous R={prev}")
        prev = r
        rows.append((r, v))
    if len(rows) < 8:
        raise IngestionError(f"{path}: need at least 8 samples, found {len(rows)}")
    return np.array(rows)


def load_tabulated(
    path,
    kind: str = "pec",
    state: int = 0,
    threshold: float = 0.0,
    c4: float = 82.2,
    pair: tuple[int, int] = (0, 0),
    asymptotic_value: float | None = None,
):
    """Read a two-column ``R_bohr value_hartree`` file.

    PECs are splined inside the sample range and continued with a
    ``-C4/R^4 - C6/R^6`` tail whose two coefficients match value and slope
    at the last sample.  SOC curves are held at ``asymptotic_value`` (default:
    the last sample) beyond the range.
    """
    data = _read_table(path)
    spline = CubicSpline(data[:, 0], data[:, 1], bc_type="natural")
    if kind == "soc":
        asym = float(data[-1, 1]) if asymptotic_value is None else asymptotic_value
        return SocModel(tuple(pair), asym, "tabulated", spline=spline)
    if kind != "pec":
        raise ValueError(f"kind must be 'pec' or 'soc', not {kind!r}")
    rl = float(data[-1, 0])
    dv = float(spline(rl)) - threshold
    dd = float(spline(rl, 1))
    # dv = -C4/R^4 - C6/R^6, dd = 4C4/R^5 + 6C6/R^7
    A = np.array([[-1 / rl**4, -1 / rl**6], [4 / rl**5, 6 / rl**7]])
    c4_fit, c6_fit = np.linalg.solve(A, [dv, dd])
    return PecModel(
        state,
        "tabulated-spline",
        threshold,
        float(c4_fit),
        float(c6_fit),
        switch_radius=rl,
        spline=spline,
    )


# ------------------------------------------------------------ configuration


def _default_config_text() -> str:
    return resources.files("ionscat.data").joinpath("default.ini").read_text("utf-8")


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(inline_comment_prefixes=("#", ";"))


def thresholds_from_config(cp: configparser.ConfigParser) -> Thresholds:
    sec = cp["thresholds"]
    return Thresholds.from_cm1(
        ion_s=sec.getfloat("ion_s_cm1"),
        d32=sec.getfloat("d32_cm1"),
        fs_splitting=sec.getfloat("fs_splitting_cm1"),
    )


def _state_threshold(state: int, thr: Thresholds) -> float:
    asym = enumerate_case_a()[state - 1].asymptote
    return {"S+S": thr.ss, "Ion+S": thr.ion_s, "S+D": thr.d_center}[asym]


def _pec_from_section(cp, state: int, thr: Thresholds, c4: float, base: Path | None, seen=()):
    name = f"pec.{state}"
    if name not in cp:
        raise KeyError(f"missing [{name}] section")
    sec = cp[name]
    if "same_as" in sec:
        other = sec.getint("same_as")
        if other in seen:
            raise ValueError(f"[{name}] same_as cycle")
        proto = _pec_from_section(cp, other, thr, c4, base, seen + (state,))
        return replace(proto, state=state)
    threshold = _state_threshold(state, thr)
    form = sec.get("form", "morse-longrange")
    c4_state = sec.getfloat("c4", c4)
    if form == "tabulated-spline":
        p = Path(sec["table"])
        if base is not None and not p.is_absolute():
            p = base / p
        return load_tabulated(p, "pec", state=state, threshold=threshold, c4=c4_state)
    if form == "longrange":
        return build_pec(state, None, threshold, c4_state, form="longrange", c6=sec.getfloat("c6"))
    rec = CurveConstants.from_cm1(sec.getfloat("re"), sec.getfloat("de_cm1"), sec.getfloat("c6"))
    rsw = sec.getfloat("switch_radius", fallback=None)
    return build_pec(state, rec, threshold, c4_state, switch_radius=rsw)


def _soc_from_section(sec, pair, atomic: float, base: Path | None) -> SocModel:
    shape = sec.get("shape", "constant")
    if "asymptote_cm1" in sec:
        asym = cm1_to_hartree(sec.getfloat("asymptote_cm1"))
    else:
        asym = atomic
    if shape == "tabulated":
        p = Path(sec["table"])
        if base is not None and not p.is_absolute():
            p = base / p
        return load_tabulated(p, "soc", pair=pair, asymptotic_value=asym)
    if shape == "atomic":
        return SocModel(pair, atomic, "constant")
    return SocModel(
        pair,
        asym,
        shape,
        amplitude=cm1_to_hartree(sec.getfloat("amplitude_cm1", 0.0)),
        switch_center=sec.getfloat("center", 10.0),
        switch_width=sec.getfloat("width", 1.0),
    )


def surface_from_config(
    cp: configparser.ConfigParser, base: Path | None = None, check: bool = True
) -> PotentialSurfaceSet:
    """Build a :class:`PotentialSurfaceSet` from parsed configuration."""
    sysc = cp["system"]
    mu = sysc.getfloat("reduced_mass_au")
    c4 = sysc.getfloat("c4_au")
    thr = thresholds_from_config(cp)
    pecs = tuple(_pec_from_section(cp, s, thr, c4, base) for s in range(1, N_STATES + 1))

    atomic = atomic_soc_matrix(thr.zeta)
    socs: dict[tuple[int, int], SocModel] = {}
    for i in range(N_STATES):
        for j in range(i, N_STATES):
            if atomic[i, j] != 0.0:
                socs[(i + 1, j + 1)] = SocModel((i + 1, j + 1), float(atomic[i, j]))
    swaps = []
    for name in cp.sections():
        if not name.startswith("soc."):
            continue
        i, j = (int(x) for x in name[4:].split("_"))
        pair = (min(i, j), max(i, j))
        sec = cp[name]
        socs[pair] = _soc_from_section(sec, pair, float(atomic[pair[0] - 1, pair[1] - 1]), base)
        if "swap_with" in sec:
            a, b = (int(x) for x in sec["swap_with"].split("_"))
            swaps.append((pair, (min(a, b), max(a, b)), sec.getfloat("swap_radius"), sec.getfloat("swap_width")))
    for pa, pb, rs, w in swaps:
        if pa > pb:
            continue
        socs[pa], socs[pb] = diabatize_swap(socs[pa], socs[pb], rs, w)
    x1s = cp["x1"]
    x1 = X1Coupling(x1s.getfloat("w_au"), x1s.getfloat("rc"), x1s.getfloat("delta"))
    surface = PotentialSurfaceSet(
        pecs, tuple(socs[k] for k in sorted(socs)), x1, thr, mu, c4
    )
    if check:
        for rep in crossing_diagnostics(surface):
            if rep.miss > 0.05:
                warnings.warn(rep.describe(), CrossingWarning, stacklevel=2)
    return surface


def load_surface(path=None, check: bool = True) -> PotentialSurfaceSet:
    """Surface from an INI file; missing sections fall back to the shipped defaults."""
    cp = _parser()
    cp.read_string(_default_config_text())
    base = None
    if path is not None:
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
        base = path.parent
    return surface_from_config(cp, base, check)


_DEFAULT_SURFACE: PotentialSurfaceSet | None = None


def default_surface() -> PotentialSurfaceSet:
    global _DEFAULT_SURFACE
    if _DEFAULT_SURFACE is None:
        _DEFAULT_SURFACE = load_surface()
    return _DEFAULT_SURFACE


# ---------------------------------------------------------------- adiabats


def _track(evals: np.ndarray, evecs: np.ndarray) -> np.ndarray:
    """Reorder eigenvalues along R by maximal eigenvector overlap."""
    out = np.empty_like(evals)
    out[0] = evals[0]
    prev = evecs[0]
    for k in range(1, len(evals)):
        ov = np.abs(prev.T @ evecs[k])
        rows, cols = linear_sum_assignment(-ov)
        perm = cols[np.argsort(rows)]
        out[k] = evals[k][perm]
        prev = evecs[k][:, perm]
    return out


def _check_grid(R):
    R = np.asarray(R, dtype=float)
    if R.ndim != 1 or np.any(np.diff(R) <= 0):
        raise ValueError("R grid must be one-dimensional and strictly increasing")
    return R


def adiabats_case_c(surface: PotentialSurfaceSet, R, track: bool = False) -> dict[str, np.ndarray]:
    """Eigenvalues of every Omega block along R, shape (len(R), block size)."""
    R = _check_grid(R)
    M = surface.matrix(R)
    out = {}
    for name, idx in OMEGA_BLOCKS.items():
        ii = np.array(idx) - 1
        w, v = np.linalg.eigh(M[:, ii[:, None], ii[None, :]])
        out[name] = _track(w, v) if track else w
    return out


def centrifugal(ell, R, mu):
    return ell * (ell + 1.0) / (2.0 * mu * np.asarray(R, dtype=float) ** 2)


def rotational_matrix_case_a(surface: PotentialSurfaceSet, J: int, parity: int, R, coriolis: bool = True):
    """T^T diag(l(l+1)/2 mu R^2) T in the symmetrized case (a) basis.

    With ``coriolis=False`` couplings between different Omega blocks are dropped.
    """
    ft = frame_transform(J, parity, surface.thresholds)
    T = ft.matrix
    ells = np.array([c.ell for c in ft.rows], dtype=float)
    R = np.atleast_1d(np.asarray(R, dtype=float))
    C = np.einsum("ea,e,eb->ab", T, ells * (ells + 1.0), T)
    if not coriolis:
        blocks = np.array([k.state.omega for k in ft.cols])
        C = np.where(blocks[:, None] == blocks[None, :], C, 0.0)
    return C[None, :, :] / (2.0 * surface.reduced_mass * R[:, None, None] ** 2)


def _case_a_block_matrix(surface, J, parity, R, coriolis=True):
    ft = frame_transform(J, parity, surface.thresholds)
    cols = np.array(ft.state_indices) - 1
    M = surface.matrix(np.atleast_1d(R))[:, cols[:, None], cols[None, :]]
    return M + rotational_matrix_case_a(surface, J, parity, R, coriolis), ft


def adiabats_case_e(
    surface: PotentialSurfaceSet, J: int, parity: int, R, track: bool = False, coriolis: bool = True
) -> np.ndarray:
    """Eigenvalues of T V T^T + centrifugal along R, shape (len(R), n_channels)."""
    R = _check_grid(R)
    M, _ = _case_a_block_matrix(surface, J, parity, R, coriolis)
    w, v = np.linalg.eigh(M)
    return _track(w, v) if track else w


# -------------------------------------------------------------- diagnostics


def find_crossing(f, g, window: tuple[float, float], n: int = 2000):
    """Outermost sign change of f - g in ``window``, refined by brentq."""
    R = np.linspace(*window, n)
    d = f(R) - g(R)
    idx = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)[0]
    if idx.size == 0:
        return None
    k = idx[-1]
    def diff(x):
        return float(np.ravel(f(x) - g(x))[0])

    r = brentq(diff, R[k], R[k + 1], xtol=1e-12)
    return r, float(np.ravel(f(r))[0])


@dataclass(frozen=True)
class CrossingReport:
    name: str
    states: tuple[int, int]
    r_model: float
    e_model_cm1: float
    r_ref: float
    e_ref_cm1: float
    alternatives: dict = field(default_factory=dict)

    @property
    def miss(self) -> float:
        if not math.isfinite(self.r_model):
            return math.inf
        dr = abs(self.r_model - self.r_ref) / self.r_ref
        de = abs(self.e_model_cm1 - self.e_ref_cm1) / abs(self.e_ref_cm1)
        return max(dr, de)

    def describe(self) -> str:
        alt = "; ".join(f"{k}: {v:.1f} cm-1" for k, v in self.alternatives.items())
        return (
            f"{self.name} crossing of states {self.states}: model R={self.r_model:.3f} bohr, "
            f"E={self.e_model_cm1:.1f} cm-1; reference R={self.r_ref}, E={self.e_ref_cm1} cm-1"
            + (f" ({alt})" if alt else "")
        )


def crossing_diagnostics(
    surface: PotentialSurfaceSet,
    x1_ref: tuple[float, float] = (11.06, 3450.0),
    x3_ref: tuple[float, float] = (6.15, -4205.0),
) -> list[CrossingReport]:
    """Locate the X1 (states 2/3) and X3 (states 8/11) diabatic crossings.

    Reference energies are measured from the S+S threshold.  The X1 report
    also lists the crossing energy measured downwards from the spin-free S+D
    asymptote, the other reading of the reference value.
    """
    p = surface.pecs
    reports = []
    ed = hartree_to_cm1(surface.thresholds.d_center)
    for name, (i, j), ref, win in (
        ("X1", (2, 3), x1_ref, (8.0, 14.0)),
        ("X3", (8, 11), x3_ref, (5.0, 7.5)),
    ):
        hit = find_crossing(p[i - 1], p[j - 1], win)
        r, e = (math.nan, math.nan) if hit is None else (hit[0], hartree_to_cm1(hit[1]))
        alt = {}
        if name == "X1":
            alt = {"E measured below S+D": ed - e, "reference as E_SD - 3450": ed - ref[1]}
        reports.append(CrossingReport(name, (i, j), r, e, ref[0], ref[1], alt))
    return reports


def x3_avoided_gap(
    surface: PotentialSurfaceSet,
    J: int,
    parity: int,
    window: tuple[float, float] = (5.6, 6.8),
    coriolis: bool = True,
) -> tuple[float, float]:
    """Minimum splitting of the two case (e) adiabats of 3Sigma+_1 / 3Pi_1 character.

    Returns ``(R_min, gap)`` in bohr and hartree.  At each R the two
    eigenvectors with the largest weight on states 8 and 11 are selected.
    """
    ft = frame_transform(J, parity, surface.thresholds)
    cols = ft.state_indices
    if 8 not in cols or 11 not in cols:
        raise ValueError("states 8 and 11 need J >= 1")
    k8, k11 = cols.index(8), cols.index(11)

    def gap(r):
        M, _ = _case_a_block_matrix(surface, J, parity, np.array([r]), coriolis)
        w, v = np.linalg.eigh(M[0])
        weight = v[k8] ** 2 + v[k11] ** 2
        a, b = np.argsort(weight)[-2:]
        return abs(w[a] - w[b])

    grid = np.linspace(*window, 241)
    vals = np.array([gap(r) for r in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    if res.fun < vals[k]:
        return float(res.x), float(res.fun)
    return float(grid[k]), float(vals[k])
