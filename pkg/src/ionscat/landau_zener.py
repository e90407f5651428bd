"""Landau-Zener estimates for the X1 region.

Single- and double-path probabilities for a linearized two-state crossing
and the four-channel network built from the two avoided crossings that
the Ion+S diabat makes with the 0+ adiabats of the S+D manifold.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .potentials import OMEGA_BLOCKS, PotentialSurfaceSet, _default_config_text, find_crossing
from .units import cm1_to_hartree

__all__ = [
    "ClassicallyForbiddenError",
    "TopologyError",
    "LZCrossing",
    "LZNetwork",
    "lz_probability",
    "double_path",
    "invert_slope_difference",
    "default_x1_crossing",
    "fclz_network",
    "fclz_from_potentials",
    "ENTRANCE_WEIGHTS",
    "VARIANTS",
]

REDUCED_MASS = 10481.62

# statistical population of the 0+ component of each entrance level
ENTRANCE_WEIGHTS = {"5D5/2": 1.0 / 12.0, "5D3/2": 1.0 / 8.0}
VARIANTS = ("value-consistent", "printed")


class ClassicallyForbiddenError(ValueError):
    """The collision energy does not reach the crossing."""


class TopologyError(RuntimeError):
    """Expected avoided crossings were not found."""


@dataclass(frozen=True)
class LZCrossing:
    """Linearized crossing.

    Attributes
    ----------
    rc : float
        Crossing radius (bohr).
    wc : float
        Half-gap of the adiabats at ``rc`` (hartree).
    df : float
        Slope difference of the two diabats (hartree/bohr).
    uc : float
        Potential at the crossing relative to the entrance threshold (hartree).
    """

    rc: float
    wc: float
    df: float
    uc: float

    def __post_init__(self):
        if self.wc < 0:
            raise ValueError("W_c must be >= 0")
        if not self.df > 0:
            raise ValueError("dF must be > 0")

    def velocity(self, energy: float = 0.0, reduced_mass: float = REDUCED_MASS) -> float:
        if energy <= self.uc:
            raise ClassicallyForbiddenError(
                f"E = {energy:.3e} does not exceed U_c = {self.uc:.3e} hartree"
            )
        return math.sqrt(2.0 * (energy - self.uc) / reduced_mass)


def lz_probability(crossing: LZCrossing, energy: float = 0.0, reduced_mass: float = REDUCED_MASS) -> float:
    """Single-path (diabatic passage) probability ``exp(-2 pi W^2 / (v dF))``."""
    v = crossing.velocity(energy, reduced_mass)
    return math.exp(-2.0 * math.pi * crossing.wc**2 / (v * crossing.df))


def double_path(p: float) -> float:
    """Probability of ending on the other branch after going in and out: ``2P(1-P)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability outside [0, 1]")
    return 2.0 * p * (1.0 - p)


def invert_slope_difference(p: float, wc: float, uc: float, reduced_mass: float = REDUCED_MASS) -> float:
    """dF that gives single-path probability ``p`` at zero collision energy."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    v = math.sqrt(-2.0 * uc / reduced_mass)
    return -2.0 * math.pi * wc**2 / (v * math.log(p))


def default_x1_crossing(cp: configparser.ConfigParser | None = None) -> LZCrossing:
    """X1 crossing from the ``[lz]`` config section."""
    if cp is None:
        cp = configparser.ConfigParser()
        cp.read_string(_default_config_text())
    sec = cp["lz"]
    return LZCrossing(
        rc=sec.getfloat("rc"),
        wc=sec.getfloat("w_au"),
        df=sec.getfloat("df_au"),
        uc=cm1_to_hartree(sec.getfloat("uc_cm1")),
    )


@dataclass(frozen=True)
class LZNetwork:
    """Outcome of the four-channel network for one entrance level.

    ``probabilities`` maps process name to probability; the entries
    (elastic remainder ``EC`` included) add up to ``weight``.
    """

    entrance: str
    variant: str
    weight: float
    probabilities: dict
    path_table: dict = field(default_factory=dict)

    def total(self) -> float:
        return float(sum(self.probabilities.values()))


def fclz_network(
    p_t: float | None, p_b: float, entrance: str = "5D5/2", variant: str = "value-consistent"
) -> LZNetwork:
    """Combine the T (upper) and B (lower) crossing probabilities.

    From 5D5/2 the flux enters through T, so the split at T is ``2 P_T (1 - P_T)``
    and B decides between charge exchange and fine-structure quenching.
    From 5D3/2 only B is traversed.  ``variant="printed"`` exchanges the NRCE
    and FSQ expressions of the 5D5/2 entrance.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if entrance not in ENTRANCE_WEIGHTS:
        raise ValueError(f"entrance must be one of {tuple(ENTRANCE_WEIGHTS)}")
    w = ENTRANCE_WEIGHTS[entrance]
    for p in (p_b,) if p_t is None else (p_t, p_b):
        if not 0.0 <= p <= 1.0:
            raise ValueError("probability outside [0, 1]")
    if entrance == "5D5/2":
        if p_t is None:
            raise ValueError("the 5D5/2 entrance needs P_T")
        split = double_path(p_t)
        via_b = w * split * p_b
        via_not_b = w * split * (1.0 - p_b)
        if variant == "value-consistent":
            nrce, fsq = via_b, via_not_b
            table = {"NRCE": "2w P_T(1-P_T) P_B", "FSQ": "2w P_T(1-P_T)(1-P_B)"}
        else:
            nrce, fsq = via_not_b, via_b
            table = {"NRCE": "2w P_T(1-P_T)(1-P_B)", "FSQ": "2w P_T(1-P_T) P_B"}
        probs = {"NRCE": nrce, "FSQ": fsq}
    else:
        probs = {"NRCE": w * double_path(p_b)}
        table = {"NRCE": "2w P_B(1-P_B)"}
    probs["EC"] = w - sum(probs.values())
    table["EC"] = "remainder"
    return LZNetwork(entrance, variant, w, probs, table)


def _sd_frame(surface: PotentialSurfaceSet, R):
    """Ion+S diabat, S+D sub-block eigenvalues and their couplings to Ion+S."""
    B = surface.block(np.atleast_1d(np.asarray(R, dtype=float)), "0+")
    w, u = np.linalg.eigh(B[:, 2:4, 2:4])
    coup = np.einsum("ra,rak->rk", B[:, 1, 2:4], u)
    return B[:, 1, 1], w, coup


def _linearize(surface: PotentialSurfaceSet, k: int, window, half: float, threshold: float):
    """Crossing of the Ion+S diabat with the k-th S+D adiabat (0 lower, 1 upper)."""

    def ion(r):
        return _sd_frame(surface, r)[0]

    def sd(r):
        return _sd_frame(surface, r)[1][:, k]

    hit = find_crossing(ion, sd, window)
    if hit is None:
        return None
    rc, uc = hit
    d_ion = (ion(rc + half)[0] - ion(rc - half)[0]) / (2 * half)
    d_sd = (sd(rc + half)[0] - sd(rc - half)[0]) / (2 * half)
    wc = abs(float(_sd_frame(surface, rc)[2][0, k]))
    return LZCrossing(float(rc), wc, float(abs(d_ion - d_sd)), float(uc - threshold))


def fclz_from_potentials(
    surface: PotentialSurfaceSet,
    window: tuple[float, float] = (8.0, 14.0),
    half_width: float = 0.5,
    min_gap: float = 1e-9,
) -> dict:
    """Locate the avoided crossings of the Ion+S diabat inside the 0+ block.

    The two S+D states of the block are first diagonalized among themselves;
    the Ion+S diabat crosses the upper (T) and lower (B) of the resulting
    curves.  Each crossing is linearized with the coupling at the crossing
    point as half-gap and diabat slopes from central differences.

    Returns a dict with ``crossings`` (label -> LZCrossing, U_c relative to
    the 5D5/2 threshold), single-path probabilities at E = 0 (``P_T``,
    ``P_B`` from 5D5/2 and ``P_B_32`` from 5D3/2) and the full 0+ adiabats
    on a grid over the window.  Crossings with half-gap below ``min_gap``
    are treated as uncoupled and dropped; a single surviving crossing is
    labelled ``X``.
    """
    thr = surface.thresholds
    found = []
    for k in (1, 0):
        c = _linearize(surface, k, window, half_width, thr.d52)
        if c is not None and c.wc > min_gap:
            found.append(c)
    if not found:
        raise TopologyError(f"no avoided crossing of the Ion+S diabat in {window} bohr")
    if len(found) == 2:
        crossings = dict(zip(("T", "B"), sorted(found, key=lambda c: c.uc, reverse=True)))
    else:
        crossings = {"X": found[0]}
    out = {"crossings": crossings}
    mu = surface.reduced_mass
    for lab, c in crossings.items():
        out[f"P_{lab}"] = lz_probability(c, 0.0, mu)
    if "B" in crossings:
        b = crossings["B"]
        b32 = LZCrossing(b.rc, b.wc, b.df, b.uc + thr.d52 - thr.d32)
        out["P_B_32"] = lz_probability(b32, 0.0, mu)
    R = np.linspace(*window, 301)
    ii = np.array(OMEGA_BLOCKS["0+"]) - 1
    out["R"] = R
    out["adiabats"] = np.linalg.eigvalsh(surface.matrix(R)[:, ii[:, None], ii[None, :]])
    return out
