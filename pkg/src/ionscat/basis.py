"""Hund's case (a) body-frame states, case (e) space-fixed channels and the
frame transformation between them.

Conventions
-----------
* Atom ``a`` is Li (or Li+), atom ``b`` is Ba+ (or Ba).
* Every case (a) state is stored through one representative component
  with Omega >= 0, given by (Lambda, S, Sigma).  The two Omega=0 components
  of 3Pi are Lambda=1, Sigma=-1.
* A parity-adapted case (a) ket for total angular momentum J and parity p is
  ``(|L S Sigma Omega> + eta |-L S -Sigma -Omega>) / sqrt(2)`` with
  ``eta = p (-1)**(J + S)``.  With this choice the 0+ combination of 3Pi_0
  has ``eta = -1`` for every J, and the 0+ block enters (J, p) exactly when
  ``p == (-1)**J``.
* Channels of one (J, p) are sorted by (threshold, j, ell); that order fixes
  the row layout of every coupling matrix and S-matrix in the package.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import numpy as np

from .angular import clebsch_gordan, wigner9j
from .units import cm1_to_hartree, hartree_to_cm1

__all__ = [
    "Thresholds",
    "DEFAULT_THRESHOLDS",
    "AsymptoteSpec",
    "HundAState",
    "HundEChannel",
    "AKet",
    "FrameTransform",
    "asymptotes",
    "enumerate_case_a",
    "enumerate_case_e",
    "symmetrized_case_a_basis",
    "frame_transform",
    "channel_table_rows",
]

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class Thresholds:
    """Asymptotic energies in hartree, measured from Li(2s)+Ba+(6s)."""

    ion_s: float
    d32: float
    fs_splitting: float
    ss: float = 0.0

    @property
    def d52(self) -> float:
        return self.d32 + self.fs_splitting

    @property
    def zeta(self) -> float:
        """Ba+(5d) one-electron spin-orbit constant, zeta l.s."""
        # E(5/2) - E(3/2) = 5 zeta / 2
        return 0.4 * self.fs_splitting

    @property
    def d_center(self) -> float:
        """Spin-free 5d energy (the 16 PECs of S+D dissociate here)."""
        return self.d32 + 1.5 * self.zeta

    @classmethod
    def from_cm1(cls, ion_s, d32, fs_splitting, ss=0.0) -> "Thresholds":
        return cls(
            ion_s=cm1_to_hartree(ion_s),
            d32=cm1_to_hartree(d32),
            fs_splitting=cm1_to_hartree(fs_splitting),
            ss=cm1_to_hartree(ss),
        )

    def channel_energy(self, asymptote: str, jb) -> float:
        if asymptote == "S+S":
            return self.ss
        if asymptote == "Ion+S":
            return self.ion_s
        if asymptote == "S+D":
            return self.d32 if Fraction(jb) == Fraction(3, 2) else self.d52
        raise KeyError(asymptote)


def _load_default_thresholds() -> Thresholds:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = resources.files("ionscat.data").joinpath("default.ini").read_text("utf-8")
    cp.read_string(text)
    sec = cp["thresholds"]
    return Thresholds.from_cm1(
        ion_s=sec.getfloat("ion_s_cm1"),
        d32=sec.getfloat("d32_cm1"),
        fs_splitting=sec.getfloat("fs_splitting_cm1"),
    )


DEFAULT_THRESHOLDS = _load_default_thresholds()


@dataclass(frozen=True)
class AsymptoteSpec:
    label: str
    La: int
    Sa: Fraction
    Lb: int
    Sb: Fraction
    # (ja, jb) fine-structure levels
    levels: tuple[tuple[Fraction, Fraction], ...]

    def fine_structure_channels(self, thresholds: Thresholds = DEFAULT_THRESHOLDS):
        return [
            (ja, jb, thresholds.channel_energy(self.label, jb)) for ja, jb in self.levels
        ]


ASYMPTOTES = {
    "S+S": AsymptoteSpec("S+S", 0, HALF, 0, HALF, ((HALF, HALF),)),
    "Ion+S": AsymptoteSpec("Ion+S", 0, Fraction(0), 0, Fraction(0), ((Fraction(0), Fraction(0)),)),
    "S+D": AsymptoteSpec(
        "S+D", 0, HALF, 2, HALF, ((HALF, Fraction(3, 2)), (HALF, Fraction(5, 2)))
    ),
}


def asymptotes() -> dict[str, AsymptoteSpec]:
    return dict(ASYMPTOTES)


@dataclass(frozen=True)
class HundAState:
    index: int
    asymptote: str
    multiplicity: int
    Lambda: int
    Sigma: int  # spin projection of the representative component
    omega: str  # '0+', '0-', '1', '2', '3'
    term_label: str

    @property
    def S(self) -> int:
        return (self.multiplicity - 1) // 2

    @property
    def omega_abs(self) -> int:
        return int(self.omega[0])

    @property
    def L(self) -> int:
        spec = ASYMPTOTES[self.asymptote]
        return spec.La + spec.Lb


_CASE_A = (
    # index, asymptote, 2S+1, Lambda, Sigma, omega, label
    (1, "S+S", 1, 0, 0, "0+", "1Sigma+"),
    (2, "Ion+S", 1, 0, 0, "0+", "1Sigma+"),
    (3, "S+D", 1, 0, 0, "0+", "1Sigma+"),
    (4, "S+D", 3, 1, -1, "0+", "3Pi_0+"),
    (5, "S+S", 3, 0, 0, "0-", "3Sigma+_0"),
    (6, "S+D", 3, 0, 0, "0-", "3Sigma+_0"),
    (7, "S+D", 3, 1, -1, "0-", "3Pi_0-"),
    (8, "S+S", 3, 0, 1, "1", "3Sigma+_1"),
    (9, "S+D", 3, 0, 1, "1", "3Sigma+_1"),
    (10, "S+D", 1, 1, 0, "1", "1Pi_1"),
    (11, "S+D", 3, 1, 0, "1", "3Pi_1"),
    (12, "S+D", 3, 2, -1, "1", "3Delta_1"),
    (13, "S+D", 3, 1, 1, "2", "3Pi_2"),
    (14, "S+D", 1, 2, 0, "2", "1Delta_2"),
    (15, "S+D", 3, 2, 0, "2", "3Delta_2"),
    (16, "S+D", 3, 2, 1, "3", "3Delta_3"),
)


def enumerate_case_a() -> list[HundAState]:
    """The 16 body-frame states, index order of the 16x16 potential matrix."""
    return [HundAState(*row) for row in _CASE_A]


@dataclass(frozen=True)
class HundEChannel:
    asymptote: str
    ja: Fraction
    jb: Fraction
    j: int
    ell: int
    J: int
    parity: int
    threshold: float

    @property
    def level(self) -> str:
        """Asymptote plus fine-structure level, e.g. 'S+D(5/2)'."""
        if self.asymptote == "S+D":
            return f"S+D({self.jb})"
        return self.asymptote

    @property
    def label(self) -> str:
        return f"{self.level} j={self.j} l={self.ell}"


def enumerate_case_e(
    J: int, parity: int, thresholds: Thresholds = DEFAULT_THRESHOLDS
) -> list[HundEChannel]:
    """Space-fixed channels |ja jb j l J p> of one (J, parity) block."""
    if J < 0:
        raise ValueError("J must be >= 0")
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    out = []
    for spec in ASYMPTOTES.values():
        for ja, jb, thr in spec.fine_structure_channels(thresholds):
            jmin, jmax = abs(ja - jb), ja + jb
            for j in range(int(jmin), int(jmax) + 1):
                for ell in range(abs(J - j), J + j + 1):
                    if (-1) ** (spec.La + spec.Lb + ell) != parity:
                        continue
                    out.append(HundEChannel(spec.label, ja, jb, j, ell, J, parity, thr))
    out.sort(key=lambda c: (c.threshold, c.j, c.ell))
    return out


@dataclass(frozen=True)
class AKet:
    """Parity-adapted case (a) ket |Lambda S Sigma J p>."""

    state: HundAState
    J: int
    parity: int
    # ((coefficient, Lambda, Sigma, Omega), ...)
    components: tuple[tuple[float, int, int, int], ...]


def _omega_blocks_for(J: int, parity: int) -> set[str]:
    blocks = {"0+" if parity == (-1) ** J else "0-"}
    blocks.update(str(w) for w in (1, 2, 3) if w <= J)
    return blocks


def symmetrized_case_a_basis(J: int, parity: int) -> list[AKet]:
    if J < 0:
        raise ValueError("J must be >= 0")
    blocks = _omega_blocks_for(J, parity)
    kets = []
    for st in enumerate_case_a():
        if st.omega not in blocks:
            continue
        lam, sig = st.Lambda, st.Sigma
        om = lam + sig
        if lam == 0 and sig == 0:
            comps = ((1.0, 0, 0, 0),)
        else:
            eta = parity * (-1) ** (J + st.S)
            r = 1.0 / math.sqrt(2.0)
            comps = ((r, lam, sig, om), (eta * r, -lam, -sig, -om))
        kets.append(AKet(st, J, parity, comps))
    return kets


@lru_cache(maxsize=None)
def _recoupling(La, Sa, ja, Lb, Sb, jb, L, S, j) -> float:
    # <(La Sa)ja (Lb Sb)jb; j | (La Lb)L (Sa Sb)S; j>
    norm = math.sqrt((2 * S + 1) * (2 * L + 1) * (2 * ja + 1) * (2 * jb + 1))
    return float(norm * wigner9j(La, Sa, ja, Lb, Sb, jb, L, S, j))


def _element(ch: HundEChannel, st: HundAState, lam: int, sig: int, om: int) -> float:
    """<ja jb j l J | L Lambda S Sigma; J Omega> for one signed component."""
    if ch.asymptote != st.asymptote:
        return 0.0
    spec = ASYMPTOTES[st.asymptote]
    j, ell, J = ch.j, ch.ell, ch.J
    L, S = spec.La + spec.Lb, st.S
    if abs(om) > j or abs(om) > J:
        return 0.0
    phase = -1 if (ell - om - J) % 2 else 1
    rot = clebsch_gordan(j, -om, J, om, ell, 0)
    if rot == 0.0:
        return 0.0
    recpl = _recoupling(spec.La, spec.Sa, ch.ja, spec.Lb, spec.Sb, ch.jb, L, S, j)
    # atom a is always in an S state, so <L Lam|La 0, Lb Lam> = 1
    spin = clebsch_gordan(L, lam, S, sig, j, om)
    return phase * rot * recpl * spin


@dataclass(frozen=True)
class FrameTransform:
    J: int
    parity: int
    rows: tuple[HundEChannel, ...]
    cols: tuple[AKet, ...]
    matrix: np.ndarray = field(repr=False)

    @property
    def state_indices(self) -> list[int]:
        """1-based case (a) state index of every column."""
        return [k.state.index for k in self.cols]


@lru_cache(maxsize=256)
def _frame_transform_cached(J: int, parity: int, thresholds: Thresholds) -> FrameTransform:
    rows = enumerate_case_e(J, parity, thresholds)
    cols = symmetrized_case_a_basis(J, parity)
    T = np.zeros((len(rows), len(cols)))
    for r, ch in enumerate(rows):
        for c, ket in enumerate(cols):
            T[r, c] = sum(
                coef * _element(ch, ket.state, lam, sig, om)
                for coef, lam, sig, om in ket.components
            )
    T.setflags(write=False)
    return FrameTransform(J, parity, tuple(rows), tuple(cols), T)


def frame_transform(
    J: int, parity: int, thresholds: Thresholds = DEFAULT_THRESHOLDS
) -> FrameTransform:
    """Orthogonal matrix T with T[e, a] = <case e channel | case a ket>."""
    return _frame_transform_cached(J, parity, thresholds)


def channel_table_rows(J: int, parity: int, thresholds: Thresholds = DEFAULT_THRESHOLDS):
    """Rows for the ``channels`` CSV: J, parity, asymptote, ja, jb, j, ell, threshold_cm1."""
    for ch in enumerate_case_e(J, parity, thresholds):
        yield (
            J,
            "+" if parity > 0 else "-",
            ch.asymptote,
            str(ch.ja),
            str(ch.jb),
            ch.j,
            ch.ell,
            f"{hartree_to_cm1(ch.threshold):.6f}",
        )
