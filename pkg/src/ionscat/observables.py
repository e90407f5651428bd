"""Cross sections, rates and Langevin references.

All energies passed to the functions here are collision energies in
hartree, measured from the entrance threshold, unless the name says
otherwise.  Cross sections are in bohr^2; rates are in atomic units unless
the function name ends in ``_cm3s``.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_genlaguerre

from .potentials import PotentialSurfaceSet
from .propagator import (
    FCQS_LEVELS,
    Grid,
    SMatrixBlock,
    fcqs_problem,
    mcqs_problem,
    solve_block,
)
from .units import CONSTANTS, hartree_to_kelvin, kelvin_to_hartree

__all__ = [
    "ProcessLabel",
    "ConvergenceError",
    "CoverageError",
    "RangeWarning",
    "ENTRANCES",
    "PROCESSES",
    "INELASTIC",
    "classify",
    "entrance_level",
    "j_max_default",
    "fcqs_cross_sections",
    "fcqs_cross_section",
    "mcqs_block",
    "block_cross_sections",
    "mcqs_block_cross_section",
    "parity_cross_section",
    "total_cross_section",
    "compose_cross_sections",
    "MCQSResult",
    "mcqs_cross_sections",
    "rate_from_cross_section",
    "thermal_rate",
    "t_eff",
    "langevin_sigma",
    "langevin_rate",
    "langevin_rate_thermal",
    "langevin_rate_density",
    "langevin_average",
    "atom_density",
    "CorrectedFraction",
    "d52_preparation_correction",
    "survival_curve",
    "RateRow",
    "RateTable",
]

LI6_MASS_U = 6.0151228874


class ProcessLabel(str, enum.Enum):
    EC = "EC"
    FSQ = "FSQ"
    NRQ = "NRQ"
    NRCE = "NRCE"


PROCESSES = (ProcessLabel.FSQ, ProcessLabel.NRCE, ProcessLabel.NRQ, ProcessLabel.EC)
INELASTIC = PROCESSES[:3]

# entrance group name -> channel level
ENTRANCES = {"5D5/2": "S+D(5/2)", "5D3/2": "S+D(3/2)"}


class ConvergenceError(RuntimeError):
    """A partial-wave or J sum did not converge; ``partial`` holds what was summed."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class CoverageError(ValueError):
    """The tabulated K(E) does not span the quadrature support."""


class RangeWarning(UserWarning):
    pass


def entrance_level(entrance: str) -> str:
    if entrance in ENTRANCES:
        return ENTRANCES[entrance]
    if entrance in ENTRANCES.values():
        return entrance
    raise ValueError(f"unknown entrance {entrance!r}; use one of {tuple(ENTRANCES)}")


def classify(entrance: str, exit_level: str) -> ProcessLabel:
    """Process label for an (entrance level, exit level) pair."""
    ent = entrance_level(entrance)
    if exit_level == ent:
        return ProcessLabel.EC
    if exit_level.startswith("S+D"):
        return ProcessLabel.FSQ
    if exit_level == "S+S":
        return ProcessLabel.NRQ
    if exit_level == "Ion+S":
        return ProcessLabel.NRCE
    raise ValueError(f"unknown exit level {exit_level!r}")


def _process(p) -> ProcessLabel:
    return p if isinstance(p, ProcessLabel) else ProcessLabel(str(p))


def j_max_default(energy: float, reduced_mass: float = 10481.62, c4: float = 82.2) -> int:
    """Classical capture cutoff ``(4 mu^2 C4 E)^(1/4)`` rounded up, plus 8."""
    return int(math.ceil((4.0 * reduced_mass**2 * c4 * max(energy, 0.0)) ** 0.25)) + 8


def _l_capture(energy: float, reduced_mass: float, c4: float) -> int:
    return int(math.ceil((4.0 * reduced_mass**2 * c4 * max(energy, 0.0)) ** 0.25))


def _converged(contribs: list[float], total: float, rel: float = 1e-4) -> bool:
    if len(contribs) < 3:
        return False
    return all(c <= rel * total for c in contribs[-3:])


# -------------------------------------------------------------------- FCQS


def fcqs_cross_sections(
    surface: PotentialSurfaceSet,
    energy: float,
    entrance: str = "5D5/2",
    grid: Grid = Grid(),
    ell_cap: int | None = None,
    rel_tol: float = 1e-4,
) -> dict:
    """FCQS cross sections to every exit level, summed over a shared partial wave.

    Returns ``{"sigma": {level: sigma}, "partial": {level: [sigma_l, ...]}}``.
    The sum stops once the last three terms of every inelastic exit are
    below ``rel_tol`` of its running total and l has passed the capture
    cutoff; the elastic entry is whatever has been summed by then.
    """
    ent = entrance_level(entrance)
    i = FCQS_LEVELS.index(ent)
    mu, c4 = surface.reduced_mass, surface.c4
    if ell_cap is None:
        ell_cap = j_max_default(energy, mu, c4) + 12
    l_min = _l_capture(energy, mu, c4)
    k2 = 2.0 * mu * energy
    partial = {lev: [] for lev in FCQS_LEVELS}
    for ell in range(ell_cap + 1):
        prob = fcqs_problem(surface, ell)
        e_tot = prob.channels[i].threshold + energy
        blk = solve_block(prob, e_tot, grid)
        labels = [c.level for c in blk.channels]
        ii = labels.index(ent)
        T = np.eye(len(labels)) - blk.S
        for lev in FCQS_LEVELS:
            if lev in labels:
                f = labels.index(lev)
                partial[lev].append(math.pi / k2 * (2 * ell + 1) * abs(T[f, ii]) ** 2)
            else:
                partial[lev].append(0.0)
        if ell >= l_min and all(
            _converged(v, sum(v), rel_tol) for lev, v in partial.items() if lev != ent
        ):
            break
    else:
        sig = {lev: sum(v) for lev, v in partial.items()}
        raise ConvergenceError(
            f"partial-wave sum not converged at l={ell_cap}; last terms "
            + ", ".join(f"{k}:{v[-1]:.3e}" for k, v in partial.items()),
            {"sigma": sig, "partial": partial},
        )
    return {"sigma": {lev: sum(v) for lev, v in partial.items()}, "partial": partial}


def fcqs_cross_section(
    surface: PotentialSurfaceSet, energy: float, entrance: str, exit_level: str, grid: Grid = Grid()
) -> float:
    return fcqs_cross_sections(surface, energy, entrance, grid)["sigma"][exit_level]


# -------------------------------------------------------------------- MCQS


def mcqs_block(
    surface: PotentialSurfaceSet, energy: float, J: int, parity: int, entrance: str, grid: Grid = Grid()
) -> SMatrixBlock | None:
    """S-matrix of one (J, parity) block, or None if the block has no entrance channel."""
    ent = entrance_level(entrance)
    prob = mcqs_problem(surface, J, parity)
    thr = [c.threshold for c in prob.channels if c.level == ent]
    if not thr:
        return None
    return solve_block(prob, thr[0] + energy, grid)


def block_cross_sections(
    block: SMatrixBlock | None,
    energy: float,
    entrance: str,
    reduced_mass: float = 10481.62,
    normalization: str = "verbatim",
) -> dict[ProcessLabel, float]:
    """Cross sections of one block, ``pi/k^2 sum_i sum_f |delta_fi - S_fi|^2``.

    ``i`` runs over every entrance channel of the block and ``f`` over the
    exit channels of each process.  ``normalization="statistical"`` divides
    by half the entrance degeneracy (2 j_a + 1)(2 j_b + 1), so that the
    parity average gives the degeneracy-averaged cross section.
    """
    out = {p: 0.0 for p in PROCESSES}
    if block is None:
        return out
    ent = entrance_level(entrance)
    labels = [c.level for c in block.channels]
    ent_idx = [k for k, lev in enumerate(labels) if lev == ent]
    if not ent_idx:
        return out
    k2 = 2.0 * reduced_mass * energy
    T2 = np.abs(np.eye(len(labels)) - block.S) ** 2
    for f, lev in enumerate(labels):
        out[classify(ent, lev)] += float(T2[f, ent_idx].sum())
    scale = math.pi / k2
    if normalization == "statistical":
        jb = 2.5 if "5/2" in ent else 1.5
        scale /= 2.0 * (2 * jb + 1) / 2.0
    elif normalization != "verbatim":
        raise ValueError("normalization must be 'verbatim' or 'statistical'")
    return {p: scale * v for p, v in out.items()}


def mcqs_block_cross_section(
    surface: PotentialSurfaceSet,
    energy: float,
    J: int,
    parity: int,
    process,
    entrance: str = "5D5/2",
    grid: Grid = Grid(),
    normalization: str = "verbatim",
) -> float:
    blk = mcqs_block(surface, energy, J, parity, entrance, grid)
    return block_cross_sections(blk, energy, entrance, surface.reduced_mass, normalization)[_process(process)]


def parity_cross_section(blocks: dict, parity: int, process) -> float:
    """``sum_J (2J + 1) sigma_J`` from ``{(J, p): {process: sigma}}``."""
    proc = _process(process)
    return float(sum((2 * J + 1) * v[proc] for (J, p), v in blocks.items() if p == parity))


def total_cross_section(blocks: dict, process) -> float:
    """Mean of the two parity sums."""
    return 0.5 * (parity_cross_section(blocks, 1, process) + parity_cross_section(blocks, -1, process))


def compose_cross_sections(blocks: dict) -> dict:
    """Parity-resolved and total cross sections for every process."""
    out = {}
    for proc in PROCESSES:
        sp = parity_cross_section(blocks, 1, proc)
        sm = parity_cross_section(blocks, -1, proc)
        out[proc] = {"+": sp, "-": sm, "total": 0.5 * (sp + sm)}
    return out


def _j_sum_converged(blocks: dict, J: int, rel: float, processes=INELASTIC) -> bool:
    if J < 2:
        return False
    for proc in processes:
        tot = total_cross_section(blocks, proc)
        for jj in (J - 2, J - 1, J):
            c = 0.5 * (2 * jj + 1) * sum(blocks.get((jj, p), {}).get(proc, 0.0) for p in (1, -1))
            if c > rel * tot:
                return False
    return True


@dataclass
class MCQSResult:
    energy: float
    entrance: str
    blocks: dict
    j_max: int
    converged: bool
    normalization: str = "verbatim"

    @property
    def sigma(self) -> dict:
        return {p: v["total"] for p, v in compose_cross_sections(self.blocks).items()}

    def by_parity(self) -> dict:
        return compose_cross_sections(self.blocks)


def mcqs_cross_sections(
    surface: PotentialSurfaceSet,
    energy: float,
    entrance: str = "5D5/2",
    grid: Grid = Grid(),
    j_max: int | None = None,
    rel_tol: float = 1e-4,
    normalization: str = "verbatim",
    strict: bool = True,
    processes=INELASTIC,
) -> MCQSResult:
    """Sum blocks J = 0, 1, ... for both parities until the J sum converges.

    Stops when J has passed the capture cutoff and the last three
    J contributions of each of ``processes`` are below ``rel_tol`` of its
    total.  The elastic tail of the ion-atom potential converges slowly in
    J, so EC is reported but not part of the default test.
    Without an explicit ``j_max`` the sum starts from
    :func:`j_max_default` but may run past it, up to twice that value,
    since the convergence test is what decides the cutoff.
    With ``strict`` a sum still unconverged at ``j_max`` raises
    :class:`ConvergenceError` carrying the partial :class:`MCQSResult`.
    """
    mu, c4 = surface.reduced_mass, surface.c4
    if j_max is None:
        j_max = 2 * j_max_default(energy, mu, c4)
    j_min = _l_capture(energy, mu, c4)
    blocks = {}
    for J in range(j_max + 1):
        for p in (1, -1):
            blk = mcqs_block(surface, energy, J, p, entrance, grid)
            blocks[(J, p)] = block_cross_sections(blk, energy, entrance, mu, normalization)
        if J >= j_min and _j_sum_converged(blocks, J, rel_tol, processes):
            return MCQSResult(energy, entrance, blocks, J, True, normalization)
    res = MCQSResult(energy, entrance, blocks, j_max, False, normalization)
    if strict:
        raise ConvergenceError(f"J sum not converged at J_max={j_max}", res)
    return res


# -------------------------------------------------------------------- rates


def rate_from_cross_section(sigma, energy, reduced_mass: float = 10481.62):
    """``K = sqrt(2E/mu) sigma`` in atomic units."""
    return np.sqrt(2.0 * np.asarray(energy) / reduced_mass) * np.asarray(sigma)


_NODES, _WEIGHTS = roots_genlaguerre(48, 0.5)


def thermal_rate(temperature: float, energies, rates, span: float = 300.0) -> float:
    """Maxwell-Boltzmann average of K(E) at ``temperature`` (kelvin).

    ``energies`` (hartree, increasing) and ``rates`` tabulate K(E); the
    result has the unit of ``rates``.  K is interpolated monotonically in
    log E and integrated with 48-node generalized Gauss-Laguerre quadrature
    in x = E / kT, whose nodes lie inside ``[kT/span, kT*span]``.
    """
    E = np.asarray(energies, dtype=float)
    K = np.asarray(rates, dtype=float)
    kt = kelvin_to_hartree(temperature)
    lo, hi = kt / span, kt * span
    tol = 1e-9
    if E[0] > lo * (1 + tol) or E[-1] < hi * (1 - tol):
        raise CoverageError(
            f"K(E) grid [{hartree_to_kelvin(E[0]):.3e}, {hartree_to_kelvin(E[-1]):.3e}] K "
            f"does not span [{temperature / span:.3e}, {temperature * span:.3e}] K"
        )
    if np.any(np.diff(E) <= 0):
        raise ValueError("energies must increase")
    interp = PchipInterpolator(np.log(E), K)
    vals = interp(np.log(_NODES * kt))
    return float(2.0 / math.sqrt(math.pi) * np.dot(_WEIGHTS, vals))


def t_eff(m_a: float, t_a: float, m_b: float, t_b: float) -> float:
    """Centre-of-mass temperature ``(m_a T_b + m_b T_a) / (m_a + m_b)``."""
    if min(m_a, m_b, t_a, t_b) <= 0:
        raise ValueError("masses and temperatures must be positive")
    return (m_a * t_b + m_b * t_a) / (m_a + m_b)


def langevin_sigma(energy, c4: float = 82.2):
    """Capture cross section ``2 pi sqrt(C4 / E)`` (bohr^2)."""
    return 2.0 * math.pi * np.sqrt(c4 / np.asarray(energy, dtype=float))


def langevin_rate(c4: float = 82.2, reduced_mass: float = 10481.62) -> float:
    """Energy-independent capture rate ``2 pi sqrt(2 C4 / mu)`` (atomic units)."""
    return 2.0 * math.pi * math.sqrt(2.0 * c4 / reduced_mass)


def langevin_rate_thermal(temperature: float, c4: float = 82.2, reduced_mass: float = 10481.62) -> float:
    """``sigma_L(k T) sqrt(2 k T / mu)`` in cm^3/s."""
    kt = kelvin_to_hartree(temperature)
    k = float(langevin_sigma(kt, c4)) * math.sqrt(2.0 * kt / reduced_mass)
    return k * CONSTANTS.au_rate_in_cm3_per_s


def langevin_rate_density(density: float, c4: float = 82.2, reduced_mass: float = 10481.62) -> float:
    """Collision rate per second for an atom density in cm^-3."""
    return langevin_rate(c4, reduced_mass) * CONSTANTS.au_rate_in_cm3_per_s * density


def langevin_average(
    temperature: float,
    energies,
    rates,
    estimator: str = "capped",
    c4: float = 82.2,
    reduced_mass: float = 10481.62,
) -> float:
    """Langevin-limited thermal rate.

    ``"capped"`` averages ``K(E) min(1, sigma_L / sigma) = min(K, K_L)``;
    ``"plain"`` is the unmodified thermal average.  Rates in atomic units.
    """
    K = np.asarray(rates, dtype=float)
    if estimator == "capped":
        K = np.minimum(K, langevin_rate(c4, reduced_mass))
    elif estimator != "plain":
        raise ValueError("estimator must be 'capped' or 'plain'")
    return thermal_rate(temperature, energies, K)


# ------------------------------------------------------- experiment helpers


def atom_density(n_atoms: float, omega_rad: float, sigma_ax: float, temperature: float,
                 mass_u: float = LI6_MASS_U) -> float:
    """Peak density (cm^-3) of a thermal cloud in a harmonic trap.

    ``omega_rad`` in rad/s, ``sigma_ax`` the axial rms size in metres.
    """
    if min(n_atoms, omega_rad, sigma_ax, temperature) <= 0:
        raise ValueError("all inputs must be positive")
    m = mass_u * sc.atomic_mass
    n_m3 = m * omega_rad**2 / (sc.k * temperature * sigma_ax) * n_atoms / (2.0 * math.pi) ** 1.5
    return n_m3 * 1e-6


@dataclass(frozen=True)
class CorrectedFraction:
    value: float
    warning: str | None = None


def d52_preparation_correction(measured_fraction: float, leak: float = 0.175) -> CorrectedFraction:
    """Rescale a product fraction for imperfect 5D5/2 preparation."""
    if not 0.0 <= measured_fraction <= 1.0:
        raise ValueError("measured fraction must lie in [0, 1]")
    if not 0.0 <= leak < 1.0:
        raise ValueError("leak must lie in [0, 1)")
    v = measured_fraction / (1.0 - leak)
    msg = None
    if v > 1.0 + 1e-12:
        msg = f"corrected fraction {v:.4f} exceeds 1"
        warnings.warn(msg, RangeWarning, stacklevel=2)
    return CorrectedFraction(v, msg)


def survival_curve(k_total: float, density: float, times) -> np.ndarray:
    """``exp(-K n t)`` with K in cm^3/s, n in cm^-3, t in s."""
    if k_total < 0 or density < 0:
        raise ValueError("rate and density must be non-negative")
    return np.exp(-k_total * density * np.asarray(times, dtype=float))


# -------------------------------------------------------------- rate table


@dataclass(frozen=True)
class RateRow:
    x: float  # energy or temperature, kelvin
    process: str
    cross_section: float
    rate: float  # cm^3/s
    rate_over_langevin: float


@dataclass
class RateTable:
    model: str
    entrance: str
    thermal: bool
    rows: list[RateRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, x_kelvin: float, process, sigma: float, reduced_mass: float = 10481.62, c4: float = 82.2):
        """Add a non-thermal row from a cross section at collision energy ``x_kelvin``."""
        e = kelvin_to_hartree(x_kelvin)
        k = float(rate_from_cross_section(sigma, e, reduced_mass))
        kl = langevin_rate(c4, reduced_mass)
        self.rows.append(RateRow(x_kelvin, _process(process).value, sigma,
                                 k * CONSTANTS.au_rate_in_cm3_per_s, k / kl))

    def add_rate(self, t_kelvin: float, process, rate_au: float, reduced_mass: float = 10481.62, c4: float = 82.2):
        kl = langevin_rate(c4, reduced_mass)
        self.rows.append(RateRow(t_kelvin, _process(process).value, math.nan,
                                 rate_au * CONSTANTS.au_rate_in_cm3_per_s, rate_au / kl))

    def write_csv(self, path, header_lines: list[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"#{line}\n")
            for k, v in self.metadata.items():
                fh.write(f"#{k}={v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["T_K" if self.thermal else "energy_K", "process", "sigma_a0sq", "rate_cm3s", "rate_over_KL"])
            for r in self.rows:
                w.writerow([f"{r.x:.10e}", r.process, f"{r.cross_section:.10e}", f"{r.rate:.10e}",
                            f"{r.rate_over_langevin:.10e}"])
