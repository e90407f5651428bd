"""Physical constants and unit conversions.

Everything inside the package works in Hartree atomic units
(hbar = m_e = e = 1).  Laboratory units only appear at interfaces, and
temperatures are turned into energies through k_B at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "UnitConstants",
    "CONSTANTS",
    "DimensionMismatchError",
    "convert",
    "cm1_to_hartree",
    "hartree_to_cm1",
    "kelvin_to_hartree",
    "hartree_to_kelvin",
    "AMU_IN_ME",
]


@dataclass(frozen=True)
class UnitConstants:
    # cm^-1 per Hartree (the attribute name follows the conversion direction a.u. -> lab)
    hartree_per_cm1: float = 219474.6313632
    kelvin_per_hartree: float = 3.1577502e5
    bohr_in_cm: float = 5.29177210903e-9
    au_time_in_s: float = 2.4188843265e-17

    @property
    def au_rate_in_cm3_per_s(self) -> float:
        return self.bohr_in_cm**3 / self.au_time_in_s

    @property
    def au_density_in_cm3(self) -> float:
        """Number density of one particle per bohr^3, in cm^-3."""
        return 1.0 / self.bohr_in_cm**3


CONSTANTS = UnitConstants()

# unified atomic mass unit in electron masses (CODATA 2018)
AMU_IN_ME = 1822.888486209


class DimensionMismatchError(ValueError):
    """Raised when converting between units of different dimension classes."""


def _build_table() -> dict[str, tuple[str, float]]:
    c = CONSTANTS
    # value_in_au = value_in_unit * factor
    return {
        # energy (temperatures are energies through k_B)
        "hartree": ("energy", 1.0),
        "au": ("energy", 1.0),
        "cm-1": ("energy", 1.0 / c.hartree_per_cm1),
        "K": ("energy", 1.0 / c.kelvin_per_hartree),
        "mK": ("energy", 1e-3 / c.kelvin_per_hartree),
        "uK": ("energy", 1e-6 / c.kelvin_per_hartree),
        "nK": ("energy", 1e-9 / c.kelvin_per_hartree),
        # length
        "bohr": ("length", 1.0),
        "cm": ("length", 1.0 / c.bohr_in_cm),
        "nm": ("length", 1e-7 / c.bohr_in_cm),
        "angstrom": ("length", 1e-8 / c.bohr_in_cm),
        # time
        "au_time": ("time", 1.0),
        "s": ("time", 1.0 / c.au_time_in_s),
        # rate coefficient
        "au_rate": ("rate", 1.0),
        "cm3/s": ("rate", 1.0 / c.au_rate_in_cm3_per_s),
        # number density
        "bohr-3": ("density", 1.0),
        "cm-3": ("density", 1.0 / c.au_density_in_cm3),
    }


_UNITS = _build_table()


def convert(value, from_unit: str, to_unit: str):
    """Convert ``value`` between two units of the same dimension class.

    Works on scalars and numpy arrays alike.

    >>> round(convert(219474.6313632, "cm-1", "hartree"), 12)
    1.0
    """
    try:
        dim_a, fa = _UNITS[from_unit]
        dim_b, fb = _UNITS[to_unit]
    except KeyError as exc:
        raise DimensionMismatchError(f"unknown unit {exc.args[0]!r}") from None
    if dim_a != dim_b:
        raise DimensionMismatchError(
            f"cannot convert {from_unit!r} ({dim_a}) to {to_unit!r} ({dim_b})"
        )
    if from_unit == to_unit:
        return value
    return value * (fa / fb)


def cm1_to_hartree(x):
    return x / CONSTANTS.hartree_per_cm1


def hartree_to_cm1(x):
    return x * CONSTANTS.hartree_per_cm1


def kelvin_to_hartree(t):
    return t / CONSTANTS.kelvin_per_hartree


def hartree_to_kelvin(e):
    return e * CONSTANTS.kelvin_per_hartree
