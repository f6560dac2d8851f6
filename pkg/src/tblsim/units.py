"""Quantities with display units for netlist values.

Netlist text uses kPa, mL, cm, mm, m and s; everything downstream of the
parser works in SI (Pa, m3, m, s). A Quantity keeps its display unit so a
parsed circuit can be formatted back to text that re-parses to an equal
AST. Display units are normalized once, at parse time, and never touched
again, which keeps parse/format round trips exact.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownUnitError

# unit -> factor converting a displayed value to SI base units
SCALE = {
    "kPa": 1.0e3,
    "mL": 1.0e-6,
    "cm": 1.0e-2,
    "mm": 1.0e-3,
    "m": 1.0,
    "s": 1.0,
    "": 1.0,  # bare numbers are SI already
}

DIMENSION = {
    "kPa": "pressure",
    "mL": "volume",
    "cm": "length",
    "mm": "length",
    "m": "length",
    "s": "time",
    "": "raw",
}

#: SI base unit per dimension, used when a bare number fills a dimensioned key
BASE_UNIT = {"pressure": "", "volume": "", "length": "", "time": "", "raw": ""}

KNOWN_UNITS = tuple(u for u in SCALE if u)


def format_number(x: float) -> str:
    """Render a float the shortest way that parses back to the same value."""
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str = ""

    @property
    def si(self) -> float:
        return self.value * SCALE[self.unit]

    @property
    def dimension(self) -> str:
        return DIMENSION[self.unit]

    def canonical(self) -> "Quantity":
        """Normalize the display unit (kPa / mL / s; cm at or above 1 cm, mm below).

        A Quantity already in its canonical unit is returned unchanged, so
        repeated normalization never drifts.
        """
        dim = self.dimension
        if dim == "length":
            target = "cm" if abs(self.si) >= 1.0e-2 else "mm"
        elif dim == "pressure":
            target = "kPa"
        elif dim == "volume":
            target = "mL"
        elif dim == "time":
            target = "s"
        else:
            target = ""
        if target == self.unit:
            return self
        return Quantity(self.value * (SCALE[self.unit] / SCALE[target]), target)

    def render(self) -> str:
        return format_number(self.value) + self.unit


def from_si(si_value: float, dimension: str) -> Quantity:
    """Build a canonical Quantity from an SI value of a known dimension."""
    if dimension == "raw":
        return Quantity(si_value, "")
    if dimension == "pressure":
        return Quantity(si_value / 1.0e3, "kPa")
    if dimension == "volume":
        return Quantity(si_value / 1.0e-6, "mL")
    if dimension == "time":
        return Quantity(si_value, "s")
    if dimension == "length":
        unit = "cm" if abs(si_value) >= 1.0e-2 else "mm"
        return Quantity(si_value / SCALE[unit], unit)
    raise ValueError(f"unknown dimension {dimension!r}")


def check_unit(unit: str, line: int | None = None, column: int | None = None) -> None:
    if unit not in SCALE or unit == "":
        raise UnknownUnitError(f"unknown unit {unit!r}", line=line, column=column)
