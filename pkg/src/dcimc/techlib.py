"""Gate-normalized standard-cell costs and closed-form logic module costs.

All costs are multiples of a reference NOR2 gate (area, delay, energy).
Values are kept as exact ``Fraction`` objects so that composed costs can be
compared bit-for-bit against netlist tallies.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .kvtext import ConfigError, parse_kv_file


class CellKind(str, Enum):
    NOR = "NOR"
    OR = "OR"
    MUX2 = "MUX2"
    HA = "HA"
    FA = "FA"
    DFF = "DFF"
    SRAM = "SRAM"


class ModuleKind(str, Enum):
    MULTIPLIER = "Multiplier1xN"
    ADDER = "AdderN"
    MUX = "MuxN"
    SHIFTER = "ShifterN"
    COMPARATOR = "ComparatorN"


SEQUENTIAL = frozenset({CellKind.DFF, CellKind.SRAM})


def _q(x) -> Fraction:
    """Exact decimal conversion; floats go through their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class CellCost:
    area: Fraction
    delay: Fraction | None
    energy: Fraction

    def __post_init__(self):
        if self.area < 0 or self.energy < 0 or (self.delay is not None and self.delay < 0):
            raise ValueError(f"negative cell cost: {self}")


@dataclass(frozen=True)
class ModuleCost:
    area: Fraction = Fraction(0)
    delay: Fraction = Fraction(0)
    energy: Fraction = Fraction(0)

    def __add__(self, other: ModuleCost) -> ModuleCost:
        return ModuleCost(self.area + other.area, self.delay + other.delay, self.energy + other.energy)

    def scaled(self, count) -> ModuleCost:
        """``count`` parallel copies: area and energy scale, delay does not."""
        count = _q(count)
        return ModuleCost(self.area * count, self.delay, self.energy * count)


@dataclass(frozen=True)
class Calibration:
    area_um2: float
    delay_ps: float
    energy_fj: float

    def __post_init__(self):
        for name in ("area_um2", "delay_ps", "energy_fj"):
            if not getattr(self, name) > 0:
                raise ValueError(f"calibration {name} must be strictly positive")


DEFAULT_CELLS: dict[CellKind, CellCost] = {
    CellKind.NOR: CellCost(Fraction(1), Fraction(1), Fraction(1)),
    CellKind.OR: CellCost(Fraction("1.3"), Fraction(1), Fraction("2.3")),
    CellKind.MUX2: CellCost(Fraction("2.2"), Fraction("2.2"), Fraction(3)),
    CellKind.HA: CellCost(Fraction("4.3"), Fraction("2.5"), Fraction("6.9")),
    CellKind.FA: CellCost(Fraction("5.7"), Fraction("3.3"), Fraction("8.4")),
    # the library lists no DFF delay: clock-to-q is not modeled.
    CellKind.DFF: CellCost(Fraction("6.6"), None, Fraction("9.6")),
    CellKind.SRAM: CellCost(Fraction("2.2"), Fraction(0), Fraction(0)),
}

TECHLIB_ENV = "DCIMC_TECHLIB"


@dataclass(frozen=True)
class TechLibrary:
    cells: Mapping[CellKind, CellCost] = field(default_factory=lambda: dict(DEFAULT_CELLS))
    calibration: Calibration | None = None

    def __post_init__(self):
        missing = set(CellKind) - set(self.cells)
        if missing:
            raise ValueError(f"tech library lacks cells: {sorted(m.value for m in missing)}")
        sram = self.cells[CellKind.SRAM]
        if sram.delay != 0 or sram.energy != 0:
            raise ValueError("SRAM cell delay and energy must be exactly 0")

    def __hash__(self):
        return hash((tuple(sorted((k.value, v) for k, v in self.cells.items())), self.calibration))

    def to_dict(self) -> dict:
        cells = {
            k.value: {"area": str(v.area), "delay": None if v.delay is None else str(v.delay), "energy": str(v.energy)}
            for k, v in sorted(self.cells.items(), key=lambda kv: kv[0].value)
        }
        cal = self.calibration
        calib = None if cal is None else {"area_um2": cal.area_um2, "delay_ps": cal.delay_ps, "energy_fj": cal.energy_fj}
        return {"cells": cells, "calibration": calib}

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> TechLibrary:
        """Load overrides from a key-value file; missing keys keep defaults.

        Recognized keys are ``cell.<KIND>.area|delay|energy`` and
        ``calib.area_um2|delay_ps|energy_fj``.
        """
        entries = parse_kv_file(Path(path))
        cells = {k: dict(area=v.area, delay=v.delay, energy=v.energy) for k, v in DEFAULT_CELLS.items()}
        calib: dict[str, float] = {}
        for key, (value, line) in entries.items():
            parts = key.split(".")
            if len(parts) == 3 and parts[0] == "cell":
                try:
                    kind = CellKind(parts[1])
                except ValueError:
                    raise ConfigError(f"unknown cell kind {parts[1]!r}", key=key, line=line) from None
                if parts[2] not in ("area", "delay", "energy"):
                    raise ConfigError("unknown cell cost field", key=key, line=line)
                if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                    raise ConfigError("cell costs must be non-negative numbers", key=key, line=line)
                cells[kind][parts[2]] = _q(value)
            elif len(parts) == 2 and parts[0] == "calib" and parts[1] in ("area_um2", "delay_ps", "energy_fj"):
                if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                    raise ConfigError("calibration scalars must be strictly positive", key=key, line=line)
                calib[parts[1]] = float(value)
            else:
                raise ConfigError("unknown tech-library key", key=key, line=line)
        calibration = None
        if calib:
            if len(calib) != 3:
                raise ConfigError("calibration needs area_um2, delay_ps and energy_fj together", key="calib")
            calibration = Calibration(**calib)
        try:
            return cls({k: CellCost(**v) for k, v in cells.items()}, calibration)
        except ValueError as exc:
            raise ConfigError(str(exc), key="cell") from None


DEFAULT_LIB = TechLibrary()


def load_techlib(path: str | os.PathLike | None = None) -> TechLibrary:
    """Explicit path, else the ``DCIMC_TECHLIB`` environment variable, else defaults."""
    path = path or os.environ.get(TECHLIB_ENV)
    return TechLibrary.from_file(path) if path else DEFAULT_LIB


def cell_cost(lib: TechLibrary, kind: CellKind) -> CellCost:
    return lib.cells[CellKind(kind)]


def clog2(n: int) -> int:
    """Number of select bits for an n-way choice (0 for n == 1)."""
    if n < 1:
        raise ValueError("clog2 needs n >= 1")
    return (n - 1).bit_length()


def is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def log2_exact(n: int) -> int:
    if not is_pow2(n):
        raise ValueError(f"{n} is not a power of two")
    return n.bit_length() - 1


def logic_module_cost(lib: TechLibrary, kind: ModuleKind, width: int) -> ModuleCost:
    """Closed-form cost of one multiplier/adder/mux/shifter/comparator of ``width`` bits.

    Log2-based delays round the width up to a power of two (padded selection
    tree); area and energy use the exact element count.
    """
    kind = ModuleKind(kind)
    if not isinstance(width, int) or width < 1:
        raise ValueError(f"invalid width {width!r} for {kind.value}")
    c = lib.cells
    n = width
    if kind is ModuleKind.MULTIPLIER:
        nor = c[CellKind.NOR]
        return ModuleCost(n * nor.area, nor.delay, n * nor.energy)
    if kind in (ModuleKind.ADDER, ModuleKind.COMPARATOR):
        fa, ha = c[CellKind.FA], c[CellKind.HA]
        return ModuleCost(
            (n - 1) * fa.area + ha.area,
            (n - 1) * fa.delay + ha.delay,
            (n - 1) * fa.energy + ha.energy,
        )
    mux = c[CellKind.MUX2]
    sel = ModuleCost((n - 1) * mux.area, clog2(n) * mux.delay, (n - 1) * mux.energy)
    if kind is ModuleKind.MUX:
        return sel
    return ModuleCost(n * sel.area, clog2(n) * sel.delay, n * sel.energy)


def mul_cost(lib, n):
    return logic_module_cost(lib, ModuleKind.MULTIPLIER, n)


def add_cost(lib, n):
    return logic_module_cost(lib, ModuleKind.ADDER, n)


def sel_cost(lib, n):
    return logic_module_cost(lib, ModuleKind.MUX, n)


def shift_cost(lib, n):
    return logic_module_cost(lib, ModuleKind.SHIFTER, n)


def comp_cost(lib, n):
    return logic_module_cost(lib, ModuleKind.COMPARATOR, n)


__all__ = [
    "CellKind", "ModuleKind", "CellCost", "ModuleCost", "Calibration", "TechLibrary",
    "DEFAULT_CELLS", "DEFAULT_LIB", "SEQUENTIAL", "TECHLIB_ENV", "cell_cost", "logic_module_cost",
    "load_techlib", "mul_cost", "add_cost", "sel_cost", "shift_cost", "comp_cost", "clog2",
    "is_pow2", "log2_exact",
]
