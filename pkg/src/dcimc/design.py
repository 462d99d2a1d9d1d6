"""Design points and precision presets."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import InfeasibleDesign
from .techlib import is_pow2, log2_exact


class Arch(str, Enum):
    INT = "IntMultiply"
    FP = "FpPrealigned"

    @property
    def short(self) -> str:
        return "int" if self is Arch.INT else "fp"

    @classmethod
    def parse(cls, text: str) -> Arch:
        for a in cls:
            if text in (a.value, a.short, a.name):
                return a
        raise ValueError(f"unknown architecture {text!r}")


@dataclass(frozen=True)
class Precision:
    name: str
    arch: Arch
    Bw: int
    Bx: int
    BE: int = 0
    BM: int = 0

    @property
    def bias(self) -> int:
        return (1 << (self.BE - 1)) - 1 if self.BE else 0


def _int(name, bits):
    return Precision(name, Arch.INT, bits, bits)


def _fp(name, be, bm):
    # weights share the input format; mantissa widths include the hidden bit
    return Precision(name, Arch.FP, bm, bm, be, bm)


PRESETS: dict[str, Precision] = {
    p.name: p
    for p in (
        _int("INT2", 2),
        _int("INT4", 4),
        _int("INT8", 8),
        _int("INT16", 16),
        _fp("FP8", 4, 4),
        _fp("FP16", 5, 11),
        _fp("BF16", 8, 8),
        _fp("FP32", 8, 24),
    )
}


def resolve_precision(name: str) -> Precision:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown precision {name!r}; expected one of {sorted(PRESETS)}") from None


@dataclass(frozen=True, order=False)
class DesignPoint:
    """One DCIM macro configuration.

    N columns of height H; L weights share a compute unit; k input bits per
    cycle.  For the FP architecture ``Bw`` is the weight mantissa width and
    ``Bx`` equals the input mantissa width ``BM``.
    """

    arch: Arch
    N: int
    H: int
    L: int
    k: int
    Bw: int
    Bx: int
    BE: int = 0
    BM: int = 0

    def __post_init__(self):
        for name in ("N", "H", "L", "k", "Bw", "Bx"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise InfeasibleDesign(f"{name} must be a positive integer, got {v!r}")
        if not is_pow2(self.H):
            raise InfeasibleDesign(f"H={self.H} is not a power of two")
        if not is_pow2(self.L):
            raise InfeasibleDesign(f"L={self.L} is not a power of two")
        if self.k > self.Bx or self.Bx % self.k:
            raise InfeasibleDesign(f"k={self.k} must divide Bx={self.Bx}")
        if self.N % self.Bw:
            raise InfeasibleDesign(f"Bw={self.Bw} must divide N={self.N}")
        if self.arch is Arch.FP:
            if self.BE < 1:
                raise InfeasibleDesign("FP designs need BE >= 1")
            if self.BM < 2:
                raise InfeasibleDesign("FP designs need BM >= 2")
            if self.Bx != self.BM:
                raise InfeasibleDesign("FP designs need Bx == BM")
        elif self.BE or self.BM:
            raise InfeasibleDesign("INT designs carry no exponent/mantissa widths")

    @classmethod
    def for_precision(cls, prec: Precision, N: int, H: int, L: int, k: int) -> DesignPoint:
        return cls(prec.arch, N, H, L, k, prec.Bw, prec.Bx, prec.BE, prec.BM)

    @property
    def log2H(self) -> int:
        return log2_exact(self.H)

    @property
    def outputs(self) -> int:
        """Number of fused outputs (weight groups of Bw columns)."""
        return self.N // self.Bw

    @property
    def cycles(self) -> int:
        return self.Bx // self.k

    @property
    def acc_width(self) -> int:
        return self.Bx + self.log2H

    @property
    def fusion_width(self) -> int:
        return self.Bx + self.log2H + self.Bw

    @property
    def result_width(self) -> int:
        """Width of the raw array result fed to the INT-to-FP converter."""
        return self.Bw + self.BM + self.log2H

    @property
    def w_store(self) -> int:
        return self.N * self.H * self.L // self.Bw

    @property
    def tag(self) -> str:
        return f"{self.arch.short}_N{self.N}_H{self.H}_L{self.L}_k{self.k}_Bw{self.Bw}_Bx{self.Bx}"

    def to_dict(self) -> dict:
        return {
            "arch": self.arch.value, "N": self.N, "H": self.H, "L": self.L, "k": self.k,
            "Bw": self.Bw, "Bx": self.Bx, "BE": self.BE, "BM": self.BM,
        }

    @classmethod
    def from_dict(cls, d: dict) -> DesignPoint:
        return cls(Arch.parse(d["arch"]), *(int(d[f]) for f in ("N", "H", "L", "k", "Bw", "Bx")),
                   int(d.get("BE") or 0), int(d.get("BM") or 0))
