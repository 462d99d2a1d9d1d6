"""Bit-accurate simulation of the INT and pre-aligned FP DCIM dataflows.

The INT path is unsigned: each weight bit lives in its own column, inputs are
streamed MSB-first k bits per cycle, every column accumulates
``acc = (acc << k) + partial`` and the fusion step recombines the Bw columns
of an output by bit position.

The FP path aligns weights offline (per output/row group) and inputs online
to their group's maximum exponent with floor (arithmetic) right shifts, runs
the signed-mantissa MAC on the same bit-serial machinery (signs applied per
term inside the adder tree) and normalizes the raw sum with truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .design import Arch, DesignPoint

_MAX_BITS = 62


# --------------------------------------------------------------------------
# INT datapath
# --------------------------------------------------------------------------


@dataclass
class IntOperands:
    """Unsigned operands for one macro invocation.

    ``weights`` has shape (N/Bw, L, H); ``inputs`` has shape (H,).
    """

    weights: np.ndarray
    inputs: np.ndarray
    row: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.int64)
        self.inputs = np.asarray(self.inputs, dtype=np.int64)
        if self.weights.ndim != 3:
            raise ValueError("weights must have shape (outputs, L, H)")
        if self.inputs.shape != (self.weights.shape[2],):
            raise ValueError(f"inputs shape {self.inputs.shape} does not match H={self.weights.shape[2]}")
        if not 0 <= self.row < self.weights.shape[1]:
            raise ValueError(f"row {self.row} outside [0, {self.weights.shape[1]})")


@dataclass
class CycleRecord:
    cycle: int
    input_slice: np.ndarray
    partials: np.ndarray
    accumulators: np.ndarray


@dataclass
class SimTrace:
    records: list[CycleRecord] = field(default_factory=list)
    outputs: np.ndarray | None = None

    @property
    def cycles(self) -> int:
        return len(self.records)

    def dump(self) -> str:
        """Line-oriented text, one ``cycle,col,partial,acc`` line per column per cycle."""
        lines = ["cycle,col,partial,acc"]
        for rec in self.records:
            for col, (p, a) in enumerate(zip(rec.partials.tolist(), rec.accumulators.tolist())):
                lines.append(f"{rec.cycle},{col},{p},{a}")
        return "\n".join(lines) + "\n"


def exact_int_mvm(ops: IntOperands) -> list[int]:
    """Reference y_o = sum_i W[o][row][i] * X[i] in Python integers."""
    xs = [int(x) for x in ops.inputs]
    return [sum(int(w) * x for w, x in zip(wrow, xs)) for wrow in ops.weights[:, ops.row, :]]


def _check_shapes(dp: DesignPoint, weights: np.ndarray, inputs: np.ndarray, wbits: int, xbits: int):
    o, l, h = weights.shape[-3:]
    if (o, l, h) != (dp.outputs, dp.L, dp.H):
        raise ValueError(f"weights shape {(o, l, h)} does not match design (N/Bw, L, H)={(dp.outputs, dp.L, dp.H)}")
    if inputs.shape[-1] != dp.H:
        raise ValueError(f"inputs last dimension {inputs.shape[-1]} != H={dp.H}")
    if weights.size and (weights.min() < 0 or weights.max() >= 1 << wbits):
        raise ValueError(f"weights exceed {wbits}-bit unsigned range")
    if inputs.size and (inputs.min() < 0 or inputs.max() >= 1 << xbits):
        raise ValueError(f"inputs exceed {xbits}-bit unsigned range")
    if xbits + wbits + dp.log2H > _MAX_BITS:
        raise ValueError("operand widths too large for 64-bit simulation")


def _bit_serial(dp: DesignPoint, wsel: np.ndarray, x: np.ndarray, signs: np.ndarray | None, trace: SimTrace | None):
    """Column-sliced, bit-serial MAC.

    ``wsel``: (..., O, H) weight magnitudes of the selected row.
    ``x``: (..., H) input magnitudes.  ``signs``: optional (..., O, H) of +-1
    applied to each term inside the adder tree.
    Returns (..., O) fused results.
    """
    bw, k = dp.Bw, dp.k
    shifts = np.arange(bw, dtype=np.int64)
    # (..., O, Bw, H) weight bit planes; column index = o * Bw + b
    planes = (wsel[..., :, None, :] >> shifts[:, None]) & 1
    if signs is not None:
        planes = planes * signs[..., :, None, :]
    acc = np.zeros(planes.shape[:-1], dtype=np.int64)
    mask = (1 << k) - 1
    for c in range(dp.cycles):
        sl = (x >> (dp.Bx - (c + 1) * k)) & mask
        partial = (planes * sl[..., None, None, :]).sum(axis=-1)
        acc = (acc << k) + partial
        if trace is not None:
            trace.records.append(CycleRecord(c, sl.copy(), partial.reshape(-1).copy(), acc.reshape(-1).copy()))
    return (acc << shifts).sum(axis=-1)


def int_dcim_outputs(dp: DesignPoint, weights, inputs, row: int = 0) -> np.ndarray:
    """Vectorized INT simulation; leading batch dimensions broadcast.

    ``weights``: (..., N/Bw, L, H); ``inputs``: (..., H).
    """
    if dp.arch is not Arch.INT:
        raise ValueError("int_dcim_outputs needs an IntMultiply design")
    weights = np.asarray(weights, dtype=np.int64)
    inputs = np.asarray(inputs, dtype=np.int64)
    _check_shapes(dp, weights, inputs, dp.Bw, dp.Bx)
    return _bit_serial(dp, weights[..., row, :], inputs, None, None)


def simulate_int_dcim(dp: DesignPoint, ops: IntOperands) -> tuple[np.ndarray, SimTrace]:
    if dp.arch is not Arch.INT:
        raise ValueError("simulate_int_dcim needs an IntMultiply design")
    _check_shapes(dp, ops.weights, ops.inputs, dp.Bw, dp.Bx)
    trace = SimTrace()
    out = _bit_serial(dp, ops.weights[:, ops.row, :], ops.inputs, None, trace)
    trace.outputs = out
    return out, trace


# --------------------------------------------------------------------------
# FP datapath
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FpFormat:
    """Sign / BE-bit biased exponent / BM-bit mantissa with explicit hidden bit."""

    BE: int
    BM: int

    @property
    def bias(self) -> int:
        return (1 << (self.BE - 1)) - 1

    @property
    def max_exponent(self) -> int:
        # all-ones exponent stays reserved; no specials are produced
        return (1 << self.BE) - 2


@dataclass(frozen=True)
class FpValue:
    """value = sign * mantissa * 2**(exponent - bias - (BM - 1)); exponent 0 encodes zero."""

    sign: int
    exponent: int
    mantissa: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def check(self, fmt: FpFormat) -> None:
        if not 0 <= self.exponent < 1 << fmt.BE:
            raise ValueError(f"exponent {self.exponent} outside {fmt.BE}-bit range")
        if self.exponent == 0:
            if self.mantissa != 0:
                raise ValueError("subnormals are flushed: exponent 0 needs mantissa 0")
        elif not (1 << (fmt.BM - 1)) <= self.mantissa < (1 << fmt.BM):
            raise ValueError(f"mantissa {self.mantissa} is not a normalized {fmt.BM}-bit value")

    def to_fraction(self, fmt: FpFormat) -> Fraction:
        if self.exponent == 0:
            return Fraction(0)
        return self.sign * self.mantissa * Fraction(2) ** (self.exponent - fmt.bias - (fmt.BM - 1))

    @property
    def signed_mantissa(self) -> int:
        return self.sign * self.mantissa


ZERO = FpValue(1, 0, 0)


@dataclass(frozen=True)
class Alignment:
    emax: int
    mantissas: tuple[int, ...]
    truncated: tuple[bool, ...]


def _align(exps: np.ndarray, signed: np.ndarray, width: int) -> tuple[int, np.ndarray, np.ndarray]:
    emax = int(exps.max()) if exps.size else 0
    # shifting past the mantissa width already yields 0 or -1
    off = np.minimum(emax - exps, width + 1)
    aligned = signed >> off
    truncated = (aligned << off) != signed
    return emax, aligned, truncated


def prealign_inputs(xs: Sequence[FpValue], fmt: FpFormat | None = None) -> Alignment:
    """Align a group to its max exponent with arithmetic right shifts (floor)."""
    if fmt is not None:
        for v in xs:
            v.check(fmt)
    exps = np.array([v.exponent for v in xs], dtype=np.int64)
    signed = np.array([v.signed_mantissa for v in xs], dtype=np.int64)
    width = fmt.BM if fmt else int(max((abs(int(s)) for s in signed), default=0)).bit_length()
    emax, aligned, trunc = _align(exps, signed, width)
    return Alignment(emax, tuple(int(a) for a in aligned), tuple(bool(t) for t in trunc))


@dataclass(frozen=True)
class ConvertFlags:
    overflow: bool = False
    underflow: bool = False
    inexact: bool = False

    def __or__(self, other: ConvertFlags) -> ConvertFlags:
        return ConvertFlags(self.overflow or other.overflow, self.underflow or other.underflow,
                            self.inexact or other.inexact)


def int_to_fp_convert(raw: int, base: int, fmt: FpFormat, width: int | None = None) -> tuple[FpValue, ConvertFlags]:
    """Normalize a signed integer result into ``fmt``.

    ``base`` is the biased exponent a raw value of 1 would receive, so
    ``raw = 2**j`` maps to exponent ``base + j``.  The mantissa is truncated
    toward zero; exponent overflow saturates to the largest finite value and
    underflow flushes to zero.
    """
    raw = int(raw)
    if width is not None and abs(raw) >= 1 << width:
        raise ValueError(f"|raw| = {abs(raw)} does not fit {width} bits")
    if raw == 0:
        return ZERO, ConvertFlags()
    sign = -1 if raw < 0 else 1
    mag = abs(raw)
    pos = mag.bit_length() - 1
    drop = pos - (fmt.BM - 1)
    if drop > 0:
        mant = mag >> drop
        inexact = (mant << drop) != mag
    else:
        mant = mag << -drop
        inexact = False
    exp = base + pos
    if exp > fmt.max_exponent:
        return FpValue(sign, fmt.max_exponent, (1 << fmt.BM) - 1), ConvertFlags(overflow=True, inexact=True)
    if exp < 1:
        return ZERO, ConvertFlags(underflow=True, inexact=True)
    return FpValue(sign, exp, mant), ConvertFlags(inexact=inexact)


@dataclass
class FpResult:
    outputs: list[FpValue]
    flags: list[ConvertFlags]
    raw: list[int]
    input_alignment: Alignment
    weight_emax: list[int]
    weight_truncated: bool


def simulate_fp_dcim(dp: DesignPoint, weights, xs: Sequence[FpValue], row: int = 0) -> FpResult:
    """Pre-aligned FP macro: offline weight alignment, online input alignment,
    signed mantissa MAC on the bit-serial INT machinery, INT-to-FP conversion.

    ``weights`` is a nested sequence of FpValue shaped (N/Bw, L, H).
    """
    if dp.arch is not Arch.FP:
        raise ValueError("simulate_fp_dcim needs an FpPrealigned design")
    fmt = FpFormat(dp.BE, dp.BM)
    if len(weights) != dp.outputs or any(len(g) != dp.L for g in weights):
        raise ValueError("weights must be shaped (N/Bw, L, H)")
    if len(xs) != dp.H:
        raise ValueError(f"expected {dp.H} inputs, got {len(xs)}")
    if not 0 <= row < dp.L:
        raise ValueError(f"row {row} outside [0, {dp.L})")
    xal = prealign_inputs(xs, fmt)
    xa = np.array(xal.mantissas, dtype=np.int64)

    w_emax, w_al, w_trunc = [], [], False
    for group in weights:
        sel = group[row]
        if len(sel) != dp.H:
            raise ValueError(f"weight group has {len(sel)} entries, expected H={dp.H}")
        for v in sel:
            v.check(fmt)
        e, al, tr = _align(np.array([v.exponent for v in sel], dtype=np.int64),
                           np.array([v.signed_mantissa for v in sel], dtype=np.int64), dp.Bw)
        w_emax.append(e)
        w_al.append(al)
        w_trunc = w_trunc or bool(tr.any())
    wa = np.stack(w_al)  # (O, H)

    signs = np.sign(wa) * np.sign(xa)[None, :]
    raw = _bit_serial(dp, np.abs(wa), np.abs(xa), signs, None)

    outs, flags, raws = [], [], []
    width = dp.result_width
    for o, r in enumerate(raw.tolist()):
        base = xal.emax + w_emax[o] - fmt.bias - (dp.BM - 1) - (dp.Bw - 1)
        v, f = int_to_fp_convert(r, base, fmt, width=width)
        outs.append(v)
        flags.append(f)
        raws.append(int(r))
    return FpResult(outs, flags, raws, xal, w_emax, w_trunc)
