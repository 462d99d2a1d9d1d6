"""Independent reference computations used by the tests.

Nothing here imports the package's cost or simulation code: the cell
constants are retyped, fronts are found by brute force and the FP pipeline is
replayed term by term in plain Python integers.
"""

from __future__ import annotations

import itertools
import math
from decimal import Decimal
from fractions import Fraction

# name -> (area, delay, energy); DFF delay is not defined
CELLS = {
    "NOR": ("1.0", "1.0", "1.0"),
    "OR": ("1.3", "1.0", "2.3"),
    "MUX2": ("2.2", "2.2", "3.0"),
    "HA": ("4.3", "2.5", "6.9"),
    "FA": ("5.7", "3.3", "8.4"),
    "DFF": ("6.6", None, "9.6"),
    "SRAM": ("2.2", "0", "0"),
}


def cell(name):
    return tuple(None if v is None else Decimal(v) for v in CELLS[name])


def log2_ceil(n):
    return math.ceil(math.log2(n)) if n > 1 else 0


def hand_module(kind, n):
    """Logic-module cost by direct substitution, in Decimal arithmetic."""
    nor, mux, ha, fa = cell("NOR"), cell("MUX2"), cell("HA"), cell("FA")
    if kind == "Multiplier1xN":
        return (n * nor[0], nor[1], n * nor[2])
    if kind in ("AdderN", "ComparatorN"):
        return tuple((n - 1) * f + h for f, h in zip(fa, ha))
    sel = ((n - 1) * mux[0], log2_ceil(n) * mux[1], (n - 1) * mux[2])
    if kind == "MuxN":
        return sel
    return (n * sel[0], log2_ceil(n) * sel[1], n * sel[2])


def dominates(u, v):
    return all(a <= b for a, b in zip(u, v)) and any(a < b for a, b in zip(u, v))


def naive_fronts(points):
    """Peel non-dominated layers with an O(M n^2) scan per layer."""
    left = list(range(len(points)))
    fronts = []
    while left:
        front = [i for i in left if not any(dominates(points[j], points[i]) for j in left if j != i)]
        fronts.append(front)
        left = [i for i in left if i not in front]
    return fronts


def hv_inclusion_exclusion(points, ref):
    """Exact hypervolume as the measure of a union of boxes (small inputs only)."""
    pts = [tuple(Fraction(x) for x in p) for p in points if all(a < r for a, r in zip(p, ref))]
    ref = tuple(Fraction(r) for r in ref)
    total = Fraction(0)
    for size in range(1, len(pts) + 1):
        for combo in itertools.combinations(pts, size):
            corner = [max(c) for c in zip(*combo)]
            vol = Fraction(1)
            for c, r in zip(corner, ref):
                vol *= r - c
            total += vol if size % 2 else -vol
    return total


def scalar_fp_dot(ws, xs, BE, BM):
    """Replay the pre-aligned FP MAC one term at a time.

    ``ws`` and ``xs`` are lists of (sign, exponent, mantissa) triples with
    exponent 0 meaning zero.  Returns (sign, exponent, mantissa, raw,
    truncated, inexact); a zero result is (1, 0, 0, 0, ...).
    """
    bias = 2 ** (BE - 1) - 1

    def align(vals):
        emax = max(e for _, e, _ in vals)
        out, lost = [], False
        for s, e, m in vals:
            v = s * m
            d = 2 ** (emax - e)
            q = v // d  # floor division == arithmetic right shift
            lost = lost or q * d != v
            out.append(q)
        return emax, out, lost

    wmax, wa, wl = align(ws)
    xmax, xa, xl = align(xs)
    raw = 0
    for a, b in zip(wa, xa):
        raw += a * b
    base = xmax + wmax - bias - 2 * (BM - 1)
    if raw == 0:
        return 1, 0, 0, 0, wl or xl, False
    sign = 1 if raw > 0 else -1
    mag = abs(raw)
    pos = 0
    while 2 ** (pos + 1) <= mag:
        pos += 1
    mant, inexact = mag, False
    while mant >= 2**BM:
        inexact = inexact or mant % 2 == 1
        mant //= 2
    while mant < 2 ** (BM - 1):
        mant *= 2
    exp = base + pos
    if exp > 2**BE - 2:
        return sign, 2**BE - 2, 2**BM - 1, raw, wl or xl, True
    if exp < 1:
        return 1, 0, 0, raw, wl or xl, True
    return sign, exp, mant, raw, wl or xl, inexact


def fp_value(sign, exp, mant, BE, BM):
    if exp == 0:
        return Fraction(0)
    bias = 2 ** (BE - 1) - 1
    return sign * mant * Fraction(2) ** (exp - bias - (BM - 1))
