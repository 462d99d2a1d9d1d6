"""Component- and macro-level analytical cost models for INT and FP DCIM macros.

Every closed form here has a structural twin in :mod:`dcimc.rtlgen.generate`;
the generated netlist's cell tally and stage paths must reproduce these
numbers exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .design import Arch, DesignPoint
from .errors import InfeasibleDesign
from .techlib import (
    CellKind,
    ModuleCost,
    TechLibrary,
    add_cost,
    clog2,
    comp_cost,
    is_pow2,
    log2_exact,
    mul_cost,
    sel_cost,
    shift_cost,
)

OPS_PER_MAC = 2


class ComponentKind(str, Enum):
    ADDER_TREE = "AdderTree"
    SHIFT_ACCUMULATOR = "ShiftAccumulator"
    RESULT_FUSION = "ResultFusion"
    PREALIGN = "Prealign"
    INT_TO_FP = "IntToFpConverter"
    INPUT_BUFFER = "InputBuffer"
    SRAM_ARRAY = "SramArray"
    COMPUTE_UNITS = "ComputeUnits"


class Stage(str, Enum):
    PRE_ARRAY = "PreArray"
    ARRAY_TO_ACCU = "ArrayToAccu"
    FUSION_OUT = "FusionOut"


@dataclass(frozen=True)
class ComponentCost:
    kind: ComponentKind
    area: Fraction = Fraction(0)
    delay: Fraction = Fraction(0)
    energy: Fraction = Fraction(0)

    @classmethod
    def of(cls, kind: ComponentKind, m: ModuleCost) -> ComponentCost:
        return cls(kind, m.area, m.delay, m.energy)


def _check_pow2(name, v):
    if not is_pow2(v):
        raise InfeasibleDesign(f"{name}={v} is not a power of two")


def _check_pos(**kw):
    for name, v in kw.items():
        if not isinstance(v, int) or v < 1:
            raise InfeasibleDesign(f"{name} must be a positive integer, got {v!r}")


def _repeat(m: ModuleCost, n) -> tuple[Fraction, Fraction]:
    return n * m.area, n * m.energy


def adder_tree_cost(lib: TechLibrary, H: int, k: int) -> ComponentCost:
    """Binary tree summing H k-bit inputs; stage i holds H/2^i adders of width k+i-1."""
    _check_pos(H=H, k=k)
    _check_pow2("H", H)
    area = energy = delay = Fraction(0)
    for i in range(1, log2_exact(H) + 1):
        add = add_cost(lib, k + i - 1)
        a, e = _repeat(add, H >> i)
        area += a
        energy += e
        delay += add.delay
    return ComponentCost(ComponentKind.ADDER_TREE, area, delay, energy)


def shift_accumulator_cost(lib: TechLibrary, Bx: int, H: int) -> ComponentCost:
    _check_pos(Bx=Bx, H=H)
    _check_pow2("H", H)
    r = Bx + log2_exact(H)
    dff = lib.cells[CellKind.DFF]
    sh, add = shift_cost(lib, r), add_cost(lib, r)
    return ComponentCost(
        ComponentKind.SHIFT_ACCUMULATOR,
        r * dff.area + sh.area + add.area,
        sh.delay + add.delay,
        r * dff.energy + sh.energy + add.energy,
    )


def result_fusion_cost(lib: TechLibrary, Bw: int, Bx: int, H: int) -> ComponentCost:
    """Bw-1 adders of width Bx+log2(H)+Bw in a balanced tree; bit-position shifts are wiring."""
    _check_pos(Bw=Bw, Bx=Bx, H=H)
    _check_pow2("H", H)
    if Bw == 1:
        return ComponentCost(ComponentKind.RESULT_FUSION)
    add = add_cost(lib, Bx + log2_exact(H) + Bw)
    a, e = _repeat(add, Bw - 1)
    return ComponentCost(ComponentKind.RESULT_FUSION, a, clog2(Bw) * add.delay, e)


def prealign_cost(lib: TechLibrary, H: int, BE: int, BM: int) -> ComponentCost:
    """Max-exponent comparison tree plus per-input offset subtractor and mantissa shifter."""
    _check_pos(H=H, BE=BE, BM=BM)
    _check_pow2("H", H)
    mux = lib.cells[CellKind.MUX2]
    cmp_, sub, sh = comp_cost(lib, BE), add_cost(lib, BE), shift_cost(lib, BM)
    area = (H - 1) * (cmp_.area + BE * mux.area) + H * (sub.area + sh.area)
    energy = (H - 1) * (cmp_.energy + BE * mux.energy) + H * (sub.energy + sh.energy)
    delay = log2_exact(H) * (cmp_.delay + mux.delay) + sub.delay + sh.delay
    return ComponentCost(ComponentKind.PREALIGN, area, delay, energy)


def converter_width(Bw: int, BM: int, H: int) -> int:
    return Bw + BM + log2_exact(H)


def int2fp_converter_cost(lib: TechLibrary, Bw: int, BM: int, H: int, BE: int) -> ComponentCost:
    """OR-chain leading-one detect, normalizing shifter and exponent adder.

    The OR chain drives both the shifter select and the exponent adder, so
    the two sit on parallel branches after the chain.
    """
    _check_pos(Bw=Bw, BM=BM, H=H, BE=BE)
    _check_pow2("H", H)
    br = converter_width(Bw, BM, H)
    or_ = lib.cells[CellKind.OR]
    sh, add = shift_cost(lib, br), add_cost(lib, BE)
    return ComponentCost(
        ComponentKind.INT_TO_FP,
        sh.area + add.area + br * or_.area,
        br * or_.delay + max(sh.delay, add.delay),
        sh.energy + add.energy + br * or_.energy,
    )


def input_buffer_cost(lib: TechLibrary, H: int, Bx: int, k: int) -> ComponentCost:
    _check_pos(H=H, Bx=Bx, k=k)
    if Bx % k:
        raise InfeasibleDesign(f"k={k} must divide Bx={Bx}")
    dff = lib.cells[CellKind.DFF]
    sel = sel_cost(lib, Bx // k)
    return ComponentCost(
        ComponentKind.INPUT_BUFFER,
        H * Bx * dff.area + H * k * sel.area,
        sel.delay,
        H * Bx * dff.energy + H * k * sel.energy,
    )


def compute_unit_cost(lib: TechLibrary, L: int, k: int) -> ModuleCost:
    """One row of one column: L:1 weight selector plus k NOR multipliers."""
    sel, mul = sel_cost(lib, L), mul_cost(lib, k)
    return ModuleCost(sel.area + mul.area, sel.delay + mul.delay, sel.energy + mul.energy)


@dataclass(frozen=True)
class StageDelays:
    pre_array: Fraction
    array_to_accu: Fraction
    fusion_out: Fraction

    def __getitem__(self, stage: Stage) -> Fraction:
        return {
            Stage.PRE_ARRAY: self.pre_array,
            Stage.ARRAY_TO_ACCU: self.array_to_accu,
            Stage.FUSION_OUT: self.fusion_out,
        }[Stage(stage)]

    @property
    def critical(self) -> Fraction:
        return max(self.pre_array, self.array_to_accu, self.fusion_out)


@dataclass(frozen=True)
class CostVector:
    """Macro objectives in gate-normalized units.

    ``throughput`` is operations per gate-delay (a MAC counts as two ops);
    ``energy`` is per compute cycle.
    """

    area: Fraction
    delay: Fraction
    energy: Fraction
    throughput: Fraction
    ops_per_cycle: Fraction = field(default=Fraction(0), compare=False)

    def objectives(self) -> tuple:
        """Minimization tuple (area, delay, energy, -throughput)."""
        return (self.area, self.delay, self.energy, -self.throughput)

    def as_floats(self) -> tuple[float, float, float, float]:
        return (float(self.area), float(self.delay), float(self.energy), float(self.throughput))


@dataclass(frozen=True)
class MacroBreakdown:
    dp: DesignPoint
    components: dict
    stages: StageDelays
    alpha: Fraction
    cost: CostVector

    def component(self, kind: ComponentKind) -> ComponentCost:
        return self.components[ComponentKind(kind)]


def _alpha(alpha) -> Fraction:
    a = Fraction(repr(alpha)) if isinstance(alpha, float) else Fraction(alpha)
    if not 0 < a <= 1:
        raise ValueError(f"activity factor must be in (0, 1], got {alpha}")
    return a


def macro_breakdown(lib: TechLibrary, dp: DesignPoint, alpha=1) -> MacroBreakdown:
    """Full component inventory, stage delays and objectives for one design point."""
    a = _alpha(alpha)
    n_rows = dp.N * dp.H
    sram = lib.cells[CellKind.SRAM]
    cu = compute_unit_cost(lib, dp.L, dp.k)
    tree = adder_tree_cost(lib, dp.H, dp.k)
    accu = shift_accumulator_cost(lib, dp.Bx, dp.H)
    fusion = result_fusion_cost(lib, dp.Bw, dp.Bx, dp.H)
    buf = input_buffer_cost(lib, dp.H, dp.Bx, dp.k)

    def times(c: ComponentCost, n: int) -> ComponentCost:
        return ComponentCost(c.kind, n * c.area, c.delay, n * c.energy)

    comps = {
        ComponentKind.SRAM_ARRAY: ComponentCost(
            ComponentKind.SRAM_ARRAY, n_rows * dp.L * sram.area, sram.delay, n_rows * dp.L * sram.energy),
        ComponentKind.COMPUTE_UNITS: ComponentCost(
            ComponentKind.COMPUTE_UNITS, n_rows * cu.area, cu.delay, n_rows * cu.energy),
        ComponentKind.ADDER_TREE: times(tree, dp.N),
        ComponentKind.SHIFT_ACCUMULATOR: times(accu, dp.N),
        ComponentKind.RESULT_FUSION: times(fusion, dp.outputs),
        ComponentKind.INPUT_BUFFER: buf,
    }
    select = max(sel_cost(lib, dp.L).delay, buf.delay)
    stage1 = select + mul_cost(lib, dp.k).delay + tree.delay + accu.delay
    stage2 = fusion.delay
    pre = Fraction(0)
    if dp.arch is Arch.FP:
        alig = prealign_cost(lib, dp.H, dp.BE, dp.BM)
        conv = int2fp_converter_cost(lib, dp.Bw, dp.BM, dp.H, dp.BE)
        comps[ComponentKind.PREALIGN] = alig
        comps[ComponentKind.INT_TO_FP] = times(conv, dp.outputs)
        pre = alig.delay
        stage2 = stage2 + conv.delay
    stages = StageDelays(pre, stage1, stage2)
    area = sum((c.area for c in comps.values()), Fraction(0))
    energy = a * sum((c.energy for c in comps.values()), Fraction(0))
    delay = stages.critical
    ops = Fraction(OPS_PER_MAC * dp.outputs * dp.H * dp.k, dp.Bx)
    cost = CostVector(area, delay, energy, ops / delay, ops)
    return MacroBreakdown(dp, comps, stages, a, cost)


def macro_cost_int(lib: TechLibrary, dp: DesignPoint, alpha=1) -> CostVector:
    if dp.arch is not Arch.INT:
        raise InfeasibleDesign("macro_cost_int needs an IntMultiply design point")
    return macro_breakdown(lib, dp, alpha).cost


def macro_cost_fp(lib: TechLibrary, dp: DesignPoint, alpha=1) -> CostVector:
    if dp.arch is not Arch.FP:
        raise InfeasibleDesign("macro_cost_fp needs an FpPrealigned design point")
    return macro_breakdown(lib, dp, alpha).cost


def macro_cost(lib: TechLibrary, dp: DesignPoint, alpha=1) -> CostVector:
    return macro_breakdown(lib, dp, alpha).cost


@dataclass(frozen=True)
class AbsoluteCost:
    area_um2: float
    delay_ps: float
    energy_fj: float
    tops_per_w: float
    tops_per_mm2: float


def to_absolute(cost: CostVector, lib: TechLibrary) -> AbsoluteCost | None:
    """Scale gate-normalized costs by the library calibration, if any.

    With f = 1 / delay_ps, TOPS = ops_per_cycle * f and watts = energy_fj * f * 1e-3,
    so TOPS/W reduces to ops_per_cycle * 1e3 / energy_fj.
    """
    cal = lib.calibration
    if cal is None:
        return None
    area_um2 = float(cost.area) * cal.area_um2
    delay_ps = float(cost.delay) * cal.delay_ps
    energy_fj = float(cost.energy) * cal.energy_fj
    ops = float(cost.ops_per_cycle)
    tops = ops / delay_ps
    return AbsoluteCost(area_um2, delay_ps, energy_fj, ops * 1e3 / energy_fj, tops / (area_um2 * 1e-6))


def gate_tops_per_w(cost: CostVector) -> Fraction:
    """Energy efficiency in gate-normalized units: operations per gate-energy."""
    return cost.ops_per_cycle / cost.energy
