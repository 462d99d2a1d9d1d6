from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcimc.costmodel import (
    ComponentKind,
    Stage,
    adder_tree_cost,
    converter_width,
    input_buffer_cost,
    int2fp_converter_cost,
    macro_breakdown,
    macro_cost,
    macro_cost_fp,
    macro_cost_int,
    prealign_cost,
    result_fusion_cost,
    shift_accumulator_cost,
    to_absolute,
)
from dcimc.design import Arch, DesignPoint, resolve_precision
from dcimc.errors import InfeasibleDesign
from dcimc.techlib import DEFAULT_LIB, Calibration, TechLibrary

from .oracles import hand_module
from .strategies import design_points

F = Fraction
LIB = DEFAULT_LIB


def add(n, i=0):
    return F(str(hand_module("AdderN", n)[i]))


def shift(n, i=0):
    return F(str(hand_module("ShifterN", n)[i]))


def test_adder_tree_examples():
    t = adder_tree_cost(LIB, 4, 2)
    assert t.area == 2 * add(2) + add(3) == F("35.7")
    assert t.delay == add(2, 1) + add(3, 1)
    t = adder_tree_cost(LIB, 2, 1)
    assert (t.area, t.delay) == (F("4.3"), F("2.5"))
    t = adder_tree_cost(LIB, 8, 4)
    assert t.area == 4 * add(4) + 2 * add(5) + add(6) == F("172.6")


def test_adder_tree_rejects_non_power_of_two():
    with pytest.raises(InfeasibleDesign):
        adder_tree_cost(LIB, 6, 1)


def test_shift_accumulator_examples():
    a = shift_accumulator_cost(LIB, 8, 16)
    assert a.area == 12 * F("6.6") + shift(12) + add(12) == F("436.6")
    assert shift_accumulator_cost(LIB, 1, 2).area == 2 * F("6.6") + shift(2) + add(2)
    # R = 6 pads to an 8-way selector for delay
    assert shift_accumulator_cost(LIB, 4, 4).delay == 3 * 3 * F("2.2") + add(6, 1)


def test_result_fusion_examples():
    z = result_fusion_cost(LIB, 1, 8, 16)
    assert (z.area, z.delay, z.energy) == (0, 0, 0)
    f = result_fusion_cost(LIB, 4, 8, 16)
    assert f.area == 3 * add(16)
    assert f.delay == 2 * add(16, 1)
    assert result_fusion_cost(LIB, 2, 2, 2).area == add(5)


def test_prealign_examples():
    p = prealign_cost(LIB, 2, 4, 4)
    tree = add(4) + 4 * F("2.2")
    assert p.area == tree + 2 * (add(4) + shift(4))
    p = prealign_cost(LIB, 256, 8, 8)
    assert p.delay == 8 * (add(8, 1) + F("2.2")) + add(8, 1) + shift(8, 1)


def test_converter_examples():
    assert converter_width(8, 8, 256) == 24
    assert converter_width(1, 2, 2) == 4
    c = int2fp_converter_cost(LIB, 1, 2, 2, 4)
    assert c.area == shift(4) + add(4) + 4 * F("1.3")
    # OR chain feeds shifter and exponent adder in parallel
    assert c.delay == 4 * 1 + max(shift(4, 1), add(4, 1))


@given(st.integers(1, 16), st.integers(2, 32), st.integers(0, 10))
def test_converter_width_strictly_increasing(bw, bm, lh):
    base = converter_width(bw, bm, 1 << lh)
    assert converter_width(bw + 1, bm, 1 << lh) > base
    assert converter_width(bw, bm + 1, 1 << lh) > base
    assert converter_width(bw, bm, 1 << (lh + 1)) > base


def test_input_buffer_examples():
    b = input_buffer_cost(LIB, 1, 8, 8)
    assert b.area == 8 * F("6.6")
    b = input_buffer_cost(LIB, 16, 8, 2)
    assert b.area == 128 * F("6.6") + 32 * 3 * F("2.2")
    with pytest.raises(InfeasibleDesign):
        input_buffer_cost(LIB, 2, 8, 3)


def test_cycles():
    dp = DesignPoint(Arch.INT, 2, 2, 1, 1, 2, 4)
    assert dp.cycles == 4


def test_capacity_identity_example():
    dp = DesignPoint.for_precision(resolve_precision("INT8"), 64, 1024, 16, 1)
    assert dp.w_store == 131072


def test_int_macro_composition():
    dp = DesignPoint(Arch.INT, 16, 4, 2, 2, 2, 4)
    c = macro_cost_int(LIB, dp)
    sel2 = F("2.2")  # one MUX2 per 2:1 selector
    expected = (
        16 * 4 * 2 * F("2.2")
        + 16 * 4 * (sel2 + 2)
        + 16 * adder_tree_cost(LIB, 4, 2).area
        + 16 * shift_accumulator_cost(LIB, 4, 4).area
        + 8 * result_fusion_cost(LIB, 2, 4, 4).area
        + input_buffer_cost(LIB, 4, 4, 2).area
    )
    assert c.area == expected
    assert c.throughput * c.delay == 2 * 8 * 4 * F(2, 4)


def test_throughput_halves_with_k():
    prec = resolve_precision("INT8")
    # a wide fusion tree keeps stage 2 critical so delay is fixed
    hi = macro_cost(LIB, DesignPoint.for_precision(prec, 64, 2, 1, 8))
    lo = macro_cost(LIB, DesignPoint.for_precision(prec, 64, 2, 1, 4))
    assert lo.ops_per_cycle * 2 == hi.ops_per_cycle
    assert lo.delay == hi.delay
    assert lo.throughput * 2 == hi.throughput


def test_wrong_arch_rejected():
    i8 = DesignPoint.for_precision(resolve_precision("INT8"), 16, 4, 1, 1)
    bf = DesignPoint.for_precision(resolve_precision("BF16"), 16, 4, 1, 1)
    with pytest.raises(InfeasibleDesign):
        macro_cost_fp(LIB, i8)
    with pytest.raises(InfeasibleDesign):
        macro_cost_int(LIB, bf)


def test_design_point_invariants():
    for args in [(Arch.INT, 16, 3, 1, 1, 8, 8), (Arch.INT, 16, 4, 3, 1, 8, 8), (Arch.INT, 16, 4, 1, 3, 8, 8),
                 (Arch.INT, 12, 4, 1, 1, 8, 8), (Arch.INT, 16, 4, 1, 1, 8, 8, 8, 8),
                 (Arch.FP, 16, 4, 1, 1, 8, 8, 0, 8), (Arch.FP, 16, 4, 1, 1, 8, 4, 8, 8)]:
        with pytest.raises(InfeasibleDesign):
            DesignPoint(*args)


def test_bf16_preset():
    p = resolve_precision("bf16")
    assert (p.arch, p.BE, p.BM, p.Bx) == (Arch.FP, 8, 8, 8)


def test_alpha_scales_energy_only():
    dp = DesignPoint.for_precision(resolve_precision("INT4"), 16, 8, 4, 2)
    full, part = macro_cost(LIB, dp), macro_cost(LIB, dp, alpha=0.9)
    assert part.energy == full.energy * F("0.9")
    assert (part.area, part.delay) == (full.area, full.delay)
    with pytest.raises(ValueError):
        macro_cost(LIB, dp, alpha=0)


@settings(max_examples=200)
@given(design_points())
def test_throughput_delay_coupling(dp):
    c = macro_cost(LIB, dp)
    assert c.throughput * c.delay == F(2 * (dp.N // dp.Bw) * dp.H * dp.k, dp.Bx)
    assert c.area > 0 and c.energy > 0 and c.delay > 0 and c.throughput > 0


@settings(max_examples=200)
@given(design_points(arch=Arch.FP))
def test_fp_reduces_to_int(dp):
    fp = macro_breakdown(LIB, dp)
    twin = DesignPoint(Arch.INT, dp.N, dp.H, dp.L, dp.k, dp.Bw, dp.BM)
    it = macro_breakdown(LIB, twin)
    extra = {ComponentKind.PREALIGN, ComponentKind.INT_TO_FP}
    assert set(fp.components) - set(it.components) == extra
    for kind, c in it.components.items():
        assert (fp.components[kind].area, fp.components[kind].energy) == (c.area, c.energy)
    alig, conv = fp.component(ComponentKind.PREALIGN), fp.component(ComponentKind.INT_TO_FP)
    assert fp.cost.area - alig.area - conv.area == it.cost.area
    assert fp.cost.energy - alig.energy - conv.energy == it.cost.energy
    assert fp.stages[Stage.ARRAY_TO_ACCU] == it.stages[Stage.ARRAY_TO_ACCU]
    assert fp.stages[Stage.FUSION_OUT] == it.stages[Stage.FUSION_OUT] + conv.delay
    assert fp.stages[Stage.PRE_ARRAY] == alig.delay


def _grow(dp, **kw):
    d = dp.to_dict()
    d.update(kw)
    return DesignPoint.from_dict(d)


@settings(max_examples=200)
@given(design_points(), st.sampled_from(["N", "H", "L"]))
def test_monotone_in_shape(dp, field):
    bigger = _grow(dp, **{field: getattr(dp, field) * 2})
    a, b = macro_cost(LIB, dp), macro_cost(LIB, bigger)
    assert a.area <= b.area and a.energy <= b.energy


@settings(max_examples=200)
@given(design_points(max_h_exp=6), st.data())
def test_monotone_in_k(dp, data):
    # holds once the array has at least two rows; see notes on H = 1
    if dp.H == 1:
        dp = _grow(dp, H=2)
    ks = [k for k in range(1, dp.Bx + 1) if dp.Bx % k == 0]
    k2 = data.draw(st.sampled_from([k for k in ks if k >= dp.k]))
    a, b = macro_cost(LIB, dp), macro_cost(LIB, _grow(dp, k=k2))
    assert a.area <= b.area and a.energy <= b.energy


@settings(max_examples=200)
@given(design_points(arch=Arch.INT), st.sampled_from([1, 2, 4, 8]), st.sampled_from([1, 2, 4, 8]))
def test_monotone_in_weight_width(dp, bw1, bw2):
    lo, hi = sorted((bw1, bw2))
    n = dp.N * 8
    a = macro_cost(LIB, _grow(dp, N=n, Bw=lo))
    b = macro_cost(LIB, _grow(dp, N=n, Bw=hi))
    assert a.area <= b.area and a.energy <= b.energy


def test_absolute_units():
    dp = DesignPoint.for_precision(resolve_precision("INT8"), 64, 64, 2, 2)
    lib = TechLibrary(calibration=Calibration(0.5, 20.0, 1.5))
    c = macro_cost(lib, dp)
    ab = to_absolute(c, lib)
    assert ab.area_um2 == pytest.approx(float(c.area) * 0.5)
    assert ab.delay_ps == pytest.approx(float(c.delay) * 20.0)
    # ops per cycle over joules per cycle, scaled to tera
    joules = float(c.energy) * 1.5e-15
    assert ab.tops_per_w == pytest.approx(float(c.ops_per_cycle) / joules / 1e12)
    tops = float(c.ops_per_cycle) / (ab.delay_ps * 1e-12) / 1e12
    assert ab.tops_per_mm2 == pytest.approx(tops / (ab.area_um2 * 1e-6))
    assert to_absolute(c, LIB) is None
