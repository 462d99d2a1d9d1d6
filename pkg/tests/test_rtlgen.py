import json
import random
from collections import Counter
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings

from dcimc.costmodel import Stage, adder_tree_cost, macro_breakdown
from dcimc.design import Arch, DesignPoint, resolve_precision
from dcimc.errors import NetlistError
from dcimc.funcsim import int_dcim_outputs
from dcimc.rtlgen import (
    CELLS,
    Instance,
    Module,
    Netlist,
    Port,
    Timer,
    cells_verilog,
    generate_structural_netlist,
    longest_path_delay,
    parse_netlist,
    reconcile,
    serialize_verilog,
    stage_delays,
    tally_cells,
    tally_cost,
    write_design,
)
from dcimc.rtlgen.evaluate import NetlistSim, run_int_netlist
from dcimc.techlib import DEFAULT_LIB, CellKind

from .strategies import design_points, random_design

GOLDEN = Path(__file__).parent / "golden"
TINY = DesignPoint(Arch.INT, 2, 2, 2, 1, 1, 1)


def kinds(nl, module=None):
    t = tally_cells(nl, module)
    return {k.value: t[k] for k in CellKind}


def test_golden_netlist():
    text = serialize_verilog(generate_structural_netlist(TINY))
    assert text == (GOLDEN / f"{TINY.tag}.v").read_text()


def test_tiny_inventory():
    t = kinds(generate_structural_netlist(TINY))
    # 4 weight selectors plus a 2-way barrel shifter (2 MUX2) in each accumulator
    assert t == {"SRAM": 8, "NOR": 4, "MUX2": 8, "HA": 4, "FA": 2, "DFF": 6, "OR": 0}


@pytest.mark.parametrize("dp", [
    TINY,
    DesignPoint(Arch.INT, 16, 4, 2, 2, 2, 4),
    DesignPoint.for_precision(resolve_precision("BF16"), 16, 4, 2, 2),
    DesignPoint.for_precision(resolve_precision("FP8"), 8, 2, 1, 2),
], ids=lambda d: d.tag)
def test_round_trip_and_determinism(dp):
    nl = generate_structural_netlist(dp)
    text = serialize_verilog(nl)
    back = parse_netlist(text)
    assert back.structure() == nl.structure()
    assert serialize_verilog(back) == text
    assert serialize_verilog(generate_structural_netlist(dp)) == text
    assert tally_cells(back) == tally_cells(nl)


def test_cells_verilog_defines_every_primitive():
    text = cells_verilog()
    for name in CELLS:
        assert f"module {name} " in text or f"module {name}(" in text


def test_empty_module_tally():
    nl = Netlist("empty", {"empty": Module("empty")})
    assert all(v == 0 for v in tally_cells(nl).values())
    nl.check()


def test_tally_is_additive_over_submodules():
    nl = generate_structural_netlist(DesignPoint.for_precision(resolve_precision("FP8"), 8, 4, 2, 2))
    for name, m in nl.modules.items():
        total = Counter()
        for inst in m.instances:
            if inst.ref in CELLS:
                total[CELLS[inst.ref].kind] += 1
            else:
                total.update(tally_cells(nl, inst.ref))
        assert +tally_cells(nl, name) == +total


def _reg_fa_reg():
    clk = ("clk[0]",)
    m = Module("t", [Port("clk", "input", 1)], {"q": 3, "s": 2}, stage=Stage.ARRAY_TO_ACCU.value)
    for i in range(3):
        m.instances.append(Instance(f"r{i}", "DFF", {"D": (f"q[{i}]",), "CLK": clk, "Q": (f"q[{i}]",)}))
    m.instances.append(Instance("fa", "FA", {"A": ("q[0]",), "B": ("q[1]",), "CI": ("q[2]",),
                                             "S": ("s[0]",), "CO": ("s[1]",)}))
    for i in range(2):
        m.instances.append(Instance(f"o{i}", "DFF", {"D": (f"s[{i}]",), "CLK": clk}))
    return Netlist("t", {"t": m})


def test_single_full_adder_between_registers():
    nl = _reg_fa_reg()
    nl.check()
    assert longest_path_delay(nl, DEFAULT_LIB, Stage.ARRAY_TO_ACCU) == Fraction("3.3")
    assert longest_path_delay(nl, DEFAULT_LIB, "PreArray") == 0


def test_adder_tree_path():
    dp = DesignPoint(Arch.INT, 2, 4, 1, 2, 2, 2)
    nl = generate_structural_netlist(dp)
    want = adder_tree_cost(DEFAULT_LIB, 4, 2).delay
    assert want == Fraction("5.8") + Fraction("9.1")
    arcs, _ = Timer(nl, DEFAULT_LIB).summary("adder_tree_h4_k2")
    assert max(d for a in arcs.values() for d in a.values()) == want
    # cell-level timing can only find shorter ripple paths
    flat, _ = Timer(nl, DEFAULT_LIB, flat=True).summary("adder_tree_h4_k2")
    assert max(d for a in flat.values() for d in a.values()) <= want


def test_check_rejects_bad_netlists():
    nl = _reg_fa_reg()
    m = nl["t"]
    m.instances.append(Instance("dup", "NOR2", {"A": ("q[0]",), "B": ("q[1]",), "Y": ("s[0]",)}))
    with pytest.raises(NetlistError, match="drivers"):
        nl.check()
    m.instances[-1] = Instance("undriven", "NOR2", {"A": ("z[0]",), "B": ("q[1]",), "Y": ("s[1]",)})
    m.wires["z"] = 1
    with pytest.raises(NetlistError):
        nl.check()
    m.instances[-1] = Instance("bad", "NOR2", {"A": ("q[0]",), "Y": ("z[0]",)})
    with pytest.raises(NetlistError, match="input must connect"):
        nl.check()


def test_combinational_loop_detected():
    m = Module("loop", [Port("a", "input", 1), Port("y", "output", 1)], {"n": 2})
    m.instances = [
        Instance("g0", "NOR2", {"A": ("a[0]",), "B": ("n[1]",), "Y": ("n[0]",)}),
        Instance("g1", "NOR2", {"A": ("n[0]",), "B": ("a[0]",), "Y": ("n[1]",)}),
        Instance("g2", "OR2", {"A": ("n[0]",), "B": ("n[1]",), "Y": ("y[0]",)}),
    ]
    nl = Netlist("loop", {"loop": m})
    nl.check()
    with pytest.raises(NetlistError, match="loop"):
        stage_delays(nl, DEFAULT_LIB)
    with pytest.raises(NetlistError, match="loop"):
        NetlistSim(nl)


@settings(max_examples=25, deadline=None)
@given(design_points(max_h_exp=4, max_l_exp=2, max_groups=2, presets=["INT2", "INT4", "INT8", "FP8", "BF16"]))
def test_reconciliation_property(dp):
    r = reconcile(dp, DEFAULT_LIB)
    assert r["reconciled"], r


def test_reconciliation_named_cases():
    for dp in [DesignPoint(Arch.INT, 16, 4, 2, 2, 2, 4), TINY,
               DesignPoint.for_precision(resolve_precision("FP16"), 22, 8, 2, 1)]:
        nl = generate_structural_netlist(dp)
        bd = macro_breakdown(DEFAULT_LIB, dp)
        area, energy = tally_cost(tally_cells(nl), DEFAULT_LIB)
        assert (area, energy) == (bd.cost.area, bd.cost.energy)
        assert stage_delays(nl, DEFAULT_LIB) == {s.value: bd.stages[s] for s in Stage}


def test_fp_adds_only_prealign_and_converters():
    fp = DesignPoint.for_precision(resolve_precision("BF16"), 16, 4, 2, 2)
    twin = DesignPoint(Arch.INT, 16, 4, 2, 2, 8, 8)
    a, b = generate_structural_netlist(fp), generate_structural_netlist(twin)
    top_a = {i.name: i.ref for i in a[a.top].instances}
    top_b = {i.name: i.ref for i in b[b.top].instances}
    extra = set(top_a) - set(top_b)
    assert extra == {"align", "convert_0", "convert_1"}
    assert all(top_a[n] == top_b[n] for n in top_b)
    diff = tally_cells(a)
    diff.subtract(tally_cells(b))
    want = tally_cells(a, top_a["align"])
    for _ in range(2):
        want.update(tally_cells(a, top_a["convert_0"]))
    assert +diff == +want


def test_behavioral_netlist_matches_simulator():
    rng = np.random.default_rng(1)
    cases = [TINY, DesignPoint(Arch.INT, 4, 2, 2, 1, 2, 2), DesignPoint(Arch.INT, 8, 4, 2, 2, 4, 4),
             DesignPoint(Arch.INT, 4, 8, 1, 1, 2, 3), DesignPoint(Arch.INT, 4, 2, 4, 4, 4, 4)]
    for dp in cases:
        nl = generate_structural_netlist(dp)
        for _ in range(3):
            w = rng.integers(0, 1 << dp.Bw, size=(dp.outputs, dp.L, dp.H))
            x = rng.integers(0, 1 << dp.Bx, size=dp.H)
            row = int(rng.integers(0, dp.L))
            assert run_int_netlist(nl, dp, w, x, row) == int_dcim_outputs(dp, w, x, row).tolist()


def test_behavioral_rejects_fp():
    dp = DesignPoint.for_precision(resolve_precision("FP8"), 8, 2, 1, 2)
    with pytest.raises(ValueError):
        run_int_netlist(generate_structural_netlist(dp), dp, None, None)


def test_write_design(tmp_path):
    dp = DesignPoint(Arch.INT, 16, 4, 2, 2, 2, 4)
    out = write_design(dp, tmp_path, DEFAULT_LIB)
    assert out == tmp_path / dp.tag
    assert sorted(p.name for p in out.iterdir()) == ["cells.v", "manifest.json", "top.v"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["reconciled"] and man["tag"] == dp.tag
    assert Fraction(man["netlist"]["area"]) == macro_breakdown(DEFAULT_LIB, dp).cost.area
    assert parse_netlist((out / "top.v").read_text()).top == f"dcim_{dp.tag}"


def test_random_reconciliation_sweep():
    rng = random.Random(17)
    for arch in (Arch.INT, Arch.FP):
        for _ in range(5):
            assert reconcile(random_design(rng, arch), DEFAULT_LIB)["reconciled"]
