"""Hierarchical static timing over a generated netlist.

Every module template is summarized once: for each output port, the worst
delay from each input port (and from registers inside, source ``@reg``), and
for each pipeline stage, the worst delay from each source to a register data
pin inside.  Registers (DFF, SRAM) start and end paths; top-level outputs
end paths of the FusionOut stage.  Modules carrying a ``block`` annotation
are timed as one arc with their closed-form logic-module delay unless
``flat=True``, which times them cell by cell.
"""

from __future__ import annotations

from fractions import Fraction

from ..costmodel import Stage
from ..errors import NetlistError
from ..techlib import SEQUENTIAL, CellKind, TechLibrary, logic_module_cost
from .netlist import CELLS, CONSTS, Netlist

REG = "@reg"
UNSTAGED = "unstaged"

Arrival = dict  # source -> Fraction


def _merge(into: Arrival, arr: Arrival, extra: Fraction) -> None:
    for src, d in arr.items():
        v = d + extra
        if src not in into or v > into[src]:
            into[src] = v


class Timer:
    def __init__(self, nl: Netlist, lib: TechLibrary, flat: bool = False):
        self.nl, self.lib, self.flat = nl, lib, flat
        self._memo: dict[str, tuple[dict, dict]] = {}

    def summary(self, name: str) -> tuple[dict[str, Arrival], dict[str, Arrival]]:
        if name not in self._memo:
            self._memo[name] = self._summarize(name)
        return self._memo[name]

    def _summarize(self, name: str):
        m = self.nl.modules[name]
        if m.block is not None and not self.flat:
            d = logic_module_cost(self.lib, *m.block).delay
            arcs = {o.name: {i.name: d for i in m.inputs} for o in m.outputs}
            return arcs, {}

        driver = {}
        for inst in m.instances:
            _, outs = self.nl.pin_dirs(inst.ref)
            for pin in outs:
                for bit in inst.pins.get(pin, ()):
                    driver[bit] = (inst, pin)
        in_port = {bit: p.name for p in m.inputs for bit in p.bits()}
        bit_memo: dict[str, Arrival] = {}
        pin_memo: dict[tuple[str, str], Arrival] = {}
        visiting: set[str] = set()

        def pin_arrival(inst, pin) -> Arrival:
            key = (inst.name, pin)
            if key not in pin_memo:
                arr: Arrival = {}
                for bit in inst.pins.get(pin, ()):
                    _merge(arr, arrival(bit), Fraction(0))
                pin_memo[key] = arr
            return pin_memo[key]

        def arrival(bit: str) -> Arrival:
            if bit in CONSTS:
                return {}
            if bit in bit_memo:
                return bit_memo[bit]
            if bit in in_port:
                res = {in_port[bit]: Fraction(0)}
            elif bit not in driver:
                raise NetlistError(f"{name}: net {bit} is undriven")
            else:
                if bit in visiting:
                    raise NetlistError(f"{name}: combinational loop through {bit}")
                visiting.add(bit)
                inst, pin = driver[bit]
                res = {}
                if inst.ref in CELLS:
                    cell = CELLS[inst.ref]
                    if cell.kind in SEQUENTIAL:
                        res = {REG: Fraction(0)}
                    else:
                        d = self.lib.cells[cell.kind].delay
                        for p in cell.inputs:
                            _merge(res, pin_arrival(inst, p), d)
                else:
                    arcs, _ = self.summary(inst.ref)
                    for src, d in arcs[pin].items():
                        if src == REG:
                            _merge(res, {REG: Fraction(0)}, d)
                        else:
                            _merge(res, pin_arrival(inst, src), d)
                visiting.discard(bit)
            bit_memo[bit] = res
            return res

        ends: dict[str, Arrival] = {}
        for inst in m.instances:
            if inst.ref in CELLS:
                kind = CELLS[inst.ref].kind
                if kind is CellKind.DFF:
                    stage = m.stage or UNSTAGED
                    _merge(ends.setdefault(stage, {}), pin_arrival(inst, "D"), Fraction(0))
                continue
            _, sub_ends = self.summary(inst.ref)
            for stage, arr in sub_ends.items():
                tgt = ends.setdefault(stage, {})
                for src, d in arr.items():
                    if src == REG:
                        _merge(tgt, {REG: Fraction(0)}, d)
                    else:
                        _merge(tgt, pin_arrival(inst, src), d)
        arcs = {}
        for p in m.outputs:
            arr: Arrival = {}
            for bit in p.bits():
                _merge(arr, arrival(bit), Fraction(0))
            arcs[p.name] = arr
        return arcs, ends

    def stage_delays(self, module: str | None = None) -> dict[str, Fraction]:
        """Worst path per stage with every top-level source arriving at 0."""
        name = module or self.nl.top
        arcs, ends = self.summary(name)
        out = {s.value: Fraction(0) for s in Stage}
        for stage, arr in ends.items():
            if arr:
                out[stage] = max(out.get(stage, Fraction(0)), max(arr.values()))
        fusion = [d for a in arcs.values() for d in a.values()]
        if fusion:
            key = Stage.FUSION_OUT.value
            out[key] = max(out[key], max(fusion))
        return out


def longest_path_delay(nl: Netlist, lib: TechLibrary, stage, flat: bool = False) -> Fraction:
    """Longest combinational path of one pipeline stage, in gate delays."""
    return Timer(nl, lib, flat).stage_delays()[Stage(stage).value]


def stage_delays(nl: Netlist, lib: TechLibrary, flat: bool = False) -> dict[str, Fraction]:
    return Timer(nl, lib, flat).stage_delays()
