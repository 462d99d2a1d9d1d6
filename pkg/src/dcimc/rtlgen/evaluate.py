"""Cycle-stepped boolean evaluation of a flattened INT netlist.

Registers and SRAM cells hold explicit state; combinational cells are
evaluated in topological order once per cycle.  Used to spot-check that the
generated structure computes what the functional simulator computes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..design import Arch, DesignPoint
from ..errors import NetlistError
from ..techlib import CellKind, clog2
from .generate import output_width
from .netlist import CELLS, CONST0, CONST1, CONSTS, Netlist, bus

_EVAL = {
    CellKind.NOR: lambda v: {"Y": 1 - (v["A"] | v["B"])},
    CellKind.OR: lambda v: {"Y": v["A"] | v["B"]},
    CellKind.MUX2: lambda v: {"Y": v["B"] if v["S"] else v["A"]},
    CellKind.HA: lambda v: {"S": v["A"] ^ v["B"], "CO": v["A"] & v["B"]},
    CellKind.FA: lambda v: {"S": v["A"] ^ v["B"] ^ v["CI"],
                            "CO": (v["A"] & v["B"]) | (v["CI"] & (v["A"] ^ v["B"]))},
}


@dataclass
class FlatCell:
    path: str
    kind: CellKind
    inputs: dict[str, str]
    outputs: dict[str, str]


def flatten(nl: Netlist) -> list[FlatCell]:
    """Expand the hierarchy into leaf cells over globally named bits."""
    cells: list[FlatCell] = []
    counter = [0]

    def expand(name: str, prefix: str, binding: dict[str, str]):
        m = nl.modules[name]
        ports = {b for p in m.ports for b in p.bits()}

        def resolve(bit: str) -> str:
            if bit in CONSTS:
                return bit
            if bit in ports:
                if bit not in binding:
                    counter[0] += 1
                    binding[bit] = f"{prefix}{bit}#open{counter[0]}"
                return binding[bit]
            return prefix + bit

        for inst in m.instances:
            path = prefix + inst.name
            if inst.ref in CELLS:
                c = CELLS[inst.ref]
                ins = {p: resolve(inst.pins[p][0]) for p in c.inputs}
                outs = {p: resolve(inst.pins[p][0]) for p in c.outputs if inst.pins.get(p)}
                cells.append(FlatCell(path, c.kind, ins, outs))
                continue
            sub = nl.modules[inst.ref]
            child = {}
            for p in sub.ports:
                conn = inst.pins.get(p.name, ())
                for i, bit in enumerate(conn):
                    child[f"{p.name}[{i}]"] = resolve(bit)
            expand(inst.ref, path + "/", child)

    top = nl.modules[nl.top]
    expand(nl.top, "", {b: b for p in top.ports for b in p.bits()})
    return cells


class NetlistSim:
    def __init__(self, nl: Netlist):
        self.cells = flatten(nl)
        self.state: dict[str, int] = {}
        self.values: dict[str, int] = {CONST0: 0, CONST1: 1}
        self.regs = [c for c in self.cells if c.kind is CellKind.DFF]
        self.srams = {c.path: c for c in self.cells if c.kind is CellKind.SRAM}
        self.order = self._levelize([c for c in self.cells if c.kind in _EVAL])
        for c in self.regs:
            self.state[c.path] = 0
        for c in self.srams.values():
            self.state[c.path] = 0

    @staticmethod
    def _levelize(comb: list[FlatCell]) -> list[FlatCell]:
        driver = {bit: i for i, c in enumerate(comb) for bit in c.outputs.values()}
        deps = [{driver[b] for b in c.inputs.values() if b in driver} for c in comb]
        done, order = [False] * len(comb), []
        for start in range(len(comb)):
            stack = [(start, iter(sorted(deps[start])))]
            if done[start]:
                continue
            onstack = {start}
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    onstack.discard(node)
                    if not done[node]:
                        done[node] = True
                        order.append(comb[node])
                    continue
                if done[nxt]:
                    continue
                if nxt in onstack:
                    raise NetlistError(f"combinational loop at {comb[nxt].path}")
                onstack.add(nxt)
                stack.append((nxt, iter(sorted(deps[nxt]))))
        return order

    def set_bus(self, name: str, value: int, width: int):
        for i, bit in enumerate(bus(name, width)):
            self.values[bit] = (value >> i) & 1

    def get_bus(self, name: str, width: int) -> int:
        return sum(self.values[b] << i for i, b in enumerate(bus(name, width)))

    def settle(self):
        v = self.values
        for c in self.regs:
            q = self.state[c.path]
            if "Q" in c.outputs:
                v[c.outputs["Q"]] = q
            if "QN" in c.outputs:
                v[c.outputs["QN"]] = 1 - q
        for c in self.srams.values():
            q = self.state[c.path]
            if "Q" in c.outputs:
                v[c.outputs["Q"]] = q
            if "QB" in c.outputs:
                v[c.outputs["QB"]] = 1 - q
        for c in self.order:
            res = _EVAL[c.kind]({p: v[b] for p, b in c.inputs.items()})
            for p, b in c.outputs.items():
                v[b] = res[p]

    def clock(self):
        self.settle()
        nxt = {c.path: self.values[c.inputs["D"]] for c in self.regs}
        self.state.update(nxt)


def run_int_netlist(nl: Netlist, dp: DesignPoint, weights, inputs, row: int = 0) -> list[int]:
    """Drive the generated INT macro for Bx/k cycles and read the fused outputs.

    ``weights`` is (N/Bw, L, H) unsigned, ``inputs`` length H.  SRAM contents
    and input registers are preloaded; accumulators start at zero.
    """
    if dp.arch is not Arch.INT:
        raise ValueError("behavioral evaluation covers the INT datapath only")
    w = np.asarray(weights, dtype=np.int64)
    x = [int(v) for v in inputs]
    sim = NetlistSim(nl)
    H, L, Bx, k, Bw, R, C = dp.H, dp.L, dp.Bx, dp.k, dp.Bw, dp.acc_width, dp.cycles
    hw, lw, nw = len(str(H - 1)), len(str(L - 1)), len(str(dp.N - 1))
    for c in range(dp.N):
        o, b = divmod(c, Bw)
        for i in range(H):
            for l in range(L):
                path = f"col_{str(c).zfill(nw)}/sram_r{str(i).zfill(hw)}_l{str(l).zfill(lw)}"
                sim.state[path] = (int(w[o, l, i]) >> b) & 1
    bw_ = len(str(Bx - 1))
    for i in range(H):
        for j in range(Bx):
            sim.state[f"inbuf/reg_r{str(i).zfill(hw)}_b{str(j).zfill(bw_)}"] = (x[i] >> j) & 1
    x_word = sum(v << (i * Bx) for i, v in enumerate(x))
    sim.set_bus("x", x_word, H * Bx)
    sim.set_bus("wl", 0, H * L)
    sim.set_bus("bl", 0, dp.N)
    sim.set_bus("clk", 0, 1)
    if L > 1:
        sim.set_bus("rsel", row, clog2(L))
    for cyc in range(C):
        if C > 1:
            sim.set_bus("csel", cyc, clog2(C))
        if R > 1:
            sim.set_bus("shamt", (C - 1 - cyc) * k, clog2(R))
        sim.clock()
    sim.settle()
    ow = output_width(dp)
    y = sim.get_bus("y", dp.outputs * ow)
    return [(y >> (o * ow)) & ((1 << ow) - 1) for o in range(dp.outputs)]
