"""Hierarchical gate-level netlist: data model, cell tally and Verilog I/O.

Nets are bit-level.  A bit reference is ``name[i]`` or a constant ``1'b0`` /
``1'b1``; a pin connection is a tuple of bit references, LSB first (an empty
tuple leaves an output pin unconnected).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import NetlistError
from ..techlib import CellKind, ModuleKind, TechLibrary

CONST0 = "1'b0"
CONST1 = "1'b1"
CONSTS = (CONST0, CONST1)


@dataclass(frozen=True)
class CellDef:
    kind: CellKind
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    body: str


CELLS = {
    c.name: c
    for c in (
        CellDef(CellKind.NOR, "NOR2", ("A", "B"), ("Y",), "assign Y = ~(A | B);"),
        CellDef(CellKind.OR, "OR2", ("A", "B"), ("Y",), "assign Y = A | B;"),
        CellDef(CellKind.MUX2, "MUX2", ("A", "B", "S"), ("Y",), "assign Y = S ? B : A;"),
        CellDef(CellKind.HA, "HA", ("A", "B"), ("S", "CO"), "assign {CO, S} = A + B;"),
        CellDef(CellKind.FA, "FA", ("A", "B", "CI"), ("S", "CO"), "assign {CO, S} = A + B + CI;"),
        CellDef(CellKind.DFF, "DFF", ("D", "CLK"), ("Q", "QN"),
                "reg q;\n  always @(posedge CLK) q <= D;\n  assign Q = q;\n  assign QN = ~q;"),
        CellDef(CellKind.SRAM, "SRAM6T", ("WL", "BL"), ("Q", "QB"),
                "reg q;\n  always @* if (WL) q = BL;\n  assign Q = q;\n  assign QB = ~q;"),
    )
}
CELL_BY_KIND = {c.kind: c for c in CELLS.values()}


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "input" | "output"
    width: int

    def bits(self) -> list[str]:
        return bus(self.name, self.width)


@dataclass
class Instance:
    name: str
    ref: str
    pins: dict[str, tuple[str, ...]]


@dataclass
class Module:
    name: str
    ports: list[Port] = field(default_factory=list)
    wires: dict[str, int] = field(default_factory=dict)
    instances: list[Instance] = field(default_factory=list)
    stage: str | None = None
    # (module kind, width): timed as one block with the closed-form delay
    block: tuple[ModuleKind, int] | None = None

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def inputs(self) -> list[Port]:
        return [p for p in self.ports if p.direction == "input"]

    @property
    def outputs(self) -> list[Port]:
        return [p for p in self.ports if p.direction == "output"]

    def widths(self) -> dict[str, int]:
        w = {p.name: p.width for p in self.ports}
        w.update(self.wires)
        return w


@dataclass
class Netlist:
    top: str
    modules: dict[str, Module] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> Module:
        return self.modules[name]

    def pin_dirs(self, ref: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
        if ref in CELLS:
            c = CELLS[ref]
            return c.inputs, c.outputs
        m = self.modules[ref]
        return tuple(p.name for p in m.inputs), tuple(p.name for p in m.outputs)

    def pin_width(self, ref: str, pin: str) -> int:
        if ref in CELLS:
            return 1
        return self.modules[ref].port(pin).width

    def structure(self) -> dict:
        """Canonical comparable form (instances sorted by id)."""
        out = {}
        for name, m in self.modules.items():
            out[name] = (
                tuple(m.ports),
                tuple(sorted(m.wires.items())),
                tuple((i.name, i.ref, tuple(sorted(i.pins.items()))) for i in sorted(m.instances, key=lambda i: i.name)),
                m.stage,
                m.block,
            )
        return {"top": self.top, "modules": out}

    def check(self) -> None:
        """Single driver per net bit, every consumed bit driven, pins sized right."""
        for m in self.modules.values():
            _check_module(self, m)


def bus(name: str, width: int) -> list[str]:
    return [f"{name}[{i}]" for i in range(width)]


_BIT = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\[(\d+)\]$")


def split_bit(ref: str) -> tuple[str, int]:
    m = _BIT.match(ref)
    if not m:
        raise NetlistError(f"malformed bit reference {ref!r}")
    return m.group(1), int(m.group(2))


def _check_module(nl: Netlist, m: Module) -> None:
    widths = m.widths()
    if len(widths) != len(m.ports) + len(m.wires):
        raise NetlistError(f"{m.name}: wire name collides with a port")
    drivers: Counter = Counter()
    consumed: set[str] = set()
    for p in m.inputs:
        drivers.update(p.bits())
    names = set()
    for inst in m.instances:
        if inst.name in names:
            raise NetlistError(f"{m.name}: duplicate instance {inst.name}")
        names.add(inst.name)
        if inst.ref not in CELLS and inst.ref not in nl.modules:
            raise NetlistError(f"{m.name}/{inst.name}: unknown module {inst.ref}")
        ins, outs = nl.pin_dirs(inst.ref)
        if set(inst.pins) - set(ins) - set(outs):
            raise NetlistError(f"{m.name}/{inst.name}: unknown pins {sorted(set(inst.pins) - set(ins) - set(outs))}")
        for pin in ins:
            bits = inst.pins.get(pin)
            if bits is None or len(bits) != nl.pin_width(inst.ref, pin):
                raise NetlistError(f"{m.name}/{inst.name}.{pin}: input must connect {nl.pin_width(inst.ref, pin)} bits")
            consumed.update(b for b in bits if b not in CONSTS)
        for pin in outs:
            bits = inst.pins.get(pin, ())
            if bits and len(bits) != nl.pin_width(inst.ref, pin):
                raise NetlistError(f"{m.name}/{inst.name}.{pin}: width mismatch")
            for b in bits:
                if b in CONSTS:
                    raise NetlistError(f"{m.name}/{inst.name}.{pin}: output drives a constant")
                drivers[b] += 1
    for bit, n in drivers.items():
        if n > 1:
            raise NetlistError(f"{m.name}: net {bit} has {n} drivers")
        name, idx = split_bit(bit)
        if name not in widths or idx >= widths[name]:
            raise NetlistError(f"{m.name}: undeclared net {bit}")
    for bit in consumed:
        name, idx = split_bit(bit)
        if name not in widths or idx >= widths[name]:
            raise NetlistError(f"{m.name}: undeclared net {bit}")
        if bit not in drivers:
            raise NetlistError(f"{m.name}: net {bit} is read but never driven")
    for p in m.outputs:
        for b in p.bits():
            if b not in drivers:
                raise NetlistError(f"{m.name}: output bit {b} is undriven")


# --------------------------------------------------------------------------
# tally
# --------------------------------------------------------------------------


def tally_cells(nl: Netlist, module: str | None = None) -> Counter:
    """Leaf cell counts per CellKind, expanded through the hierarchy."""
    memo: dict[str, Counter] = {}

    def walk(name: str) -> Counter:
        if name in memo:
            return memo[name]
        total: Counter = Counter({k: 0 for k in CellKind})
        for inst in nl.modules[name].instances:
            if inst.ref in CELLS:
                total[CELLS[inst.ref].kind] += 1
            else:
                total.update(walk(inst.ref))
        memo[name] = total
        return total

    return Counter(walk(module or nl.top))


def tally_cost(tally, lib: TechLibrary) -> tuple[Fraction, Fraction]:
    """(area, energy) of a tally weighted by the library's cell costs."""
    area = energy = Fraction(0)
    for kind, n in tally.items():
        c = lib.cells[CellKind(kind)]
        area += n * c.area
        energy += n * c.energy
    return area, energy


# --------------------------------------------------------------------------
# Verilog emission
# --------------------------------------------------------------------------


def _expr(bits: tuple[str, ...], widths: dict[str, int]) -> str:
    if not bits:
        return ""
    pieces: list[list] = []  # [name, hi, lo] or [const]
    for ref in reversed(bits):  # MSB first
        if ref in CONSTS:
            pieces.append([ref])
            continue
        name, idx = split_bit(ref)
        last = pieces[-1] if pieces else None
        if last and len(last) == 3 and last[0] == name and last[2] == idx + 1:
            last[2] = idx
        else:
            pieces.append([name, idx, idx])
    text = []
    for p in pieces:
        if len(p) == 1:
            text.append(p[0])
        else:
            name, hi, lo = p
            if lo == 0 and hi == widths[name] - 1:
                text.append(name)
            elif hi == lo:
                text.append(f"{name}[{hi}]")
            else:
                text.append(f"{name}[{hi}:{lo}]")
    return text[0] if len(text) == 1 else "{" + ", ".join(text) + "}"


def _decl(kind: str, name: str, width: int) -> str:
    return f"  {kind} [{width - 1}:0] {name};"


def _order(nl: Netlist) -> list[str]:
    seen, order = set(), []

    def visit(name):
        if name in seen:
            return
        seen.add(name)
        for ref in sorted({i.ref for i in nl.modules[name].instances}):
            if ref not in CELLS:
                visit(ref)
        order.append(name)

    visit(nl.top)
    for name in sorted(nl.modules):
        visit(name)
    return order


def serialize_verilog(nl: Netlist) -> str:
    lines = [f"// structural netlist, top module {nl.top}", ""]
    for name in _order(nl):
        m = nl.modules[name]
        attrs = []
        if m.stage:
            attrs.append(f'dcim_stage = "{m.stage}"')
        if m.block:
            attrs.append(f'dcim_block = "{m.block[0].value}:{m.block[1]}"')
        if attrs:
            lines.append(f"(* {', '.join(attrs)} *)")
        lines.append(f"module {m.name} ({', '.join(p.name for p in m.ports)});")
        for p in m.ports:
            lines.append(_decl(p.direction, p.name, p.width))
        for w, width in sorted(m.wires.items()):
            lines.append(_decl("wire", w, width))
        widths = m.widths()
        for inst in sorted(m.instances, key=lambda i: i.name):
            ins, outs = nl.pin_dirs(inst.ref)
            conns = [f".{pin}({_expr(inst.pins.get(pin, ()), widths)})" for pin in ins + outs if pin in inst.pins]
            lines.append(f"  {inst.ref} {inst.name} ({', '.join(conns)});")
        lines.append("endmodule")
        lines.append("")
    return "\n".join(lines)


def cells_verilog() -> str:
    out = ["// leaf cell stubs", ""]
    for c in CELLS.values():
        out.append(f"module {c.name} ({', '.join(c.inputs + c.outputs)});")
        out.append(f"  input {', '.join(c.inputs)};")
        out.append(f"  output {', '.join(c.outputs)};")
        out.append(f"  {c.body}")
        out.append("endmodule")
        out.append("")
    return "\n".join(out)


# --------------------------------------------------------------------------
# Verilog parsing (the structural subset emitted above)
# --------------------------------------------------------------------------

_TOKEN = re.compile(r"\(\*|\*\)|\d+'b[01]+|[A-Za-z_][A-Za-z0-9_]*|\d+|\"[^\"]*\"|[()\[\]{}:;,.=]")


def _tokens(text: str) -> list[str]:
    text = re.sub(r"//[^\n]*", "", text)
    toks, pos = [], 0
    for m in _TOKEN.finditer(text):
        if text[pos:m.start()].strip():
            raise NetlistError(f"unexpected text {text[pos:m.start()].strip()[:20]!r}")
        toks.append(m.group())
        pos = m.end()
    if text[pos:].strip():
        raise NetlistError(f"unexpected trailing text {text[pos:].strip()[:20]!r}")
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expect: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (expect is not None and tok != expect):
            raise NetlistError(f"expected {expect!r}, found {tok!r}")
        self.i += 1
        return tok

    def attrs(self) -> dict:
        out = {}
        if self.peek() != "(*":
            return out
        self.take("(*")
        while True:
            key = self.take()
            self.take("=")
            out[key] = self.take().strip('"')
            if self.peek() == ",":
                self.take(",")
                continue
            self.take("*)")
            return out

    def range_(self) -> int:
        if self.peek() != "[":
            return 1
        self.take("[")
        hi = int(self.take())
        self.take(":")
        lo = int(self.take())
        self.take("]")
        if lo != 0:
            raise NetlistError("vectors must be declared [w-1:0]")
        return hi + 1

    def expr(self, widths: dict[str, int]) -> list[str]:
        """Returns bits LSB first."""
        tok = self.peek()
        if tok == "{":
            self.take("{")
            parts = [self.expr(widths)]
            while self.peek() == ",":
                self.take(",")
                parts.append(self.expr(widths))
            self.take("}")
            bits = []
            for p in reversed(parts):
                bits.extend(p)
            return bits
        tok = self.take()
        m = re.fullmatch(r"(\d+)'b([01]+)", tok)
        if m:
            n, digits = int(m.group(1)), m.group(2)
            digits = digits.rjust(n, "0")[-n:]
            return [CONST1 if ch == "1" else CONST0 for ch in reversed(digits)]
        name = tok
        if name not in widths:
            raise NetlistError(f"undeclared net {name}")
        if self.peek() == "[":
            self.take("[")
            hi = int(self.take())
            lo = hi
            if self.peek() == ":":
                self.take(":")
                lo = int(self.take())
            self.take("]")
            return [f"{name}[{i}]" for i in range(lo, hi + 1)]
        return bus(name, widths[name])

    def module(self, nl: Netlist) -> Module:
        attrs = self.attrs()
        self.take("module")
        name = self.take()
        self.take("(")
        order = []
        while self.peek() != ")":
            order.append(self.take())
            if self.peek() == ",":
                self.take(",")
        self.take(")")
        self.take(";")
        m = Module(name, stage=attrs.get("dcim_stage"))
        if "dcim_block" in attrs:
            kind, _, width = attrs["dcim_block"].partition(":")
            m.block = (ModuleKind(kind), int(width))
        decl: dict[str, Port] = {}
        while self.peek() in ("input", "output", "wire"):
            kind = self.take()
            width = self.range_()
            nm = self.take()
            self.take(";")
            if kind == "wire":
                m.wires[nm] = width
            else:
                decl[nm] = Port(nm, kind, width)
        if set(decl) != set(order):
            raise NetlistError(f"{name}: port list and declarations disagree")
        m.ports = [decl[p] for p in order]
        widths = m.widths()
        while self.peek() != "endmodule":
            ref = self.take()
            iname = self.take()
            self.take("(")
            pins: dict[str, tuple[str, ...]] = {}
            while self.peek() != ")":
                self.take(".")
                pin = self.take()
                self.take("(")
                bits = () if self.peek() == ")" else tuple(self.expr(widths))
                self.take(")")
                pins[pin] = bits
                if self.peek() == ",":
                    self.take(",")
            self.take(")")
            self.take(";")
            m.instances.append(Instance(iname, ref, pins))
        self.take("endmodule")
        m.instances.sort(key=lambda i: i.name)
        return m


def parse_netlist(text: str) -> Netlist:
    """Parse the structural subset written by :func:`serialize_verilog`."""
    p = _Parser(text)
    header = re.search(r"top module (\S+)", text)
    nl = Netlist(top="")
    while p.peek() is not None:
        m = p.module(nl)
        if m.name in nl.modules:
            raise NetlistError(f"module {m.name} defined twice")
        nl.modules[m.name] = m
    if not nl.modules:
        raise NetlistError("no modules found")
    nl.top = header.group(1) if header else list(nl.modules)[-1]
    if nl.top not in nl.modules:
        raise NetlistError(f"top module {nl.top} not defined")
    return nl
