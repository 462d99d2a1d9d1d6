"""Template-based structural generation of a DCIM macro.

Each component is one parameterized module template, instantiated as many
times as the architecture needs; the instance inventory mirrors the cost
model term by term.  Templates priced as library logic modules (adders,
comparators, selectors, shifters) carry a ``block`` annotation so the timing
analysis can treat them as single delay arcs.
"""

from __future__ import annotations

from ..costmodel import Stage
from ..design import Arch, DesignPoint
from ..techlib import CellKind, ModuleKind, clog2
from .netlist import CELL_BY_KIND, CONST0, Instance, Module, Netlist, Port, bus


def _ix(i: int, n: int) -> str:
    return str(i).zfill(len(str(max(n - 1, 0))))


class _Builder:
    def __init__(self, nl: Netlist, name: str, stage: Stage | None = None, block=None):
        self.nl = nl
        self.m = Module(name, stage=stage.value if stage else None, block=block)

    def input(self, name: str, width: int) -> list[str]:
        self.m.ports.append(Port(name, "input", width))
        return bus(name, width)

    def output(self, name: str, width: int) -> list[str]:
        self.m.ports.append(Port(name, "output", width))
        return bus(name, width)

    def wire(self, name: str, width: int) -> list[str]:
        self.m.wires[name] = width
        return bus(name, width)

    def cell(self, kind: CellKind, name: str, **pins):
        c = CELL_BY_KIND[kind]
        conn = {}
        for pin in c.inputs + c.outputs:
            v = pins.get(pin)
            conn[pin] = () if v is None else (v,)
        self.m.instances.append(Instance(name, c.name, conn))

    def inst(self, ref: str, name: str, **pins):
        self.m.instances.append(Instance(name, ref, {k: tuple(v) for k, v in pins.items()}))

    def done(self) -> str:
        self.m.instances.sort(key=lambda i: i.name)
        self.nl.modules[self.m.name] = self.m
        return self.m.name


# --------------------------------------------------------------------------
# logic-module templates
# --------------------------------------------------------------------------


def _ripple(nl: Netlist, name: str, w: int, kind: ModuleKind) -> str:
    if name in nl.modules:
        return name
    b = _Builder(nl, name, block=(kind, w))
    a_, b_ = b.input("a", w), b.input("b", w)
    s = b.output("s", w + 1)
    c = b.wire("c", w - 1) if w > 1 else []
    carry = lambda i: c[i] if i < w - 1 else s[w]
    b.cell(CellKind.HA, "ha", A=a_[0], B=b_[0], S=s[0], CO=carry(0))
    for i in range(1, w):
        b.cell(CellKind.FA, f"fa_{_ix(i, w)}", A=a_[i], B=b_[i], CI=c[i - 1], S=s[i], CO=carry(i))
    return b.done()


def adder(nl: Netlist, w: int) -> str:
    """w-bit ripple adder: one HA, w-1 FA, (w+1)-bit sum."""
    return _ripple(nl, f"add_w{w}", w, ModuleKind.ADDER)


def comparator(nl: Netlist, w: int) -> str:
    """Adder-structured magnitude comparator; the carry out is the select."""
    return _ripple(nl, f"cmp_w{w}", w, ModuleKind.COMPARATOR)


def selector(nl: Netlist, n: int) -> str:
    """n:1 balanced MUX2 tree; level t is steered by select bit t."""
    name = f"sel_n{n}"
    if name in nl.modules:
        return name
    if n < 2:
        raise ValueError("selector needs at least two inputs")
    b = _Builder(nl, name, block=(ModuleKind.MUX, n))
    cur = b.input("d", n)
    s = b.input("s", clog2(n))
    out = b.output("y", 1)
    level = 0
    while len(cur) > 1:
        pairs = len(cur) // 2
        last = len(cur) == 2
        nxt = out if last else b.wire(f"l{level}", pairs)
        for j in range(pairs):
            b.cell(CellKind.MUX2, f"mux_l{level}_{_ix(j, pairs)}", A=cur[2 * j], B=cur[2 * j + 1], S=s[level], Y=nxt[j])
        if len(cur) % 2:
            nxt = nxt + [cur[-1]]
        cur = nxt
        level += 1
    return b.done()


def shifter(nl: Netlist, n: int, left: bool = True) -> str:
    """n-bit barrel shifter built from n independent n:1 selectors."""
    name = f"{'shl' if left else 'shr'}_n{n}"
    if name in nl.modules:
        return name
    sel = selector(nl, n)
    b = _Builder(nl, name, block=(ModuleKind.SHIFTER, n))
    d = b.input("d", n)
    s = b.input("s", clog2(n))
    y = b.output("y", n)
    for j in range(n):
        if left:
            cands = [d[j - m] if j - m >= 0 else CONST0 for m in range(n)]
        else:
            cands = [d[j + m] if j + m < n else CONST0 for m in range(n)]
        b.inst(sel, f"bit_{_ix(j, n)}", d=cands, s=s, y=[y[j]])
    return b.done()


def _select_or_wire(b: _Builder, nl: Netlist, name: str, cands: list[str], s: list[str], out: str | None = None):
    """Instantiate an n:1 selector, or pass the only candidate through."""
    if len(cands) == 1:
        return cands[0]
    y = out if out is not None else b.wire(f"{name}_y", 1)[0]
    b.inst(selector(nl, len(cands)), name, d=cands, s=s, y=[y])
    return y


# --------------------------------------------------------------------------
# component templates
# --------------------------------------------------------------------------


def compute_unit(nl: Netlist, L: int, k: int) -> str:
    """L:1 weight select over complemented SRAM outputs, then k NOR gates:
    NOR(~w, ~x) = w & x."""
    name = f"cu_l{L}_k{k}"
    if name in nl.modules:
        return name
    b = _Builder(nl, name)
    qb = b.input("qb", L)
    rsel = b.input("rsel", clog2(L)) if L > 1 else []
    xn = b.input("xn", k)
    p = b.output("p", k)
    wn = _select_or_wire(b, nl, "wsel", qb, rsel)
    for j in range(k):
        b.cell(CellKind.NOR, f"nor_{_ix(j, k)}", A=wn, B=xn[j], Y=p[j])
    return b.done()


def adder_tree(nl: Netlist, H: int, k: int) -> str:
    """Stage i sums pairs of (k+i-1)-bit operands; H >= 2."""
    name = f"adder_tree_h{H}_k{k}"
    if name in nl.modules:
        return name
    depth = H.bit_length() - 1
    b = _Builder(nl, name)
    p = b.input("p", H * k)
    out = b.output("s", k + depth)
    terms = [p[i * k:(i + 1) * k] for i in range(H)]
    for i in range(1, depth + 1):
        w = k + i - 1
        add = adder(nl, w)
        count = H >> i
        flat = out if i == depth else b.wire(f"t{i}", count * (w + 1))
        nxt = []
        for j in range(count):
            s = flat[j * (w + 1):(j + 1) * (w + 1)]
            b.inst(add, f"add_s{i}_{_ix(j, count)}", a=terms[2 * j], b=terms[2 * j + 1], s=s)
            nxt.append(s)
        terms = nxt
    return b.done()


def shift_accumulator(nl: Netlist, R: int, P: int) -> str:
    """acc <= acc + (partial << shamt): R registers, R-bit shifter, R-bit adder."""
    name = f"shift_acc_r{R}_p{P}"
    if name in nl.modules:
        return name
    b = _Builder(nl, name, stage=Stage.ARRAY_TO_ACCU)
    part = b.input("part", P)
    shamt = b.input("shamt", clog2(R)) if R > 1 else []
    clk = b.input("clk", 1)[0]
    acc = b.output("acc", R)
    padded = part + [CONST0] * (R - P)
    if R > 1:
        shifted = b.wire("sh", R)
        b.inst(shifter(nl, R, left=True), "shift", d=padded, s=shamt, y=shifted)
    else:
        shifted = padded
    total = b.wire("sum", R + 1)
    b.inst(adder(nl, R), "add", a=acc, b=shifted, s=total)
    for j in range(R):
        b.cell(CellKind.DFF, f"reg_{_ix(j, R)}", D=total[j], CLK=clk, Q=acc[j])
    return b.done()


def column(nl: Netlist, dp: DesignPoint) -> str:
    H, L, k, R = dp.H, dp.L, dp.k, dp.acc_width
    P = k + dp.log2H
    name = f"column_h{H}_l{L}_k{k}_r{R}"
    if name in nl.modules:
        return name
    cu = compute_unit(nl, L, k)
    acc_t = shift_accumulator(nl, R, P)
    tree = adder_tree(nl, H, k) if H > 1 else None
    b = _Builder(nl, name)
    wl = b.input("wl", H * L)
    bl = b.input("bl", 1)[0]
    rsel = b.input("rsel", clog2(L)) if L > 1 else []
    xn = b.input("xn", H * k)
    shamt = b.input("shamt", clog2(R)) if R > 1 else []
    clk = b.input("clk", 1)
    acc = b.output("acc", R)
    qb = b.wire("qb", H * L)
    prod = b.wire("prod", H * k)
    for i in range(H):
        for l in range(L):
            b.cell(CellKind.SRAM, f"sram_r{_ix(i, H)}_l{_ix(l, L)}", WL=wl[i * L + l], BL=bl, QB=qb[i * L + l])
        pins = dict(qb=qb[i * L:(i + 1) * L], xn=xn[i * k:(i + 1) * k], p=prod[i * k:(i + 1) * k])
        if L > 1:
            pins["rsel"] = rsel
        b.inst(cu, f"cu_r{_ix(i, H)}", **pins)
    if tree:
        partial = b.wire("partial", P)
        b.inst(tree, "tree", p=prod, s=partial)
    else:
        partial = prod
    pins = dict(part=partial, clk=clk, acc=acc)
    if R > 1:
        pins["shamt"] = shamt
    b.inst(acc_t, "accu", **pins)
    return b.done()


def result_fusion(nl: Netlist, Bw: int, R: int, W: int) -> str:
    """Sum of Bw column results weighted by bit position; Bw-1 W-bit adders
    in a balanced tree (the position shifts are wiring)."""
    name = f"fusion_b{Bw}_r{R}_w{W}"
    if name in nl.modules:
        return name
    add = adder(nl, W)
    b = _Builder(nl, name)
    col = b.input("col", Bw * R)
    y = b.output("y", W)
    terms = [[CONST0] * j + col[j * R:(j + 1) * R] + [CONST0] * (W - R - j) for j in range(Bw)]
    level = 0
    while len(terms) > 1:
        pairs = len(terms) // 2
        root = len(terms) == 2
        nxt = []
        for j in range(pairs):
            if root:
                s = y + b.wire("carry", 1)
            else:
                s = b.wire(f"s{level}_{_ix(j, pairs)}", W + 1)
            b.inst(add, f"add_l{level}_{_ix(j, pairs)}", a=terms[2 * j], b=terms[2 * j + 1], s=s)
            nxt.append(s[:W])
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
        level += 1
    return b.done()


def input_buffer(nl: Netlist, H: int, Bx: int, k: int) -> str:
    """H x Bx input registers; per row, k C:1 selectors pick the current
    k-bit slice (MSB slice first) from the complemented outputs."""
    C = Bx // k
    name = f"input_buffer_h{H}_b{Bx}_k{k}"
    if name in nl.modules:
        return name
    b = _Builder(nl, name, stage=Stage.PRE_ARRAY)
    d = b.input("d", H * Bx)
    csel = b.input("csel", clog2(C)) if C > 1 else []
    clk = b.input("clk", 1)[0]
    xn = b.output("xn", H * k)
    qn = b.wire("qn", H * Bx) if C > 1 else None
    for i in range(H):
        for j in range(Bx):
            bit = i * Bx + j
            b.cell(CellKind.DFF, f"reg_r{_ix(i, H)}_b{_ix(j, Bx)}", D=d[bit], CLK=clk,
                   QN=qn[bit] if qn else xn[i * k + j])
        if C > 1:
            for j in range(k):
                cands = [qn[i * Bx + Bx - (c + 1) * k + j] for c in range(C)]
                _select_or_wire(b, nl, f"slice_r{_ix(i, H)}_s{_ix(j, k)}", cands, csel, out=xn[i * k + j])
    return b.done()


def prealign(nl: Netlist, H: int, BE: int, BM: int) -> str:
    """Max-exponent comparison tree, per-input offset adder and mantissa
    right shifter.  Structure as priced; not a bit-true FP datapath."""
    name = f"prealign_h{H}_e{BE}_m{BM}"
    if name in nl.modules:
        return name
    cmp_ = comparator(nl, BE)
    sub = adder(nl, BE)
    shr = shifter(nl, BM, left=False)
    b = _Builder(nl, name)
    exp = b.input("exp", H * BE)
    man = b.input("man", H * BM)
    al = b.output("al", H * BM)
    cur = [exp[i * BE:(i + 1) * BE] for i in range(H)]
    level = 0
    while len(cur) > 1:
        pairs = len(cur) // 2
        nxt = []
        for j in range(pairs):
            tag = f"l{level}_{_ix(j, pairs)}"
            gt = b.wire(f"cmp_{tag}", BE + 1)
            b.inst(cmp_, f"cmp_{tag}", a=cur[2 * j], b=cur[2 * j + 1], s=gt)
            mx = b.wire(f"max_{tag}", BE)
            for e in range(BE):
                b.cell(CellKind.MUX2, f"mux_{tag}_{_ix(e, BE)}", A=cur[2 * j + 1][e], B=cur[2 * j][e], S=gt[BE], Y=mx[e])
            nxt.append(mx)
        cur = nxt
        level += 1
    emax = cur[0]
    nsel = clog2(BM)
    for i in range(H):
        off = b.wire(f"off_{_ix(i, H)}", BE + 1)
        b.inst(sub, f"sub_{_ix(i, H)}", a=emax, b=exp[i * BE:(i + 1) * BE], s=off)
        s = [off[j] if j <= BE else CONST0 for j in range(nsel)]
        b.inst(shr, f"shr_{_ix(i, H)}", d=man[i * BM:(i + 1) * BM], s=s, y=al[i * BM:(i + 1) * BM])
    return b.done()


def converter(nl: Netlist, Br: int, BE: int, BM: int) -> str:
    """OR-chain leading-one detect feeding a normalizing shifter and an
    exponent adder.  Structure as priced; not a bit-true normalizer."""
    name = f"int2fp_r{Br}_e{BE}_m{BM}"
    if name in nl.modules:
        return name
    shl = shifter(nl, Br, left=True)
    add = adder(nl, BE)
    b = _Builder(nl, name)
    raw = b.input("raw", Br)
    base = b.input("base", BE)
    man = b.output("man", BM)
    exp = b.output("exp", BE)
    t = b.wire("lod", Br)
    for i in range(Br - 1, -1, -1):
        b.cell(CellKind.OR, f"or_{_ix(i, Br)}", A=raw[i], B=t[i + 1] if i + 1 < Br else CONST0, Y=t[i])
    low = b.wire("norm_lo", Br - BM) if Br > BM else []
    b.inst(shl, "norm", d=raw, s=t[:clog2(Br)], y=low + man)
    b.inst(add, "expadd", a=base, b=[t[j] if j < Br else CONST0 for j in range(BE)], s=exp + b.wire("exp_ovf", 1))
    return b.done()


# --------------------------------------------------------------------------
# top level
# --------------------------------------------------------------------------


def output_width(dp: DesignPoint) -> int:
    """Bits per fused INT output."""
    return dp.fusion_width if dp.Bw > 1 else dp.acc_width


def generate_structural_netlist(dp: DesignPoint) -> Netlist:
    H, L, k, N, Bw, Bx = dp.H, dp.L, dp.k, dp.N, dp.Bw, dp.Bx
    R, W, C, O = dp.acc_width, dp.fusion_width, dp.cycles, dp.outputs
    nl = Netlist(top=f"dcim_{dp.tag}", params=dp.to_dict())
    col = column(nl, dp)
    buf = input_buffer(nl, H, Bx, k)
    fus = result_fusion(nl, Bw, R, W) if Bw > 1 else None

    b = _Builder(nl, nl.top)
    fp = dp.arch is Arch.FP
    if fp:
        x_exp = b.input("x_exp", H * dp.BE)
        x_man = b.input("x_man", H * dp.BM)
    else:
        x = b.input("x", H * Bx)
    wl = b.input("wl", H * L)
    bl = b.input("bl", N)
    rsel = b.input("rsel", clog2(L)) if L > 1 else []
    csel = b.input("csel", clog2(C)) if C > 1 else []
    shamt = b.input("shamt", clog2(R)) if R > 1 else []
    clk = b.input("clk", 1)
    if fp:
        base = b.input("exp_base", O * dp.BE)
        y_man = b.output("y_man", O * dp.BM)
        y_exp = b.output("y_exp", O * dp.BE)
        fused_w = W
        fused = b.wire("fused", O * W)
    else:
        fused_w = output_width(dp)
        fused = b.output("y", O * fused_w)

    if fp:
        aligned = b.wire("aligned", H * Bx)
        b.inst(prealign(nl, H, dp.BE, dp.BM), "align", exp=x_exp, man=x_man, al=aligned)
        buf_in = aligned
    else:
        buf_in = x
    xn = b.wire("xn", H * k)
    pins = dict(d=buf_in, clk=clk, xn=xn)
    if C > 1:
        pins["csel"] = csel
    b.inst(buf, "inbuf", **pins)

    acc = b.wire("acc", N * R) if fus else None
    for c in range(N):
        o = c // Bw
        if fus:
            acc_bits = acc[c * R:(c + 1) * R]
        elif fp:
            acc_bits = fused[o * W:o * W + R]
        else:
            acc_bits = fused[o * fused_w:(o + 1) * fused_w]
        pins = dict(wl=wl, bl=[bl[c]], xn=xn, clk=clk, acc=acc_bits)
        if L > 1:
            pins["rsel"] = rsel
        if R > 1:
            pins["shamt"] = shamt
        b.inst(col, f"col_{_ix(c, N)}", **pins)
    for o in range(O):
        if fus:
            b.inst(fus, f"fusion_{_ix(o, O)}", col=acc[o * Bw * R:(o + 1) * Bw * R],
                   y=fused[o * fused_w:(o + 1) * fused_w])
    if fp:
        cvt = converter(nl, dp.result_width, dp.BE, dp.BM)
        for o in range(O):
            raw = fused[o * W:(o + 1) * W]
            if not fus:
                # single-column groups leave the top fused bit undriven
                raw = raw[:R] + [CONST0] * (W - R)
            b.inst(cvt, f"convert_{_ix(o, O)}", raw=raw, base=base[o * dp.BE:(o + 1) * dp.BE],
                   man=y_man[o * dp.BM:(o + 1) * dp.BM], exp=y_exp[o * dp.BE:(o + 1) * dp.BE])
    b.done()
    return nl
