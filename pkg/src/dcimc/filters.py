"""Frontier distillation predicates of the form ``<field><op><number>``.

Fields: area, delay, energy, throughput (gate-normalized) and the structural
parameters N, H, L, k.  Operators: <=, >=, <, >, ==, !=.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from fractions import Fraction

COST_FIELDS = ("area", "delay", "energy", "throughput")
DESIGN_FIELDS = ("N", "H", "L", "k")
_OPS = {"<=": operator.le, ">=": operator.ge, "==": operator.eq, "!=": operator.ne, "<": operator.lt, ">": operator.gt}
_PATTERN = re.compile(r"^\s*([A-Za-z_]+)\s*(<=|>=|==|!=|<|>)\s*([-+0-9.eE]+)\s*$")


@dataclass(frozen=True)
class Filter:
    field: str
    op: str
    value: Fraction

    def __call__(self, dp, cost) -> bool:
        lhs = getattr(cost, self.field) if self.field in COST_FIELDS else Fraction(getattr(dp, self.field))
        return _OPS[self.op](lhs, self.value)

    def __str__(self):
        return f"{self.field}{self.op}{self.value}"


def parse_filter(text: str) -> Filter:
    m = _PATTERN.match(text)
    if not m:
        raise ValueError(f"malformed filter {text!r}; expected <field><op><number>")
    fld, op, num = m.groups()
    if fld not in COST_FIELDS + DESIGN_FIELDS:
        raise ValueError(f"unknown filter field {fld!r}")
    try:
        value = Fraction(num)
    except ValueError:
        raise ValueError(f"malformed number {num!r} in filter {text!r}") from None
    return Filter(fld, op, value)


def combine(filters) -> callable:
    preds = [f if isinstance(f, Filter) else parse_filter(f) for f in filters]
    return lambda dp, cost: all(p(dp, cost) for p in preds)
