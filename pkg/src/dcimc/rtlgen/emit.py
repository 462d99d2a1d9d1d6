"""Write generated netlists to disk together with a reconciliation manifest."""

from __future__ import annotations

import json
from pathlib import Path

from ..costmodel import Stage, macro_breakdown
from ..design import DesignPoint
from ..errors import DcimError
from ..techlib import TechLibrary
from .generate import generate_structural_netlist
from .netlist import cells_verilog, serialize_verilog, tally_cells, tally_cost
from .timing import stage_delays


class ReconciliationError(DcimError):
    """Netlist-derived costs disagree with the closed-form model."""


def reconcile(dp: DesignPoint, lib: TechLibrary, nl=None) -> dict:
    nl = nl or generate_structural_netlist(dp)
    tally = tally_cells(nl)
    area, energy = tally_cost(tally, lib)
    delays = stage_delays(nl, lib)
    model = macro_breakdown(lib, dp)
    model_delays = {s.value: model.stages[s] for s in Stage}
    ok = area == model.cost.area and energy == model.cost.energy and delays == model_delays
    return {
        "tally": {k.value: tally[k] for k in sorted(tally, key=lambda k: k.value)},
        "netlist": {"area": str(area), "energy": str(energy), "stages": {k: str(v) for k, v in sorted(delays.items())}},
        "model": {
            "area": str(model.cost.area),
            "energy": str(model.cost.energy),
            "stages": {k: str(v) for k, v in sorted(model_delays.items())},
        },
        "reconciled": ok,
    }


def write_design(dp: DesignPoint, out_dir, lib: TechLibrary, strict: bool = True) -> Path:
    """Emit ``<out_dir>/<tag>/{top.v, cells.v, manifest.json}``."""
    nl = generate_structural_netlist(dp)
    nl.check()
    report = reconcile(dp, lib, nl)
    if strict and not report["reconciled"]:
        raise ReconciliationError(f"netlist for {dp.tag} does not reconcile with the cost model")
    target = Path(out_dir) / dp.tag
    target.mkdir(parents=True, exist_ok=True)
    (target / "top.v").write_text(serialize_verilog(nl))
    (target / "cells.v").write_text(cells_verilog())
    manifest = {"design": dp.to_dict(), "tag": dp.tag, "top": nl.top, **report}
    (target / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return target
