"""Run configuration: key-value file plus command-line overrides.

Recognized keys (sections shown as dotted prefixes)::

    w_store, precision, archs, alpha, tech, output, jobs, filters, select
    bounds.n_min, bounds.h_max, bounds.l_max
    ga.population, ga.generations, ga.crossover, ga.mutation, ga.seed
    enumerate.cap
    design.N, design.H, design.L, design.k
    simulate.trials, simulate.seed, simulate.row
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .design import Arch, DesignPoint, resolve_precision
from .dse.explore import DEFAULT_CAP, DcimSpec, GaParams
from .filters import parse_filter
from .kvtext import ConfigError, parse_kv_file
from .techlib import TECHLIB_ENV, TechLibrary, load_techlib

Entries = dict  # key -> (value, line or None)


def _int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _str_list(v) -> bool:
    return isinstance(v, list) and all(isinstance(s, str) for s in v)


# key -> (validator, description)
SCHEMA = {
    "w_store": (_int, "a positive integer"),
    "precision": (lambda v: isinstance(v, str), "a preset name"),
    "archs": (_str_list, "a list of architecture names"),
    "alpha": (_num, "a number in (0, 1]"),
    "tech": (lambda v: isinstance(v, str), "a file path"),
    "output": (lambda v: isinstance(v, str), "a directory path"),
    "jobs": (_int, "a positive integer"),
    "filters": (_str_list, "a list of filter expressions"),
    "select": (_str_list, "a list of design tags"),
    "bounds.n_min": (_int, "a positive integer"),
    "bounds.h_max": (_int, "a positive integer"),
    "bounds.l_max": (_int, "a positive integer"),
    "ga.population": (_int, "an even integer >= 4"),
    "ga.generations": (_int, "a non-negative integer"),
    "ga.crossover": (_num, "a probability"),
    "ga.mutation": (_num, "a probability"),
    "ga.seed": (_int, "a non-negative integer"),
    "enumerate.cap": (_int, "a positive integer"),
    "design.N": (_int, "a positive integer"),
    "design.H": (_int, "a positive integer"),
    "design.L": (_int, "a positive integer"),
    "design.k": (_int, "a positive integer"),
    "simulate.trials": (_int, "a positive integer"),
    "simulate.seed": (_int, "a non-negative integer"),
    "simulate.row": (_int, "a non-negative integer"),
}


@dataclass
class RunConfig:
    spec: DcimSpec
    ga: GaParams
    lib: TechLibrary
    tech_path: str | None = None
    output: Path = Path("dcimc_out")
    jobs: int = 1
    cap: int = DEFAULT_CAP
    filters: list[str] = field(default_factory=list)
    select: list[str] = field(default_factory=list)
    design: dict = field(default_factory=dict)
    sim_trials: int = 1000
    sim_seed: int = 0
    sim_row: int = 0

    def design_point(self) -> DesignPoint:
        missing = [k for k in ("N", "H", "L", "k") if k not in self.design]
        if missing:
            raise ConfigError(f"explicit design needs {', '.join('design.' + m for m in missing)}",
                              key="design." + missing[0])
        prec = self.spec.precision
        d = self.design
        return DesignPoint.for_precision(prec, d["N"], d["H"], d["L"], d["k"])


def load_entries(path) -> Entries:
    return parse_kv_file(Path(path))


def build_config(entries: Entries, base_dir: Path | None = None) -> RunConfig:
    """Validate raw entries and fill defaults."""
    for key, (value, line) in entries.items():
        if key not in SCHEMA:
            raise ConfigError("unknown key", key=key, line=line)
        check, what = SCHEMA[key]
        if not check(value):
            raise ConfigError(f"expected {what}, got {value!r}", key=key, line=line)

    def get(key, default=None):
        return entries[key][0] if key in entries else default

    def fail(key, msg):
        raise ConfigError(msg, key=key, line=entries.get(key, (None, None))[1])

    for key in ("w_store", "precision"):
        if key not in entries:
            raise ConfigError("required key missing", key=key)
    if get("w_store") < 1:
        fail("w_store", "w_store must be at least 1")
    try:
        prec = resolve_precision(get("precision"))
    except ValueError as exc:
        fail("precision", str(exc))
    try:
        archs = tuple(Arch.parse(a) for a in get("archs", [a.value for a in Arch]))
    except ValueError as exc:
        fail("archs", str(exc))
    if not archs:
        fail("archs", "at least one architecture is required")
    for key in ("bounds.n_min", "bounds.h_max", "bounds.l_max", "jobs", "enumerate.cap", "simulate.trials"):
        if key in entries and get(key) < 1:
            fail(key, "must be at least 1")
    for key in ("design.N", "design.H", "design.L", "design.k"):
        if key in entries and get(key) < 1:
            fail(key, "must be at least 1")
    alpha = get("alpha", 1)
    alpha = Fraction(repr(alpha)) if isinstance(alpha, float) else Fraction(alpha)
    if not 0 < alpha <= 1:
        fail("alpha", "alpha must be in (0, 1]")
    spec = DcimSpec(
        w_store=get("w_store"),
        precision=prec,
        archs=archs,
        n_min=get("bounds.n_min"),
        h_max=get("bounds.h_max", 2048),
        l_max=get("bounds.l_max", 64),
        alpha=alpha,
    )
    try:
        ga = GaParams(
            population=get("ga.population", 100),
            generations=get("ga.generations", 100),
            crossover=float(get("ga.crossover", 0.9)),
            mutation=float(get("ga.mutation", 0.2)),
            seed=get("ga.seed", 0),
        )
    except ValueError as exc:
        key = next((k for k in ("ga.population", "ga.generations", "ga.crossover", "ga.mutation", "ga.seed")
                    if k.split(".")[1] in str(exc)), "ga")
        fail(key, str(exc))
    tech = get("tech")
    if tech is not None and base_dir is not None and not os.path.isabs(tech):
        tech = str(base_dir / tech)
    try:
        lib = load_techlib(tech)
    except ConfigError:
        raise
    except ValueError as exc:
        fail("tech", str(exc))
    output = Path(get("output", "dcimc_out"))
    design = {k.split(".")[1]: v for k, (v, _) in entries.items() if k.startswith("design.")}
    for expr in get("filters", []):
        try:
            parse_filter(expr)
        except ValueError as exc:
            fail("filters", str(exc))
    return RunConfig(
        spec=spec,
        ga=ga,
        lib=lib,
        tech_path=tech or os.environ.get(TECHLIB_ENV),
        output=output,
        jobs=get("jobs", 1),
        cap=get("enumerate.cap", DEFAULT_CAP),
        filters=list(get("filters", [])),
        select=list(get("select", [])),
        design=design,
        sim_trials=get("simulate.trials", 1000),
        sim_seed=get("simulate.seed", 0),
        sim_row=get("simulate.row", 0),
    )


def load_spec_config(path, overrides: Entries | None = None) -> RunConfig:
    """Read a config file, apply overrides (e.g. from flags) and validate."""
    entries = dict(load_entries(path))
    entries.update(overrides or {})
    return build_config(entries, Path(path).resolve().parent)
