"""Command-line front end.

Commands: estimate, explore, enumerate, compare, simulate, generate.  A run
is described by a key-value config file (see :mod:`dcimc.config`); flags
override file keys.  Exit codes: 0 success, 2 validation error, 3 infeasible
spec or design, 4 internal invariant failure.  Errors are reported as one
JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, build_config, load_entries
from .costmodel import Stage, macro_breakdown, macro_cost, to_absolute
from .design import PRESETS, Arch, DesignPoint
from .dse import ParetoArchive, enumerate_bruteforce, hypervolume, nsga2_evolve, reference_point
from .errors import CapExceeded, DcimError, InfeasibleDesign, NetlistError, NoFeasibleDesign
from .filters import combine
from .funcsim import FpFormat, FpValue, IntOperands, exact_int_mvm, simulate_fp_dcim, simulate_int_dcim
from .kvtext import ConfigError
from .rtlgen import ReconciliationError, write_design

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4

CSV_HEADER = [
    "arch", "precision", "N", "H", "L", "k", "Bw", "Bx", "BE", "BM",
    "area_gates", "delay_gates", "energy_gates", "throughput_ops_per_gd",
    "area_um2", "delay_ps", "energy_fj", "tops_per_w", "tops_per_mm2",
]


def precision_name(dp: DesignPoint) -> str:
    for p in PRESETS.values():
        if (p.arch, p.Bw, p.Bx, p.BE, p.BM) == (dp.arch, dp.Bw, dp.Bx, dp.BE, dp.BM):
            return p.name
    return "custom"


def frontier_rows(archive: ParetoArchive, lib) -> list[list[str]]:
    rows = []
    for dp, cost in archive.entries:
        ab = to_absolute(cost, lib)
        absolute = ["", "", "", "", ""] if ab is None else [
            repr(ab.area_um2), repr(ab.delay_ps), repr(ab.energy_fj), repr(ab.tops_per_w), repr(ab.tops_per_mm2)]
        rows.append([
            dp.arch.value, precision_name(dp), *(str(getattr(dp, f)) for f in ("N", "H", "L", "k", "Bw", "Bx", "BE", "BM")),
            *(repr(v) for v in cost.as_floats()), *absolute,
        ])
    return rows


def export_frontier_csv(archive: ParetoArchive, path, lib) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(CSV_HEADER)
        w.writerows(frontier_rows(archive, lib))
    return path


def read_frontier_csv(path) -> list[dict]:
    """Parse a frontier CSV back into typed rows (design point + float objectives)."""
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            dp = DesignPoint(Arch(row["arch"]), *(int(row[f]) for f in ("N", "H", "L", "k", "Bw", "Bx", "BE", "BM")))
            objs = tuple(float(row[f]) for f in ("area_gates", "delay_gates", "energy_gates", "throughput_ops_per_gd"))
            absolute = {f: float(row[f]) for f in CSV_HEADER[14:] if row[f] != ""}
            out.append({"design": dp, "precision": row["precision"], "objectives": objs, "absolute": absolute})
    return out


def write_plot_data(archive: ParetoArchive, out_dir: Path, lib) -> list[Path]:
    """Tab-separated scatter files, one per objective pair."""
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = [("area", "delay"), ("area", "energy"), ("area", "throughput"), ("energy", "throughput")]
    written = []
    for x, y in pairs:
        p = out_dir / f"{x}_vs_{y}.tsv"
        lines = [f"tag\t{x}\t{y}"]
        for dp, c in archive.entries:
            lines.append(f"{dp.tag}\t{float(getattr(c, x))!r}\t{float(getattr(c, y))!r}")
        p.write_text("\n".join(lines) + "\n")
        written.append(p)
    if lib.calibration is not None:
        p = out_dir / "tops_per_mm2_vs_tops_per_w.tsv"
        lines = ["tag\ttops_per_mm2\ttops_per_w"]
        for dp, c in archive.entries:
            ab = to_absolute(c, lib)
            lines.append(f"{dp.tag}\t{ab.tops_per_mm2!r}\t{ab.tops_per_w!r}")
        p.write_text("\n".join(lines) + "\n")
        written.append(p)
    return written


def _frac(x: Fraction) -> dict:
    return {"exact": str(x), "value": float(x)}


def _write_archive(archive: ParetoArchive, stem: str, cfg: RunConfig, plot: bool) -> dict:
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    csv_path = export_frontier_csv(archive, out / f"{stem}.csv", cfg.lib)
    json_path = out / f"{stem}.json"
    json_path.write_text(archive.to_json())
    files = [str(csv_path), str(json_path)]
    if plot:
        files += [str(p) for p in write_plot_data(archive, out / "plot", cfg.lib)]
    return {"entries": len(archive), "files": files}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_estimate(cfg: RunConfig, opts) -> dict:
    dp = cfg.design_point()
    bd = macro_breakdown(cfg.lib, dp, cfg.spec.alpha)
    c = bd.cost
    report = {
        "design": dp.to_dict(),
        "tag": dp.tag,
        "precision": precision_name(dp),
        "cost": {f: _frac(getattr(c, f)) for f in ("area", "delay", "energy", "throughput")},
        "ops_per_cycle": _frac(c.ops_per_cycle),
        "stages": {s.value: _frac(bd.stages[s]) for s in Stage},
        "components": {k.value: {f: _frac(getattr(v, f)) for f in ("area", "delay", "energy")}
                       for k, v in sorted(bd.components.items(), key=lambda kv: kv[0].value)},
    }
    ab = to_absolute(c, cfg.lib)
    if ab is not None:
        report["absolute"] = {f: getattr(ab, f) for f in ("area_um2", "delay_ps", "energy_fj", "tops_per_w", "tops_per_mm2")}
    cfg.output.mkdir(parents=True, exist_ok=True)
    (cfg.output / "estimate.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def cmd_explore(cfg: RunConfig, opts) -> dict:
    archive = nsga2_evolve(cfg.spec, cfg.ga, cfg.lib, jobs=cfg.jobs)
    return _write_archive(archive, "frontier", cfg, opts.emit_plot_data)


def cmd_enumerate(cfg: RunConfig, opts) -> dict:
    archive = enumerate_bruteforce(cfg.spec, cfg.lib, cap=cfg.cap, jobs=cfg.jobs)
    return _write_archive(archive, "exhaustive", cfg, opts.emit_plot_data)


def cmd_compare(cfg: RunConfig, opts) -> dict:
    exact = enumerate_bruteforce(cfg.spec, cfg.lib, cap=cfg.cap, jobs=cfg.jobs)
    ga = nsga2_evolve(cfg.spec, cfg.ga, cfg.lib, jobs=cfg.jobs)
    ref = reference_point(exact.costs)
    hv_ga, hv_exact = hypervolume(ga.costs, ref), hypervolume(exact.costs, ref)
    exact_set = set(exact.designs)
    report = {
        "reference": list(ref),
        "hypervolume_ga": hv_ga,
        "hypervolume_exhaustive": hv_exact,
        "ratio": hv_ga / hv_exact if hv_exact else 1.0,
        "ga_entries": len(ga),
        "exhaustive_entries": len(exact),
        "ga_entries_on_exhaustive_front": sum(dp in exact_set for dp in ga.designs),
    }
    cfg.output.mkdir(parents=True, exist_ok=True)
    (cfg.output / "compare.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _random_fp(rng, fmt: FpFormat, size: int, spread: int = 4) -> list[FpValue]:
    out = []
    for _ in range(size):
        if rng.random() < 0.05:
            out.append(FpValue(1, 0, 0))
            continue
        e = int(rng.integers(max(1, fmt.bias - spread), min(fmt.max_exponent, fmt.bias + spread) + 1))
        m = int(rng.integers(1 << (fmt.BM - 1), 1 << fmt.BM))
        out.append(FpValue(1 if rng.random() < 0.5 else -1, e, m))
    return out


def cmd_simulate(cfg: RunConfig, opts) -> dict:
    dp = cfg.design_point()
    rng = np.random.Generator(np.random.PCG64(cfg.sim_seed))
    if not 0 <= cfg.sim_row < dp.L:
        raise ConfigError(f"row must be below L={dp.L}", key="simulate.row")
    cfg.output.mkdir(parents=True, exist_ok=True)
    report = {"design": dp.to_dict(), "tag": dp.tag, "trials": cfg.sim_trials}
    if dp.arch is Arch.INT:
        mismatches = 0
        for t in range(cfg.sim_trials):
            w = rng.integers(0, 1 << dp.Bw, size=(dp.outputs, dp.L, dp.H))
            x = rng.integers(0, 1 << dp.Bx, size=dp.H)
            ops = IntOperands(w, x, cfg.sim_row)
            got, trace = simulate_int_dcim(dp, ops)
            if [int(v) for v in got] != exact_int_mvm(ops):
                mismatches += 1
            if t == 0 and opts.trace:
                (cfg.output / "trace.txt").write_text(trace.dump())
        report["mismatches"] = mismatches
    else:
        fmt = FpFormat(dp.BE, dp.BM)
        exact_cases = exact_hits = 0
        worst = 0.0
        for _ in range(cfg.sim_trials):
            w = [[_random_fp(rng, fmt, dp.H) for _ in range(dp.L)] for _ in range(dp.outputs)]
            xs = _random_fp(rng, fmt, dp.H)
            res = simulate_fp_dcim(dp, w, xs, cfg.sim_row)
            for o, (v, f) in enumerate(zip(res.outputs, res.flags)):
                ref = sum((a.to_fraction(fmt) * b.to_fraction(fmt) for a, b in zip(w[o][cfg.sim_row], xs)), Fraction(0))
                got = v.to_fraction(fmt)
                clean = not (f.inexact or f.overflow or f.underflow or any(res.input_alignment.truncated)
                             or res.weight_truncated)
                if clean:
                    exact_cases += 1
                    exact_hits += got == ref
                scale = sum((abs(a.to_fraction(fmt) * b.to_fraction(fmt)) for a, b in zip(w[o][cfg.sim_row], xs)),
                            Fraction(0))
                if scale:
                    worst = max(worst, float(abs(got - ref) / scale))
        report.update(exact_cases=exact_cases, exact_matches=exact_hits, max_error_over_magnitude=worst)
        report["mismatches"] = exact_cases - exact_hits
    (cfg.output / "simulate.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if report["mismatches"]:
        raise _Internal(f"{report['mismatches']} simulation mismatches", report)
    return report


def cmd_generate(cfg: RunConfig, opts) -> dict:
    if opts.archive:
        archive = ParetoArchive.from_json(Path(opts.archive).read_text())
    elif cfg.design:
        dp = cfg.design_point()
        archive = ParetoArchive([(dp, macro_cost(cfg.lib, dp, cfg.spec.alpha))])
    else:
        archive = nsga2_evolve(cfg.spec, cfg.ga, cfg.lib, jobs=cfg.jobs)
    chosen = archive.filtered(combine(cfg.filters))
    if cfg.select:
        wanted = set(cfg.select)
        chosen = chosen.filtered(lambda dp, c: dp.tag in wanted)
    dirs = [str(write_design(dp, cfg.output, cfg.lib)) for dp in chosen.designs]
    return {"generated": [dp.tag for dp in chosen.designs], "directories": dirs}


COMMANDS = {
    "estimate": cmd_estimate,
    "explore": cmd_explore,
    "enumerate": cmd_enumerate,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
    "generate": cmd_generate,
}


class _Internal(DcimError):
    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


def run_command(cfg: RunConfig, cmd: str, opts=None) -> tuple[int, dict]:
    """Dispatch one command; returns (exit status, report)."""
    opts = opts or argparse.Namespace(emit_plot_data=False, trace=False, archive=None)
    try:
        return EXIT_OK, COMMANDS[cmd](cfg, opts)
    except ConfigError as exc:
        return EXIT_INVALID, _error("validation", exc, key=exc.key, line=exc.line)
    except NoFeasibleDesign as exc:
        return EXIT_INFEASIBLE, _error("infeasible", exc, violations=exc.violations)
    except InfeasibleDesign as exc:
        return EXIT_INFEASIBLE, _error("infeasible", exc)
    except CapExceeded as exc:
        return EXIT_INVALID, _error("cap_exceeded", exc, key="enumerate.cap")
    except (ReconciliationError, NetlistError, _Internal) as exc:
        return EXIT_INTERNAL, _error("internal", exc, detail=getattr(exc, "detail", None))
    except (ValueError, OSError) as exc:
        return EXIT_INVALID, _error("validation", exc)


def _error(kind: str, exc: Exception, **extra) -> dict:
    out = {"error": kind, "message": str(exc)}
    out.update({k: v for k, v in extra.items() if v is not None})
    return out


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

# flag dest -> config key
_FLAG_KEYS = {
    "w_store": "w_store", "precision": "precision", "alpha": "alpha", "tech": "tech", "output": "output",
    "jobs": "jobs", "n_min": "bounds.n_min", "h_max": "bounds.h_max", "l_max": "bounds.l_max",
    "population": "ga.population", "generations": "ga.generations", "crossover": "ga.crossover",
    "mutation": "ga.mutation", "seed": "ga.seed", "cap": "enumerate.cap",
    "N": "design.N", "H": "design.H", "L": "design.L", "k": "design.k",
    "trials": "simulate.trials", "sim_seed": "simulate.seed", "row": "simulate.row",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--config", "-c", help="key-value config file")
    g.add_argument("--w-store", type=int)
    g.add_argument("--precision")
    g.add_argument("--archs", help="comma-separated architectures (IntMultiply,FpPrealigned)")
    g.add_argument("--alpha", type=float, help="activity factor in (0, 1]")
    g.add_argument("--tech", help="tech-library override file")
    g.add_argument("--output", "-o", help="output directory")
    g.add_argument("--jobs", "-j", type=int, help="parallel cost evaluations")
    b = common.add_argument_group("search bounds and GA")
    b.add_argument("--n-min", type=int)
    b.add_argument("--h-max", type=int)
    b.add_argument("--l-max", type=int)
    b.add_argument("--population", type=int)
    b.add_argument("--generations", type=int)
    b.add_argument("--crossover", type=float)
    b.add_argument("--mutation", type=float)
    b.add_argument("--seed", type=int)
    b.add_argument("--cap", type=int, help="exhaustive grid size limit")
    d = common.add_argument_group("explicit design")
    d.add_argument("--N", type=int)
    d.add_argument("--H", type=int)
    d.add_argument("--L", type=int)
    d.add_argument("--k", type=int)
    s = common.add_argument_group("selection and outputs")
    s.add_argument("--filter", action="append", dest="filters", help="e.g. 'area<=1e5' (repeatable)")
    s.add_argument("--select", action="append", help="design tag to generate (repeatable)")
    s.add_argument("--archive", help="frontier JSON to generate from instead of exploring")
    s.add_argument("--emit-plot-data", action="store_true", help="write per-objective TSV scatter files")
    s.add_argument("--trials", type=int)
    s.add_argument("--sim-seed", type=int)
    s.add_argument("--row", type=int)
    s.add_argument("--trace", action="store_true", help="dump the first INT simulation trace")

    parser = argparse.ArgumentParser(prog="dcimc", description="DCIM macro exploration and netlist generation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "estimate": "cost of one explicit design point",
        "explore": "NSGA-II frontier (CSV + JSON)",
        "enumerate": "exhaustive frontier (CSV + JSON)",
        "compare": "hypervolume of the GA frontier relative to the exhaustive one",
        "simulate": "bit-accurate functional check of one design point",
        "generate": "structural Verilog for selected frontier entries",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def config_from_args(args) -> RunConfig:
    entries = dict(load_entries(args.config)) if args.config else {}
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            entries[key] = (v, None)
    if args.archs:
        entries["archs"] = ([a.strip() for a in args.archs.split(",") if a.strip()], None)
    if args.filters:
        entries["filters"] = (list(args.filters), None)
    if args.select:
        entries["select"] = (list(args.select), None)
    base = Path(args.config).resolve().parent if args.config else None
    return build_config(entries, base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        status, report = EXIT_INVALID, _error("validation", exc, key=exc.key, line=exc.line)
    except InfeasibleDesign as exc:
        status, report = EXIT_INFEASIBLE, _error("infeasible", exc)
    except ValueError as exc:
        status, report = EXIT_INVALID, _error("validation", exc)
    else:
        status, report = run_command(cfg, args.command, args)
    if status == EXIT_OK:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
