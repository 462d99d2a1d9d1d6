import csv
import json
from fractions import Fraction
from pathlib import Path

import pytest

from dcimc.cli import CSV_HEADER, export_frontier_csv, main, read_frontier_csv, run_command
from dcimc.config import build_config, load_spec_config
from dcimc.costmodel import gate_tops_per_w
from dcimc.design import Arch
from dcimc.dse import DcimSpec, GaParams, ParetoArchive, enumerate_bruteforce
from dcimc.filters import combine, parse_filter
from dcimc.kvtext import ConfigError, parse_kv_text
from dcimc.techlib import Calibration, TechLibrary


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


@pytest.fixture
def int4_cfg(tmp_path):
    return write(tmp_path / "run.cfg", 'w_store = 4096\nprecision = "INT4"\n\n[ga]\npopulation = 32\n'
                                       'generations = 20\nseed = 7\n')


def run(argv, capsys):
    status = main([str(a) for a in argv])
    out = capsys.readouterr()
    return status, json.loads(out.out or out.err)


def test_minimal_config_defaults(tmp_path):
    cfg = load_spec_config(write(tmp_path / "c.cfg", 'w_store = 65536\nprecision = "INT8"\n'))
    assert cfg.spec.w_store == 65536 and cfg.spec.precision.Bx == 8
    assert cfg.spec.n_floor == 32 and cfg.spec.h_max == 2048 and cfg.spec.l_max == 64
    assert cfg.spec.alpha == 1
    assert cfg.ga == GaParams(100, 100, 0.9, 0.2, 0)
    assert cfg.output == Path("dcimc_out") and cfg.jobs == 1
    assert cfg.lib.calibration is None


def test_bf16_config(tmp_path):
    cfg = load_spec_config(write(tmp_path / "c.cfg", 'w_store = 8192\nprecision = "BF16"\n'))
    p = cfg.spec.precision
    assert (p.BE, p.BM, p.arch) == (8, 8, Arch.FP)


@pytest.mark.parametrize("text, key, line", [
    ('w_store = 0\nprecision = "INT8"\n', "w_store", 1),
    ('w_store = 16\nprecison = "INT8"\n', "precison", 2),
    ('w_store = 16\nprecision = "INT7"\n', "precision", 2),
    ('precision = "INT8"\n', "w_store", None),
    ('w_store = 16\nprecision = "INT8"\n[ga]\npopulation = 5\n', "ga.population", 4),
    ('w_store = 16\nprecision = "INT8"\nalpha = 1.5\n', "alpha", 3),
    ('w_store = 16\nprecision = "INT8"\nfilters = ["area~3"]\n', "filters", 3),
    ('w_store = "many"\nprecision = "INT8"\n', "w_store", 1),
])
def test_config_errors_name_key_and_line(tmp_path, text, key, line):
    with pytest.raises(ConfigError) as err:
        load_spec_config(write(tmp_path / "c.cfg", text))
    assert err.value.key == key and err.value.line == line


def test_kv_syntax_error_has_line():
    with pytest.raises(ConfigError) as err:
        parse_kv_text('a = 1\nb 2\n')
    assert err.value.line == 2


def test_tech_path_relative_to_config(tmp_path):
    sub = tmp_path / "cfgs"
    sub.mkdir()
    write(sub / "lib.kv", "cell.NOR.area = 2\n")
    cfg = load_spec_config(write(sub / "c.cfg", 'w_store = 64\nprecision = "INT2"\ntech = "lib.kv"\n'))
    assert cfg.lib.cells["NOR"].area == 2


def test_filters():
    f = parse_filter("area<=1e5")
    assert f.field == "area" and f.value == 100000
    keep = combine([parse_filter("H>=64"), parse_filter("delay<300")])
    arch = enumerate_bruteforce(DcimSpec(w_store=8192, precision="INT8"))
    chosen = arch.filtered(keep)
    assert all(d.H >= 64 and c.delay < 300 for d, c in chosen)
    assert set(chosen.designs) <= set(arch.designs)
    for bad in ["area", "speed<3", "area<=x", "N=<4"]:
        with pytest.raises(ValueError):
            parse_filter(bad)


def test_csv_empty_archive(tmp_path):
    p = export_frontier_csv(ParetoArchive(), tmp_path / "f.csv", TechLibrary())
    assert p.read_bytes() == (",".join(CSV_HEADER) + "\r\n").encode()


def test_csv_round_trip(tmp_path):
    arch = enumerate_bruteforce(DcimSpec(w_store=4096, precision="INT8", h_max=128))
    rows = read_frontier_csv(export_frontier_csv(arch, tmp_path / "f.csv", TechLibrary()))
    assert [r["design"] for r in rows] == arch.designs
    assert [r["objectives"] for r in rows] == [c.as_floats() for c in arch.costs]
    assert all(r["absolute"] == {} for r in rows)
    with (tmp_path / "f.csv").open(newline="") as fh:
        assert next(csv.reader(fh)) == CSV_HEADER


def test_csv_calibrated_units(tmp_path):
    cal = Calibration(area_um2=0.4, delay_ps=12.0, energy_fj=0.8)
    lib = TechLibrary(calibration=cal)
    arch = enumerate_bruteforce(DcimSpec(w_store=8192, precision="INT8"), lib)
    rows = read_frontier_csv(export_frontier_csv(arch, tmp_path / "f.csv", lib))
    for r, c in zip(rows, arch.costs):
        ab = r["absolute"]
        # TOPS/W = (ops per gate-energy) * 1e3 / fJ per gate-energy
        assert ab["tops_per_w"] == pytest.approx(float(gate_tops_per_w(c)) * 1e3 / cal.energy_fj)
        assert ab["area_um2"] == pytest.approx(float(c.area) * cal.area_um2)
        tops = float(c.throughput) / cal.delay_ps
        assert ab["tops_per_mm2"] == pytest.approx(tops / (ab["area_um2"] * 1e-6))


def test_explore_is_byte_identical(tmp_path, int4_cfg, capsys):
    outs = []
    for i, jobs in enumerate([1, 1, 2]):
        out = tmp_path / f"o{i}"
        status, report = run(["explore", "-c", int4_cfg, "-o", out, "-j", jobs], capsys)
        assert status == 0 and report["entries"] > 0
        outs.append(((out / "frontier.csv").read_bytes(), (out / "frontier.json").read_bytes()))
    assert outs[0] == outs[1] == outs[2]


def test_compare_ratio(tmp_path, capsys):
    status, report = run(["compare", "--w-store", 4096, "--precision", "INT8", "--h-max", 128, "--l-max", 16,
                          "--population", 40, "--generations", 30, "-o", tmp_path], capsys)
    assert status == 0 and report["ratio"] >= 0.95


def test_generate_with_filter(tmp_path, int4_cfg, capsys):
    status, report = run(["explore", "-c", int4_cfg, "-o", tmp_path / "x"], capsys)
    arch = ParetoArchive.from_json((tmp_path / "x" / "frontier.json").read_text())
    limit = sorted(float(c.area) for c in arch.costs)[len(arch) // 2]
    out = tmp_path / "gen"
    status, report = run(["generate", "-c", int4_cfg, "-o", out, "--archive", tmp_path / "x" / "frontier.json",
                          "--filter", f"area<={limit!r}"], capsys)
    assert status == 0
    want = sorted(d.tag for d, c in arch if float(c.area) <= limit)
    assert sorted(p.name for p in out.iterdir()) == want == sorted(report["generated"])
    for tag in want:
        assert json.loads((out / tag / "manifest.json").read_text())["reconciled"]


def test_generate_select(tmp_path, capsys):
    status, report = run(["generate", "--w-store", 64, "--precision", "INT2", "--N", 8, "--H", 4, "--L", 4,
                          "--k", 1, "-o", tmp_path, "--select", "int_N8_H4_L4_k1_Bw2_Bx2"], capsys)
    assert status == 0 and report["generated"] == ["int_N8_H4_L4_k1_Bw2_Bx2"]


def test_estimate_and_simulate(tmp_path, capsys):
    base = ["--w-store", 64, "--precision", "INT4", "--N", 8, "--H", 4, "--L", 2, "--k", 2, "-o", tmp_path]
    status, report = run(["estimate", *base], capsys)
    assert status == 0
    assert Fraction(report["cost"]["area"]["exact"]) > 0
    status, report = run(["simulate", *base, "--trials", 50, "--trace"], capsys)
    assert status == 0 and report["mismatches"] == 0
    assert (tmp_path / "trace.txt").read_text().startswith("cycle,col,partial,acc\n")
    status, report = run(["simulate", "--w-store", 64, "--precision", "BF16", "--N", 16, "--H", 4, "--L", 1,
                          "--k", 2, "-o", tmp_path / "fp", "--trials", 50], capsys)
    assert status == 0 and report["mismatches"] == 0


def test_plot_data(tmp_path, capsys):
    status, report = run(["enumerate", "--w-store", 4096, "--precision", "INT8", "--h-max", 64, "-o", tmp_path,
                          "--emit-plot-data"], capsys)
    assert status == 0
    tsv = tmp_path / "plot" / "area_vs_delay.tsv"
    lines = tsv.read_text().splitlines()
    assert lines[0] == "tag\tarea\tdelay" and len(lines) == report["entries"] + 1


@pytest.mark.parametrize("argv, code, kind", [
    (["explore", "--w-store", 0, "--precision", "INT8"], 2, "validation"),
    (["explore", "--w-store", 3, "--precision", "INT8"], 3, "infeasible"),
    (["enumerate", "--w-store", 4096, "--precision", "INT8", "--cap", 5], 2, "cap_exceeded"),
    (["estimate", "--w-store", 64, "--precision", "INT8", "--N", 8, "--H", 3, "--L", 1, "--k", 1], 3, "infeasible"),
    (["estimate", "--w-store", 64, "--precision", "INT8"], 2, "validation"),
])
def test_exit_codes(tmp_path, capsys, argv, code, kind):
    status, report = run([*argv, "-o", tmp_path], capsys)
    assert status == code and report["error"] == kind


def test_unknown_key_exit_code(tmp_path, capsys):
    cfg = write(tmp_path / "c.cfg", 'w_store = 16\nprecison = "INT8"\n')
    status, report = run(["explore", "-c", cfg], capsys)
    assert status == 2 and report["key"] == "precison" and report["line"] == 2


def test_run_command_does_not_touch_inputs(tmp_path):
    cfg = build_config({"w_store": (4096, 1), "precision": ("INT8", 2), "bounds.h_max": (64, 3),
                        "output": (str(tmp_path / "o"), 4)})
    before = (cfg.spec, cfg.ga)
    status, report = run_command(cfg, "enumerate")
    assert status == 0 and (cfg.spec, cfg.ga) == before
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["exhaustive.csv", "exhaustive.json"]


def test_kv_trailing_comments():
    got = parse_kv_text('p = "BF16"  # preset\nf = ["a#b"] # x\nn = 3 #\n')
    assert got == {"p": ("BF16", 1), "f": (["a#b"], 2), "n": (3, 3)}
    with pytest.raises(ConfigError):
        parse_kv_text("n = 3 4\n")
