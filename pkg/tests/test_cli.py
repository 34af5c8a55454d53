"""Exit codes, artifacts, determinism of the command line front end,
plus the report writers and the disk cache they rely on."""

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from freeloop import GnsWorkspace, directed_double, dynkin_a
from freeloop.cache import (
    CacheIntegrityWarning,
    DiskCache,
    load_word_entries,
    save_word_entries,
)
from freeloop.cli import main
from freeloop.reports import (
    fmt_cell,
    sha256_text,
    svg_line_plot,
    write_csv,
    write_json,
    write_manifest,
)


def cfg_file(tmp_path: Path, doc, name="cfg.json") -> str:
    p = tmp_path / name
    p.write_text(json.dumps(doc), encoding="utf-8")
    return str(p)


def artifact_bytes(d: Path) -> dict[str, bytes]:
    """Everything under d, with the volatile manifest field removed."""
    out = {}
    for p in sorted(d.rglob("*")):
        if not p.is_file():
            continue
        data = p.read_bytes()
        if p.name == "manifest.json":
            doc = json.loads(data)
            doc.pop("wall_time_s", None)
            data = json.dumps(doc, sort_keys=True).encode()
        out[p.relative_to(d).as_posix()] = data
    return out


BOUQUET1 = {"family": "loop_bouquet", "n_loops": 1}
BOUQUET2 = {"family": "loop_bouquet", "n_loops": 2}
A3 = {"family": "dynkin_a", "n": 3}


# -- report writers -----------------------------------------------------------

def test_cell_formats():
    assert fmt_cell(True) == "true"
    assert fmt_cell(False) == "false"
    assert fmt_cell(3) == "3"
    assert fmt_cell(1 / 3) == repr(1 / 3)
    assert fmt_cell(complex(1.5, -2.0)) == "1.5-2.0j"
    assert fmt_cell(complex(0.0, 1.0)) == "0.0+1.0j"


def test_csv_floats_round_trip(tmp_path):
    vals = [1 / 3, 1e-17, 2.0 ** 0.5, -0.0, 123456789.123456]
    write_csv(tmp_path / "t.csv", ["x"], [(v,) for v in vals])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "x"
    assert [float(s) for s in lines[1:]] == vals


def test_json_sorted_and_newline_terminated(tmp_path):
    write_json(tmp_path / "t.json", {"b": 1, "a": [2.5, True]})
    text = (tmp_path / "t.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert text.endswith("\n")
    assert json.loads(text) == {"a": [2.5, True], "b": 1}


def test_sha256_is_stable():
    assert sha256_text("") == ("e3b0c44298fc1c149afbf4c8996fb924"
                               "27ae41e4649b934ca495991b7852b855")


def test_manifest_fields(tmp_path):
    write_manifest(tmp_path, "graph validate", '{"x": 1}', seed=7, threads=2,
                   wall_time_s=0.125, extra={"report": "r.json"})
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["command"] == "graph validate"
    assert doc["config_sha256"] == sha256_text('{"x": 1}')
    assert doc["seed"] == 7 and doc["threads"] == 2
    assert doc["outputs"] == {"report": "r.json"}
    assert set(doc["versions"]) == {"freeloop", "numpy", "scipy", "python"}
    # wall time is the only field that may move between identical runs
    write_manifest(tmp_path, "graph validate", '{"x": 1}', seed=7, threads=2,
                   wall_time_s=9.875, extra={"report": "r.json"})
    doc2 = json.loads((tmp_path / "manifest.json").read_text())
    doc.pop("wall_time_s"), doc2.pop("wall_time_s")
    assert doc == doc2


def test_svg_plot_structure(tmp_path):
    series = [("one", [0.0, 1.0, 2.0], [0.0, 1.0, 4.0]),
              ("two", [0.0, 1.0, 2.0], [1.0, 0.5, 0.25])]
    svg_line_plot(tmp_path / "p.svg", series, title="t", xlabel="x", ylabel="y")
    text = (tmp_path / "p.svg").read_text()
    assert text.startswith("<svg")
    assert text.count("<polyline") == 2
    assert text.count("<circle") == 6
    assert ">one</text>" in text and ">two</text>" in text
    svg_line_plot(tmp_path / "q.svg", series, title="t", xlabel="x", ylabel="y")
    assert (tmp_path / "p.svg").read_bytes() == (tmp_path / "q.svg").read_bytes()


def test_svg_plot_handles_empty_series(tmp_path):
    svg_line_plot(tmp_path / "e.svg", [])
    assert (tmp_path / "e.svg").read_text().startswith("<svg")


# -- disk cache ---------------------------------------------------------------

def test_disabled_cache_is_inert(tmp_path):
    c = DiskCache(None)
    assert not c.enabled
    c.store({"k": 1}, {"a": np.arange(3)})
    assert c.load({"k": 1}) is None
    assert list(tmp_path.iterdir()) == []


def test_cache_round_trip(tmp_path):
    c = DiskCache(tmp_path / "cache")
    doc = {"kind": "test", "n": 4}
    arrays = {"a": np.arange(5), "b": np.eye(2)}
    assert c.load(doc) is None
    c.store(doc, arrays)
    got = c.load(doc)
    assert set(got) == {"a", "b"}
    assert np.array_equal(got["a"], arrays["a"])
    assert np.array_equal(got["b"], arrays["b"])
    # a different key document misses
    assert c.load({"kind": "test", "n": 5}) is None


def test_corrupt_cache_entry_is_a_miss(tmp_path):
    c = DiskCache(tmp_path / "cache")
    doc = {"kind": "test", "n": 1}
    c.store(doc, {"a": np.arange(3)})
    key = DiskCache.key_of(doc)
    (tmp_path / "cache" / f"{key}.npz").write_bytes(b"not an archive")
    with pytest.warns(CacheIntegrityWarning):
        assert c.load(doc) is None


def test_word_entries_round_trip(tmp_path):
    dd = directed_double(dynkin_a(3))
    ws = GnsWorkspace(dd, 6)
    cache = DiskCache(tmp_path / "cache")
    h = "testhash"
    saved = save_word_entries(cache, ws, h, max_degree=4)
    assert saved > 0
    fresh = GnsWorkspace(dd, 6)
    assert load_word_entries(cache, fresh, h, max_degree=4) == saved
    for loop in ws.basis.elements:
        if len(loop) - 1 > 4:
            continue
        for got, want in zip(fresh.word_entries(loop), ws.word_entries(loop)):
            assert np.array_equal(got, want)


def test_incomplete_word_entries_recomputed(tmp_path):
    dd = directed_double(dynkin_a(3))
    ws = GnsWorkspace(dd, 4)
    cache = DiskCache(tmp_path / "cache")
    cache.store({"kind": "wick_entries", "graph": "h", "cutoff": 4,
                 "max_degree": 2}, {})
    with pytest.warns(CacheIntegrityWarning, match="incomplete"):
        assert load_word_entries(cache, ws, "h", max_degree=2) == 0


# -- config errors name the offending field ------------------------------------

def test_missing_config_flag(capsys):
    assert main(["graph", "validate"]) == 1
    assert "missing required --config" in capsys.readouterr().err


def test_absent_config_file(tmp_path, capsys):
    assert main(["graph", "validate", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "out")]) == 1
    assert "no such file" in capsys.readouterr().err


def test_invalid_json_config(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json", encoding="utf-8")
    assert main(["graph", "validate", "--config", str(p),
                 "--out", str(tmp_path / "out")]) == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_config_top_level_must_be_object(tmp_path, capsys):
    p = tmp_path / "arr.json"
    p.write_text("[1, 2]", encoding="utf-8")
    assert main(["graph", "validate", "--config", str(p),
                 "--out", str(tmp_path / "out")]) == 1
    assert "top level must be an object" in capsys.readouterr().err


def test_unknown_family_is_named(tmp_path, capsys):
    cfg = cfg_file(tmp_path, {"graph": {"family": "dynkin_z"}})
    assert main(["graph", "validate", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 1
    assert "dynkin_z" in capsys.readouterr().err


def test_missing_required_field_is_named(tmp_path, capsys):
    cfg = cfg_file(tmp_path, {"graph": BOUQUET2})
    assert main(["loops", "enumerate", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 1
    assert "'cutoff'" in capsys.readouterr().err


def test_wrong_field_type_is_named(tmp_path, capsys):
    cfg = cfg_file(tmp_path, {"graph": BOUQUET2, "cutoff": "four"})
    assert main(["loops", "enumerate", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 1
    err = capsys.readouterr().err
    assert "'cutoff'" in err and "int" in err


def test_oversized_basis_is_a_config_error(tmp_path, capsys):
    cfg = cfg_file(tmp_path, {"graph": BOUQUET2, "cutoff": 40})
    assert main(["loops", "enumerate", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 1
    assert "config error" in capsys.readouterr().err


def test_help_and_bad_subcommand_exit_via_argparse(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 2


def test_internal_fault_exit_code(tmp_path, monkeypatch, capsys):
    import freeloop.cli as cli_mod

    def boom(*a, **k):
        raise RuntimeError("forced")

    monkeypatch.setattr(cli_mod, "theta_sum", boom)
    cfg = cfg_file(tmp_path, {})
    assert main(["theta", "sum", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 3
    assert "forced" in capsys.readouterr().err


# -- subcommand artifacts -------------------------------------------------------

def test_graph_validate_artifacts(tmp_path):
    cfg = cfg_file(tmp_path, {"graph": A3})
    out = tmp_path / "out"
    assert main(["graph", "validate", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "graph_report.json").read_text())
    assert rep["simple"] is True
    assert len(rep["simplicity"]) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "graph validate"
    assert man["outputs"] == {"graph_report": "graph_report.json"}


def test_loops_enumerate_counts(tmp_path):
    cfg = cfg_file(tmp_path, {"graph": BOUQUET2, "cutoff": 4})
    out = tmp_path / "out"
    assert main(["loops", "enumerate", "--config", cfg, "--out", str(out)]) == 0
    counts = json.loads((out / "loop_counts.json").read_text())
    assert counts == {"0": 1, "1": 2, "2": 4, "3": 8, "4": 16}
    lines = (out / "loops.csv").read_text().splitlines()
    assert lines[0] == "index,length,edges"
    assert len(lines) == 32


def test_wick_build_cache_round_trip(tmp_path, capsys):
    cfg = cfg_file(tmp_path, {"graph": A3, "cutoff": 6, "max_degree": 3})
    cache = str(tmp_path / "cache")
    out1, out2, out3 = (tmp_path / f"out{i}" for i in range(3))
    assert main(["wick", "build", "--config", cfg, "--out", str(out1),
                 "--cache", cache]) == 0
    assert "from cache" not in capsys.readouterr().out
    assert main(["wick", "build", "--config", cfg, "--out", str(out2),
                 "--cache", cache]) == 0
    assert "from cache" in capsys.readouterr().out
    # a cache hit never changes the artifact
    assert (out1 / "wick_summary.json").read_bytes() == \
        (out2 / "wick_summary.json").read_bytes()
    # --no-cache wins over --cache
    assert main(["wick", "build", "--config", cfg, "--out", str(out3),
                 "--cache", cache, "--no-cache"]) == 0
    assert "from cache" not in capsys.readouterr().out


def test_lip_compute_converged(tmp_path):
    cfg = cfg_file(tmp_path, {"graph": BOUQUET1, "cutoff": 12, "rel_tol": 0.05,
                              "element": {"0": [1.0, 0.0]},
                              "oracle": True, "oracle_samples": 8})
    out = tmp_path / "out"
    assert main(["lip", "compute", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "lip_estimate.json").read_text())
    assert doc["commutator"]["converged"] is True
    # single loop: truncation at cutoff K gives a path seminorm value
    assert doc["commutator"]["value"] == pytest.approx(2 * math.cos(math.pi / 14),
                                                       abs=1e-9)
    assert doc["commutator"]["value"] == doc["commutator"]["trace"][-1][1]
    assert doc["adjusted"]["value"] == pytest.approx(doc["commutator"]["value"])
    assert doc["oracle"]["feasible"] is True
    assert doc["oracle"]["value"] == pytest.approx(doc["adjusted"]["value"], rel=1e-3)


def test_lip_compute_nonconvergence_exit(tmp_path, capsys):
    cfg = cfg_file(tmp_path, {"graph": BOUQUET1, "cutoff": 20, "rel_tol": 1e-6,
                              "element": {"0": [1.0, 0.0]}})
    out = tmp_path / "out"
    assert main(["lip", "compute", "--config", cfg, "--out", str(out)]) == 2
    assert "did not converge" in capsys.readouterr().err
    # artifacts are still written, and the manifest records the outcome
    doc = json.loads((out / "lip_estimate.json").read_text())
    assert doc["commutator"]["converged"] is False
    man = json.loads((out / "manifest.json").read_text())
    assert man["outputs"] == {"status": "non-convergence"}


def test_tail_sweep_rows(tmp_path):
    cfg = cfg_file(tmp_path, {"graph": A3, "cutoff": 8, "bands": [1, 2],
                              "degree_cuts": [1, 2],
                              "element": {"random": {"degrees": [2, 4],
                                                     "selfadjoint": True}}})
    out = tmp_path / "out"
    assert main(["tail", "sweep", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "tails.csv").read_text().splitlines()
    assert lines[0].startswith("band_min,degree_cut,")
    assert len(lines) == 5


def test_random_element_with_empty_degree_is_config_error(tmp_path, capsys):
    # the path graph has no odd basepoint loops
    cfg = cfg_file(tmp_path, {"graph": A3, "cutoff": 8,
                              "element": {"random": {"degrees": [1]}}})
    assert main(["tail", "sweep", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 1
    assert "element.random.degrees" in capsys.readouterr().err


def test_tlj_check_all_pass(tmp_path):
    cfg = cfg_file(tmp_path, {"deltas": [2.0], "laplace_max_degree": 4,
                              "identity_max_degree": 4, "trace_max_degree": 4})
    out = tmp_path / "out"
    assert main(["tlj", "check", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "tlj_report.csv").read_text().splitlines()
    assert all(line.endswith(",true") for line in lines[1:])


def test_theta_sum_deterministic(tmp_path):
    cfg = cfg_file(tmp_path, {"t": [0.5, 1.0], "n_max": 8, "delta": 2.0})
    out1, out2 = tmp_path / "out1", tmp_path / "out2"
    assert main(["theta", "sum", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["theta", "sum", "--config", cfg, "--out", str(out2)]) == 0
    assert artifact_bytes(out1) == artifact_bytes(out2)
    summary = json.loads((out1 / "theta_summary.json").read_text())
    assert summary["all_bounded"] is True


HAAG = {"graph": BOUQUET2, "degrees": [1, 2], "count": 2,
        "m_max": 3, "n_max": 3, "seed": 1}


def test_haagerup_threads_agree(tmp_path):
    cfg = cfg_file(tmp_path, HAAG)
    out1, out2 = tmp_path / "out1", tmp_path / "out2"
    assert main(["haagerup", "sweep", "--config", cfg, "--out", str(out1),
                 "--threads", "1"]) == 0
    assert main(["haagerup", "sweep", "--config", cfg, "--out", str(out2),
                 "--threads", "4"]) == 0
    assert (out1 / "haagerup.csv").read_bytes() == (out2 / "haagerup.csv").read_bytes()
    assert json.loads((out1 / "haagerup_summary.json").read_text())["all_ok"] is True


def test_seed_flag_overrides_config_seed(tmp_path):
    cfg = cfg_file(tmp_path, HAAG)
    out1, out2, out3 = (tmp_path / f"out{i}" for i in range(3))
    assert main(["haagerup", "sweep", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["haagerup", "sweep", "--config", cfg, "--out", str(out2),
                 "--seed", "1"]) == 0
    assert main(["haagerup", "sweep", "--config", cfg, "--out", str(out3),
                 "--seed", "2"]) == 0
    assert (out1 / "haagerup.csv").read_bytes() == (out2 / "haagerup.csv").read_bytes()
    assert (out1 / "haagerup.csv").read_bytes() != (out3 / "haagerup.csv").read_bytes()


def test_converge_run_artifacts(tmp_path):
    # exponent m gives q = 1 + 2^-m; radius-2 weight gaps are 0.20 and 0.06
    cfg = cfg_file(tmp_path, {"family": {"kind": "a_infty_q",
                                         "exponents": [2, 3], "cutoff": 8},
                              "K": 4, "depth": 8, "samples": 4,
                              "mix_samples": 4, "weight_tol": 0.25, "seed": 0})
    out = tmp_path / "out"
    assert main(["converge", "run", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("n,K,norm_distortion,")
    assert (out / "convergence.svg").read_text().startswith("<svg")
    summary = json.loads((out / "convergence_summary.json").read_text())
    assert set(summary) >= {"local_converged", "norm_strictly_decreasing",
                            "norm_final_vs_initial"}
    assert summary["local_converged"] is True


def test_module_entry_point(tmp_path):
    cfg = cfg_file(tmp_path, {"t": [0.5], "n_max": 6})
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "freeloop.cli", "theta", "sum",
                           "--config", cfg, "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "theta.csv").exists()
