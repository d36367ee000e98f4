import json
import math
import subprocess
import sys

import numpy as np
import pytest

from trapwave import formats
from trapwave.cli import main
from trapwave.errors import TrapIOError
from trapwave.probe import probe_scan
from trapwave.solver import VoltageSet
from trapwave.waveform import CA40, Waveform, quantize, target_well


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    return tmp_path_factory.mktemp("cache")


@pytest.fixture
def env(cache, monkeypatch):
    monkeypatch.setenv("TRAP_CACHE_DIR", str(cache))


def test_fmt_round_trips_bits():
    rng = np.random.default_rng(0)
    for x in np.concatenate([rng.standard_normal(200) * 10.0 ** rng.integers(-30, 30, 200), [np.pi, 1e-300]]):
        assert float(formats.fmt(x)) == x


def test_matrix_round_trip(A, tmp_path):
    path = tmp_path / "a.amat"
    formats.write_matrix(A, path)
    B = formats.read_matrix(path)
    assert B.values.tobytes() == A.values.tobytes()
    assert np.array_equal(B.grid.z, A.grid.z)
    assert B.config == A.config
    assert B.digest() == A.digest()
    assert not list(tmp_path.glob(".*.tmp"))


def test_matrix_cache_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.amat"
    bad.write_bytes(b"hello")
    with pytest.raises(TrapIOError):
        formats.read_matrix(bad)
    with pytest.raises(TrapIOError):
        formats.read_matrix(tmp_path / "absent.amat")


def test_matrix_cache_truncated(A, tmp_path):
    path = tmp_path / "a.amat"
    formats.write_matrix(A, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(TrapIOError):
        formats.read_matrix(path)


def test_cached_matrix_hits(small_trap, tmp_path):
    from trapwave.geometry import trap_grid

    grid = trap_grid(small_trap)
    A1, p1 = formats.cached_matrix(small_trap.config, grid, tmp_path)
    stamp = p1.stat().st_mtime_ns
    A2, p2 = formats.cached_matrix(small_trap.config, grid, tmp_path)
    assert p1 == p2 and p2.stat().st_mtime_ns == stamp
    assert A1.values.tobytes() == A2.values.tobytes()


def test_voltage_and_target_round_trip(A, tmp_path):
    v = VoltageSet(np.random.default_rng(1).uniform(-10, 10, 64), 0.125)
    formats.write_voltages(v, tmp_path / "v.csv")
    assert np.array_equal(formats.read_voltages(tmp_path / "v.csv").volts, v.volts)
    t = target_well(4.0e-3, 2 * math.pi * 1.4e6, CA40, 80e-6, A.grid)
    formats.write_target(t, A.grid, tmp_path / "t.csv")
    back = formats.read_target(tmp_path / "t.csv", A.grid)
    assert np.array_equal(back.window, t.window)
    assert np.array_equal(back.values[t.window], t.values[t.window])


def test_waveform_round_trip_gives_identical_report(constant_waveform, A, tmp_path):
    w = Waveform(constant_waveform.frames[:6], 5e-6, 3.3e-3, profile=constant_waveform.profile)
    path = tmp_path / "w.csv"
    formats.write_waveform(w, path)
    back = formats.read_waveform(path)
    assert back.voltages.tobytes() == w.voltages.tobytes()
    assert back.profile == w.profile and back.species == w.species
    assert probe_scan(back, A).rows == probe_scan(w, A).rows


def test_dac_round_trip(constant_waveform, tmp_path):
    w = constant_waveform
    formats.write_dac(w, tmp_path / "d.csv", 16)
    decoded, frames = formats.read_dac(tmp_path / "d.csv")
    assert np.array_equal(frames[5].codes, quantize(w.frames[5].voltages, 16, 10.0).codes)
    assert np.abs(decoded.voltages - w.voltages).max() <= 20 / 2**16 / 2 * (1 + 1e-9)


def test_report_round_trip(constant_waveform, A, tmp_path):
    report = probe_scan(Waveform(constant_waveform.frames[:3], 5e-6, 3.3e-3), A)
    formats.write_report(report, tmp_path / "r.csv")
    assert formats.read_report(tmp_path / "r.csv").rows == report.rows


def test_run_id_is_reproducible(tmp_path):
    f = tmp_path / "in.txt"
    f.write_text("x")
    a = formats.run_id("waveform", {"freq": 1.0}, {"cfg": f})
    assert a == formats.run_id("waveform", {"freq": 1.0}, {"cfg": f})
    assert a != formats.run_id("waveform", {"freq": 2.0}, {"cfg": f})
    f.write_text("y")
    assert a != formats.run_id("waveform", {"freq": 1.0}, {"cfg": f})


def test_cli_describe(capsys, tmp_path):
    cfg = tmp_path / "trap.yaml"
    cfg.write_text("segment_count_per_wing: 3\n")
    assert main(["describe", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "electrodes=6" in out
    assert out.count("\n") == 3 + 6


def test_cli_missing_config_is_io_error(capsys, tmp_path):
    missing = tmp_path / "nope.yaml"
    assert main(["describe", "--config", str(missing)]) == 5
    assert str(missing) in capsys.readouterr().err


def test_cli_bad_config_is_config_error(capsys, tmp_path):
    cfg = tmp_path / "trap.yaml"
    cfg.write_text("segment_width: 250\n")
    assert main(["describe", "--config", str(cfg)]) == 2
    assert "segment_width" in capsys.readouterr().err


def test_cli_infeasible_frequency(env, tmp_path):
    code = main(["waveform", "--from", "4 mm", "--to", "4.01 mm", "--freq", "100 MHz", "--out", str(tmp_path / "w.csv")])
    assert code == 4
    assert not (tmp_path / "w.csv").exists()


def test_cli_end_to_end(env, tmp_path, capsys):
    w, r, svg, dac = (tmp_path / n for n in ("w.csv", "r.csv", "r.svg", "d.csv"))
    assert main(["waveform", "--from", "4 mm", "--to", "4.2 mm", "--mod-amplitude", "0.05", "--out", str(w), "--dac", str(dac)]) == 0
    assert main(["probe", "--waveform", str(w), "--out", str(r), "--plot", str(svg)]) == 0
    assert main(["export", "--waveform", str(w), "--out", str(tmp_path / "d2.csv")]) == 0
    report = formats.read_report(r)
    assert len(report.rows) == 41 and report.summary()["failed"] == 0
    assert report.summary()["mean_dev_curvature"] < 1e-3
    assert svg.read_text().lstrip().startswith("<?xml")
    codes_a = [f.codes for f in formats.read_dac(dac)[1]]
    codes_b = [f.codes for f in formats.read_dac(tmp_path / "d2.csv")[1]]
    assert all(np.array_equal(a, b) for a, b in zip(codes_a, codes_b)) and len(codes_a) == 41
    manifest = json.loads((tmp_path / "r.csv.manifest.json").read_text())
    assert manifest["outputs"]["report"]["sha256"] == formats.file_digest(r)
    assert f"# run_id={manifest['run_id']}" in r.read_text()
    assert manifest["inputs"]["waveform"]["sha256"] == formats.file_digest(w)


def test_cli_manifest_reproducible(env, tmp_path):
    digests = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert main(["waveform", "--from", "4 mm", "--to", "4.02 mm", "--out", str(out)]) == 0
        digests.append(formats.file_digest(out))
    assert digests[0] == digests[1]


def test_cli_fields_and_solve(env, tmp_path):
    cfg = tmp_path / "trap.yaml"
    cfg.write_text("segment_count_per_wing: 8\n")
    amat = tmp_path / "a.amat"
    assert main(["fields", "--config", str(cfg), "--out", str(amat)]) == 0
    A = formats.read_matrix(amat)
    t = target_well(1.0e-3, 2 * math.pi * 1.4e6, CA40, 80e-6, A.grid)
    formats.write_target(t, A.grid, tmp_path / "t.csv")
    out = tmp_path / "v.csv"
    assert main(["solve", "--matrix", str(amat), "--target", str(tmp_path / "t.csv"), "--out", str(out)]) == 0
    v = formats.read_voltages(out)
    assert v.volts.shape == (16,) and np.abs(v.volts).max() <= 10.0
    assert main(["solve", "--matrix", str(amat), "--target", str(tmp_path / "t.csv"), "--alpha", "x", "--out", str(out)]) == 2


def test_cli_check_command(capsys):
    assert main(["check", "--seed", "3", "--count", "20"]) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "trapwave", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "trapwave" in proc.stdout
