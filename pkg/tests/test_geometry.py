import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trapwave.errors import ArgumentError, ConfigError, TrapIOError
from trapwave.geometry import (
    TrapConfig,
    axial_grid,
    build_trap,
    config_from_mapping,
    load_config,
    parse_length,
)


def test_default_trap_has_64_electrodes_at_280um_pitch(trap):
    assert trap.n_electrodes == 64
    top = [e.center_z for e in trap.electrodes if e.wing == "top"]
    assert np.allclose(np.diff(top), 280e-6, rtol=0, atol=1e-15)


def test_single_segment_trap():
    assert build_trap(TrapConfig(segment_count_per_wing=1)).n_electrodes == 2


def test_wing_offset_shifts_second_wing_only():
    base = build_trap(TrapConfig())
    shifted = build_trap(TrapConfig(wing_offset=15e-6))
    n = 32
    for a, b in zip(base.electrodes, shifted.electrodes):
        expected = 15e-6 if a.index > n else 0.0
        assert b.center_z - a.center_z == pytest.approx(expected, abs=1e-18)


@given(
    n=st.integers(1, 6),
    nx=st.integers(1, 3),
    nz=st.integers(1, 3),
    gap=st.floats(0, 100e-6),
)
def test_panel_count_matches_config(n, nx, nz, gap):
    trap = build_trap(TrapConfig(segment_count_per_wing=n, segment_gap=gap, panels_per_electrode=(nx, nz)))
    assert trap.n_electrodes == 2 * n
    assert trap.panels.shape == (2 * n * nx * nz, 5)


def test_panels_of_distinct_electrodes_do_not_overlap(trap):
    p = trap.panels
    owner = trap.panel_owner
    same_plane = p[:, None, 4] == p[None, :, 4]
    overlap_x = (p[:, None, 0] < p[None, :, 1]) & (p[None, :, 0] < p[:, None, 1])
    overlap_z = (p[:, None, 2] < p[None, :, 3]) & (p[None, :, 2] < p[:, None, 3])
    clash = same_plane & overlap_x & overlap_z & (owner[:, None] != owner[None, :])
    assert not clash.any()


def test_build_is_deterministic():
    a = build_trap(TrapConfig())
    b = build_trap(TrapConfig())
    assert a.panels.tobytes() == b.panels.tobytes()
    assert TrapConfig().digest() == TrapConfig().digest()


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"segment_width": 0.0}, "segment_width"),
        ({"segment_gap": -1e-6}, "segment_gap"),
        ({"electrode_to_axis_distance": 0.0}, "electrode_to_axis_distance"),
        ({"v_max": 0.0}, "v_max"),
        ({"dac_bits": 0}, "dac_bits"),
        ({"panels_per_electrode": (0, 2)}, "panels_per_electrode"),
    ],
)
def test_invalid_config_names_field(kwargs, field):
    with pytest.raises(ConfigError) as info:
        TrapConfig(**kwargs)
    assert info.value.field == field
    assert field in str(info.value)


def test_grid_examples():
    assert len(axial_grid(0.0, 100e-6, 5e-6)) == 21
    assert len(axial_grid(0.0, 8.93e-3, 5e-6)) == 1787
    with pytest.raises(ArgumentError):
        axial_grid(0.0, 10e-6, 20e-6)
    with pytest.raises(ArgumentError):
        axial_grid(0.0, 1e-3, 0.0)


def test_trap_grid_spans_electrodes(trap, grid):
    assert len(grid) == 1787
    assert grid.end - grid.start == pytest.approx(32 * 280e-6 - 30e-6, rel=1e-12)


@given(
    start=st.floats(-1e-2, 1e-2),
    span=st.floats(1e-5, 1e-2),
    step=st.floats(1e-7, 1e-5),
)
def test_grid_is_uniform(start, span, step):
    g = axial_grid(start, start + span, step)
    assert len(g) == int(np.floor(span / step + 1e-9)) + 1
    dz = np.diff(g.z)
    assert np.all(dz > 0)
    assert np.max(np.abs(dz - step)) <= 1e-9 * step


def test_units_are_mandatory():
    assert parse_length("250 um") == pytest.approx(250e-6)
    assert parse_length("1.5mm") == pytest.approx(1.5e-3)
    for bad in (250, "250", "250 furlongs"):
        with pytest.raises(ConfigError):
            parse_length(bad)


def test_config_mapping():
    cfg = config_from_mapping({"segment_width": "200 um", "v_max": "5 V", "panels_per_electrode": [2, 3]})
    assert cfg.segment_width == pytest.approx(200e-6)
    assert cfg.v_max == 5.0
    assert cfg.panels_per_electrode == (2, 3)
    with pytest.raises(ConfigError) as info:
        config_from_mapping({"segment_widht": "200 um"})
    assert info.value.field == "segment_widht"


def test_load_config(tmp_path):
    path = tmp_path / "trap.yaml"
    path.write_text("segment_count_per_wing: 4\nwing_offset: 15 um\n")
    cfg = load_config(path)
    assert cfg.segment_count_per_wing == 4
    assert cfg.wing_offset == pytest.approx(15e-6)
    with pytest.raises(TrapIOError) as info:
        load_config(tmp_path / "missing.yaml")
    assert "missing.yaml" in str(info.value)
