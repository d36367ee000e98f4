"""Segmented trap geometry and the axial evaluation grid.

Two wings of flat rectangular electrodes face the trap axis (the z axis) from
y = +d and y = -d. Wing 1 holds electrodes 1..n, wing 2 holds n+1..2n; the
second wing can be shifted axially by ``wing_offset`` to model a layer
misalignment. All lengths are SI meters internally.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError, ConfigError, TrapIOError

_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9}
_VOLTAGE_UNITS = {"V": 1.0, "mV": 1e-3, "kV": 1e3}
_QUANTITY = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([^\s\d].*?)\s*$")


def parse_quantity(text, units, name="value"):
    """Parse ``"250 um"`` style strings into SI floats. The unit is mandatory."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        raise ConfigError(f"{name}: unit suffix is required (got bare number {text!r})", field=name)
    m = _QUANTITY.match(str(text))
    if not m or m.group(2) not in units:
        raise ConfigError(
            f"{name}: cannot parse {text!r}; expected a number followed by one of {sorted(units)}",
            field=name,
        )
    return float(m.group(1)) * units[m.group(2)]


def parse_length(text, name="length"):
    return parse_quantity(text, _LENGTH_UNITS, name)


def parse_voltage(text, name="voltage"):
    return parse_quantity(text, _VOLTAGE_UNITS, name)


@dataclass(frozen=True)
class TrapConfig:
    segment_count_per_wing: int = 32
    segment_width: float = 250e-6
    segment_gap: float = 30e-6
    wing_offset: float = 0.0
    # transverse extent of each electrode face (along x)
    electrode_height: float = 1e-3
    # illustrative default; the real trap's value is not published
    electrode_to_axis_distance: float = 250e-6
    v_max: float = 10.0
    dac_bits: int = 16
    # (transverse, axial) panel subdivision of each electrode
    panels_per_electrode: tuple[int, int] = (4, 4)

    def __post_init__(self):
        object.__setattr__(self, "panels_per_electrode", tuple(int(p) for p in self.panels_per_electrode))
        self.validate()

    def validate(self):
        checks = [
            ("segment_count_per_wing", self.segment_count_per_wing >= 1),
            ("segment_width", self.segment_width > 0),
            ("segment_gap", self.segment_gap >= 0),
            ("electrode_height", self.electrode_height > 0),
            ("electrode_to_axis_distance", self.electrode_to_axis_distance > 0),
            ("v_max", self.v_max > 0),
            ("dac_bits", self.dac_bits >= 1),
            ("panels_per_electrode", len(self.panels_per_electrode) == 2 and min(self.panels_per_electrode) >= 1),
        ]
        for name, ok in checks:
            value = getattr(self, name)
            if not ok or (isinstance(value, float) and not math.isfinite(value)):
                raise ConfigError(f"invalid {name}: {value!r}", field=name)
        # an offset as large as the pitch would make the wings' panels collide in projection only,
        # which is harmless, but a non-finite one is not
        if not math.isfinite(self.wing_offset):
            raise ConfigError(f"invalid wing_offset: {self.wing_offset!r}", field="wing_offset")

    @property
    def pitch(self):
        return self.segment_width + self.segment_gap

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["panels_per_electrode"] = list(self.panels_per_electrode)
        return d

    def digest(self):
        """sha256 over a canonical JSON form; floats via repr so equal configs hash equal."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_LENGTH_FIELDS = ("segment_width", "segment_gap", "wing_offset", "electrode_height", "electrode_to_axis_distance")


def config_from_mapping(data):
    """Build a TrapConfig from a key/value mapping with unit-suffixed quantities."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values")
    known = {f.name for f in dataclasses.fields(TrapConfig)}
    unknown = set(data) - known
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(f"unknown config key {name!r}", field=name)
    kwargs = {}
    for key, value in data.items():
        if key in _LENGTH_FIELDS:
            kwargs[key] = parse_length(value, key)
        elif key == "v_max":
            kwargs[key] = parse_voltage(value, key)
        elif key in ("segment_count_per_wing", "dac_bits"):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key} must be an integer, got {value!r}", field=key)
            kwargs[key] = value
        elif key == "panels_per_electrode":
            if not isinstance(value, (list, tuple)) or len(value) != 2 or not all(isinstance(v, int) for v in value):
                raise ConfigError(f"{key} must be a pair of integers, got {value!r}", field=key)
            kwargs[key] = tuple(value)
    return TrapConfig(**kwargs)


def load_config(path):
    """Read a YAML config file (see README for the schema)."""
    import yaml

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TrapIOError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return config_from_mapping(data)


@dataclass(frozen=True)
class Electrode:
    index: int  # 1-based
    wing: str
    center_z: float
    # (n_panels, 5) rows of [x1, x2, z1, z2, y]
    panels: np.ndarray = field(repr=False)

    def panel_corners(self):
        """Corner coordinates, shape (n_panels, 4, 3)."""
        x1, x2, z1, z2, y = self.panels.T
        corners = [(x1, z1), (x2, z1), (x2, z2), (x1, z2)]
        return np.stack([np.stack([cx, y, cz], axis=-1) for cx, cz in corners], axis=1)


@dataclass(frozen=True)
class TrapModel:
    config: TrapConfig
    electrodes: tuple[Electrode, ...]

    @property
    def n_electrodes(self):
        return len(self.electrodes)

    @property
    def panels(self):
        """All panels stacked, shape (P, 5), electrode-major order."""
        return np.concatenate([e.panels for e in self.electrodes])

    @property
    def panel_owner(self):
        """0-based electrode index of every row of ``panels``."""
        return np.concatenate([np.full(len(e.panels), e.index - 1) for e in self.electrodes])

    @property
    def z_extent(self):
        lo = min(e.panels[:, 2].min() for e in self.electrodes)
        hi = max(e.panels[:, 3].max() for e in self.electrodes)
        return lo, hi

    @property
    def center_z(self):
        lo, hi = self.z_extent
        return 0.5 * (lo + hi)


def build_trap(config):
    """Lay out both wings of electrodes and tile each face with panels."""
    config.validate()
    n = config.segment_count_per_wing
    nx, nz = config.panels_per_electrode
    d = config.electrode_to_axis_distance
    half_h = 0.5 * config.electrode_height
    xs = np.linspace(-half_h, half_h, nx + 1)
    electrodes = []
    for wing, y0, shift in (("top", d, 0.0), ("bottom", -d, config.wing_offset)):
        for i in range(n):
            c = i * config.pitch + shift
            zs = np.linspace(c - 0.5 * config.segment_width, c + 0.5 * config.segment_width, nz + 1)
            panels = np.array(
                [(xs[a], xs[a + 1], zs[b], zs[b + 1], y0) for a in range(nx) for b in range(nz)],
                dtype=float,
            )
            panels.setflags(write=False)
            electrodes.append(Electrode(len(electrodes) + 1, wing, c, panels))
    return TrapModel(config, tuple(electrodes))


@dataclass(frozen=True)
class Grid:
    z: np.ndarray = field(repr=False)
    step: float

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1 or len(z) < 2:
            raise ArgumentError("grid needs at least 2 points")
        dz = np.diff(z)
        if np.any(dz <= 0) or np.max(np.abs(dz - self.step)) > 1e-9 * self.step:
            raise ArgumentError("grid must be strictly increasing with uniform spacing")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def __len__(self):
        return len(self.z)

    @property
    def start(self):
        return float(self.z[0])

    @property
    def end(self):
        return float(self.z[-1])

    def index_of(self, z, tol=1e-6):
        """Row index of an axial position that lies on the grid (tol in units of step)."""
        k = (z - self.start) / self.step
        i = int(round(k))
        if abs(k - i) > tol or not 0 <= i < len(self):
            raise ArgumentError(f"z = {z!r} m is not a grid point")
        return i

    def spec(self):
        return {"z_start": self.start, "step": self.step, "M": len(self)}


def axial_grid(z_start, z_end, step):
    """Uniform grid of floor((z_end - z_start)/step) + 1 points starting at z_start."""
    if not step > 0:
        raise ArgumentError(f"grid step must be positive, got {step!r}")
    if not z_start < z_end:
        raise ArgumentError(f"need z_start < z_end, got {z_start!r} >= {z_end!r}")
    # the 1e-9 guards spans that are exact multiples of step up to rounding
    m = int(math.floor((z_end - z_start) / step + 1e-9)) + 1
    if m < 2:
        raise ArgumentError(f"grid ({z_start}, {z_end}, step {step}) has fewer than 2 points")
    return Grid(z_start + step * np.arange(m), step)


def trap_grid(trap, step=5e-6):
    """Grid spanning the electrode structure from its first to its last edge."""
    lo, hi = trap.z_extent
    return axial_grid(lo, hi, step)
