"""Shuttling waveforms: harmonic target wells, frame compilation, interpolation, DAC codes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import atomic_mass, elementary_charge

from . import probe
from .errors import ArgumentError, InfeasibleError, NumericalError, RangeError
from .geometry import build_trap
from .solver import TargetPotential, VoltageSet, continuity_apply, decompose, select_alpha, tikhonov_apply


@dataclass(frozen=True)
class Species:
    mass: float  # kg
    charge: float  # C

    def __post_init__(self):
        if not (self.mass > 0 and self.charge > 0):
            raise ArgumentError(f"species needs positive mass and charge, got {self.mass!r}, {self.charge!r}")

    def curvature(self, omega):
        """Potential curvature m omega^2 / q (V/m^2) giving angular frequency omega."""
        return self.mass * omega * omega / self.charge

    def omega(self, curvature):
        return math.sqrt(self.charge * curvature / self.mass)


CA40 = Species(40 * atomic_mass, elementary_charge)


@dataclass(frozen=True)
class FrequencyProfile:
    """omega(z) = mean * (1 + amplitude * sin(2 pi (z - origin) / period)), angular units."""

    mean: float
    amplitude: float = 0.0
    period: float = 280e-6
    origin: float = 0.0

    def __post_init__(self):
        if not self.mean > 0:
            raise ArgumentError(f"mean frequency must be positive, got {self.mean!r}")
        if not 0 <= self.amplitude < 1:
            raise ArgumentError(f"modulation amplitude must be in [0, 1), got {self.amplitude!r}")
        if not self.period > 0:
            raise ArgumentError(f"modulation period must be positive, got {self.period!r}")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        w = self.mean * (1 + self.amplitude * np.sin(2 * np.pi * (z - self.origin) / self.period))
        return float(w) if w.ndim == 0 else w

    def to_dict(self):
        return {"mean": self.mean, "amplitude": self.amplitude, "period": self.period, "origin": self.origin}


@dataclass(frozen=True)
class WaveformConstraints:
    v_max: float = 10.0
    window: float = 80e-6
    frame_spacing: float = 5e-6
    frame_period: float = 3.3e-3
    # None: search the alpha ladder per frame; a number: use it for every frame
    alpha: float | None = None
    # False: every frame solved with v_prev = 0
    continuity: bool = True
    # electrodes farther than history_radius from the well have their reference voltage scaled by
    # history_decay each frame; None keeps the previous frame verbatim (stale far voltages then
    # accumulate in the unconstrained directions and long transports run into the rails)
    history_radius: float | None = 0.5e-3
    history_decay: float = 0.9
    # realized frequency must be this close (relative) to the target, else the frame is infeasible
    frequency_tolerance: float = 0.05
    refine_alpha: bool = False
    # the top DAC code sits one lsb below +v_max, so frames are held lsb/2 inside the rails
    dac_bits: int | None = 16

    @property
    def voltage_limit(self):
        if self.dac_bits is None:
            return self.v_max
        return self.v_max - 0.5 * dac_lsb(self.dac_bits, self.v_max)


FAST_FRAME_PERIOD = 4e-6


@dataclass(frozen=True)
class Frame:
    z: float
    omega: float
    voltages: VoltageSet
    alpha: float
    residual: float = float("nan")


@dataclass(frozen=True)
class Waveform:
    frames: tuple[Frame, ...]
    frame_spacing: float
    frame_period: float
    species: Species = CA40
    profile: FrequencyProfile | None = None
    config_hash: str = ""
    v_max: float = 10.0

    def __len__(self):
        return len(self.frames)

    @property
    def positions(self):
        return np.array([f.z for f in self.frames])

    @property
    def voltages(self):
        """(K, N) array of frame voltages."""
        return np.array([f.voltages.volts for f in self.frames])

    @property
    def times(self):
        return self.frame_period * np.arange(len(self.frames))

    def reversed(self):
        return replace(self, frames=tuple(reversed(self.frames)))


def target_well(z_c, omega, species, window, grid):
    """Harmonic target phi = curvature/2 (z - z_c)^2 on the grid rows within window/2 of z_c."""
    if not grid.start <= z_c <= grid.end:
        raise RangeError(f"well center {z_c!r} m outside grid [{grid.start}, {grid.end}]")
    rows = np.where(np.abs(grid.z - z_c) <= 0.5 * window * (1 + 1e-12))[0]
    if rows.size < 7:
        raise ArgumentError(f"target window {window!r} m covers only {rows.size} grid points (need >= 7)")
    values = np.full(len(grid), np.nan)
    values[rows] = 0.5 * species.curvature(omega) * (grid.z[rows] - z_c) ** 2
    return TargetPotential(values, rows)


def frame_positions(z_start, z_end, spacing):
    """Ladder from z_start toward z_end in steps of ``spacing``; the last step may be shorter."""
    if not spacing > 0:
        raise ArgumentError(f"frame spacing must be positive, got {spacing!r}")
    span = abs(z_end - z_start)
    sign = 1.0 if z_end >= z_start else -1.0
    n = int(math.floor(span / spacing + 1e-9))
    zs = [z_start + sign * k * spacing for k in range(n + 1)]
    if abs(zs[-1] - z_end) > 1e-9 * spacing:
        zs.append(z_end)
    else:
        zs[-1] = z_end
    return zs


def _solve_frame(A, target, v_prev, constraints):
    f = decompose(A, rows=target.window)
    if constraints.alpha is None:
        alpha, v = select_alpha(f, target, v_prev, constraints.voltage_limit, refine=constraints.refine_alpha)
    else:
        alpha = float(constraints.alpha)
        v = continuity_apply(f, target, alpha, v_prev) if alpha > 0 else tikhonov_apply(f, target, alpha)
        if v.max_abs > constraints.voltage_limit * (1 + 1e-12):
            raise InfeasibleError(f"fixed alpha {alpha:g} gives max |V| = {v.max_abs:.4g} V", best={"alpha": alpha})
    rows = target.window
    residual = float(np.linalg.norm(A.values[rows] @ v.volts - target.values[rows]))
    return alpha, v, residual


def _check_realized(A, z, omega, volts, species, tolerance):
    phi = probe.AxialPotential(A.values @ volts, A.grid)
    step = A.grid.step
    try:
        z_min = probe.find_minimum(phi, search=(z - 3 * step, z + 3 * step))
        w = probe.curvature_frequency(phi, z_min, species)
    except NumericalError as exc:
        return f"no confining well near the target ({exc})"
    if abs(z_min - z) > step:
        return f"well minimum at {z_min:.6g} m, more than one grid step away"
    if abs(w - omega) > tolerance * omega:
        return f"realized frequency {w / (2 * np.pi):.6g} Hz vs target {omega / (2 * np.pi):.6g} Hz"
    return None


def compile_waveform(A, z_start, z_end, profile, species=CA40, constraints=None):
    """Solve one voltage frame per ladder position, each seeded with the previous frame's voltages.

    The seed keeps the previous voltages on electrodes near the well and lets
    far electrodes relax toward 0 V (see WaveformConstraints.history_radius).
    """
    constraints = constraints or WaveformConstraints()
    grid = A.grid
    half = 0.5 * constraints.window
    for name, z in (("z_start", z_start), ("z_end", z_end)):
        if z - half < grid.start or z + half > grid.end:
            raise RangeError(f"{name} = {z!r} m: the {constraints.window} m window does not fit in the grid")
    if not 0 <= constraints.history_decay <= 1:
        raise ArgumentError(f"history_decay must be in [0, 1], got {constraints.history_decay!r}")
    centers = np.array([e.center_z for e in build_trap(A.config).electrodes])
    v_prev = np.zeros(A.n_electrodes)
    frames = []
    for z in frame_positions(z_start, z_end, constraints.frame_spacing):
        omega = profile(z)
        target = target_well(z, omega, species, constraints.window, grid)
        if not constraints.continuity:
            seed = np.zeros(A.n_electrodes)
        elif constraints.history_radius is None:
            seed = v_prev
        else:
            seed = np.where(np.abs(centers - z) > constraints.history_radius, constraints.history_decay * v_prev, v_prev)
        try:
            alpha, v, residual = _solve_frame(A, target, seed, constraints)
        except InfeasibleError as exc:
            raise InfeasibleError(f"frame at z = {z!r} m: {exc}", best=exc.best) from exc
        problem = _check_realized(A, z, omega, v.volts, species, constraints.frequency_tolerance)
        if problem:
            raise InfeasibleError(f"frame at z = {z!r} m: {problem} (alpha = {alpha:.3g})", best={"alpha": alpha})
        frames.append(Frame(float(z), float(omega), v, alpha, residual))
        v_prev = v.volts
    return Waveform(
        tuple(frames),
        constraints.frame_spacing,
        constraints.frame_period,
        species,
        profile,
        A.digest(),
        constraints.v_max,
    )


def interpolate(w, z):
    """Per-channel linear interpolation between the two frames bracketing z."""
    zs = w.positions
    order = np.argsort(zs, kind="stable")
    zs = zs[order]
    if not zs[0] <= z <= zs[-1]:
        raise RangeError(f"z = {z!r} m outside waveform range [{zs[0]}, {zs[-1]}]")
    V = w.voltages[order]
    k = int(np.searchsorted(zs, z, side="right")) - 1
    if k >= len(zs) - 1 or zs[k] == z:
        return VoltageSet(V[min(k, len(zs) - 1)].copy())
    t = (z - zs[k]) / (zs[k + 1] - zs[k])
    return VoltageSet((1 - t) * V[k] + t * V[k + 1])


@dataclass(frozen=True)
class DacFrame:
    codes: np.ndarray = field(repr=False)
    lsb: float
    v_max: float

    def decode(self):
        return self.codes * self.lsb - self.v_max


def dac_lsb(bits, v_max):
    return 2.0 * v_max / 2**bits


def quantize(v, bits, v_max):
    """Offset-binary codes: round((v + v_max) / lsb), clamped to the code range."""
    volts = np.asarray(getattr(v, "volts", v), dtype=float)
    lsb = dac_lsb(bits, v_max)
    codes = np.clip(np.rint((volts + v_max) / lsb), 0, 2**bits - 1).astype(np.int64)
    return DacFrame(codes, lsb, v_max)
