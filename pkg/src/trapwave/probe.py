"""Virtual single-ion probe of axial trap frequencies.

The spectroscopic measurement is emulated: each frame's potential is probed by
a local quadratic fit (curvature estimate) and, independently, by integrating
the classical oscillation of an ion displaced from the minimum (dynamics
estimate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SplineField
from .errors import ArgumentError, BoundaryError, NonConfiningError, NumericalError, RangeError

# relative error bar attached to every probed frequency
SPECTROSCOPIC_UNCERTAINTY = 0.006
STEPS_PER_RADIAN = 200
DEFAULT_AMPLITUDE = 100e-9
DEFAULT_PERIODS = 40


@dataclass(frozen=True)
class AxialPotential:
    values: np.ndarray = field(repr=False)
    grid: object
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.grid),):
            raise ArgumentError(f"potential has {values.size} samples, grid has {len(self.grid)}")
        if not np.all(np.isfinite(values)):
            raise ArgumentError("potential has non-finite samples")
        object.__setattr__(self, "values", values)


def _index_range(phi, search):
    if search is None:
        return 0, len(phi.grid) - 1
    lo, hi = search
    z = phi.grid.z
    i0 = int(np.searchsorted(z, lo - 1e-9 * phi.grid.step, side="left"))
    i1 = int(np.searchsorted(z, hi + 1e-9 * phi.grid.step, side="right")) - 1
    i0, i1 = max(i0, 0), min(i1, len(z) - 1)
    if i1 - i0 < 2:
        raise RangeError(f"search range {search} holds fewer than 3 grid points")
    return i0, i1


def find_minimum(phi, search=None):
    """Vertex of the parabola through the lowest sample and its two neighbours.

    Ties go to the smaller z. ``search`` = (z_lo, z_hi) restricts the samples
    considered; a minimum on the edge of that range is treated like one on
    the grid boundary.
    """
    i0, i1 = _index_range(phi, search)
    y = phi.values
    j = i0 + int(np.argmin(y[i0 : i1 + 1]))
    if j == i0 or j == i1:
        raise BoundaryError(f"potential minimum at z = {phi.grid.z[j]:.6g} m is on the boundary")
    ym, y0, yp = y[j - 1], y[j], y[j + 1]
    denom = ym - 2 * y0 + yp
    if denom <= 0:
        return float(phi.grid.z[j])
    return float(phi.grid.z[j] + 0.5 * phi.grid.step * (ym - yp) / denom)


def curvature_frequency(phi, z_min, species, fit_window=7):
    """Angular frequency from a least-squares quadratic over ``fit_window`` samples around z_min."""
    if fit_window < 5 or fit_window % 2 == 0:
        raise ArgumentError(f"fit_window must be odd and >= 5, got {fit_window}")
    grid = phi.grid
    c = int(round((z_min - grid.start) / grid.step))
    half = fit_window // 2
    if c - half < 0 or c + half >= len(grid):
        raise RangeError(f"fit window around z = {z_min:.6g} m leaves the grid")
    idx = np.arange(c - half, c + half + 1)
    u = idx - c  # fit in grid units for conditioning
    c2 = np.polynomial.polynomial.polyfit(u, phi.values[idx], 2)[2] / grid.step**2
    if not c2 > 0:
        raise NonConfiningError(f"fitted curvature {c2:.4g} V/m^2 at z = {z_min:.6g} m is not confining")
    return math.sqrt(species.charge * 2 * c2 / species.mass)


def upward_crossings(t, x):
    """Linearly interpolated times where x crosses zero going up."""
    k = np.where((x[:-1] < 0) & (x[1:] >= 0))[0]
    return t[k] - x[k] * (t[k + 1] - t[k]) / (x[k + 1] - x[k])


def verlet_frequency(omega_observed, dt):
    """Undo velocity-Verlet's phase error: cos(omega_obs dt) = 1 - (omega dt)^2 / 2."""
    return 2.0 / dt * math.sin(0.5 * omega_observed * dt)


def oscillation_frequency(
    phi, species, amplitude=DEFAULT_AMPLITUDE, duration=None, search=None, steps_per_radian=STEPS_PER_RADIAN, spline_field=None
):
    """Angular frequency of a classical ion released at rest ``amplitude`` away from the minimum.

    The period is the mean spacing of same-direction zero crossings of z - z_min;
    the time step is 1 / (steps_per_radian * omega_curvature).
    """
    spline_field = spline_field or SplineField(phi.grid, phi.values)
    z_min = spline_field.minimum_near(find_minimum(phi, search))
    k = float(spline_field.potential(z_min, nu=2))
    if not k > 0:
        raise NonConfiningError(f"spline curvature {k:.4g} V/m^2 at z = {z_min:.6g} m is not confining")
    omega_est = species.omega(k)
    period_est = 2 * math.pi / omega_est
    if duration is None:
        duration = DEFAULT_PERIODS * period_est
    if duration < 20 * period_est:
        raise ArgumentError(f"duration {duration:.3g} s is shorter than 20 oscillation periods")
    dt = 1.0 / (steps_per_radian * omega_est)
    nsteps = int(math.ceil(duration / dt))
    zs, _ = spline_field.run(species, z_min + amplitude, 0.0, dt, nsteps, record=True)
    t = dt * np.arange(nsteps + 1)
    crossings = upward_crossings(t, zs - z_min)
    if crossings.size < 2:
        raise NumericalError("ion did not oscillate about the minimum")
    omega_obs = 2 * math.pi * (crossings.size - 1) / (crossings[-1] - crossings[0])
    return verlet_frequency(omega_obs, dt)


@dataclass(frozen=True)
class ProbeRow:
    z_target: float
    omega_target: float
    z_measured: float = float("nan")
    omega_curvature: float = float("nan")
    omega_dynamics: float = float("nan")
    status: str = "ok"

    @property
    def dev_curvature(self):
        return abs(self.omega_curvature - self.omega_target) / self.omega_target

    @property
    def dev_dynamics(self):
        return abs(self.omega_dynamics - self.omega_target) / self.omega_target

    @property
    def disagreement(self):
        """|omega_dynamics - omega_curvature| / omega_curvature."""
        return abs(self.omega_dynamics - self.omega_curvature) / self.omega_curvature

    @property
    def omega_measured(self):
        return self.omega_dynamics if math.isfinite(self.omega_dynamics) else self.omega_curvature

    @property
    def deviation(self):
        return abs(self.omega_measured - self.omega_target) / self.omega_target

    @property
    def uncertainty(self):
        return SPECTROSCOPIC_UNCERTAINTY * self.omega_measured


COLUMNS = (
    "z_target_m",
    "omega_target_rad_s",
    "z_measured_m",
    "omega_curvature_rad_s",
    "omega_dynamics_rad_s",
    "rel_dev_curvature",
    "rel_dev_dynamics",
    "estimator_disagreement",
    "uncertainty_rad_s",
    "status",
)


@dataclass(frozen=True)
class ProbeReport:
    rows: tuple[ProbeRow, ...]
    method: str = "both"

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def _ok(self, name):
        values = self.column(name)
        return values[np.isfinite(values)]

    def summary(self):
        out = {"rows": len(self.rows), "failed": sum(r.status != "ok" for r in self.rows)}
        for name in ("deviation", "dev_curvature", "dev_dynamics", "disagreement"):
            values = self._ok(name)
            out[f"mean_{name}"] = float(values.mean()) if values.size else float("nan")
            out[f"max_{name}"] = float(values.max()) if values.size else float("nan")
        return out

    @property
    def mean_deviation(self):
        return self.summary()["mean_deviation"]

    @property
    def max_deviation(self):
        return self.summary()["max_deviation"]

    def records(self):
        for r in self.rows:
            yield (
                r.z_target,
                r.omega_target,
                r.z_measured,
                r.omega_curvature,
                r.omega_dynamics,
                r.dev_curvature,
                r.dev_dynamics,
                r.disagreement,
                r.uncertainty,
                r.status,
            )


def probe_frame(phi, z_target, omega_target, species, method="both", fit_window=7, search_halfwidth=None,
                amplitude=DEFAULT_AMPLITUDE):
    if method not in ("curvature", "dynamics", "both"):
        raise ArgumentError(f"unknown probe method {method!r}")
    hw = search_halfwidth if search_halfwidth is not None else 10 * phi.grid.step
    search = (z_target - hw, z_target + hw)
    try:
        z_min = find_minimum(phi, search)
        w_c = curvature_frequency(phi, z_min, species, fit_window) if method != "dynamics" else float("nan")
        w_d = (
            oscillation_frequency(phi, species, amplitude, search=search) if method != "curvature" else float("nan")
        )
    except NumericalError as exc:
        return ProbeRow(z_target, omega_target, status=f"{type(exc).__name__}: {exc}")
    return ProbeRow(z_target, omega_target, z_min, w_c, w_d)


def probe_scan(waveform, A, species=None, method="both", fit_window=7, search_halfwidth=None,
               amplitude=DEFAULT_AMPLITUDE):
    """Probe every frame's potential at its target position; failed frames are kept and marked."""
    species = species or waveform.species
    if waveform.voltages.shape[1] != A.n_electrodes:
        raise ArgumentError("waveform and matrix disagree on the electrode count")
    rows = []
    for frame in waveform.frames:
        phi = AxialPotential(A.values @ frame.voltages.volts, A.grid)
        if not A.grid.start <= frame.z <= A.grid.end:
            rows.append(ProbeRow(frame.z, frame.omega, status="RangeError: frame outside grid"))
            continue
        rows.append(probe_frame(phi, frame.z, frame.omega, species, method, fit_window, search_halfwidth, amplitude))
    return ProbeReport(tuple(rows), method)


def transport_energy_gain(waveform, A, species=None, frame_period=None, steps_per_radian=STEPS_PER_RADIAN):
    """Motional energy (J) left in the final well after playing the waveform back.

    The ion starts at rest in the first frame's minimum; voltages are linearly
    interpolated between frames spaced ``frame_period`` apart.
    """
    species = species or waveform.species
    frame_period = waveform.frame_period if frame_period is None else frame_period
    if not frame_period > 0:
        raise ArgumentError(f"frame period must be positive, got {frame_period!r}")
    potentials = waveform.voltages @ A.values.T
    spline_field = SplineField(A.grid, potentials)
    last = len(spline_field) - 1
    z0 = spline_field.minimum_near(find_minimum(AxialPotential(potentials[0], A.grid), _around(waveform.frames[0].z, A)))
    z_end = spline_field.minimum_near(
        find_minimum(AxialPotential(potentials[last], A.grid), _around(waveform.frames[-1].z, A)), frame=last
    )
    k = max(float(spline_field.potential(z0, 0, nu=2)), float(spline_field.potential(z_end, last, nu=2)))
    if not k > 0:
        raise NonConfiningError("transport wells are not confining")
    dt = 1.0 / (steps_per_radian * species.omega(k))
    total = last * frame_period
    nsteps = int(math.ceil(total / dt))
    if nsteps == 0:
        return 0.0
    dt = total / nsteps
    z, v = spline_field.run(species, z0, 0.0, dt, nsteps, period=frame_period)
    e0 = 0.0  # at rest at the spline minimum of frame 0
    e1 = float(spline_field.energy(species, z, v, frame=last, reference=float(spline_field.potential(z_end, last))))
    return e1 - e0


def _around(z, A, steps=10):
    return (z - steps * A.grid.step, z + steps * A.grid.step)


def shift_by_correlation(z_a, y_a, z_b, y_b, step=None, max_lag=None):
    """Lag (m) by which profile b is shifted relative to profile a.

    Both profiles are resampled on a common uniform grid and compared by the
    Pearson correlation of their overlapping parts at every lag up to
    ``max_lag`` (default: a quarter of the overlap). A periodic pattern
    correlates equally well one period away, so among peaks within 5% of the
    best one the peak nearest zero lag is taken; it is refined with a
    three-point parabola.
    """
    z_a, y_a, z_b, y_b = (np.asarray(x, dtype=float) for x in (z_a, y_a, z_b, y_b))
    oa, ob = np.argsort(z_a), np.argsort(z_b)
    z_a, y_a, z_b, y_b = z_a[oa], y_a[oa], z_b[ob], y_b[ob]
    lo, hi = max(z_a[0], z_b[0]), min(z_a[-1], z_b[-1])
    step = step or 0.5 * np.median(np.diff(z_a))
    zz = np.arange(lo, hi, step)
    n = len(zz)
    if n < 8:
        raise ArgumentError("profiles overlap on too few points to correlate")
    a = np.interp(zz, z_a, y_a)
    b = np.interp(zz, z_b, y_b)
    max_k = n // 4 if max_lag is None else min(int(max_lag / step), n - 4)
    lags = np.arange(-max_k, max_k + 1)
    corr = np.empty(lags.size)
    for i, k in enumerate(lags):
        # b(z + k step) against a(z)
        x, y = (a[: n - k], b[k:]) if k >= 0 else (a[-k:], b[: n + k])
        x, y = x - x.mean(), y - y.mean()
        denom = math.sqrt(float(x @ x) * float(y @ y))
        corr[i] = float(x @ y) / denom if denom > 0 else 0.0
    peaks = [i for i in range(1, lags.size - 1) if corr[i] >= corr[i - 1] and corr[i] >= corr[i + 1]]
    if not peaks:
        raise NumericalError("cross-correlation has no interior peak")
    best = max(corr[i] for i in peaks)
    j = min((i for i in peaks if corr[i] >= best - 0.05 * abs(best)), key=lambda i: abs(lags[i]))
    lag = float(lags[j])
    ym, y0, yp = corr[j - 1], corr[j], corr[j + 1]
    denom = ym - 2 * y0 + yp
    if denom < 0:
        lag += 0.5 * (ym - yp) / denom
    return lag * step
