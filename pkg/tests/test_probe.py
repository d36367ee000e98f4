import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.constants import hbar

from trapwave.dynamics import SplineField
from trapwave.errors import ArgumentError, BoundaryError, EscapeError, NonConfiningError
from trapwave.fields import superpose
from trapwave.geometry import axial_grid
from trapwave.probe import (
    AxialPotential,
    curvature_frequency,
    find_minimum,
    oscillation_frequency,
    probe_scan,
    shift_by_correlation,
    transport_energy_gain,
)
from trapwave.waveform import CA40, Waveform

OMEGA = 2 * math.pi * 1.4e6


def quadratic_well(omega=OMEGA, z0=0.0, half=50e-6, step=5e-6):
    grid = axial_grid(-half, half, step)
    return AxialPotential(0.5 * CA40.curvature(omega) * (grid.z - z0) ** 2, grid)


@given(st.floats(1.5, 7.5))
def test_parabola_vertex_is_exact(z0):
    grid = axial_grid(0.0, 10.0, 1.0)
    phi = AxialPotential(3.0 * (grid.z - z0) ** 2 + 1.0, grid)
    assert find_minimum(phi) == pytest.approx(z0, abs=1e-12)


def test_parabola_vertex_on_sample():
    grid = axial_grid(0.0, 10.0, 1.0)
    assert find_minimum(AxialPotential((grid.z - 2.0) ** 2, grid)) == pytest.approx(2.0, abs=1e-12)


def test_ramp_has_no_interior_minimum():
    grid = axial_grid(0.0, 10.0, 1.0)
    with pytest.raises(BoundaryError):
        find_minimum(AxialPotential(grid.z.copy(), grid))


def test_double_well():
    grid = axial_grid(-2.0, 2.0, 0.05)
    z = grid.z
    symmetric = AxialPotential((z * z - 1.0) ** 2, grid)
    # equal depths: the smaller z wins
    assert find_minimum(symmetric) == pytest.approx(-1.0, abs=5e-3)
    tilted = AxialPotential((z * z - 1.0) ** 2 - 0.1 * z, grid)
    assert find_minimum(tilted) > 0.9


def test_curvature_frequency_exact_quadratic():
    phi = quadratic_well(z0=3.3e-6)
    assert curvature_frequency(phi, find_minimum(phi), CA40) == pytest.approx(OMEGA, rel=1e-9)


def test_curvature_3p21e7_is_about_1p4_mhz():
    grid = axial_grid(-50e-6, 50e-6, 5e-6)
    phi = AxialPotential(0.5 * 3.21e7 * grid.z**2, grid)
    assert curvature_frequency(phi, 0.0, CA40) / (2 * math.pi) == pytest.approx(1.4e6, rel=1e-3)


def test_curvature_errors():
    phi = quadratic_well()
    inverted = AxialPotential(-phi.values, phi.grid)
    with pytest.raises(NonConfiningError):
        curvature_frequency(inverted, 0.0, CA40)
    with pytest.raises(ArgumentError):
        curvature_frequency(phi, 0.0, CA40, fit_window=6)


def test_oscillation_frequency_exact_quadratic():
    phi = quadratic_well()
    assert abs(oscillation_frequency(phi, CA40) - OMEGA) / OMEGA <= 1e-6


def test_oscillation_time_step_convergence():
    phi = quadratic_well(z0=1.2e-6)
    coarse = oscillation_frequency(phi, CA40)
    fine = oscillation_frequency(phi, CA40, steps_per_radian=400)
    assert abs(fine - coarse) / fine < 1e-8


def test_oscillation_needs_20_periods():
    with pytest.raises(ArgumentError):
        oscillation_frequency(quadratic_well(), CA40, duration=10 * 2 * math.pi / OMEGA)


def test_escape():
    # a z^2 - b z^4 has its barrier at 10 um; released at 11 um the ion rolls off the grid
    grid = axial_grid(-20e-6, 20e-6, 0.5e-6)
    a = 0.5 * CA40.curvature(OMEGA)
    phi = AxialPotential(a * grid.z**2 - a / (2 * (10e-6) ** 2) * grid.z**4, grid)
    with pytest.raises(EscapeError):
        oscillation_frequency(phi, CA40, amplitude=11e-6, search=(-5e-6, 5e-6))


def test_energy_drift_over_1000_periods():
    phi = quadratic_well()
    field = SplineField(phi.grid, phi.values)
    dt = 1.0 / (200 * OMEGA)
    per_period = int(round(2 * math.pi / (OMEGA * dt)))
    n = 1001 * per_period
    zs, vs = field.run(CA40, 100e-9, 0.0, dt, n, record=True)
    e = field.energy(CA40, zs, vs)[: 1001 * per_period]
    averaged = e.reshape(1001, per_period).mean(axis=1)
    assert abs(averaged[-1] - averaged[0]) / averaged[0] <= 1e-6
    assert abs(e[-1] - e[0]) / e[0] <= 1e-4  # bounded per-step oscillation


def test_constant_scan(constant_waveform, A):
    report = probe_scan(constant_waveform, A)
    s = report.summary()
    assert s["rows"] == 201 and s["failed"] == 0
    assert s["mean_dev_curvature"] <= 1e-3
    assert s["max_disagreement"] <= 5e-3
    assert np.all(report.column("deviation") >= 0)
    assert s["mean_deviation"] == pytest.approx(np.mean(report.column("deviation")), rel=1e-12)
    assert np.allclose(report.column("uncertainty"), 0.006 * report.column("omega_measured"))


def test_modulated_scan_tracks_profile(modulated_waveform, A):
    report = probe_scan(modulated_waveform, A)
    target = report.column("omega_target")
    measured = report.column("omega_dynamics")
    assert np.corrcoef(target - target.mean(), measured - measured.mean())[0, 1] > 0.99
    assert report.summary()["max_disagreement"] <= 5e-3


def test_identical_frames_identical_rows(constant_waveform, A):
    w = Waveform((constant_waveform.frames[7],) * 3, 5e-6, 3.3e-3)
    rows = probe_scan(w, A).rows
    assert rows[0] == rows[1] == rows[2]


def test_scan_is_deterministic(constant_waveform, A):
    w = Waveform(constant_waveform.frames[:5], 5e-6, 3.3e-3)
    assert list(probe_scan(w, A).records()) == list(probe_scan(w, A).records())


def test_failed_frames_are_marked(constant_waveform, A):
    f = constant_waveform.frames[0]
    flat = type(f)(f.z, f.omega, type(f.voltages)(np.zeros(64)), f.alpha)
    report = probe_scan(Waveform((f, flat, f), 5e-6, 3.3e-3), A)
    assert [r.status == "ok" for r in report.rows] == [True, False, True]
    assert report.summary()["failed"] == 1
    assert math.isfinite(report.mean_deviation)


def test_probe_method_validation(constant_waveform, A):
    w = Waveform(constant_waveform.frames[:1], 5e-6, 3.3e-3)
    assert math.isnan(probe_scan(w, A, method="curvature").rows[0].omega_dynamics)
    with pytest.raises(ArgumentError):
        probe_scan(w, A, method="bogus")


def test_static_waveform_gains_nothing(constant_waveform, A):
    f = constant_waveform.frames[0]
    w = Waveform((f, f, f), 5e-6, 1e-5)
    gain = transport_energy_gain(w, A)
    phi = superpose(A, f.voltages)
    depth = CA40.charge * (np.interp(f.z + 40e-6, A.grid.z, phi.values) - np.interp(f.z, A.grid.z, phi.values))
    assert abs(gain) <= 1e-9 * depth


def test_slow_transport_is_adiabatic(constant_waveform, A):
    # a harmonic well dragged at constant speed u leaves at most 2 m u^2 behind
    w = Waveform(constant_waveform.frames[:2], 5e-6, 3.3e-3)
    quantum = hbar * OMEGA
    gains = []
    for period in (3.3e-3, 33e-3):
        gain = transport_energy_gain(w, A, frame_period=period)
        u = 5e-6 / period
        assert 0 <= gain <= 2 * CA40.mass * u**2 * 1.05
        assert gain < 1e-3 * quantum
        gains.append(gain)
    assert gains[1] < gains[0]


def test_fast_transport_gain_grows_as_period_shrinks(constant_waveform, A):
    w = Waveform(constant_waveform.frames[:3], 5e-6, 3.3e-3)
    t_osc = 2 * math.pi / OMEGA
    gains = [transport_energy_gain(w, A, frame_period=x * t_osc) for x in (0.4, 0.3, 0.2, 0.1, 0.05, 0.02)]
    assert all(b > a for a, b in zip(gains, gains[1:]))


def test_transport_needs_positive_period(constant_waveform, A):
    with pytest.raises(ArgumentError):
        transport_energy_gain(constant_waveform, A, frame_period=0.0)


@given(st.floats(-40e-6, 40e-6))
def test_shift_by_correlation_recovers_known_lag(shift):
    z = np.arange(0, 2e-3, 5e-6)
    y = np.sin(2 * np.pi * z / 280e-6)
    y_shifted = np.sin(2 * np.pi * (z - shift) / 280e-6)
    assert shift_by_correlation(z, y, z, y_shifted) == pytest.approx(shift, abs=0.5e-6)
