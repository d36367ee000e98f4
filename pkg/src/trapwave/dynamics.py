"""Velocity-Verlet motion of one ion in sampled axial potentials.

Potentials are cubic splines on the uniform grid. A sequence of K frames is
played back with the force linearly interpolated in time between frame k at
t = k * period and frame k+1; after the last frame the last potential holds.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import EscapeError


@njit(cache=True)
def _slope(coef, k, x0, h, z):
    m = coef.shape[2]
    i = int((z - x0) / h)
    if i < 0:
        i = 0
    elif i > m - 1:
        i = m - 1
    t = z - (x0 + i * h)
    return (3.0 * coef[k, 0, i] * t + 2.0 * coef[k, 1, i]) * t + coef[k, 2, i]


@njit(cache=True)
def _accel(coef, x0, h, period, qm, z, t):
    nframes = coef.shape[0]
    if nframes == 1:
        return -qm * _slope(coef, 0, x0, h, z)
    u = t / period
    k = int(u)
    if k >= nframes - 1:
        return -qm * _slope(coef, nframes - 1, x0, h, z)
    lam = u - k
    return -qm * ((1.0 - lam) * _slope(coef, k, x0, h, z) + lam * _slope(coef, k + 1, x0, h, z))


@njit(cache=True)
def _verlet(coef, x0, h, period, qm, z, v, dt, nsteps, zs, vs):
    """Returns (z, v, step of escape or -1). Fills zs/vs when they have nsteps + 1 entries."""
    x1 = x0 + h * coef.shape[2]
    record = zs.shape[0] == nsteps + 1
    if record:
        zs[0] = z
        vs[0] = v
    a = _accel(coef, x0, h, period, qm, z, 0.0)
    for n in range(nsteps):
        v += 0.5 * dt * a
        z += dt * v
        if z < x0 or z > x1:
            return z, v, n + 1
        a = _accel(coef, x0, h, period, qm, z, (n + 1) * dt)
        v += 0.5 * dt * a
        if record:
            zs[n + 1] = z
            vs[n + 1] = v
    return z, v, -1


class SplineField:
    """Cubic-spline potentials of one or more frames on a shared uniform grid."""

    def __init__(self, grid, potentials):
        phi = np.atleast_2d(np.asarray(potentials, dtype=float))
        self.grid = grid
        self.splines = [CubicSpline(grid.z, row) for row in phi]
        self.coef = np.ascontiguousarray(np.stack([s.c for s in self.splines]))

    def __len__(self):
        return len(self.splines)

    def potential(self, z, frame=0, nu=0):
        return self.splines[frame](z, nu)

    def minimum_near(self, z_guess, frame=0):
        """Root of the spline slope bracketing z_guess within one grid step, else z_guess."""
        s = self.splines[frame]
        h = self.grid.step
        lo = max(z_guess - h, self.grid.start)
        hi = min(z_guess + h, self.grid.end)
        if s(lo, 1) < 0 < s(hi, 1):
            return brentq(lambda z: s(z, 1), lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
        return z_guess

    def run(self, species, z0, v0, dt, nsteps, period=np.inf, record=False):
        """Integrate; returns (z, v) final state, or (zs, vs) trajectories when record is set."""
        nsteps = int(nsteps)
        size = nsteps + 1 if record else 0
        zs = np.empty(size)
        vs = np.empty(size)
        qm = species.charge / species.mass
        z, v, escaped = _verlet(
            self.coef, self.grid.start, self.grid.step, float(period), qm, float(z0), float(v0), float(dt), nsteps, zs, vs
        )
        if escaped >= 0:
            raise EscapeError(f"ion left the grid at step {escaped} (z = {z:.6g} m)")
        return (zs, vs) if record else (z, v)

    def energy(self, species, z, v, frame=0, reference=0.0):
        """Kinetic plus potential energy (J), potential measured from ``reference`` (V)."""
        return 0.5 * species.mass * np.square(v) + species.charge * (self.potential(z, frame) - reference)
