"""Boundary-element electrostatics for the electrode moment functions.

Every panel carries a uniform surface charge density; the potential of such a
rectangle is evaluated in closed form, so collocation at the panel centers
needs no quadrature. One dense collocation matrix serves all electrodes: the
basis of electrode i is the charge distribution for 1 V on i, 0 V elsewhere.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.constants import epsilon_0

from .errors import ArgumentError, DegeneracyError, NumericalError, SingularityError
from .geometry import Grid, TrapConfig, TrapModel

_COULOMB = 1.0 / (4.0 * np.pi * epsilon_0)
SURFACE_TOL = 1e-12


def _corner_term(a, b, h):
    """Antiderivative of 1/sqrt(a^2 + b^2 + h^2) over a and b.

    The logs are rewritten for negative arguments to avoid cancellation in a + r.
    """
    r = np.sqrt(a * a + b * b + h * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_a = np.log(np.where(a >= 0, a + r, (b * b + h * h) / (r - a)))
        log_b = np.log(np.where(b >= 0, b + r, (a * a + h * h) / (r - b)))
        t1 = np.where(b == 0, 0.0, b * log_a)
        t2 = np.where(a == 0, 0.0, a * log_b)
        t3 = np.where(h == 0, 0.0, h * np.arctan2(a * b, h * r))
    return t1 + t2 - t3


def rectangle_kernel(points, panels):
    """Potential (V) at ``points`` (K, 3) per unit surface charge (1 C/m^2) on each panel.

    Returns shape (K, P). Panels are rows of [x1, x2, z1, z2, y] lying in planes of constant y.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    panels = np.asarray(panels, dtype=float)
    px, py, pz = (points[:, k, None] for k in range(3))
    x1, x2, z1, z2, y0 = (panels[None, :, k] for k in range(5))
    h = np.abs(py - y0)
    a1, a2 = x1 - px, x2 - px
    b1, b2 = z1 - pz, z2 - pz
    total = _corner_term(a2, b2, h) - _corner_term(a1, b2, h) - _corner_term(a2, b1, h) + _corner_term(a1, b1, h)
    return _COULOMB * total


def panel_centers(panels):
    panels = np.asarray(panels)
    return np.stack(
        [0.5 * (panels[:, 0] + panels[:, 1]), panels[:, 4], 0.5 * (panels[:, 2] + panels[:, 3])], axis=1
    )


def panel_areas(panels):
    panels = np.asarray(panels)
    return (panels[:, 1] - panels[:, 0]) * (panels[:, 3] - panels[:, 2])


class BemSystem:
    """Factorized collocation system of a trap, shared by all electrode solves."""

    def __init__(self, trap: TrapModel):
        self.trap = trap
        self.panels = trap.panels
        self.owner = trap.panel_owner
        self.centers = panel_centers(self.panels)
        self.matrix = rectangle_kernel(self.centers, self.panels)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(self.matrix, check_finite=True)
        pivots = np.abs(np.diag(lu))
        if not np.all(np.isfinite(pivots)) or pivots.min() <= 1e-13 * pivots.max():
            raise DegeneracyError("collocation matrix is singular (coincident or degenerate panels?)")
        self._lu = (lu, piv)

    def boundary_values(self, electrode_index):
        if not 1 <= electrode_index <= self.trap.n_electrodes:
            raise ArgumentError(f"electrode index {electrode_index} outside 1..{self.trap.n_electrodes}")
        return (self.owner == electrode_index - 1).astype(float)

    def solve(self, electrode_index):
        rhs = self.boundary_values(electrode_index)
        q = scipy.linalg.lu_solve(self._lu, rhs)
        if not np.all(np.isfinite(q)):
            raise NumericalError(f"non-finite panel charges for electrode {electrode_index}")
        return ChargeBasis(electrode_index, self.panels, q)

    def solve_all(self):
        """All bases at once, shape (P, N); column i-1 is electrode i."""
        rhs = (self.owner[:, None] == np.arange(self.trap.n_electrodes)[None, :]).astype(float)
        q = scipy.linalg.lu_solve(self._lu, rhs)
        if not np.all(np.isfinite(q)):
            bad = int(np.where(~np.all(np.isfinite(q), axis=0))[0][0]) + 1
            raise NumericalError(f"non-finite panel charges for electrode {bad}")
        return q


@dataclass(frozen=True)
class ChargeBasis:
    electrode_index: int
    panels: np.ndarray = field(repr=False)
    # surface charge density per panel, C/m^2 per volt applied
    charges: np.ndarray = field(repr=False)

    @property
    def total_charge(self):
        return float(np.sum(self.charges * panel_areas(self.panels)))


def solve_electrode_charges(trap, electrode_index, system=None):
    """Panel charges for 1 V on ``electrode_index`` (1-based) and 0 V on every other panel."""
    system = system or BemSystem(trap)
    return system.solve(electrode_index)


def _check_off_surface(points, panels):
    px, py, pz = (points[:, k, None] for k in range(3))
    x1, x2, z1, z2, y0 = (panels[None, :, k] for k in range(5))
    on = (
        (np.abs(py - y0) <= SURFACE_TOL)
        & (px >= x1 - SURFACE_TOL)
        & (px <= x2 + SURFACE_TOL)
        & (pz >= z1 - SURFACE_TOL)
        & (pz <= z2 + SURFACE_TOL)
    )
    if np.any(on):
        k = int(np.where(on.any(axis=1))[0][0])
        raise SingularityError(f"evaluation point {points[k].tolist()} lies on a panel surface")


def evaluate_potential(basis, point):
    """Potential (V) of a charge basis at one point (3,) or many points (K, 3)."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    _check_off_surface(pts, basis.panels)
    phi = rectangle_kernel(pts, basis.panels) @ basis.charges
    return float(phi[0]) if single else phi


def collocation_residual(system, basis):
    """max |phi - boundary value| over all collocation points of a basis."""
    phi = system.matrix @ basis.charges
    return float(np.max(np.abs(phi - system.boundary_values(basis.electrode_index))))


@dataclass(frozen=True)
class PotentialMatrix:
    """A[j, i]: potential at grid row j per volt on electrode i+1."""

    values: np.ndarray = field(repr=False)
    grid: Grid
    config: TrapConfig

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != len(self.grid):
            raise ArgumentError(f"matrix has {v.shape[0]} rows but grid has {len(self.grid)} points")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_electrodes(self):
        return self.values.shape[1]

    def digest(self):
        """Key of the (config, grid) pair this matrix was assembled for."""
        blob = json.dumps({"config": self.config.digest(), "grid": self.grid.spec()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def assemble_matrix(trap, grid, system=None):
    """Evaluate every electrode basis on the axis points (0, 0, z_j)."""
    if len(grid) < 2:
        raise ArgumentError("grid needs at least 2 points")
    try:
        system = system or BemSystem(trap)
        charges = system.solve_all()
    except NumericalError as exc:
        raise type(exc)(f"BEM solve failed: {exc}") from exc
    points = np.column_stack([np.zeros(len(grid)), np.zeros(len(grid)), grid.z])
    _check_off_surface(points, system.panels)
    values = rectangle_kernel(points, system.panels) @ charges
    bad = ~np.all(np.isfinite(values), axis=0)
    if np.any(bad):
        raise NumericalError(f"non-finite potential for electrode {int(np.where(bad)[0][0]) + 1}")
    return PotentialMatrix(values, grid, trap.config)


def superpose(A, v):
    """Axial potential phi_j = sum_i A[j, i] v_i."""
    from .probe import AxialPotential

    v = np.asarray(getattr(v, "volts", v), dtype=float)
    if v.shape != (A.n_electrodes,):
        raise ArgumentError(f"voltage set has length {v.size}, matrix expects {A.n_electrodes}")
    return AxialPotential(A.values @ v, A.grid, {"matrix": A.digest()})
