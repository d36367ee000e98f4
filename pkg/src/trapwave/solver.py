"""SVD-based Tikhonov inversion of phi = A v with a continuity term.

With A = U S W^T (A is M x N: grid rows by electrodes), the regularized solution is

    v_alpha  = W diag(s / (s^2 + alpha^2)) U^T phi
    v'_alpha = v_alpha + W diag(alpha^2 / (s^2 + alpha^2)) W^T v_prev

which is the minimizer of ||A v - phi||^2 + alpha^2 ||v - v_prev||^2. Directions of
W beyond min(M, N) have no singular value and keep v_prev entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ArgumentError, InfeasibleError, NumericalError

ALPHA_START = 1e-6  # times s_max
ALPHA_FACTOR = 2.0
ALPHA_STEPS = 200


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray = field(repr=False)
    s: np.ndarray
    W: np.ndarray = field(repr=False)
    # grid rows the factored matrix was cut from; None means all rows
    rows: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.U.shape[0], self.W.shape[0]

    @property
    def s_max(self):
        return float(self.s[0]) if self.s.size else 0.0

    def reconstruct(self):
        M, N = self.shape
        S = np.zeros((M, N))
        S[np.arange(self.s.size), np.arange(self.s.size)] = self.s
        return self.U @ S @ self.W.T


@dataclass(frozen=True)
class TargetPotential:
    """Desired potential on the grid; only ``window`` rows enter the fit."""

    values: np.ndarray = field(repr=False)
    window: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        window = np.asarray(self.window, dtype=int)
        if window.size == 0:
            raise ArgumentError("target window is empty")
        if not np.all(np.isfinite(values[window])):
            raise ArgumentError("target potential is not finite on its window")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "window", window)

    @classmethod
    def full(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(values, np.arange(values.size))

    def on_rows(self, rows):
        if rows is None:
            if self.window.size != self.values.size:
                raise ArgumentError("factors cover all rows but the target has a partial window; decompose the window")
            return self.values
        if rows.size != self.window.size or np.any(rows != self.window):
            raise ArgumentError("SVD factors were computed for different rows than the target window")
        return self.values[rows]


@dataclass(frozen=True)
class VoltageSet:
    volts: np.ndarray
    alpha: float | None = None
    # singular directions dropped because s_k = 0 at alpha = 0
    dropped: tuple[int, ...] = ()

    def __len__(self):
        return self.volts.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.volts, dtype=dtype)

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.volts)))


def decompose(A, rows=None):
    """Full SVD of A (or of its ``rows`` subset). Accepts a PotentialMatrix or an array."""
    a = np.asarray(getattr(A, "values", A), dtype=float)
    if a.ndim != 2:
        raise ArgumentError("matrix must be 2-D")
    if rows is not None:
        rows = np.asarray(rows, dtype=int)
        a = a[rows]
    if not np.all(np.isfinite(a)):
        raise ArgumentError("matrix has non-finite entries")
    try:
        U, s, Wt = scipy.linalg.svd(a, full_matrices=True, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        try:
            U, s, Wt = scipy.linalg.svd(a, full_matrices=True, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"SVD did not converge: {exc}") from exc
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(s)) and np.all(np.isfinite(Wt))):
        raise NumericalError("SVD returned non-finite factors")
    return SvdFactors(U, s, Wt.T, rows)


def _projections(f, target, v_prev=None):
    phi = target.on_rows(f.rows) if isinstance(target, TargetPotential) else np.asarray(target, dtype=float)
    if phi.shape != (f.U.shape[0],):
        raise ArgumentError(f"target has {phi.size} rows, factors expect {f.U.shape[0]}")
    c = f.U[:, : f.s.size].T @ phi
    if v_prev is None:
        return c, None
    v_prev = np.asarray(getattr(v_prev, "volts", v_prev), dtype=float)
    if v_prev.shape != (f.W.shape[0],):
        raise ArgumentError(f"previous voltage set has length {v_prev.size}, expected {f.W.shape[0]}")
    return c, f.W.T @ v_prev


def filter_factors(s, alpha):
    """Tikhonov filter s^2 / (s^2 + alpha^2)."""
    s = np.asarray(s, dtype=float)
    return s * s / (s * s + alpha * alpha)


def tikhonov_apply(f, target, alpha):
    """v_alpha = W S_alpha^-1 U^T phi with S_alpha^-1 = s / (s^2 + alpha^2)."""
    if not alpha >= 0:
        raise ArgumentError(f"alpha must be non-negative, got {alpha!r}")
    c, _ = _projections(f, target)
    s = f.s
    dropped = ()
    if alpha == 0:
        live = s > 0
        dropped = tuple(int(k) for k in np.where(~live)[0])
        inv = np.zeros_like(s)
        inv[live] = 1.0 / s[live]
    else:
        inv = s / (s * s + alpha * alpha)
    y = inv * c
    return VoltageSet(f.W[:, : s.size] @ y, float(alpha), dropped)


def continuity_apply(f, target, alpha, v_prev):
    """v'_alpha = v_alpha + W D_alpha W^T v_prev, d_k = alpha^2 / (s_k^2 + alpha^2)."""
    if not alpha > 0:
        raise ArgumentError(f"continuity form needs alpha > 0, got {alpha!r}")
    c, p = _projections(f, target, v_prev)
    s = f.s
    a2 = alpha * alpha
    y = p.copy()  # d_k = 1 beyond the singular values
    y[: s.size] = (s * c + a2 * p[: s.size]) / (s * s + a2)
    return VoltageSet(f.W @ y, float(alpha))


def objective(A_rows, phi, v, v_prev, alpha):
    """||A v - phi||^2 + alpha^2 ||v - v_prev||^2."""
    r = A_rows @ v - phi
    d = v - v_prev
    return float(r @ r + alpha * alpha * (d @ d))


def select_alpha(f, target, v_prev, v_max, refine=False):
    """Smallest alpha on the doubling ladder whose continuity solution respects |v_i| <= v_max.

    With ``refine`` the bracket between the last infeasible and first feasible rung
    is bisected (on a log scale) for a smaller feasible alpha.
    """
    if not v_max > 0:
        raise ArgumentError(f"v_max must be positive, got {v_max!r}")
    v_prev = np.asarray(getattr(v_prev, "volts", v_prev), dtype=float)
    if np.any(np.abs(v_prev) > v_max):
        raise ArgumentError("previous voltage set violates the voltage limit")
    s_max = f.s_max
    if s_max == 0:
        raise NumericalError("matrix is identically zero")
    # rounding in W W^T v_prev may push a saturated channel a few ulp over the limit
    limit = v_max * (1 + 1e-12)
    alpha = ALPHA_START * s_max
    best = None
    last_bad = None
    for _ in range(ALPHA_STEPS):
        v = continuity_apply(f, target, alpha, v_prev)
        if v.max_abs <= limit:
            if refine and last_bad is not None:
                lo, hi = last_bad, alpha
                for _ in range(30):
                    mid = np.sqrt(lo * hi)
                    trial = continuity_apply(f, target, mid, v_prev)
                    if trial.max_abs <= limit:
                        hi, v = mid, trial
                    else:
                        lo = mid
                alpha = hi
            return alpha, VoltageSet(np.clip(v.volts, -v_max, v_max), alpha)
        if best is None or v.max_abs < best["max_abs"]:
            best = {"alpha": alpha, "max_abs": v.max_abs}
        last_bad = alpha
        alpha *= ALPHA_FACTOR
    raise InfeasibleError(
        f"no alpha up to {alpha / ALPHA_FACTOR:.3g} keeps |V| <= {v_max} V (best max |V| = {best['max_abs']:.4g} V)",
        best=best,
    )
