"""Coupled junction-cavity equations of motion and their adaptive integration.

Integration always happens in the internal coordinates (Bloch vector plus
complex cavity amplitude), which stay regular at xi = 0 and |z| = 1 where the
polar equations have coordinate singularities; polar output is reconstructed
per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import integrator
from .model import (
    DimensionlessParams,
    MeanFieldState,
    effective_detuning,
    effective_tunneling,
    energy_from_internal,
    from_internal,
    to_internal,
)

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-14
DEFAULT_DRIFT_BOUND = 1e-8

CENTER_LIKE = "center-like"
SADDLE_LIKE = "saddle-like"
MARGINAL = "marginal"


class StepUnderflowError(RuntimeError):
    """Step size underflow; carries the time at which integration stalled."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"step size underflow at tau={t:.6g}")


class EnergyDriftError(RuntimeError):
    """Relative energy drift exceeded the configured bound."""


class NonStationaryError(ValueError):
    """Stability analysis was asked for a state that is not a fixed point."""


def rhs(params: DimensionlessParams, state) -> np.ndarray:
    """Time derivative of the internal 5-vector (Sx, Sy, Sz, Re a, Im a).

    Accepts a MeanFieldState or an internal 5-vector.
    """
    y = to_internal(state) if isinstance(state, MeanFieldState) else np.asarray(state, dtype=float)
    if y.shape != (5,) or not np.all(np.isfinite(y)):
        raise ValueError("state must be finite (5-vector or MeanFieldState)")
    out = np.empty(5)
    integrator.rhs_into(integrator.FULL, y, params.as_vector(), out)
    return out


def rhs_polar(params: DimensionlessParams, state: MeanFieldState):
    """Literal polar-form derivatives (dz, dtheta, dxi, dphi); singular at poles."""
    z, theta, xi, phi = state.as_tuple()
    s = math.sqrt(1.0 - z * z)
    if s == 0.0 or xi == 0.0:
        raise ValueError("polar form is singular at |z| = 1 or xi = 0")
    nu = effective_tunneling(params, xi)
    delta = effective_detuning(params, z, theta)
    dz = -2.0 * nu * s * math.sin(theta)
    dtheta = (params.u + 2.0 * nu * math.cos(theta) / s) * z
    dxi = params.e * math.cos(phi)
    dphi = delta - (params.e / xi) * math.sin(phi)
    return dz, dtheta, dxi, dphi


@dataclass
class Trajectory:
    """Sampled solution of the coupled equations (immutable after construction)."""

    times: np.ndarray
    internal: np.ndarray
    params: DimensionlessParams
    initial: MeanFieldState
    rtol: float
    atol: float
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) < 1 or len(self.times) != len(self.internal):
            raise ValueError("times and samples must be non-empty and aligned")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(np.abs(self.internal[:, 2]) > 1.0 + 1e-9):
            raise ValueError("|z| exceeded 1 beyond tolerance; integration unreliable")

    @cached_property
    def z(self):
        return np.clip(self.internal[:, 2], -1.0, 1.0)

    @cached_property
    def theta(self):
        planar = np.hypot(self.internal[:, 0], self.internal[:, 1])
        return np.where(planar > 0, np.arctan2(self.internal[:, 1], self.internal[:, 0]), 0.0)

    @cached_property
    def xi(self):
        return np.hypot(self.internal[:, 3], self.internal[:, 4])

    @cached_property
    def phi(self):
        return np.where(self.xi > 0, np.arctan2(self.internal[:, 4], self.internal[:, 3]), 0.0)

    @cached_property
    def photon_number(self):
        return self.internal[:, 3] ** 2 + self.internal[:, 4] ** 2

    @cached_property
    def nu_eff(self):
        return 1.0 - (self.params.w12 / self.params.n_atoms) * self.photon_number

    @cached_property
    def delta_c_eff(self):
        return self.params.d_c - self.params.w0 - self.params.w12 * self.internal[:, 0]

    @cached_property
    def energy(self):
        return energy_from_internal(self.params, self.internal)

    @property
    def energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / max(abs(e0), 1.0))

    @property
    def bloch_norm(self):
        return np.sqrt(np.sum(self.internal[:, :3] ** 2, axis=1))

    def state(self, i: int) -> MeanFieldState:
        return from_internal(self.internal[i])

    def final_state(self) -> MeanFieldState:
        return self.state(len(self.times) - 1)


@dataclass(frozen=True)
class TrajectorySummary:
    z_min: float
    z_max: float
    zero_crossings: int
    xi_max: float
    energy_drift: float


def sample_grid(horizon: float, stride: float) -> np.ndarray:
    """Uniform output grid 0, stride, 2*stride, ... ending exactly at horizon."""
    n = int(math.floor(horizon / stride + 1e-9))
    ts = stride * np.arange(n + 1)
    if ts[-1] < horizon - 1e-9 * max(1.0, horizon):
        ts = np.append(ts, horizon)
    else:
        ts[-1] = horizon
    return ts


def integrate(
    params: DimensionlessParams,
    initial: MeanFieldState,
    horizon: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    stride: float = 0.1,
    max_step: float = np.inf,
    drift_bound: float | None = DEFAULT_DRIFT_BOUND,
) -> Trajectory:
    """Integrate the coupled equations over [0, horizon] with sampled output.

    Raises StepUnderflowError when the controller stalls (expected only for
    trajectories grazing the zero of the effective detuning, where the photon
    amplitude grows fast) and EnergyDriftError when the relative drift of the
    conserved energy exceeds ``drift_bound`` (pass None to only record it).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if rtol <= 0 or atol <= 0 or stride <= 0:
        raise ValueError("tolerances and stride must be positive")

    ts = sample_grid(horizon, stride)
    ys, n_filled, status, t_stop, n_acc, n_rej, n_fev, err_accum, min_delta = (
        integrator.integrate_kernel(
            integrator.FULL,
            params.as_vector(),
            to_internal(initial),
            ts,
            rtol,
            atol,
            float(max_step),
            0.0,
            0.0,
        )
    )
    if status == integrator.STATUS_UNDERFLOW:
        raise StepUnderflowError(t_stop)
    if status == integrator.STATUS_MAXSTEPS:
        raise StepUnderflowError(t_stop, f"step budget exhausted at tau={t_stop:.6g}")

    stats = {
        "n_accepted": int(n_acc),
        "n_rejected": int(n_rej),
        "n_fev": int(n_fev),
        "local_error_accum": float(err_accum),
        "min_abs_delta_c": float(min_delta),
    }
    traj = Trajectory(
        times=ts[:n_filled],
        internal=ys[:n_filled],
        params=params,
        initial=initial,
        rtol=rtol,
        atol=atol,
        stats=stats,
    )
    if drift_bound is not None and traj.energy_drift > drift_bound:
        raise EnergyDriftError(
            f"relative energy drift {traj.energy_drift:.3e} exceeds bound {drift_bound:.3e}"
        )
    return traj


def trajectory_summary(traj: Trajectory) -> TrajectorySummary:
    """Extrema, sign changes of z, photon peak, and recorded energy drift."""
    z = traj.z
    nonzero = z[z != 0.0]
    crossings = int(np.sum(np.sign(nonzero[1:]) != np.sign(nonzero[:-1]))) if nonzero.size > 1 else 0
    return TrajectorySummary(
        z_min=float(z.min()),
        z_max=float(z.max()),
        zero_crossings=crossings,
        xi_max=float(traj.xi.max()),
        energy_drift=traj.energy_drift,
    )


@dataclass(frozen=True)
class StabilityReport:
    """Linearization eigenvalues at a stationary state, sorted by real part."""

    eigenvalues: tuple
    classification: str
    pairing_defect: float

    @property
    def max_real(self) -> float:
        return max(ev.real for ev in self.eigenvalues)


def _tangent_projector(y: np.ndarray) -> np.ndarray:
    """5x4 orthonormal basis of (tangent-to-sphere x cavity plane) at y."""
    s = y[:3] / np.linalg.norm(y[:3])
    seed = np.array([1.0, 0.0, 0.0]) if abs(s[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = seed - np.dot(seed, s) * s
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(s, t1)
    p = np.zeros((5, 4))
    p[:3, 0] = t1
    p[:3, 1] = t2
    p[3, 2] = 1.0
    p[4, 3] = 1.0
    return p


def classify_stability(
    params: DimensionlessParams,
    candidate: MeanFieldState,
    fd_step: float = 1e-6,
    residual_tol: float = 1e-8,
) -> StabilityReport:
    """Linearize the flow at a stationary state by central finite differences.

    The 5-dimensional internal Jacobian carries a spurious neutral direction
    (radial to the Bloch sphere); the Jacobian is projected onto the
    4-dimensional physical tangent space before the eigenvalue solve.
    """
    y0 = to_internal(candidate)
    res = float(np.linalg.norm(rhs(params, y0)))
    if res > residual_tol:
        raise NonStationaryError(
            f"candidate has |rhs| = {res:.3e} > {residual_tol:.1e}; not a fixed point"
        )

    p = params.as_vector()
    jac = np.empty((5, 5))
    out_p = np.empty(5)
    out_m = np.empty(5)
    for j in range(5):
        yp = y0.copy()
        ym = y0.copy()
        yp[j] += fd_step
        ym[j] -= fd_step
        integrator.rhs_into(integrator.FULL, yp, p, out_p)
        integrator.rhs_into(integrator.FULL, ym, p, out_m)
        jac[:, j] = (out_p - out_m) / (2.0 * fd_step)

    proj = _tangent_projector(y0)
    reduced = proj.T @ jac @ proj
    eigvals = np.linalg.eigvals(reduced)
    order = np.lexsort((eigvals.imag, eigvals.real))
    eigvals = eigvals[order]

    # Hamiltonian flows give +/- pairs: after sorting by real part, opposite
    # ends pair up.
    defect = max(
        abs(eigvals[k] + eigvals[len(eigvals) - 1 - k]) for k in range(len(eigvals) // 2)
    )

    scale = max(1.0, float(np.max(np.abs(eigvals))))
    tol = 1e-6 * scale
    if np.max(eigvals.real) > tol:
        label = SADDLE_LIKE
    elif np.max(np.abs(eigvals.imag)) > tol:
        label = CENTER_LIKE
    else:
        label = MARGINAL
    return StabilityReport(
        eigenvalues=tuple(complex(v) for v in eigvals),
        classification=label,
        pairing_defect=float(defect),
    )
