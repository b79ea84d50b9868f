"""Core model definitions: parameter set, state representations, derived quantities.

Everything downstream works in junction units: energies in units of the bare
tunneling energy J, time in units of hbar/J.  The atomic sector is carried
internally as a unit Bloch vector S = (sqrt(1-z^2) cos(theta),
sqrt(1-z^2) sin(theta), z) and the cavity as a complex amplitude
alpha = xi * exp(i*phi); both are regular at the coordinate poles xi = 0 and
|z| = 1 where the polar angles degenerate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class RegimeWarning(UserWarning):
    """Parameter set outside the red-detuned regime (still well defined)."""


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to the interval (-pi, pi]."""
    wrapped = np.mod(-np.asarray(angle) + math.pi, TWO_PI)
    out = -(wrapped - math.pi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DimensionlessParams:
    """The five couplings (units of J) plus atom number fixing one scenario.

    d_c      cavity detuning hbar*Delta_C / J
    w0       AC-Stark shift times atom number, W0*N_A / J
    w12      assisted-tunneling coupling times atom number, W12*N_A / J
    u        interaction times atom number, U*N_A / J
    e        pump amplitude hbar*eta / J
    n_atoms  total atom number N_A
    """

    d_c: float
    w0: float
    w12: float
    u: float
    e: float
    n_atoms: int

    def __post_init__(self):
        values = (self.d_c, self.w0, self.w12, self.u, self.e)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("non-finite coupling in parameter set")
        if self.n_atoms < 1 or int(self.n_atoms) != self.n_atoms:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms}")
        if self.e < 0:
            raise ValueError(f"pump amplitude must be >= 0, got {self.e}")
        if not (self.w0 <= 0 and self.w12 <= 0 and abs(self.w12) <= abs(self.w0)):
            warnings.warn(
                "couplings outside the red-detuned regime "
                f"(w0={self.w0}, w12={self.w12}); equations remain well defined",
                RegimeWarning,
                stacklevel=2,
            )

    def as_vector(self):
        """Parameter vector consumed by the compiled integration kernels."""
        return np.array(
            [self.d_c, self.w0, self.w12, self.u, self.e, float(self.n_atoms)]
        )


@dataclass(frozen=True)
class MeanFieldState:
    """Polar mean-field state X = (z, theta, xi, phi).

    z      fractional atom-number imbalance, |z| <= 1
    theta  relative atomic phase, wrapped to (-pi, pi]
    xi     photon field amplitude, xi >= 0 (photon number = xi^2)
    phi    photon phase, wrapped to (-pi, pi]

    At the poles the angles are degenerate and reported with the conventions
    theta = 0 at |z| = 1 and phi = 0 at xi = 0.
    """

    z: float
    theta: float
    xi: float
    phi: float

    _Z_SLACK = 1e-9

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.z, self.theta, self.xi, self.phi)):
            raise ValueError("non-finite state component")
        if abs(self.z) > 1.0 + self._Z_SLACK:
            raise ValueError(f"imbalance out of range: z={self.z}")
        if self.xi < 0:
            raise ValueError(f"photon amplitude must be >= 0, got xi={self.xi}")
        object.__setattr__(self, "z", min(1.0, max(-1.0, self.z)))
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    @property
    def alpha(self) -> complex:
        return self.xi * complex(math.cos(self.phi), math.sin(self.phi))

    @property
    def bloch(self):
        s = math.sqrt(max(0.0, 1.0 - self.z * self.z))
        return np.array([s * math.cos(self.theta), s * math.sin(self.theta), self.z])

    @property
    def at_angle_pole(self) -> bool:
        """True when theta and/or phi are convention values, not dynamical ones."""
        return self.xi == 0.0 or abs(self.z) == 1.0

    def as_tuple(self):
        return (self.z, self.theta, self.xi, self.phi)


def to_internal(state: MeanFieldState) -> np.ndarray:
    """Map a polar state to the regular 5-vector (Sx, Sy, Sz, Re alpha, Im alpha)."""
    sx, sy, sz = state.bloch
    a = state.alpha
    return np.array([sx, sy, sz, a.real, a.imag])


def from_internal(y) -> MeanFieldState:
    """Map an internal 5-vector back to polar form (pole conventions applied).

    The Bloch part is renormalized; integrator norm drift beyond 1e-6 is an
    error rather than silently hidden.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (5,) or not np.all(np.isfinite(y)):
        raise ValueError("internal state must be a finite 5-vector")
    norm = math.sqrt(y[0] ** 2 + y[1] ** 2 + y[2] ** 2)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"Bloch vector norm {norm} too far from 1")
    sx, sy, sz = y[:3] / norm
    z = min(1.0, max(-1.0, sz))
    theta = math.atan2(sy, sx) if abs(z) < 1.0 else 0.0
    xi = math.hypot(y[3], y[4])
    phi = math.atan2(y[4], y[3]) if xi > 0.0 else 0.0
    return MeanFieldState(z=z, theta=theta, xi=xi, phi=phi)


def effective_detuning(params: DimensionlessParams, z, theta):
    """Effective cavity detuning d_c - w0 - w12*sqrt(1-z^2)*cos(theta), units J/hbar."""
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) > 1.0):
        raise ValueError("effective_detuning requires |z| <= 1")
    out = params.d_c - params.w0 - params.w12 * np.sqrt(1.0 - z * z) * np.cos(theta)
    return out if out.ndim else float(out)


def effective_tunneling(params: DimensionlessParams, xi):
    """Photon-assisted tunneling rate 1 - (w12/N_A)*xi^2, units J/hbar."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("effective_tunneling requires xi >= 0")
    out = 1.0 - (params.w12 / params.n_atoms) * xi * xi
    return out if out.ndim else float(out)


def energy_from_internal(params: DimensionlessParams, y):
    """Conserved mean-field energy E/J evaluated on internal coordinates.

    Accepts a single 5-vector or an (n, 5) array of samples.  Regular at the
    poles: 2*e*xi*sin(phi) = 2*e*Im(alpha) and sqrt(1-z^2)*cos(theta) = Sx.
    """
    y = np.asarray(y, dtype=float)
    sx, sz = y[..., 0], y[..., 2]
    ar, ai = y[..., 3], y[..., 4]
    n_ph = ar * ar + ai * ai
    atoms = params.n_atoms * (params.u * (1.0 + sz * sz) / 4.0 - sx)
    out = -params.d_c * n_ph + 2.0 * params.e * ai + atoms + n_ph * (params.w0 + params.w12 * sx)
    return out if out.ndim else float(out)


def mean_field_energy(params: DimensionlessParams, state: MeanFieldState) -> float:
    """Conserved mean-field energy E/J of a polar state.

    The coupled equations of motion are the canonical flow of this function
    with pairs (theta, N_A*z/2) and (phi, xi^2); the finite-difference
    consistency test in the suite pins that property down.
    """
    return float(energy_from_internal(params, to_internal(state)))


@dataclass(frozen=True)
class DerivedQuantities:
    """Per-state derived scalars reported alongside trajectories."""

    nu_eff: float
    delta_c_eff: float
    photon_number: float
    energy: float

    @classmethod
    def from_state(cls, params: DimensionlessParams, state: MeanFieldState):
        return cls(
            nu_eff=effective_tunneling(params, state.xi),
            delta_c_eff=effective_detuning(params, state.z, state.theta),
            photon_number=state.xi ** 2,
            energy=mean_field_energy(params, state),
        )
